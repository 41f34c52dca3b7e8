from __future__ import annotations

import asyncio
import concurrent.futures
import itertools
import logging
import multiprocessing
import os
import traceback
from typing import Any, Sequence

from ..codec import make_codec
from ..errors import ProcessTaskError
from .registry import FUNCTIONS, build_registry, import_modules

logger = logging.getLogger(__name__)

_POLL = 0.05
DEFAULT_MODULES = ("agentrt.distribution.functions",)


def _worker_main(conn, modules: Sequence[str], flavor: str, registry_factory: str | None) -> None:
    import_modules(modules)
    codec = make_codec(flavor, build_registry(registry_factory))
    while True:
        try:
            message = conn.recv()
        except EOFError:
            return
        if message is None:
            return
        task_id, function_id, data = message
        try:
            func = FUNCTIONS[function_id]
            result = func(codec.decode(data))
            reply = (task_id, True, codec.encode(result))
        except Exception as exc:
            reply = (task_id, False, f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")
        conn.send(reply)


class _Worker:
    def __init__(self, ctx, modules, flavor, registry_factory):
        self.conn, child_conn = ctx.Pipe()
        self.process = ctx.Process(
            target=_worker_main,
            args=(child_conn, tuple(modules), flavor, registry_factory),
            daemon=True,
        )
        self.process.start()
        child_conn.close()
        self.current: int | None = None

    @property
    def pid(self) -> int | None:
        return self.process.pid

    def stop(self) -> None:
        try:
            self.conn.send(None)
        except (OSError, BrokenPipeError):
            pass
        self.process.join(1.0)
        if self.process.is_alive():
            self.process.kill()
            self.process.join(1.0)
        self.conn.close()


class _WorkerDied(Exception):
    pass


class WorkerPool:
    """Fixed-size pool of worker processes running registered functions.

    Each worker runs one task at a time. If a worker dies mid-task, that task
    fails with :class:`ProcessTaskError` and the worker is replaced; other
    tasks are unaffected.
    """

    def __init__(
        self,
        size: int | None = None,
        modules: Sequence[str] = (),
        codec_flavor: str = "json",
        registry_factory: str | None = None,
        start_method: str = "spawn",
    ):
        self.size = size or os.cpu_count() or 1
        if self.size < 1:
            raise ValueError("pool size must be >= 1")
        self.modules = tuple(dict.fromkeys([*DEFAULT_MODULES, *modules]))
        self.flavor = codec_flavor
        self.registry_factory = registry_factory
        import_modules(self.modules)
        self.codec = make_codec(codec_flavor, build_registry(registry_factory))
        self._ctx = multiprocessing.get_context(start_method)
        self._workers: list[_Worker] = []
        self._idle: asyncio.Queue | None = None
        self._idle_loop: asyncio.AbstractEventLoop | None = None
        self._started = False
        self._threads = concurrent.futures.ThreadPoolExecutor(max_workers=self.size, thread_name_prefix="pool-io")
        self._ids = itertools.count()
        self.respawns = 0
        self._closed = False

    def start(self) -> WorkerPool:
        """Spawn the workers (done lazily by the first :meth:`run`)."""
        if not self._started:
            self._started = True
            self._workers = [self._spawn() for _ in range(self.size)]
        return self

    def _idle_queue(self) -> asyncio.Queue:
        # the pool may outlive an event loop; queues may not
        loop = asyncio.get_running_loop()
        if self._idle is None or self._idle_loop is not loop:
            self._idle = asyncio.Queue()
            self._idle_loop = loop
            for worker in self._workers:
                if worker.current is None:
                    self._idle.put_nowait(worker)
        return self._idle

    def _spawn(self) -> _Worker:
        return _Worker(self._ctx, self.modules, self.flavor, self.registry_factory)

    @property
    def workers(self) -> list[_Worker]:
        return list(self._workers)

    def busy_pids(self) -> list[int]:
        return [w.pid for w in self._workers if w.current is not None]

    async def run(self, function_id: str, input: Any = None) -> Any:
        if self._closed:
            raise ProcessTaskError("pool is shut down")
        if function_id not in FUNCTIONS:
            raise ProcessTaskError(f"unknown process function {function_id!r}")
        data = self.codec.encode(input)
        self.start()
        idle = self._idle_queue()
        task_id = next(self._ids)
        worker = await idle.get()
        worker.current = task_id
        loop = asyncio.get_running_loop()
        try:
            ok, body = await loop.run_in_executor(self._threads, self._roundtrip, worker, task_id, function_id, data)
        except _WorkerDied as exc:
            replacement = self._replace(worker)
            idle.put_nowait(replacement)
            raise ProcessTaskError(f"worker died while running {function_id!r}: {exc}") from None
        except asyncio.CancelledError:
            # the worker is still busy with the abandoned task; replace it
            worker.process.kill()
            idle.put_nowait(self._replace(worker))
            raise
        finally:
            worker.current = None
        idle.put_nowait(worker)
        if not ok:
            raise ProcessTaskError(f"{function_id!r} raised in worker: {body}")
        return self.codec.decode(body)

    def _roundtrip(self, worker: _Worker, task_id: int, function_id: str, data: bytes):
        try:
            worker.conn.send((task_id, function_id, data))
        except (OSError, BrokenPipeError) as exc:
            raise _WorkerDied(str(exc)) from None
        while True:
            try:
                ready = worker.conn.poll(_POLL)
            except (OSError, EOFError) as exc:
                raise _WorkerDied(str(exc)) from None
            if ready:
                try:
                    reply_id, ok, body = worker.conn.recv()
                except (EOFError, OSError) as exc:
                    raise _WorkerDied(f"exit code {worker.process.exitcode}") from None
                if reply_id != task_id:
                    logger.error("worker %s answered task %s while running %s", worker.pid, reply_id, task_id)
                    continue
                return ok, body
            if not worker.process.is_alive():
                raise _WorkerDied(f"exit code {worker.process.exitcode}")

    def _replace(self, dead: _Worker) -> _Worker:
        dead.process.join(0.1)
        dead.conn.close()
        replacement = self._spawn()
        self._workers[self._workers.index(dead)] = replacement
        self.respawns += 1
        return replacement

    def shutdown(self) -> None:
        if self._closed:
            return
        self._closed = True
        for worker in self._workers:
            worker.stop()
        self._threads.shutdown(wait=False)

    def __enter__(self) -> WorkerPool:
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()
