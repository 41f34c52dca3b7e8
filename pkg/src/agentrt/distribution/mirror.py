"""Agents hosted in a subprocess behind a mirror container.

The parent keeps the agent's aid registered under its own address and
relays over a socket pair using the TCP frame format. Frame bodies are
codec-encoded maps with a ``kind`` key:

parent -> child
    ``deliver`` (envelope), ``advance`` (time), ``shutdown``
child -> parent
    ``hello`` (ok, error), ``send`` (envelope), ``subscribe``/``unsubscribe``
    (aid, topic), ``publish`` (aid, topic, payload, meta),
    ``status`` (processed, next_wake)

The child reports ``status`` whenever it is quiescent and something changed;
the parent considers the mirror quiescent once the child has processed every
``deliver``/``advance`` frame sent to it.

Child command line: ``python -m agentrt.distribution.child --fd N --codec
FLAVOR --manifest JSON --endpoint ENDPOINT --aid AID --factory ID
[--params B64] --clock KIND --time T``. A manifest that disagrees with the
child's own registry aborts the child with a version error (exit code 3).
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import logging
import socket
import subprocess
import sys
from typing import Any, Callable, Sequence

from ..clock import ExternalClock, RealClock
from ..codec import make_codec
from ..container.base import Container
from ..container.framing import frame, read_frame
from ..errors import DecodeError, LifecycleError, SpawnError
from ..messaging import AgentAddress, Endpoint, Envelope
from ..runtime import Runtime
from .registry import AGENT_FACTORIES, build_registry, import_modules

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
VERSION_ERROR_EXIT = 3
HealthCallback = Callable[[str, "int | None"], Any]


def _manifest(container: Container, modules: Sequence[str], registry_factory: str | None) -> dict:
    return {
        "protocol": PROTOCOL_VERSION,
        "modules": list(modules),
        "registry_factory": registry_factory,
        "types": [list(pair) for pair in container.codec.registry.manifest()],
    }


class MirrorLink:
    """Parent-side end of the IPC channel to one agent subprocess."""

    def __init__(self, container: Container, aid: str, process, reader, writer, health_callback=None):
        self.container = container
        self.aid = aid
        self.process = process
        self.reader = reader
        self.writer = writer
        self.health_callback = health_callback
        self.alive = True
        self.returncode: int | None = None
        self.sent_frames = 0
        self.processed = 0
        self.next_wake: float | None = None
        self._reader_task: asyncio.Task | None = None
        self._closing = False
        self._clock_listener = None

    def start(self) -> None:
        self._reader_task = asyncio.get_running_loop().create_task(self._read_loop())
        clock = self.container.clock
        if isinstance(clock, ExternalClock):
            self._clock_listener = lambda t: self._send_frame({"kind": "advance", "time": t}, counted=True) and None
            clock.add_listener(self._clock_listener)

    def _send_frame(self, body: dict, counted: bool = False) -> int:
        """Write one frame; returns its size on the wire, 0 if the link is down."""
        if not self.alive or self.writer.is_closing():
            return 0
        data = frame(self.container.codec.encode(body))
        self.writer.write(data)
        if counted:
            self.sent_frames += 1
        return len(data)

    def forward(self, envelope: Envelope) -> bool:
        size = self._send_frame({"kind": "deliver", "envelope": envelope}, counted=True)
        if size:
            self.container.counters_for("ipc").sent(size)
        return bool(size)

    def busy_report(self) -> list[str]:
        if not self.alive or self.processed == self.sent_frames:
            return []
        return [f"mirror {self.aid}: {self.sent_frames - self.processed} frames unacknowledged"]

    def next_activity(self) -> float | None:
        return self.next_wake if self.alive else None

    async def _read_loop(self) -> None:
        try:
            while True:
                body = await read_frame(self.reader)
                if body is None:
                    break
                message = self.container.codec.decode(body)
                if message.get("kind") == "send":
                    self.container.counters_for("ipc").received(len(body) + 4)
                await self._handle(message)
        except (DecodeError, ConnectionError) as exc:
            if not self._closing:
                logger.error("mirror %s: channel error: %s", self.aid, exc)
        except asyncio.CancelledError:
            return
        await self._lost()

    async def _handle(self, message: dict) -> None:
        kind = message.get("kind")
        container = self.container
        if kind == "send":
            envelope: Envelope = message["envelope"]
            if container.running:
                await container.send_message(
                    envelope.payload, envelope.receiver, sender_aid=self.aid, meta=dict(envelope.meta)
                )
        elif kind == "status":
            self.processed = message["processed"]
            self.next_wake = message["next_wake"]
            container.runtime.notify()
        elif kind == "subscribe":
            container.subscribe(self.aid, message["topic"])
        elif kind == "unsubscribe":
            container.unsubscribe(self.aid, message["topic"])
        elif kind == "publish":
            if container.running:
                container.publish(message["topic"], message["payload"], sender_aid=self.aid, meta=message["meta"])
        else:
            logger.warning("mirror %s: unknown frame kind %r", self.aid, kind)

    async def _lost(self) -> None:
        if not self.alive:
            return
        self.alive = False
        if self._clock_listener is not None:
            self.container.clock.remove_listener(self._clock_listener)
        self.container._detach_mirror(self.aid)
        try:
            self.returncode = await asyncio.wait_for(self.process.wait(), 5.0)
        except asyncio.TimeoutError:
            self.returncode = None
        if not self._closing:
            logger.error("mirror %s: agent process exited (code %s)", self.aid, self.returncode)
            if self.health_callback is not None:
                try:
                    result = self.health_callback(self.aid, self.returncode)
                    if asyncio.iscoroutine(result):
                        await result
                except Exception:
                    logger.exception("health callback for %s raised", self.aid)
        self.container.runtime.notify()

    async def close(self) -> None:
        self._closing = True
        if self.alive:
            self._send_frame({"kind": "shutdown"})
            try:
                await asyncio.wait_for(self.process.wait(), 5.0)
            except asyncio.TimeoutError:
                self.process.kill()
                await self.process.wait()
        if self._reader_task is not None:
            try:
                await asyncio.wait_for(self._reader_task, 2.0)
            except (asyncio.TimeoutError, asyncio.CancelledError):
                self._reader_task.cancel()
        self.writer.close()
        self.alive = False

    def kill(self) -> None:
        """Hard-kill the agent process (used by fault-injection tests)."""
        self.process.kill()


async def spawn_agent_process(
    container: Container,
    factory_id: str,
    suggested_aid: str | None = None,
    params: dict | None = None,
    modules: Sequence[str] = (),
    registry_factory: str | None = None,
    health_callback: HealthCallback | None = None,
    boot_timeout: float = 30.0,
) -> str:
    """Host a new agent in a subprocess; returns its aid in ``container``."""
    if not container.running:
        raise LifecycleError("container must be running to spawn agent processes")
    aid = container._reserve_aid(suggested_aid)
    clock = container.clock
    parent_sock, child_sock = socket.socketpair()
    manifest = _manifest(container, modules, registry_factory)
    args = [
        sys.executable,
        "-m",
        "agentrt.distribution.child",
        "--fd", str(child_sock.fileno()),
        "--codec", container.codec.flavor,
        "--manifest", json.dumps(manifest),
        "--endpoint", str(container.address),
        "--aid", aid,
        "--factory", factory_id,
        "--params", base64.b64encode(container.codec.encode(params or {})).decode(),
        "--clock", clock.kind,
        "--time", repr(clock.now()),
    ]
    try:
        process = await asyncio.create_subprocess_exec(
            *args, pass_fds=[child_sock.fileno()], stdin=subprocess.DEVNULL, stdout=subprocess.DEVNULL
        )
    finally:
        child_sock.close()
    reader, writer = await asyncio.open_connection(sock=parent_sock)
    try:
        body = await asyncio.wait_for(read_frame(reader), boot_timeout)
    except (asyncio.TimeoutError, DecodeError) as exc:
        process.kill()
        writer.close()
        raise SpawnError(f"agent process for {factory_id!r} did not boot: {exc!r}") from None
    hello = container.codec.decode(body) if body is not None else None
    if not isinstance(hello, dict) or hello.get("kind") != "hello" or not hello.get("ok"):
        await process.wait()
        writer.close()
        reason = hello.get("error") if isinstance(hello, dict) else f"exit code {process.returncode}"
        raise SpawnError(f"agent process for {factory_id!r} failed to start: {reason}")
    link = MirrorLink(container, aid, process, reader, writer, health_callback)
    container._attach_mirror(aid, link)
    link.processed = hello.get("processed", 0)
    link.next_wake = hello.get("next_wake")
    link.start()
    return aid


def mirror_link(container: Container, aid: str) -> MirrorLink | None:
    return container._mirrors.get(aid)


# -- child side -----------------------------------------------------------------


class _RelayTransport:
    kind = "ipc"

    def __init__(self, container: MirrorContainer):
        self.container = container

    async def start(self) -> Endpoint:
        return self.container.address

    async def stop(self) -> None:
        pass

    async def send(self, envelope: Envelope) -> bool:
        return self.container.relay({"kind": "send", "envelope": envelope})


class MirrorContainer(Container):
    """Child-side container sharing the parent's address.

    Messages for agents hosted in this process stay local; everything else is
    relayed to the parent, which routes it as if sent by the mirrored agent.
    """

    def __init__(self, endpoint, writer: asyncio.StreamWriter, **kwargs):
        super().__init__(endpoint, **kwargs)
        self.transport = _RelayTransport(self)
        self._writer = writer

    def relay(self, body: dict) -> bool:
        if self._writer.is_closing():
            return False
        data = frame(self.codec.encode(body))
        self._writer.write(data)
        self.counters_for("ipc").sent(len(data))
        return True

    async def send_message(self, payload, receiver: AgentAddress, sender_aid=None, meta=None) -> bool:
        if not self.running:
            raise LifecycleError(f"container {self.address} is {self.state.value}")
        if receiver.endpoint == self.address and receiver.aid in self._slots:
            return await super().send_message(payload, receiver, sender_aid, meta)
        sender = AgentAddress(self.address, sender_aid) if sender_aid is not None else None
        return self.relay({"kind": "send", "envelope": Envelope(receiver, payload, sender, meta or {})})

    def subscribe(self, aid: str, topic: str) -> None:
        self.relay({"kind": "subscribe", "aid": aid, "topic": topic})

    def unsubscribe(self, aid: str, topic: str) -> None:
        self.relay({"kind": "unsubscribe", "aid": aid, "topic": topic})

    def publish(self, topic: str, payload, sender_aid=None, meta=None) -> int:
        # fan-out happens in the parent; the count is not known here
        self.codec.encode(payload)
        self.relay({"kind": "publish", "aid": sender_aid, "topic": topic, "payload": payload, "meta": dict(meta or {})})
        return 0


def _parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="agentrt.distribution.child")
    parser.add_argument("--fd", type=int, required=True)
    parser.add_argument("--codec", required=True)
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--endpoint", required=True)
    parser.add_argument("--aid", required=True)
    parser.add_argument("--factory", required=True)
    parser.add_argument("--params", default="")
    parser.add_argument("--clock", default="real", choices=["real", "external"])
    parser.add_argument("--time", type=float, default=0.0)
    return parser.parse_args(argv)


async def _child(args: argparse.Namespace) -> int:
    sock = socket.socket(fileno=args.fd)
    reader, writer = await asyncio.open_connection(sock=sock)
    manifest = json.loads(args.manifest)

    def fail(message: str) -> None:
        codec = make_codec(args.codec)
        writer.write(frame(codec.encode({"kind": "hello", "ok": False, "error": message})))

    try:
        import_modules(manifest.get("modules", []))
        registry = build_registry(manifest.get("registry_factory"))
    except Exception as exc:
        fail(f"bootstrap failed: {type(exc).__name__}: {exc}")
        await writer.drain()
        return 1
    expected = [tuple(pair) for pair in manifest.get("types", [])]
    if manifest.get("protocol") != PROTOCOL_VERSION or registry.manifest() != expected:
        message = f"version error: manifest mismatch (parent {expected}, child {registry.manifest()})"
        print(message, file=sys.stderr)
        fail(message)
        await writer.drain()
        return VERSION_ERROR_EXIT
    factory = AGENT_FACTORIES.get(args.factory)
    if factory is None:
        fail(f"unknown agent factory {args.factory!r}")
        await writer.drain()
        return 1
    codec = make_codec(args.codec, registry)
    clock = ExternalClock(args.time) if args.clock == "external" else RealClock()
    runtime = Runtime(record_transcript=False)
    container = MirrorContainer(args.endpoint, writer, codec=codec, clock=clock, runtime=runtime)
    params = codec.decode(base64.b64decode(args.params)) if args.params else {}
    try:
        agent = factory(**params)
        container.register(agent, args.aid)
        await container.start()
    except Exception as exc:
        fail(f"agent construction failed: {type(exc).__name__}: {exc}")
        await writer.drain()
        return 1

    processed = 0
    changed = asyncio.Event()
    runtime.add_listener(changed.set)

    await container.tasks_complete_or_sleeping()
    writer.write(frame(codec.encode({"kind": "hello", "ok": True, "processed": 0, "next_wake": container.next_activity()})))
    last_status = (0, container.next_activity())

    async def report() -> None:
        nonlocal last_status
        while True:
            await changed.wait()
            changed.clear()
            await container.tasks_complete_or_sleeping()
            status = (processed, container.next_activity())
            if status != last_status:
                last_status = status
                writer.write(frame(codec.encode({"kind": "status", "processed": status[0], "next_wake": status[1]})))

    reporter = asyncio.get_running_loop().create_task(report())
    try:
        while True:
            body = await read_frame(reader)
            if body is None:
                break
            message = codec.decode(body)
            kind = message.get("kind")
            if kind == "deliver":
                container._route_inbound(message["envelope"], "ipc")
            elif kind == "advance":
                clock.set_time(message["time"])
            elif kind == "shutdown":
                break
            processed += 1
            changed.set()
            await writer.drain()
    finally:
        reporter.cancel()
        await container.shutdown()
        writer.close()
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    return asyncio.run(_child(_parse_args(argv)))
