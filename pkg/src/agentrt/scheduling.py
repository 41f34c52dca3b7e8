"""Per-agent task scheduler.

Task kinds: instant, timestamped, periodic (fixed schedule ``t0 + k*interval``,
first run at ``t0 + interval``), delayed, conditional and process tasks.
Bodies are callables (sync or async); one-shot kinds also accept a coroutine
object. Every body except a process task's runs while holding the owning
agent's dispatch lock, so it never overlaps that agent's message handlers.
"""

from __future__ import annotations

import asyncio
import enum
import inspect
import itertools
import logging
from dataclasses import dataclass
from typing import Any, Callable

from .clock import Clock
from .errors import LifecycleError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_POLL_INTERVAL = 0.1


class TaskState(str, enum.Enum):
    PENDING = "pending"
    RUNNING = "running"
    SLEEPING = "sleeping"
    FINISHED = "finished"
    CANCELLED = "cancelled"

    @property
    def terminal(self) -> bool:
        return self in (TaskState.FINISHED, TaskState.CANCELLED)


class TaskKind(str, enum.Enum):
    INSTANT = "instant"
    TIMESTAMP = "timestamp"
    PERIODIC = "periodic"
    DELAYED = "delayed"
    CONDITIONAL = "conditional"
    PROCESS = "process"


@dataclass(frozen=True)
class ScheduledTask:
    kind: TaskKind
    body: Any = None
    timestamp: float | None = None
    interval: float | None = None
    delay: float | None = None
    condition: Callable[[], bool] | None = None
    poll_interval: float = DEFAULT_POLL_INTERVAL
    function_id: str | None = None
    input: Any = None
    name: str | None = None

    def __post_init__(self):
        if self.kind is TaskKind.PERIODIC and not (self.interval is not None and self.interval > 0):
            raise ValidationError(f"periodic interval must be > 0, got {self.interval!r}")
        if self.kind is TaskKind.DELAYED and not (self.delay is not None and self.delay >= 0):
            raise ValidationError(f"delay must be >= 0, got {self.delay!r}")
        if self.kind is TaskKind.TIMESTAMP and self.timestamp is None:
            raise ValidationError("timestamp task needs a timestamp")
        if self.kind is TaskKind.CONDITIONAL:
            if self.condition is None:
                raise ValidationError("conditional task needs a condition")
            if not self.poll_interval > 0:
                raise ValidationError(f"poll interval must be > 0, got {self.poll_interval!r}")
        if self.kind is TaskKind.PROCESS and not self.function_id:
            raise ValidationError("process task needs a function id")
        if self.kind in (TaskKind.PERIODIC, TaskKind.CONDITIONAL) and inspect.iscoroutine(self.body):
            raise ValidationError("repeating tasks need a callable body, not a coroutine object")

    @classmethod
    def instant(cls, body, name=None):
        return cls(TaskKind.INSTANT, body, name=name)

    @classmethod
    def at(cls, timestamp: float, body, name=None):
        return cls(TaskKind.TIMESTAMP, body, timestamp=timestamp, name=name)

    @classmethod
    def periodic(cls, interval: float, body, name=None):
        return cls(TaskKind.PERIODIC, body, interval=interval, name=name)

    @classmethod
    def delayed(cls, delay: float, body, name=None):
        return cls(TaskKind.DELAYED, body, delay=delay, name=name)

    @classmethod
    def conditional(cls, condition, body, poll_interval: float = DEFAULT_POLL_INTERVAL, name=None):
        return cls(TaskKind.CONDITIONAL, body, condition=condition, poll_interval=poll_interval, name=name)

    @classmethod
    def process(cls, function_id: str, input: Any = None, name=None):
        return cls(TaskKind.PROCESS, function_id=function_id, input=input, name=name)


class _StopAfterRun(Exception):
    pass


class TaskHandle:
    """Live view of a scheduled task: state, stop, and completion."""

    def __init__(self, scheduler: Scheduler, task_id: int, task: ScheduledTask):
        self.task_id = task_id
        self.task = task
        self.fire_count = 0
        self.result: Any = None
        self.error: BaseException | None = None
        self._scheduler = scheduler
        self._state = TaskState.PENDING
        self._stop_requested = False
        self._runner: asyncio.Task | None = None

    @property
    def state(self) -> TaskState:
        return self._state

    def status(self) -> TaskState:
        return self._state

    def done(self) -> bool:
        return self._state.terminal

    def _set_state(self, state: TaskState) -> None:
        if self._state.terminal:
            return
        self._state = state
        self._scheduler._changed(self)

    def stop(self) -> None:
        if self._state.terminal or self._stop_requested:
            return
        self._stop_requested = True
        if self._state is not TaskState.RUNNING and self._runner is not None:
            self._runner.cancel()
            self._set_state(TaskState.CANCELLED)

    async def wait(self) -> Any:
        if self._runner is not None and not self._runner.done():
            await asyncio.shield(self._runner)
        if self.error is not None:
            raise self.error
        return self.result

    def __repr__(self) -> str:
        label = self.task.name or self.task.kind.value
        return f"<TaskHandle {self.task_id} {label} {self._state.value}>"


async def _call(body: Any) -> Any:
    if inspect.iscoroutine(body):
        return await body
    result = body()
    if inspect.isawaitable(result):
        result = await result
    return result


class Scheduler:
    """Schedules and tracks one agent's tasks.

    ``dispatch_lock`` is shared with the agent's mailbox dispatcher;
    ``on_fire(aid, task_id, time)`` is called whenever a body starts and
    ``on_change()`` after every state transition.
    """

    def __init__(
        self,
        clock: Clock,
        dispatch_lock: asyncio.Lock | None = None,
        owner: str = "",
        on_fire: Callable[[str, int, float], None] | None = None,
        on_change: Callable[[], None] | None = None,
        pool_provider: Callable[[], Any] | None = None,
    ):
        self.clock = clock
        self.owner = owner
        self._lock = dispatch_lock or asyncio.Lock()
        self._on_fire = on_fire
        self._on_change = on_change
        self._pool_provider = pool_provider
        self._ids = itertools.count()
        self._active: dict[int, TaskHandle] = {}
        self._stopped = False

    @property
    def stopped(self) -> bool:
        return self._stopped

    def schedule(self, task: ScheduledTask) -> TaskHandle:
        if self._stopped:
            raise LifecycleError(f"scheduler of {self.owner or 'agent'} is stopped")
        handle = TaskHandle(self, next(self._ids), task)
        self._active[handle.task_id] = handle
        handle._runner = asyncio.get_running_loop().create_task(self._run(handle))
        self._changed(handle)
        return handle

    def schedule_instant_task(self, body, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.instant(body, name))

    def schedule_timestamp_task(self, body, timestamp: float, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.at(timestamp, body, name))

    def schedule_periodic_task(self, body, interval: float, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.periodic(interval, body, name))

    def schedule_delayed_task(self, body, delay: float, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.delayed(delay, body, name))

    def schedule_conditional_task(self, body, condition, poll_interval=DEFAULT_POLL_INTERVAL, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.conditional(condition, body, poll_interval, name))

    def schedule_process_task(self, function_id: str, input: Any = None, name=None) -> TaskHandle:
        return self.schedule(ScheduledTask.process(function_id, input, name))

    @property
    def tasks(self) -> list[TaskHandle]:
        return list(self._active.values())

    def quiescent(self) -> bool:
        return all(h.state is TaskState.SLEEPING for h in self._active.values())

    def busy_tasks(self) -> list[TaskHandle]:
        return [h for h in self._active.values() if h.state is not TaskState.SLEEPING]

    async def shutdown(self) -> None:
        self._stopped = True
        handles = list(self._active.values())
        for handle in handles:
            handle.stop()
        runners = [h._runner for h in handles if h._runner is not None]
        if runners:
            await asyncio.gather(*runners, return_exceptions=True)

    def _changed(self, handle: TaskHandle) -> None:
        if handle.state.terminal:
            self._active.pop(handle.task_id, None)
        if self._on_change is not None:
            self._on_change()

    async def _run(self, handle: TaskHandle) -> None:
        task = handle.task
        try:
            if task.kind is TaskKind.INSTANT:
                await self._fire(handle)
            elif task.kind is TaskKind.TIMESTAMP:
                await self._sleep(handle, task.timestamp)
                await self._fire(handle)
            elif task.kind is TaskKind.DELAYED:
                if task.delay > 0:
                    await self._sleep(handle, self.clock.now() + task.delay)
                await self._fire(handle)
            elif task.kind is TaskKind.PERIODIC:
                start = self.clock.now()
                for k in itertools.count(1):
                    await self._sleep(handle, start + k * task.interval)
                    await self._fire(handle)
            elif task.kind is TaskKind.CONDITIONAL:
                while not self._check(handle):
                    await self._sleep(handle, self.clock.now() + task.poll_interval)
                await self._fire(handle)
            else:
                await self._fire_process(handle)
            handle._set_state(TaskState.FINISHED)
        except (asyncio.CancelledError, _StopAfterRun):
            handle._set_state(TaskState.CANCELLED)
        except Exception as exc:
            logger.exception("task %r of %s failed", handle, self.owner)
            handle.error = exc
            handle._set_state(TaskState.FINISHED)

    async def _sleep(self, handle: TaskHandle, wake: float) -> None:
        if wake > self.clock.now():
            handle._set_state(TaskState.SLEEPING)
        await self.clock.sleep_until(wake, on_release=lambda: handle._set_state(TaskState.PENDING))

    def _check(self, handle: TaskHandle) -> bool:
        try:
            return bool(handle.task.condition())
        except Exception:
            logger.exception("condition of task %r raised; treated as false", handle)
            return False

    async def _fire(self, handle: TaskHandle) -> None:
        async with self._lock:
            if handle._stop_requested:
                raise _StopAfterRun
            handle._set_state(TaskState.RUNNING)
            handle.fire_count += 1
            if self._on_fire is not None:
                self._on_fire(self.owner, handle.task_id, self.clock.now())
            repeating = handle.task.kind in (TaskKind.PERIODIC,)
            try:
                handle.result = await _call(handle.task.body)
            except Exception as exc:
                if not repeating:
                    raise
                logger.exception("periodic task %r raised; continuing", handle)
                handle.error = exc
            handle._set_state(TaskState.PENDING)
            if repeating and handle._stop_requested:
                raise _StopAfterRun

    async def _fire_process(self, handle: TaskHandle) -> None:
        if self._pool_provider is None:
            raise LifecycleError("no worker pool available for process tasks")
        pool = self._pool_provider()
        handle._set_state(TaskState.RUNNING)
        handle.fire_count += 1
        if self._on_fire is not None:
            self._on_fire(self.owner, handle.task_id, self.clock.now())
        handle.result = await pool.run(handle.task.function_id, handle.task.input)
