from __future__ import annotations

import asyncio
import heapq
import itertools
import time
from typing import Callable

from ..errors import BackwardTimeError


class Clock:
    """Time source contract used by containers and schedulers.

    ``sleep_until`` calls ``on_release`` synchronously at the moment the
    sleeper is woken, before the awaiting coroutine resumes; the scheduler
    relies on this to flip task state without a window in which a woken task
    still looks asleep.
    """

    kind = "abstract"

    def now(self) -> float:
        raise NotImplementedError

    async def sleep_until(self, t: float, on_release: Callable[[], None] | None = None) -> None:
        raise NotImplementedError

    def next_activity(self) -> float | None:
        raise NotImplementedError


class _Sleeper:
    __slots__ = ("wake", "seq", "future", "on_release", "active")

    def __init__(self, wake, seq, future, on_release):
        self.wake = wake
        self.seq = seq
        self.future = future
        self.on_release = on_release
        self.active = True

    def __lt__(self, other: _Sleeper) -> bool:
        return (self.wake, self.seq) < (other.wake, other.seq)


class ExternalClock(Clock):
    """Simulation clock advanced only through :meth:`set_time`."""

    kind = "external"

    def __init__(self, start_time: float = 0.0):
        self._time = float(start_time)
        self._sleepers: list[_Sleeper] = []
        self._seq = itertools.count()
        self._listeners: list[Callable[[float], None]] = []

    def now(self) -> float:
        return self._time

    def set_time(self, t: float) -> None:
        t = float(t)
        if t < self._time:
            raise BackwardTimeError(f"cannot move clock back from {self._time} to {t}")
        self._time = t
        while self._sleepers and self._sleepers[0].wake <= t:
            sleeper = heapq.heappop(self._sleepers)
            if not sleeper.active or sleeper.future.done():
                continue
            sleeper.active = False
            if sleeper.on_release is not None:
                sleeper.on_release()
            sleeper.future.set_result(None)
        for listener in list(self._listeners):
            listener(t)

    def add_listener(self, callback: Callable[[float], None]) -> None:
        """Call ``callback(t)`` after every :meth:`set_time`."""
        self._listeners.append(callback)

    def remove_listener(self, callback: Callable[[float], None]) -> None:
        if callback in self._listeners:
            self._listeners.remove(callback)

    async def sleep_until(self, t: float, on_release: Callable[[], None] | None = None) -> None:
        if t <= self._time:
            if on_release is not None:
                on_release()
            return
        future = asyncio.get_running_loop().create_future()
        sleeper = _Sleeper(float(t), next(self._seq), future, on_release)
        heapq.heappush(self._sleepers, sleeper)
        try:
            await future
        finally:
            sleeper.active = False

    def next_activity(self) -> float | None:
        while self._sleepers and not self._sleepers[0].active:
            heapq.heappop(self._sleepers)
        return self._sleepers[0].wake if self._sleepers else None

    def __repr__(self) -> str:
        return f"ExternalClock(t={self._time})"


class RealClock(Clock):
    """Wall-clock time in seconds since the epoch."""

    kind = "real"

    def __init__(self):
        self._last = 0.0
        self._pending: dict[int, float] = {}
        self._seq = itertools.count()

    def now(self) -> float:
        current = time.time()
        if current < self._last:
            return self._last
        self._last = current
        return current

    async def sleep_until(self, t: float, on_release: Callable[[], None] | None = None) -> None:
        key = next(self._seq)
        self._pending[key] = t
        try:
            delay = t - self.now()
            if delay > 0:
                await asyncio.sleep(delay)
            if on_release is not None:
                on_release()
        finally:
            self._pending.pop(key, None)

    def next_activity(self) -> float | None:
        return min(self._pending.values(), default=None)
