"""Process-wide coordination: container lookup, activity notification,
quiescence barrier and the delivery transcript."""

from __future__ import annotations

import asyncio
import contextlib
import itertools
import logging
import time
import uuid
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Iterable

from .errors import QuiescenceTimeout
from .messaging import Endpoint

if TYPE_CHECKING:
    from .container import Container

logger = logging.getLogger(__name__)

_FALLBACK_POLL = 0.05


@dataclass(frozen=True)
class TranscriptRecord:
    time: float
    seq: int
    sender: str
    receiver: str
    digest: str
    transport: str
    order: int = 0

    def line(self) -> str:
        return "\t".join([repr(self.time), str(self.seq), self.sender, self.receiver, self.digest, self.transport])

    def key(self) -> tuple[str, str, str]:
        return (self.sender, self.receiver, self.digest)


class Transcript:
    """Ordered log of message deliveries (one record per receipt)."""

    def __init__(self):
        self._records: list[TranscriptRecord] = []
        self._per_agent: dict[str, itertools.count] = {}
        self._order = itertools.count()

    def record(self, time_: float, sender: str, receiver: str, digest: str, transport: str) -> None:
        counter = self._per_agent.setdefault(receiver, itertools.count())
        self._records.append(
            TranscriptRecord(time_, next(counter), sender, receiver, digest, transport, next(self._order))
        )

    @property
    def records(self) -> list[TranscriptRecord]:
        return sorted(self._records, key=lambda r: (r.time, r.order))

    def keys(self) -> list[tuple[str, str, str]]:
        return [r.key() for r in self.records]

    def __len__(self) -> int:
        return len(self._records)

    def dumps(self) -> str:
        return "".join(r.line() + "\n" for r in self.records)

    def clear(self) -> None:
        self._records.clear()
        self._per_agent.clear()


class Runtime:
    """Groups the containers of one process.

    Containers register themselves here on construction. The runtime knows
    which endpoints are hosted in-process, which lets senders account for
    messages that are on the wire but not yet in a mailbox.
    """

    def __init__(self, record_transcript: bool = True):
        self.token = uuid.uuid4().hex[:12]
        self.containers: dict[Endpoint, Container] = {}
        self.brokers: dict[str, object] = {}
        self.transcript = Transcript()
        self.record_transcript = record_transcript
        self.task_trace: list[tuple[float, str, int]] = []
        self._listeners: list[Callable[[], None]] = []
        self._event: asyncio.Event | None = None
        self._event_loop: asyncio.AbstractEventLoop | None = None

    def add(self, container: Container) -> None:
        self.containers[container.address] = container

    def rekey(self, old: Endpoint, container: Container) -> None:
        if self.containers.get(old) is container:
            del self.containers[old]
        self.containers[container.address] = container

    def remove(self, container: Container) -> None:
        if self.containers.get(container.address) is container:
            del self.containers[container.address]

    def lookup(self, endpoint: Endpoint) -> Container | None:
        return self.containers.get(endpoint)

    def record_fire(self, aid: str, task_id: int, fire_time: float) -> None:
        self.task_trace.append((fire_time, aid, task_id))

    def _activity_event(self) -> asyncio.Event:
        loop = asyncio.get_running_loop()
        if self._event is None or self._event_loop is not loop:
            self._event = asyncio.Event()
            self._event_loop = loop
        return self._event

    def add_listener(self, callback: Callable[[], None]) -> None:
        """Call ``callback()`` on every activity notification."""
        self._listeners.append(callback)

    def notify(self) -> None:
        for listener in self._listeners:
            listener()
        event = self._event
        if event is not None:
            try:
                if asyncio.get_running_loop() is self._event_loop:
                    event.set()
            except RuntimeError:
                pass

    def quiescent(self, containers: Iterable[Container] | None = None) -> tuple[bool, list[str]]:
        busy: list[str] = []
        for container in containers if containers is not None else list(self.containers.values()):
            busy.extend(container.busy_report())
        return not busy, busy

    async def wait_quiescent(
        self,
        probe: Callable[[], tuple[bool, list[str]]],
        timeout: float | None = None,
    ) -> None:
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            await asyncio.sleep(0)
            ok, busy = probe()
            if ok:
                return
            event = self._activity_event()
            event.clear()
            wait = _FALLBACK_POLL
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise QuiescenceTimeout(f"not quiescent after {timeout}s: {', '.join(busy)}", busy)
                wait = min(wait, remaining)
            with contextlib.suppress(asyncio.TimeoutError):
                await asyncio.wait_for(event.wait(), wait)

    async def tasks_complete_or_sleeping(self, timeout: float | None = None) -> None:
        """Block until every task in every container is finished, cancelled or
        sleeping, all mailboxes are drained and nothing is in flight."""
        await self.wait_quiescent(self.quiescent, timeout)

    def next_activity(self) -> float | None:
        times = [t for c in list(self.containers.values()) if (t := c.next_activity()) is not None]
        return min(times, default=None)


_default_runtime = Runtime()


def get_runtime() -> Runtime:
    return _default_runtime


async def tasks_complete_or_sleeping(runtime: Runtime | None = None, timeout: float | None = None) -> None:
    await (runtime or _default_runtime).tasks_complete_or_sleeping(timeout)
