"""Agent kinds usable from scenario configs.

Every kind is registered as an agent factory, so it can also be hosted in a
subprocess. Constructor keyword arguments are the ``params`` of the config.
"""

from __future__ import annotations

import logging
from typing import Any

from ..agents import Agent
from ..distribution.registry import AGENT_FACTORIES, register_agent_factory
from ..messaging import AgentAddress

logger = logging.getLogger(__name__)


@register_agent_factory("hello.caller")
class HelloCaller(Agent):
    """Starts a ping-pong ``delay`` seconds after start.

    ``messages`` counts every message of the exchange in both directions,
    the first one included; the caller stops replying once it is reached.
    """

    def __init__(self, target: AgentAddress, messages: int = 100, delay: float = 5.0, content: Any = "Hello"):
        super().__init__()
        self.target = target
        self.messages = int(messages)
        self.delay = float(delay)
        self.content = content
        self.exchanged = 0
        self.first_sent_at: float | None = None

    def on_start(self) -> None:
        if self.messages > 0:
            self.schedule_timestamp_task(self._first, self.now() + self.delay, name="first message")

    async def _first(self) -> None:
        self.first_sent_at = self.now()
        self.exchanged += 1
        await self.send_message(self.content, self.target)

    async def handle_message(self, content: Any, meta: dict) -> None:
        self.exchanged += 1
        if self.exchanged < self.messages:
            self.exchanged += 1
            await self.send_message(content, meta["sender"])


@register_agent_factory("hello.receiver")
class HelloReceiver(Agent):
    """Answers every message with the same content."""

    def __init__(self):
        super().__init__()
        self.received = 0

    async def handle_message(self, content: Any, meta: dict) -> None:
        self.received += 1
        await self.send_message(content, meta["sender"])


@register_agent_factory("sink")
class Sink(Agent):
    """Counts and keeps what it receives."""

    def __init__(self, keep: bool = True):
        super().__init__()
        self.keep = keep
        self.received = 0
        self.contents: list[Any] = []

    def handle_message(self, content: Any, meta: dict) -> None:
        self.received += 1
        if self.keep:
            self.contents.append(content)


@register_agent_factory("flaky")
class FlakyReceiver(Agent):
    """Raises on every ``fail_every``-th message, otherwise counts it."""

    def __init__(self, fail_every: int = 10):
        super().__init__()
        self.fail_every = int(fail_every)
        self.seen = 0
        self.handled = 0

    def handle_message(self, content: Any, meta: dict) -> None:
        self.seen += 1
        if self.seen % self.fail_every == 0:
            raise RuntimeError(f"failing on message {self.seen}")
        self.handled += 1


@register_agent_factory("burst")
class BurstSender(Agent):
    """Sends ``count`` messages to ``target`` at start, one after another."""

    def __init__(self, target: AgentAddress, count: int = 100, content: Any = "x"):
        super().__init__()
        self.target = target
        self.count = int(count)
        self.content = content
        self.accepted = 0

    def on_start(self) -> None:
        self.schedule_instant_task(self._burst, name="burst")

    async def _burst(self) -> None:
        for i in range(self.count):
            if await self.send_message([self.content, i], self.target):
                self.accepted += 1


@register_agent_factory("topic.publisher")
class TopicPublisher(Agent):
    """Publishes ``count`` numbered messages to ``topic``, one per ``interval``."""

    def __init__(self, topic: str, count: int = 10, interval: float = 1.0):
        super().__init__()
        self.topic = topic
        self.count = int(count)
        self.interval = float(interval)
        self.published = 0
        self.fanout: list[int] = []
        self._handle = None

    def on_start(self) -> None:
        if self.count > 0:
            self._handle = self.schedule_periodic_task(self._tick, self.interval, name="publish")

    def _tick(self) -> None:
        self.fanout.append(self.context.publish(self.topic, [self.aid, self.published]))
        self.published += 1
        if self.published >= self.count:
            self._handle.stop()


@register_agent_factory("topic.subscriber")
class TopicSubscriber(Agent):
    def __init__(self, topic: str):
        super().__init__()
        self.topic = topic
        self.received = 0

    def on_start(self) -> None:
        self.context.subscribe(self.topic)

    def handle_message(self, content: Any, meta: dict) -> None:
        self.received += 1


@register_agent_factory("ticker")
class Ticker(Agent):
    """Fires a periodic task ``ticks`` times; optionally notifies ``peer`` on each tick."""

    def __init__(self, interval: float, ticks: int = 5, peer: AgentAddress | None = None):
        super().__init__()
        self.interval = float(interval)
        self.ticks = int(ticks)
        self.peer = peer
        self.fired: list[float] = []
        self.heard = 0
        self._handle = None

    def on_start(self) -> None:
        if self.ticks > 0:
            self._handle = self.schedule_periodic_task(self._tick, self.interval, name="tick")

    async def _tick(self) -> None:
        self.fired.append(self.now())
        if len(self.fired) >= self.ticks:
            self._handle.stop()
        if self.peer is not None:
            await self.send_message(["tick", self.aid, len(self.fired)], self.peer)

    def handle_message(self, content: Any, meta: dict) -> None:
        self.heard += 1


def kinds() -> list[str]:
    return sorted(AGENT_FACTORIES)
