"""Topic publish/subscribe against an in-process broker.

A topic container's endpoint is ``topic:<broker-id>`` or
``topic:<broker-id>/<client>``; containers sharing a broker id share the
broker. Delivery is fire-and-forget with no retention: publishing to a topic
nobody subscribes to reaches nobody.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Any

from ..messaging import AgentAddress, Endpoint, Envelope

if TYPE_CHECKING:
    from ..runtime import Runtime
    from .base import Container

logger = logging.getLogger(__name__)


def broker_id(endpoint: Endpoint) -> str:
    return endpoint.location.split("/", 1)[0]


class Broker:
    def __init__(self, name: str):
        self.name = name
        self._subscriptions: dict[str, list[tuple[Container, str]]] = {}
        self._members: dict[Endpoint, Container] = {}

    @classmethod
    def for_runtime(cls, runtime: Runtime, name: str) -> Broker:
        broker = runtime.brokers.get(name)
        if broker is None:
            broker = runtime.brokers[name] = cls(name)
        return broker

    def attach(self, container: Container) -> None:
        self._members[container.address] = container

    def detach(self, container: Container) -> None:
        self._members.pop(container.address, None)
        for topic, subs in self._subscriptions.items():
            self._subscriptions[topic] = [s for s in subs if s[0] is not container]

    def subscribe(self, topic: str, container: Container, aid: str) -> None:
        subs = self._subscriptions.setdefault(topic, [])
        if (container, aid) not in subs:
            subs.append((container, aid))

    def unsubscribe(self, topic: str, container: Container, aid: str) -> None:
        subs = self._subscriptions.get(topic, [])
        if (container, aid) in subs:
            subs.remove((container, aid))

    def subscribers(self, topic: str) -> list[AgentAddress]:
        return [AgentAddress(c.address, aid) for c, aid in self._subscriptions.get(topic, [])]

    def member(self, endpoint: Endpoint) -> Container | None:
        return self._members.get(endpoint)

    def publish(self, publisher: Container, topic: str, payload: Any, sender: AgentAddress | None, meta: dict) -> int:
        reached = 0
        for container, aid in list(self._subscriptions.get(topic, [])):
            envelope = Envelope(AgentAddress(container.address, aid), payload, sender, {**meta, "topic": topic})
            if publisher.transport.carry(envelope, container):
                reached += 1
        return reached


class TopicTransport:
    kind = "topic"

    def __init__(self, container: Container):
        self.container = container
        self.broker = Broker.for_runtime(container.runtime, broker_id(container.address))

    async def start(self) -> Endpoint:
        self.broker.attach(self.container)
        return self.container.address

    async def stop(self) -> None:
        self.broker.detach(self.container)

    def carry(self, envelope: Envelope, target: Container) -> bool:
        """Encode with our codec, decode with the target's (a real copy)."""
        data = self.container.codec.encode(envelope)
        self.container.counters_for(self.kind).sent(len(data))
        target.counters_for(self.kind).received(len(data))
        try:
            copy = target.codec.decode(data)
        except Exception:
            logger.exception("topic delivery to %s failed to decode", target.address)
            return False
        return target._route_inbound(copy, self.kind)

    async def send(self, envelope: Envelope) -> bool:
        target = self.broker.member(envelope.receiver.endpoint)
        if target is None:
            logger.warning("%s: no container %s on broker %s", self.container.address, envelope.receiver.endpoint, self.broker.name)
            return False
        return self.carry(envelope, target)
