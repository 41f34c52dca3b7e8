from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from ..errors import DecodeError
from ..messaging import Endpoint, Envelope

if TYPE_CHECKING:
    from .base import Container

logger = logging.getLogger(__name__)


class LocalTransport:
    """Loopback between ``local:`` containers of the same runtime.

    Frames are encoded and decoded like on a network so counters and copy
    semantics match the other transports, but delivery is synchronous.
    """

    kind = "local"

    def __init__(self, container: Container):
        self.container = container

    async def start(self) -> Endpoint:
        return self.container.address

    async def stop(self) -> None:
        pass

    async def send(self, envelope: Envelope) -> bool:
        target = self.container.runtime.lookup(envelope.receiver.endpoint)
        if target is None or target.transport.kind != self.kind or not target.running:
            logger.warning("%s: no local container at %s", self.container.address, envelope.receiver.endpoint)
            return False
        data = self.container.codec.encode(envelope)
        self.container.counters_for(self.kind).sent(len(data))
        target.counters_for(self.kind).received(len(data))
        try:
            copy = target.codec.decode(data)
        except DecodeError as exc:
            logger.error("%s: undecodable message for %s: %s", self.container.address, target.address, exc)
            return False
        return target._route_inbound(copy, self.kind)
