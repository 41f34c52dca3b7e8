"""External-connection transport for coupling with a co-simulation orchestrator.

Outbound messages never touch a network; they are queued together with the
logical send time until the orchestrator collects them. The orchestrator
injects messages with a dispatch time and then asks for them to be
dispatched to the local agents. ``serve_ec_stream`` exposes the same
operations as newline-delimited JSON (see docs/ec_protocol.md).
"""

from __future__ import annotations

import asyncio
import base64
import heapq
import itertools
import json
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..errors import DecodeError
from ..messaging import Endpoint, Envelope

if TYPE_CHECKING:
    from .base import Container

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rejection:
    aid: str
    reason: str

    def as_record(self) -> dict:
        return {"aid": self.aid, "reason": self.reason}


class EcTransport:
    kind = "ec"

    def __init__(self, container: Container):
        self.container = container
        self._outbound: list[tuple[Envelope, float]] = []
        self._injected: list[tuple[float, int, Envelope]] = []
        self._seq = itertools.count()

    async def start(self) -> Endpoint:
        return self.container.address

    async def stop(self) -> None:
        pass

    async def send(self, envelope: Envelope) -> bool:
        data = self.container.codec.encode(envelope)
        self.container.counters_for(self.kind).sent(len(data))
        self._outbound.append((envelope, self.container.clock.now()))
        return True

    def collect_outbound(self) -> list[tuple[Envelope, float]]:
        collected, self._outbound = self._outbound, []
        return collected

    def inject(self, envelope: Envelope, dispatch_time: float) -> Rejection | None:
        if not self.container.hosts(envelope.receiver.aid):
            return Rejection(envelope.receiver.aid, "unknown receiver")
        heapq.heappush(self._injected, (float(dispatch_time), next(self._seq), envelope))
        return None

    @property
    def pending_injections(self) -> int:
        return len(self._injected)

    def dispatch(self) -> int:
        delivered = 0
        while self._injected:
            dispatch_time, _, envelope = heapq.heappop(self._injected)
            self.container.counters_for(self.kind).received(len(self.container.codec.encode(envelope)))
            if self.container._route_inbound(envelope, self.kind, {"dispatch_time": dispatch_time}):
                delivered += 1
        return delivered


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


async def handle_ec_request(container: Container, request: dict) -> dict:
    """Execute one orchestrator request against an EC container."""
    transport: EcTransport = container.transport
    op = request.get("op")
    reply: dict = {"ok": True}
    if "id" in request:
        reply["id"] = request["id"]
    try:
        if op == "inject":
            envelope = container.codec.decode(base64.b64decode(request["envelope"], validate=True))
            if not isinstance(envelope, Envelope):
                raise DecodeError("injected body is not an envelope")
            rejection = transport.inject(envelope, float(request["time"]))
            if rejection is not None:
                reply.update(ok=False, rejected=rejection.as_record())
        elif op == "dispatch":
            reply["delivered"] = transport.dispatch()
            await container.tasks_complete_or_sleeping(request.get("timeout"))
            reply["next_activity"] = container.next_activity()
        elif op == "advance":
            container.clock.set_time(float(request["time"]))
            await container.tasks_complete_or_sleeping(request.get("timeout"))
            reply["time"] = container.clock.now()
            reply["next_activity"] = container.next_activity()
        elif op == "collect":
            reply["messages"] = [
                {"envelope": _b64(container.codec.encode(env)), "time": t} for env, t in transport.collect_outbound()
            ]
        else:
            reply.update(ok=False, error=f"unknown op {op!r}")
    except (KeyError, ValueError, TypeError, DecodeError, AttributeError) as exc:
        reply.update(ok=False, error=f"{type(exc).__name__}: {exc}")
    except Exception as exc:
        logger.exception("EC request %r failed", op)
        reply.update(ok=False, error=f"{type(exc).__name__}: {exc}")
    return reply


async def serve_ec_stream(container: Container, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
    """Answer newline-delimited JSON requests until the orchestrator closes the stream."""
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            if not line.strip():
                continue
            try:
                request = json.loads(line)
                if not isinstance(request, dict):
                    raise ValueError("request must be a JSON object")
            except ValueError as exc:
                reply = {"ok": False, "error": f"bad request: {exc}"}
            else:
                reply = await handle_ec_request(container, request)
            writer.write(json.dumps(reply, separators=(",", ":"), sort_keys=True).encode() + b"\n")
            await writer.drain()
    finally:
        writer.close()


async def start_ec_server(container: Container, path: str) -> asyncio.AbstractServer:
    """Listen on a unix socket at ``path`` for orchestrator connections."""
    return await asyncio.start_unix_server(lambda r, w: serve_ec_stream(container, r, w), path)
