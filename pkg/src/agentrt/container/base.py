from __future__ import annotations

import asyncio
import enum
import itertools
import logging
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING, Any

from ..agents import Agent, AgentContext
from ..clock import PROTOCOL_NAME, Clock, RealClock
from ..codec import Codec, make_codec, payload_digest
from ..errors import LifecycleError, RegistrationError, ValidationError
from ..messaging import AclMessage, AgentAddress, Endpoint, Envelope
from ..runtime import Runtime, get_runtime
from ..scheduling import Scheduler

if TYPE_CHECKING:
    from ..distribution.pool import WorkerPool

logger = logging.getLogger(__name__)

INFLIGHT_META = "x-inflight"


class ContainerState(str, enum.Enum):
    CREATED = "created"
    RUNNING = "running"
    SHUTDOWN = "shutdown"


@dataclass
class TransportCounters:
    sent_messages: int = 0
    sent_bytes: int = 0
    received_messages: int = 0
    received_bytes: int = 0

    def sent(self, nbytes: int) -> None:
        self.sent_messages += 1
        self.sent_bytes += nbytes

    def received(self, nbytes: int) -> None:
        self.received_messages += 1
        self.received_bytes += nbytes


def is_clock_message(payload: Any) -> bool:
    return isinstance(payload, AclMessage) and payload.protocol == PROTOCOL_NAME


class _Slot:
    """Mailbox and dispatcher of one registered agent."""

    __slots__ = ("agent", "aid", "queue", "busy", "lock", "scheduler", "dispatcher", "started")

    def __init__(self, agent: Agent, aid: str, scheduler: Scheduler, lock: asyncio.Lock):
        self.agent = agent
        self.aid = aid
        self.queue: asyncio.Queue = asyncio.Queue()
        self.busy = False
        self.lock = lock
        self.scheduler = scheduler
        self.dispatcher: asyncio.Task | None = None
        self.started = False

    def idle(self) -> bool:
        return not self.busy and self.queue.empty()


def _make_transport(container: Container, options: dict):
    scheme = container.address.scheme
    if scheme == "tcp":
        from .tcp import TcpTransport

        return TcpTransport(container, **options)
    if scheme == "topic":
        from .topic import TopicTransport

        return TopicTransport(container)
    if scheme == "ec":
        from .ec import EcTransport

        return EcTransport(container)
    from .local import LocalTransport

    return LocalTransport(container)


class Container:
    """Hosts agents and moves their messages.

    Messages for an agent of this container are enqueued directly in its
    mailbox (no encoding round trip, no transport counters touched); all
    other messages are handed to the transport selected by the container's
    endpoint scheme.
    """

    def __init__(
        self,
        endpoint: str | Endpoint,
        codec: Codec | str | None = None,
        clock: Clock | None = None,
        runtime: Runtime | None = None,
        process_pool: WorkerPool | None = None,
        **transport_options: Any,
    ):
        self.address = Endpoint.parse(endpoint)
        if codec is None or isinstance(codec, str):
            codec = make_codec(codec or "json")
        self.codec = codec
        self.clock = clock if clock is not None else RealClock()
        self.runtime = runtime if runtime is not None else get_runtime()
        self.state = ContainerState.CREATED
        self.counters: dict[str, TransportCounters] = {}
        self.direct_messages = 0
        self.app_sent = 0
        self.app_received = 0
        self._slots: dict[str, _Slot] = {}
        self._mirrors: dict[str, Any] = {}
        self._aid_counter = itertools.count()
        self._inflight = 0
        self._pool = process_pool
        self._owns_pool = False
        self.transport = _make_transport(self, transport_options)
        self.runtime.add(self)

    # -- lifecycle ---------------------------------------------------------

    @property
    def running(self) -> bool:
        return self.state is ContainerState.RUNNING

    async def start(self) -> Container:
        if self.state is ContainerState.SHUTDOWN:
            raise LifecycleError("container was shut down")
        if self.state is ContainerState.RUNNING:
            return self
        self.codec.registry.freeze()
        bound = await self.transport.start()
        if bound != self.address:
            old = self.address
            self.address = bound
            self.runtime.rekey(old, self)
        self.state = ContainerState.RUNNING
        for slot in list(self._slots.values()):
            await self._start_slot(slot)
        return self

    async def shutdown(self) -> None:
        if self.state is ContainerState.SHUTDOWN:
            return
        was_running = self.state is ContainerState.RUNNING
        self.state = ContainerState.SHUTDOWN
        for slot in reversed(list(self._slots.values())):
            if slot.started:
                try:
                    await slot.agent._stop()
                except Exception:
                    logger.exception("on_stop of %s raised", slot.aid)
        for slot in self._slots.values():
            await slot.scheduler.shutdown()
            if slot.dispatcher is not None:
                slot.dispatcher.cancel()
        dispatchers = [s.dispatcher for s in self._slots.values() if s.dispatcher is not None]
        if dispatchers:
            await asyncio.gather(*dispatchers, return_exceptions=True)
        for link in set(self._mirrors.values()):
            await link.close()
        self._mirrors.clear()
        if was_running:
            await self.transport.stop()
        if self._pool is not None and self._owns_pool:
            self._pool.shutdown()
        self.runtime.remove(self)
        self.runtime.notify()

    async def __aenter__(self) -> Container:
        return await self.start()

    async def __aexit__(self, *exc) -> None:
        await self.shutdown()

    # -- registration ------------------------------------------------------

    def hosts(self, aid: str) -> bool:
        return aid in self._slots or aid in self._mirrors

    @property
    def aids(self) -> list[str]:
        return list(self._slots)

    def agent(self, aid: str) -> Agent | None:
        slot = self._slots.get(aid)
        return slot.agent if slot else None

    def _reserve_aid(self, suggested_aid: str | None) -> str:
        if self.state is ContainerState.SHUTDOWN:
            raise LifecycleError("cannot register agents on a shut down container")
        if suggested_aid is not None:
            AgentAddress(self.address, suggested_aid)
            if self.hosts(suggested_aid):
                raise RegistrationError(f"aid {suggested_aid!r} already taken")
            return suggested_aid
        while True:
            aid = f"agent{next(self._aid_counter)}"
            if not self.hosts(aid):
                return aid

    def register(self, agent: Agent, suggested_aid: str | None = None) -> str:
        if not isinstance(agent, Agent):
            raise ValidationError(f"expected an Agent, got {type(agent).__name__}")
        aid = self._reserve_aid(suggested_aid)
        lock = asyncio.Lock()
        scheduler = Scheduler(
            self.clock,
            dispatch_lock=lock,
            owner=aid,
            on_fire=None if agent.system else self.runtime.record_fire,
            on_change=self.runtime.notify,
            pool_provider=self._get_pool,
        )
        slot = _Slot(agent, aid, scheduler, lock)
        self._slots[aid] = slot
        agent._bind(AgentContext(self, aid, scheduler))
        if self.running:
            slot.started = True
            slot.dispatcher = asyncio.get_running_loop().create_task(self._drain(slot))
            scheduler.schedule_instant_task(agent._start, name="on_start")
        return aid

    async def _start_slot(self, slot: _Slot) -> None:
        if slot.started:
            return
        slot.started = True
        slot.dispatcher = asyncio.get_running_loop().create_task(self._drain(slot))
        try:
            async with slot.lock:
                await slot.agent._start()
        except Exception:
            logger.exception("on_start of %s raised", slot.aid)

    def _get_pool(self) -> WorkerPool:
        if self._pool is None:
            from ..distribution.pool import WorkerPool

            self._pool = WorkerPool(codec_flavor=self.codec.flavor)
            self._owns_pool = True
        return self._pool

    # -- mirrors (hooks used by agentrt.distribution) ----------------------

    def _attach_mirror(self, aid: str, link: Any) -> None:
        self._mirrors[aid] = link

    def _detach_mirror(self, aid: str) -> None:
        self._mirrors.pop(aid, None)
        self.runtime.notify()

    # -- sending ------------------------------------------------------------

    def counters_for(self, kind: str) -> TransportCounters:
        counters = self.counters.get(kind)
        if counters is None:
            counters = self.counters[kind] = TransportCounters()
        return counters

    async def send_message(
        self,
        payload: Any,
        receiver: AgentAddress,
        sender_aid: str | None = None,
        meta: dict | None = None,
    ) -> bool:
        if not self.running:
            raise LifecycleError(f"container {self.address} is {self.state.value}")
        if not isinstance(receiver, AgentAddress):
            raise ValidationError("receiver must be an AgentAddress")
        sender = AgentAddress(self.address, sender_aid) if sender_aid is not None else None
        envelope = Envelope(receiver, payload, sender, meta or {})
        if receiver.endpoint == self.address:
            self.codec.encode(payload)
            self.direct_messages += 1
            return self._deliver(envelope, "direct")
        return await self._send_remote(envelope)

    async def _send_remote(self, envelope: Envelope) -> bool:
        app = not is_clock_message(envelope.payload)
        target = None
        if app and self.transport.kind == "tcp":
            target = self.runtime.lookup(envelope.receiver.endpoint)
            if target is not None:
                target._inflight += 1
                envelope = envelope.with_meta(**{INFLIGHT_META: self.runtime.token})
        ok = False
        try:
            ok = await self.transport.send(envelope)
        finally:
            if not ok and target is not None:
                target._inflight -= 1
                self.runtime.notify()
        if ok and app:
            self.app_sent += 1
        return ok

    def subscribe(self, aid: str, topic: str) -> None:
        self._topic_transport().broker.subscribe(topic, self, aid)

    def unsubscribe(self, aid: str, topic: str) -> None:
        self._topic_transport().broker.unsubscribe(topic, self, aid)

    def publish(self, topic: str, payload: Any, sender_aid: str | None = None, meta: dict | None = None) -> int:
        if not self.running:
            raise LifecycleError(f"container {self.address} is {self.state.value}")
        transport = self._topic_transport()
        sender = AgentAddress(self.address, sender_aid) if sender_aid is not None else None
        self.codec.encode(payload)
        return transport.broker.publish(self, topic, payload, sender, dict(meta or {}))

    def _topic_transport(self):
        if self.transport.kind != "topic":
            raise LifecycleError(f"container {self.address} has no topic transport")
        return self.transport

    # -- EC passthroughs ------------------------------------------------------

    def _ec_transport(self):
        if self.transport.kind != "ec":
            raise LifecycleError(f"container {self.address} is not an EC container")
        return self.transport

    def inject(self, envelope: Envelope, dispatch_time: float):
        return self._ec_transport().inject(envelope, dispatch_time)

    def dispatch(self) -> int:
        return self._ec_transport().dispatch()

    def collect_outbound(self) -> list[tuple[Envelope, float]]:
        return self._ec_transport().collect_outbound()

    # -- receiving ----------------------------------------------------------

    def _route_inbound(self, envelope: Envelope, transport: str, extra_meta: dict | None = None) -> bool:
        tagged = False
        if INFLIGHT_META in envelope.meta:
            tagged = envelope.meta[INFLIGHT_META] == self.runtime.token
            envelope = envelope.without_meta(INFLIGHT_META)
        try:
            if not is_clock_message(envelope.payload):
                self.app_received += 1
            return self._deliver(envelope, transport, extra_meta)
        finally:
            if tagged:
                self._inflight -= 1
                self.runtime.notify()

    def _deliver(self, envelope: Envelope, transport: str, extra_meta: dict | None = None) -> bool:
        aid = envelope.receiver.aid
        slot = self._slots.get(aid)
        if slot is None:
            link = self._mirrors.get(aid)
            if link is not None and link.alive:
                self._record(envelope, "ipc")
                return link.forward(envelope)
            logger.warning("%s: no agent %r; message dropped", self.address, aid)
            return False
        self._record(envelope, transport)
        meta = self._handler_meta(envelope, transport)
        if extra_meta:
            meta.update(extra_meta)
        slot.queue.put_nowait((envelope.payload, meta))
        return True

    def _record(self, envelope: Envelope, transport: str) -> None:
        if not self.runtime.record_transcript or is_clock_message(envelope.payload):
            return
        sender = envelope.sender.aid if envelope.sender is not None else "-"
        digest = payload_digest(self.codec, envelope.payload)
        self.runtime.transcript.record(self.clock.now(), sender, envelope.receiver.aid, digest, transport)

    def _handler_meta(self, envelope: Envelope, transport: str) -> dict:
        meta: dict[str, Any] = dict(envelope.meta)
        meta["sender"] = envelope.sender
        meta["sender_id"] = envelope.sender.aid if envelope.sender is not None else None
        meta["receiver"] = envelope.receiver
        meta["receipt_time"] = self.clock.now()
        meta["transport"] = transport
        payload = envelope.payload
        if isinstance(payload, AclMessage):
            meta["performative"] = payload.performative
            meta["conversation_id"] = payload.conversation_id
        return meta

    async def _drain(self, slot: _Slot) -> None:
        while True:
            content, meta = await slot.queue.get()
            slot.busy = True
            try:
                async with slot.lock:
                    await slot.agent._dispatch(content, meta)
            except asyncio.CancelledError:
                raise
            except Exception:
                logger.exception("%s: handler of %s failed", self.address, slot.aid)
            finally:
                slot.busy = False
                self.runtime.notify()

    # -- quiescence ------------------------------------------------------------

    def busy_report(self) -> list[str]:
        busy: list[str] = []
        for aid, slot in self._slots.items():
            if slot.agent.system:
                continue
            if not slot.idle():
                busy.append(f"{aid}: mailbox ({slot.queue.qsize()} queued, busy={slot.busy})")
            for handle in slot.scheduler.busy_tasks():
                busy.append(f"{aid}: task {handle.task_id} {handle.state.value}")
        if self._inflight:
            busy.append(f"{self.address}: {self._inflight} messages in flight")
        for link in set(self._mirrors.values()):
            busy.extend(link.busy_report())
        return busy

    def quiescent(self) -> tuple[bool, list[str]]:
        busy = self.busy_report()
        return not busy, busy

    async def tasks_complete_or_sleeping(self, timeout: float | None = None) -> None:
        await self.runtime.wait_quiescent(self.quiescent, timeout)

    def next_activity(self) -> float | None:
        times = [self.clock.next_activity()]
        times += [link.next_activity() for link in set(self._mirrors.values())]
        return min((t for t in times if t is not None), default=None)

    # -- reporting ------------------------------------------------------------

    def stats(self) -> dict:
        return {
            "endpoint": str(self.address),
            "direct_messages": self.direct_messages,
            "transports": {kind: asdict(c) for kind, c in self.counters.items()},
        }

    def __repr__(self) -> str:
        return f"<Container {self.address} {self.state.value} agents={len(self._slots)}>"
