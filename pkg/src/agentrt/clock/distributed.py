"""Conservative time synchronization across containers.

Each participating container runs an :class:`ExternalClock` and hosts a
:class:`DistributedClockAgent`. A :class:`DistributedClockManager` advances
them in steps:

1. ask every participant for a quiescence report; a participant answers only
   once its own container is quiescent, with its next wake-up time and its
   counts of application messages sent to / received from other containers;
2. repeat the wave until two consecutive waves report identical counts and
   the counts balance (no message can still be on the wire);
3. take the minimum next wake-up; if nobody has one, broadcast termination,
   otherwise broadcast that time and wait for every acknowledgement.

All protocol traffic is ordinary ACL messages with
``protocol="distributed-clock"``.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
from typing import Any

from ..agents import Agent
from ..errors import ProtocolError, StepError, ValidationError
from ..messaging import AclMessage, AgentAddress, Performative, wrap_acl
from .base import ExternalClock
from .protocol import (
    PROTOCOL_NAME,
    AdvanceAck,
    AdvanceTime,
    QuiescenceReport,
    RequestQuiescence,
    Terminate,
)

logger = logging.getLogger(__name__)

CLOCK_AGENT_AID = "clock_agent"
CLOCK_MANAGER_AID = "clock_manager"


def _clock_msg(content: Any, performative: Performative, conversation_id: str) -> AclMessage:
    return wrap_acl(content, performative, conversation_id=conversation_id, protocol=PROTOCOL_NAME)


class DistributedClockAgent(Agent):
    """Participant side: answers quiescence requests and applies time advances."""

    system = True

    def __init__(self, clock: ExternalClock, quiescence_timeout: float | None = None):
        super().__init__()
        if not isinstance(clock, ExternalClock):
            raise ValidationError("distributed clock participants need an ExternalClock")
        self.clock = clock
        self.quiescence_timeout = quiescence_timeout
        self.terminated = False
        self.final_time: float | None = None

    def on_register(self) -> None:
        if self.context.clock is not self.clock:
            raise ValidationError("clock agent must wrap its container's clock")

    async def handle_message(self, content: Any, meta: dict) -> None:
        if not isinstance(content, AclMessage) or content.protocol != PROTOCOL_NAME:
            return
        body = content.content
        sender = meta.get("sender")
        if isinstance(body, RequestQuiescence):
            await self.context.tasks_complete_or_sleeping(self.quiescence_timeout)
            sent, received = self.context.exchange_counts()
            report = QuiescenceReport(body.round, self.clock.now(), self.context.next_activity(), sent, received)
            await self.send_message(_clock_msg(report, Performative.INFORM, content.conversation_id), sender)
        elif isinstance(body, AdvanceTime):
            self.clock.set_time(body.time)
            ack = AdvanceAck(self.clock.now())
            await self.send_message(_clock_msg(ack, Performative.AGREE, content.conversation_id), sender)
        elif isinstance(body, Terminate):
            self.terminated = True
            self.final_time = body.final_time


class DistributedClockManager(Agent):
    """Coordinator side. ``participants`` are the addresses of the clock agents."""

    system = True

    def __init__(self, participants: list[AgentAddress], timeout: float = 30.0, max_waves: int = 1000):
        super().__init__()
        if not participants:
            raise ValidationError("distributed clock needs at least one participant")
        if len(set(participants)) != len(participants):
            raise ValidationError("duplicate participant address")
        self.participants = list(participants)
        self.timeout = timeout
        self.max_waves = max_waves
        self.broadcasts: list[float] = []
        self.time: float | None = None
        self.terminated = False
        self._conversations = itertools.count()
        self._rounds = itertools.count(1)
        self._waiting: dict[tuple[str, AgentAddress], asyncio.Future] = {}

    async def handle_message(self, content: Any, meta: dict) -> None:
        if not isinstance(content, AclMessage) or content.protocol != PROTOCOL_NAME:
            return
        key = (content.conversation_id, meta.get("sender"))
        future = self._waiting.get(key)
        if future is None or future.done():
            logger.warning("unexpected clock message from %s: %r", meta.get("sender"), content.content)
            return
        future.set_result(content.content)

    async def _exchange(self, body: Any, performative: Performative, expected: type) -> dict[AgentAddress, Any]:
        conversation = f"clock-{next(self._conversations)}"
        loop = asyncio.get_running_loop()
        futures = {}
        for participant in self.participants:
            futures[participant] = self._waiting[(conversation, participant)] = loop.create_future()
        try:
            for participant in self.participants:
                ok = await self.send_message(_clock_msg(body, performative, conversation), participant)
                if not ok:
                    raise StepError(f"participant {participant} unreachable", str(participant))
            replies = {}
            for participant, future in futures.items():
                try:
                    reply = await asyncio.wait_for(future, self.timeout)
                except asyncio.TimeoutError:
                    raise StepError(f"participant {participant} timed out", str(participant)) from None
                if not isinstance(reply, expected):
                    raise ProtocolError(f"participant {participant} answered {type(reply).__name__}")
                replies[participant] = reply
            return replies
        finally:
            for participant in self.participants:
                self._waiting.pop((conversation, participant), None)

    async def _stable_reports(self) -> dict[AgentAddress, QuiescenceReport]:
        previous = None
        for _ in range(self.max_waves):
            reports = await self._exchange(RequestQuiescence(next(self._rounds)), Performative.QUERY_IF, QuiescenceReport)
            counts = {p: (r.sent, r.received) for p, r in reports.items()}
            balanced = sum(c[0] for c in counts.values()) == sum(c[1] for c in counts.values())
            if previous is not None and counts == previous and balanced:
                return reports
            previous = counts
        raise StepError(f"no stable quiescent wave after {self.max_waves} waves")

    async def distributed_step(self) -> float | None:
        """Advance all participants to the earliest pending wake-up.

        Returns the new time, or ``None`` once no participant has anything
        left to do (after the termination broadcast).
        """
        if self.terminated:
            return None
        reports = await self._stable_reports()
        for participant, report in reports.items():
            floor = self.broadcasts[-1] if self.broadcasts else None
            if floor is not None and (report.time < floor or (report.next_wake is not None and report.next_wake <= floor)):
                raise ProtocolError(f"participant {participant} reported time behind {floor}")
        wakes = [r.next_wake for r in reports.values() if r.next_wake is not None]
        if not wakes:
            final = max(r.time for r in reports.values())
            for participant in self.participants:
                await self.send_message(_clock_msg(Terminate(final), Performative.INFORM, "clock-end"), participant)
            self.terminated = True
            self.time = final
            return None
        target = min(wakes)
        await self._exchange(AdvanceTime(target), Performative.REQUEST, AdvanceAck)
        self.broadcasts.append(target)
        self.time = target
        return target

    async def run(self, max_steps: int | None = None) -> list[float]:
        steps = 0
        while max_steps is None or steps < max_steps:
            if await self.distributed_step() is None:
                break
            steps += 1
        return list(self.broadcasts)
