"""Payload types for the distributed clock protocol (codec tags 100-104)."""

from __future__ import annotations

from dataclasses import dataclass

PROTOCOL_NAME = "distributed-clock"

TAG_REQUEST = 100
TAG_REPORT = 101
TAG_ADVANCE = 102
TAG_ACK = 103
TAG_TERMINATE = 104


@dataclass(frozen=True)
class RequestQuiescence:
    round: int


@dataclass(frozen=True)
class QuiescenceReport:
    """Answer to a quiescence request.

    ``sent``/``received`` count application messages the participant has
    exchanged with other containers so far; the manager only trusts a wave
    when two consecutive waves agree on them and they balance.
    """

    round: int
    time: float
    next_wake: float | None
    sent: int
    received: int


@dataclass(frozen=True)
class AdvanceTime:
    time: float


@dataclass(frozen=True)
class AdvanceAck:
    time: float


@dataclass(frozen=True)
class Terminate:
    final_time: float


PROTOCOL_TYPES = (
    (TAG_REQUEST, RequestQuiescence),
    (TAG_REPORT, QuiescenceReport),
    (TAG_ADVANCE, AdvanceTime),
    (TAG_ACK, AdvanceAck),
    (TAG_TERMINATE, Terminate),
)


def register_protocol_types(registry) -> None:
    for tag, cls in PROTOCOL_TYPES:
        registry.register(tag, cls)
