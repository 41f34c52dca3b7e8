"""Time sources: wall clock, externally stepped clock, and the distributed clock protocol."""

from .base import Clock, ExternalClock, RealClock
from .protocol import (
    PROTOCOL_NAME,
    AdvanceAck,
    AdvanceTime,
    QuiescenceReport,
    RequestQuiescence,
    Terminate,
)


def make_clock(kind: str = "real", start_time: float = 0.0) -> Clock:
    if kind == "real":
        return RealClock()
    if kind == "external":
        return ExternalClock(start_time)
    raise ValueError(f"unknown clock type {kind!r}")


__all__ = [
    "AdvanceAck",
    "AdvanceTime",
    "Clock",
    "ExternalClock",
    "PROTOCOL_NAME",
    "QuiescenceReport",
    "RealClock",
    "RequestQuiescence",
    "Terminate",
    "make_clock",
]
