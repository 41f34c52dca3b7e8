from __future__ import annotations

from typing import TYPE_CHECKING

from .base import ExternalClock

if TYPE_CHECKING:
    from ..runtime import Runtime


async def run_stepped(
    runtime: Runtime,
    clock: ExternalClock,
    max_steps: int | None = None,
    timeout: float | None = None,
) -> list[float]:
    """Local stepping loop: wait for quiescence, jump to the next wake-up, repeat.

    Returns the sequence of times the clock was set to. ``timeout`` bounds
    each individual barrier wait.
    """
    steps: list[float] = []
    while max_steps is None or len(steps) < max_steps:
        await runtime.tasks_complete_or_sleeping(timeout)
        target = runtime.next_activity()
        if target is None:
            break
        clock.set_time(target)
        steps.append(target)
    else:
        await runtime.tasks_complete_or_sleeping(timeout)
    return steps
