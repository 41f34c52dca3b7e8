"""Build and run a scenario, then report on it."""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from ..clock import ExternalClock, RealClock
from ..clock.distributed import CLOCK_AGENT_AID, CLOCK_MANAGER_AID, DistributedClockAgent, DistributedClockManager
from ..clock.stepping import run_stepped
from ..codec import make_codec
from ..container import Container
from ..distribution.mirror import spawn_agent_process
from ..distribution.registry import AGENT_FACTORIES, build_registry
from ..errors import AgentRuntimeError, QuiescenceTimeout
from ..messaging import AgentAddress
from ..runtime import Runtime
from .config import DEFAULT_MODULES, Ref, ScenarioConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_TIMEOUT = 3


@dataclass
class RunReport:
    name: str
    mode: str
    messages: int = 0
    final_time: float = 0.0
    steps: int = 0
    counters: dict[str, dict[str, int]] = field(default_factory=dict)
    direct_messages: int = 0
    containers: list[dict] = field(default_factory=list)
    broadcasts: list[float] = field(default_factory=list)
    exit_status: int = EXIT_OK
    timed_out: bool = False
    error: str | None = None
    wall_time: float = 0.0
    health_events: list[list] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ScenarioRun:
    """Live objects of a scenario, kept after the run for inspection."""

    config: ScenarioConfig
    runtime: Runtime
    containers: list[Container] = field(default_factory=list)
    agents: dict[str, Any] = field(default_factory=dict)
    aids: list[str] = field(default_factory=list)
    clock: ExternalClock | None = None
    manager: DistributedClockManager | None = None
    report: RunReport | None = None

    @property
    def transcript(self):
        return self.runtime.transcript

    def agent(self, aid: str):
        return self.agents.get(aid)


def _resolve(value: Any, addresses: dict[str, AgentAddress]) -> Any:
    if isinstance(value, Ref):
        return addresses[value.aid]
    if isinstance(value, dict):
        return {k: _resolve(v, addresses) for k, v in value.items()}
    if isinstance(value, list):
        return [_resolve(v, addresses) for v in value]
    return value


def _aggregate(containers: list[Container]) -> tuple[dict, int]:
    totals: dict[str, dict[str, int]] = {}
    direct = 0
    for container in containers:
        direct += container.direct_messages
        for kind, counters in container.counters.items():
            bucket = totals.setdefault(kind, {k: 0 for k in asdict(counters)})
            for key, value in asdict(counters).items():
                bucket[key] += value
    return totals, direct


async def _build(run: ScenarioRun) -> None:
    config = run.config
    registry = build_registry(config.registry_factory)
    shared_clock = ExternalClock(config.run.start_time) if config.run.mode == "stepped" else None
    run.clock = shared_clock
    for entry in config.containers:
        if entry.clock == "real":
            clock = RealClock()
        else:
            clock = shared_clock or ExternalClock(config.run.start_time)
        container = Container(entry.endpoint, codec=make_codec(entry.codec, registry.copy()), clock=clock, runtime=run.runtime)
        run.containers.append(container)
        await container.start()

    addresses = {
        entry.aid: AgentAddress(run.containers[entry.container].address, entry.aid)
        for entry in config.agents
        if entry.aid is not None
    }

    def on_health(aid: str, returncode) -> None:
        if run.report is not None:
            run.report.health_events.append([aid, returncode])

    for entry in config.agents:
        container = run.containers[entry.container]
        params = _resolve(entry.params, addresses)
        if entry.process:
            aid = await spawn_agent_process(
                container,
                entry.kind,
                entry.aid,
                params,
                modules=(*DEFAULT_MODULES, *config.modules),
                registry_factory=config.registry_factory,
                health_callback=on_health,
            )
        else:
            agent = AGENT_FACTORIES[entry.kind](**params)
            aid = container.register(agent, entry.aid)
            run.agents[aid] = agent
        run.aids.append(aid)

    if config.run.mode == "distributed-stepped" and run.containers:
        participants = []
        for container in run.containers:
            container.register(DistributedClockAgent(container.clock, config.run.timeout), CLOCK_AGENT_AID)
            participants.append(AgentAddress(container.address, CLOCK_AGENT_AID))
        run.manager = DistributedClockManager(participants, timeout=config.run.timeout)
        run.containers[0].register(run.manager, CLOCK_MANAGER_AID)


async def _execute(run: ScenarioRun) -> None:
    config = run.config
    report = run.report
    barrier_timeout = config.run.timeout
    if config.run.mode == "stepped":
        steps = await run_stepped(run.runtime, run.clock, config.run.max_steps, barrier_timeout)
        report.steps = len(steps)
    elif config.run.mode == "distributed-stepped":
        if run.manager is None:
            return
        await run.runtime.tasks_complete_or_sleeping(barrier_timeout)
        report.broadcasts = await run.manager.run(config.run.max_steps)
        report.steps = len(report.broadcasts)
    else:
        # real time: wait for quiescence with nothing left to wake up
        while True:
            await run.runtime.tasks_complete_or_sleeping(barrier_timeout)
            if run.runtime.next_activity() is None:
                await asyncio.sleep(0)
                if run.runtime.quiescent()[0] and run.runtime.next_activity() is None:
                    break
            await asyncio.sleep(0.01)


def _final_time(run: ScenarioRun, started_at: float) -> float:
    if run.config.run.mode == "real-time":
        return time.time() - started_at
    if run.manager is not None and run.manager.time is not None:
        return run.manager.time
    times = [c.clock.now() for c in run.containers]
    return max(times, default=run.config.run.start_time)


async def execute_scenario(config: ScenarioConfig, runtime: Runtime | None = None) -> ScenarioRun:
    """Run ``config`` and return the live run (containers already shut down)."""
    run = ScenarioRun(config, runtime or Runtime())
    run.report = report = RunReport(config.name, config.run.mode)
    wall_start = time.monotonic()
    started_at = time.time()
    try:
        await asyncio.wait_for(_run_phases(run), config.run.timeout)
    except asyncio.TimeoutError:
        report.timed_out = True
        report.exit_status = EXIT_TIMEOUT
        report.error = f"timed out after {config.run.timeout}s"
    except QuiescenceTimeout as exc:
        report.timed_out = True
        report.exit_status = EXIT_TIMEOUT
        report.error = f"timed out waiting for quiescence: {exc}"
    except AgentRuntimeError as exc:
        report.exit_status = EXIT_RUNTIME
        report.error = f"{type(exc).__name__}: {exc}"
    except Exception as exc:
        logger.exception("scenario %s failed", config.name)
        report.exit_status = EXIT_RUNTIME
        report.error = f"{type(exc).__name__}: {exc}"
    finally:
        report.final_time = _final_time(run, started_at)
        for container in reversed(run.containers):
            try:
                await container.shutdown()
            except Exception:
                logger.exception("shutdown of %s failed", container.address)
        report.wall_time = time.monotonic() - wall_start
    report.messages = len(run.runtime.transcript)
    report.counters, report.direct_messages = _aggregate(run.containers)
    report.containers = [c.stats() for c in run.containers]
    _write_outputs(run)
    return run


async def _run_phases(run: ScenarioRun) -> None:
    await _build(run)
    await _execute(run)


def _write_outputs(run: ScenarioRun) -> None:
    outputs = run.config.outputs
    if outputs.transcript:
        path = Path(outputs.transcript)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(run.runtime.transcript.dumps())
    if outputs.metrics:
        path = Path(outputs.metrics)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(run.report.to_dict(), indent=2, sort_keys=True) + "\n")


async def run_scenario_async(config: ScenarioConfig, runtime: Runtime | None = None) -> RunReport:
    return (await execute_scenario(config, runtime)).report


def run_scenario(config: ScenarioConfig) -> RunReport:
    """Synchronous entry point: runs the scenario in a fresh event loop."""
    return asyncio.run(run_scenario_async(config))
