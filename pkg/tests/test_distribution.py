import asyncio
import os
import signal
import sys
import time

import pytest

from agentrt import Agent, Container, ExternalClock, activate, make_address
from agentrt.clock.stepping import run_stepped
from agentrt.distribution import WorkerPool, mirror_link, spawn_agent_process
from agentrt.distribution.registry import build_registry
from agentrt.errors import ProcessTaskError, SpawnError
from agentrt.scheduling import TaskState

from helpers.mirror_kinds import Order

HELPERS = "helpers.mirror_kinds"
REGISTRY_FACTORY = "helpers.mirror_kinds:extend_registry"
TESTS_DIR = os.path.dirname(__file__)


@pytest.fixture(autouse=True)
def child_path(monkeypatch):
    # agent subprocesses and pool workers need to import the helper module
    existing = os.environ.get("PYTHONPATH", "")
    monkeypatch.setenv("PYTHONPATH", os.pathsep.join(p for p in (TESTS_DIR, existing) if p))


class Recorder(Agent):
    def __init__(self):
        super().__init__()
        self.inbox = []

    def handle_message(self, content, meta):
        self.inbox.append((content, meta))


async def wait_for(predicate, timeout=10.0):
    deadline = time.monotonic() + timeout
    while not predicate():
        if time.monotonic() > deadline:
            raise AssertionError("condition not reached")
        await asyncio.sleep(0.01)


# -- worker pool ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def pool():
    pool = WorkerPool(size=2, modules=[HELPERS], registry_factory=REGISTRY_FACTORY)
    yield pool
    pool.shutdown()


async def test_identity_on_42(pool):
    assert await pool.run("identity", 42) == 42


async def test_custom_types_cross_the_pool(pool):
    assert await pool.run("tests.double_qty", Order("bolt", 4)) == Order("bolt", 8)


async def test_function_error_is_reported(pool):
    with pytest.raises(ProcessTaskError, match="nope"):
        await pool.run("fail", "nope")


async def test_unknown_function_and_unencodable_input(pool):
    with pytest.raises(ProcessTaskError):
        await pool.run("no-such-function", 1)
    with pytest.raises(Exception):
        await pool.run("identity", object())


async def test_killed_worker_fails_task_and_pool_recovers(pool):
    respawns = pool.respawns
    task = asyncio.ensure_future(pool.run("sleep", 5.0))
    await wait_for(lambda: pool.busy_pids())
    os.kill(pool.busy_pids()[0], signal.SIGKILL)
    with pytest.raises(ProcessTaskError, match="died"):
        await task
    assert pool.respawns == respawns + 1
    assert await pool.run("square", 7) == 49
    results = await asyncio.gather(*(pool.run("identity", i) for i in range(6)))
    assert results == list(range(6))


async def test_results_match_task_ids(pool):
    inputs = list(range(20))
    results = await asyncio.gather(*(pool.run("square", i) for i in inputs))
    assert results == [i * i for i in inputs]


async def test_process_task_from_agent(runtime):
    pool = WorkerPool(size=1)
    try:
        container = Container("local:main", runtime=runtime, process_pool=pool)
        agent = Recorder()
        container.register(agent)
        async with container:
            handle = agent.schedule_process_task("square", 12)
            assert await handle.wait() == 144
            assert handle.state is TaskState.FINISHED
            failing = agent.schedule_process_task("exit", 3)
            with pytest.raises(ProcessTaskError):
                await failing.wait()
            assert failing.state is TaskState.FINISHED
    finally:
        pool.shutdown()


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs 4 CPUs for a parallel speedup")
async def test_pool_runs_in_parallel():
    with WorkerPool(size=4) as pool:
        await asyncio.gather(*(pool.run("identity", i) for i in range(4)))  # warm up
        start = time.perf_counter()
        await pool.run("busy_loop", 200)
        single = time.perf_counter() - start
        start = time.perf_counter()
        await asyncio.gather(*(pool.run("busy_loop", 200) for _ in range(4)))
        assert time.perf_counter() - start < 2 * single


# -- mirrored agents -----------------------------------------------------------------


async def test_mirrored_agent_keeps_parent_address(runtime):
    async with Container("tcp:127.0.0.1:0", runtime=runtime) as main:
        aid = await spawn_agent_process(main, "tests.reporter", "rep", {"tag": "x"}, modules=[HELPERS])
        assert aid == "rep" and main.hosts("rep")
        caller = Recorder()
        main.register(caller, "caller")
        await caller.send_message("whoami", make_address(main.address, "rep"))
        await main.tasks_complete_or_sleeping(timeout=10)
        reply, meta = caller.inbox[0]
        assert reply["pid"] != os.getpid()
        assert reply["addr"] == make_address(main.address, "rep")
        assert reply["tag"] == "x"
        assert meta["sender"] == make_address(main.address, "rep")


async def test_remote_peer_reaches_mirrored_agent(runtime):
    main = Container("tcp:127.0.0.1:0", runtime=runtime)
    peer = Container("tcp:127.0.0.1:0", runtime=runtime)
    async with activate(main, peer):
        await spawn_agent_process(main, "tests.reporter", "rep", modules=[HELPERS])
        remote = Recorder()
        peer.register(remote, "remote")
        assert await remote.send_message(["hello", 1], make_address(main.address, "rep"))
        await runtime.tasks_complete_or_sleeping(timeout=10)
        assert remote.inbox[0][0] == ["hello", 1]
        assert remote.inbox[0][1]["sender"] == make_address(main.address, "rep")


async def test_auto_aid_for_mirrored_agent(runtime):
    async with Container("local:main", runtime=runtime) as main:
        main.register(Recorder())
        aid = await spawn_agent_process(main, "tests.reporter", modules=[HELPERS])
        assert aid == "agent1"


async def test_mirror_follows_external_clock(runtime):
    clock = ExternalClock()
    async with Container("local:main", clock=clock, runtime=runtime) as main:
        sink = Recorder()
        main.register(sink, "sink")
        await spawn_agent_process(main, "tests.timer", "timer", {"report_to": sink.addr, "at": 3.0}, modules=[HELPERS])
        steps = await run_stepped(runtime, clock, max_steps=10, timeout=10)
        assert steps == [3.0]
        assert sink.inbox[0][0] == ["fired", 3.0]


async def test_unknown_factory_is_a_spawn_error(runtime):
    async with Container("local:main", runtime=runtime) as main:
        with pytest.raises(SpawnError, match="unknown agent factory"):
            await spawn_agent_process(main, "tests.nope", modules=[HELPERS])
        with pytest.raises(SpawnError, match="factory refuses"):
            await spawn_agent_process(main, "tests.broken", modules=[HELPERS])
        assert not main.hosts("agent0")


async def test_manifest_mismatch_aborts_child(runtime):
    # the parent registers a type the child does not know about
    registry = build_registry(REGISTRY_FACTORY)
    async with Container("local:main", runtime=runtime, codec=__import__("agentrt").make_codec("json", registry)) as main:
        with pytest.raises(SpawnError, match="version error"):
            await spawn_agent_process(main, "tests.reporter", modules=[HELPERS])


async def test_killed_subprocess_surfaces_and_aid_becomes_unknown(runtime):
    events = []
    async with Container("local:main", runtime=runtime) as main:
        await spawn_agent_process(
            main, "tests.reporter", "rep", modules=[HELPERS], health_callback=lambda aid, code: events.append((aid, code))
        )
        other = Recorder()
        main.register(other, "other")
        link = mirror_link(main, "rep")
        link.kill()
        await wait_for(lambda: events)
        assert events == [("rep", -signal.SIGKILL)]
        assert not main.hosts("rep")
        assert await main.send_message("x", make_address("local:main", "rep")) is False
        assert await main.send_message("still fine", other.addr)
        await main.tasks_complete_or_sleeping(timeout=5)
        assert other.inbox[0][0] == "still fine"


async def test_agent_exiting_mid_message_does_not_block_quiescence(runtime):
    events = []
    async with Container("local:main", runtime=runtime) as main:
        await spawn_agent_process(main, "tests.reporter", "rep", modules=[HELPERS], health_callback=lambda *a: events.append(a))
        await main.send_message("die", make_address("local:main", "rep"))
        await main.tasks_complete_or_sleeping(timeout=10)
        await wait_for(lambda: events)
        assert events[0][1] == 9


async def test_mirror_processes_are_reaped_on_shutdown(runtime):
    main = Container("local:main", runtime=runtime)
    await main.start()
    await spawn_agent_process(main, "tests.reporter", "rep", modules=[HELPERS])
    process = mirror_link(main, "rep").process
    await main.shutdown()
    assert process.returncode == 0
