"""Agent kinds and functions importable from agent subprocesses during tests."""

import os
from dataclasses import dataclass

from agentrt import Agent
from agentrt.distribution import register_agent_factory, register_function


@dataclass(frozen=True)
class Order:
    item: str
    qty: int


def extend_registry(registry):
    registry.register(500, Order)


@register_function("tests.double_qty")
def double_qty(order):
    return Order(order.item, order.qty * 2)


@register_agent_factory("tests.reporter")
class Reporter(Agent):
    """Replies with what it knows about itself so tests can inspect the child."""

    def __init__(self, tag="r"):
        super().__init__()
        self.tag = tag

    async def handle_message(self, content, meta):
        if content == "whoami":
            reply = {"pid": os.getpid(), "addr": self.addr, "now": self.now(), "tag": self.tag}
        elif content == "die":
            os._exit(9)
        else:
            reply = content
        await self.send_message(reply, meta["sender"])


@register_agent_factory("tests.timer")
class Timer(Agent):
    """Schedules a timestamp task in the child and reports when it fires."""

    def __init__(self, report_to, at):
        super().__init__()
        self.report_to = report_to
        self.at = at

    def on_start(self):
        self.schedule_timestamp_task(self._fire, self.at)

    async def _fire(self):
        await self.send_message(["fired", self.now()], self.report_to)


@register_agent_factory("tests.broken")
def broken_factory():
    raise RuntimeError("factory refuses")
