"""Modular runtime for communicating software agents."""

import contextlib

from .agents import Agent, AgentContext, Role, RoleAgent, RoleContext
from .clock import Clock, ExternalClock, RealClock
from .codec import BinaryCodec, Codec, JsonCodec, TypeRegistry, make_codec
from .container import Container, create_container
from .errors import AgentRuntimeError
from .messaging import AclMessage, AgentAddress, Endpoint, Envelope, Performative, make_address, unwrap, wrap_acl
from .runtime import Runtime, get_runtime, tasks_complete_or_sleeping
from .scheduling import ScheduledTask, Scheduler, TaskHandle, TaskState


@contextlib.asynccontextmanager
async def activate(*containers: Container):
    """Start the given containers and shut them all down on exit."""
    try:
        for container in containers:
            await container.start()
        yield containers
    finally:
        for container in containers:
            await container.shutdown()


__version__ = "0.1.0"

__all__ = [
    "AclMessage",
    "Agent",
    "AgentAddress",
    "AgentContext",
    "AgentRuntimeError",
    "BinaryCodec",
    "Clock",
    "Codec",
    "Container",
    "Endpoint",
    "Envelope",
    "ExternalClock",
    "JsonCodec",
    "Performative",
    "RealClock",
    "Role",
    "RoleAgent",
    "RoleContext",
    "Runtime",
    "ScheduledTask",
    "Scheduler",
    "TaskHandle",
    "TaskState",
    "TypeRegistry",
    "activate",
    "create_container",
    "get_runtime",
    "make_address",
    "make_codec",
    "tasks_complete_or_sleeping",
    "unwrap",
    "wrap_acl",
]
