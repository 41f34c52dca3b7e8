"""Process-level distribution: worker pools for process tasks and agents
hosted in subprocesses behind mirror containers."""

from .mirror import MirrorLink, mirror_link, spawn_agent_process
from .pool import WorkerPool
from .registry import register_agent_factory, register_function

__all__ = [
    "MirrorLink",
    "WorkerPool",
    "mirror_link",
    "register_agent_factory",
    "register_function",
    "spawn_agent_process",
]
