"""Tables of named process-task functions and agent factories.

Closures do not cross process boundaries, so worker processes and agent
subprocesses look bodies and factories up by id. A module that registers
entries must be importable in the child; pass it in ``modules`` when
creating a pool or spawning an agent process.
"""

from __future__ import annotations

import importlib
from typing import Any, Callable, Iterable

from ..codec import TypeRegistry, default_registry
from ..errors import RegistrationError

FUNCTIONS: dict[str, Callable[[Any], Any]] = {}
AGENT_FACTORIES: dict[str, Callable[..., Any]] = {}


def register_function(function_id: str, func: Callable[[Any], Any] | None = None):
    """Register ``func`` under ``function_id``; usable as a decorator."""

    def add(f):
        existing = FUNCTIONS.get(function_id)
        if existing is not None and existing is not f:
            raise RegistrationError(f"function id {function_id!r} already registered")
        FUNCTIONS[function_id] = f
        return f

    return add(func) if func is not None else add


def register_agent_factory(factory_id: str, factory: Callable[..., Any] | None = None):
    def add(f):
        existing = AGENT_FACTORIES.get(factory_id)
        if existing is not None and existing is not f:
            raise RegistrationError(f"agent factory {factory_id!r} already registered")
        AGENT_FACTORIES[factory_id] = f
        return f

    return add(factory) if factory is not None else add


def import_modules(modules: Iterable[str]) -> None:
    for name in modules:
        importlib.import_module(name)


def resolve(dotted: str) -> Any:
    module_name, _, attr = dotted.partition(":")
    module = importlib.import_module(module_name)
    return getattr(module, attr) if attr else module


def build_registry(registry_factory: str | None = None) -> TypeRegistry:
    """Default registry, optionally extended by ``"module:function"``."""
    registry = default_registry()
    if registry_factory:
        resolve(registry_factory)(registry)
    return registry
