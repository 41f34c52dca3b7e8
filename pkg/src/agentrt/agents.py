"""Agent programming models.

Two styles are supported and may not be mixed on one agent:

* :class:`Agent` - subclass and override :meth:`Agent.handle_message`.
* :class:`RoleAgent` - compose :class:`Role` objects, each registering its
  own handlers, lifecycle hooks and shared-model observers through a
  :class:`RoleContext`.

Agents see their container only through an :class:`AgentContext`.
"""

from __future__ import annotations

import inspect
import logging
from typing import TYPE_CHECKING, Any, Callable, TypeVar

from .errors import LifecycleError, RegistrationError, ValidationError
from .messaging import AgentAddress
from .scheduling import Scheduler, TaskHandle

if TYPE_CHECKING:
    from .container.base import Container

logger = logging.getLogger(__name__)

M = TypeVar("M")


async def _maybe_await(result: Any) -> Any:
    if inspect.isawaitable(result):
        return await result
    return result


class AgentContext:
    """What an agent may do with its container: send, schedule, read the clock, use topics."""

    __slots__ = ("_container", "_aid", "scheduler")

    def __init__(self, container: Container, aid: str, scheduler: Scheduler):
        self._container = container
        self._aid = aid
        self.scheduler = scheduler

    @property
    def aid(self) -> str:
        return self._aid

    @property
    def addr(self) -> AgentAddress:
        return AgentAddress(self._container.address, self._aid)

    def now(self) -> float:
        return self._container.clock.now()

    async def send_message(self, content: Any, receiver: AgentAddress, meta: dict | None = None) -> bool:
        return await self._container.send_message(content, receiver, sender_aid=self._aid, meta=meta)

    def subscribe(self, topic: str) -> None:
        self._container.subscribe(self._aid, topic)

    def unsubscribe(self, topic: str) -> None:
        self._container.unsubscribe(self._aid, topic)

    def publish(self, topic: str, content: Any, meta: dict | None = None) -> int:
        return self._container.publish(topic, content, sender_aid=self._aid, meta=meta)

    def address_of(self, aid: str) -> AgentAddress:
        """Address of another agent in the same container."""
        return AgentAddress(self._container.address, aid)

    @property
    def clock(self):
        return self._container.clock

    async def tasks_complete_or_sleeping(self, timeout: float | None = None) -> None:
        """Wait for the hosting container to become quiescent."""
        await self._container.tasks_complete_or_sleeping(timeout)

    def next_activity(self) -> float | None:
        return self._container.next_activity()

    def exchange_counts(self) -> tuple[int, int]:
        """Application messages sent to and received from other containers."""
        return self._container.app_sent, self._container.app_received


class Agent:
    """Inheritance-style agent. Override :meth:`handle_message`."""

    #: system agents (e.g. clock coordination) are ignored by the quiescence barrier
    system = False

    def __init__(self):
        self._context: AgentContext | None = None

    # -- wiring -------------------------------------------------------------

    def _bind(self, context: AgentContext) -> None:
        if self._context is not None:
            raise RegistrationError(f"agent already registered as {self._context.aid}")
        self._context = context
        self.on_register()

    @property
    def context(self) -> AgentContext:
        if self._context is None:
            raise LifecycleError("agent is not registered with a container")
        return self._context

    @property
    def aid(self) -> str:
        return self.context.aid

    @property
    def addr(self) -> AgentAddress:
        return self.context.addr

    @property
    def scheduler(self) -> Scheduler:
        return self.context.scheduler

    def now(self) -> float:
        return self.context.now()

    # -- hooks -------------------------------------------------------------

    def on_register(self) -> None:
        pass

    def on_start(self) -> Any:
        pass

    def on_stop(self) -> Any:
        pass

    def handle_message(self, content: Any, meta: dict) -> Any:
        logger.info("%s: unhandled message %r", self._context.aid if self._context else "?", content)

    async def _dispatch(self, content: Any, meta: dict) -> None:
        await _maybe_await(self.handle_message(content, meta))

    async def _start(self) -> None:
        await _maybe_await(self.on_start())

    async def _stop(self) -> None:
        await _maybe_await(self.on_stop())

    # -- conveniences ---------------------------------------------------------

    async def send_message(self, content: Any, receiver: AgentAddress, meta: dict | None = None) -> bool:
        return await self.context.send_message(content, receiver, meta)

    def schedule_instant_message(self, content: Any, receiver: AgentAddress, meta: dict | None = None) -> TaskHandle:
        return self.scheduler.schedule_instant_task(lambda: self.send_message(content, receiver, meta))

    def schedule_instant_task(self, body, name=None) -> TaskHandle:
        return self.scheduler.schedule_instant_task(body, name)

    def schedule_timestamp_task(self, body, timestamp: float, name=None) -> TaskHandle:
        return self.scheduler.schedule_timestamp_task(body, timestamp, name)

    def schedule_periodic_task(self, body, interval: float, name=None) -> TaskHandle:
        return self.scheduler.schedule_periodic_task(body, interval, name)

    def schedule_delayed_task(self, body, delay: float, name=None) -> TaskHandle:
        return self.scheduler.schedule_delayed_task(body, delay, name)

    def schedule_conditional_task(self, body, condition, poll_interval: float = 0.1, name=None) -> TaskHandle:
        return self.scheduler.schedule_conditional_task(body, condition, poll_interval, name)

    def schedule_process_task(self, function_id: str, input: Any = None, name=None) -> TaskHandle:
        return self.scheduler.schedule_process_task(function_id, input, name)

    def __repr__(self) -> str:
        aid = self._context.aid if self._context else "unregistered"
        return f"<{type(self).__name__} {aid}>"


# -- role system -------------------------------------------------------------


class Role:
    """One responsibility of a :class:`RoleAgent`.

    ``setup`` runs when the role is added, ``on_start`` when the container
    starts (or right after ``setup`` for a late attach), ``on_stop`` at
    shutdown in reverse addition order.
    """

    def __init__(self):
        self._context: RoleContext | None = None
        self.active = True

    @property
    def context(self) -> RoleContext:
        if self._context is None:
            raise LifecycleError(f"{type(self).__name__} has not been added to an agent")
        return self._context

    def setup(self) -> None:
        pass

    def on_start(self) -> Any:
        pass

    def on_stop(self) -> Any:
        pass

    def __repr__(self) -> str:
        return f"<{type(self).__name__}>"


class SharedData:
    """Text-keyed shared data with per-key observers, shared by an agent's roles."""

    def __init__(self):
        self._values: dict[str, Any] = {}
        self._observers: dict[str, list[tuple[Role, Callable[[str, Any], Any]]]] = {}

    def __getitem__(self, key: str) -> Any:
        return self._values[key]

    def __contains__(self, key: str) -> bool:
        return key in self._values

    def get(self, key: str, default: Any = None) -> Any:
        return self._values.get(key, default)

    def set(self, key: str, value: Any) -> None:
        if not isinstance(key, str):
            raise ValidationError("shared data keys are text")
        self._values[key] = value
        for role, callback in list(self._observers.get(key, [])):
            try:
                callback(key, value)
            except Exception:
                logger.exception("observer of %r in %r raised", key, role)

    __setitem__ = set

    def observe(self, role: Role, key: str, callback: Callable[[str, Any], Any]) -> None:
        self._observers.setdefault(key, []).append((role, callback))


class RoleContext:
    """A role's view of its agent and container."""

    def __init__(self, agent: RoleAgent, role: Role):
        self._agent = agent
        self._role = role

    @property
    def aid(self) -> str:
        return self._agent.aid

    @property
    def addr(self) -> AgentAddress:
        return self._agent.addr

    @property
    def scheduler(self) -> Scheduler:
        return self._agent.scheduler

    @property
    def data(self) -> SharedData:
        return self._agent._shared_data

    def now(self) -> float:
        return self._agent.now()

    def observe_data(self, key: str, callback: Callable[[str, Any], Any]) -> None:
        self._agent._shared_data.observe(self._role, key, callback)

    def address_of(self, aid: str) -> AgentAddress:
        return self._agent.context.address_of(aid)

    async def send_message(self, content: Any, receiver: AgentAddress, meta: dict | None = None) -> bool:
        return await self._agent.send_message(content, receiver, meta)

    def schedule_instant_message(self, content: Any, receiver: AgentAddress, meta: dict | None = None) -> TaskHandle:
        return self._agent.schedule_instant_message(content, receiver, meta)

    def subscribe(self, topic: str) -> None:
        self._agent.context.subscribe(topic)

    def publish(self, topic: str, content: Any, meta: dict | None = None) -> int:
        return self._agent.context.publish(topic, content, meta)

    def subscribe_message(self, handler: Callable[[Any, dict], Any], selector: Callable[[Any, dict], bool] | None = None) -> None:
        """Register ``handler(content, meta)`` for messages passing ``selector``."""
        self._agent._subscribe_message(self._role, handler, selector)

    def get_or_create_model(self, model_type: type[M]) -> M:
        return self._agent._get_or_create_model(model_type)

    def subscribe_model(self, model_type: type, callback: Callable[[Any], Any]) -> None:
        self._agent._subscribe_model(self._role, model_type, callback)

    def update(self, model: Any) -> None:
        """Notify every observer of ``type(model)`` exactly once."""
        self._agent._update_model(model)

    update_and_notify = update

    def roles(self) -> list[Role]:
        return list(self._agent.roles)

    def deactivate(self, role: Role | None = None) -> None:
        (role or self._role).active = False

    def activate(self, role: Role | None = None) -> None:
        (role or self._role).active = True


class RoleAgent(Agent):
    """Composition-style agent whose behavior is entirely made of roles."""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "handle_message" in cls.__dict__:
            raise TypeError(
                f"{cls.__name__} overrides handle_message; role agents dispatch through roles only"
            )

    def __init__(self):
        super().__init__()
        self.roles: list[Role] = []
        self._handlers: list[tuple[Role, Callable[[Any, dict], bool] | None, Callable]] = []
        self._models: dict[type, Any] = {}
        self._model_observers: dict[type, list[tuple[Role, Callable[[Any], Any]]]] = {}
        self._shared_data = SharedData()
        self._started = False

    def add_role(self, role: Role) -> Role:
        if any(existing is role for existing in self.roles):
            raise RegistrationError(f"{role!r} already added to this agent")
        if role._context is not None:
            raise RegistrationError(f"{role!r} already belongs to another agent")
        role._context = RoleContext(self, role)
        self.roles.append(role)
        _run_hook(role, "setup")
        if self._started:
            result = _run_hook(role, "on_start")
            if inspect.isawaitable(result):
                self.scheduler.schedule_instant_task(result)
        return role

    def remove_role(self, role: Role) -> None:
        self.roles = [r for r in self.roles if r is not role]
        self._handlers = [h for h in self._handlers if h[0] is not role]
        for key, observers in self._model_observers.items():
            self._model_observers[key] = [o for o in observers if o[0] is not role]
        result = _run_hook(role, "on_stop")
        if inspect.isawaitable(result):
            result.close()
        role._context = None

    def _subscribe_message(self, role, handler, selector) -> None:
        self._handlers.append((role, selector, handler))

    async def _dispatch(self, content: Any, meta: dict) -> None:
        matched = False
        for role in list(self.roles):
            if not role.active:
                continue
            for owner, selector, handler in [h for h in self._handlers if h[0] is role]:
                if selector is not None:
                    try:
                        if not selector(content, meta):
                            continue
                    except Exception:
                        logger.exception("selector of %r raised; treated as no match", owner)
                        continue
                matched = True
                try:
                    await _maybe_await(handler(content, meta))
                except Exception:
                    logger.exception("handler of %r failed on %r", owner, content)
        if not matched:
            logger.info("%s: unhandled message %r", self.aid, content)

    async def _start(self) -> None:
        self._started = True
        for role in list(self.roles):
            await _maybe_await_hook(role, "on_start")
        await _maybe_await(self.on_start())

    async def _stop(self) -> None:
        await _maybe_await(self.on_stop())
        for role in reversed(list(self.roles)):
            await _maybe_await_hook(role, "on_stop")

    def _get_or_create_model(self, model_type: type):
        model = self._models.get(model_type)
        if model is None:
            model = self._models[model_type] = model_type()
        return model

    def _subscribe_model(self, role: Role, model_type: type, callback) -> None:
        self._model_observers.setdefault(model_type, []).append((role, callback))

    def _update_model(self, model: Any) -> None:
        for role, callback in list(self._model_observers.get(type(model), [])):
            try:
                callback(model)
            except Exception:
                logger.exception("model observer in %r raised", role)


def _run_hook(role: Role, name: str) -> Any:
    try:
        return getattr(role, name)()
    except Exception:
        logger.exception("%s hook of %r raised", name, role)
        return None


async def _maybe_await_hook(role: Role, name: str) -> None:
    try:
        await _maybe_await(getattr(role, name)())
    except Exception:
        logger.exception("%s hook of %r raised", name, role)


__all__ = [
    "Agent",
    "AgentContext",
    "Role",
    "RoleAgent",
    "RoleContext",
    "SharedData",
]
