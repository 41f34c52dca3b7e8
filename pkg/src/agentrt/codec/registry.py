"""Type-tag registry shared by both codec flavors."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable

from ..errors import RegistrationError

TAG_NULL = 0
TAG_BOOL = 1
TAG_INT = 2
TAG_FLOAT = 3
TAG_TEXT = 4
TAG_BYTES = 5
TAG_LIST = 6
TAG_MAP = 7
TAG_ENVELOPE = 8
TAG_ACL = 9
TAG_ADDRESS = 10
TAG_TUPLE = 11

RESERVED_MAX = 15
TAG_MAX = 0xFFFF

BUILTIN_NAMES = {
    TAG_NULL: "null",
    TAG_BOOL: "bool",
    TAG_INT: "int",
    TAG_FLOAT: "float",
    TAG_TEXT: "text",
    TAG_BYTES: "bytes",
    TAG_LIST: "list",
    TAG_MAP: "map",
    TAG_ENVELOPE: "Envelope",
    TAG_ACL: "AclMessage",
    TAG_ADDRESS: "AgentAddress",
    TAG_TUPLE: "tuple",
}


@dataclass(frozen=True)
class TypeEntry:
    tag: int
    name: str
    cls: type
    serializer: Callable[[Any], Any]
    deserializer: Callable[[Any], Any]


def _dataclass_pair(cls: type) -> tuple[Callable, Callable]:
    names = [f.name for f in dataclasses.fields(cls)]

    def serialize(value):
        return {name: getattr(value, name) for name in names}

    def deserialize(data):
        return cls(**data)

    return serialize, deserialize


class TypeRegistry:
    """Maps custom payload types to 16-bit tags (tags 0-15 are built in).

    A registry is mutable until :meth:`freeze` is called, which containers do
    on start.
    """

    def __init__(self):
        self._by_tag: dict[int, TypeEntry] = {}
        self._by_type: dict[type, TypeEntry] = {}
        self._frozen = False

    def register(
        self,
        tag: int,
        cls: type,
        serializer: Callable[[Any], Any] | None = None,
        deserializer: Callable[[Any], Any] | None = None,
        name: str | None = None,
    ) -> TypeRegistry:
        if self._frozen:
            raise RegistrationError("registry is frozen (container already started)")
        if not isinstance(tag, int) or isinstance(tag, bool) or not 0 <= tag <= TAG_MAX:
            raise RegistrationError(f"tag must be an unsigned 16-bit integer, got {tag!r}")
        if tag <= RESERVED_MAX:
            raise RegistrationError(f"tag {tag} is reserved for built-in types")
        if tag in self._by_tag:
            raise RegistrationError(f"tag {tag} already registered for {self._by_tag[tag].name}")
        if cls in self._by_type:
            raise RegistrationError(f"type {cls.__name__} already registered")
        name = name if name is not None else cls.__name__
        if not name:
            raise RegistrationError("type name must be non-empty")
        if serializer is None or deserializer is None:
            if not dataclasses.is_dataclass(cls):
                raise RegistrationError(
                    f"{cls.__name__} is not a dataclass; pass serializer and deserializer"
                )
            default_ser, default_de = _dataclass_pair(cls)
            serializer = serializer or default_ser
            deserializer = deserializer or default_de
        entry = TypeEntry(tag, name, cls, serializer, deserializer)
        self._by_tag[tag] = entry
        self._by_type[cls] = entry
        return self

    def serializable(self, tag: int, name: str | None = None):
        """Class decorator form of :meth:`register` for dataclasses."""

        def decorate(cls):
            self.register(tag, cls, name=name)
            return cls

        return decorate

    def by_tag(self, tag: int) -> TypeEntry | None:
        return self._by_tag.get(tag)

    def by_type(self, cls: type) -> TypeEntry | None:
        return self._by_type.get(cls)

    def freeze(self) -> None:
        self._frozen = True

    @property
    def frozen(self) -> bool:
        return self._frozen

    def copy(self) -> TypeRegistry:
        clone = TypeRegistry()
        clone._by_tag = dict(self._by_tag)
        clone._by_type = dict(self._by_type)
        return clone

    def manifest(self) -> list[tuple[int, str]]:
        """Sorted (tag, name) pairs; used to check parent/child compatibility."""
        return sorted((e.tag, e.name) for e in self._by_tag.values())

    def __contains__(self, tag: int) -> bool:
        return tag in self._by_tag

    def __len__(self) -> int:
        return len(self._by_tag)


def register_type(registry: TypeRegistry, tag: int, name: str, cls: type, ser=None, de=None) -> TypeRegistry:
    return registry.register(tag, cls, ser, de, name=name)


def default_registry() -> TypeRegistry:
    """A fresh registry holding the runtime's own protocol types."""
    from ..clock import protocol

    registry = TypeRegistry()
    protocol.register_protocol_types(registry)
    return registry
