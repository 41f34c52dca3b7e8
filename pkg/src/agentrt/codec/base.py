from __future__ import annotations

from typing import Any

from ..errors import AgentRuntimeError, DecodeError, EncodeError
from .registry import TypeEntry, TypeRegistry, default_registry


class Codec:
    """Base class for codec flavors.

    Subclasses implement ``_encode``/``_decode``; this class wraps them so that
    encoding problems always surface as :class:`EncodeError` and decoding any
    byte string either returns a value or raises :class:`DecodeError`.
    """

    flavor = "abstract"

    def __init__(self, registry: TypeRegistry | None = None):
        self.registry = registry if registry is not None else default_registry()

    def register(self, tag: int, cls: type, serializer=None, deserializer=None, name: str | None = None):
        self.registry.register(tag, cls, serializer, deserializer, name=name)
        return cls

    def serializable(self, tag: int, name: str | None = None):
        return self.registry.serializable(tag, name)

    def encode(self, value: Any) -> bytes:
        try:
            return self._encode(value)
        except EncodeError:
            raise
        except RecursionError:
            raise EncodeError("value nested too deeply to encode") from None
        except Exception as exc:
            raise EncodeError(f"cannot encode {type(value).__name__}: {exc}") from exc

    def decode(self, data: bytes) -> Any:
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise DecodeError(f"expected bytes, got {type(data).__name__}")
        try:
            return self._decode(bytes(data))
        except DecodeError:
            raise
        except RecursionError:
            raise DecodeError("input nested too deeply") from None
        except (AgentRuntimeError, Exception) as exc:
            raise DecodeError(f"malformed {self.flavor} input: {exc}") from exc

    def _entry_for(self, value: Any) -> TypeEntry:
        entry = self.registry.by_type(type(value))
        if entry is None:
            name = type(value).__qualname__
            raise EncodeError(f"type {name} is not registered with the codec", type_name=name)
        return entry

    def _encode(self, value: Any) -> bytes:
        raise NotImplementedError

    def _decode(self, data: bytes) -> Any:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self.registry)} custom types)"
