"""Pluggable message codecs (JSON and binary flavors) over a shared type registry."""

from __future__ import annotations

import hashlib
from typing import Any

from ..errors import ValidationError
from .base import Codec
from .binary import BinaryCodec
from .jsoncodec import JsonCodec
from .registry import TypeEntry, TypeRegistry, default_registry, register_type

FLAVORS = {"json": JsonCodec, "binary": BinaryCodec}


def make_codec(flavor: str = "json", registry: TypeRegistry | None = None) -> Codec:
    try:
        cls = FLAVORS[flavor]
    except KeyError:
        raise ValidationError(f"unknown codec flavor {flavor!r}; expected one of {sorted(FLAVORS)}") from None
    return cls(registry)


def payload_digest(codec: Codec, payload: Any) -> str:
    """Short stable hash of a payload, identical across codec flavors."""
    canonical = BinaryCodec(codec.registry).encode(payload)
    return hashlib.sha256(canonical).hexdigest()[:16]


__all__ = [
    "BinaryCodec",
    "Codec",
    "FLAVORS",
    "JsonCodec",
    "TypeEntry",
    "TypeRegistry",
    "default_registry",
    "make_codec",
    "payload_digest",
    "register_type",
]
