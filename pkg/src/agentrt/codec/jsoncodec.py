"""Self-describing JSON flavor.

Each non-primitive value becomes ``{"__tag__": t, "payload": ...}``; the top
level value is always wrapped, even when primitive. Maps are emitted as a
list of ``[key, value]`` pairs ordered by the key's JSON text, so output is
deterministic and keys need not be strings.
"""

from __future__ import annotations

import base64
import binascii
import json
from typing import Any

from ..errors import DecodeError
from ..messaging import AclMessage, AgentAddress, Endpoint, Envelope
from . import registry as r
from .base import Codec

_PRIMITIVE_TAGS = {type(None): r.TAG_NULL, bool: r.TAG_BOOL, int: r.TAG_INT, float: r.TAG_FLOAT, str: r.TAG_TEXT}
_ACL_FIELDS = (
    "conversation_id",
    "reply_with",
    "in_reply_to",
    "reply_by",
    "language",
    "encoding",
    "ontology",
    "protocol",
)


def _dumps(doc: Any) -> str:
    return json.dumps(doc, separators=(",", ":"), sort_keys=True, ensure_ascii=False)


class JsonCodec(Codec):
    flavor = "json"

    def _encode(self, value: Any) -> bytes:
        return _dumps(self._tagged(value)).encode("utf-8")

    def _nested(self, value: Any) -> Any:
        if type(value) in _PRIMITIVE_TAGS:
            return value
        return self._tagged(value)

    def _tagged(self, value: Any) -> dict:
        kind = type(value)
        if kind in _PRIMITIVE_TAGS:
            return {"__tag__": _PRIMITIVE_TAGS[kind], "payload": value}
        if kind in (bytes, bytearray):
            return {"__tag__": r.TAG_BYTES, "payload": base64.b64encode(value).decode("ascii")}
        if kind is list or kind is tuple:
            tag = r.TAG_LIST if kind is list else r.TAG_TUPLE
            return {"__tag__": tag, "payload": [self._nested(item) for item in value]}
        if kind is dict:
            pairs = [(self._nested(k), self._nested(v)) for k, v in value.items()]
            pairs.sort(key=lambda pair: _dumps(pair[0]))
            return {"__tag__": r.TAG_MAP, "payload": [list(pair) for pair in pairs]}
        if kind is AgentAddress:
            return {"__tag__": r.TAG_ADDRESS, "payload": {"endpoint": str(value.endpoint), "aid": value.aid}}
        if kind is Envelope:
            body = {
                "sender": self._nested(value.sender),
                "receiver": self._nested(value.receiver),
                "payload": self._nested(value.payload),
                "meta": self._nested(dict(value.meta)),
            }
            return {"__tag__": r.TAG_ENVELOPE, "payload": body}
        if kind is AclMessage:
            body = {
                "performative": value.performative.value,
                "content": self._nested(value.content),
                "sender_id": self._nested(value.sender_id),
                "receiver_id": self._nested(value.receiver_id),
            }
            for name in _ACL_FIELDS:
                body[name] = getattr(value, name)
            return {"__tag__": r.TAG_ACL, "payload": body}
        entry = self._entry_for(value)
        return {"__tag__": entry.tag, "payload": self._nested(entry.serializer(value))}

    def _decode(self, data: bytes) -> Any:
        try:
            doc = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise DecodeError(f"not a JSON document: {exc}") from None
        if not isinstance(doc, dict):
            raise DecodeError("top-level JSON value must be a tagged object")
        return self._from_tagged(doc)

    def _from_nested(self, node: Any) -> Any:
        if isinstance(node, dict):
            return self._from_tagged(node)
        if isinstance(node, list):
            raise DecodeError("untagged JSON array")
        return node

    def _from_tagged(self, node: dict) -> Any:
        if set(node) != {"__tag__", "payload"}:
            raise DecodeError("object is not a tagged value")
        tag, payload = node["__tag__"], node["payload"]
        if type(tag) is not int:
            raise DecodeError("tag must be an integer")
        if tag in (r.TAG_NULL, r.TAG_BOOL, r.TAG_INT, r.TAG_FLOAT, r.TAG_TEXT):
            expected = {r.TAG_NULL: type(None), r.TAG_BOOL: bool, r.TAG_INT: int, r.TAG_FLOAT: float, r.TAG_TEXT: str}
            if type(payload) is not expected[tag]:
                raise DecodeError(f"payload type does not match tag {tag}", tag=tag)
            return payload
        if tag == r.TAG_BYTES:
            if not isinstance(payload, str):
                raise DecodeError("bytes payload must be base64 text", tag=tag)
            try:
                return base64.b64decode(payload, validate=True)
            except (binascii.Error, ValueError):
                raise DecodeError("invalid base64 payload", tag=tag) from None
        if tag in (r.TAG_LIST, r.TAG_TUPLE):
            if not isinstance(payload, list):
                raise DecodeError("list payload must be an array", tag=tag)
            items = [self._from_nested(item) for item in payload]
            return items if tag == r.TAG_LIST else tuple(items)
        if tag == r.TAG_MAP:
            if not isinstance(payload, list):
                raise DecodeError("map payload must be an array of pairs", tag=tag)
            result = {}
            for pair in payload:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise DecodeError("map entry must be a [key, value] pair", tag=tag)
                result[self._from_nested(pair[0])] = self._from_nested(pair[1])
            return result
        if tag == r.TAG_ADDRESS:
            if not isinstance(payload, dict) or set(payload) != {"endpoint", "aid"}:
                raise DecodeError("malformed AgentAddress", tag=tag)
            return AgentAddress(Endpoint.parse(payload["endpoint"]), payload["aid"])
        if tag == r.TAG_ENVELOPE:
            if not isinstance(payload, dict) or set(payload) != {"sender", "receiver", "payload", "meta"}:
                raise DecodeError("malformed Envelope", tag=tag)
            return Envelope(
                receiver=self._from_nested(payload["receiver"]),
                payload=self._from_nested(payload["payload"]),
                sender=self._from_nested(payload["sender"]),
                meta=self._from_nested(payload["meta"]),
            )
        if tag == r.TAG_ACL:
            keys = {"performative", "content", "sender_id", "receiver_id", *_ACL_FIELDS}
            if not isinstance(payload, dict) or set(payload) != keys:
                raise DecodeError("malformed AclMessage", tag=tag)
            extra = {name: payload[name] for name in _ACL_FIELDS}
            for name, item in extra.items():
                if name != "reply_by" and item is not None and not isinstance(item, str):
                    raise DecodeError(f"AclMessage.{name} must be text", tag=tag)
            return AclMessage(
                performative=payload["performative"],
                content=self._from_nested(payload["content"]),
                sender_id=self._from_nested(payload["sender_id"]),
                receiver_id=self._from_nested(payload["receiver_id"]),
                **extra,
            )
        entry = self.registry.by_tag(tag)
        if entry is None:
            raise DecodeError(f"unknown type tag {tag}", tag=tag)
        return entry.deserializer(self._from_nested(payload))
