"""Tag-length-value binary flavor.

Every value is ``tag (u16 BE) | length (u32 BE) | payload``. Lists, tuples
and maps put an element count in the length slot instead of a byte count,
followed by the encoded elements (maps: alternating key/value, ordered by
the encoded key bytes).
"""

from __future__ import annotations

import struct
from typing import Any

from ..errors import DecodeError, EncodeError
from ..messaging import AclMessage, AgentAddress, Envelope, Endpoint
from . import registry as r
from .base import Codec

_HEADER = struct.Struct(">HI")
_FLOAT = struct.Struct(">d")
HEADER_SIZE = _HEADER.size

_ACL_TEXT_FIELDS = ("conversation_id", "reply_with", "in_reply_to", "language", "encoding", "ontology", "protocol")


def _int_bytes(value: int) -> bytes:
    length = (value.bit_length() + 8) // 8
    return value.to_bytes(length, "big", signed=True)


class BinaryCodec(Codec):
    flavor = "binary"

    def _encode(self, value: Any) -> bytes:
        out = bytearray()
        self._put(value, out)
        return bytes(out)

    def _put(self, value: Any, out: bytearray) -> None:
        header = _HEADER.pack
        if value is None:
            out += header(r.TAG_NULL, 0)
        elif value is True or value is False:
            out += header(r.TAG_BOOL, 1)
            out.append(1 if value else 0)
        elif type(value) is int:
            data = _int_bytes(value)
            out += header(r.TAG_INT, len(data))
            out += data
        elif type(value) is float:
            out += header(r.TAG_FLOAT, 8)
            out += _FLOAT.pack(value)
        elif type(value) is str:
            data = value.encode("utf-8")
            out += header(r.TAG_TEXT, len(data))
            out += data
        elif type(value) in (bytes, bytearray):
            out += header(r.TAG_BYTES, len(value))
            out += value
        elif type(value) is list or type(value) is tuple:
            out += header(r.TAG_LIST if type(value) is list else r.TAG_TUPLE, len(value))
            for item in value:
                self._put(item, out)
        elif type(value) is dict:
            pairs = sorted((self._encode(k), self._encode(v)) for k, v in value.items())
            out += header(r.TAG_MAP, len(pairs))
            for key, item in pairs:
                out += key
                out += item
        elif type(value) is AgentAddress:
            self._framed(r.TAG_ADDRESS, [str(value.endpoint), value.aid], out)
        elif type(value) is Envelope:
            self._framed(r.TAG_ENVELOPE, [value.sender, value.receiver, value.payload, dict(value.meta)], out)
        elif type(value) is AclMessage:
            fields = [value.performative.value, value.content, value.sender_id, value.receiver_id, value.reply_by]
            fields += [getattr(value, name) for name in _ACL_TEXT_FIELDS]
            self._framed(r.TAG_ACL, fields, out)
        else:
            entry = self._entry_for(value)
            self._framed(entry.tag, [entry.serializer(value)], out)

    def _framed(self, tag: int, fields: list, out: bytearray) -> None:
        body = bytearray()
        for item in fields:
            self._put(item, body)
        out += _HEADER.pack(tag, len(body))
        out += body

    def _decode(self, data: bytes) -> Any:
        view = memoryview(data)
        value, pos = self._take(view, 0)
        if pos != len(view):
            raise DecodeError(f"{len(view) - pos} trailing bytes after value")
        return value

    def _take(self, view: memoryview, pos: int) -> tuple[Any, int]:
        end = len(view)
        if pos + HEADER_SIZE > end:
            raise DecodeError("truncated header")
        tag, length = _HEADER.unpack_from(view, pos)
        pos += HEADER_SIZE
        if tag in (r.TAG_LIST, r.TAG_TUPLE, r.TAG_MAP):
            count = length * (2 if tag == r.TAG_MAP else 1)
            if count * HEADER_SIZE > end - pos:
                raise DecodeError("element count exceeds remaining input")
            items = []
            for _ in range(count):
                item, pos = self._take(view, pos)
                items.append(item)
            if tag == r.TAG_LIST:
                return items, pos
            if tag == r.TAG_TUPLE:
                return tuple(items), pos
            try:
                return dict(zip(items[::2], items[1::2])), pos
            except TypeError:
                raise DecodeError("unhashable map key") from None
        if pos + length > end:
            raise DecodeError("truncated payload")
        body = view[pos : pos + length]
        pos += length
        return self._scalar(tag, body), pos

    def _scalar(self, tag: int, body: memoryview) -> Any:
        n = len(body)
        if tag == r.TAG_NULL:
            if n:
                raise DecodeError("null with payload")
            return None
        if tag == r.TAG_BOOL:
            if n != 1 or body[0] > 1:
                raise DecodeError("malformed bool")
            return body[0] == 1
        if tag == r.TAG_INT:
            if n == 0:
                raise DecodeError("empty int")
            return int.from_bytes(body, "big", signed=True)
        if tag == r.TAG_FLOAT:
            if n != 8:
                raise DecodeError("malformed float")
            return _FLOAT.unpack(body)[0]
        if tag == r.TAG_TEXT:
            try:
                return str(body, "utf-8")
            except UnicodeDecodeError:
                raise DecodeError("invalid utf-8 text") from None
        if tag == r.TAG_BYTES:
            return bytes(body)
        if tag in (r.TAG_ADDRESS, r.TAG_ENVELOPE, r.TAG_ACL):
            return self._structured(tag, self._fields(body))
        entry = self.registry.by_tag(tag)
        if entry is None:
            raise DecodeError(f"unknown type tag {tag}", tag=tag)
        fields = self._fields(body)
        if len(fields) != 1:
            raise DecodeError(f"malformed {entry.name} body")
        return entry.deserializer(fields[0])

    def _fields(self, body: memoryview) -> list:
        fields = []
        pos = 0
        while pos < len(body):
            item, pos = self._take(body, pos)
            fields.append(item)
        return fields

    def _structured(self, tag: int, fields: list) -> Any:
        if tag == r.TAG_ADDRESS:
            if len(fields) != 2 or not all(isinstance(f, str) for f in fields):
                raise DecodeError("malformed AgentAddress")
            return AgentAddress(Endpoint.parse(fields[0]), fields[1])
        if tag == r.TAG_ENVELOPE:
            if len(fields) != 4:
                raise DecodeError("malformed Envelope")
            sender, receiver, payload, meta = fields
            return Envelope(receiver=receiver, payload=payload, sender=sender, meta=meta)
        if len(fields) != 5 + len(_ACL_TEXT_FIELDS):
            raise DecodeError("malformed AclMessage")
        performative, content, sender_id, receiver_id, reply_by = fields[:5]
        extra = dict(zip(_ACL_TEXT_FIELDS, fields[5:]))
        return AclMessage(
            performative=performative,
            content=content,
            sender_id=sender_id,
            receiver_id=receiver_id,
            reply_by=reply_by,
            **extra,
        )
