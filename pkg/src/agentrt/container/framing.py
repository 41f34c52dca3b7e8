"""Length-prefixed framing: ``[len: u32 BE][body: len bytes]``."""

from __future__ import annotations

import asyncio
import struct

from ..errors import DecodeError

FRAME_HEADER = struct.Struct(">I")
DEFAULT_MAX_FRAME = 16 * 1024 * 1024


class FrameTooLarge(DecodeError):
    pass


def frame(body: bytes) -> bytes:
    return FRAME_HEADER.pack(len(body)) + body


async def read_frame(reader: asyncio.StreamReader, max_frame_size: int = DEFAULT_MAX_FRAME) -> bytes | None:
    """Read one frame body; ``None`` on clean EOF between frames.

    Raises :class:`DecodeError` on a partial frame and :class:`FrameTooLarge`
    when the announced length exceeds ``max_frame_size``.
    """
    try:
        header = await reader.readexactly(FRAME_HEADER.size)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise DecodeError(f"connection closed inside a frame header ({len(exc.partial)} bytes)") from None
    (length,) = FRAME_HEADER.unpack(header)
    if length > max_frame_size:
        raise FrameTooLarge(f"frame of {length} bytes exceeds limit of {max_frame_size}")
    try:
        return await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise DecodeError(f"connection closed after {len(exc.partial)} of {length} frame bytes") from None
