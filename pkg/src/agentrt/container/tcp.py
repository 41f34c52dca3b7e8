from __future__ import annotations

import asyncio
import contextlib
import logging
from typing import TYPE_CHECKING

from ..errors import DecodeError
from ..messaging import Endpoint, Envelope
from .framing import DEFAULT_MAX_FRAME, FrameTooLarge, frame, read_frame

if TYPE_CHECKING:
    from .base import Container

logger = logging.getLogger(__name__)


class _PooledConnection:
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self.watcher: asyncio.Task | None = None
        self.idle_timer: asyncio.TimerHandle | None = None

    @property
    def closed(self) -> bool:
        return self.writer.is_closing()

    def close(self) -> None:
        if self.idle_timer is not None:
            self.idle_timer.cancel()
        self.writer.close()
        if self.watcher is not None:
            self.watcher.cancel()


class TcpTransport:
    """Listens on the container's host:port and sends over pooled connections.

    One outbound connection per remote endpoint, opened lazily and kept until
    shutdown (or ``idle_timeout`` seconds without traffic, when set). Inbound
    connections are only ever read from; replies travel over the replying
    side's own pooled connection.
    """

    kind = "tcp"

    def __init__(
        self,
        container: Container,
        max_frame_size: int = DEFAULT_MAX_FRAME,
        connect_timeout: float = 1.0,
        idle_timeout: float | None = None,
    ):
        self.container = container
        self.max_frame_size = max_frame_size
        self.connect_timeout = connect_timeout
        self.idle_timeout = idle_timeout
        self.connections_opened = 0
        self.connections_accepted = 0
        self._server: asyncio.AbstractServer | None = None
        self._pool: dict[Endpoint, _PooledConnection] = {}
        self._pool_locks: dict[Endpoint, asyncio.Lock] = {}
        self._inbound: set[asyncio.StreamWriter] = set()
        self._inbound_tasks: set[asyncio.Task] = set()

    @property
    def pool_size(self) -> int:
        return sum(1 for conn in self._pool.values() if not conn.closed)

    async def start(self) -> Endpoint:
        endpoint = self.container.address
        self._server = await asyncio.start_server(self._serve, endpoint.host, endpoint.port)
        port = self._server.sockets[0].getsockname()[1]
        return Endpoint.tcp(endpoint.host, port)

    async def stop(self) -> None:
        if self._server is not None:
            self._server.close()
        for conn in list(self._pool.values()):
            conn.close()
        self._pool.clear()
        for writer in list(self._inbound):
            writer.close()
        for task in list(self._inbound_tasks):
            task.cancel()
        if self._inbound_tasks:
            await asyncio.gather(*self._inbound_tasks, return_exceptions=True)
        if self._server is not None:
            await self._server.wait_closed()
            self._server = None

    async def send(self, envelope: Envelope) -> bool:
        data = frame(self.container.codec.encode(envelope))
        endpoint = envelope.receiver.endpoint
        try:
            conn = await self._connection(endpoint)
            conn.writer.write(data)
            await conn.writer.drain()
        except (OSError, asyncio.TimeoutError) as exc:
            logger.warning("%s: send to %s failed: %s", self.container.address, endpoint, exc)
            self._drop(endpoint)
            return False
        self._touch(endpoint, conn)
        self.container.counters_for(self.kind).sent(len(data))
        return True

    async def _connection(self, endpoint: Endpoint) -> _PooledConnection:
        conn = self._pool.get(endpoint)
        if conn is not None and not conn.closed:
            return conn
        lock = self._pool_locks.setdefault(endpoint, asyncio.Lock())
        async with lock:
            conn = self._pool.get(endpoint)
            if conn is not None and not conn.closed:
                return conn
            reader, writer = await asyncio.wait_for(
                asyncio.open_connection(endpoint.host, endpoint.port), self.connect_timeout
            )
            conn = _PooledConnection(reader, writer)
            conn.watcher = asyncio.get_running_loop().create_task(self._watch(endpoint, conn))
            self._pool[endpoint] = conn
            self.connections_opened += 1
            return conn

    async def _watch(self, endpoint: Endpoint, conn: _PooledConnection) -> None:
        # peers never write on our outbound connections; any read result means it closed
        with contextlib.suppress(Exception):
            await conn.reader.read(1)
        if self._pool.get(endpoint) is conn:
            del self._pool[endpoint]
        conn.writer.close()

    def _touch(self, endpoint: Endpoint, conn: _PooledConnection) -> None:
        if self.idle_timeout is None:
            return
        if conn.idle_timer is not None:
            conn.idle_timer.cancel()
        conn.idle_timer = asyncio.get_running_loop().call_later(self.idle_timeout, self._idle_close, endpoint, conn)

    def _idle_close(self, endpoint: Endpoint, conn: _PooledConnection) -> None:
        if self._pool.get(endpoint) is conn:
            del self._pool[endpoint]
        conn.close()

    def _drop(self, endpoint: Endpoint) -> None:
        conn = self._pool.pop(endpoint, None)
        if conn is not None:
            conn.close()

    async def _serve(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        self.connections_accepted += 1
        self._inbound.add(writer)
        task = asyncio.current_task()
        self._inbound_tasks.add(task)
        peer = writer.get_extra_info("peername")
        try:
            while True:
                try:
                    body = await read_frame(reader, self.max_frame_size)
                except FrameTooLarge as exc:
                    logger.error("%s: closing connection from %s: %s", self.container.address, peer, exc)
                    break
                except DecodeError as exc:
                    logger.error("%s: decode error on connection from %s: %s", self.container.address, peer, exc)
                    break
                if body is None:
                    break
                self.container.counters_for(self.kind).received(len(body) + 4)
                try:
                    envelope = self.container.codec.decode(body)
                except DecodeError as exc:
                    logger.error("%s: undecodable frame from %s: %s", self.container.address, peer, exc)
                    continue
                if not isinstance(envelope, Envelope):
                    logger.error("%s: frame from %s is not an envelope", self.container.address, peer)
                    continue
                self.container._route_inbound(envelope, self.kind)
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            self._inbound.discard(writer)
            self._inbound_tasks.discard(task)
            writer.close()
