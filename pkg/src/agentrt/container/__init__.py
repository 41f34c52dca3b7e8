"""Containers: agent registry, mailbox dispatch and the pluggable transports."""

from .base import Container, ContainerState, TransportCounters, is_clock_message
from .ec import Rejection, handle_ec_request, serve_ec_stream, start_ec_server
from .framing import DEFAULT_MAX_FRAME, frame, read_frame
from .topic import Broker


def create_container(endpoint, codec=None, clock=None, runtime=None, **options) -> Container:
    return Container(endpoint, codec=codec, clock=clock, runtime=runtime, **options)


__all__ = [
    "Broker",
    "Container",
    "ContainerState",
    "DEFAULT_MAX_FRAME",
    "Rejection",
    "TransportCounters",
    "create_container",
    "frame",
    "handle_ec_request",
    "is_clock_message",
    "read_frame",
    "serve_ec_stream",
    "start_ec_server",
]
