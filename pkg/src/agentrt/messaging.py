"""Addresses, the transport envelope and the FIPA-ACL message wrapper.

Endpoint text grammar::

    tcp:<host>:<port> | topic:<broker-id> | local:<container-id> | ec:<channel-id>

All types here are immutable once built and can be handed between tasks,
threads and processes freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .errors import AddressParseError, ValidationError

SCHEMES = ("tcp", "topic", "local", "ec")


def _has_whitespace(text: str) -> bool:
    return any(ch.isspace() for ch in text)


@dataclass(frozen=True, order=True)
class Endpoint:
    scheme: str
    location: str

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise AddressParseError(f"unknown endpoint scheme {self.scheme!r}")
        if not self.location or _has_whitespace(self.location):
            raise AddressParseError(f"bad endpoint location {self.location!r}")
        if self.scheme == "tcp":
            host, port = _split_host_port(self.location)
            if not host:
                raise AddressParseError(f"tcp endpoint without host: {self.location!r}")

    @classmethod
    def parse(cls, text: str | Endpoint) -> Endpoint:
        if isinstance(text, Endpoint):
            return text
        if not isinstance(text, str):
            raise AddressParseError(f"endpoint must be text, got {type(text).__name__}")
        scheme, sep, location = text.partition(":")
        if not sep:
            raise AddressParseError(f"endpoint {text!r} has no scheme")
        return cls(scheme, location)

    @classmethod
    def tcp(cls, host: str, port: int) -> Endpoint:
        return cls("tcp", f"{host}:{port}")

    @property
    def host(self) -> str:
        return _split_host_port(self.location)[0]

    @property
    def port(self) -> int:
        return _split_host_port(self.location)[1]

    def __str__(self) -> str:
        return f"{self.scheme}:{self.location}"


def _split_host_port(location: str) -> tuple[str, int]:
    host, sep, port_text = location.rpartition(":")
    if not sep or not port_text.isdigit():
        raise AddressParseError(f"tcp location must be host:port, got {location!r}")
    port = int(port_text)
    if port > 65535:
        raise AddressParseError(f"tcp port out of range: {port}")
    return host, port


@dataclass(frozen=True, order=True)
class AgentAddress:
    """Locates an agent: the endpoint of its container plus its aid."""

    endpoint: Endpoint
    aid: str

    def __post_init__(self):
        if not isinstance(self.endpoint, Endpoint):
            object.__setattr__(self, "endpoint", Endpoint.parse(self.endpoint))
        if not isinstance(self.aid, str) or not self.aid:
            raise ValidationError("aid must be non-empty text")
        if _has_whitespace(self.aid):
            raise ValidationError(f"aid must not contain whitespace: {self.aid!r}")

    def __str__(self) -> str:
        return f"{self.endpoint}/{self.aid}"


def make_address(endpoint: str | Endpoint, aid: str) -> AgentAddress:
    if not aid:
        raise ValidationError("aid must be non-empty text")
    return AgentAddress(Endpoint.parse(endpoint), aid)


@dataclass(frozen=True)
class Envelope:
    receiver: AgentAddress
    payload: Any
    sender: AgentAddress | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.receiver, AgentAddress):
            raise ValidationError("envelope receiver must be an AgentAddress")
        if self.sender is not None and not isinstance(self.sender, AgentAddress):
            raise ValidationError("envelope sender must be an AgentAddress or None")
        meta = dict(self.meta)
        for key, value in meta.items():
            if not isinstance(key, str) or not isinstance(value, str):
                raise ValidationError("envelope meta must map text to text")
        object.__setattr__(self, "meta", meta)

    def with_meta(self, **extra: str) -> Envelope:
        return replace(self, meta={**self.meta, **extra})

    def without_meta(self, *keys: str) -> Envelope:
        return replace(self, meta={k: v for k, v in self.meta.items() if k not in keys})


class Performative(str, enum.Enum):
    INFORM = "inform"
    REQUEST = "request"
    AGREE = "agree"
    REFUSE = "refuse"
    PROPOSE = "propose"
    CALL_FOR_PROPOSAL = "call_for_proposal"
    ACCEPT_PROPOSAL = "accept_proposal"
    REJECT_PROPOSAL = "reject_proposal"
    FAILURE = "failure"
    NOT_UNDERSTOOD = "not_understood"
    QUERY_IF = "query_if"
    SUBSCRIBE = "subscribe"
    CANCEL = "cancel"


@dataclass(frozen=True)
class AclMessage:
    performative: Performative
    content: Any = None
    sender_id: AgentAddress | None = None
    receiver_id: AgentAddress | None = None
    conversation_id: str | None = None
    reply_with: str | None = None
    in_reply_to: str | None = None
    reply_by: float | None = None
    language: str | None = None
    encoding: str | None = None
    ontology: str | None = None
    protocol: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "performative", Performative(self.performative))
        except ValueError:
            raise ValidationError(f"unknown performative {self.performative!r}") from None
        for name in ("sender_id", "receiver_id"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, AgentAddress):
                raise ValidationError(f"{name} must be an AgentAddress or None")
        for name in ("conversation_id", "reply_with", "in_reply_to", "language", "encoding", "ontology", "protocol"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise ValidationError(f"{name} must be text or None")
        if self.reply_by is not None:
            object.__setattr__(self, "reply_by", float(self.reply_by))

    def create_reply(self, content: Any, performative: Performative = Performative.INFORM) -> AclMessage:
        return wrap_acl(
            content,
            performative,
            sender=self.receiver_id,
            receiver=self.sender_id,
            conversation_id=self.conversation_id,
            in_reply_to=self.reply_with,
            protocol=self.protocol,
        )


def wrap_acl(
    content: Any,
    performative: Performative | str = Performative.INFORM,
    sender: AgentAddress | None = None,
    receiver: AgentAddress | None = None,
    conversation_id: str | None = None,
    **fields: Any,
) -> AclMessage:
    """Wrap any payload in an ACL message. Wrapping an ACL message again is refused."""
    if isinstance(content, AclMessage):
        raise ValidationError("content is already an AclMessage")
    return AclMessage(
        performative=performative,
        content=content,
        sender_id=sender,
        receiver_id=receiver,
        conversation_id=conversation_id,
        **fields,
    )


def unwrap(message: Any) -> Any:
    if isinstance(message, AclMessage):
        return message.content
    return message
