import pytest

from agentrt import AclMessage, AgentAddress, Endpoint, Envelope, Performative, make_address, unwrap, wrap_acl
from agentrt.errors import AddressParseError, ValidationError


@pytest.mark.parametrize(
    "text, scheme, location",
    [
        ("tcp:127.0.0.1:5555", "tcp", "127.0.0.1:5555"),
        ("tcp:localhost:0", "tcp", "localhost:0"),
        ("topic:bus", "topic", "bus"),
        ("topic:bus/client-1", "topic", "bus/client-1"),
        ("local:main", "local", "main"),
        ("ec:channel", "ec", "channel"),
    ],
)
def test_endpoint_parse(text, scheme, location):
    endpoint = Endpoint.parse(text)
    assert (endpoint.scheme, endpoint.location) == (scheme, location)
    assert str(endpoint) == text
    assert Endpoint.parse(str(endpoint)) == endpoint


def test_tcp_endpoint_host_port():
    endpoint = Endpoint.parse("tcp:127.0.0.1:5555")
    assert endpoint.host == "127.0.0.1"
    assert endpoint.port == 5555
    assert Endpoint.tcp("127.0.0.1", 5555) == endpoint


@pytest.mark.parametrize(
    "text",
    ["", "udp:host:1", "tcp:host", "tcp:host:port", "tcp:host:70000", "local:", "local:a b", "nocolon", "tcp::5"],
)
def test_endpoint_rejects_malformed(text):
    with pytest.raises(AddressParseError):
        Endpoint.parse(text)


def test_address_equality_and_hash():
    a = make_address("local:main", "agent0")
    b = AgentAddress(Endpoint.parse("local:main"), "agent0")
    assert a == b and hash(a) == hash(b)
    assert str(a) == "local:main/agent0"
    assert a != make_address("local:other", "agent0")


@pytest.mark.parametrize("aid", ["", "has space", "tab\there"])
def test_address_rejects_bad_aid(aid):
    with pytest.raises((AddressParseError, ValidationError)):
        make_address("local:main", aid)


def test_envelope_meta_is_text_only():
    receiver = make_address("local:main", "r")
    env = Envelope(receiver, "hi", meta={"k": "v"})
    assert env.with_meta(x="1").meta == {"k": "v", "x": "1"}
    assert env.with_meta(x="1").without_meta("k").meta == {"x": "1"}
    with pytest.raises(ValidationError):
        Envelope(receiver, "hi", meta={"k": 1})
    with pytest.raises(ValidationError):
        Envelope("local:main/r", "hi")


def test_wrap_acl_and_unwrap():
    sender = make_address("local:main", "s")
    receiver = make_address("local:main", "r")
    message = wrap_acl({"x": 1}, Performative.REQUEST, sender, receiver, conversation_id="c1", reply_with="q1")
    assert message.performative is Performative.REQUEST
    assert unwrap(message) == {"x": 1}
    assert unwrap("plain") == "plain"
    reply = message.create_reply("ok", Performative.AGREE)
    assert (reply.sender_id, reply.receiver_id) == (receiver, sender)
    assert reply.conversation_id == "c1" and reply.in_reply_to == "q1"


def test_acl_in_acl_is_refused():
    inner = wrap_acl("x")
    with pytest.raises(ValidationError):
        wrap_acl(inner)


def test_acl_validation():
    with pytest.raises(ValidationError):
        AclMessage("shout")
    with pytest.raises(ValidationError):
        AclMessage(Performative.INFORM, sender_id="local:main/a")
    with pytest.raises(ValidationError):
        AclMessage(Performative.INFORM, conversation_id=3)
    assert AclMessage("inform", reply_by=3).reply_by == 3.0
