import base64
import json
import random
import struct
from dataclasses import dataclass

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentrt import AclMessage, Envelope, Performative, make_address, wrap_acl
from agentrt.codec import BinaryCodec, JsonCodec, TypeRegistry, default_registry, make_codec, payload_digest
from agentrt.codec.registry import RESERVED_MAX
from agentrt.errors import DecodeError, EncodeError, RegistrationError, ValidationError


@dataclass(frozen=True)
class Reading:
    sensor: str
    value: float
    tags: list


class Opaque:
    def __init__(self, n):
        self.n = n

    def __eq__(self, other):
        return isinstance(other, Opaque) and other.n == self.n


def registry():
    reg = default_registry()
    reg.register(200, Reading)
    reg.register(201, Opaque, serializer=lambda o: o.n, deserializer=Opaque, name="Opaque")
    return reg


FLAVOR_NAMES = ["json", "binary"]


# -- reference encoders, written independently of the codec modules --------------------------


def ref_binary(value) -> bytes:
    def header(tag, length):
        return struct.pack(">HI", tag, length)

    if value is None:
        return header(0, 0)
    if isinstance(value, bool):
        return header(1, 1) + bytes([int(value)])
    if isinstance(value, int):
        n = 1
        while not -(1 << (8 * n - 1)) <= value < (1 << (8 * n - 1)):
            n += 1
        return header(2, n) + value.to_bytes(n, "big", signed=True)
    if isinstance(value, float):
        return header(3, 8) + struct.pack(">d", value)
    if isinstance(value, str):
        data = value.encode()
        return header(4, len(data)) + data
    if isinstance(value, bytes):
        return header(5, len(value)) + value
    if isinstance(value, (list, tuple)):
        return header(6 if isinstance(value, list) else 11, len(value)) + b"".join(ref_binary(v) for v in value)
    if isinstance(value, dict):
        pairs = sorted((ref_binary(k), ref_binary(v)) for k, v in value.items())
        return header(7, len(pairs)) + b"".join(k + v for k, v in pairs)
    raise TypeError(value)


def ref_json_doc(value, top=True):
    if value is None or isinstance(value, (bool, int, float, str)):
        tag = {type(None): 0, bool: 1, int: 2, float: 3, str: 4}[type(value)]
        return {"__tag__": tag, "payload": value} if top else value
    if isinstance(value, bytes):
        return {"__tag__": 5, "payload": base64.b64encode(value).decode()}
    if isinstance(value, (list, tuple)):
        return {"__tag__": 6 if isinstance(value, list) else 11, "payload": [ref_json_doc(v, False) for v in value]}
    if isinstance(value, dict):
        pairs = [[ref_json_doc(k, False), ref_json_doc(v, False)] for k, v in value.items()]
        pairs.sort(key=lambda p: json.dumps(p[0], sort_keys=True, separators=(",", ":"), ensure_ascii=False))
        return {"__tag__": 7, "payload": pairs}
    raise TypeError(value)


def ref_json(value) -> bytes:
    return json.dumps(ref_json_doc(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


# -- strategies ------------------------------------------------------------------------------

texts = st.text(max_size=12)
scalars = st.none() | st.booleans() | st.integers(-(2**70), 2**70) | st.floats(allow_nan=False) | texts | st.binary(max_size=12)
hashable_keys = st.none() | st.booleans() | st.integers(-1000, 1000) | texts
plain = st.recursive(
    scalars,
    lambda children: st.lists(children, max_size=4)
    | st.tuples(children, children)
    | st.dictionaries(hashable_keys, children, max_size=4),
    max_leaves=20,
)
aids = st.text(alphabet="abcdefgh0123456789_-", min_size=1, max_size=8)
addresses = st.builds(make_address, st.sampled_from(["local:main", "tcp:127.0.0.1:5555", "topic:bus/x", "ec:sim"]), aids)
readings = st.builds(Reading, texts, st.floats(allow_nan=False), st.lists(st.integers(-5, 5), max_size=3))
opaques = st.builds(Opaque, st.integers(-100, 100))
rich = st.recursive(
    scalars | addresses | readings | opaques,
    lambda children: st.lists(children, max_size=4)
    | st.tuples(children, children)
    | st.dictionaries(hashable_keys, children, max_size=4),
    max_leaves=20,
)
acls = st.builds(
    wrap_acl,
    rich,
    st.sampled_from(list(Performative)),
    st.none() | addresses,
    st.none() | addresses,
    st.none() | texts,
    reply_with=st.none() | texts,
    reply_by=st.none() | st.floats(allow_nan=False, allow_infinity=False),
    ontology=st.none() | texts,
)
envelopes = st.builds(
    Envelope, addresses, rich | acls, st.none() | addresses, st.dictionaries(texts, texts, max_size=3)
)
payloads = rich | acls | envelopes | st.lists(acls, max_size=3)


# -- oracles ---------------------------------------------------------------------------------


def test_json_int_bytes():
    assert JsonCodec().encode(42) == b'{"__tag__":2,"payload":42}'


def test_binary_empty_list_bytes():
    assert BinaryCodec().encode([]) == bytes.fromhex("000600000000")


@pytest.mark.parametrize(
    "value, hexed",
    [
        (None, "000000000000"),
        (True, "00010000000101"),
        (0, "00020000000100"),
        (-1, "000200000001ff"),
        (128, "0002000000020080"),
        ("a", "00040000000161"),
        ((1, 2), "000b000000020002000000010100020000000102"),
    ],
)
def test_binary_known_bytes(value, hexed):
    assert BinaryCodec().encode(value).hex() == hexed


@settings(max_examples=300, deadline=None)
@given(plain)
def test_binary_matches_reference_encoder(value):
    assert BinaryCodec().encode(value) == ref_binary(value)


@settings(max_examples=300, deadline=None)
@given(plain)
def test_json_matches_reference_encoder(value):
    assert JsonCodec().encode(value) == ref_json(value)


# -- roundtrip -------------------------------------------------------------------------------


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
@settings(max_examples=400, deadline=None)
@given(value=payloads)
def test_roundtrip(flavor, value):
    codec = make_codec(flavor, registry())
    decoded = codec.decode(codec.encode(value))
    assert decoded == value
    assert type(decoded) is type(value)


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_roundtrip_preserves_container_types(flavor):
    codec = make_codec(flavor)
    value = {"list": [1, 2], "tuple": (1, 2), "bytes": b"\x00\xff", 1: "int key", None: [()]}
    decoded = codec.decode(codec.encode(value))
    assert decoded == value
    assert type(decoded["tuple"]) is tuple and type(decoded["list"]) is list


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_encoding_is_deterministic_for_maps(flavor):
    codec = make_codec(flavor)
    assert codec.encode({"a": 1, "b": 2}) == codec.encode({"b": 2, "a": 1})


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_digest_is_flavor_independent(flavor):
    reg = registry()
    value = wrap_acl([Reading("s", 1.0, [1]), {"k": b"v"}])
    assert payload_digest(make_codec(flavor, reg), value) == payload_digest(make_codec("binary", reg), value)
    assert len(payload_digest(make_codec(flavor, reg), value)) == 16


# -- errors ----------------------------------------------------------------------------------


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_unregistered_type_fails_encode(flavor):
    with pytest.raises(EncodeError) as info:
        make_codec(flavor).encode(Opaque(1))
    assert "Opaque" in str(info.value)
    with pytest.raises(EncodeError):
        make_codec(flavor).encode({1, 2})


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_unknown_tag_is_reported(flavor):
    reg = registry()
    data = make_codec(flavor, reg).encode(Reading("s", 1.0, []))
    with pytest.raises(DecodeError) as info:
        make_codec(flavor).decode(data)
    assert info.value.tag == 200


def test_json_rejects_untagged_top_level():
    with pytest.raises(DecodeError):
        JsonCodec().decode(b"42")
    with pytest.raises(DecodeError):
        JsonCodec().decode(b'{"payload":1}')
    with pytest.raises(DecodeError):
        JsonCodec().decode(b'{"__tag__":2,"payload":"x"}')


def test_binary_rejects_trailing_and_oversized_counts():
    codec = BinaryCodec()
    with pytest.raises(DecodeError):
        codec.decode(codec.encode(1) + b"\x00")
    with pytest.raises(DecodeError):
        codec.decode(bytes.fromhex("0006ffffffff"))


def _mutations(data: bytes, rng: random.Random):
    yield data[: rng.randrange(len(data))]
    flipped = bytearray(data)
    for _ in range(rng.randint(1, 3)):
        flipped[rng.randrange(len(flipped))] = rng.randrange(256)
    yield bytes(flipped)
    cut = rng.randrange(len(data))
    yield data[:cut] + bytes([rng.randrange(256)]) + data[cut:]


def fuzz_decode(flavor: str, cases: int, seed: int = 7) -> dict:
    """Feed truncated/corrupted encodings to decode; returns outcome counts."""
    rng = random.Random(seed)
    reg = registry()
    codec = make_codec(flavor, reg)
    samples = [
        wrap_acl({"k": [1, 2.5, "x"], "r": Reading("s", 2.0, [1])}, sender=make_address("local:a", "b")),
        Envelope(make_address("tcp:127.0.0.1:1", "a"), [None, True, b"\x01", (1, -300)], meta={"m": "v"}),
        {"nested": [[[], {}], ()], 7: Opaque(3)},
        "plain text",
        2**80,
    ]
    encoded = [codec.encode(s) for s in samples]
    outcomes = {"decode_error": 0, "decoded": 0, "crash": 0}
    done = 0
    while done < cases:
        for data in encoded:
            for mutated in _mutations(data, rng):
                try:
                    codec.decode(mutated)
                    outcomes["decoded"] += 1
                except DecodeError:
                    outcomes["decode_error"] += 1
                except Exception:
                    outcomes["crash"] += 1
                done += 1
    return outcomes


@pytest.mark.parametrize("flavor", FLAVOR_NAMES)
def test_fuzzed_input_only_raises_decode_error(flavor):
    outcomes = fuzz_decode(flavor, 3000)
    assert outcomes["crash"] == 0
    assert outcomes["decode_error"] > 0


def test_truncations_always_fail():
    codec = BinaryCodec(registry())
    data = codec.encode(wrap_acl([Reading("s", 1.0, [2])]))
    for cut in range(len(data)):
        with pytest.raises(DecodeError):
            codec.decode(data[:cut])


# -- registry --------------------------------------------------------------------------------


def test_registry_rules():
    reg = TypeRegistry()
    with pytest.raises(RegistrationError):
        reg.register(RESERVED_MAX, Reading)
    with pytest.raises(RegistrationError):
        reg.register(70000, Reading)
    with pytest.raises(RegistrationError):
        reg.register(300, Opaque)  # not a dataclass, no serializer
    reg.register(300, Reading)
    with pytest.raises(RegistrationError):
        reg.register(300, Opaque, serializer=lambda o: o.n, deserializer=Opaque)
    with pytest.raises(RegistrationError):
        reg.register(301, Reading)
    reg.freeze()
    with pytest.raises(RegistrationError):
        reg.register(302, Opaque, serializer=lambda o: o.n, deserializer=Opaque)
    assert reg.copy().by_tag(300).cls is Reading
    assert not reg.copy().frozen


def test_default_registry_has_clock_protocol():
    tags = [tag for tag, _ in default_registry().manifest()]
    assert tags == [100, 101, 102, 103, 104]


def test_serializable_decorator():
    codec = make_codec("binary")

    @codec.serializable(400)
    @dataclass
    class Point:
        x: int
        y: int

    assert codec.decode(codec.encode(Point(1, 2))) == Point(1, 2)


def test_unknown_flavor():
    with pytest.raises(ValidationError):
        make_codec("xml")
