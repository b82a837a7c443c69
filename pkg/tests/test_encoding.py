import enum
from dataclasses import dataclass, field

import pytest
from hypothesis import given, strategies as st

from paysim.encoding import EncodingError, EnumValue, Record, decode, encode, hash_value

scalars = st.none() | st.booleans() | st.integers(-2**80, 2**80) | st.text(max_size=12) | st.binary(max_size=12)
values = st.recursive(
    scalars,
    lambda inner: st.lists(inner, max_size=4)
    | st.dictionaries(st.text(max_size=6) | st.integers(-50, 50), inner, max_size=4)
    | st.frozensets(st.integers(-50, 50) | st.text(max_size=4), max_size=4),
    max_leaves=12,
)


def _normalize(v):
    if isinstance(v, tuple):
        return [_normalize(x) for x in v]
    if isinstance(v, list):
        return [_normalize(x) for x in v]
    if isinstance(v, dict):
        return {k: _normalize(x) for k, x in v.items()}
    return v


@given(values)
def test_round_trip(value):
    assert decode(encode(value)) == _normalize(value)
    assert encode(decode(encode(value))) == encode(value)


@given(st.dictionaries(st.text(max_size=5), st.integers(), max_size=6))
def test_map_encoding_ignores_insertion_order(d):
    reversed_d = dict(reversed(list(d.items())))
    assert encode(d) == encode(reversed_d)


@given(values, values)
def test_injective(a, b):
    if encode(a) == encode(b):
        assert _normalize(a) == _normalize(b)


def test_types_are_distinguished():
    encodings = {encode(v) for v in (0, False, "", b"", None, [], {}, frozenset())}
    assert len(encodings) == 8


def test_non_canonical_input_rejected():
    good = encode({"a": 1, "b": 2})
    parts = good[5:]
    a_pair, b_pair = parts[: len(parts) // 2], parts[len(parts) // 2:]
    swapped = good[:5] + b_pair + a_pair
    with pytest.raises(EncodingError):
        decode(swapped)
    with pytest.raises(EncodingError):
        decode(good[:-1])
    with pytest.raises(EncodingError):
        decode(b"Q\x00\x00\x00\x00")


class Color(enum.Enum):
    RED = "red"


@dataclass
class Point:
    x: int
    y: int
    note: str = field(default="", metadata={"transient": True})


def test_enums_and_records():
    assert decode(encode(Color.RED)) == EnumValue("Color", "red")
    rec = decode(encode(Point(1, 2, "ignored")))
    assert rec == Record("Point", (("x", 1), ("y", 2)))
    assert rec.as_dict() == {"x": 1, "y": 2}
    assert encode(Point(1, 2, "a")) == encode(Point(1, 2, "b"))


def test_hash_value_is_stable():
    assert hash_value("x", 1) == hash_value("x", 1)
    assert hash_value("x", 1) != hash_value("x", 2)
    assert len(hash_value()) == 32
