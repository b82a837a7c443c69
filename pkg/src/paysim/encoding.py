"""Canonical byte encoding.

Every value is written as ``tag (1 byte) | length (4 bytes, big-endian) | payload``.
Containers concatenate the encodings of their members; maps and sets are
ordered by the encoded bytes of their keys so the output never depends on
insertion order. Dataclasses are written as records: the class name followed
by ``name, value`` pairs in declared field order.

The same bytes feed hashing, signing, and the state digest, so the encoding
must be injective. :func:`decode` is strict and rejects any input that does
not re-encode to itself.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import struct
from typing import Any

_HEADER = struct.Struct(">cI")

TAG_NONE = b"N"
TAG_BOOL = b"B"
TAG_INT = b"I"
TAG_STR = b"S"
TAG_BYTES = b"Y"
TAG_LIST = b"L"
TAG_MAP = b"M"
TAG_SET = b"Z"
TAG_RECORD = b"R"
TAG_ENUM = b"E"


class EncodingError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class Record:
    """A decoded dataclass: its type name and field values in order."""

    name: str
    fields: tuple[tuple[str, Any], ...]

    def as_dict(self) -> dict[str, Any]:
        return dict(self.fields)


@dataclasses.dataclass(frozen=True)
class EnumValue:
    """A decoded enum member."""

    type_name: str
    value: Any


def _frame(tag: bytes, payload: bytes) -> bytes:
    return _HEADER.pack(tag, len(payload)) + payload


def _int_payload(value: int) -> bytes:
    sign = b"\x01" if value < 0 else b"\x00"
    mag = abs(value)
    return sign + mag.to_bytes((mag.bit_length() + 7) // 8, "big")


def encode(value: Any) -> bytes:
    if value is None:
        return _frame(TAG_NONE, b"")
    if isinstance(value, bool):
        return _frame(TAG_BOOL, b"\x01" if value else b"\x00")
    if isinstance(value, enum.Enum):
        return _frame(TAG_ENUM, encode(type(value).__name__) + encode(value.value))
    if isinstance(value, int):
        return _frame(TAG_INT, _int_payload(value))
    if isinstance(value, str):
        return _frame(TAG_STR, value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray, memoryview)):
        return _frame(TAG_BYTES, bytes(value))
    if isinstance(value, (list, tuple)):
        return _frame(TAG_LIST, b"".join(encode(v) for v in value))
    if isinstance(value, dict):
        items = sorted((encode(k), encode(v)) for k, v in value.items())
        return _frame(TAG_MAP, b"".join(k + v for k, v in items))
    if isinstance(value, (set, frozenset)):
        return _frame(TAG_SET, b"".join(sorted(encode(v) for v in value)))
    if isinstance(value, EnumValue):
        return _frame(TAG_ENUM, encode(value.type_name) + encode(value.value))
    if isinstance(value, Record):
        parts = [encode(value.name)]
        for name, field_value in value.fields:
            parts.append(encode(name))
            parts.append(encode(field_value))
        return _frame(TAG_RECORD, b"".join(parts))
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        parts = [encode(type(value).__name__)]
        for f in dataclasses.fields(value):
            if not f.metadata.get("transient", False):
                parts.append(encode(f.name))
                parts.append(encode(getattr(value, f.name)))
        return _frame(TAG_RECORD, b"".join(parts))
    raise EncodingError(f"cannot encode {type(value).__name__}")


def _split(payload: bytes) -> list[bytes]:
    out = []
    pos = 0
    while pos < len(payload):
        if len(payload) - pos < _HEADER.size:
            raise EncodingError("truncated header")
        _, length = _HEADER.unpack_from(payload, pos)
        end = pos + _HEADER.size + length
        if end > len(payload):
            raise EncodingError("truncated payload")
        out.append(payload[pos:end])
        pos = end
    return out


def _hashable(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_hashable(v) for v in value)
    if isinstance(value, dict):
        raise EncodingError("map used as key")
    return value


def _decode_one(data: bytes) -> Any:
    if len(data) < _HEADER.size:
        raise EncodingError("truncated header")
    tag, length = _HEADER.unpack_from(data, 0)
    payload = data[_HEADER.size:]
    if len(payload) != length:
        raise EncodingError("length mismatch")
    if tag == TAG_NONE:
        if payload:
            raise EncodingError("non-empty None")
        return None
    if tag == TAG_BOOL:
        if payload not in (b"\x00", b"\x01"):
            raise EncodingError("bad bool")
        return payload == b"\x01"
    if tag == TAG_INT:
        if not payload or payload[0] not in (0, 1):
            raise EncodingError("bad int sign")
        mag = int.from_bytes(payload[1:], "big")
        return -mag if payload[0] else mag
    if tag == TAG_STR:
        try:
            return payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EncodingError("bad utf-8") from exc
    if tag == TAG_BYTES:
        return payload
    if tag == TAG_LIST:
        return [_decode_one(p) for p in _split(payload)]
    if tag == TAG_SET:
        return frozenset(_hashable(_decode_one(p)) for p in _split(payload))
    if tag == TAG_MAP:
        parts = _split(payload)
        if len(parts) % 2:
            raise EncodingError("odd map")
        return {_hashable(_decode_one(k)): _decode_one(v) for k, v in zip(parts[::2], parts[1::2])}
    if tag == TAG_ENUM:
        parts = _split(payload)
        if len(parts) != 2:
            raise EncodingError("bad enum")
        type_name = _decode_one(parts[0])
        if not isinstance(type_name, str):
            raise EncodingError("bad enum name")
        return EnumValue(type_name, _decode_one(parts[1]))
    if tag == TAG_RECORD:
        parts = _split(payload)
        if not parts or len(parts) % 2 != 1:
            raise EncodingError("bad record")
        name = _decode_one(parts[0])
        if not isinstance(name, str):
            raise EncodingError("bad record name")
        fields = []
        for k, v in zip(parts[1::2], parts[2::2]):
            key = _decode_one(k)
            if not isinstance(key, str):
                raise EncodingError("bad field name")
            fields.append((key, _decode_one(v)))
        return Record(name, tuple(fields))
    raise EncodingError(f"unknown tag {tag!r}")


def decode(data: bytes) -> Any:
    """Decode bytes produced by :func:`encode`.

    Enums decode to :class:`EnumValue` and dataclasses to :class:`Record`.
    Non-canonical input raises :class:`EncodingError`.
    """
    value = _decode_one(bytes(data))
    if encode(value) != bytes(data):
        raise EncodingError("non-canonical encoding")
    return value


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def hash_value(*parts: Any) -> bytes:
    """SHA-256 over the canonical encoding of ``parts``."""
    return sha256(encode(list(parts)))
