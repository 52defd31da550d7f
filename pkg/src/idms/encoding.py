"""Canonical byte encodings shared by the ledger, contract state, and wire protocol.

Layout rules (byte-exact; see README "Byte formats"):

* unsigned integers are fixed-width big-endian (``u32``, ``u64``)
* a *field* is ``u32 length || raw bytes``
* a *record* is the concatenation of its fields in declaration order
* a *list* is a record whose fields are the encoded elements (count implied)
* an *optional* is a field whose first byte is ``0x00`` (absent, nothing
  follows) or ``0x01`` followed by the value bytes
* a boolean is a single byte ``0x00`` / ``0x01``

Transaction signatures and block hashes are computed over these encodings,
so any change here is a wire-format break.
"""

from __future__ import annotations

import struct
from typing import Sequence

_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")

U64_MAX = 2**64 - 1


class EncodingError(ValueError):
    """Raised when bytes do not parse as the expected canonical encoding."""


def encode_u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise EncodingError(f"u64 out of range: {value}")
    return _U64.pack(value)


def decode_u64(data: bytes) -> int:
    if len(data) != 8:
        raise EncodingError(f"u64 requires exactly 8 bytes, got {len(data)}")
    return _U64.unpack(data)[0]


def encode_bool(flag: bool) -> bytes:
    return b"\x01" if flag else b"\x00"


def decode_bool(data: bytes) -> bool:
    if data == b"\x01":
        return True
    if data == b"\x00":
        return False
    raise EncodingError(f"not a canonical boolean: {data!r}")


def encode_fields(*fields: bytes) -> bytes:
    parts = []
    for field in fields:
        parts.append(_U32.pack(len(field)))
        parts.append(field)
    return b"".join(parts)


def decode_fields(data: bytes) -> list[bytes]:
    fields: list[bytes] = []
    offset = 0
    total = len(data)
    while offset < total:
        if offset + 4 > total:
            raise EncodingError("truncated field length prefix")
        (length,) = _U32.unpack_from(data, offset)
        offset += 4
        if offset + length > total:
            raise EncodingError("field length exceeds available bytes")
        fields.append(data[offset : offset + length])
        offset += length
    return fields


def decode_exact_fields(data: bytes, count: int) -> list[bytes]:
    fields = decode_fields(data)
    if len(fields) != count:
        raise EncodingError(f"expected {count} fields, found {len(fields)}")
    return fields


def encode_optional(value: bytes | None) -> bytes:
    if value is None:
        return b"\x00"
    return b"\x01" + value


def decode_optional(data: bytes) -> bytes | None:
    if len(data) == 0:
        raise EncodingError("optional field is empty")
    marker, rest = data[:1], data[1:]
    if marker == b"\x00":
        if rest:
            raise EncodingError("absent optional carries trailing bytes")
        return None
    if marker == b"\x01":
        return rest
    raise EncodingError(f"bad optional marker: {marker!r}")


def encode_text(value: str) -> bytes:
    return value.encode("utf-8")


def decode_text(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError("text field is not valid UTF-8") from exc


def encode_text_list(items: Sequence[str]) -> bytes:
    return encode_fields(*(encode_text(item) for item in items))


def decode_text_list(data: bytes) -> list[str]:
    return [decode_text(item) for item in decode_fields(data)]
