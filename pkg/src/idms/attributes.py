"""Attested attribute fields: construction, encryption, hashing, verification.

An attribute field binds a claim about a user to the key of whoever posted
it.  The plaintext descriptor and data never appear on the ledger: both are
encrypted with a per-attribute secret key that is itself encrypted to the
user's encryption key.  The public hash commits to

    data || nonce || descriptor

so a relying party holding the plaintexts (plus the nonce) can check them
against the record, while the nonce keeps small attribute spaces (grades,
booleans, dates) from being brute-forced through the public hash.

The data ciphertext, when stored in-record, encrypts ``data || nonce`` so a
user can recover everything needed for later presentations straight from
the ledger.  Large payloads are instead referenced by the plaintext
``location`` field and kept off-ledger.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass

from . import crypto
from .encoding import (
    EncodingError,
    decode_bool,
    decode_exact_fields,
    decode_optional,
    decode_text,
    encode_bool,
    encode_fields,
    encode_optional,
    encode_text,
)

ATTRIBUTE_NONCE_LEN = 16


@dataclass(frozen=True)
class AttributeField:
    """One attested attribute as stored in a user record."""

    manager_public_key: bytes
    identity: bool
    encrypted_secret_key: bytes | None
    descriptor: bytes  # ciphertext
    data: bytes | None  # ciphertext of plaintext_data || nonce
    location: str | None
    hash: bytes


@dataclass(frozen=True)
class PlaintextAttribute:
    """The user-held plaintext counterpart of an attribute field.

    ``data``/``nonce`` are None when the record held no in-ledger payload
    and the holder has not supplied the off-ledger plaintext.
    """

    descriptor: bytes
    data: bytes | None
    nonce: bytes | None


def attribute_hash(data: bytes, nonce: bytes, descriptor: bytes) -> bytes:
    """The public commitment stored in the field: H(data || nonce || descriptor)."""
    return crypto.hash_bytes(data + nonce + descriptor)


def build_attribute(
    poster_public_key: bytes,
    user_encryption_public_key: bytes,
    descriptor: bytes,
    data: bytes,
    *,
    identity: bool = False,
    include_data: bool = True,
    location: str | None = None,
    nonce: bytes | None = None,
    random_source: crypto.RandomSource | None = None,
) -> tuple[AttributeField, PlaintextAttribute]:
    """Construct an encrypted attribute field plus its plaintext record.

    The plaintext record is what the poster hands to the user out-of-band
    (and what the user later presents to relying parties).
    """
    if nonce is None:
        nonce = crypto.random_bytes(ATTRIBUTE_NONCE_LEN, random_source)
    elif len(nonce) != ATTRIBUTE_NONCE_LEN:
        raise ValueError(f"nonce must be {ATTRIBUTE_NONCE_LEN} bytes, got {len(nonce)}")
    secret = crypto.random_bytes(crypto.SYMMETRIC_KEY_LEN, random_source)
    field = AttributeField(
        manager_public_key=poster_public_key,
        identity=identity,
        encrypted_secret_key=crypto.asym_encrypt(
            user_encryption_public_key, secret, random_source=random_source
        ),
        descriptor=crypto.sym_encrypt(secret, descriptor, random_source=random_source),
        data=(
            crypto.sym_encrypt(secret, data + nonce, random_source=random_source)
            if include_data
            else None
        ),
        location=location,
        hash=attribute_hash(data, nonce, descriptor),
    )
    return field, PlaintextAttribute(descriptor=descriptor, data=data, nonce=nonce)


def decrypt_attribute(field: AttributeField, user_encryption_private_key: bytes) -> PlaintextAttribute:
    """Recover the plaintexts a user can read from their own record.

    Raises ``crypto.DecryptionError`` for a non-holder.  ``data``/``nonce``
    come back None when the record carries no in-ledger payload.
    """
    if field.encrypted_secret_key is None:
        raise crypto.DecryptionError("attribute carries no encrypted secret key")
    secret = crypto.asym_decrypt(user_encryption_private_key, field.encrypted_secret_key)
    descriptor = crypto.sym_decrypt(secret, field.descriptor)
    data = nonce = None
    if field.data is not None:
        payload = crypto.sym_decrypt(secret, field.data)
        if len(payload) < ATTRIBUTE_NONCE_LEN:
            raise crypto.DecryptionError("attribute payload shorter than its nonce")
        data, nonce = payload[:-ATTRIBUTE_NONCE_LEN], payload[-ATTRIBUTE_NONCE_LEN:]
    return PlaintextAttribute(descriptor=descriptor, data=data, nonce=nonce)


def verify_attribute_hash(field: AttributeField, data: bytes, nonce: bytes, descriptor: bytes) -> bool:
    """Constant-time check of plaintexts against the field's public hash."""
    return hmac.compare_digest(attribute_hash(data, nonce, descriptor), field.hash)


def encode_attribute(field: AttributeField) -> bytes:
    return encode_fields(
        field.manager_public_key,
        encode_bool(field.identity),
        encode_optional(field.encrypted_secret_key),
        field.descriptor,
        encode_optional(field.data),
        encode_optional(None if field.location is None else encode_text(field.location)),
        field.hash,
    )


def decode_attribute(data: bytes) -> AttributeField:
    key, identity, secret, descriptor, payload, location, digest = decode_exact_fields(data, 7)
    if len(key) != crypto.KEY_LEN:
        raise EncodingError("manager public key has wrong length")
    if len(digest) != crypto.DIGEST_LEN:
        raise EncodingError("attribute hash has wrong length")
    location_bytes = decode_optional(location)
    return AttributeField(
        manager_public_key=key,
        identity=decode_bool(identity),
        encrypted_secret_key=decode_optional(secret),
        descriptor=descriptor,
        data=decode_optional(payload),
        location=None if location_bytes is None else decode_text(location_bytes),
        hash=digest,
    )


# --- user-side plaintext store ----------------------------------------------
#
# Users keep their own copies of attribute plaintexts in a directory of JSON
# records keyed by (account, index): <account_hex>.<index>.json with base64
# descriptor/data/nonce values.

import base64
import json
from pathlib import Path


def _record_path(store: Path, account: bytes, index: int) -> Path:
    return store / f"{account.hex()}.{index}.json"


def save_plaintext_record(
    store: str | Path, account: bytes, index: int, record: PlaintextAttribute
) -> Path:
    if record.data is None or record.nonce is None:
        raise ValueError("cannot store a plaintext record without data and nonce")
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    path = _record_path(store, account, index)
    path.write_text(
        json.dumps(
            {
                "descriptor": base64.b64encode(record.descriptor).decode("ascii"),
                "data": base64.b64encode(record.data).decode("ascii"),
                "nonce": base64.b64encode(record.nonce).decode("ascii"),
            },
            indent=2,
        )
    )
    return path


def load_plaintext_record(store: str | Path, account: bytes, index: int) -> PlaintextAttribute:
    path = _record_path(Path(store), account, index)
    raw = json.loads(path.read_text())
    return PlaintextAttribute(
        descriptor=base64.b64decode(raw["descriptor"]),
        data=base64.b64decode(raw["data"]),
        nonce=base64.b64decode(raw["nonce"]),
    )
