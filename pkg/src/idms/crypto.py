"""Cryptographic primitives used by every other module.

Scheme selection (swappable behind this module's surface):

* hashing        — SHA-256 (32-byte digests)
* signatures     — Ed25519 (32-byte keys, 64-byte signatures)
* asymmetric enc — X25519 ephemeral-static ECDH + HKDF-SHA256 + AES-256-GCM
* symmetric enc  — AES-256-GCM (key 32 bytes, random 96-bit nonce prepended)

One logical identity holds two keypairs: a signing pair (the public half is
the identity, and the source of the 20-byte account address) and a separate
encryption pair carried alongside, so no key is used for two purposes.

Asymmetric and symmetric encryption are randomized and authenticated:
encrypting the same plaintext twice yields different ciphertexts, and
decryption with the wrong key or a tampered ciphertext always raises
``DecryptionError`` rather than returning garbage.
"""

from __future__ import annotations

import hashlib
import os
import stat
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)

SEED_LEN = 32
KEY_LEN = 32
SIGNATURE_LEN = 64
DIGEST_LEN = 32
SYMMETRIC_KEY_LEN = 32
ADDRESS_LEN = 20

_GCM_NONCE_LEN = 12
_GCM_TAG_LEN = 16

KEY_FILE_VERSION = 1

RandomSource = Callable[[int], bytes]


class CryptoError(Exception):
    """Base error for this module."""


class KeyFormatError(CryptoError):
    """Key, seed, or signature material has the wrong length or layout."""


class DecryptionError(CryptoError):
    """Ciphertext failed to authenticate under the supplied key."""


def random_bytes(n: int, source: RandomSource | None = None) -> bytes:
    """Return n cryptographically random bytes.

    A deterministic ``source`` may be injected for reproducible tests.
    """
    if n <= 0:
        raise ValueError(f"random_bytes requires n > 0, got {n}")
    out = (source or os.urandom)(n)
    if len(out) != n:
        raise CryptoError(f"random source returned {len(out)} bytes, wanted {n}")
    return out


def hash_bytes(data: bytes) -> bytes:
    """SHA-256 digest of data (32 bytes)."""
    return hashlib.sha256(data).digest()


def address_of(signing_public_key: bytes) -> bytes:
    """Derive the 20-byte account address from a signing public key."""
    if len(signing_public_key) != KEY_LEN:
        raise KeyFormatError(
            f"public key must be {KEY_LEN} bytes, got {len(signing_public_key)}"
        )
    return hash_bytes(signing_public_key)[:ADDRESS_LEN]


@dataclass(frozen=True)
class PublicKeys:
    """The public half of an identity: signing key plus encryption key."""

    signing: bytes
    encryption: bytes

    @property
    def address(self) -> bytes:
        return address_of(self.signing)


@dataclass(frozen=True)
class KeyPair:
    """A full identity: signing and encryption keypairs.

    Private halves are never serialized into ledger state; they leave the
    process only through ``save_private_key_file``.
    """

    signing_private: bytes = field(repr=False)
    signing_public: bytes
    encryption_private: bytes = field(repr=False)
    encryption_public: bytes

    @property
    def public_key(self) -> bytes:
        """The identity key (signing public key)."""
        return self.signing_public

    @property
    def address(self) -> bytes:
        return address_of(self.signing_public)

    @property
    def public(self) -> PublicKeys:
        return PublicKeys(signing=self.signing_public, encryption=self.encryption_public)


def _hkdf(ikm: bytes, info: bytes, length: int = 32) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=length, salt=None, info=info).derive(ikm)


def _keypair_from_private(signing_private: bytes, encryption_private: bytes) -> KeyPair:
    signer = Ed25519PrivateKey.from_private_bytes(signing_private)
    encryptor = X25519PrivateKey.from_private_bytes(encryption_private)
    return KeyPair(
        signing_private=signing_private,
        signing_public=signer.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
        encryption_private=encryption_private,
        encryption_public=encryptor.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw),
    )


def generate_keypair(seed: bytes | None = None) -> KeyPair:
    """Generate a fresh identity, or derive one deterministically from a seed.

    The seed, when given, must be exactly ``SEED_LEN`` bytes; the same seed
    always yields the same KeyPair.
    """
    if seed is not None:
        if len(seed) != SEED_LEN:
            raise KeyFormatError(f"seed must be {SEED_LEN} bytes, got {len(seed)}")
        signing_private = _hkdf(seed, b"idms/signing-key/v1")
        encryption_private = _hkdf(seed, b"idms/encryption-key/v1")
    else:
        signing_private = os.urandom(KEY_LEN)
        encryption_private = os.urandom(KEY_LEN)
    return _keypair_from_private(signing_private, encryption_private)


def sign(private_key: bytes, message: bytes) -> bytes:
    """Sign message with an Ed25519 private key."""
    if len(private_key) != KEY_LEN:
        raise KeyFormatError(f"private key must be {KEY_LEN} bytes, got {len(private_key)}")
    return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)


def verify(public_key: bytes, message: bytes, signature: bytes) -> bool:
    """True iff signature was produced by the matching private key over message."""
    if len(public_key) != KEY_LEN:
        raise KeyFormatError(f"public key must be {KEY_LEN} bytes, got {len(public_key)}")
    if len(signature) != SIGNATURE_LEN:
        raise KeyFormatError(f"signature must be {SIGNATURE_LEN} bytes, got {len(signature)}")
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except InvalidSignature:
        return False
    return True


def sym_encrypt(
    key: bytes,
    plaintext: bytes,
    associated_data: bytes | None = None,
    random_source: RandomSource | None = None,
) -> bytes:
    """AES-256-GCM encrypt; output is nonce || ciphertext+tag."""
    if len(key) != SYMMETRIC_KEY_LEN:
        raise KeyFormatError(f"symmetric key must be {SYMMETRIC_KEY_LEN} bytes, got {len(key)}")
    nonce = random_bytes(_GCM_NONCE_LEN, random_source)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, associated_data)


def sym_decrypt(key: bytes, ciphertext: bytes, associated_data: bytes | None = None) -> bytes:
    if len(key) != SYMMETRIC_KEY_LEN:
        raise KeyFormatError(f"symmetric key must be {SYMMETRIC_KEY_LEN} bytes, got {len(key)}")
    if len(ciphertext) < _GCM_NONCE_LEN + _GCM_TAG_LEN:
        raise DecryptionError("ciphertext too short")
    nonce, body = ciphertext[:_GCM_NONCE_LEN], ciphertext[_GCM_NONCE_LEN:]
    try:
        return AESGCM(key).decrypt(nonce, body, associated_data)
    except InvalidTag as exc:
        raise DecryptionError("symmetric decryption failed") from exc


def asym_encrypt(
    public_key: bytes,
    plaintext: bytes,
    random_source: RandomSource | None = None,
) -> bytes:
    """Encrypt to an X25519 public key; output is ephemeral_pub || nonce || ciphertext+tag.

    A fresh ephemeral key is drawn per call, so two encryptions of the same
    plaintext never match.
    """
    if len(public_key) != KEY_LEN:
        raise KeyFormatError(f"public key must be {KEY_LEN} bytes, got {len(public_key)}")
    ephemeral = X25519PrivateKey.generate()
    ephemeral_public = ephemeral.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(public_key))
    key = _hkdf(shared, b"idms/ecies/v1" + ephemeral_public + public_key)
    return ephemeral_public + sym_encrypt(key, plaintext, random_source=random_source)


def asym_decrypt(private_key: bytes, ciphertext: bytes) -> bytes:
    if len(private_key) != KEY_LEN:
        raise KeyFormatError(f"private key must be {KEY_LEN} bytes, got {len(private_key)}")
    if len(ciphertext) < KEY_LEN + _GCM_NONCE_LEN + _GCM_TAG_LEN:
        raise DecryptionError("ciphertext too short")
    ephemeral_public, body = ciphertext[:KEY_LEN], ciphertext[KEY_LEN:]
    holder = X25519PrivateKey.from_private_bytes(private_key)
    recipient_public = holder.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    shared = holder.exchange(X25519PublicKey.from_public_bytes(ephemeral_public))
    key = _hkdf(shared, b"idms/ecies/v1" + ephemeral_public + recipient_public)
    try:
        return sym_decrypt(key, body)
    except DecryptionError as exc:
        raise DecryptionError("asymmetric decryption failed") from exc


# --- key files -------------------------------------------------------------
#
# Private key file (65 bytes): version 0x01 || signing_private || encryption_private
# Public key file  (65 bytes): version 0x01 || signing_public  || encryption_public
#
# Private key files are created with owner-only permissions (0600).

_PRIVATE_FILE_LEN = 1 + KEY_LEN + KEY_LEN
_PUBLIC_FILE_LEN = 1 + KEY_LEN + KEY_LEN


def save_private_key_file(path: str | Path, keypair: KeyPair) -> None:
    path = Path(path)
    blob = bytes([KEY_FILE_VERSION]) + keypair.signing_private + keypair.encryption_private
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, stat.S_IRUSR | stat.S_IWUSR)
    try:
        os.write(fd, blob)
    finally:
        os.close(fd)
    os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)


def load_private_key_file(path: str | Path) -> KeyPair:
    blob = Path(path).read_bytes()
    if len(blob) != _PRIVATE_FILE_LEN:
        raise KeyFormatError(f"private key file must be {_PRIVATE_FILE_LEN} bytes, got {len(blob)}")
    if blob[0] != KEY_FILE_VERSION:
        raise KeyFormatError(f"unsupported key file version {blob[0]}")
    return _keypair_from_private(blob[1 : 1 + KEY_LEN], blob[1 + KEY_LEN :])


def save_public_key_file(path: str | Path, keys: PublicKeys) -> None:
    blob = bytes([KEY_FILE_VERSION]) + keys.signing + keys.encryption
    Path(path).write_bytes(blob)


def load_public_key_file(path: str | Path) -> PublicKeys:
    blob = Path(path).read_bytes()
    if len(blob) != _PUBLIC_FILE_LEN:
        raise KeyFormatError(f"public key file must be {_PUBLIC_FILE_LEN} bytes, got {len(blob)}")
    if blob[0] != KEY_FILE_VERSION:
        raise KeyFormatError(f"unsupported key file version {blob[0]}")
    return PublicKeys(signing=blob[1 : 1 + KEY_LEN], encryption=blob[1 + KEY_LEN :])
