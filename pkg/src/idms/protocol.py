"""Direct user-to-relying-party protocol: authentication and attribute transfer.

Both flows run over a single ordered byte stream and never contact the
ledger or any third party; the relying party answers everything from its
local replica of the contract state.

Channel construction (tunnel within a tunnel):

* outer tunnel — the connecting user generates a symmetric key and
  transports it encrypted to the relying party's public encryption key
  (distributed out of band, known-hosts style).  Only the true key holder
  can read anything after the first frame, which authenticates the RP end.
* challenge-response — the user claims an account; the RP encrypts a fresh
  32-byte challenge to the encryption key registered on that account and
  requires the decrypted value back.  Answering proves account ownership.
* inner tunnel — the RP (never the user: a relay between two RPs must not
  be able to reuse the user's answer) generates the inner key and
  transports it encrypted to the user's registered key.  Attribute traffic
  is encrypted under the inner key and nested inside the outer tunnel, so
  a relay that forwarded the challenge still cannot speak on it.

Wire format, both tunnels (byte-exact, see README):

    u32 frame length (big-endian, covers type + sequence + body)
    u8  message type
    u64 sequence number (big-endian, per direction, starts at 0)
    ... body

Message types: 0x01 outer-key-transport, 0x02 account-claim, 0x03
encrypted-challenge, 0x04 challenge-response, 0x05 inner-key-transport,
0x06 attribute-package, 0x07 verification-result, 0x08 error/close.
The sequence number and type are bound into the AEAD associated data of
every encrypted frame, so replayed or reordered frames fail to decrypt;
0x01 bodies are asymmetric ciphertext and 0x08 bodies are plaintext codes.
"""

from __future__ import annotations

import hmac
import struct
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from . import contract, crypto
from .attributes import attribute_hash, AttributeField
from .contract import ContractState, ContractViewError
from .encoding import (
    EncodingError,
    decode_bool,
    decode_exact_fields,
    decode_text,
    decode_u64,
    encode_bool,
    encode_fields,
    encode_text,
    encode_u64,
)

MSG_OUTER_KEY = 0x01
MSG_ACCOUNT_CLAIM = 0x02
MSG_CHALLENGE = 0x03
MSG_CHALLENGE_RESPONSE = 0x04
MSG_INNER_KEY = 0x05
MSG_ATTRIBUTE_PACKAGE = 0x06
MSG_VERIFICATION_RESULT = 0x07
MSG_ERROR = 0x08

CHALLENGE_LEN = 32
CHALLENGE_LIFETIME_SECONDS = 60.0

MAX_FRAME = 1 << 24  # refuse absurd frame lengths before allocating

_LEN = struct.Struct(">I")
_HEADER = struct.Struct(">BQ")

# Encryption level of a frame body.
_RAW = 0
_OUTER = 1
_INNER = 2


class ProtocolError(Exception):
    """Protocol failure; ``code`` is stable, ``from_peer`` marks relayed errors."""

    def __init__(self, code: str, detail: str = "", from_peer: bool = False):
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.from_peer = from_peer


class SessionClosed(ProtocolError):
    def __init__(self, detail: str = ""):
        super().__init__("session-closed", detail)


class _TransportEOF(Exception):
    pass


class SocketTransport:
    """Ordered reliable byte stream over a connected socket."""

    def __init__(self, sock):
        self._sock = sock

    def send(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise _TransportEOF(str(exc)) from exc

    def recv_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining > 0:
            try:
                chunk = self._sock.recv(remaining)
            except OSError as exc:
                raise _TransportEOF(str(exc)) from exc
            if not chunk:
                raise _TransportEOF("end of stream")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class SessionState(Enum):
    CONNECTED = "connected"
    CHALLENGED = "challenged"
    AUTHENTICATED = "authenticated"
    CLOSED = "closed"


@dataclass
class Challenge:
    value: bytes
    issued_at: float


@dataclass
class SecureSession:
    """One side's view of a layered channel; confined to a single connection."""

    transport: SocketTransport
    role: str  # "user" | "rp"
    outer_key: bytes
    inner_key: bytes | None = None
    peer_account: bytes | None = None
    state: SessionState = SessionState.CONNECTED
    send_seq: int = 0
    recv_seq: int = 0
    clock: Callable[[], float] = time.monotonic
    random_source: crypto.RandomSource | None = None


def _aad(msg_type: int, seq: int) -> bytes:
    return bytes([msg_type]) + encode_u64(seq)


def _send(session: SecureSession, msg_type: int, plaintext: bytes, level: int) -> None:
    if session.state is SessionState.CLOSED:
        raise SessionClosed("cannot send on closed session")
    seq = session.send_seq
    aad = _aad(msg_type, seq)
    body = plaintext
    if level == _INNER:
        if session.inner_key is None:
            raise ProtocolError("protocol-error", "inner tunnel not established")
        body = crypto.sym_encrypt(session.inner_key, body, aad, session.random_source)
    if level in (_OUTER, _INNER):
        body = crypto.sym_encrypt(session.outer_key, body, aad, session.random_source)
    frame = _LEN.pack(_HEADER.size + len(body)) + _HEADER.pack(msg_type, seq) + body
    try:
        session.transport.send(frame)
    except _TransportEOF as exc:
        session.state = SessionState.CLOSED
        raise SessionClosed(str(exc)) from exc
    session.send_seq += 1


def _abort(session: SecureSession, code: str, detail: str = "") -> None:
    if session.state is not SessionState.CLOSED:
        try:
            _send(session, MSG_ERROR, code.encode("utf-8"), _RAW)
        except ProtocolError:
            pass
        session.state = SessionState.CLOSED
        session.transport.close()
    raise ProtocolError(code, detail)


def _recv(session: SecureSession, expected: dict[int, int]) -> tuple[int, bytes]:
    if session.state is SessionState.CLOSED:
        raise SessionClosed("cannot receive on closed session")
    try:
        (length,) = _LEN.unpack(session.transport.recv_exact(_LEN.size))
        if not _HEADER.size <= length <= MAX_FRAME:
            _abort(session, "protocol-error", f"bad frame length {length}")
        payload = session.transport.recv_exact(length)
    except _TransportEOF as exc:
        session.state = SessionState.CLOSED
        raise SessionClosed(str(exc)) from exc
    msg_type, seq = _HEADER.unpack(payload[: _HEADER.size])
    body = payload[_HEADER.size :]
    if seq != session.recv_seq:
        _abort(session, "protocol-error", f"sequence {seq}, expected {session.recv_seq}")
    session.recv_seq += 1
    if msg_type == MSG_ERROR:
        session.state = SessionState.CLOSED
        session.transport.close()
        code = body.decode("utf-8", errors="replace") or "closed"
        raise ProtocolError(code, from_peer=True)
    if msg_type not in expected:
        _abort(session, "protocol-error", f"unexpected message type 0x{msg_type:02x}")
    level = expected[msg_type]
    aad = _aad(msg_type, seq)
    try:
        if level in (_OUTER, _INNER):
            body = crypto.sym_decrypt(session.outer_key, body, aad)
        if level == _INNER:
            if session.inner_key is None:
                _abort(session, "protocol-error", "inner tunnel not established")
            body = crypto.sym_decrypt(session.inner_key, body, aad)
    except crypto.DecryptionError:
        _abort(session, "protocol-error", "frame failed to decrypt")
    return msg_type, body


def close_session(session: SecureSession) -> None:
    session.state = SessionState.CLOSED
    session.transport.close()


# --- outer channel ------------------------------------------------------------


def open_outer_channel(
    transport: SocketTransport,
    rp_encryption_public_key: bytes,
    *,
    clock: Callable[[], float] = time.monotonic,
    random_source: crypto.RandomSource | None = None,
) -> SecureSession:
    """User side: generate the outer key and transport it to the RP's key."""
    outer_key = crypto.random_bytes(crypto.SYMMETRIC_KEY_LEN, random_source)
    session = SecureSession(
        transport=transport, role="user", outer_key=outer_key, clock=clock,
        random_source=random_source,
    )
    _send(session, MSG_OUTER_KEY, crypto.asym_encrypt(rp_encryption_public_key, outer_key), _RAW)
    return session


def accept_outer_channel(
    transport: SocketTransport,
    rp_keypair: crypto.KeyPair,
    *,
    clock: Callable[[], float] = time.monotonic,
    random_source: crypto.RandomSource | None = None,
) -> SecureSession:
    """RP side: recover the outer key; fails unless we hold the advertised key."""
    session = SecureSession(
        transport=transport, role="rp", outer_key=b"\x00" * crypto.SYMMETRIC_KEY_LEN,
        clock=clock, random_source=random_source,
    )
    _, body = _recv(session, {MSG_OUTER_KEY: _RAW})
    try:
        outer_key = crypto.asym_decrypt(rp_keypair.encryption_private, body)
    except crypto.DecryptionError:
        _abort(session, "handshake-failed", "outer key not addressed to this relying party")
    if len(outer_key) != crypto.SYMMETRIC_KEY_LEN:
        _abort(session, "handshake-failed", "outer key has wrong length")
    session.outer_key = outer_key
    return session


# --- authentication -------------------------------------------------------------


def user_authenticate(session: SecureSession, account: bytes, user_keypair: crypto.KeyPair) -> None:
    """Prove ownership of the claimed account and join the inner tunnel."""
    if session.state is not SessionState.CONNECTED:
        raise ProtocolError("protocol-error", f"cannot authenticate in state {session.state.value}")
    _send(session, MSG_ACCOUNT_CLAIM, account, _OUTER)
    _, encrypted_challenge = _recv(session, {MSG_CHALLENGE: _OUTER})
    session.state = SessionState.CHALLENGED
    try:
        challenge_value = crypto.asym_decrypt(user_keypair.encryption_private, encrypted_challenge)
    except crypto.DecryptionError:
        _abort(session, "challenge-undecryptable",
               "challenge was not encrypted to this keypair")
    _send(session, MSG_CHALLENGE_RESPONSE, challenge_value, _OUTER)
    _, encrypted_inner = _recv(session, {MSG_INNER_KEY: _OUTER})
    try:
        inner_key = crypto.asym_decrypt(user_keypair.encryption_private, encrypted_inner)
    except crypto.DecryptionError:
        _abort(session, "protocol-error", "inner key was not encrypted to this keypair")
    if len(inner_key) != crypto.SYMMETRIC_KEY_LEN:
        _abort(session, "protocol-error", "inner key has wrong length")
    session.inner_key = inner_key
    session.peer_account = account
    session.state = SessionState.AUTHENTICATED


def rp_authenticate(session: SecureSession, replica: ContractState) -> bytes:
    """Challenge the claimed account's registered key; bind the session on success.

    Pure function of the replica: only local view reads, no ledger traffic.
    """
    if session.state is not SessionState.CONNECTED:
        raise ProtocolError("protocol-error", f"cannot authenticate in state {session.state.value}")
    _, account = _recv(session, {MSG_ACCOUNT_CLAIM: _OUTER})
    if len(account) != crypto.ADDRESS_LEN:
        _abort(session, "protocol-error", "account claim has wrong length")
    try:
        _, user_encryption_key, valid = contract.view_public_key(replica, account)
    except ContractViewError:
        _abort(session, "unknown-account", "no such account in replica")
    if not valid:
        _abort(session, "account-invalid", "account is tombstoned")
    challenge = Challenge(
        value=crypto.random_bytes(CHALLENGE_LEN, session.random_source),
        issued_at=session.clock(),
    )
    _send(session, MSG_CHALLENGE,
          crypto.asym_encrypt(user_encryption_key, challenge.value, session.random_source),
          _OUTER)
    session.state = SessionState.CHALLENGED
    _, response = _recv(session, {MSG_CHALLENGE_RESPONSE: _OUTER})
    # Single use: the challenge is dropped after this one comparison.
    expired = session.clock() - challenge.issued_at > CHALLENGE_LIFETIME_SECONDS
    matched = hmac.compare_digest(response, challenge.value)
    challenge.value = b""
    if expired:
        _abort(session, "challenge-expired")
    if not matched:
        _abort(session, "wrong-challenge")
    inner_key = crypto.random_bytes(crypto.SYMMETRIC_KEY_LEN, session.random_source)
    _send(session, MSG_INNER_KEY,
          crypto.asym_encrypt(user_encryption_key, inner_key, session.random_source),
          _OUTER)
    session.inner_key = inner_key
    session.peer_account = account
    session.state = SessionState.AUTHENTICATED
    return account


# --- attribute transfer ----------------------------------------------------------


@dataclass(frozen=True)
class AttributePackage:
    """Plaintexts a user presents for one attribute on their account."""

    account: bytes
    index: int
    descriptor: bytes
    data: bytes
    nonce: bytes

    def encode(self) -> bytes:
        return encode_fields(
            self.account, encode_u64(self.index), self.descriptor, self.data, self.nonce
        )

    @classmethod
    def decode(cls, blob: bytes) -> "AttributePackage":
        account, index, descriptor, data, nonce = decode_exact_fields(blob, 5)
        return cls(
            account=account,
            index=decode_u64(index),
            descriptor=descriptor,
            data=data,
            nonce=nonce,
        )


VERIFIED = "verified"


@dataclass(frozen=True)
class VerificationResult:
    ok: bool
    code: str

    def encode(self) -> bytes:
        return encode_fields(encode_bool(self.ok), encode_text(self.code))

    @classmethod
    def decode(cls, blob: bytes) -> "VerificationResult":
        ok, code = decode_exact_fields(blob, 2)
        return cls(ok=decode_bool(ok), code=decode_text(code))


def send_attribute(session: SecureSession, package: AttributePackage) -> VerificationResult:
    """User side: present one attribute on the inner tunnel, await the verdict."""
    if session.state is not SessionState.AUTHENTICATED:
        raise ProtocolError("not-authenticated", "attribute transfer requires authentication")
    _send(session, MSG_ATTRIBUTE_PACKAGE, package.encode(), _INNER)
    _, body = _recv(session, {MSG_VERIFICATION_RESULT: _INNER})
    try:
        return VerificationResult.decode(body)
    except EncodingError:
        _abort(session, "protocol-error", "verification result does not parse")


def receive_attribute(session: SecureSession) -> AttributePackage:
    """RP side: read one attribute package off the inner tunnel."""
    if session.state is not SessionState.AUTHENTICATED:
        raise ProtocolError("not-authenticated", "attribute transfer requires authentication")
    _, body = _recv(session, {MSG_ATTRIBUTE_PACKAGE: _INNER})
    try:
        return AttributePackage.decode(body)
    except EncodingError:
        _abort(session, "protocol-error", "attribute package does not parse")


def rp_verify_attribute(
    session: SecureSession, package: AttributePackage, replica: ContractState
) -> tuple[VerificationResult, AttributeField | None]:
    """Check presented plaintexts against the replica's on-record hash.

    An authenticated user may present only their own attributes; the stored
    field is returned on success so the caller can evaluate its source.
    """
    if package.account != session.peer_account:
        return VerificationResult(False, "account-mismatch"), None
    candidate = attribute_hash(package.data, package.nonce, package.descriptor)
    try:
        if not contract.compare_hash(replica, package.account, package.index, candidate):
            return VerificationResult(False, "hash-mismatch"), None
        stored = contract.view_attribute(replica, package.account, package.index)
    except ContractViewError as exc:
        return VerificationResult(False, exc.code), None
    return VerificationResult(True, VERIFIED), stored


def send_verification_result(session: SecureSession, result: VerificationResult) -> None:
    _send(session, MSG_VERIFICATION_RESULT, result.encode(), _INNER)


def rp_handle_attribute(
    session: SecureSession, replica: ContractState
) -> tuple[VerificationResult, AttributeField | None, AttributePackage]:
    """RP side: receive, verify, and answer one attribute presentation."""
    package = receive_attribute(session)
    result, stored = rp_verify_attribute(session, package, replica)
    send_verification_result(session, result)
    return result, stored, package


# --- manager authority evaluation --------------------------------------------------


@dataclass(frozen=True)
class AuthorityDecision:
    """Outcome of evaluating an attribute's source against a descriptor policy."""

    manager_address: bytes
    manager_valid: bool
    descriptors: tuple[str, ...]
    matched_policy: tuple[str, ...]
    accepted: bool


def evaluate_manager_authority(
    replica: ContractState, manager_public_key: bytes, required_descriptors: list[str]
) -> AuthorityDecision:
    """Accept iff the posting key resolves to a valid manager carrying every
    required descriptor verbatim.

    A key with no manager record (self-attested attributes resolve here) is
    accepted only under an empty policy: no authority was demanded, none is
    claimed.
    """
    address = crypto.address_of(manager_public_key)
    record = replica.managers.get(address)
    if record is None:
        return AuthorityDecision(
            manager_address=address,
            manager_valid=False,
            descriptors=(),
            matched_policy=(),
            accepted=not required_descriptors,
        )
    matched = tuple(d for d in required_descriptors if d in record.descriptors)
    return AuthorityDecision(
        manager_address=address,
        manager_valid=record.valid,
        descriptors=tuple(record.descriptors),
        matched_policy=matched,
        accepted=record.valid and len(matched) == len(required_descriptors),
    )
