"""The identity contract: a deterministic state machine over manager and user records.

Eight transaction functions mutate the state (each authenticated by the
ledger from the transaction signature and applied here with the caller's
address and public key); three view functions read it for free on any
replica.

Role rules enforced here:

* the owner, fixed at genesis, may only add and deauthorize managers
* account managers create user accounts (posting identity attributes in the
  same step) and may later manage identity attributes and remove accounts,
  but only for accounts they created
* attribute managers may post non-identity attributes, but only while the
  user has them in their permitted set
* users may self-attest non-identity attributes, delete their non-identity
  attributes, permit/deny attribute managers, and delete their own account
* deauthorization never deletes a record: managers, users, and attributes
  are tombstoned in place so indices and provenance stay stable

Transaction handlers return a ``Receipt`` (never raise) because failures
are themselves recorded on the ledger; view functions raise
``ContractViewError`` since they run locally against a replica.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from enum import Enum

from . import crypto
from .attributes import AttributeField, decode_attribute, encode_attribute
from .encoding import (
    EncodingError,
    decode_bool,
    decode_exact_fields,
    decode_fields,
    decode_text_list,
    decode_u64,
    encode_bool,
    encode_fields,
    encode_text_list,
    encode_u64,
)


class Function(str, Enum):
    """The closed set of transaction functions."""

    ADD_MANAGER = "add_manager"
    DELETE_MANAGER = "delete_manager"
    ADD_USER_ACCOUNT = "add_user_account"
    DELETE_USER_ACCOUNT = "delete_user_account"
    ADD_ATTRIBUTE = "add_attribute"
    DELETE_ATTRIBUTE = "delete_attribute"
    PERMIT_ATTRIBUTE_MANAGER = "permit_attribute_manager"
    DENY_ATTRIBUTE_MANAGER = "deny_attribute_manager"


TRANSACTION_FUNCTIONS = frozenset(f.value for f in Function)

VIEW_PUBLIC_KEY = "view_public_key"
VIEW_ATTRIBUTE = "view_attribute"
COMPARE_HASH = "compare_hash"
VIEW_FUNCTIONS = (VIEW_PUBLIC_KEY, VIEW_ATTRIBUTE, COMPARE_HASH)


class ManagerKind(str, Enum):
    ACCOUNT_MANAGER = "account_manager"
    ATTRIBUTE_MANAGER = "attribute_manager"


# Typed failure codes carried in receipts and view errors.
ERR_NOT_OWNER = "not-owner"
ERR_DUPLICATE_MANAGER = "duplicate-manager"
ERR_UNKNOWN_MANAGER = "unknown-manager"
ERR_ALREADY_INVALID = "already-invalid"
ERR_NOT_ACCOUNT_MANAGER = "not-account-manager"
ERR_DUPLICATE_USER = "duplicate-user"
ERR_MALFORMED_IDENTITY_ATTRIBUTE = "malformed-identity-attribute"
ERR_NOT_AUTHORIZED = "not-authorized"
ERR_UNKNOWN_USER = "unknown-user"
ERR_NOT_PERMITTED = "not-permitted"
ERR_IDENTITY_FLAG_FORBIDDEN = "identity-flag-forbidden"
ERR_INVALID_USER = "invalid-user"
ERR_KEY_MISMATCH = "key-mismatch"
ERR_USER_DELETING_IDENTITY = "user-deleting-identity-attribute"
ERR_UNKNOWN_INDEX = "unknown-index"
ERR_NOT_A_USER = "not-a-user"
ERR_DELETED_ATTRIBUTE = "deleted-attribute"
ERR_MALFORMED_ARGS = "malformed-args"
ERR_UNKNOWN_FUNCTION = "unknown-function"


@dataclass(frozen=True)
class Receipt:
    """Outcome of applying one transaction function."""

    ok: bool
    error: str | None = None
    result: int | None = None  # attribute index for add_attribute

    @classmethod
    def success(cls, result: int | None = None) -> "Receipt":
        return cls(ok=True, result=result)

    @classmethod
    def failure(cls, error: str) -> "Receipt":
        return cls(ok=False, error=error)


class ContractViewError(Exception):
    """Raised by view functions; carries a typed failure code."""

    def __init__(self, code: str, message: str | None = None):
        super().__init__(message or code)
        self.code = code


@dataclass
class ManagerRecord:
    public_key: bytes
    kind: ManagerKind
    descriptors: tuple[str, ...]  # plaintext by design: these are the authority statement
    valid: bool
    created_at: int


@dataclass
class UserRecord:
    signing_public_key: bytes
    encryption_public_key: bytes
    creator: bytes  # address of the account manager that created the account
    valid: bool
    attributes: list[AttributeField | None] = dataclass_field(default_factory=list)
    permitted_attribute_managers: set[bytes] = dataclass_field(default_factory=set)


@dataclass
class ContractState:
    """The full replicated contract state."""

    owner_public_key: bytes
    managers: dict[bytes, ManagerRecord] = dataclass_field(default_factory=dict)
    users: dict[bytes, UserRecord] = dataclass_field(default_factory=dict)

    @classmethod
    def genesis(cls, owner_public_key: bytes) -> "ContractState":
        if len(owner_public_key) != crypto.KEY_LEN:
            raise ValueError("owner public key has wrong length")
        return cls(owner_public_key=owner_public_key)

    @property
    def owner_address(self) -> bytes:
        return crypto.address_of(self.owner_public_key)


# --- argument codecs ---------------------------------------------------------
# Arguments are encoded as length-prefixed fields in declaration order; these
# byte strings are what transaction signatures cover.


def encode_add_manager_args(
    manager_public_key: bytes, kind: ManagerKind, descriptors: list[str]
) -> bytes:
    return encode_fields(
        manager_public_key,
        kind.value.encode("ascii"),
        encode_text_list(descriptors),
    )


def encode_delete_manager_args(manager_address: bytes) -> bytes:
    return encode_fields(manager_address)


def encode_add_user_account_args(
    user_signing_public_key: bytes,
    user_encryption_public_key: bytes,
    identity_attributes: list[AttributeField],
) -> bytes:
    return encode_fields(
        user_signing_public_key,
        user_encryption_public_key,
        encode_fields(*(encode_attribute(a) for a in identity_attributes)),
    )


def encode_delete_user_account_args(user_address: bytes) -> bytes:
    return encode_fields(user_address)


def encode_add_attribute_args(user_address: bytes, attribute: AttributeField) -> bytes:
    return encode_fields(user_address, encode_attribute(attribute))


def encode_delete_attribute_args(user_address: bytes, index: int) -> bytes:
    return encode_fields(user_address, encode_u64(index))


def encode_permit_args(manager_address: bytes) -> bytes:
    return encode_fields(manager_address)


encode_deny_args = encode_permit_args


def _decode_address(data: bytes) -> bytes:
    if len(data) != crypto.ADDRESS_LEN:
        raise EncodingError(f"address must be {crypto.ADDRESS_LEN} bytes, got {len(data)}")
    return data


def _decode_public_key(data: bytes) -> bytes:
    if len(data) != crypto.KEY_LEN:
        raise EncodingError(f"public key must be {crypto.KEY_LEN} bytes, got {len(data)}")
    return data


def _decode_kind(data: bytes) -> ManagerKind:
    try:
        return ManagerKind(data.decode("ascii"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise EncodingError(f"unknown manager kind: {data!r}") from exc


# --- transaction handlers ----------------------------------------------------


def _add_manager(state: ContractState, caller: bytes, args: bytes, height: int) -> Receipt:
    pub, kind_raw, descriptors_raw = decode_exact_fields(args, 3)
    pub = _decode_public_key(pub)
    kind = _decode_kind(kind_raw)
    descriptors = tuple(decode_text_list(descriptors_raw))
    if caller != state.owner_address:
        return Receipt.failure(ERR_NOT_OWNER)
    addr = crypto.address_of(pub)
    existing = state.managers.get(addr)
    if existing is not None and existing.valid:
        return Receipt.failure(ERR_DUPLICATE_MANAGER)
    state.managers[addr] = ManagerRecord(
        public_key=pub, kind=kind, descriptors=descriptors, valid=True, created_at=height
    )
    return Receipt.success()


def _delete_manager(state: ContractState, caller: bytes, args: bytes, height: int) -> Receipt:
    (addr,) = decode_exact_fields(args, 1)
    addr = _decode_address(addr)
    if caller != state.owner_address:
        return Receipt.failure(ERR_NOT_OWNER)
    record = state.managers.get(addr)
    if record is None:
        return Receipt.failure(ERR_UNKNOWN_MANAGER)
    if not record.valid:
        return Receipt.failure(ERR_ALREADY_INVALID)
    record.valid = False
    return Receipt.success()


def _is_valid_manager(state: ContractState, addr: bytes, kind: ManagerKind) -> bool:
    record = state.managers.get(addr)
    return record is not None and record.valid and record.kind is kind


def _add_user_account(
    state: ContractState, caller: bytes, caller_public_key: bytes, args: bytes, height: int
) -> Receipt:
    sign_pub, enc_pub, attrs_raw = decode_exact_fields(args, 3)
    sign_pub = _decode_public_key(sign_pub)
    enc_pub = _decode_public_key(enc_pub)
    identity_attributes = [decode_attribute(blob) for blob in decode_fields(attrs_raw)]
    if not _is_valid_manager(state, caller, ManagerKind.ACCOUNT_MANAGER):
        return Receipt.failure(ERR_NOT_ACCOUNT_MANAGER)
    addr = crypto.address_of(sign_pub)
    existing = state.users.get(addr)
    if existing is not None and existing.valid:
        return Receipt.failure(ERR_DUPLICATE_USER)
    for attribute in identity_attributes:
        if not attribute.identity or attribute.manager_public_key != caller_public_key:
            return Receipt.failure(ERR_MALFORMED_IDENTITY_ATTRIBUTE)
    state.users[addr] = UserRecord(
        signing_public_key=sign_pub,
        encryption_public_key=enc_pub,
        creator=caller,
        valid=True,
        attributes=list(identity_attributes),
    )
    return Receipt.success()


def _delete_user_account(state: ContractState, caller: bytes, args: bytes, height: int) -> Receipt:
    (addr,) = decode_exact_fields(args, 1)
    addr = _decode_address(addr)
    record = state.users.get(addr)
    if record is None:
        return Receipt.failure(ERR_UNKNOWN_USER)
    if not record.valid:
        return Receipt.failure(ERR_ALREADY_INVALID)
    creator_may = caller == record.creator and _is_valid_manager(
        state, caller, ManagerKind.ACCOUNT_MANAGER
    )
    if not (creator_may or caller == addr):
        return Receipt.failure(ERR_NOT_AUTHORIZED)
    record.valid = False
    return Receipt.success()


def _add_attribute(
    state: ContractState, caller: bytes, caller_public_key: bytes, args: bytes, height: int
) -> Receipt:
    addr_raw, attr_raw = decode_exact_fields(args, 2)
    addr = _decode_address(addr_raw)
    attribute = decode_attribute(attr_raw)
    record = state.users.get(addr)
    if record is None or not record.valid:
        return Receipt.failure(ERR_INVALID_USER)
    if attribute.manager_public_key != caller_public_key:
        return Receipt.failure(ERR_KEY_MISMATCH)
    if caller == record.creator:
        # Creating account manager: may post identity or plain attributes,
        # but deauthorization strips the power.
        if not _is_valid_manager(state, caller, ManagerKind.ACCOUNT_MANAGER):
            return Receipt.failure(ERR_NOT_PERMITTED)
    elif caller == addr:
        # Self-attestation never carries the identity flag.
        if attribute.identity:
            return Receipt.failure(ERR_IDENTITY_FLAG_FORBIDDEN)
    elif _is_valid_manager(state, caller, ManagerKind.ATTRIBUTE_MANAGER):
        if attribute.identity:
            return Receipt.failure(ERR_IDENTITY_FLAG_FORBIDDEN)
        if caller not in record.permitted_attribute_managers:
            return Receipt.failure(ERR_NOT_PERMITTED)
    else:
        return Receipt.failure(ERR_NOT_PERMITTED)
    record.attributes.append(attribute)
    return Receipt.success(result=len(record.attributes) - 1)


def _delete_attribute(
    state: ContractState, caller: bytes, caller_public_key: bytes, args: bytes, height: int
) -> Receipt:
    addr_raw, index_raw = decode_exact_fields(args, 2)
    addr = _decode_address(addr_raw)
    index = decode_u64(index_raw)
    record = state.users.get(addr)
    if record is None:
        return Receipt.failure(ERR_UNKNOWN_USER)
    if not record.valid:
        return Receipt.failure(ERR_INVALID_USER)
    if index >= len(record.attributes):
        return Receipt.failure(ERR_UNKNOWN_INDEX)
    attribute = record.attributes[index]
    if attribute is None:
        return Receipt.failure(ERR_DELETED_ATTRIBUTE)
    if caller == addr:
        if attribute.identity:
            return Receipt.failure(ERR_USER_DELETING_IDENTITY)
    elif attribute.manager_public_key == caller_public_key:
        # Poster revoking its own attribute; must still be an authorized manager.
        mgr = state.managers.get(caller)
        if mgr is None or not mgr.valid:
            return Receipt.failure(ERR_NOT_AUTHORIZED)
    else:
        return Receipt.failure(ERR_NOT_AUTHORIZED)
    record.attributes[index] = None  # tombstone; later indices unchanged
    return Receipt.success(result=index)


def _permit_attribute_manager(
    state: ContractState, caller: bytes, args: bytes, height: int
) -> Receipt:
    (addr,) = decode_exact_fields(args, 1)
    addr = _decode_address(addr)
    record = state.users.get(caller)
    if record is None or not record.valid:
        return Receipt.failure(ERR_NOT_A_USER)
    if not _is_valid_manager(state, addr, ManagerKind.ATTRIBUTE_MANAGER):
        return Receipt.failure(ERR_UNKNOWN_MANAGER)
    record.permitted_attribute_managers.add(addr)
    return Receipt.success()


def _deny_attribute_manager(
    state: ContractState, caller: bytes, args: bytes, height: int
) -> Receipt:
    (addr,) = decode_exact_fields(args, 1)
    addr = _decode_address(addr)
    record = state.users.get(caller)
    if record is None or not record.valid:
        return Receipt.failure(ERR_NOT_A_USER)
    # Denying an absent entry is an idempotent no-op; already-posted
    # attributes are unaffected either way.
    record.permitted_attribute_managers.discard(addr)
    return Receipt.success()


def apply_function(
    state: ContractState,
    caller_address: bytes,
    caller_public_key: bytes,
    function: str,
    args: bytes,
    block_height: int,
) -> Receipt:
    """Apply one authenticated transaction function to the state.

    Failures never mutate the state; malformed arguments fail with a
    receipt rather than raising, since failed transactions are recorded.
    """
    try:
        if function == Function.ADD_MANAGER:
            return _add_manager(state, caller_address, args, block_height)
        if function == Function.DELETE_MANAGER:
            return _delete_manager(state, caller_address, args, block_height)
        if function == Function.ADD_USER_ACCOUNT:
            return _add_user_account(state, caller_address, caller_public_key, args, block_height)
        if function == Function.DELETE_USER_ACCOUNT:
            return _delete_user_account(state, caller_address, args, block_height)
        if function == Function.ADD_ATTRIBUTE:
            return _add_attribute(state, caller_address, caller_public_key, args, block_height)
        if function == Function.DELETE_ATTRIBUTE:
            return _delete_attribute(state, caller_address, caller_public_key, args, block_height)
        if function == Function.PERMIT_ATTRIBUTE_MANAGER:
            return _permit_attribute_manager(state, caller_address, args, block_height)
        if function == Function.DENY_ATTRIBUTE_MANAGER:
            return _deny_attribute_manager(state, caller_address, args, block_height)
    except EncodingError:
        return Receipt.failure(ERR_MALFORMED_ARGS)
    return Receipt.failure(ERR_UNKNOWN_FUNCTION)


# --- view functions ----------------------------------------------------------
# Pure reads against a replica: no ledger interaction, zero gas.


def view_public_key(state: ContractState, user_address: bytes) -> tuple[bytes, bytes, bool]:
    """Return (signing key, encryption key, valid flag) for a user account."""
    record = state.users.get(user_address)
    if record is None:
        raise ContractViewError(ERR_UNKNOWN_USER)
    return record.signing_public_key, record.encryption_public_key, record.valid


def view_attribute(state: ContractState, user_address: bytes, index: int) -> AttributeField:
    """Return the stored attribute field verbatim (ciphertexts included)."""
    record = state.users.get(user_address)
    if record is None:
        raise ContractViewError(ERR_UNKNOWN_USER)
    if index >= len(record.attributes) or index < 0:
        raise ContractViewError(ERR_UNKNOWN_INDEX)
    attribute = record.attributes[index]
    if attribute is None:
        raise ContractViewError(ERR_DELETED_ATTRIBUTE)
    return attribute


def compare_hash(state: ContractState, user_address: bytes, index: int, candidate: bytes) -> bool:
    """True iff candidate equals the stored attribute hash."""
    attribute = view_attribute(state, user_address, index)
    return candidate == attribute.hash


# --- canonical state serialization --------------------------------------------
# Maps are serialized sorted by address so independently replayed replicas
# compare byte-identical.


def _encode_manager(addr: bytes, record: ManagerRecord) -> bytes:
    return encode_fields(
        addr,
        record.public_key,
        record.kind.value.encode("ascii"),
        encode_text_list(list(record.descriptors)),
        encode_bool(record.valid),
        encode_u64(record.created_at),
    )


def _encode_user(addr: bytes, record: UserRecord) -> bytes:
    slots = [
        b"\x00" if attribute is None else b"\x01" + encode_attribute(attribute)
        for attribute in record.attributes
    ]
    return encode_fields(
        addr,
        record.signing_public_key,
        record.encryption_public_key,
        record.creator,
        encode_bool(record.valid),
        encode_fields(*slots),
        encode_fields(*sorted(record.permitted_attribute_managers)),
    )


def serialize_state(state: ContractState) -> bytes:
    """Canonical byte serialization, identical across replicas of equal state."""
    managers = encode_fields(
        *(_encode_manager(addr, state.managers[addr]) for addr in sorted(state.managers))
    )
    users = encode_fields(
        *(_encode_user(addr, state.users[addr]) for addr in sorted(state.users))
    )
    return encode_fields(state.owner_public_key, managers, users)


def _decode_manager(blob: bytes) -> tuple[bytes, ManagerRecord]:
    addr, pub, kind, descriptors, valid, created = decode_exact_fields(blob, 6)
    return _decode_address(addr), ManagerRecord(
        public_key=_decode_public_key(pub),
        kind=_decode_kind(kind),
        descriptors=tuple(decode_text_list(descriptors)),
        valid=decode_bool(valid),
        created_at=decode_u64(created),
    )


def _decode_user(blob: bytes) -> tuple[bytes, UserRecord]:
    addr, sign_pub, enc_pub, creator, valid, slots_raw, permitted_raw = decode_exact_fields(blob, 7)
    slots: list[AttributeField | None] = []
    for slot in decode_fields(slots_raw):
        if slot[:1] == b"\x00":
            slots.append(None)
        elif slot[:1] == b"\x01":
            slots.append(decode_attribute(slot[1:]))
        else:
            raise EncodingError("bad attribute slot marker")
    return _decode_address(addr), UserRecord(
        signing_public_key=_decode_public_key(sign_pub),
        encryption_public_key=_decode_public_key(enc_pub),
        creator=_decode_address(creator),
        valid=decode_bool(valid),
        attributes=slots,
        permitted_attribute_managers={_decode_address(p) for p in decode_fields(permitted_raw)},
    )


def deserialize_state(data: bytes) -> ContractState:
    owner, managers_raw, users_raw = decode_exact_fields(data, 3)
    state = ContractState(owner_public_key=_decode_public_key(owner))
    for blob in decode_fields(managers_raw):
        addr, record = _decode_manager(blob)
        state.managers[addr] = record
    for blob in decode_fields(users_raw):
        addr, record = _decode_user(blob)
        state.users[addr] = record
    return state
