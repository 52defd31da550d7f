"""Deterministic simulated ledger: signed transactions sealed into a hash-linked chain.

There is no consensus and no mining; a single sealing authority orders
transactions, which is enough because the contract only needs an agreed
total order.  Replaying the sealed blocks from genesis is a pure fold that
produces the same contract state on every replica, byte for byte.

Failed transactions are sealed and recorded too (and charged gas by the
cost model); they simply have no state effect.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from . import contract, crypto
from .contract import ContractState, Receipt
from .encoding import (
    EncodingError,
    decode_exact_fields,
    decode_fields,
    decode_text,
    decode_u64,
    encode_fields,
    encode_text,
    encode_u64,
)

GENESIS_PREVIOUS_HASH = b"\x00" * crypto.DIGEST_LEN

_CHAIN_MAGIC = b"IDMSCHN\x01"


class ChainIntegrityError(Exception):
    """The chain fails verification and cannot be replayed."""


@dataclass(frozen=True)
class Transaction:
    """A signed state-transition request.

    The signature covers (function, args, nonce); the sender address is
    bound through the sender public key, whose hash it must equal.
    """

    sender: bytes
    sender_public_key: bytes
    function: str
    args: bytes
    nonce: int
    signature: bytes

    def signing_payload(self) -> bytes:
        return signing_payload(self.function, self.args, self.nonce)

    def encode(self) -> bytes:
        return encode_fields(
            self.sender,
            self.sender_public_key,
            encode_text(self.function),
            self.args,
            encode_u64(self.nonce),
            self.signature,
        )

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        sender, pub, function, args, nonce, signature = decode_exact_fields(data, 6)
        return cls(
            sender=sender,
            sender_public_key=pub,
            function=decode_text(function),
            args=args,
            nonce=decode_u64(nonce),
            signature=signature,
        )

    @property
    def tx_hash(self) -> bytes:
        return crypto.hash_bytes(self.encode())


def signing_payload(function: str, args: bytes, nonce: int) -> bytes:
    return encode_fields(encode_text(function), args, encode_u64(nonce))


def make_transaction(keypair: crypto.KeyPair, function: str, args: bytes, nonce: int) -> Transaction:
    """Build and sign a transaction for the given identity."""
    return Transaction(
        sender=keypair.address,
        sender_public_key=keypair.signing_public,
        function=function,
        args=args,
        nonce=nonce,
        signature=crypto.sign(keypair.signing_private, signing_payload(function, args, nonce)),
    )


@dataclass(frozen=True)
class Block:
    height: int
    previous_hash: bytes
    transactions: tuple[Transaction, ...]
    block_hash: bytes

    def encode(self) -> bytes:
        return encode_fields(
            encode_u64(self.height),
            self.previous_hash,
            encode_fields(*(tx.encode() for tx in self.transactions)),
            self.block_hash,
        )

    @classmethod
    def decode(cls, data: bytes) -> "Block":
        height, previous, txs_raw, digest = decode_exact_fields(data, 4)
        return cls(
            height=decode_u64(height),
            previous_hash=previous,
            transactions=tuple(Transaction.decode(blob) for blob in decode_fields(txs_raw)),
            block_hash=digest,
        )


def _block_body(owner_public_key: bytes, height: int, transactions: tuple[Transaction, ...]) -> bytes:
    # The genesis body is the owner's public key (the contract deployment);
    # every later body is the ordered transaction encodings.
    if height == 0:
        return owner_public_key
    return encode_fields(*(tx.encode() for tx in transactions))


def _compute_block_hash(height: int, previous_hash: bytes, body: bytes) -> bytes:
    return crypto.hash_bytes(encode_fields(encode_u64(height), previous_hash, body))


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    reason: str | None = None


@dataclass(frozen=True)
class TxReceipt:
    """Per-transaction outcome recorded when a block is sealed."""

    height: int
    index: int
    tx_hash: bytes
    function: str
    sender: bytes
    receipt: Receipt


REJECT_UNKNOWN_FUNCTION = "unknown-function"
REJECT_SENDER_MISMATCH = "sender-mismatch"
REJECT_BAD_SIGNATURE = "bad-signature"
REJECT_NONCE_REUSE = "nonce-reuse"


class Chain:
    """The ordered ledger plus its derived contract state.

    Submitting and sealing are serialized through one lock (the single
    ordering point); states returned by ``replicate`` are fresh snapshots
    that readers may share freely.
    """

    def __init__(
        self,
        owner_public_key: bytes,
        blocks: list[Block],
        pending: list[Transaction] | None = None,
    ):
        if not blocks or blocks[0].height != 0:
            raise ChainIntegrityError("chain must start at a genesis block")
        self._lock = threading.Lock()
        self.owner_public_key = owner_public_key
        self.blocks = blocks
        self.pending: list[Transaction] = list(pending or [])
        self._state, self.receipts = _replay(owner_public_key, self.blocks)
        self._last_nonce: dict[bytes, int] = {}
        for tx in self.iter_transactions(include_pending=True):
            self._last_nonce[tx.sender] = max(self._last_nonce.get(tx.sender, -1), tx.nonce)

    # -- construction / persistence ------------------------------------------

    @classmethod
    def create(cls, owner_public_key: bytes) -> "Chain":
        if len(owner_public_key) != crypto.KEY_LEN:
            raise ValueError("owner public key has wrong length")
        genesis = Block(
            height=0,
            previous_hash=GENESIS_PREVIOUS_HASH,
            transactions=(),
            block_hash=_compute_block_hash(0, GENESIS_PREVIOUS_HASH, owner_public_key),
        )
        return cls(owner_public_key, [genesis])

    def save(self, path: str | Path) -> None:
        blob = _CHAIN_MAGIC + encode_fields(
            self.owner_public_key,
            encode_fields(*(block.encode() for block in self.blocks)),
            encode_fields(*(tx.encode() for tx in self.pending)),
        )
        Path(path).write_bytes(blob)

    @classmethod
    def load(cls, path: str | Path) -> "Chain":
        blob = Path(path).read_bytes()
        if blob[: len(_CHAIN_MAGIC)] != _CHAIN_MAGIC:
            raise ChainIntegrityError("not a chain file (bad magic)")
        try:
            owner, blocks_raw, pending_raw = decode_exact_fields(blob[len(_CHAIN_MAGIC) :], 3)
            blocks = [Block.decode(b) for b in decode_fields(blocks_raw)]
            pending = [Transaction.decode(t) for t in decode_fields(pending_raw)]
        except EncodingError as exc:
            raise ChainIntegrityError(f"chain file does not parse: {exc}") from exc
        chain = cls(owner, blocks, pending)
        problems = chain.problems()
        if problems:
            raise ChainIntegrityError("; ".join(problems))
        return chain

    # -- core operations -------------------------------------------------------

    def submit_transaction(self, tx: Transaction) -> SubmitResult:
        """Validate and queue a transaction; invalid ones never reach a block."""
        with self._lock:
            if tx.function not in contract.TRANSACTION_FUNCTIONS:
                return SubmitResult(False, REJECT_UNKNOWN_FUNCTION)
            try:
                if crypto.address_of(tx.sender_public_key) != tx.sender:
                    return SubmitResult(False, REJECT_SENDER_MISMATCH)
                if not crypto.verify(tx.sender_public_key, tx.signing_payload(), tx.signature):
                    return SubmitResult(False, REJECT_BAD_SIGNATURE)
            except crypto.KeyFormatError:
                return SubmitResult(False, REJECT_BAD_SIGNATURE)
            last = self._last_nonce.get(tx.sender)
            if last is not None and tx.nonce <= last:
                return SubmitResult(False, REJECT_NONCE_REUSE)
            self.pending.append(tx)
            self._last_nonce[tx.sender] = tx.nonce
            return SubmitResult(True)

    def seal_block(self) -> Block:
        """Move pending transactions into a new block and apply them in order."""
        with self._lock:
            transactions = tuple(self.pending)
            self.pending.clear()
            height = len(self.blocks)
            previous = self.blocks[-1].block_hash
            body = _block_body(self.owner_public_key, height, transactions)
            block = Block(
                height=height,
                previous_hash=previous,
                transactions=transactions,
                block_hash=_compute_block_hash(height, previous, body),
            )
            self.blocks.append(block)
            for index, tx in enumerate(transactions):
                receipt = contract.apply_function(
                    self._state, tx.sender, tx.sender_public_key, tx.function, tx.args, height
                )
                self.receipts.append(
                    TxReceipt(
                        height=height,
                        index=index,
                        tx_hash=tx.tx_hash,
                        function=tx.function,
                        sender=tx.sender,
                        receipt=receipt,
                    )
                )
            return block

    @property
    def state(self) -> ContractState:
        """The current state (sealed blocks only). Treat as read-only."""
        return self._state

    def replicate(self) -> ContractState:
        """Independently replay all sealed blocks into a fresh state snapshot."""
        problems = self.problems()
        if problems:
            raise ChainIntegrityError("; ".join(problems))
        state, _ = _replay(self.owner_public_key, self.blocks)
        return state

    def verify_chain(self) -> bool:
        return not self.problems()

    def problems(self) -> list[str]:
        """Diagnostics for every integrity violation found (empty = valid)."""
        problems: list[str] = []
        genesis = self.blocks[0]
        if genesis.height != 0:
            problems.append("genesis height is not 0")
        if genesis.previous_hash != GENESIS_PREVIOUS_HASH:
            problems.append("genesis previous_hash is not all-zero")
        if genesis.transactions:
            problems.append("genesis block carries transactions")
        last_nonce: dict[bytes, int] = {}
        previous_hash = None
        for position, block in enumerate(self.blocks):
            if block.height != position:
                problems.append(f"block at position {position} has height {block.height}")
            body = _block_body(self.owner_public_key, block.height, block.transactions)
            if block.block_hash != _compute_block_hash(block.height, block.previous_hash, body):
                problems.append(f"block {block.height}: hash does not recompute")
            if previous_hash is not None and block.previous_hash != previous_hash:
                problems.append(f"block {block.height}: previous_hash link broken")
            previous_hash = block.block_hash
            for index, tx in enumerate(block.transactions):
                problems.extend(self._tx_problems(tx, f"block {block.height} tx {index}", last_nonce))
        for index, tx in enumerate(self.pending):
            problems.extend(self._tx_problems(tx, f"pending tx {index}", last_nonce))
        return problems

    @staticmethod
    def _tx_problems(tx: Transaction, label: str, last_nonce: dict[bytes, int]) -> list[str]:
        problems = []
        if tx.function not in contract.TRANSACTION_FUNCTIONS:
            problems.append(f"{label}: unknown function {tx.function!r}")
        try:
            if crypto.address_of(tx.sender_public_key) != tx.sender:
                problems.append(f"{label}: sender does not match public key")
            if not crypto.verify(tx.sender_public_key, tx.signing_payload(), tx.signature):
                problems.append(f"{label}: bad signature")
        except crypto.KeyFormatError:
            problems.append(f"{label}: malformed key material")
        last = last_nonce.get(tx.sender)
        if last is not None and tx.nonce <= last:
            problems.append(f"{label}: nonce {tx.nonce} not increasing")
        last_nonce[tx.sender] = tx.nonce
        return problems

    def iter_transactions(self, include_pending: bool = False):
        for block in self.blocks:
            yield from block.transactions
        if include_pending:
            yield from self.pending

    def next_nonce(self, sender: bytes) -> int:
        """Smallest nonce the ledger will accept from this sender."""
        return self._last_nonce.get(sender, -1) + 1


def _replay(owner_public_key: bytes, blocks: list[Block]) -> tuple[ContractState, list[TxReceipt]]:
    state = ContractState.genesis(owner_public_key)
    receipts: list[TxReceipt] = []
    for block in blocks:
        for index, tx in enumerate(block.transactions):
            receipt = contract.apply_function(
                state, tx.sender, tx.sender_public_key, tx.function, tx.args, block.height
            )
            receipts.append(
                TxReceipt(
                    height=block.height,
                    index=index,
                    tx_hash=tx.tx_hash,
                    function=tx.function,
                    sender=tx.sender,
                    receipt=receipt,
                )
            )
    return state, receipts
