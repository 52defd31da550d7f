"""Scripted end-to-end walkthrough: a government-owned registry, a bank, a
university, and a user proving a degree and GPA to a hiring relying party.

Steps, in order: the owner authorizes the bank (account manager) and the
University of Corellia (attribute manager with descriptors "university"
and "University of Corellia"); the bank creates Bob's account with one
identity attribute; Bob permits the university; the university posts his
degree (hash plus download location, payload off-ledger) and his GPA
(encrypted in-record with a nonce); Bob decrypts the GPA straight from a
replica; and Ally's relying party verifies both presented attributes and
checks the "university" descriptor before reading off which university.

Variants deliberately break one rule to show where enforcement trips:

* ``missing-permit`` skips Bob's permission grant — the university's first
  post fails with not-permitted
* ``delete-identity`` has Bob try to delete his identity attribute — the
  contract refuses with user-deleting-identity-attribute
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import contract, cost, crypto, protocol
from .attributes import build_attribute, decrypt_attribute, load_plaintext_record, save_plaintext_record
from .contract import Function, ManagerKind
from .ledger import Chain, make_transaction
from .service import RelyingPartyServer, event_line, run_user_session

SCENARIO_NAMES = ("corellia",)
VARIANTS = ("missing-permit", "delete-identity")

UNIVERSITY_DESCRIPTORS = ["university", "University of Corellia"]
BANK_DESCRIPTORS = ["bank", "Corellia Federal Bank", "identity-proofing:in-person"]
DEGREE_LOCATION = "https://registrar.uoc.example/download/degree/bob"
GPA_VALUE = b"3.9"


@dataclass
class StepResult:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioResult:
    ok: bool
    steps: list[StepResult] = field(default_factory=list)
    failed_step: str | None = None
    total_gas: int = 0
    chain: Chain | None = None


class _StepFailure(Exception):
    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class _Runner:
    def __init__(self, log):
        self.log = log or (lambda line: None)
        self.result = ScenarioResult(ok=True)
        self.nonces: dict[bytes, int] = {}

    def step(self, name: str, fn) -> object:
        try:
            value = fn()
        except _StepFailure as exc:
            self.result.steps.append(StepResult(name, False, exc.detail))
            self.log(event_line("scenario-step", name=name, ok=False, detail=exc.detail))
            self.result.ok = False
            self.result.failed_step = name
            raise
        self.result.steps.append(StepResult(name, True))
        self.log(event_line("scenario-step", name=name, ok=True))
        return value

    def transact(self, chain: Chain, keypair: crypto.KeyPair, function: Function, args: bytes):
        nonce = self.nonces.get(keypair.address, 0)
        tx = make_transaction(keypair, function.value, args, nonce)
        submit = chain.submit_transaction(tx)
        if not submit.accepted:
            raise _StepFailure(f"submit rejected: {submit.reason}")
        self.nonces[keypair.address] = nonce + 1
        chain.seal_block()
        receipt = chain.receipts[-1].receipt
        if not receipt.ok:
            raise _StepFailure(f"receipt failed: {receipt.error}")
        return receipt


def run_corellia(
    workdir: str | Path | None = None,
    *,
    variant: str | None = None,
    log=None,
    rp_port: int = 0,
) -> ScenarioResult:
    """Run the walkthrough; returns a result whose steps name exactly what ran.

    With a variant, the result reports the step at which enforcement
    (correctly) refused the action.
    """
    if variant is not None and variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    log = log or (lambda line: None)
    runner = _Runner(log)
    result = runner.result

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(workdir) if workdir is not None else Path(tmp)
        workdir.mkdir(parents=True, exist_ok=True)
        store = workdir / "bob-store"

        try:
            _run_steps(runner, workdir, store, variant, rp_port)
        except _StepFailure:
            pass

    if result.chain is not None:
        summary = cost.chain_cost_summary(result.chain)
        result.total_gas = summary.total.gas
        log(event_line("scenario-gas", total=summary.total.gas,
                       ether=cost.format_ether(summary.total.ether),
                       usd=cost.format_usd(summary.total.usd)))
    log(event_line("scenario-done", ok=result.ok,
                   failed_step=result.failed_step or "none"))
    return result


def _run_steps(runner: _Runner, workdir: Path, store: Path, variant: str | None, rp_port: int):
    result = runner.result

    def create_keys():
        identities = {}
        for name in ("owner", "bank", "university", "bob", "ally-rp"):
            keypair = crypto.generate_keypair()
            crypto.save_private_key_file(workdir / f"{name}.key", keypair)
            crypto.save_public_key_file(workdir / f"{name}.key.pub", keypair.public)
            identities[name] = keypair
        return identities

    ids = runner.step("create-keys", create_keys)
    owner, bank, university, bob = ids["owner"], ids["bank"], ids["university"], ids["bob"]
    ally_rp = ids["ally-rp"]

    def init_chain():
        chain = Chain.create(owner.signing_public)
        result.chain = chain
        return chain

    chain = runner.step("init-chain", init_chain)

    runner.step(
        "owner-authorizes-bank",
        lambda: runner.transact(
            chain, owner, Function.ADD_MANAGER,
            contract.encode_add_manager_args(
                bank.signing_public, ManagerKind.ACCOUNT_MANAGER, BANK_DESCRIPTORS
            ),
        ),
    )
    runner.step(
        "owner-authorizes-university",
        lambda: runner.transact(
            chain, owner, Function.ADD_MANAGER,
            contract.encode_add_manager_args(
                university.signing_public, ManagerKind.ATTRIBUTE_MANAGER, UNIVERSITY_DESCRIPTORS
            ),
        ),
    )

    def bank_creates_bob():
        field_, plain = build_attribute(
            bank.signing_public, bob.encryption_public,
            descriptor=b"legal name", data=b"Bob", identity=True,
        )
        receipt = runner.transact(
            chain, bank, Function.ADD_USER_ACCOUNT,
            contract.encode_add_user_account_args(
                bob.signing_public, bob.encryption_public, [field_]
            ),
        )
        save_plaintext_record(store, bob.address, 0, plain)
        return receipt

    runner.step("bank-creates-bob", bank_creates_bob)

    if variant != "missing-permit":
        runner.step(
            "bob-permits-university",
            lambda: runner.transact(
                chain, bob, Function.PERMIT_ATTRIBUTE_MANAGER,
                contract.encode_permit_args(university.address),
            ),
        )

    def university_posts_degree():
        # Large payload stays off-ledger: only the hash and a download
        # location are posted.
        degree_image = b"\x89PNG degree-of: Bob, Bachelor of Hyperspace Navigation"
        field_, plain = build_attribute(
            university.signing_public, bob.encryption_public,
            descriptor=b"degree", data=degree_image,
            include_data=False, location=DEGREE_LOCATION,
        )
        receipt = runner.transact(
            chain, university, Function.ADD_ATTRIBUTE,
            contract.encode_add_attribute_args(bob.address, field_),
        )
        save_plaintext_record(store, bob.address, receipt.result, plain)
        return receipt

    runner.step("university-posts-degree", university_posts_degree)

    def university_posts_gpa():
        field_, plain = build_attribute(
            university.signing_public, bob.encryption_public,
            descriptor=b"gpa", data=GPA_VALUE, include_data=True,
        )
        receipt = runner.transact(
            chain, university, Function.ADD_ATTRIBUTE,
            contract.encode_add_attribute_args(bob.address, field_),
        )
        save_plaintext_record(store, bob.address, receipt.result, plain)
        return receipt

    gpa_receipt = runner.step("university-posts-gpa", university_posts_gpa)

    def bob_reads_gpa():
        replica = chain.replicate()
        stored = contract.view_attribute(replica, bob.address, gpa_receipt.result)
        plain = decrypt_attribute(stored, bob.encryption_private)
        if plain.descriptor != b"gpa" or plain.data != GPA_VALUE:
            raise _StepFailure("decrypted GPA does not match what the university posted")
        return plain

    runner.step("bob-reads-gpa", bob_reads_gpa)

    def ally_verifies():
        replica = chain.replicate()
        server = RelyingPartyServer(
            ally_rp, replica,
            port=rp_port,
            required_descriptors=("university",),
            log=runner.log,
            max_sessions=1,
        )
        server.start()
        try:
            presentations = [
                (1, load_plaintext_record(store, bob.address, 1)),  # degree
                (2, load_plaintext_record(store, bob.address, 2)),  # gpa
            ]
            outcomes = run_user_session(
                server.host, server.port, ally_rp.encryption_public,
                bob.address, bob, presentations, log=runner.log,
            )
        finally:
            server.shutdown()
        if not all(outcome.result.ok for outcome in outcomes):
            raise _StepFailure("a presented attribute failed verification")
        record = server.sessions[-1]
        decisions = [decision for _, res, decision in record.presentations if res.ok]
        if len(decisions) != 2 or not all(d is not None and d.accepted for d in decisions):
            raise _StepFailure("authority policy rejected the university")
        university_names = {d.descriptors[1] for d in decisions}
        if university_names != {"University of Corellia"}:
            raise _StepFailure(f"unexpected issuing university: {university_names}")
        gpa_plain = record.presentations[1][0].data
        if float(gpa_plain) < 3.0:
            raise _StepFailure("GPA below Ally's bar")
        return record

    runner.step("ally-verifies-attributes", ally_verifies)

    if variant == "delete-identity":
        runner.step(
            "bob-deletes-identity-attribute",
            lambda: runner.transact(
                chain, bob, Function.DELETE_ATTRIBUTE,
                contract.encode_delete_attribute_args(bob.address, 0),
            ),
        )
