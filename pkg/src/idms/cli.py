"""Command-line front end: role-scoped transaction commands, chain utilities,
the relying-party daemon, the user connect client, the cost table, and the
scripted scenario runner.

Exit codes: 0 success, 1 contract/ledger rejection, 2 protocol failure,
3 I/O or parse error.  Output is line-oriented ``event key=value`` records
(stable event names) so scripts and tests can scrape it.
"""

from __future__ import annotations

import functools
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import click

from . import contract, cost, crypto, scenario
from .attributes import (
    build_attribute,
    decrypt_attribute,
    load_plaintext_record,
    save_plaintext_record,
)
from .contract import Function, ManagerKind
from .encoding import EncodingError
from .ledger import Chain, ChainIntegrityError, make_transaction
from .protocol import ProtocolError
from .service import RelyingPartyServer, event_line, run_user_session

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_PROTOCOL = 2
EXIT_IO = 3


def emit(event: str, **fields) -> None:
    click.echo(event_line(event, **fields))


def guarded(fn):
    """Map failures to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SystemExit:
            raise
        except ProtocolError as exc:
            emit("error", kind="protocol", code=exc.code, detail=str(exc))
            sys.exit(EXIT_PROTOCOL)
        except (
            ChainIntegrityError,
            EncodingError,
            crypto.CryptoError,
            OSError,
            ValueError,
            InvalidOperation,
            KeyError,
        ) as exc:
            emit("error", kind="io", detail=str(exc))
            sys.exit(EXIT_IO)

    return wrapper


def _parse_address(text: str) -> bytes:
    value = bytes.fromhex(text)
    if len(value) != crypto.ADDRESS_LEN:
        raise ValueError(f"address must be {crypto.ADDRESS_LEN * 2} hex chars")
    return value


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {text!r}")
    return host, int(port)


def _read_data(data: str | None, data_file: Path | None) -> bytes:
    if (data is None) == (data_file is None):
        raise ValueError("provide exactly one of --data / --data-file")
    if data is not None:
        return data.encode("utf-8")
    return Path(data_file).read_bytes()


# --- shared option stacks ------------------------------------------------------

def chain_option(fn):
    return click.option(
        "--chain", "chain_path", type=click.Path(path_type=Path), required=True,
        envvar="IDMS_CHAIN", help="Chain file path (env: IDMS_CHAIN).",
    )(fn)


def keys_option(fn):
    return click.option(
        "--keys", "keys_path", type=click.Path(path_type=Path), required=True,
        envvar="IDMS_KEYS", help="Private key file path (env: IDMS_KEYS).",
    )(fn)


def tx_options(fn):
    fn = click.option("--no-seal", is_flag=True, help="Queue without sealing a block.")(fn)
    fn = click.option("--nonce", type=int, default=None, help="Force a specific nonce.")(fn)
    fn = price_options(fn)
    return fn


def price_options(fn):
    fn = click.option("--gas-price", default=str(cost.DEFAULT_GAS_PRICE), show_default=True,
                      help="Ether per gas unit.")(fn)
    fn = click.option("--ether-price", default=str(cost.DEFAULT_ETHER_PRICE), show_default=True,
                      help="USD per Ether.")(fn)
    return fn


def _nonce_path(keys_path: Path) -> Path:
    return Path(str(keys_path) + ".nonce")


def _next_nonce(keys_path: Path, chain: Chain, sender: bytes, override: int | None) -> int:
    if override is not None:
        return override
    sidecar = _nonce_path(keys_path)
    if sidecar.exists():
        return int(sidecar.read_text().strip())
    return chain.next_nonce(sender)


def _store_nonce(keys_path: Path, used: int) -> None:
    sidecar = _nonce_path(keys_path)
    current = int(sidecar.read_text().strip()) if sidecar.exists() else 0
    sidecar.write_text(str(max(current, used + 1)))


def _run_transaction(
    chain_path: Path,
    keys_path: Path,
    function: Function,
    args: bytes,
    *,
    no_seal: bool,
    nonce: int | None,
    gas_price: str,
    ether_price: str,
) -> contract.Receipt | None:
    """Build, sign, submit, and (by default) seal one transaction.

    Returns the receipt for sealed transactions, None when left pending.
    Exits with EXIT_REJECTED on submission rejection or a failed receipt.
    """
    keypair = crypto.load_private_key_file(keys_path)
    chain = Chain.load(chain_path)
    use_nonce = _next_nonce(keys_path, chain, keypair.address, nonce)
    tx = make_transaction(keypair, function.value, args, use_nonce)
    submitted = chain.submit_transaction(tx)
    if not submitted.accepted:
        emit("rejected", function=function.value, reason=submitted.reason, nonce=use_nonce)
        sys.exit(EXIT_REJECTED)
    _store_nonce(keys_path, use_nonce)
    emit("submitted", function=function.value, nonce=use_nonce, sender=keypair.address)
    if no_seal:
        chain.save(chain_path)
        return None
    chain.seal_block()
    record = chain.receipts[-1]
    chain.save(chain_path)
    _emit_receipt(record.function, record.receipt)
    report = cost.cost_report(
        function.value, gas_price=Decimal(gas_price), ether_price=Decimal(ether_price)
    )
    emit("cost", function=function.value, gas=report.gas,
         ether=cost.format_ether(report.ether), usd=cost.format_usd(report.usd))
    if not record.receipt.ok:
        sys.exit(EXIT_REJECTED)
    return record.receipt


def _emit_receipt(function: str, receipt: contract.Receipt) -> None:
    fields = {"function": function, "ok": receipt.ok}
    if receipt.error is not None:
        fields["error"] = receipt.error
    if receipt.result is not None:
        fields["index"] = receipt.result
    emit("receipt", **fields)


# --- top-level group ------------------------------------------------------------


@click.group()
def main():
    """Identity registry on a simulated ledger, with direct user-to-RP protocols."""


# --- key management ---------------------------------------------------------------


@main.group()
def key():
    """Generate and inspect identity key files."""


@key.command("generate")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--seed", default=None, help="64 hex chars; deterministic test mode.")
@guarded
def key_generate(out_path: Path, seed: str | None):
    """Write a private key file (mode 0600) and its .pub companion."""
    seed_bytes = bytes.fromhex(seed) if seed is not None else None
    keypair = crypto.generate_keypair(seed_bytes)
    crypto.save_private_key_file(out_path, keypair)
    crypto.save_public_key_file(Path(str(out_path) + ".pub"), keypair.public)
    emit("key-generated", out=str(out_path), address=keypair.address)


@key.command("address")
@click.option("--keys", "keys_path", type=click.Path(path_type=Path), default=None,
              envvar="IDMS_KEYS")
@click.option("--pub", "pub_path", type=click.Path(path_type=Path), default=None)
@guarded
def key_address(keys_path: Path | None, pub_path: Path | None):
    """Print the account address for a key file."""
    if (keys_path is None) == (pub_path is None):
        raise ValueError("provide exactly one of --keys / --pub")
    if keys_path is not None:
        address = crypto.load_private_key_file(keys_path).address
    else:
        address = crypto.load_public_key_file(pub_path).address
    emit("key-address", address=address)


# --- chain utilities ---------------------------------------------------------------


@main.group()
def chain():
    """Create, inspect, verify, and seal the chain file."""


@chain.command("init")
@chain_option
@click.option("--owner-pub", "owner_pub", type=click.Path(path_type=Path), required=True)
@guarded
def chain_init(chain_path: Path, owner_pub: Path):
    """Create a fresh chain whose genesis fixes the owner's public key."""
    owner = crypto.load_public_key_file(owner_pub)
    ledger_chain = Chain.create(owner.signing)
    ledger_chain.save(chain_path)
    emit("chain-initialized", chain=str(chain_path), owner=owner.address)


@chain.command("show")
@chain_option
@guarded
def chain_show(chain_path: Path):
    """Render the chain human-readably, one line per block and transaction."""
    ledger_chain = Chain.load(chain_path)
    outcomes = {(r.height, r.index): r.receipt for r in ledger_chain.receipts}
    emit("chain-info", blocks=len(ledger_chain.blocks), pending=len(ledger_chain.pending),
         owner=ledger_chain.state.owner_address)
    for block in ledger_chain.blocks:
        emit("block", height=block.height, hash=block.block_hash,
             transactions=len(block.transactions))
        for index, tx in enumerate(block.transactions):
            receipt = outcomes[(block.height, index)]
            fields = {"function": tx.function, "sender": tx.sender, "nonce": tx.nonce,
                      "ok": receipt.ok}
            if receipt.error:
                fields["error"] = receipt.error
            emit("  tx", **fields)
    for tx in ledger_chain.pending:
        emit("pending-tx", function=tx.function, sender=tx.sender, nonce=tx.nonce)


@chain.command("verify")
@chain_option
@guarded
def chain_verify(chain_path: Path):
    """Exit 0 iff every hash link, signature, and nonce sequence checks out."""
    try:
        ledger_chain = Chain.load(chain_path)
    except ChainIntegrityError as exc:
        emit("chain-invalid", detail=str(exc))
        sys.exit(EXIT_REJECTED)
    problems = ledger_chain.problems()
    if problems:
        for problem in problems:
            emit("chain-invalid", detail=problem)
        sys.exit(EXIT_REJECTED)
    emit("chain-valid", blocks=len(ledger_chain.blocks))


@chain.command("seal")
@chain_option
@price_options
@guarded
def chain_seal(chain_path: Path, gas_price: str, ether_price: str):
    """Seal all pending transactions into one block."""
    ledger_chain = Chain.load(chain_path)
    count = len(ledger_chain.pending)
    block = ledger_chain.seal_block()
    ledger_chain.save(chain_path)
    emit("block-sealed", height=block.height, transactions=count)
    failed = False
    for record in ledger_chain.receipts[-count:] if count else []:
        _emit_receipt(record.function, record.receipt)
        report = cost.cost_report(record.function, gas_price=Decimal(gas_price),
                                  ether_price=Decimal(ether_price))
        emit("cost", function=record.function, gas=report.gas,
             ether=cost.format_ether(report.ether), usd=cost.format_usd(report.usd))
        failed = failed or not record.receipt.ok
    if failed:
        sys.exit(EXIT_REJECTED)


# --- owner commands -----------------------------------------------------------------


@main.group()
def owner():
    """Owner transactions: authorize and deauthorize managers."""


@owner.command("add-manager")
@chain_option
@keys_option
@click.option("--manager-pub", type=click.Path(path_type=Path), required=True)
@click.option("--kind", type=click.Choice([k.value for k in ManagerKind]), required=True)
@click.option("--descriptor", "descriptors", multiple=True, required=True,
              help="Plaintext authority descriptor; repeatable, order preserved.")
@tx_options
@guarded
def owner_add_manager(chain_path, keys_path, manager_pub, kind, descriptors,
                      no_seal, nonce, gas_price, ether_price):
    manager_keys = crypto.load_public_key_file(manager_pub)
    args = contract.encode_add_manager_args(
        manager_keys.signing, ManagerKind(kind), list(descriptors)
    )
    _run_transaction(chain_path, keys_path, Function.ADD_MANAGER, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


@owner.command("delete-manager")
@chain_option
@keys_option
@click.option("--manager", "manager_address", required=True, help="Manager address (hex).")
@tx_options
@guarded
def owner_delete_manager(chain_path, keys_path, manager_address,
                         no_seal, nonce, gas_price, ether_price):
    args = contract.encode_delete_manager_args(_parse_address(manager_address))
    _run_transaction(chain_path, keys_path, Function.DELETE_MANAGER, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


# --- manager commands ----------------------------------------------------------------


@main.group()
def manager():
    """Account/attribute manager transactions."""


@manager.command("add-user")
@chain_option
@keys_option
@click.option("--user-pub", type=click.Path(path_type=Path), required=True)
@click.option("--identity", "identity_specs", multiple=True,
              help="Identity attribute as descriptor=data; repeatable.")
@click.option("--save-plain", "save_plain", type=click.Path(path_type=Path), default=None,
              help="Directory receiving the plaintext records for the user.")
@tx_options
@guarded
def manager_add_user(chain_path, keys_path, user_pub, identity_specs, save_plain,
                     no_seal, nonce, gas_price, ether_price):
    """Create a user account, posting its identity attributes in the same step."""
    keypair = crypto.load_private_key_file(keys_path)
    user_keys = crypto.load_public_key_file(user_pub)
    fields = []
    plains = []
    for spec in identity_specs:
        descriptor, sep, data = spec.partition("=")
        if not sep:
            raise ValueError(f"--identity must look like descriptor=data, got {spec!r}")
        field_, plain = build_attribute(
            keypair.signing_public, user_keys.encryption,
            descriptor=descriptor.encode("utf-8"), data=data.encode("utf-8"), identity=True,
        )
        fields.append(field_)
        plains.append(plain)
    args = contract.encode_add_user_account_args(user_keys.signing, user_keys.encryption, fields)
    receipt = _run_transaction(chain_path, keys_path, Function.ADD_USER_ACCOUNT, args,
                               no_seal=no_seal, nonce=nonce,
                               gas_price=gas_price, ether_price=ether_price)
    if receipt is not None and save_plain is not None:
        for index, plain in enumerate(plains):
            save_plaintext_record(save_plain, user_keys.address, index, plain)
            emit("plain-saved", account=user_keys.address, index=index)


@manager.command("delete-user")
@chain_option
@keys_option
@click.option("--user", "user_address", required=True, help="User address (hex).")
@tx_options
@guarded
def manager_delete_user(chain_path, keys_path, user_address,
                        no_seal, nonce, gas_price, ether_price):
    args = contract.encode_delete_user_account_args(_parse_address(user_address))
    _run_transaction(chain_path, keys_path, Function.DELETE_USER_ACCOUNT, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


def _add_attribute_command(chain_path, keys_path, user_address, descriptor, data, data_file,
                           identity, store_data, location, save_plain,
                           no_seal, nonce, gas_price, ether_price):
    keypair = crypto.load_private_key_file(keys_path)
    chain_obj = Chain.load(chain_path)
    target = _parse_address(user_address) if user_address else keypair.address
    try:
        _, user_encryption_key, _ = contract.view_public_key(chain_obj.state, target)
    except contract.ContractViewError as exc:
        emit("rejected", function=Function.ADD_ATTRIBUTE.value, reason=exc.code)
        sys.exit(EXIT_REJECTED)
    plaintext_data = _read_data(data, data_file)
    field_, plain = build_attribute(
        keypair.signing_public, user_encryption_key,
        descriptor=descriptor.encode("utf-8"), data=plaintext_data,
        identity=identity, include_data=store_data, location=location,
    )
    args = contract.encode_add_attribute_args(target, field_)
    receipt = _run_transaction(chain_path, keys_path, Function.ADD_ATTRIBUTE, args,
                               no_seal=no_seal, nonce=nonce,
                               gas_price=gas_price, ether_price=ether_price)
    if receipt is not None and save_plain is not None:
        save_plaintext_record(save_plain, target, receipt.result, plain)
        emit("plain-saved", account=target, index=receipt.result)


def attribute_payload_options(fn):
    fn = click.option("--descriptor", required=True, help="Plaintext descriptor.")(fn)
    fn = click.option("--data", default=None, help="Plaintext data (UTF-8).")(fn)
    fn = click.option("--data-file", type=click.Path(path_type=Path), default=None,
                      help="Plaintext data from a file (e.g. an image).")(fn)
    fn = click.option("--store-data/--no-store-data", default=True,
                      help="Whether the encrypted payload is stored in-record.")(fn)
    fn = click.option("--location", default=None, help="Off-ledger download location.")(fn)
    fn = click.option("--save-plain", type=click.Path(path_type=Path), default=None,
                      help="Directory receiving the plaintext record.")(fn)
    return fn


@manager.command("add-attribute")
@chain_option
@keys_option
@click.option("--user", "user_address", required=True, help="User address (hex).")
@attribute_payload_options
@click.option("--identity", is_flag=True, help="Mark as an identity attribute.")
@tx_options
@guarded
def manager_add_attribute(chain_path, keys_path, user_address, descriptor, data, data_file,
                          store_data, location, save_plain, identity,
                          no_seal, nonce, gas_price, ether_price):
    _add_attribute_command(chain_path, keys_path, user_address, descriptor, data, data_file,
                           identity, store_data, location, save_plain,
                           no_seal, nonce, gas_price, ether_price)


@manager.command("delete-attribute")
@chain_option
@keys_option
@click.option("--user", "user_address", required=True)
@click.option("--index", type=int, required=True)
@tx_options
@guarded
def manager_delete_attribute(chain_path, keys_path, user_address, index,
                             no_seal, nonce, gas_price, ether_price):
    args = contract.encode_delete_attribute_args(_parse_address(user_address), index)
    _run_transaction(chain_path, keys_path, Function.DELETE_ATTRIBUTE, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


# --- user commands ----------------------------------------------------------------------


@main.group()
def user():
    """User transactions and the connect client."""


@user.command("permit")
@chain_option
@keys_option
@click.option("--manager", "manager_address", required=True)
@tx_options
@guarded
def user_permit(chain_path, keys_path, manager_address, no_seal, nonce, gas_price, ether_price):
    args = contract.encode_permit_args(_parse_address(manager_address))
    _run_transaction(chain_path, keys_path, Function.PERMIT_ATTRIBUTE_MANAGER, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


@user.command("deny")
@chain_option
@keys_option
@click.option("--manager", "manager_address", required=True)
@tx_options
@guarded
def user_deny(chain_path, keys_path, manager_address, no_seal, nonce, gas_price, ether_price):
    args = contract.encode_deny_args(_parse_address(manager_address))
    _run_transaction(chain_path, keys_path, Function.DENY_ATTRIBUTE_MANAGER, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


@user.command("add-attribute")
@chain_option
@keys_option
@attribute_payload_options
@click.option("--identity", is_flag=True,
              help="Claim the identity flag (the contract will refuse).")
@tx_options
@guarded
def user_add_attribute(chain_path, keys_path, descriptor, data, data_file,
                       store_data, location, save_plain, identity,
                       no_seal, nonce, gas_price, ether_price):
    """Self-attest an attribute on one's own account."""
    _add_attribute_command(chain_path, keys_path, None, descriptor, data, data_file,
                           identity, store_data, location, save_plain,
                           no_seal, nonce, gas_price, ether_price)


@user.command("delete-attribute")
@chain_option
@keys_option
@click.option("--index", type=int, required=True)
@tx_options
@guarded
def user_delete_attribute(chain_path, keys_path, index, no_seal, nonce, gas_price, ether_price):
    keypair = crypto.load_private_key_file(keys_path)
    args = contract.encode_delete_attribute_args(keypair.address, index)
    _run_transaction(chain_path, keys_path, Function.DELETE_ATTRIBUTE, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


@user.command("delete-account")
@chain_option
@keys_option
@tx_options
@guarded
def user_delete_account(chain_path, keys_path, no_seal, nonce, gas_price, ether_price):
    keypair = crypto.load_private_key_file(keys_path)
    args = contract.encode_delete_user_account_args(keypair.address)
    _run_transaction(chain_path, keys_path, Function.DELETE_USER_ACCOUNT, args,
                     no_seal=no_seal, nonce=nonce, gas_price=gas_price, ether_price=ether_price)


@user.command("show-attribute")
@chain_option
@keys_option
@click.option("--index", type=int, required=True)
@guarded
def user_show_attribute(chain_path, keys_path, index):
    """Decrypt one of one's own attributes straight from a replica."""
    keypair = crypto.load_private_key_file(keys_path)
    replica = Chain.load(chain_path).replicate()
    try:
        stored = contract.view_attribute(replica, keypair.address, index)
    except contract.ContractViewError as exc:
        emit("rejected", function="view_attribute", reason=exc.code)
        sys.exit(EXIT_REJECTED)
    plain = decrypt_attribute(stored, keypair.encryption_private)
    emit("attribute", index=index,
         descriptor=plain.descriptor.decode("utf-8", errors="replace"),
         data="<off-ledger>" if plain.data is None else plain.data.decode("utf-8", errors="replace"),
         location=stored.location or "none",
         identity=stored.identity)


@user.command("connect")
@keys_option
@click.option("--rp", "rp_endpoint", required=True, help="host:port of the relying party.")
@click.option("--rp-pub", type=click.Path(path_type=Path), required=True,
              help="The relying party's public key file (known-hosts style).")
@click.option("--store", type=click.Path(path_type=Path), required=True,
              help="Directory of plaintext attribute records.")
@click.option("--attr", "attr_indices", multiple=True, type=int, required=True,
              help="Attribute index to present; repeatable.")
@guarded
def user_connect(keys_path, rp_endpoint, rp_pub, store, attr_indices):
    """Authenticate to a relying party and present the selected attributes."""
    keypair = crypto.load_private_key_file(keys_path)
    host, port = _parse_endpoint(rp_endpoint)
    rp_keys = crypto.load_public_key_file(rp_pub)
    presentations = [
        (index, load_plaintext_record(store, keypair.address, index)) for index in attr_indices
    ]
    outcomes = run_user_session(
        host, port, rp_keys.encryption, keypair.address, keypair, presentations,
        log=click.echo,
    )
    if not all(outcome.result.ok for outcome in outcomes):
        sys.exit(EXIT_PROTOCOL)


# --- relying-party daemon -----------------------------------------------------------------


@main.group()
def rp():
    """Relying-party service."""


@rp.command("serve")
@chain_option
@keys_option
@click.option("--listen", default="127.0.0.1:0", show_default=True, help="host:port to bind.")
@click.option("--require-descriptor", "required", multiple=True,
              help="Manager descriptor every verified attribute's source must carry.")
@click.option("--max-sessions", type=int, default=0, show_default=True,
              help="Stop after N sessions (0 = run until interrupted).")
@guarded
def rp_serve(chain_path, keys_path, listen, required, max_sessions):
    """Serve authentication and attribute verification from a replica snapshot."""
    keypair = crypto.load_private_key_file(keys_path)
    replica = Chain.load(chain_path).replicate()
    host, port = _parse_endpoint(listen)
    server = RelyingPartyServer(
        keypair, replica, host=host, port=port,
        required_descriptors=tuple(required), log=click.echo, max_sessions=max_sessions,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()


# --- cost table -------------------------------------------------------------------------------


_ROLE_BY_FUNCTION = {
    Function.ADD_MANAGER.value: "contract owner",
    Function.DELETE_MANAGER.value: "contract owner",
    Function.ADD_USER_ACCOUNT.value: "account manager",
    Function.DELETE_USER_ACCOUNT.value: "account manager",
    Function.ADD_ATTRIBUTE.value: "managers / users",
    Function.DELETE_ATTRIBUTE.value: "managers / users",
    Function.PERMIT_ATTRIBUTE_MANAGER.value: "users",
    Function.DENY_ATTRIBUTE_MANAGER.value: "users",
}


@main.command("costs")
@price_options
@guarded
def costs(gas_price: str, ether_price: str):
    """Print the per-function gas/Ether/USD table."""
    schedule = cost.default_schedule()
    gp, ep = Decimal(gas_price), Decimal(ether_price)
    header = f"{'Function':<26} {'Type':<12} {'Permitted Role':<18} {'Gas':>8} {'Ether':>9} {'USD':>7}"
    click.echo(header)
    click.echo("-" * len(header))
    for function in Function:
        report = cost.cost_report(function.value, schedule, gp, ep)
        click.echo(
            f"{function.value:<26} {'transaction':<12} {_ROLE_BY_FUNCTION[function.value]:<18} "
            f"{report.gas:>8} {cost.format_ether(report.ether):>9} {cost.format_usd(report.usd):>7}"
        )
    for view in contract.VIEW_FUNCTIONS:
        report = cost.cost_report(view, schedule, gp, ep)
        click.echo(
            f"{view:<26} {'view':<12} {'public':<18} "
            f"{report.gas:>8} {cost.format_ether(report.ether):>9} {cost.format_usd(report.usd):>7}"
        )


# --- scenario runner ----------------------------------------------------------------------------


@main.group("scenario")
def scenario_group():
    """Scripted end-to-end walkthroughs."""


@scenario_group.command("run")
@click.argument("name", type=click.Choice(scenario.SCENARIO_NAMES))
@click.option("--variant", type=click.Choice(scenario.VARIANTS), default=None,
              help="Deliberately break one rule and report where enforcement trips.")
@click.option("--workdir", type=click.Path(path_type=Path), default=None,
              help="Keep keys/chain/store here instead of a temp dir.")
@guarded
def scenario_run(name: str, variant: str | None, workdir: Path | None):
    """Run the named walkthrough; exit 0 iff every step's receipt succeeds."""
    result = scenario.run_corellia(workdir, variant=variant, log=click.echo)
    if not result.ok:
        sys.exit(EXIT_REJECTED)


if __name__ == "__main__":
    main()
