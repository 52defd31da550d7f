"""Relying-party network service and the matching user-side client.

The server holds an immutable replica snapshot and runs one session per
connection: outer handshake, account authentication, then a loop of
attribute presentations, each hash-verified and policy-checked.  Sessions
never touch the ledger; a replica loaded at startup answers everything
(so changes sealed after the snapshot are invisible until a reload, by
design).

Log lines are single-line ``event key=value ...`` records with stable
event names, for scraping by tests and operators.
"""

from __future__ import annotations

import socket
import threading
import time
from dataclasses import dataclass, field

from . import crypto, protocol
from .attributes import PlaintextAttribute
from .contract import ContractState
from .protocol import (
    AttributePackage,
    AuthorityDecision,
    ProtocolError,
    SessionClosed,
    SocketTransport,
    VerificationResult,
)


def event_line(event: str, **fields) -> str:
    """Render one scrape-friendly log line: ``event key=value key=value``."""
    parts = [event]
    for key, value in fields.items():
        if isinstance(value, bytes):
            rendered = value.hex()
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, str) and (" " in value or value == ""):
            rendered = repr(value)
        else:
            rendered = str(value)
        parts.append(f"{key}={rendered}")
    return " ".join(parts)


@dataclass
class SessionRecord:
    """What one served session did, kept for inspection."""

    account: bytes | None = None
    authenticated: bool = False
    error: str | None = None
    presentations: list[tuple[AttributePackage, VerificationResult, AuthorityDecision | None]] = field(
        default_factory=list
    )


class RelyingPartyServer:
    """Serve authentication + attribute-transfer sessions from a replica snapshot."""

    def __init__(
        self,
        rp_keypair: crypto.KeyPair,
        replica: ContractState,
        *,
        host: str = "127.0.0.1",
        port: int = 0,
        required_descriptors: tuple[str, ...] = (),
        log=None,
        clock=time.monotonic,
        max_sessions: int = 0,
    ):
        self.rp_keypair = rp_keypair
        self.replica = replica
        self.required_descriptors = list(required_descriptors)
        self.log = log or (lambda line: None)
        self.clock = clock
        self.max_sessions = max_sessions
        self.sessions: list[SessionRecord] = []
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._sock = socket.create_server((host, port))
        self._sock.settimeout(0.2)
        self.host, self.port = self._sock.getsockname()[:2]
        self._accept_thread: threading.Thread | None = None

    def serve_forever(self) -> None:
        """Accept sessions until stopped (or max_sessions served)."""
        served = 0
        self.log(event_line("serve-listening", host=self.host, port=self.port))
        try:
            while not self._stop.is_set():
                try:
                    conn, _addr = self._sock.accept()
                except socket.timeout:
                    continue
                except OSError:
                    break
                thread = threading.Thread(target=self._handle, args=(conn,), daemon=True)
                thread.start()
                self._threads.append(thread)
                served += 1
                if self.max_sessions and served >= self.max_sessions:
                    break
            for thread in self._threads:
                thread.join(timeout=5.0)
        finally:
            self._sock.close()
            self.log(event_line("serve-stopped", sessions=served))

    def start(self) -> None:
        """Serve on a background thread (tests and the scenario runner)."""
        self._accept_thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._accept_thread.start()

    def shutdown(self) -> None:
        self._stop.set()
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=10.0)

    def _handle(self, conn) -> None:
        record = SessionRecord()
        self.sessions.append(record)
        transport = SocketTransport(conn)
        try:
            session = protocol.accept_outer_channel(transport, self.rp_keypair, clock=self.clock)
            account = protocol.rp_authenticate(session, self.replica)
            record.account = account
            record.authenticated = True
            self.log(event_line("session-authenticated", account=account))
            while True:
                result, stored, package = protocol.rp_handle_attribute(session, self.replica)
                decision = None
                if result.ok and stored is not None:
                    decision = protocol.evaluate_manager_authority(
                        self.replica, stored.manager_public_key, self.required_descriptors
                    )
                    self.log(
                        event_line(
                            "attribute-verified",
                            account=account,
                            index=package.index,
                            identity=stored.identity,
                            manager=decision.manager_address,
                        )
                    )
                    self.log(
                        event_line(
                            "authority-decision",
                            manager=decision.manager_address,
                            valid=decision.manager_valid,
                            accepted=decision.accepted,
                            descriptors=",".join(decision.descriptors),
                        )
                    )
                else:
                    self.log(
                        event_line(
                            "attribute-rejected",
                            account=account,
                            index=package.index,
                            code=result.code,
                        )
                    )
                record.presentations.append((package, result, decision))
        except SessionClosed:
            pass  # peer finished; normal end of session
        except ProtocolError as exc:
            record.error = exc.code
            self.log(event_line("session-error", code=exc.code))
        finally:
            transport.close()


@dataclass(frozen=True)
class PresentationOutcome:
    index: int
    result: VerificationResult


def run_user_session(
    host: str,
    port: int,
    rp_encryption_public_key: bytes,
    account: bytes,
    user_keypair: crypto.KeyPair,
    presentations: list[tuple[int, PlaintextAttribute]],
    *,
    log=None,
) -> list[PresentationOutcome]:
    """Connect, authenticate, and present the selected attributes in order.

    Opens exactly one connection; raises ProtocolError if authentication
    fails.  Per-attribute rejections come back in the outcomes, they do not
    abort the session.
    """
    log = log or (lambda line: None)
    sock = socket.create_connection((host, port))
    transport = SocketTransport(sock)
    outcomes: list[PresentationOutcome] = []
    try:
        session = protocol.open_outer_channel(transport, rp_encryption_public_key)
        protocol.user_authenticate(session, account, user_keypair)
        log(event_line("client-authenticated", account=account))
        for index, plain in presentations:
            if plain.data is None or plain.nonce is None:
                raise ValueError(f"plaintext record for index {index} is incomplete")
            package = AttributePackage(
                account=account,
                index=index,
                descriptor=plain.descriptor,
                data=plain.data,
                nonce=plain.nonce,
            )
            result = protocol.send_attribute(session, package)
            outcomes.append(PresentationOutcome(index=index, result=result))
            log(event_line("client-attribute", index=index, ok=result.ok, code=result.code))
        protocol.close_session(session)
    finally:
        transport.close()
    return outcomes
