"""Socket endpoints for the three protocol roles.

The privacy component is a visible proxy: the meter connects to it, it
connects onward to the back-end.  Links carry length-prefixed frames from
the wire module; no transport encryption (the privacy claim rests on column
stripping, link encryption is a deployment concern).
"""

from __future__ import annotations

import logging
import socket
import threading
import time

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from . import pedersen, wire
from .backend import (
    BillingLedger,
    TariffStore,
    TariffStoreError,
    Verdict,
    make_record,
    verify_billing,
)
from .group import GroupParams
from .metering import CommitmentReport
from .privacy import Tariff, transform_report
from .signing import verify_report_signature

logger = logging.getLogger(__name__)


class _Server:
    """Accept loop with one handler thread per connection."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_server((host, port))
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self):
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def _accept_loop(self):
        self._sock.settimeout(0.2)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._serve_conn, args=(conn,), daemon=True).start()

    def _serve_conn(self, conn: socket.socket):
        with conn:
            try:
                while True:
                    msg = wire.read_frame(conn)
                    if msg is None:
                        return
                    self.handle(conn, msg)
            except wire.WireError as exc:
                logger.warning("dropping connection: %s", exc)
            except OSError:
                pass

    def handle(self, conn: socket.socket, msg: wire.Message):  # pragma: no cover
        raise NotImplementedError

    def stop(self):
        self._stop.set()
        self._sock.close()
        if self._thread:
            self._thread.join(timeout=2)


class BackendServer(_Server):
    """Serves tariffs, verifies billing reports, records verdicts."""

    def __init__(
        self,
        params: GroupParams,
        pubkeys: dict[str, Ed25519PublicKey],
        store: TariffStore,
        ledger: BillingLedger,
        host: str = "127.0.0.1",
        port: int = 0,
    ):
        super().__init__(host, port)
        self.params = params
        self.pubkeys = pubkeys
        self.store = store
        self.ledger = ledger

    def handle(self, conn: socket.socket, msg: wire.Message):
        if isinstance(msg, wire.TariffRequest):
            try:
                tariff = self.store.serve(msg.meter_id, msg.i0, msg.n)
            except TariffStoreError as exc:
                wire.write_frame(
                    conn,
                    wire.VerdictMessage(
                        meter_id=msg.meter_id, i0=msg.i0, accepted=False, reason=str(exc)
                    ),
                )
                return
            wire.write_frame(
                conn,
                wire.TariffMessage(meter_id=msg.meter_id, i0=tariff.i0, rates=tariff.rates),
            )
            return
        if isinstance(msg, wire.ReportTable):
            verdict = self._handle_report(msg)
            wire.write_frame(
                conn,
                wire.VerdictMessage(
                    meter_id=msg.meter_id,
                    i0=msg.i0,
                    accepted=verdict.accepted,
                    reason=verdict.reason,
                ),
            )
            return
        logger.warning("unexpected message %s", type(msg).__name__)

    def _handle_report(self, table: wire.ReportTable) -> Verdict:
        pubkey = self.pubkeys.get(table.meter_id)
        if pubkey is None:
            return Verdict(False, f"unknown meter {table.meter_id!r}")
        mode = wire.detect_mode(table)
        if mode == wire.PRIVACY_FORM:
            billing = wire.table_to_billing(table)
            try:
                tariff = self.store.serve(billing.meter_id, billing.i0, billing.n)
            except TariffStoreError as exc:
                return Verdict(False, str(exc))
            verdict = verify_billing(self.params, pubkey, tariff, billing)
            self.ledger.append(make_record(self.params, billing, verdict))
            return verdict
        # Pass-through mode: no PC in the link, the full table arrived.  This
        # path is the non-private baseline; the plaintext is checked against
        # the commitments, never persisted.
        report = wire.table_to_report(table)
        if not verify_report_signature(
            pubkey, self.params, report.i0, list(report.comm_column), report.sig
        ):
            return Verdict(False, "signature-invalid")
        for row in report.rows:
            if not pedersen.open_commitment(
                self.params, row.commitment, row.value, row.randomness
            ):
                return Verdict(False, f"row {row.interval} does not open")
        return Verdict(True, "ok (pass-through)")


class PrivacyProxy(_Server):
    """Meter-facing proxy: transform incoming reports, forward to back-end."""

    def __init__(
        self,
        params: GroupParams,
        group_id: str,
        backend_addr: tuple[str, int],
        tariff_addr: tuple[str, int] | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        retry_delay: float = 0.5,
        max_retries: int = 20,
        pass_through: bool = False,
    ):
        super().__init__(host, port)
        self.params = params
        self.group_id = group_id
        self.backend_addr = backend_addr
        # Tariffs may come from a separate endpoint (e.g. over the Internet);
        # same request schema either way.
        self.tariff_addr = tariff_addr or backend_addr
        self.retry_delay = retry_delay
        self.max_retries = max_retries
        self.pass_through = pass_through
        self.verdicts: list[wire.VerdictMessage] = []

    def handle(self, conn: socket.socket, msg: wire.Message):
        if not isinstance(msg, wire.ReportTable):
            logger.warning("proxy ignoring %s", type(msg).__name__)
            return
        if self.pass_through:
            # Test-harness mode only: forwards the plaintext table. NOT private.
            outgoing = msg
        else:
            report = wire.table_to_report(msg)
            tariff = self.fetch_tariff(report.meter_id, report.i0, report.n)
            billing = transform_report(self.params, report, tariff)
            outgoing = wire.privacy_table(self.group_id, billing)
        verdict = self._forward(outgoing)
        self.verdicts.append(verdict)

    def fetch_tariff(self, meter_id: str, i0: int, n: int) -> Tariff:
        reply = self._exchange(
            self.tariff_addr, wire.TariffRequest(meter_id=meter_id, i0=i0, n=n)
        )
        if isinstance(reply, wire.VerdictMessage):
            raise TariffStoreError(reply.reason)
        if not isinstance(reply, wire.TariffMessage):
            raise wire.WireError("unexpected reply to tariff request")
        if reply.i0 != i0 or len(reply.rates) != n:
            raise TariffStoreError(
                f"served tariff range ({reply.i0}, {len(reply.rates)}) "
                f"does not match requested ({i0}, {n})"
            )
        return Tariff(i0=reply.i0, rates=reply.rates)

    def _forward(self, table: wire.ReportTable) -> wire.VerdictMessage:
        reply = self._exchange(self.backend_addr, table)
        if not isinstance(reply, wire.VerdictMessage):
            raise wire.WireError("unexpected reply to report")
        return reply

    def _exchange(self, addr: tuple[str, int], msg: wire.Message) -> wire.Message:
        # Reports are never dropped silently: retry with delay until the
        # back-end answers or the retry budget is exhausted.
        last_exc: Exception | None = None
        for _ in range(self.max_retries):
            try:
                with socket.create_connection(addr, timeout=5) as sock:
                    wire.write_frame(sock, msg)
                    reply = wire.read_frame(sock)
                    if reply is None:
                        raise wire.WireError("peer closed without replying")
                    return reply
            except (OSError, wire.WireError) as exc:
                last_exc = exc
                time.sleep(self.retry_delay)
        raise ConnectionError(f"back-end unreachable after retries: {last_exc}")


def send_report(
    group_id: str, report: CommitmentReport, addr: tuple[str, int]
) -> None:
    """Meter side: push one meter-form report table to the given endpoint."""
    table = wire.meter_table(group_id, report)
    with socket.create_connection(addr, timeout=5) as sock:
        wire.write_frame(sock, table)
