"""Back-end system: tariff publication, bill verification, ledger, bench.

Verification order is fixed and the verdict always names the first failed
check: signature, alignment, price bound, opening.  The price bound closes a
modular wraparound gap: the opening only constrains the price mod q, so
without an upper bound, price + q would verify as well.  With price < 2^64
and q > 2^192 the true sum(t*v) can never wrap.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import os
import statistics
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Sequence

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

from . import pedersen
from .group import GroupParams
from .privacy import BillingReport, Tariff
from .signing import verify_report_signature

PRICE_BOUND = 2**64

REASON_OK = "ok"
REASON_SIGNATURE = "signature-invalid"
REASON_ALIGNMENT = "alignment-mismatch"
REASON_PRICE_BOUND = "price-bound-exceeded"
REASON_OPENING = "opening-failed"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str


def aggregate_commitment(
    params: GroupParams, comm_column: Sequence[int], tariff: Tariff
) -> int:
    """COMM_Tariff: the tariff-weighted product of the commitment column."""
    return pedersen.fold_commitments(params, list(comm_column), list(tariff.rates))


def check_opening(
    params: GroupParams,
    comm_column: Sequence[int],
    tariff: Tariff,
    price: int,
    r_prime: int,
) -> bool:
    """The homomorphic opening alone (no signature); used by the ZK harness."""
    agg = aggregate_commitment(params, comm_column, tariff)
    return pedersen.open_commitment(params, agg, price, r_prime)


def verify_billing(
    params: GroupParams,
    pubkey: Ed25519PublicKey,
    tariff: Tariff,
    report: BillingReport,
) -> Verdict:
    if not verify_report_signature(
        pubkey, params, report.i0, list(report.comm_column), report.sig
    ):
        return Verdict(False, REASON_SIGNATURE)
    if tariff.i0 != report.i0 or tariff.n != report.n:
        return Verdict(False, REASON_ALIGNMENT)
    if report.price < 0 or report.price >= PRICE_BOUND:
        return Verdict(False, REASON_PRICE_BOUND)
    if not check_opening(
        params, report.comm_column, tariff, report.price, report.r_prime
    ):
        return Verdict(False, REASON_OPENING)
    return Verdict(True, REASON_OK)


class TariffStoreError(ValueError):
    pass


class TariffStore:
    """Published tariffs, immutable once served to a privacy component."""

    def __init__(self):
        self._tariffs: dict[tuple[str, int, int], Tariff] = {}
        self._served: set[tuple[str, int, int]] = set()

    def publish(self, meter_id: str, tariff: Tariff) -> None:
        key = (meter_id, tariff.i0, tariff.n)
        if key in self._served and self._tariffs[key].rates != tariff.rates:
            raise TariffStoreError(f"tariff for {key} already served; immutable")
        self._tariffs[key] = tariff

    def serve(self, meter_id: str, i0: int, n: int) -> Tariff:
        key = (meter_id, i0, n)
        try:
            tariff = self._tariffs[key]
        except KeyError:
            raise TariffStoreError(f"no tariff published for {key}") from None
        self._served.add(key)
        return tariff


@dataclass(frozen=True)
class LedgerRecord:
    """One verification outcome; the schema has no plaintext consumption slots."""

    meter_id: str
    i0: int
    n: int
    price: int
    r_prime_hex: str
    comm_digest: str
    sig_hex: str
    accepted: bool
    reason: str
    timestamp: float


def comm_column_digest(params: GroupParams, comm_column: Sequence[int]) -> str:
    h = hashlib.sha256()
    for c in comm_column:
        h.update(params.encode_element(c))
    return h.hexdigest()


def make_record(
    params: GroupParams, report: BillingReport, verdict: Verdict
) -> LedgerRecord:
    return LedgerRecord(
        meter_id=report.meter_id,
        i0=report.i0,
        n=report.n,
        price=report.price,
        r_prime_hex=params.encode_scalar(report.r_prime).hex(),
        comm_digest=comm_column_digest(params, report.comm_column),
        sig_hex=report.sig.hex(),
        accepted=verdict.accepted,
        reason=verdict.reason,
        timestamp=time.time(),
    )


class BillingLedger:
    """Append-only line-delimited JSON ledger, durable across restarts."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: LedgerRecord) -> None:
        if not isinstance(record, LedgerRecord):
            raise TypeError("ledger accepts LedgerRecord instances only")
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(asdict(record)) + "\n")
            # A bill record must survive a crash, not just a clean restart.
            fh.flush()
            os.fsync(fh.fileno())

    def records(self) -> Iterator[LedgerRecord]:
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                yield LedgerRecord(**json.loads(line))

    def duplicates(self) -> set[tuple[str, int]]:
        """(meter_id, i0) keys that appear more than once; both rows are kept."""
        seen: set[tuple[str, int]] = set()
        dups: set[tuple[str, int]] = set()
        for rec in self.records():
            key = (rec.meter_id, rec.i0)
            if key in seen:
                dups.add(key)
            seen.add(key)
        return dups


@dataclass(frozen=True)
class BenchSession:
    tariff: Tariff
    report: BillingReport


@dataclass(frozen=True)
class BenchResult:
    sessions: int
    verified: int
    accepted: int
    elapsed: float
    mean_s: float
    p50_s: float
    p90_s: float
    p99_s: float

    @property
    def per_second(self) -> float:
        return self.verified / self.elapsed if self.elapsed > 0 else float("inf")

    @property
    def per_day(self) -> float:
        return self.per_second * 86400


def _verify_chunk(
    params: GroupParams,
    pub_raw: bytes,
    chunk: list[BenchSession],
) -> tuple[list[float], int]:
    pubkey = Ed25519PublicKey.from_public_bytes(pub_raw)
    latencies = []
    accepted = 0
    for session in chunk:
        t0 = time.perf_counter()
        verdict = verify_billing(params, pubkey, session.tariff, session.report)
        latencies.append(time.perf_counter() - t0)
        if verdict.accepted:
            accepted += 1
    return latencies, accepted


def bench_verify(
    params: GroupParams,
    pubkey: Ed25519PublicKey,
    batch: Sequence[BenchSession],
    workers: int = 1,
    sampling_rate: float = 1.0,
    rng=None,
) -> BenchResult:
    """Wall-clock verification throughput over a pre-generated batch.

    sampling_rate < 1.0 verifies a random subset (spot-checking); unsampled
    sessions count as processed but not verified.
    """
    from cryptography.hazmat.primitives import serialization

    if not 0.0 < sampling_rate <= 1.0:
        raise ValueError("sampling_rate must be in (0, 1]")
    selected = list(batch)
    if sampling_rate < 1.0:
        import random as _random

        rng = rng or _random.SystemRandom()
        selected = [s for s in selected if rng.random() < sampling_rate]
    pub_raw = pubkey.public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    t_start = time.perf_counter()
    if workers <= 1 or not selected:
        latencies, accepted = _verify_chunk(params, pub_raw, selected)
    else:
        chunk_size = (len(selected) + workers - 1) // workers
        chunks = [
            selected[i : i + chunk_size] for i in range(0, len(selected), chunk_size)
        ]
        latencies = []
        accepted = 0
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for lat, acc in pool.map(
                _verify_chunk,
                [params] * len(chunks),
                [pub_raw] * len(chunks),
                chunks,
            ):
                latencies.extend(lat)
                accepted += acc
    elapsed = time.perf_counter() - t_start
    if latencies:
        ordered = sorted(latencies)
        mean = statistics.fmean(latencies)
        p50 = ordered[len(ordered) // 2]
        p90 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.9))]
        p99 = ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))]
    else:
        mean = p50 = p90 = p99 = 0.0
    return BenchResult(
        sessions=len(batch),
        verified=len(selected),
        accepted=accepted,
        elapsed=elapsed,
        mean_s=mean,
        p50_s=p50,
        p90_s=p90,
        p99_s=p99,
    )
