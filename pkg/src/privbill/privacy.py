"""Privacy component: computes the bill locally and strips the plaintext.

The PC sits between meter and back-end.  From an intercepted commitment
report and the published tariff it computes the exact price (an unbounded
integer, never reduced) and the aggregate blinding r' = sum(t_k * r_k) mod q,
then forwards only (i0, price, r', COMM, SIG).  The consumption and blinding
columns exist in transient memory here and in no output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from . import pedersen
from .group import GroupParams
from .metering import MAX_VALUE, CommitmentReport

logger = logging.getLogger(__name__)


class AlignmentError(ValueError):
    """Tariff does not line up with the report's interval range."""


class TariffError(ValueError):
    """Malformed tariff data."""


@dataclass(frozen=True)
class Tariff:
    """Per-interval prices aligned to interval indices starting at i0."""

    i0: int
    rates: tuple[int, ...]

    def __post_init__(self):
        if self.i0 < 0:
            raise TariffError("i0 must be non-negative")
        if len(self.rates) < 1:
            raise TariffError("tariff must cover at least one interval")
        for t in self.rates:
            if not isinstance(t, int) or t < 0 or t >= MAX_VALUE:
                raise TariffError(f"tariff rate out of range: {t!r}")

    @property
    def n(self) -> int:
        return len(self.rates)


@dataclass(frozen=True)
class BillingReport:
    """PC output: (i0, price, r', COMM, SIG); no plaintext slots exist."""

    meter_id: str
    i0: int
    price: int
    r_prime: int
    comm_column: tuple[int, ...]
    sig: bytes

    @property
    def n(self) -> int:
        return len(self.comm_column)


def _check_alignment(i0: int, n: int, tariff: Tariff) -> None:
    if tariff.i0 != i0:
        raise AlignmentError(f"tariff starts at {tariff.i0}, report at {i0}")
    if tariff.n != n:
        raise AlignmentError(f"tariff has {tariff.n} rates, report has {n} rows")


def compute_price(values: Sequence[int], tariff: Tariff, i0: int | None = None) -> int:
    """Exact dot product sum(t_k * v_k); no modular reduction."""
    if i0 is not None and tariff.i0 != i0:
        raise AlignmentError(f"tariff starts at {tariff.i0}, profile at {i0}")
    if len(values) != tariff.n:
        raise AlignmentError("value and tariff vectors differ in length")
    return sum(t * v for t, v in zip(tariff.rates, values))


def compute_r_prime(params: GroupParams, randomness: Sequence[int], tariff: Tariff) -> int:
    """Aggregate blinding sum(t_k * r_k) mod q."""
    if len(randomness) != tariff.n:
        raise AlignmentError("randomness and tariff vectors differ in length")
    acc = 0
    for t, r in zip(tariff.rates, randomness):
        acc = (acc + t * r) % params.q
    return acc


def transform_report(
    params: GroupParams,
    report: CommitmentReport,
    tariff: Tariff,
    verify_openings: bool = True,
) -> BillingReport:
    """Strip the plaintext columns and attach (price, r').

    The commitment column and signature pass through byte-identical.  Row
    openings are checked as a self-diagnostic; the PC is untrusted and has
    no authority to block, so a failure is logged, not raised.
    """
    _check_alignment(report.i0, report.n, tariff)
    if verify_openings:
        for row in report.rows:
            if not pedersen.open_commitment(
                params, row.commitment, row.value, row.randomness
            ):
                logger.warning(
                    "report %s interval %d: commitment does not open; forwarding anyway",
                    report.meter_id,
                    row.interval,
                )
    price = compute_price(report.values, tariff, i0=report.i0)
    r_prime = compute_r_prime(params, report.randomness, tariff)
    return BillingReport(
        meter_id=report.meter_id,
        i0=report.i0,
        price=price,
        r_prime=r_prime,
        comm_column=report.comm_column,
        sig=report.sig,
    )
