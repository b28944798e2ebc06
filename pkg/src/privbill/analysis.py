"""Security-property harnesses: honest sessions, tampering, ZK simulation.

The simulator builds the verifier's view (COMM, r') from the public price
and tariff alone, with no access to consumption values or blindings.  The
meter signature is deliberately not simulated: it is produced by the meter,
not the privacy component, so the zero-knowledge harness runs against the
homomorphic opening check only.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from . import pedersen
from .backend import (
    REASON_OPENING,
    REASON_SIGNATURE,
    check_opening,
)
from .group import GroupParams
from .metering import ConsumptionProfile, CommitmentReport, build_report
from .privacy import BillingReport, Tariff, transform_report
from .signing import MeterKeypair

MUTATION_TARGETS = ("price", "r_prime", "comm", "i0", "tariff_mismatch")

EXPECTED_REASON = {
    "price": REASON_OPENING,
    "r_prime": REASON_OPENING,
    "tariff_mismatch": REASON_OPENING,
    "comm": REASON_SIGNATURE,
    "i0": REASON_SIGNATURE,
}


@dataclass(frozen=True)
class SessionTranscript:
    """Everything one honest protocol run produced, plaintexts included."""

    profile: ConsumptionProfile
    tariff: Tariff
    report: CommitmentReport
    billing: BillingReport


def honest_session(
    params: GroupParams,
    keys: MeterKeypair,
    rng: random.Random,
    n: int,
    i0: int = 0,
    max_value: int = 1000,
    max_rate: int = 100,
    nonzero_blinding: bool = False,
) -> SessionTranscript:
    """Random profile and tariff run honestly through meter and PC.

    nonzero_blinding forces every commitment away from the identity element,
    which the exhaustive tamper suite needs: scaling an identity commitment
    by a different tariff rate is undetectable by design (it commits to the
    same value either way).
    """
    values = tuple(rng.randint(0, max_value) for _ in range(n))
    profile = ConsumptionProfile(i0=i0, values=values)
    report = build_report(params, keys, profile, rng)
    if nonzero_blinding:
        while any(c == params.identity for c in report.comm_column):
            report = build_report(params, keys, profile, rng)
    tariff = Tariff(i0=i0, rates=tuple(rng.randint(0, max_rate) for _ in range(n)))
    billing = transform_report(params, report, tariff, verify_openings=False)
    return SessionTranscript(profile=profile, tariff=tariff, report=report, billing=billing)


def mutate_session(
    params: GroupParams,
    session: SessionTranscript,
    target: str,
    rng: random.Random,
    index: int | None = None,
    delta: int | None = None,
) -> BillingReport:
    """Tamper exactly one field of the honest transcript's billing report.

    Mutations are chosen to actually change the verified relation: scalar
    deltas are nonzero mod q, replacement commitments differ from the
    original, and tariff mismatches pivot on a non-identity commitment.
    """
    billing = session.billing
    q = params.q
    if target == "price":
        # Default deltas stay small so the forged bill passes the plausibility
        # bound and it is the opening check that has to catch it.
        d = delta if delta is not None else rng.randrange(1, min(q, 1 << 32))
        if d % q == 0:
            raise ValueError("price delta must be nonzero mod q")
        new_price = billing.price + d
        return replace(billing, price=new_price)
    if target == "r_prime":
        d = delta if delta is not None else rng.randrange(1, q)
        if d % q == 0:
            raise ValueError("r_prime delta must be nonzero mod q")
        return replace(billing, r_prime=(billing.r_prime + d) % q)
    if target == "comm":
        k = index if index is not None else rng.randrange(billing.n)
        old = billing.comm_column[k]
        new = old
        while new == old:
            new = params.exp(params.g, rng.randrange(q))
        column = list(billing.comm_column)
        column[k] = new
        return replace(billing, comm_column=tuple(column))
    if target == "i0":
        d = delta if delta is not None else 1
        if d == 0:
            raise ValueError("i0 delta must be nonzero")
        new_i0 = billing.i0 + d
        if new_i0 < 0:
            new_i0 = billing.i0 + 1
        return replace(billing, i0=new_i0)
    if target == "tariff_mismatch":
        # PC prices the profile under a tariff that differs in one rate from
        # the one the back-end published; COMM and SIG stay honest.
        usable = [
            k
            for k in range(session.report.n)
            if session.report.comm_column[k] != params.identity
        ]
        if not usable:
            raise ValueError("no non-identity commitment to pivot the mismatch on")
        k = index if index is not None else rng.choice(usable)
        if session.report.comm_column[k] == params.identity:
            raise ValueError("mismatch at an identity commitment is undetectable")
        rate = session.tariff.rates[k]
        d = delta if delta is not None else rng.randrange(1, min(q, (1 << 32) - rate))
        if d % q == 0:
            raise ValueError("rate delta must be nonzero mod q")
        rates = list(session.tariff.rates)
        rates[k] = rates[k] + d
        shadow_tariff = Tariff(i0=session.tariff.i0, rates=tuple(rates))
        return transform_report(
            params, session.report, shadow_tariff, verify_openings=False
        )
    raise ValueError(f"unknown mutation target {target!r}")


@dataclass(frozen=True)
class SimulatedView:
    """A verifier view built from public data only."""

    comm_column: tuple[int, ...]
    r_prime: int
    price: int


def simulate_view(
    params: GroupParams, tariff: Tariff, price: int, rng: random.Random
) -> SimulatedView:
    """Sample (COMM, r') so the opening check accepts, without any plaintexts.

    All commitments but one are uniform group elements and r' is a uniform
    scalar; the remaining commitment is solved from the opening equation,
    pivoting on the lowest-index tariff rate that is invertible mod q.
    """
    q = params.q
    n = tariff.n
    pivot = next((k for k in range(n) if tariff.rates[k] % q != 0), None)
    if pivot is None:
        # Every rate vanishes mod q: the aggregate is forced to the identity,
        # so only a price that is 0 mod q has any consistent view.
        if price % q != 0:
            raise ValueError("all-zero tariff admits no view for a nonzero price")
        comms = tuple(params.exp(params.g, rng.randrange(q)) for _ in range(n))
        return SimulatedView(comm_column=comms, r_prime=0, price=price)
    r_prime = rng.randrange(q)
    comms = [params.exp(params.g, rng.randrange(q)) for _ in range(n)]
    target = pedersen.commit(params, price, r_prime)
    others = params.identity
    for k in range(n):
        if k != pivot:
            others = params.mul(others, params.exp(comms[k], tariff.rates[k]))
    t_inv = params.scalar_inv(tariff.rates[pivot])
    comms[pivot] = params.exp(params.mul(target, params.inv(others)), t_inv)
    return SimulatedView(comm_column=tuple(comms), r_prime=r_prime, price=price)


def profile_with_price(
    params: GroupParams, tariff: Tariff, price: int, rng: random.Random
) -> ConsumptionProfile:
    """Random profile whose tariff-weighted sum is `price` mod q (test groups).

    Used by the distribution harness to draw honest runs at a fixed public
    price: free values are uniform, one pivot value absorbs the constraint.
    """
    q = params.q
    n = tariff.n
    pivot = next((k for k in range(n) if tariff.rates[k] % q != 0), None)
    if pivot is None:
        if price % q != 0:
            raise ValueError("all-zero tariff cannot hit a nonzero price")
        return ConsumptionProfile(
            i0=tariff.i0, values=tuple(rng.randrange(q) for _ in range(n))
        )
    values = [rng.randrange(q) for _ in range(n)]
    partial = sum(tariff.rates[k] * values[k] for k in range(n) if k != pivot)
    values[pivot] = ((price - partial) * params.scalar_inv(tariff.rates[pivot])) % q
    return ConsumptionProfile(i0=tariff.i0, values=tuple(values))


def view_accepted(
    params: GroupParams, tariff: Tariff, view: SimulatedView
) -> bool:
    """Run the back-end's opening check (signature skipped) on a view."""
    return check_opening(params, view.comm_column, tariff, view.price, view.r_prime)


def chi_squared_two_sample(
    counts_a: dict, counts_b: dict
) -> tuple[float, float, int]:
    """Two-sample chi-squared over the union of observed cells.

    Returns (statistic, p_value, degrees_of_freedom).
    """
    from scipy.stats import chi2

    cells = sorted(set(counts_a) | set(counts_b), key=repr)
    total_a = sum(counts_a.values())
    total_b = sum(counts_b.values())
    stat = 0.0
    used = 0
    for cell in cells:
        a = counts_a.get(cell, 0)
        b = counts_b.get(cell, 0)
        if a + b == 0:
            continue
        used += 1
        # Standard two-sample formula with sample-size weighting.
        k1 = math.sqrt(total_b / total_a)
        k2 = math.sqrt(total_a / total_b)
        stat += (k1 * a - k2 * b) ** 2 / (a + b)
    dof = used - 1
    p_value = float(chi2.sf(stat, dof)) if dof > 0 else 1.0
    return stat, p_value, dof
