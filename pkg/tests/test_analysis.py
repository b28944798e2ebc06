import itertools
import random
from collections import Counter

import pytest

from privbill.analysis import (
    EXPECTED_REASON,
    MUTATION_TARGETS,
    chi_squared_two_sample,
    honest_session,
    mutate_session,
    profile_with_price,
    simulate_view,
    view_accepted,
)
from privbill.backend import check_opening, verify_billing
from privbill.metering import build_report
from privbill.privacy import Tariff, compute_price, transform_report


def test_honest_session_verifies(test_params, meter_keys, rng):
    session = honest_session(test_params, meter_keys, rng, n=4)
    verdict = verify_billing(
        test_params, meter_keys.public_key, session.tariff, session.billing
    )
    assert verdict.accepted


def test_nonzero_blinding_avoids_identity(test_params, meter_keys, rng):
    for _ in range(20):
        session = honest_session(
            test_params, meter_keys, rng, n=3, nonzero_blinding=True
        )
        assert test_params.identity not in session.report.comm_column


@pytest.mark.parametrize("target", MUTATION_TARGETS)
def test_each_mutation_class_rejected_with_expected_reason(
    test_params, meter_keys, rng, target
):
    for _ in range(10):
        session = honest_session(
            test_params, meter_keys, rng, n=3, nonzero_blinding=True
        )
        tampered = mutate_session(test_params, session, target, rng)
        verdict = verify_billing(
            test_params, meter_keys.public_key, session.tariff, tampered
        )
        assert not verdict.accepted
        assert verdict.reason == EXPECTED_REASON[target]


def test_mutation_changes_exactly_one_field(test_params, meter_keys, rng):
    session = honest_session(test_params, meter_keys, rng, n=3, nonzero_blinding=True)
    tampered = mutate_session(test_params, session, "price", rng)
    assert tampered.price != session.billing.price
    assert tampered.r_prime == session.billing.r_prime
    assert tampered.comm_column == session.billing.comm_column
    assert tampered.sig == session.billing.sig
    assert tampered.i0 == session.billing.i0


def test_mutation_rejects_null_deltas(test_params, meter_keys, rng):
    session = honest_session(test_params, meter_keys, rng, n=2, nonzero_blinding=True)
    with pytest.raises(ValueError):
        mutate_session(test_params, session, "price", rng, delta=11)
    with pytest.raises(ValueError):
        mutate_session(test_params, session, "i0", rng, delta=0)
    with pytest.raises(ValueError):
        mutate_session(test_params, session, "bogus", rng)


def test_simulated_view_passes_opening_check(test_params, rng):
    tariff = Tariff(i0=0, rates=(2, 3))
    view = simulate_view(test_params, tariff, price=12, rng=rng)
    assert view_accepted(test_params, tariff, view)


def test_simulated_view_exhaustive_over_seeds(test_params):
    # n=2, T=[2,3], price=12: accepted for every seed
    tariff = Tariff(i0=0, rates=(2, 3))
    for seed in range(200):
        view = simulate_view(test_params, tariff, 12, random.Random(seed))
        assert view_accepted(test_params, tariff, view)


def test_simulator_pivots_past_noninvertible_rate(test_params, rng):
    # rate 11 = 0 mod 11 is not invertible; pivot must move to index 1
    tariff = Tariff(i0=0, rates=(11, 3))
    for _ in range(50):
        view = simulate_view(test_params, tariff, 7, rng)
        assert view_accepted(test_params, tariff, view)


def test_simulator_all_zero_tariff_special_case(test_params, rng):
    tariff = Tariff(i0=0, rates=(0, 11))  # both 0 mod 11
    view = simulate_view(test_params, tariff, price=0, rng=rng)
    assert view_accepted(test_params, tariff, view)
    view = simulate_view(test_params, tariff, price=22, rng=rng)  # 0 mod q
    assert view_accepted(test_params, tariff, view)
    with pytest.raises(ValueError):
        simulate_view(test_params, tariff, price=5, rng=rng)


def test_profile_with_price_hits_price(test_params, rng):
    tariff = Tariff(i0=0, rates=(2, 3, 5))
    for _ in range(50):
        profile = profile_with_price(test_params, tariff, 7, rng)
        assert compute_price(profile.values, tariff) % 11 == 7


def test_view_distributions_match_smoke(test_params, meter_keys):
    # Small-sample version of the acceptance ZK check.
    rng = random.Random(2024)
    tariff = Tariff(i0=0, rates=(2, 3))
    price = 7
    trials = 4000
    real = Counter()
    simulated = Counter()
    for _ in range(trials):
        profile = profile_with_price(test_params, tariff, price, rng)
        report = build_report(test_params, meter_keys, profile, rng)
        billing = transform_report(test_params, report, tariff, verify_openings=False)
        real[(billing.comm_column[0], billing.r_prime)] += 1
        view = simulate_view(test_params, tariff, price, rng)
        simulated[(view.comm_column[0], view.r_prime)] += 1
    stat, p_value, dof = chi_squared_two_sample(real, simulated)
    assert dof == 11 * 11 - 1
    assert p_value > 0.001


def test_exhaustive_soundness_test_group(test_params, meter_keys):
    # every mutation class, all n in {1,2,3}, all indices/deltas
    rng = random.Random(99)
    q = test_params.q
    for n in (1, 2, 3):
        session = honest_session(
            test_params, meter_keys, rng, n=n, nonzero_blinding=True
        )
        cases = []
        for delta in range(1, q):
            cases.append(("price", None, delta))
            cases.append(("r_prime", None, delta))
        for k in range(n):
            cases.append(("comm", k, None))
            for delta in range(1, q):
                cases.append(("tariff_mismatch", k, delta))
        for delta in (-1, 1, 5):
            if session.billing.i0 + delta >= 0:
                cases.append(("i0", None, delta))
        for target, index, delta in cases:
            tampered = mutate_session(
                test_params, session, target, rng, index=index, delta=delta
            )
            verdict = verify_billing(
                test_params, meter_keys.public_key, session.tariff, tampered
            )
            assert not verdict.accepted, (n, target, index, delta)
            assert verdict.reason == EXPECTED_REASON[target], (n, target, index, delta)


def test_identity_commitment_mismatch_refused(test_params, meter_keys):
    # a session whose every commitment is the identity cannot host a
    # detectable tariff mismatch; the engine must refuse, not emit a dud
    from privbill.metering import ConsumptionProfile

    class ZeroRng:
        def randrange(self, q):
            return 0

    profile = ConsumptionProfile(i0=0, values=(0,))
    report = build_report(test_params, meter_keys, profile, ZeroRng())
    tariff = Tariff(i0=0, rates=(3,))
    billing = transform_report(test_params, report, tariff, verify_openings=False)
    from privbill.analysis import SessionTranscript

    session = SessionTranscript(
        profile=profile, tariff=tariff, report=report, billing=billing
    )
    with pytest.raises(ValueError):
        mutate_session(test_params, session, "tariff_mismatch", random.Random(0))
