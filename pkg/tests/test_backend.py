import random
from dataclasses import replace

import pytest

from privbill.analysis import honest_session
from privbill.backend import (
    PRICE_BOUND,
    REASON_ALIGNMENT,
    REASON_OK,
    REASON_OPENING,
    REASON_PRICE_BOUND,
    REASON_SIGNATURE,
    BenchSession,
    BillingLedger,
    LedgerRecord,
    TariffStore,
    TariffStoreError,
    aggregate_commitment,
    bench_verify,
    comm_column_digest,
    make_record,
    verify_billing,
)
from privbill.metering import ConsumptionProfile, build_report
from privbill.privacy import BillingReport, Tariff, transform_report


@pytest.fixture
def golden_billing(test_params, meter_keys):
    from test_metering import ForcedRng

    profile = ConsumptionProfile(i0=0, values=(3, 2))
    report = build_report(test_params, meter_keys, profile, ForcedRng([5, 1]))
    tariff = Tariff(i0=0, rates=(2, 3))
    return tariff, transform_report(test_params, report, tariff)


def test_verify_golden_accepts(test_params, meter_keys, golden_billing):
    tariff, billing = golden_billing
    assert billing.price == 12 and billing.r_prime == 2
    # COMM_Tariff = 6^2 * 6^3 = 6^5 = 2 mod 23
    assert aggregate_commitment(test_params, billing.comm_column, tariff) == 2
    verdict = verify_billing(test_params, meter_keys.public_key, tariff, billing)
    assert verdict.accepted and verdict.reason == REASON_OK


def test_verify_rejects_wrong_price(test_params, meter_keys, golden_billing):
    tariff, billing = golden_billing
    verdict = verify_billing(
        test_params, meter_keys.public_key, tariff, replace(billing, price=13)
    )
    assert not verdict.accepted and verdict.reason == REASON_OPENING


def test_verify_rejects_swapped_commitment_at_signature(
    test_params, meter_keys, golden_billing
):
    from privbill.pedersen import commit

    tariff, billing = golden_billing
    column = (commit(test_params, 99, 1), billing.comm_column[1])
    verdict = verify_billing(
        test_params, meter_keys.public_key, tariff, replace(billing, comm_column=column)
    )
    assert not verdict.accepted and verdict.reason == REASON_SIGNATURE


def test_verify_rejects_misalignment(test_params, meter_keys, golden_billing):
    _, billing = golden_billing
    long_tariff = Tariff(i0=0, rates=(2, 3, 4))
    verdict = verify_billing(test_params, meter_keys.public_key, long_tariff, billing)
    assert not verdict.accepted and verdict.reason == REASON_ALIGNMENT
    shifted = Tariff(i0=1, rates=(2, 3))
    verdict = verify_billing(test_params, meter_keys.public_key, shifted, billing)
    assert not verdict.accepted and verdict.reason == REASON_ALIGNMENT


def test_verify_rejects_price_over_bound(test_params, meter_keys, golden_billing):
    tariff, billing = golden_billing
    # price + k*q wraps to the same residue; the bound closes that gap.
    wrapped = replace(billing, price=billing.price + ((PRICE_BOUND // 11) + 1) * 11)
    verdict = verify_billing(test_params, meter_keys.public_key, tariff, wrapped)
    assert not verdict.accepted and verdict.reason == REASON_PRICE_BOUND


def test_verification_matches_plaintext_recomputation(prod_params, meter_keys):
    # Independent recomputation from plaintexts (harness-only knowledge).
    from privbill.pedersen import commit

    rng = random.Random(77)
    session = honest_session(prod_params, meter_keys, rng, n=8)
    agg = aggregate_commitment(prod_params, session.billing.comm_column, session.tariff)
    x = sum(t * v for t, v in zip(session.tariff.rates, session.profile.values))
    r = sum(
        t * r_k for t, r_k in zip(session.tariff.rates, session.report.randomness)
    )
    assert agg == commit(prod_params, x % prod_params.q, r % prod_params.q)
    assert session.billing.price == x


def test_tariff_store_round_trip():
    store = TariffStore()
    tariff = Tariff(i0=0, rates=(1, 2, 3))
    store.publish("m1", tariff)
    assert store.serve("m1", 0, 3) == tariff


def test_tariff_store_unknown_range():
    with pytest.raises(TariffStoreError):
        TariffStore().serve("m1", 0, 3)


def test_tariff_store_immutable_after_serve():
    store = TariffStore()
    store.publish("m1", Tariff(i0=0, rates=(1, 2)))
    store.serve("m1", 0, 2)
    with pytest.raises(TariffStoreError):
        store.publish("m1", Tariff(i0=0, rates=(9, 9)))
    # republishing identical rates is harmless
    store.publish("m1", Tariff(i0=0, rates=(1, 2)))


def test_ledger_durable_across_restart(tmp_path, test_params, meter_keys, golden_billing):
    tariff, billing = golden_billing
    verdict = verify_billing(test_params, meter_keys.public_key, tariff, billing)
    path = tmp_path / "ledger.jsonl"
    BillingLedger(path).append(make_record(test_params, billing, verdict))
    reread = list(BillingLedger(path).records())
    assert len(reread) == 1
    rec = reread[0]
    assert rec.accepted and rec.price == 12
    assert rec.comm_digest == comm_column_digest(test_params, billing.comm_column)


def test_ledger_schema_has_no_plaintext_fields():
    from dataclasses import fields

    names = {f.name for f in fields(LedgerRecord)}
    assert not names & {"values", "randomness", "v", "r", "profile"}
    with pytest.raises(TypeError):
        LedgerRecord(
            meter_id="m",
            i0=0,
            n=1,
            price=1,
            r_prime_hex="00",
            comm_digest="",
            sig_hex="",
            accepted=True,
            reason="ok",
            timestamp=0.0,
            values=(1,),  # no such slot
        )


def test_ledger_rejects_non_record(tmp_path):
    ledger = BillingLedger(tmp_path / "l.jsonl")
    with pytest.raises(TypeError):
        ledger.append({"meter_id": "m"})


def test_ledger_keeps_duplicates_and_flags_them(
    tmp_path, test_params, meter_keys, golden_billing
):
    tariff, billing = golden_billing
    verdict = verify_billing(test_params, meter_keys.public_key, tariff, billing)
    ledger = BillingLedger(tmp_path / "l.jsonl")
    ledger.append(make_record(test_params, billing, verdict))
    ledger.append(make_record(test_params, billing, verdict))
    assert len(list(ledger.records())) == 2
    assert ledger.duplicates() == {(billing.meter_id, billing.i0)}


def test_bench_verify_basics(test_params, meter_keys):
    rng = random.Random(1)
    batch = []
    for _ in range(20):
        session = honest_session(test_params, meter_keys, rng, n=4)
        batch.append(BenchSession(tariff=session.tariff, report=session.billing))
    result = bench_verify(test_params, meter_keys.public_key, batch, workers=1)
    assert result.verified == 20 and result.accepted == 20
    assert result.per_second > 0
    assert result.p50_s <= result.p99_s


def test_bench_sampling_rate(test_params, meter_keys):
    rng = random.Random(2)
    batch = []
    for _ in range(50):
        session = honest_session(test_params, meter_keys, rng, n=2)
        batch.append(BenchSession(tariff=session.tariff, report=session.billing))
    result = bench_verify(
        test_params, meter_keys.public_key, batch, sampling_rate=0.3, rng=rng
    )
    assert result.sessions == 50
    assert result.verified < 50
    with pytest.raises(ValueError):
        bench_verify(test_params, meter_keys.public_key, batch, sampling_rate=0.0)


def test_bench_multiprocess_workers(test_params, meter_keys):
    rng = random.Random(3)
    batch = []
    for _ in range(12):
        session = honest_session(test_params, meter_keys, rng, n=2)
        batch.append(BenchSession(tariff=session.tariff, report=session.billing))
    result = bench_verify(test_params, meter_keys.public_key, batch, workers=2)
    assert result.verified == 12 and result.accepted == 12
