import time

import pytest

from privbill import net, wire
from privbill.backend import BillingLedger, TariffStore
from privbill.metering import ConsumptionProfile, build_report
from privbill.privacy import Tariff


@pytest.fixture
def backend(test_params, meter_keys, tmp_path):
    store = TariffStore()
    store.publish("meter-0001", Tariff(i0=0, rates=(2, 3)))
    server = net.BackendServer(
        test_params,
        {"meter-0001": meter_keys.public_key},
        store,
        BillingLedger(tmp_path / "ledger.jsonl"),
    )
    server.start()
    yield server
    server.stop()


@pytest.fixture
def proxy(test_params, backend):
    p = net.PrivacyProxy(
        test_params, "mod23", backend.address, retry_delay=0.05, max_retries=5
    )
    p.start()
    yield p
    p.stop()


def _golden_report(test_params, meter_keys):
    from test_metering import ForcedRng

    profile = ConsumptionProfile(i0=0, values=(3, 2))
    return build_report(test_params, meter_keys, profile, ForcedRng([5, 1]))


def _wait_for(predicate, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(0.02)
    return False


def test_full_billing_cycle_over_sockets(test_params, meter_keys, backend, proxy):
    report = _golden_report(test_params, meter_keys)
    net.send_report("mod23", report, proxy.address)
    assert _wait_for(lambda: proxy.verdicts)
    verdict = proxy.verdicts[0]
    assert verdict.accepted, verdict.reason
    records = list(backend.ledger.records())
    assert len(records) == 1
    assert records[0].accepted and records[0].price == 12


def test_ledger_bytes_contain_no_plaintext(test_params, meter_keys, backend, proxy):
    report = _golden_report(test_params, meter_keys)
    net.send_report("mod23", report, proxy.address)
    assert _wait_for(lambda: list(backend.ledger.records()))
    raw = backend.ledger.path.read_text()
    for field in ("values", "randomness"):
        assert field not in raw


def test_proxy_fetch_tariff_validates_range(test_params, backend, proxy):
    tariff = proxy.fetch_tariff("meter-0001", 0, 2)
    assert tariff == Tariff(i0=0, rates=(2, 3))
    with pytest.raises(Exception):
        proxy.fetch_tariff("meter-0001", 50, 2)  # unpublished range


def test_proxy_buffers_until_backend_up(test_params, meter_keys, tmp_path):
    # point the proxy at a dead port, then bring the back-end up mid-retry
    store = TariffStore()
    store.publish("meter-0001", Tariff(i0=0, rates=(2, 3)))
    placeholder = net.BackendServer(
        test_params, {}, TariffStore(), BillingLedger(tmp_path / "x.jsonl")
    )
    dead_addr = placeholder.address
    placeholder.stop()

    proxy = net.PrivacyProxy(
        test_params, "mod23", dead_addr, retry_delay=0.1, max_retries=40
    )
    proxy.start()
    try:
        report = _golden_report(test_params, meter_keys)
        net.send_report("mod23", report, proxy.address)
        time.sleep(0.3)  # proxy is retrying against the dead port
        server = net.BackendServer(
            test_params,
            {"meter-0001": meter_keys.public_key},
            store,
            BillingLedger(tmp_path / "ledger.jsonl"),
            host=dead_addr[0],
            port=dead_addr[1],
        )
        server.start()
        try:
            assert _wait_for(lambda: proxy.verdicts, timeout=10)
            assert proxy.verdicts[0].accepted
        finally:
            server.stop()
    finally:
        proxy.stop()


def test_backend_rejects_unknown_meter(test_params, backend):
    import socket

    from privbill.signing import MeterKeypair

    stranger = MeterKeypair.generate("intruder")
    profile = ConsumptionProfile(i0=0, values=(1, 1))
    import random

    report = build_report(test_params, stranger, profile, random.Random(0))
    table = wire.meter_table("mod23", report)
    with socket.create_connection(backend.address, timeout=5) as sock:
        wire.write_frame(sock, table)
        reply = wire.read_frame(sock)
    assert isinstance(reply, wire.VerdictMessage)
    assert not reply.accepted and "unknown meter" in reply.reason


def test_backend_pass_through_mode(test_params, meter_keys, backend):
    import socket

    report = _golden_report(test_params, meter_keys)
    table = wire.meter_table("mod23", report)
    with socket.create_connection(backend.address, timeout=5) as sock:
        wire.write_frame(sock, table)
        reply = wire.read_frame(sock)
    assert isinstance(reply, wire.VerdictMessage)
    assert reply.accepted and "pass-through" in reply.reason


def test_proxy_pass_through_flag(test_params, meter_keys, backend):
    proxy = net.PrivacyProxy(
        test_params, "mod23", backend.address, pass_through=True, retry_delay=0.05
    )
    proxy.start()
    try:
        report = _golden_report(test_params, meter_keys)
        net.send_report("mod23", report, proxy.address)
        assert _wait_for(lambda: proxy.verdicts)
        assert "pass-through" in proxy.verdicts[0].reason
    finally:
        proxy.stop()
