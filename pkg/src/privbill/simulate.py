"""In-process end-to-end simulation with per-stage timing.

One session = one meter-day: the meter builds and frames a report, the
privacy component decodes, self-checks, transforms and re-frames it, and
the back-end decodes, verifies and records.  Stage clocks cover each
party's full work including codec time, mirroring a real deployment's load
split.
"""

from __future__ import annotations

import random
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import wire
from .backend import BillingLedger, TariffStore, make_record, verify_billing
from .group import GroupParams, system_rng
from .metering import INTERVALS_PER_DAY, build_report, synthetic_profile
from .privacy import Tariff, transform_report
from .signing import MeterKeypair


@dataclass
class StageTimes:
    meter: list[float] = field(default_factory=list)
    pc: list[float] = field(default_factory=list)
    backend: list[float] = field(default_factory=list)

    def means(self) -> dict[str, float]:
        return {
            "meter": statistics.fmean(self.meter) if self.meter else 0.0,
            "pc": statistics.fmean(self.pc) if self.pc else 0.0,
            "backend": statistics.fmean(self.backend) if self.backend else 0.0,
        }


@dataclass
class SimulationSummary:
    sessions: int
    accepted: int
    rejected: int
    stage_means: dict[str, float]
    reasons: dict[str, int]

    @property
    def all_accepted(self) -> bool:
        return self.rejected == 0


def run_simulation(
    params: GroupParams,
    meters: int,
    days: int,
    seed: int | None = None,
    intervals_per_day: int = INTERVALS_PER_DAY,
    ledger_path: Path | None = None,
    max_rate: int = 100,
) -> SimulationSummary:
    rng = random.Random(seed) if seed is not None else system_rng()
    store = TariffStore()
    ledger = BillingLedger(ledger_path) if ledger_path else None
    keypairs = [MeterKeypair.generate(f"meter-{m:04d}") for m in range(meters)]
    times = StageTimes()
    accepted = 0
    reasons: dict[str, int] = {}
    n = intervals_per_day
    for day in range(days):
        i0 = day * n
        for keys in keypairs:
            tariff = Tariff(
                i0=i0, rates=tuple(rng.randint(1, max_rate) for _ in range(n))
            )
            store.publish(keys.meter_id, tariff)

            # Meter stage: profile, commitments, signature, frame.
            t0 = time.perf_counter()
            profile = synthetic_profile(rng, i0=i0, n=n)
            report = build_report(params, keys, profile, rng)
            meter_frame = wire.encode_message(wire.meter_table(params.group_id, report))
            times.meter.append(time.perf_counter() - t0)

            # PC stage: decode, self-check openings, transform, re-frame.
            t0 = time.perf_counter()
            table = wire.decode_message(meter_frame)
            assert isinstance(table, wire.ReportTable)
            incoming = wire.table_to_report(table)
            served = store.serve(keys.meter_id, incoming.i0, incoming.n)
            billing = transform_report(params, incoming, served)
            pc_frame = wire.encode_message(wire.privacy_table(params.group_id, billing))
            times.pc.append(time.perf_counter() - t0)

            # Back-end stage: decode, verify, record.
            t0 = time.perf_counter()
            bs_table = wire.decode_message(pc_frame)
            assert isinstance(bs_table, wire.ReportTable)
            received = wire.table_to_billing(bs_table)
            bs_tariff = store.serve(keys.meter_id, received.i0, received.n)
            verdict = verify_billing(params, keys.public_key, bs_tariff, received)
            if ledger is not None:
                ledger.append(make_record(params, received, verdict))
            times.backend.append(time.perf_counter() - t0)

            if verdict.accepted:
                accepted += 1
            else:
                reasons[verdict.reason] = reasons.get(verdict.reason, 0) + 1
    total = meters * days
    return SimulationSummary(
        sessions=total,
        accepted=accepted,
        rejected=total - accepted,
        stage_means=times.means(),
        reasons=reasons,
    )
