"""Smart Meter emulator: consumption profiles and signed commitment reports."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from typing import Iterable, TextIO

from . import pedersen
from .group import GroupParams
from .signing import MeterKeypair, sign_report

MAX_VALUE = 2**32  # bounded physical consumption per interval
INTERVALS_PER_DAY = 96  # 15-minute intervals


class ProfileError(ValueError):
    """Invalid consumption profile or profile source input."""


@dataclass(frozen=True)
class ConsumptionProfile:
    """Consumption values for consecutive intervals starting at i0."""

    i0: int
    values: tuple[int, ...]

    def __post_init__(self):
        if self.i0 < 0:
            raise ProfileError("i0 must be non-negative")
        if len(self.values) < 1:
            raise ProfileError("profile must contain at least one interval")
        for v in self.values:
            if not isinstance(v, int) or v < 0 or v >= MAX_VALUE:
                raise ProfileError(f"consumption value out of range: {v!r}")

    @property
    def n(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ReportRow:
    interval: int
    value: int
    commitment: int
    randomness: int


@dataclass(frozen=True)
class CommitmentReport:
    """Meter output: the (i, v, Comm, r) column table plus the signature."""

    meter_id: str
    i0: int
    rows: tuple[ReportRow, ...]
    sig: bytes

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(row.value for row in self.rows)

    @property
    def comm_column(self) -> tuple[int, ...]:
        return tuple(row.commitment for row in self.rows)

    @property
    def randomness(self) -> tuple[int, ...]:
        return tuple(row.randomness for row in self.rows)


def constant_profile(level: int, i0: int, n: int) -> ConsumptionProfile:
    return ConsumptionProfile(i0=i0, values=(level,) * n)


def synthetic_profile(
    rng: random.Random, i0: int, n: int = INTERVALS_PER_DAY
) -> ConsumptionProfile:
    """Seeded household model: day/night base load plus appliance spikes.

    Intervals are 15 minutes, so a day is 96 intervals; the base load follows
    a coarse wake/sleep cycle and appliances add short random bursts.
    """
    values = []
    for k in range(n):
        slot = (i0 + k) % INTERVALS_PER_DAY
        hour = slot // 4
        if 0 <= hour < 6:
            base = rng.randint(20, 60)  # night standby
        elif 6 <= hour < 9 or 17 <= hour < 22:
            base = rng.randint(150, 400)  # morning/evening peaks
        else:
            base = rng.randint(60, 180)
        if rng.random() < 0.08:
            base += rng.randint(300, 2000)  # washer, oven, kettle...
        values.append(base)
    return ConsumptionProfile(i0=i0, values=tuple(values))


def profile_from_csv(source: TextIO | Iterable[str]) -> ConsumptionProfile:
    """Parse the `interval,value` CSV format; intervals must be consecutive."""
    reader = csv.DictReader(source)
    if reader.fieldnames is None or set(reader.fieldnames) != {"interval", "value"}:
        raise ProfileError("CSV header must be exactly: interval,value")
    intervals: list[int] = []
    values: list[int] = []
    for lineno, row in enumerate(reader, start=2):
        try:
            interval = int(row["interval"])
            value = int(row["value"])
        except (TypeError, ValueError):
            raise ProfileError(f"line {lineno}: non-integer field") from None
        if value < 0:
            raise ProfileError(f"line {lineno}: negative consumption value {value}")
        intervals.append(interval)
        values.append(value)
    if not intervals:
        raise ProfileError("CSV contains no data rows")
    for prev, cur in zip(intervals, intervals[1:]):
        if cur != prev + 1:
            raise ProfileError("intervals must be consecutive")
    return ConsumptionProfile(i0=intervals[0], values=tuple(values))


def build_report(
    params: GroupParams,
    keys: MeterKeypair,
    profile: ConsumptionProfile,
    rng: random.Random,
) -> CommitmentReport:
    """Commit to every interval value with fresh blinding and sign (i0, COMM).

    The raw value stays in the plaintext column; only the exponent inside the
    commitment is reduced mod q (a no-op in the production group).
    """
    rows = []
    for k, v in enumerate(profile.values):
        r = params.sample_scalar(rng)
        c = pedersen.commit(params, v, r)
        rows.append(ReportRow(interval=profile.i0 + k, value=v, commitment=c, randomness=r))
    comm_column = [row.commitment for row in rows]
    sig = sign_report(keys, params, profile.i0, comm_column)
    return CommitmentReport(
        meter_id=keys.meter_id, i0=profile.i0, rows=tuple(rows), sig=sig
    )
