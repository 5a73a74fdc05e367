"""Price/arrival file IO and synthetic-day generation.

File formats (delimited text with headers):
  prices:   ``timestamp,price``   -- consecutive hourly rows
  arrivals: ``slot,demand,parking,category``

Hourly prices are resampled to slot resolution by step-hold (each hour's
value repeated for its slots).  Synthetic days draw hourly Poisson arrival
counts per EV category and integer-triangular demand/parking pairs, rejected
until the implied laxity lands in [0, max_laxity]; parking is clamped to the
end of the day so every generated day is fully schedulable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .env import ArrivalEvent, Category


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class PriceSeries:
    """Slot-resolution price sequence."""

    resolution_minutes: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not np.isfinite(v) for v in self.values):
            raise DataError("price series contains non-finite values")


@dataclass(frozen=True)
class CategoryProfile:
    """Arrival behaviour of one EV category.

    ``demand`` and ``parking`` are (min, mode, max) triples in slots for an
    integer triangular distribution; ``hourly_rates`` are Poisson means for
    each of the 24 hours.
    """

    category: Category
    hourly_rates: tuple[float, ...]
    demand: tuple[int, int, int]
    parking: tuple[int, int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "hourly_rates", tuple(float(r) for r in self.hourly_rates))
        if len(self.hourly_rates) != 24:
            raise DataError(
                f"{self.category.value}: need 24 hourly rates, got {len(self.hourly_rates)}"
            )
        if any(r < 0 for r in self.hourly_rates):
            raise DataError(f"{self.category.value}: arrival rates must be >= 0")
        for name, (lo, mode, hi) in (("demand", self.demand), ("parking", self.parking)):
            if not (1 <= lo <= mode <= hi):
                raise DataError(
                    f"{self.category.value}: {name} triple must satisfy "
                    f"1 <= min <= mode <= max, got {(lo, mode, hi)}"
                )


def _hour_curve(peaks: Sequence[tuple[float, float, float]], base: float) -> tuple[float, ...]:
    hours = np.arange(24)
    rate = np.full(24, base)
    for center, width, height in peaks:
        rate = rate + height * np.exp(-(((hours - center) / width) ** 2))
    return tuple(float(r) for r in rate)


# Versioned defaults: emergent arrivals cluster midday with tight parking,
# normal ones follow the morning commute, residential ones the evening.
DEFAULT_PROFILES_VERSION = 1
DEFAULT_PROFILES = (
    CategoryProfile(
        category=Category.EMERGENT,
        hourly_rates=_hour_curve([(12.0, 2.5, 1.6)], base=0.08),
        demand=(4, 8, 14),
        parking=(6, 12, 20),
    ),
    CategoryProfile(
        category=Category.NORMAL,
        hourly_rates=_hour_curve([(8.5, 2.0, 2.0)], base=0.08),
        demand=(6, 12, 20),
        parking=(12, 22, 30),
    ),
    CategoryProfile(
        category=Category.RESIDENTIAL,
        hourly_rates=_hour_curve([(18.5, 2.0, 2.2)], base=0.08),
        demand=(6, 14, 24),
        parking=(12, 24, 34),
    ),
)


def load_prices(path: str | Path, slots_per_hour: int = 4) -> PriceSeries:
    """Read hourly ``timestamp,price`` rows and step-hold to slot resolution."""
    path = Path(path)
    rows: list[tuple[datetime, float]] = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["timestamp", "price"]:
            raise DataError(f"{path}: expected header 'timestamp,price', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected 'timestamp,price'")
            try:
                stamp = datetime.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad timestamp {row[0]!r}: {exc}") from None
            try:
                price = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad price {row[1]!r}") from None
            if not np.isfinite(price):
                raise DataError(f"{path}:{lineno}: non-finite price")
            rows.append((stamp, price))
    if not rows:
        raise DataError(f"{path}: no price rows")
    for (prev, _), (cur, _) in zip(rows, rows[1:]):
        expected = prev + timedelta(hours=1)
        if cur != expected:
            raise DataError(
                f"{path}: gap in hourly series after {prev.isoformat()}, "
                f"missing {expected.isoformat()}"
            )
    values = []
    for _, price in rows:
        values.extend([price] * slots_per_hour)
    return PriceSeries(resolution_minutes=60 // slots_per_hour, values=tuple(values))


def episode_prices(series: PriceSeries, horizon: int) -> tuple[float, ...]:
    """Slot prices for an episode: horizon+1 values, final one padded by repeat."""
    if len(series.values) < horizon:
        raise DataError(
            f"price series has {len(series.values)} slots, need at least {horizon}"
        )
    values = series.values[: horizon + 1]
    if len(values) == horizon:
        values = values + (values[-1],)
    return values


def gen_prices(
    rng: np.random.Generator,
    base: float = 12.0,
    morning_peak: float = 6.0,
    evening_peak: float = 18.0,
    noise: float = 1.5,
    hours: int = 24,
) -> tuple[float, ...]:
    """Synthetic hourly prices: flat base, two gaussian peaks, seeded noise."""
    grid = np.arange(hours) % 24
    prices = (
        base
        + morning_peak * np.exp(-(((grid - 8.0) / 2.0) ** 2))
        + evening_peak * np.exp(-(((grid - 17.5) / 2.5) ** 2))
        + noise * rng.uniform(-1.0, 1.0, size=hours)
    )
    return tuple(float(max(p, 0.5)) for p in prices)


def _triangular_int(rng: np.random.Generator, lo: int, mode: int, hi: int) -> int:
    values = np.arange(lo, hi + 1)
    if len(values) == 1:
        return int(values[0])
    left = np.where(values <= mode, values - lo + 1, 0.0)
    right = np.where(values > mode, hi - values, 0.0)
    weights = left + right
    weights = weights / weights.sum()
    return int(rng.choice(values, p=weights))


def gen_day(
    profiles: Sequence[CategoryProfile],
    seed: int | np.random.Generator,
    horizon: int = 96,
    slots_per_hour: int = 4,
    max_laxity: int = 12,
) -> list[ArrivalEvent]:
    """Draw one synthetic day of arrivals, deterministic for a given seed.

    Arrivals whose (demand, parking) cannot fit before the end of the day
    after 1000 rejection draws are dropped.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    hours = horizon // slots_per_hour
    events: list[ArrivalEvent] = []
    for profile in profiles:
        for hour in range(hours):
            rate = profile.hourly_rates[hour % 24]
            for _ in range(int(rng.poisson(rate))):
                slot = hour * slots_per_hour + int(rng.integers(slots_per_hour))
                slots_left = horizon - slot
                for _ in range(1000):
                    demand = _triangular_int(rng, *profile.demand)
                    parking = min(_triangular_int(rng, *profile.parking), slots_left)
                    if demand <= parking and 0 <= parking - demand <= max_laxity:
                        events.append(
                            ArrivalEvent(slot, demand, parking, profile.category)
                        )
                        break
    events.sort(key=lambda e: e.t)
    return events


def save_arrivals(path: str | Path, events: Sequence[ArrivalEvent]) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["slot", "demand", "parking", "category"])
        for event in events:
            writer.writerow([event.t, event.demand, event.parking, event.category.value])


def load_arrivals(path: str | Path) -> list[ArrivalEvent]:
    """Read and validate an arrivals file; row errors carry their line number."""
    path = Path(path)
    events: list[ArrivalEvent] = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        expected = ["slot", "demand", "parking", "category"]
        if header is None or [h.strip() for h in header] != expected:
            raise DataError(f"{path}: expected header {','.join(expected)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                slot, demand, parking = int(row[0]), int(row[1]), int(row[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer slot/demand/parking") from None
            try:
                category = Category(row[3].strip())
            except ValueError:
                raise DataError(f"{path}:{lineno}: unknown category {row[3]!r}") from None
            try:
                events.append(ArrivalEvent(slot, demand, parking, category))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return events


def save_prices(
    path: str | Path, hourly: Sequence[float], start: str = "2026-01-01T00:00"
) -> None:
    begin = datetime.fromisoformat(start)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "price"])
        for hour, price in enumerate(hourly):
            stamp = begin + timedelta(hours=hour)
            writer.writerow([stamp.isoformat(timespec="minutes"), repr(float(price))])
