"""Station series data model and calendar-aware aggregation.

A daily record is an ordered mapping ``date -> value-or-None``; a ``None``
is an explicit missing observation, distinct from a date that is absent
from the record altogether (both count as missing days when a month is
aggregated). Monthly and annual aggregates keep an entry for every period
in their span and mark the mean absent whenever the completeness policy
rejects the period, so downstream code never has to guess why a value is
not there.
"""

from __future__ import annotations

import calendar
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Iterable, Mapping

from .errors import InputError


class Variable(str, Enum):
    TMAX = "tmax"
    TMIN = "tmin"
    DTR = "dtr"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class StationMeta:
    """Descriptive station metadata; ``zone`` is a label only and never
    enters any computation."""

    station_id: str
    name: str
    latitude: float
    longitude: float
    elevation: float | None = None
    zone: str | None = None

    def __post_init__(self):
        if not self.station_id:
            raise InputError("station_id must be a non-empty token")
        if not -90.0 <= self.latitude <= 90.0:
            raise InputError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InputError(f"longitude {self.longitude} outside [-180, 180]")


@dataclass
class DailySeries:
    """Per-station daily values in degC with explicit missing entries.

    ``records`` must be keyed by strictly increasing dates. Use
    :meth:`from_items` when the input order is not guaranteed.
    """

    station_id: str
    variable: Variable
    records: dict[date, float | None] = field(default_factory=dict)

    def __post_init__(self):
        prev = None
        for d in self.records:
            if prev is not None and d <= prev:
                raise InputError(
                    f"{self.station_id}/{self.variable}: dates not strictly "
                    f"increasing at {d.isoformat()}"
                )
            prev = d

    @classmethod
    def from_items(
        cls,
        station_id: str,
        variable: Variable,
        items: Iterable[tuple[date, float | None]] | Mapping[date, float | None],
    ) -> "DailySeries":
        pairs = items.items() if isinstance(items, Mapping) else list(items)
        seen: dict[date, float | None] = {}
        dupes = []
        for d, v in pairs:
            if d in seen:
                dupes.append(d)
            seen[d] = v
        if dupes:
            listing = ", ".join(d.isoformat() for d in sorted(set(dupes)))
            raise InputError(f"{station_id}: duplicate dates: {listing}")
        return cls(station_id, variable, dict(sorted(seen.items())))

    def __len__(self) -> int:
        return len(self.records)

    def get(self, d: date) -> float | None:
        return self.records.get(d)

    def n_present(self) -> int:
        return sum(1 for v in self.records.values() if v is not None)

    def first_date(self) -> date | None:
        return next(iter(self.records), None)

    def last_date(self) -> date | None:
        d = None
        for d in self.records:
            pass
        return d


@dataclass
class MonthlyEntry:
    year: int
    month: int
    mean: float | None
    n_present: int
    n_expected: int


@dataclass
class MonthlySeries:
    station_id: str
    variable: Variable
    entries: list[MonthlyEntry] = field(default_factory=list)

    def by_key(self) -> dict[tuple[int, int], MonthlyEntry]:
        return {(e.year, e.month): e for e in self.entries}


@dataclass
class AnnualEntry:
    year: int
    mean: float | None
    n_months_present: int


@dataclass
class AnnualSeries:
    station_id: str
    variable: Variable
    entries: list[AnnualEntry] = field(default_factory=list)

    def present(self) -> tuple[list[int], list[float]]:
        """Years and values of the gap-free subsequence."""
        years = [e.year for e in self.entries if e.mean is not None]
        values = [e.mean for e in self.entries if e.mean is not None]
        return years, values


@dataclass(frozen=True)
class CompletenessPolicy:
    """When is an aggregate trustworthy enough to report.

    Defaults follow common monthly-climate practice: at most 10 missing
    days in a month, no more than 4 of them consecutive, and all 12 months
    required for an annual mean.
    """

    max_missing_days_per_month: int = 10
    max_consecutive_missing_days: int = 4
    require_all_months_for_annual: bool = True

    def __post_init__(self):
        if self.max_missing_days_per_month < 0:
            raise InputError("max_missing_days_per_month must be >= 0")
        if self.max_consecutive_missing_days < 0:
            raise InputError("max_consecutive_missing_days must be >= 0")


def dtr_daily(tmax: DailySeries, tmin: DailySeries) -> DailySeries:
    """Daily diurnal range tmax - tmin; missing whenever either side is."""
    if tmax.station_id != tmin.station_id:
        raise InputError(
            f"station mismatch: {tmax.station_id!r} vs {tmin.station_id!r}"
        )
    if tmax.variable is not Variable.TMAX or tmin.variable is not Variable.TMIN:
        raise InputError("dtr_daily expects a TMAX series and a TMIN series")
    out: dict[date, float | None] = {}
    for d in sorted(set(tmax.records) | set(tmin.records)):
        hi = tmax.records.get(d)
        lo = tmin.records.get(d)
        out[d] = hi - lo if hi is not None and lo is not None else None
    return DailySeries(tmax.station_id, Variable.DTR, out)


def _month_span(first: date, last: date) -> list[tuple[int, int]]:
    keys = []
    y, m = first.year, first.month
    while (y, m) <= (last.year, last.month):
        keys.append((y, m))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return keys


def _max_missing_run(present_days: set[int], n_days: int) -> int:
    longest = run = 0
    for day in range(1, n_days + 1):
        if day in present_days:
            run = 0
        else:
            run += 1
            longest = max(longest, run)
    return longest


def aggregate_monthly(daily: DailySeries, policy: CompletenessPolicy) -> MonthlySeries:
    """Monthly means of present daily values, gated by the policy.

    Every calendar month between the first and last record date gets an
    entry; the mean is absent when the month misses more than
    ``max_missing_days_per_month`` days or has a longer run of consecutive
    missing days than ``max_consecutive_missing_days``.
    """
    out = MonthlySeries(daily.station_id, daily.variable)
    first, last = daily.first_date(), daily.last_date()
    if first is None:
        return out
    by_month: dict[tuple[int, int], dict[int, float]] = {}
    for d, v in daily.records.items():
        if v is not None:
            by_month.setdefault((d.year, d.month), {})[d.day] = v
    for year, month in _month_span(first, last):
        n_expected = calendar.monthrange(year, month)[1]
        present = by_month.get((year, month), {})
        n_present = len(present)
        missing = n_expected - n_present
        ok = (
            missing <= policy.max_missing_days_per_month
            and _max_missing_run(set(present), n_expected)
            <= policy.max_consecutive_missing_days
        )
        mean = sum(present.values()) / n_present if ok and n_present else None
        out.entries.append(MonthlyEntry(year, month, mean, n_present, n_expected))
    return out


def aggregate_annual(monthly: MonthlySeries, policy: CompletenessPolicy) -> AnnualSeries:
    """Annual mean as the unweighted mean of the 12 monthly means."""
    out = AnnualSeries(monthly.station_id, monthly.variable)
    by_year: dict[int, list[float]] = {}
    for e in monthly.entries:
        by_year.setdefault(e.year, [])
        if e.mean is not None:
            by_year[e.year].append(e.mean)
    for year in sorted(by_year):
        means = by_year[year]
        n = len(means)
        if policy.require_all_months_for_annual and n < 12:
            out.entries.append(AnnualEntry(year, None, n))
        elif n == 0:
            out.entries.append(AnnualEntry(year, None, 0))
        else:
            out.entries.append(AnnualEntry(year, sum(means) / n, n))
    return out


def calendar_month_series(monthly: MonthlySeries, month: int) -> AnnualSeries:
    """One entry per year carrying that calendar month's mean.

    Feeds the per-month homogeneity batteries and trend panels.
    """
    if not 1 <= month <= 12:
        raise InputError(f"month {month} outside 1..12")
    out = AnnualSeries(monthly.station_id, monthly.variable)
    for e in monthly.entries:
        if e.month == month:
            out.entries.append(
                AnnualEntry(e.year, e.mean, 1 if e.mean is not None else 0)
            )
    return out
