"""Reference-based homogenization of daily station records.

The candidate and reference are aggregated to monthly means, their
difference series is screened for level shifts by recursive binary
segmentation (shift statistic + permutation p-value per segment), and each
non-anchor segment receives a per-calendar-month offset that lines its
difference level up with the most recent segment. Offsets derived on the
monthly scale are then added to the daily values, so dates, missingness
and intra-month variability are preserved exactly; only levels move.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import DegenerateSeriesError, InputError, PlanCoverageError
from .homogeneity import TestKind, derive_seed, monte_carlo_p, snht
from .series import DailySeries, MonthlyEntry, MonthlySeries

MIN_SEGMENT_MONTHS = 60
DETECT_N_SIMS = 2000

MonthKey = tuple[int, int]


def _next_month(key: MonthKey) -> MonthKey:
    y, m = key
    return (y + 1, 1) if m == 12 else (y, m + 1)


@dataclass(frozen=True)
class BreakPoint:
    """A detected shift after the ``index``-th present value (1-based) of
    the difference series, which falls in calendar month ``year``/``month``."""

    index: int
    year: int
    month: int


@dataclass
class BreakSet:
    breaks: list[BreakPoint] = field(default_factory=list)
    alpha: float = 0.05
    min_segment_len: int = MIN_SEGMENT_MONTHS
    n_sims: int = DETECT_N_SIMS
    seed: int = 0
    method: str = "shift-test binary segmentation, permutation p-values"

    def __post_init__(self):
        last = 0
        for b in self.breaks:
            if b.index <= last:
                raise InputError("break indices must be strictly increasing")
            last = b.index

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "alpha": self.alpha,
            "min_segment_len": self.min_segment_len,
            "n_sims": self.n_sims,
            "seed": self.seed,
            "breaks": [
                {"index": b.index, "year": b.year, "month": b.month}
                for b in self.breaks
            ],
        }


@dataclass
class SegmentAdjustment:
    """Offsets (degC, added to the candidate) for one segment of months."""

    start: MonthKey
    end: MonthKey
    offsets: dict[int, float]
    fallback_offset: float
    is_anchor: bool

    def offset_for(self, month: int) -> float:
        return self.offsets.get(month, self.fallback_offset)

    def to_json(self) -> dict:
        return {
            "start": f"{self.start[0]:04d}-{self.start[1]:02d}",
            "end": f"{self.end[0]:04d}-{self.end[1]:02d}",
            "offsets": {str(m): self.offsets[m] for m in sorted(self.offsets)},
            "fallback_offset": self.fallback_offset,
            "is_anchor": self.is_anchor,
        }


@dataclass
class AdjustmentPlan:
    station_id: str
    variable: str
    segments: list[SegmentAdjustment]
    anchor_index: int

    def __post_init__(self):
        anchor = self.segments[self.anchor_index]
        if any(v != 0.0 for v in anchor.offsets.values()) or anchor.fallback_offset:
            raise InputError("anchor segment offsets must all be zero")

    def segment_for(self, key: MonthKey) -> SegmentAdjustment | None:
        for seg in self.segments:
            if seg.start <= key <= seg.end:
                return seg
        return None

    def to_json(self) -> dict:
        return {
            "station_id": self.station_id,
            "variable": self.variable,
            "anchor_segment": self.anchor_index,
            "segments": [s.to_json() for s in self.segments],
        }


@dataclass
class HomogenizedSeries:
    series: DailySeries
    plan: AdjustmentPlan
    breaks: BreakSet
    reference_id: str


def difference_series(
    candidate: MonthlySeries, reference: MonthlySeries
) -> MonthlySeries:
    """Candidate minus reference, month by month, on the overlap."""
    if candidate.station_id != reference.station_id:
        raise InputError(
            f"station mismatch: {candidate.station_id!r} vs {reference.station_id!r}"
        )
    if candidate.variable != reference.variable:
        raise InputError(
            f"variable mismatch: {candidate.variable} vs {reference.variable}"
        )
    ref = reference.by_key()
    out = MonthlySeries(candidate.station_id, candidate.variable)
    for e in candidate.entries:
        r = ref.get((e.year, e.month))
        if r is None:
            continue
        mean = e.mean - r.mean if e.mean is not None and r.mean is not None else None
        out.entries.append(
            MonthlyEntry(e.year, e.month, mean, e.n_present, e.n_expected)
        )
    if not out.entries:
        raise InputError(
            f"{candidate.station_id}: candidate and reference periods do not overlap"
        )
    return out


def _present(diff: MonthlySeries) -> tuple[list[MonthKey], np.ndarray]:
    keys = [(e.year, e.month) for e in diff.entries if e.mean is not None]
    values = np.array([e.mean for e in diff.entries if e.mean is not None], dtype=float)
    return keys, values


def detect_breaks(
    diff: MonthlySeries,
    alpha: float = 0.05,
    min_segment_len: int = MIN_SEGMENT_MONTHS,
    n_sims: int = DETECT_N_SIMS,
    seed: int = 0,
) -> BreakSet:
    """Recursive binary segmentation of the gap-free difference values.

    A segment is split at the shift statistic's argmax when the permutation
    p-value is below ``alpha`` and both children keep at least
    ``min_segment_len`` values; short or homogeneous input yields an empty
    break set.
    """
    keys, values = _present(diff)
    out = BreakSet([], alpha, min_segment_len, n_sims, seed)
    found: list[int] = []

    def split(lo: int, hi: int):
        if hi - lo < 2 * min_segment_len:
            return
        segment = values[lo:hi]
        try:
            stat = snht(segment, min_n=2)
            p = monte_carlo_p(
                TestKind.SNHT,
                segment,
                n_sims=n_sims,
                seed=derive_seed(seed, lo, hi),
                min_n=2,
            )
        except DegenerateSeriesError:
            return
        cut = stat.change_point
        if p >= alpha or cut < min_segment_len or (hi - lo - cut) < min_segment_len:
            return
        found.append(lo + cut)
        split(lo, lo + cut)
        split(lo + cut, hi)

    split(0, len(values))
    out.breaks = [
        BreakPoint(pos, keys[pos - 1][0], keys[pos - 1][1]) for pos in sorted(found)
    ]
    return out


def compute_adjustments(
    diff: MonthlySeries,
    breaks: BreakSet,
    variable: str | None = None,
    min_month_samples: int = 3,
) -> AdjustmentPlan:
    """Per-segment, per-calendar-month offsets toward the latest segment.

    offset(segment, month) = mean(diff in anchor, month) - mean(diff in
    segment, month); when either side has fewer than ``min_month_samples``
    values for that month the segment's all-month offset is used instead.
    The anchor (most recent) segment is never adjusted.
    """
    keys, values = _present(diff)
    n = len(values)
    for b in breaks.breaks:
        if not 0 < b.index < n:
            raise InputError(f"break index {b.index} outside the difference series")
    positions = [0] + [b.index for b in breaks.breaks] + [n]
    first_key = (diff.entries[0].year, diff.entries[0].month)
    last_key = (diff.entries[-1].year, diff.entries[-1].month)

    n_seg = len(positions) - 1
    anchor_lo, anchor_hi = positions[-2], positions[-1]
    anchor_values = values[anchor_lo:anchor_hi]
    anchor_by_month: dict[int, np.ndarray] = {
        m: np.array(
            [v for (y, mm), v in zip(keys[anchor_lo:anchor_hi], anchor_values) if mm == m]
        )
        for m in range(1, 13)
    }
    anchor_all = float(anchor_values.mean()) if len(anchor_values) else 0.0

    segments: list[SegmentAdjustment] = []
    for k in range(n_seg):
        lo, hi = positions[k], positions[k + 1]
        start = first_key if k == 0 else _next_month(keys[lo - 1])
        end = last_key if k == n_seg - 1 else keys[hi - 1]
        if k == n_seg - 1:
            segments.append(
                SegmentAdjustment(start, end, {m: 0.0 for m in range(1, 13)}, 0.0, True)
            )
            continue
        seg_values = values[lo:hi]
        seg_all = float(seg_values.mean()) if len(seg_values) else 0.0
        fallback = anchor_all - seg_all
        offsets: dict[int, float] = {}
        for m in range(1, 13):
            seg_m = np.array(
                [v for (y, mm), v in zip(keys[lo:hi], seg_values) if mm == m]
            )
            anchor_m = anchor_by_month[m]
            if len(seg_m) >= min_month_samples and len(anchor_m) >= min_month_samples:
                offsets[m] = float(anchor_m.mean() - seg_m.mean())
            else:
                offsets[m] = fallback
        segments.append(SegmentAdjustment(start, end, offsets, fallback, False))
    return AdjustmentPlan(
        diff.station_id,
        variable or str(diff.variable),
        segments,
        anchor_index=n_seg - 1,
    )


def apply_daily(candidate: DailySeries, plan: AdjustmentPlan) -> DailySeries:
    """Add each present value's (segment, calendar month) offset.

    Dates and the missingness pattern are untouched; a present date whose
    month lies outside every segment raises a coverage error.
    """
    out: dict[date, float | None] = {}
    for d, v in candidate.records.items():
        if v is None:
            out[d] = None
            continue
        seg = plan.segment_for((d.year, d.month))
        if seg is None:
            raise PlanCoverageError(
                f"{candidate.station_id}: {d.isoformat()} not covered by the plan"
            )
        out[d] = v + seg.offset_for(d.month)
    return DailySeries(candidate.station_id, candidate.variable, out)


def homogenize_daily(
    candidate_daily: DailySeries,
    candidate_monthly: MonthlySeries,
    reference_monthly: MonthlySeries,
    reference_id: str,
    alpha: float = 0.05,
    min_segment_len: int = MIN_SEGMENT_MONTHS,
    n_sims: int = DETECT_N_SIMS,
    seed: int = 0,
) -> HomogenizedSeries:
    """Difference, detect, adjust and apply in one pass for one variable."""
    diff = difference_series(candidate_monthly, reference_monthly)
    breaks = detect_breaks(
        diff, alpha=alpha, min_segment_len=min_segment_len, n_sims=n_sims, seed=seed
    )
    plan = compute_adjustments(diff, breaks, variable=str(candidate_daily.variable))
    adjusted = apply_daily(candidate_daily, plan)
    return HomogenizedSeries(adjusted, plan, breaks, reference_id)
