"""Quality control of daily Tmax/Tmin pairs.

Four checks run in a fixed order: order consistency (tmin must not exceed
tmax), plausibility thresholds, flat-line persistence, and inter-diurnal
steps. Swaps are only applied when the swapped pair would itself pass the
threshold checks; every change is recorded as a flag so the cleaned series
is fully auditable. Obvious transcription errors (digit reversals, decimal
shifts) are deliberately not auto-repaired: the offending value is set
missing and flagged so an analyst can fix the source file instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from enum import Enum

from .errors import InputError
from .series import DailySeries, Variable


class Check(str, Enum):
    ORDER = "order"
    TMAX_HIGH = "tmax_high"
    TMIN_LOW = "tmin_low"
    STEP = "step"
    PERSISTENCE = "persistence"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


class Action(str, Enum):
    SWAPPED = "swapped"
    SET_MISSING = "set_missing"
    FLAG_ONLY = "flag_only"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class QCConfig:
    tmax_upper: float = 50.0
    tmin_lower: float = 10.0
    interdiurnal_limit: float = 10.0
    max_identical_run: int = 5
    auto_swap: bool = True

    def __post_init__(self):
        for name in ("tmax_upper", "tmin_lower", "interdiurnal_limit"):
            v = getattr(self, name)
            if v != v or v in (float("inf"), float("-inf")):
                raise InputError(f"{name} must be finite")
        if self.max_identical_run < 1:
            raise InputError("max_identical_run must be >= 1")


@dataclass(frozen=True)
class QCFlag:
    """One QC event. ``originals`` holds the value(s) as they stood before
    the action (a pair for order/step checks, the repeated value for a
    persistence run)."""

    date: date
    check: Check
    variables: tuple[Variable, ...]
    originals: tuple[float | None, ...]
    action: Action

    def __post_init__(self):
        if self.action is Action.SWAPPED and self.check is not Check.ORDER:
            raise InputError("SWAPPED is only valid for the order check")


@dataclass
class QCReport:
    station_id: str
    flags: list[QCFlag] = field(default_factory=list)

    def counts(self) -> dict[Check, int]:
        out = {c: 0 for c in Check}
        for f in self.flags:
            out[f.check] += 1
        return out

    def to_rows(self) -> list[dict]:
        """CSV rows: station, date, check, variable, original, action."""
        rows = []
        for f in self.flags:
            rows.append(
                {
                    "station": self.station_id,
                    "date": f.date.isoformat(),
                    "check": f.check.value,
                    "variable": ";".join(v.value for v in f.variables),
                    "original": ";".join(
                        "NA" if v is None else format(v, ".10g") for v in f.originals
                    ),
                    "action": f.action.value,
                }
            )
        return rows

    def to_json(self) -> dict:
        return {
            "station_id": self.station_id,
            "counts": {c.value: n for c, n in self.counts().items() if n},
            "flags": self.to_rows(),
        }


def _swap_ok(old_tmax: float, old_tmin: float, cfg: QCConfig) -> bool:
    # after swapping, new tmax = old tmin and new tmin = old tmax
    return not (old_tmin > cfg.tmax_upper or old_tmax < cfg.tmin_lower)


def check_order(
    tmax: DailySeries, tmin: DailySeries, cfg: QCConfig
) -> tuple[DailySeries, DailySeries, list[QCFlag]]:
    """Fix days where tmin exceeds tmax (equality is allowed).

    Swapped when the swapped pair violates no threshold check, otherwise
    both values are set missing.
    """
    if tmax.station_id != tmin.station_id:
        raise InputError(
            f"station mismatch: {tmax.station_id!r} vs {tmin.station_id!r}"
        )
    hi = dict(tmax.records)
    lo = dict(tmin.records)
    flags: list[QCFlag] = []
    for d in hi:
        a, b = hi.get(d), lo.get(d)
        if a is None or b is None or b <= a:
            continue
        originals = (a, b)
        if cfg.auto_swap and _swap_ok(a, b, cfg):
            hi[d], lo[d] = b, a
            action = Action.SWAPPED
        else:
            hi[d] = lo[d] = None
            action = Action.SET_MISSING
        flags.append(
            QCFlag(d, Check.ORDER, (Variable.TMAX, Variable.TMIN), originals, action)
        )
    return (
        DailySeries(tmax.station_id, Variable.TMAX, hi),
        DailySeries(tmin.station_id, Variable.TMIN, lo),
        flags,
    )


def check_thresholds(
    series: DailySeries, cfg: QCConfig
) -> tuple[DailySeries, list[QCFlag]]:
    """Remove implausible extremes (strictly above/below the limits)."""
    if series.variable is Variable.TMAX:
        check = Check.TMAX_HIGH

        def bad(v):
            return v > cfg.tmax_upper

    elif series.variable is Variable.TMIN:
        check = Check.TMIN_LOW

        def bad(v):
            return v < cfg.tmin_lower

    else:
        raise InputError("threshold check applies to TMAX or TMIN series only")
    records = dict(series.records)
    flags: list[QCFlag] = []
    for d, v in records.items():
        if v is not None and bad(v):
            records[d] = None
            flags.append(
                QCFlag(d, check, (series.variable,), (v,), Action.SET_MISSING)
            )
    return DailySeries(series.station_id, series.variable, records), flags


def _runs(records: dict[date, float | None]):
    """Maximal runs of identical values on consecutive present days."""
    start = prev_d = None
    value = None
    length = 0
    for d, v in records.items():
        contiguous = (
            v is not None
            and prev_d is not None
            and value is not None
            and d - prev_d == timedelta(days=1)
            and v == value
        )
        if contiguous:
            length += 1
        else:
            if length:
                yield start, value, length
            if v is not None:
                start, value, length = d, v, 1
            else:
                start, value, length = None, None, 0
        prev_d = d if v is not None else None
    if length:
        yield start, value, length


def check_persistence(
    series: DailySeries, cfg: QCConfig
) -> tuple[DailySeries, list[QCFlag]]:
    """Set whole flat-line runs missing once they exceed the allowed length.

    Values are compared exactly (input resolution is 0.1 degC); a missing
    day or a gap in the record breaks the run.
    """
    records = dict(series.records)
    flags: list[QCFlag] = []
    for start, value, length in _runs(series.records):
        if length > cfg.max_identical_run:
            for k in range(length):
                records[start + timedelta(days=k)] = None
            flags.append(
                QCFlag(
                    start,
                    Check.PERSISTENCE,
                    (series.variable,),
                    (value,) * length,
                    Action.SET_MISSING,
                )
            )
    return DailySeries(series.station_id, series.variable, records), flags


def check_interdiurnal(series: DailySeries, cfg: QCConfig) -> list[QCFlag]:
    """Flag day-to-day jumps beyond the limit; values are kept.

    Only consecutive calendar days are compared; one flag per violating
    pair, dated on the later day.
    """
    flags: list[QCFlag] = []
    prev_d = None
    prev_v = None
    for d, v in series.records.items():
        if (
            v is not None
            and prev_v is not None
            and prev_d is not None
            and d - prev_d == timedelta(days=1)
            and abs(v - prev_v) > cfg.interdiurnal_limit
        ):
            flags.append(
                QCFlag(d, Check.STEP, (series.variable,), (prev_v, v), Action.FLAG_ONLY)
            )
        prev_d, prev_v = d, v
    return flags


def run_qc(
    tmax: DailySeries, tmin: DailySeries, cfg: QCConfig | None = None
) -> tuple[DailySeries, DailySeries, QCReport]:
    """Full battery: order, thresholds, persistence, then step flags.

    The fixed order means swaps are validated against thresholds and the
    report is deterministic. Running the battery on its own output changes
    nothing and can only repeat step flags (those never alter values).
    """
    cfg = cfg or QCConfig()
    report = QCReport(tmax.station_id)
    tmax, tmin, flags = check_order(tmax, tmin, cfg)
    report.flags.extend(flags)
    tmax, flags = check_thresholds(tmax, cfg)
    report.flags.extend(flags)
    tmin, flags = check_thresholds(tmin, cfg)
    report.flags.extend(flags)
    tmax, flags = check_persistence(tmax, cfg)
    report.flags.extend(flags)
    tmin, flags = check_persistence(tmin, cfg)
    report.flags.extend(flags)
    report.flags.extend(check_interdiurnal(tmax, cfg))
    report.flags.extend(check_interdiurnal(tmin, cfg))
    return tmax, tmin, report
