"""Change-point (homogeneity) tests with permutation Monte Carlo p-values.

Four complementary statistics are computed on a gap-free series of monthly
or annual means: a standardized likelihood-ratio shift statistic that peaks
near the shift year and is most sensitive near the series ends (``snht``),
a rank-based statistic most sensitive in the middle (``pettitt``), and two
statistics built on the cumulative deviations from the series mean
(``buishand_lr`` toward the ends, ``buishand_u`` toward the middle).

Significance comes from Monte Carlo: the observed statistic is compared
against the same statistic on random permutations of the observed values,
which is distribution-free under the null of exchangeability. Stations are
then classified from the number of rejecting tests: 0-1 useful, 2
doubtful, 3-4 suspect.
"""

from __future__ import annotations

import hashlib
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateSeriesError, InputError, TooShortError

MIN_SERIES_LENGTH = 10

#: divisor convention for the standard deviation used to standardize the
#: shift statistic; permutation p-values are identical under either choice
#: because the scale factor is common to the observed and null statistics.
SNHT_SIGMA = "population"


class TestKind(str, Enum):
    SNHT = "snht"
    PETTITT = "pettitt"
    BLRT = "blrt"
    BUT = "but"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


class StationClass(str, Enum):
    A_USEFUL = "A (Useful)"
    B_DOUBTFUL = "B (Doubtful)"
    C_SUSPECT = "C (Suspect)"


@dataclass(frozen=True)
class TestSeries:
    """Gap-free values ready for testing plus a descriptor of where they
    came from (station, variable, month-or-annual)."""

    values: tuple[float, ...]
    source: str = ""

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise InputError("TestSeries values must be one-dimensional")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"TestSeries {self.source!r} contains non-finite values")

    @property
    def n(self) -> int:
        return len(self.values)


SnhtResult = namedtuple("SnhtResult", ["statistic", "change_point"])
PettittResult = namedtuple("PettittResult", ["statistic", "change_point"])
BuishandLrResult = namedtuple("BuishandLrResult", ["statistic", "change_point"])


@dataclass(frozen=True)
class HomogeneityTestResult:
    test: TestKind
    statistic: float
    change_point: int | None
    p_value: float
    n_sims: int
    seed: int


@dataclass(frozen=True)
class HomogeneityBattery:
    """The four test results for one series, in fixed PT/SNHT/BLRT/BUT
    order, with the resulting station class."""

    results: tuple[HomogeneityTestResult, ...]
    alpha: float
    n_rejections: int
    station_class: StationClass
    n: int
    source: str = ""


def _values(series) -> np.ndarray:
    if isinstance(series, TestSeries):
        return np.asarray(series.values, dtype=float)
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 1:
        raise InputError("series must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InputError("series contains non-finite values")
    return arr


def _sigma(y: np.ndarray, mode: str) -> float:
    if mode == "population":
        return float(np.std(y))
    if mode == "sample":
        return float(np.std(y, ddof=1))
    raise InputError(f"unknown sigma mode {mode!r}")


def _midranks(y: np.ndarray) -> np.ndarray:
    return rankdata(y, method="average")


def _require_length(n: int, min_n: int):
    if n < min_n:
        raise TooShortError(f"series of length {n} is shorter than min_n={min_n}")


# ---------------------------------------------------------------------------
# statistic kernels, written for a batch of series (rows) so the Monte
# Carlo null can reuse them on thousands of permutations at once
# ---------------------------------------------------------------------------


def _snht_stats(
    rows: np.ndarray, sigma: float, with_argmax: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    n = rows.shape[1]
    partial = np.cumsum(rows - rows.mean(axis=1, keepdims=True), axis=1)[:, : n - 1]
    m = np.arange(1, n, dtype=float)
    # m*z1^2 + (n-m)*z2^2 collapses to S_m^2 * n / (sigma^2 * m * (n-m))
    t_m = partial**2 * (n / (sigma**2 * m * (n - m)))
    if with_argmax:
        return t_m.max(axis=1), t_m.argmax(axis=1) + 1
    return t_m.max(axis=1)


def _pettitt_stats(
    rank_rows: np.ndarray, with_argmax: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    n = rank_rows.shape[1]
    m = np.arange(1, n, dtype=float)
    u_m = 2.0 * np.cumsum(rank_rows, axis=1)[:, : n - 1] - m * (n + 1)
    abs_u = np.abs(u_m)
    if with_argmax:
        return abs_u.max(axis=1), abs_u.argmax(axis=1) + 1
    return abs_u.max(axis=1)


def _buishand_lr_stats(
    rows: np.ndarray, sigma: float, with_argmax: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    n = rows.shape[1]
    partial = np.cumsum(rows - rows.mean(axis=1, keepdims=True), axis=1)[:, : n - 1]
    m = np.arange(1, n, dtype=float)
    v_m = np.abs(partial) / (sigma * np.sqrt(m * (n - m)))
    if with_argmax:
        return v_m.max(axis=1), v_m.argmax(axis=1) + 1
    return v_m.max(axis=1)


def _buishand_u_stats(rows: np.ndarray, sigma: float) -> np.ndarray:
    n = rows.shape[1]
    partial = np.cumsum(rows - rows.mean(axis=1, keepdims=True), axis=1)[:, : n - 1]
    return np.sum((partial / sigma) ** 2, axis=1) / (n * (n + 1))


# ---------------------------------------------------------------------------
# public single-series tests
# ---------------------------------------------------------------------------


def snht(series, sigma_mode: str = SNHT_SIGMA, min_n: int = MIN_SERIES_LENGTH):
    """Shift statistic T = max_m [m*z1bar^2 + (n-m)*z2bar^2] and its argmax.

    ``z1bar``/``z2bar`` are the means of the standardized deviations before
    and after position m. The change point is the last index of the first
    segment (1-based); ties resolve to the smallest index.
    """
    y = _values(series)
    _require_length(len(y), min_n)
    sigma = _sigma(y, sigma_mode)
    if sigma == 0.0:
        raise DegenerateSeriesError("zero variance: shift statistic undefined")
    stat, pos = _snht_stats(y[None, :], sigma, with_argmax=True)
    return SnhtResult(float(stat[0]), int(pos[0]))


def pettitt(series, min_n: int = MIN_SERIES_LENGTH):
    """Rank statistic U_M = max_m |2*sum(r_i, i<=m) - m(n+1)| and its argmax.

    Mid-ranks are used for ties, so the statistic is invariant under any
    strictly increasing transform of the values.
    """
    y = _values(series)
    _require_length(len(y), min_n)
    ranks = _midranks(y)
    stat, pos = _pettitt_stats(ranks[None, :], with_argmax=True)
    return PettittResult(float(stat[0]), int(pos[0]))


def buishand_partial_sums(series) -> np.ndarray:
    """Cumulative deviations S*_0..S*_n from the series mean (S*_n == 0)."""
    y = _values(series)
    out = np.zeros(len(y) + 1)
    out[1:] = np.cumsum(y - y.mean())
    return out


def buishand_lr(series, min_n: int = MIN_SERIES_LENGTH):
    """Rescaled-range statistic V = max_m |S*_m| / (sigma*sqrt(m(n-m)))."""
    y = _values(series)
    _require_length(len(y), min_n)
    sigma = _sigma(y, "sample")
    if sigma == 0.0:
        raise DegenerateSeriesError("zero variance: rescaled range undefined")
    stat, pos = _buishand_lr_stats(y[None, :], sigma, with_argmax=True)
    return BuishandLrResult(float(stat[0]), int(pos[0]))


def buishand_u(series, min_n: int = MIN_SERIES_LENGTH) -> float:
    """Mean-square statistic U = sum_m (S*_m/sigma)^2 / (n(n+1)), m < n."""
    y = _values(series)
    _require_length(len(y), min_n)
    sigma = _sigma(y, "sample")
    if sigma == 0.0:
        raise DegenerateSeriesError("zero variance: U statistic undefined")
    return float(_buishand_u_stats(y[None, :], sigma)[0])


def observed_statistic(
    test: TestKind, series, sigma_mode: str = SNHT_SIGMA, min_n: int = MIN_SERIES_LENGTH
) -> tuple[float, int | None]:
    if test is TestKind.SNHT:
        r = snht(series, sigma_mode=sigma_mode, min_n=min_n)
        return r.statistic, r.change_point
    if test is TestKind.PETTITT:
        r = pettitt(series, min_n=min_n)
        return r.statistic, r.change_point
    if test is TestKind.BLRT:
        r = buishand_lr(series, min_n=min_n)
        return r.statistic, r.change_point
    if test is TestKind.BUT:
        return buishand_u(series, min_n=min_n), None
    raise InputError(f"unknown test {test!r}")


def _null_statistics(
    test: TestKind,
    y: np.ndarray,
    n_sims: int,
    rng: np.random.Generator,
    sigma_mode: str,
) -> np.ndarray:
    """Statistic under random permutations of the observed values.

    Permuting the values leaves the multiset (hence mean, sigma and the
    rank multiset) unchanged, so scale quantities are computed once.
    """
    if test is TestKind.PETTITT:
        base = _midranks(y)
    else:
        base = y
    perms = rng.permuted(np.tile(base, (n_sims, 1)), axis=1)
    if test is TestKind.SNHT:
        return _snht_stats(perms, _sigma(y, sigma_mode))
    if test is TestKind.PETTITT:
        return _pettitt_stats(perms)
    if test is TestKind.BLRT:
        return _buishand_lr_stats(perms, _sigma(y, "sample"))
    if test is TestKind.BUT:
        return _buishand_u_stats(perms, _sigma(y, "sample"))
    raise InputError(f"unknown test {test!r}")


def monte_carlo_p(
    test: TestKind,
    series,
    n_sims: int = 20000,
    seed: int = 0,
    sigma_mode: str = SNHT_SIGMA,
    min_n: int = MIN_SERIES_LENGTH,
) -> float:
    """Permutation p-value (1 + #{null >= observed}) / (n_sims + 1).

    The add-one estimator never returns an exact zero; results are
    bit-reproducible for a given seed.
    """
    y = _values(series)
    observed, _ = observed_statistic(test, y, sigma_mode=sigma_mode, min_n=min_n)
    rng = np.random.default_rng(seed)
    null = _null_statistics(test, y, n_sims, rng, sigma_mode)
    exceed = int(np.count_nonzero(null >= observed))
    return (1 + exceed) / (n_sims + 1)


def classify(p_values, alpha: float = 0.05) -> tuple[int, StationClass]:
    """Station class from four p-values: 0-1 rejections A, 2 B, 3-4 C."""
    p = list(p_values)
    if len(p) != 4:
        raise InputError(f"expected exactly 4 p-values, got {len(p)}")
    for v in p:
        if not 0.0 <= float(v) <= 1.0:
            raise InputError(f"p-value {v} outside [0, 1]")
    rejections = sum(1 for v in p if float(v) < alpha)
    if rejections <= 1:
        cls = StationClass.A_USEFUL
    elif rejections == 2:
        cls = StationClass.B_DOUBTFUL
    else:
        cls = StationClass.C_SUSPECT
    return rejections, cls


#: battery evaluation (and report column) order
BATTERY_ORDER = (TestKind.PETTITT, TestKind.SNHT, TestKind.BLRT, TestKind.BUT)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from string/int labels (station, series, test)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def run_battery(
    series,
    alpha: float = 0.05,
    n_sims: int = 20000,
    seed: int = 0,
    sigma_mode: str = SNHT_SIGMA,
    min_n: int = MIN_SERIES_LENGTH,
    source: str = "",
) -> HomogeneityBattery:
    """All four tests with Monte Carlo p-values plus the class label.

    Each test draws from its own seed derived from ``seed`` and the test
    name, so single tests can be reproduced in isolation and the battery
    is independent of evaluation order.
    """
    y = _values(series)
    results = []
    for test in BATTERY_ORDER:
        test_seed = derive_seed(seed, test.value)
        stat, cp = observed_statistic(test, y, sigma_mode=sigma_mode, min_n=min_n)
        p = monte_carlo_p(
            test, y, n_sims=n_sims, seed=test_seed, sigma_mode=sigma_mode, min_n=min_n
        )
        results.append(HomogeneityTestResult(test, stat, cp, p, n_sims, test_seed))
    rejections, cls = classify([r.p_value for r in results], alpha=alpha)
    return HomogeneityBattery(
        tuple(results), alpha, rejections, cls, len(y), source=source
    )
