"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in
failure output), so the whole gate can be read at a glance:

    pytest tests/test_acceptance.py -s
"""

import hashlib
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from qc_fixtures import assert_postconditions, corrupted_pair
from hometrend.homogeneity import (
    StationClass,
    TestKind,
    buishand_lr,
    buishand_u,
    classify,
    derive_seed,
    monte_carlo_p,
    pettitt,
    run_battery,
    snht,
)
from hometrend.homogenize import compute_adjustments, detect_breaks, difference_series
from hometrend.pipeline import RunConfig, run_pipeline
from hometrend.qc import QCConfig, run_qc
from hometrend.series import MonthlyEntry, MonthlySeries, Variable
from hometrend.trend import mk_s, sen_slope, trend_test, var_s, z_stat


def report(criterion: str, ok: bool, detail: str = ""):
    marker = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {criterion}: {marker}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


def is_argmax(curve, m, rel=1e-9):
    """True when position m (1-based) maximizes the curve up to rounding."""
    top = max(curve)
    return top - curve[m - 1] <= rel * max(abs(top), 1.0)


# four-test p-values (PT, SNHT, BLRT, BUT) for a published 22-station
# network, with the rejection counts and classes reported alongside them
PUBLISHED_BATTERIES = [
    ("Abetifi", (0.263, 0.0004, 0.0007, 0.182), 2, "B"),
    ("Ada", (0.024, 0.0345, 0.0351, 0.052), 3, "C"),
    ("Akatsi", (0.051, 0.0930, 0.0954, 0.046), 1, "A"),
    ("Akim Oda", (0.054, 0.0962, 0.0950, 0.102), 0, "A"),
    ("Akuse", (0.162, 5.0e-5, 1.0e-4, 0.045), 3, "C"),
    ("Axim", (0.002, 0.0027, 0.0032, 0.002), 4, "C"),
    ("Bole", (0.010, 1.0e-4, 1.0e-4, 0.007), 4, "C"),
    ("Ho", (0.127, 0.0044, 0.0049, 0.039), 3, "C"),
    ("KIAMO-Accra", (0.000, 0.0000, 5.0e-5, 0.000), 4, "C"),
    ("Kete-Krachi", (0.041, 0.1291, 0.1227, 0.152), 1, "A"),
    ("Koforidua", (0.012, 0.0445, 0.0436, 0.014), 4, "C"),
    ("Kumasi", (0.352, 0.6173, 0.6053, 0.405), 0, "A"),
    ("Navrongo", (0.030, 0.0088, 0.0093, 0.010), 4, "C"),
    ("Saltpond", (0.029, 0.0196, 0.0188, 0.012), 4, "C"),
    ("Sefwi Bekwai", (0.011, 0.0064, 0.0071, 0.022), 4, "C"),
    ("Sunyani", (0.231, 0.1470, 0.1488, 0.443), 0, "A"),
    ("Takoradi", (1.0e-4, 2.0e-4, 5.0e-5, 0.000), 4, "C"),
    ("Tamale", (1.0e-4, 5.0e-5, 1.0e-4, 0.000), 4, "C"),
    ("Tema", (0.000, 5.0e-5, 1.0e-4, 0.001), 4, "C"),
    ("Wa", (0.657, 0.6375, 0.6398, 0.572), 0, "A"),
    ("Wenchi", (0.101, 0.5937, 0.5976, 0.314), 0, "A"),
    ("Yendi", (0.112, 0.1728, 0.1752, 0.181), 0, "A"),
]

CLASS_BY_LETTER = {
    "A": StationClass.A_USEFUL,
    "B": StationClass.B_DOUBTFUL,
    "C": StationClass.C_SUSPECT,
}


def test_criterion_1_classification_replay():
    """22-station class table reproduced exactly from the four p-values."""
    start = time.perf_counter()
    mismatches = []
    for station, p_values, rejects, letter in PUBLISHED_BATTERIES:
        n_rej, cls = classify(p_values, alpha=0.05)
        if n_rej != rejects or cls is not CLASS_BY_LETTER[letter]:
            mismatches.append(f"{station}: got {n_rej}/{cls}")
    elapsed = time.perf_counter() - start
    report(
        "1 classification replay",
        not mismatches and elapsed < 1.0,
        f"22 stations, {elapsed:.3f}s" + ("; " + "; ".join(mismatches) if mismatches else ""),
    )


def test_criterion_2_statistic_oracles():
    """Every statistic matches a brute-force evaluation on 200 random series."""
    start = time.perf_counter()
    rng = np.random.default_rng(1002)
    checked = 0
    for k in range(200):
        n = int(rng.integers(10, 51))
        y = rng.normal(0, 1, n) * rng.uniform(0.5, 4.0) + rng.uniform(-10, 30)
        if k % 2:
            y = np.round(y, 1)  # induce ties
        ylist = list(y)
        t, m = snht(y)
        t_ref = max(curve := oracles.snht_curve_oracle(ylist))
        assert t == pytest.approx(t_ref, rel=1e-9) and is_argmax(curve, m)
        u, m = pettitt(y)
        u_ref, m_ref = oracles.pettitt_oracle(ylist)
        assert u == u_ref and m == m_ref
        v, m = buishand_lr(y)
        v_ref = max(curve := oracles.buishand_lr_curve_oracle(ylist))
        assert v == pytest.approx(v_ref, rel=1e-9) and is_argmax(curve, m)
        assert buishand_u(y) == pytest.approx(
            oracles.buishand_u_oracle(ylist), rel=1e-9
        )
        s, ties = mk_s(y)
        assert s == oracles.mk_s_oracle(ylist)
        variance = var_s(n, ties)
        assert variance == pytest.approx(oracles.var_s_oracle(ylist), rel=1e-9)
        if variance > 0:
            assert z_stat(s, variance) == pytest.approx(
                oracles.z_oracle(s, variance), rel=1e-9, abs=1e-12
            )
        years = np.sort(rng.choice(np.arange(1960, 2030), size=n, replace=False))
        assert sen_slope(y, years).slope_per_year == pytest.approx(
            oracles.sen_oracle(ylist, list(years)), rel=1e-9, abs=1e-12
        )
        checked += 1
    elapsed = time.perf_counter() - start
    report(
        "2 statistic oracles",
        checked == 200 and elapsed < 10.0,
        f"200 series, 7 statistics, {elapsed:.1f}s",
    )


def test_criterion_3_null_calibration():
    """Permutation p-values reject at ~5% on exchangeable Gaussian input."""
    start = time.perf_counter()
    n_trials = 2000
    rng = np.random.default_rng(1003)
    rejections = {test: 0 for test in TestKind}
    for trial in range(n_trials):
        y = rng.normal(25.0, 1.0, 39)
        for test in TestKind:
            p = monte_carlo_p(
                test, y, n_sims=2000, seed=derive_seed(1003, trial, test.value)
            )
            rejections[test] += p < 0.05
    rates = {test.value: rejections[test] / n_trials for test in TestKind}
    ok = all(0.035 <= r <= 0.065 for r in rates.values())
    elapsed = time.perf_counter() - start
    report(
        "3 null calibration",
        ok,
        ", ".join(f"{k}={v:.4f}" for k, v in rates.items()) + f", {elapsed:.0f}s",
    )


def _ar1(rng, n, phi):
    x = np.empty(n)
    x[0] = rng.normal(0.0, 1.0 / np.sqrt(1.0 - phi**2))
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.normal()
    return x


def test_criterion_4_autocorrelation_false_positive_control():
    """Variance correction tames the false-positive rate on AR(1) input."""
    start = time.perf_counter()
    rng = np.random.default_rng(1004)
    n_seeds = 1000
    plain = corrected = 0
    for _ in range(n_seeds):
        y = _ar1(rng, 100, 0.4)
        mk_u, _ = trend_test(y, correct_autocorr=False)
        mk_c, _ = trend_test(y)
        plain += mk_u.significant
        corrected += mk_c.significant
    plain_rate = plain / n_seeds
    corrected_rate = corrected / n_seeds
    ok = plain_rate > 0.15 and 0.03 <= corrected_rate <= 0.12
    elapsed = time.perf_counter() - start
    report(
        "4 autocorrelation control",
        ok,
        f"uncorrected={plain_rate:.3f}, corrected={corrected_rate:.3f}, {elapsed:.0f}s",
    )


def test_criterion_5_trend_recovery():
    """Sen slope recovers a known 0.03 degC/yr trend under noise."""
    start = time.perf_counter()
    rng = np.random.default_rng(1005)
    n_seeds = 500
    estimates = []
    within = 0
    decadal_exact = True
    t = np.arange(39, dtype=float)
    for _ in range(n_seeds):
        y = 0.03 * t + rng.normal(0.0, 0.5, 39)
        sen = sen_slope(y, t)
        estimates.append(sen.slope_per_year)
        within += abs(sen.slope_per_year - 0.03) <= 0.03
        decadal_exact &= sen.slope_per_decade == 10.0 * sen.slope_per_year
    mean_err = abs(float(np.mean(estimates)) - 0.03)
    ok = mean_err <= 0.005 and within / n_seeds >= 0.95 and decadal_exact
    elapsed = time.perf_counter() - start
    report(
        "5 trend recovery",
        ok,
        f"mean |err|={mean_err:.4f}, within +/-0.03: {within / n_seeds:.1%}, "
        f"decadal=10x annual: {decadal_exact}, {elapsed:.1f}s",
    )


def _monthly(values, start=(1980, 1)):
    y, m = start
    entries = []
    for v in values:
        entries.append(MonthlyEntry(y, m, float(v), 30, 30))
        y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    return MonthlySeries("SYN", Variable.TMAX, entries)


def test_criterion_6_break_detection_and_closure():
    """Known step found, offset recovered, and the fix is self-consistent."""
    start = time.perf_counter()
    n_seeds = 100
    located = offset_ok = clean_after = 0
    offset_errors = []
    for k in range(n_seeds):
        rng = np.random.default_rng(10_060 + k)
        values = rng.normal(0.0, 0.3, 468)
        values[200:] += 1.5
        cand = _monthly(values)
        ref = _monthly(np.zeros(468))
        diff = difference_series(cand, ref)
        breaks = detect_breaks(diff, n_sims=1000, seed=k)
        if len(breaks.breaks) == 1 and abs(breaks.breaks[0].index - 200) <= 6:
            located += 1
        plan = compute_adjustments(diff, breaks)
        pre_segments = [s for s in plan.segments if not s.is_anchor]
        if pre_segments:
            # offsets raise the low pre-break level by the step size
            recovered = float(np.mean(list(pre_segments[0].offsets.values())))
            offset_errors.append(abs(recovered - 1.5))
            if abs(recovered - 1.5) <= 0.1:
                offset_ok += 1
        adjusted = [
            v + plan.segment_for((e.year, e.month)).offset_for(e.month)
            for v, e in zip(values, cand.entries)
        ]
        rerun = detect_breaks(_monthly(adjusted), n_sims=1000, seed=k + 1)
        clean_after += not rerun.breaks
    # recovered offset accuracy on average: 2*sigma/sqrt(shorter segment)
    mean_error = float(np.mean(offset_errors))
    mean_ok = mean_error <= 2 * 0.3 / np.sqrt(200)
    ok = located >= 95 and offset_ok >= 95 and clean_after >= 95 and mean_ok
    elapsed = time.perf_counter() - start
    report(
        "6 break detection and closure",
        ok,
        f"located={located}/100, offset={offset_ok}/100, "
        f"clean closure={clean_after}/100, mean offset err={mean_error:.3f}, "
        f"{elapsed:.0f}s",
    )


def test_criterion_7_qc_invariants():
    """QC is idempotent, invents nothing, and enforces its postconditions."""
    start = time.perf_counter()
    cfg = QCConfig()
    rng = np.random.default_rng(1007)
    for _ in range(1000):
        hi, lo = corrupted_pair(rng)
        hi1, lo1, rep1 = run_qc(hi, lo, cfg)
        assert_postconditions(hi1, lo1, cfg)
        for d, v in hi1.records.items():
            assert v is None or v in (hi.records[d], lo.records[d])
        for d, v in lo1.records.items():
            assert v is None or v in (hi.records[d], lo.records[d])
        hi2, lo2, rep2 = run_qc(hi1, lo1, cfg)
        assert hi2.records == hi1.records
        assert lo2.records == lo1.records
        assert set(rep2.flags) <= set(rep1.flags)
    elapsed = time.perf_counter() - start
    report("7 qc invariants", elapsed < 10.0, f"1000 fixtures, {elapsed:.1f}s")


def _artifact_digests(out_dir: Path) -> dict:
    digests = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            digests[str(p.relative_to(out_dir))] = hashlib.sha256(
                p.read_bytes()
            ).hexdigest()
    return digests


def test_criterion_8_determinism_and_battery_speed(demo_dataset, tmp_path):
    """Bit-identical reruns; a 13-series 20,000-draw battery well under 60 s."""
    import json

    _, config_path = demo_dataset
    digests = []
    for run in range(2):
        config = RunConfig.from_file(config_path)
        config.out_dir = tmp_path / f"run{run}"
        run_pipeline(config)
        digests.append(_artifact_digests(config.out_dir))
    same = digests[0] == digests[1]
    manifests = [
        json.loads((tmp_path / f"run{r}" / "manifest.json").read_text())
        for r in range(2)
    ]
    manifests_agree = manifests[0]["artifacts"] == manifests[1]["artifacts"]

    rng = np.random.default_rng(1008)
    t0 = time.perf_counter()
    for i in range(13):
        run_battery(rng.normal(10, 1, 39), n_sims=20000, seed=i)
    battery_time = time.perf_counter() - t0
    ok = same and manifests_agree and battery_time < 60.0
    report(
        "8 determinism and speed",
        ok,
        f"{len(digests[0])} artifacts identical={same}, "
        f"manifest checksums agree={manifests_agree}, "
        f"13x20000-sim battery={battery_time:.1f}s",
    )


def test_criterion_9_invariance_suite():
    """Affine/monotone invariances and Sen equivariances, 500 fixtures each."""
    start = time.perf_counter()
    rng = np.random.default_rng(1009)
    for _ in range(500):
        n = int(rng.integers(10, 41))
        y = rng.normal(0, 1, n)
        a = float(rng.uniform(0.1, 5.0))
        b = float(rng.uniform(-10, 10))
        ay = a * y + b

        t1, m1 = snht(y)
        t2, m2 = snht(ay)
        assert t2 == pytest.approx(t1, rel=1e-9) and m1 == m2
        v1, k1 = buishand_lr(y)
        v2, k2 = buishand_lr(ay)
        assert v2 == pytest.approx(v1, rel=1e-9) and k1 == k2
        assert buishand_u(ay) == pytest.approx(buishand_u(y), rel=1e-9)

        # strictly increasing non-affine transform: ranks unchanged
        monotone = np.exp(y / 4.0) + 0.5 * y
        assert pettitt(monotone) == pettitt(y)
        assert mk_s(monotone)[0] == mk_s(y)[0]
        assert mk_s(y[::-1])[0] == -mk_s(y)[0]

        t = np.sort(rng.choice(np.arange(0, 80), size=n, replace=False)).astype(float)
        c = float(rng.uniform(-2, 2))
        base = sen_slope(y, t)
        scaled = sen_slope(a * y + b, t)
        assert scaled.slope_per_year == pytest.approx(
            a * base.slope_per_year, rel=1e-9, abs=1e-12
        )
        shifted = sen_slope(y + c * t, t)
        assert shifted.slope_per_year == pytest.approx(
            base.slope_per_year + c, rel=1e-9, abs=1e-12
        )
    elapsed = time.perf_counter() - start
    report("9 invariance suite", elapsed < 10.0, f"500 fixtures, {elapsed:.1f}s")
