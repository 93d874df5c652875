"""Bundled synthetic 3-station dataset for demos and end-to-end tests.

Generates daily Tmax/Tmin CSVs with a seasonal cycle, noise and known
defects: GH001 carries a clean warming trend, GH002 has a mid-record step
inhomogeneity plus a handful of classic QC errors (a swapped pair, a digit
reversal, a decimal shift, a flat-line week, a spike), and GH003 is
trend-free with missing stretches. Reference files track the underlying
climate without the step, so homogenization has something real to find.

    python -m hometrend.fixtures OUTDIR [--seed N] [--years N]
"""

from __future__ import annotations

import argparse
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .homogeneity import derive_seed
from .io import write_station_csv
from .series import DailySeries, Variable

START_YEAR = 1990

_STATIONS = {
    "GH001": dict(
        name="Alpha Ridge", lat=9.40, lon=-0.85, elev=180.0, zone="Savannah",
        tmax_mean=34.0, tmin_mean=22.0, amplitude=3.0,
        trend=0.03, step=0.0,
    ),
    "GH002": dict(
        name="Beko Coast", lat=5.60, lon=0.10, elev=8.0, zone="Coastal",
        tmax_mean=31.0, tmin_mean=23.0, amplitude=1.5,
        trend=0.015, step=1.2,
    ),
    "GH003": dict(
        name="Cedar Plains", lat=7.30, lon=-2.30, elev=310.0, zone="Forest",
        tmax_mean=32.0, tmin_mean=21.5, amplitude=2.0,
        trend=0.0, step=0.0,
    ),
}

_RUN_TOML = """\
seed = {seed}

[inputs]
stations_dir = "stations"
metadata_csv = "metadata.csv"
reference_dir = "reference"

[output]
dir = "out"

[homogeneity]
n_sims = {n_sims}

[homogenize]
n_sims = {n_sims}
"""


def _round1(x: np.ndarray) -> np.ndarray:
    return np.round(x, 1)


def _daily_dates(n_years: int) -> list[date]:
    start = date(START_YEAR, 1, 1)
    end = date(START_YEAR + n_years - 1, 12, 31)
    out = []
    d = start
    while d <= end:
        out.append(d)
        d += timedelta(days=1)
    return out


def _climate(dates, params, rng, with_noise=True):
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    years = np.array([d.year - START_YEAR for d in dates], dtype=float)
    season = params["amplitude"] * np.cos(2 * np.pi * (doy - 46.0) / 365.25)
    trend = params["trend"] * years
    noise_hi = rng.normal(0.0, 0.8, len(dates)) if with_noise else 0.0
    noise_lo = rng.normal(0.0, 0.7, len(dates)) if with_noise else 0.0
    tmax = params["tmax_mean"] + season + trend + noise_hi
    tmin = params["tmin_mean"] + 0.6 * season + 1.3 * trend + noise_lo
    return tmax, tmin


def _inject_defects(dates, tmax, tmin, params, rng):
    n = len(dates)
    protected: set[int] = set()
    if params["step"]:
        cut = n // 2
        tmax[cut:] += params["step"]
        tmin[cut:] += 0.7 * params["step"]
    if params["name"] == "Beko Coast":
        # deterministic positions well inside the record
        swap = n // 5
        tmax[swap], tmin[swap] = tmin[swap], tmax[swap]
        tmax[n // 4] = 63.2  # digit reversal of 36.2
        tmin[n // 3] = 2.4  # decimal shift of 24
        flat = 2 * n // 5
        tmax[flat : flat + 6] = 31.7
        spike = n // 2 + 100
        tmax[spike] += 12.0
        protected = {swap, n // 4, n // 3, spike - 1, spike, spike + 1}
        protected.update(range(flat, flat + 6))
    return tmax, tmin, protected


def _knock_out(values: np.ndarray, dates, rng, protected=(), frac=0.01, block_year=None):
    out = [float(v) for v in values]
    missing = rng.random(len(values)) < frac
    for i in np.flatnonzero(missing):
        if i not in protected:
            out[i] = None
    if block_year is not None:
        for i, d in enumerate(dates):
            if d.year == block_year and d.month == 6:
                out[i] = None
    return out


def make_demo_dataset(
    root: str | Path, n_years: int = 20, seed: int = 20210, n_sims: int = 1000
) -> Path:
    """Write stations/, reference/, metadata.csv and run.toml under root.

    Returns the path to the run configuration file.
    """
    root = Path(root)
    (root / "stations").mkdir(parents=True, exist_ok=True)
    (root / "reference").mkdir(parents=True, exist_ok=True)
    dates = _daily_dates(n_years)
    meta_lines = ["station_id,name,lat,lon,elev,zone"]
    for sid, params in _STATIONS.items():
        rng = np.random.default_rng(derive_seed(seed, "station", sid))
        tmax, tmin = _climate(dates, params, rng)
        tmax, tmin, protected = _inject_defects(dates, tmax, tmin, params, rng)
        tmax = _round1(tmax)
        tmin = _round1(tmin)
        block = START_YEAR + 7 if sid == "GH003" else None
        tmax_list = _knock_out(tmax, dates, rng, protected, block_year=block)
        tmin_list = _knock_out(tmin, dates, rng, protected, block_year=block)
        write_station_csv(
            root / "stations" / f"{sid}.csv",
            DailySeries(sid, Variable.TMAX, dict(zip(dates, tmax_list))),
            DailySeries(sid, Variable.TMIN, dict(zip(dates, tmin_list))),
        )
        # reference: same climate, no step, no defects, its own noise,
        # plus a constant sensor bias that homogenization must tolerate
        ref_rng = np.random.default_rng(derive_seed(seed, "reference", sid))
        ref_params = dict(params, step=0.0)
        ref_tmax, ref_tmin = _climate(dates, ref_params, ref_rng)
        ref_tmax = _round1(ref_tmax - 0.3)
        ref_tmin = _round1(ref_tmin - 0.2)
        write_station_csv(
            root / "reference" / f"{sid}.csv",
            DailySeries(sid, Variable.TMAX, dict(zip(dates, [float(v) for v in ref_tmax]))),
            DailySeries(sid, Variable.TMIN, dict(zip(dates, [float(v) for v in ref_tmin]))),
        )
        meta_lines.append(
            f"{sid},{params['name']},{params['lat']},{params['lon']},{params['elev']},{params['zone']}"
        )
    (root / "metadata.csv").write_text("\n".join(meta_lines) + "\n", encoding="utf-8")
    config_path = root / "run.toml"
    config_path.write_text(_RUN_TOML.format(seed=seed, n_sims=n_sims), encoding="utf-8")
    return config_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="write the demo dataset")
    parser.add_argument("outdir", type=Path)
    parser.add_argument("--seed", type=int, default=20210)
    parser.add_argument("--years", type=int, default=20)
    args = parser.parse_args(argv)
    config = make_demo_dataset(args.outdir, n_years=args.years, seed=args.seed)
    print(config)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
