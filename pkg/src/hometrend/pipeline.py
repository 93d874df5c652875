"""End-to-end orchestration: ingest, QC, homogeneity, homogenize, trends.

Each stage reads the previous stage's on-disk artifacts, so the CLI verbs
can rerun any suffix of the pipeline. A run is deterministic for a given
(inputs, config, seed): every Monte Carlo consumer derives its own seed
from the run seed and stable station/series labels, and stations are
processed in sorted order. On failure every artifact the run created is
removed.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .errors import ConfigError, HometrendError, InputError
from .homogeneity import derive_seed, run_battery
from .homogenize import homogenize_daily
from .io import (
    HOMOGENEITY_COLUMNS,
    TREND_COLUMNS,
    battery_row,
    export_geojson,
    fmt,
    fmt_p,
    load_metadata_csv,
    load_station_csv,
    sha256_file,
    write_csv,
    write_json,
    write_station_csv,
)
from .qc import QCConfig, run_qc
from .series import (
    AnnualSeries,
    CompletenessPolicy,
    DailySeries,
    MonthlySeries,
    Variable,
    aggregate_annual,
    aggregate_monthly,
    calendar_month_series,
    dtr_daily,
)
from .trend import MIN_TREND_LENGTH, trend_test

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

MIN_CONFIG_SIMS = 1000


@dataclass
class RunConfig:
    stations_dir: Path
    metadata_csv: Path
    out_dir: Path
    reference_dir: Path | None = None
    seed: int = 0
    qc: QCConfig = field(default_factory=QCConfig)
    completeness: CompletenessPolicy = field(default_factory=CompletenessPolicy)
    homogeneity_alpha: float = 0.05
    homogeneity_n_sims: int = 20000
    homogeneity_min_n: int = 10
    homogenize_alpha: float = 0.05
    homogenize_min_segment_len: int = 60
    homogenize_n_sims: int = 2000
    trend_alpha: float = 0.05

    def validate(self):
        if self.homogeneity_n_sims < MIN_CONFIG_SIMS:
            raise ConfigError(
                f"homogeneity n_sims must be >= {MIN_CONFIG_SIMS}, "
                f"got {self.homogeneity_n_sims}"
            )
        if self.homogenize_n_sims < MIN_CONFIG_SIMS:
            raise ConfigError(
                f"homogenize n_sims must be >= {MIN_CONFIG_SIMS}, "
                f"got {self.homogenize_n_sims}"
            )
        for name in ("homogeneity_alpha", "homogenize_alpha", "trend_alpha"):
            a = getattr(self, name)
            if not 0.0 < a < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {a}")
        if self.homogeneity_min_n < 3:
            raise ConfigError("homogeneity min_n must be >= 3")
        if self.homogenize_min_segment_len < 2:
            raise ConfigError("min_segment_len must be >= 2")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "RunConfig":
        base = Path(base_dir) if base_dir else Path(".")

        def take(section: dict, key, default=None, required=False):
            if required and key not in section:
                raise ConfigError(f"missing config key {key!r}")
            return section.pop(key, default)

        data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
        inputs = take(data, "inputs", {}, required=True)
        output = take(data, "output", {})
        qc_raw = take(data, "qc", {})
        comp_raw = take(data, "completeness", {})
        hg_raw = take(data, "homogeneity", {})
        hz_raw = take(data, "homogenize", {})
        tr_raw = take(data, "trend", {})
        seed = take(data, "seed", 0)
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")

        def path_of(section, key, required=False):
            raw = take(section, key, required=required)
            if raw is None:
                return None
            p = Path(raw)
            return p if p.is_absolute() else base / p

        try:
            cfg = cls(
                stations_dir=path_of(inputs, "stations_dir", required=True),
                metadata_csv=path_of(inputs, "metadata_csv", required=True),
                reference_dir=path_of(inputs, "reference_dir"),
                out_dir=path_of(output, "dir") or base / "out",
                seed=seed,
                qc=QCConfig(**qc_raw),
                completeness=CompletenessPolicy(**comp_raw),
                homogeneity_alpha=take(hg_raw, "alpha", 0.05),
                homogeneity_n_sims=take(hg_raw, "n_sims", 20000),
                homogeneity_min_n=take(hg_raw, "min_n", 10),
                homogenize_alpha=take(hz_raw, "alpha", 0.05),
                homogenize_min_segment_len=take(hz_raw, "min_segment_len", 60),
                homogenize_n_sims=take(hz_raw, "n_sims", 2000),
                trend_alpha=take(tr_raw, "alpha", 0.05),
            )
        except TypeError as exc:
            raise ConfigError(f"bad config section: {exc}") from None
        for name, section in (
            ("inputs", inputs),
            ("output", output),
            ("homogeneity", hg_raw),
            ("homogenize", hz_raw),
            ("trend", tr_raw),
        ):
            if section:
                raise ConfigError(f"unknown [{name}] keys: {sorted(section)}")
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            with path.open("rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {
            "inputs": {
                "stations_dir": str(self.stations_dir),
                "metadata_csv": str(self.metadata_csv),
                "reference_dir": (
                    str(self.reference_dir) if self.reference_dir else None
                ),
            },
            "output": {"dir": str(self.out_dir)},
            "seed": self.seed,
            "qc": {
                "tmax_upper": self.qc.tmax_upper,
                "tmin_lower": self.qc.tmin_lower,
                "interdiurnal_limit": self.qc.interdiurnal_limit,
                "max_identical_run": self.qc.max_identical_run,
                "auto_swap": self.qc.auto_swap,
            },
            "completeness": {
                "max_missing_days_per_month": self.completeness.max_missing_days_per_month,
                "max_consecutive_missing_days": self.completeness.max_consecutive_missing_days,
                "require_all_months_for_annual": self.completeness.require_all_months_for_annual,
            },
            "homogeneity": {
                "alpha": self.homogeneity_alpha,
                "n_sims": self.homogeneity_n_sims,
                "min_n": self.homogeneity_min_n,
            },
            "homogenize": {
                "alpha": self.homogenize_alpha,
                "min_segment_len": self.homogenize_min_segment_len,
                "n_sims": self.homogenize_n_sims,
            },
            "trend": {"alpha": self.trend_alpha},
        }


class RunState:
    """Artifacts written so far, warnings, and manifest bookkeeping."""

    def __init__(self, config: RunConfig, verb: str):
        self.config = config
        self.verb = verb
        self.out_dir = Path(config.out_dir)
        self.artifacts: list[Path] = []
        self.warnings: list[str] = []
        self.station_info: dict[str, dict] = {}
        self.started = time.time()

    def path(self, *parts: str) -> Path:
        p = self.out_dir.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(p)
        return p

    def warn(self, message: str):
        self.warnings.append(message)

    def info(self, station_id: str) -> dict:
        return self.station_info.setdefault(
            station_id, {"effective_n": {}, "seeds": {}}
        )

    def cleanup(self):
        for p in self.artifacts:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        for p in sorted(
            {q for a in self.artifacts for q in a.parents if self.out_dir in q.parents},
            reverse=True,
        ):
            try:
                p.rmdir()
            except OSError:
                pass

    def write_manifest(self, input_files: list[Path]):
        checksums = {
            str(p.relative_to(self.out_dir)): sha256_file(p)
            for p in self.artifacts
            if p.exists()
        }
        manifest = {
            "tool": {"name": "hometrend", "version": __version__},
            "verb": self.verb,
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "stations": self.station_info,
            "warnings": self.warnings,
            "inputs": {str(p): sha256_file(p) for p in sorted(input_files)},
            "artifacts": checksums,
            "wall_clock_seconds": round(time.time() - self.started, 3),
        }
        write_json(self.path("manifest.json"), manifest)


def _station_files(stations_dir: Path) -> list[Path]:
    if not stations_dir.is_dir():
        raise InputError(f"stations directory not found: {stations_dir}")
    files = sorted(stations_dir.glob("*.csv"))
    if not files:
        raise InputError(f"no station CSV files in {stations_dir}")
    return files


def _load_stations(files: list[Path]) -> dict[str, tuple[DailySeries, DailySeries]]:
    out: dict[str, tuple[DailySeries, DailySeries]] = {}
    for f in files:
        sid, tmax, tmin = load_station_csv(f)
        if sid in out:
            raise InputError(f"duplicate station id {sid!r} in {f}")
        out[sid] = (tmax, tmin)
    return dict(sorted(out.items()))


def _series_label(month: int | None) -> str:
    return "annual" if month is None else f"m{month:02d}"


def _annual_and_monthly(
    daily: DailySeries, policy: CompletenessPolicy
) -> tuple[MonthlySeries, AnnualSeries, dict[int, AnnualSeries]]:
    monthly = aggregate_monthly(daily, policy)
    annual = aggregate_annual(monthly, policy)
    per_month = {m: calendar_month_series(monthly, m) for m in range(1, 13)}
    return monthly, annual, per_month


def stage_qc(config: RunConfig, state: RunState) -> list[Path]:
    """QC every station and write cleaned dailies plus the flag report."""
    files = _station_files(config.stations_dir)
    stations = _load_stations(files)
    metadata = load_metadata_csv(config.metadata_csv)
    rows = []
    for sid, (tmax, tmin) in stations.items():
        if sid not in metadata:
            raise InputError(f"station {sid!r} missing from metadata")
        tmax_c, tmin_c, report = run_qc(tmax, tmin, config.qc)
        rows.extend(report.to_rows())
        info = state.info(sid)
        info["qc_flags"] = {c.value: n for c, n in report.counts().items() if n}
        info["effective_n"]["daily_present_tmax"] = tmax_c.n_present()
        info["effective_n"]["daily_present_tmin"] = tmin_c.n_present()
        write_station_csv(state.path("qc_clean", f"{sid}.csv"), tmax_c, tmin_c)
    write_csv(
        state.path("qc_report.csv"),
        ["station", "date", "check", "variable", "original", "action"],
        rows,
    )
    return files + [config.metadata_csv]


def _load_clean(config: RunConfig) -> dict[str, tuple[DailySeries, DailySeries]]:
    clean_dir = config.out_dir / "qc_clean"
    if not clean_dir.is_dir() or not list(clean_dir.glob("*.csv")):
        raise InputError(
            f"{clean_dir} is missing or empty; run the qc stage first "
            "(hometrend qc ...)"
        )
    return _load_stations(sorted(clean_dir.glob("*.csv")))


def stage_homogeneity(config: RunConfig, state: RunState) -> list[Path]:
    """Four-test battery on annual and per-calendar-month DTR series."""
    stations = _load_clean(config)
    annual_rows = []
    monthly_rows = []
    for sid, (tmax, tmin) in stations.items():
        dtr = dtr_daily(tmax, tmin)
        _, annual, per_month = _annual_and_monthly(dtr, config.completeness)
        info = state.info(sid)
        for month in [None] + list(range(1, 13)):
            label = _series_label(month)
            series = annual if month is None else per_month[month]
            _, values = series.present()
            info["effective_n"][f"dtr_{label}"] = len(values)
            if len(values) < config.homogeneity_min_n:
                state.warn(
                    f"{sid}: dtr {label} series too short for homogeneity "
                    f"tests (n={len(values)} < {config.homogeneity_min_n})"
                )
                continue
            seed = derive_seed(config.seed, "homogeneity", sid, "dtr", label)
            info["seeds"][f"homogeneity_{label}"] = seed
            battery = run_battery(
                values,
                alpha=config.homogeneity_alpha,
                n_sims=config.homogeneity_n_sims,
                seed=seed,
                min_n=config.homogeneity_min_n,
                source=f"{sid}/dtr/{label}",
            )
            if month is None:
                annual_rows.append(battery_row(sid, battery))
            else:
                monthly_rows.append(battery_row(sid, battery, month=month))
    write_csv(state.path("homogeneity_annual.csv"), HOMOGENEITY_COLUMNS, annual_rows)
    monthly_columns = HOMOGENEITY_COLUMNS[:1] + ["month"] + HOMOGENEITY_COLUMNS[1:]
    write_csv(state.path("homogeneity_monthly.csv"), monthly_columns, monthly_rows)
    return []


def stage_homogenize(config: RunConfig, state: RunState) -> list[Path]:
    """Adjust each station's Tmax/Tmin against its reference series."""
    stations = _load_clean(config)
    if config.reference_dir is None:
        raise InputError("homogenize stage needs inputs.reference_dir in the config")
    if not Path(config.reference_dir).is_dir():
        raise InputError(f"reference directory not found: {config.reference_dir}")
    breaks_doc: dict[str, dict] = {}
    adjust_doc: dict[str, dict] = {}
    ref_files = []
    for sid, (tmax, tmin) in stations.items():
        ref_path = Path(config.reference_dir) / f"{sid}.csv"
        if not ref_path.exists():
            state.warn(f"{sid}: no reference file {ref_path.name}; not homogenized")
            continue
        ref_files.append(ref_path)
        ref_id, ref_tmax, ref_tmin = load_station_csv(ref_path)
        results = {}
        for variable, cand, ref in (
            (Variable.TMAX, tmax, ref_tmax),
            (Variable.TMIN, tmin, ref_tmin),
        ):
            seed = derive_seed(config.seed, "homogenize", sid, variable.value)
            state.info(sid)["seeds"][f"homogenize_{variable.value}"] = seed
            result = homogenize_daily(
                cand,
                aggregate_monthly(cand, config.completeness),
                aggregate_monthly(ref, config.completeness),
                reference_id=ref_id,
                alpha=config.homogenize_alpha,
                min_segment_len=config.homogenize_min_segment_len,
                n_sims=config.homogenize_n_sims,
                seed=seed,
            )
            results[variable] = result
        breaks_doc[sid] = {
            v.value: results[v].breaks.to_json() for v in results
        }
        adjust_doc[sid] = {
            v.value: results[v].plan.to_json() for v in results
        }
        write_station_csv(
            state.path("homogenized", f"{sid}.csv"),
            results[Variable.TMAX].series,
            results[Variable.TMIN].series,
        )
        write_json(
            state.path("homogenized", f"{sid}.provenance.json"),
            {
                "station_id": sid,
                "reference_id": ref_id,
                "breaks": breaks_doc[sid],
                "adjustments": adjust_doc[sid],
            },
        )
    write_json(state.path("breaks.json"), {"stations": breaks_doc})
    write_json(state.path("adjustments.json"), {"stations": adjust_doc})
    return ref_files


def _trend_rows_for(
    sid: str,
    dataset: str,
    daily_by_var: dict[Variable, DailySeries],
    config: RunConfig,
    state: RunState,
) -> list[dict]:
    rows = []
    for variable, daily in daily_by_var.items():
        _, annual, per_month = _annual_and_monthly(daily, config.completeness)
        for month in [None] + list(range(1, 13)):
            series = annual if month is None else per_month[month]
            years, values = series.present()
            label = _series_label(month)
            if len(values) < MIN_TREND_LENGTH:
                state.warn(
                    f"{sid}: {dataset} {variable.value} {label} series too "
                    f"short for trend test (n={len(values)})"
                )
                continue
            mk, sen = trend_test(values, years, alpha=config.trend_alpha)
            rows.append(
                {
                    "station": sid,
                    "dataset": dataset,
                    "variable": variable.value,
                    "period": "annual" if month is None else str(month),
                    "n": mk.n,
                    "s": mk.s,
                    "var_s": fmt(mk.var_s),
                    "var_s_star": fmt(mk.var_s_star),
                    "z": fmt(mk.z),
                    "p": fmt_p(mk.p_two_sided),
                    "significant": "true" if mk.significant else "false",
                    "sen_per_decade": fmt(sen.slope_per_decade),
                }
            )
    return rows


def stage_trends(config: RunConfig, state: RunState) -> list[Path]:
    """Trend tables for original and homogenized Tmax/Tmin/DTR."""
    stations = _load_clean(config)
    metadata = load_metadata_csv(config.metadata_csv)
    homog_dir = config.out_dir / "homogenized"
    all_rows: list[dict] = []
    for sid, (tmax, tmin) in stations.items():
        if sid not in metadata:
            raise InputError(f"station {sid!r} missing from metadata")
        original = {
            Variable.TMAX: tmax,
            Variable.TMIN: tmin,
            Variable.DTR: dtr_daily(tmax, tmin),
        }
        all_rows.extend(_trend_rows_for(sid, "original", original, config, state))
        hom_path = homog_dir / f"{sid}.csv"
        if hom_path.exists():
            _, h_tmax, h_tmin = load_station_csv(hom_path)
            homogenized = {
                Variable.TMAX: h_tmax,
                Variable.TMIN: h_tmin,
                Variable.DTR: dtr_daily(h_tmax, h_tmin),
            }
            all_rows.extend(
                _trend_rows_for(sid, "homogenized", homogenized, config, state)
            )
        else:
            state.warn(f"{sid}: no homogenized series; homogenized trends skipped")
    annual_rows = [r for r in all_rows if r["period"] == "annual"]
    monthly_rows = [r for r in all_rows if r["period"] != "annual"]
    write_csv(state.path("trends_annual.csv"), TREND_COLUMNS, annual_rows)
    write_csv(state.path("trends_monthly.csv"), TREND_COLUMNS, monthly_rows)
    write_json(state.path("trends.geojson"), export_geojson(all_rows, metadata))
    return [config.metadata_csv]


STAGES = {
    "qc": (stage_qc,),
    "homogeneity": (stage_homogeneity,),
    "homogenize": (stage_homogenize,),
    "trends": (stage_trends,),
    "all": (stage_qc, stage_homogeneity, stage_homogenize, stage_trends),
}


def run_stages(config: RunConfig, verb: str) -> RunState:
    """Run one verb's stages with cleanup-on-failure and a manifest."""
    config.validate()
    state = RunState(config, verb)
    state.out_dir.mkdir(parents=True, exist_ok=True)
    input_files: list[Path] = []
    try:
        for stage in STAGES[verb]:
            input_files.extend(stage(config, state))
        state.write_manifest(input_files)
    except BaseException:
        state.cleanup()
        raise
    return state


def run_pipeline(config: RunConfig) -> RunState:
    """The full QC -> homogeneity -> homogenize -> trends run."""
    return run_stages(config, "all")


def main_verb(verb: str, config: RunConfig) -> int:
    """Exit-code wrapper used by the CLI: 0 ok, 2 input error, 3 internal."""
    try:
        run_stages(config, verb)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except HometrendError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return 0
