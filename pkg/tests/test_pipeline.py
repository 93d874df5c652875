import csv
import json

import pytest

from hometrend.cli import main as cli_main
from hometrend.errors import ConfigError
from hometrend.fixtures import make_demo_dataset
from hometrend.pipeline import RunConfig, run_pipeline, run_stages

EXPECTED_ARTIFACTS = [
    "qc_report.csv",
    "homogeneity_annual.csv",
    "homogeneity_monthly.csv",
    "breaks.json",
    "adjustments.json",
    "trends_annual.csv",
    "trends_monthly.csv",
    "trends.geojson",
    "manifest.json",
]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def finished_run(demo_dataset, tmp_path_factory):
    root, config_path = demo_dataset
    out = tmp_path_factory.mktemp("run")
    config = RunConfig.from_file(config_path)
    config.out_dir = out
    state = run_pipeline(config)
    return config, state, out


class TestConfig:
    def test_from_file(self, demo_dataset):
        _, config_path = demo_dataset
        config = RunConfig.from_file(config_path)
        assert config.seed == 20210
        assert config.homogeneity_n_sims == 1000
        assert config.stations_dir.is_dir()

    def test_n_sims_floor(self, demo_dataset):
        _, config_path = demo_dataset
        config = RunConfig.from_file(config_path)
        config.homogeneity_n_sims = 500
        with pytest.raises(ConfigError, match="n_sims"):
            config.validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            RunConfig.from_dict(
                {
                    "inputs": {"stations_dir": "x", "metadata_csv": "y"},
                    "typo_section": {},
                }
            )

    def test_missing_inputs_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"inputs": {"stations_dir": "x"}})


class TestArtifacts:
    def test_all_artifacts_present(self, finished_run):
        _, _, out = finished_run
        for name in EXPECTED_ARTIFACTS:
            assert (out / name).exists(), name
        for sid in ("GH001", "GH002", "GH003"):
            assert (out / "qc_clean" / f"{sid}.csv").exists()
            assert (out / "homogenized" / f"{sid}.csv").exists()
            assert (out / "homogenized" / f"{sid}.provenance.json").exists()

    def test_homogeneity_table_layout(self, finished_run):
        _, _, out = finished_run
        rows = read_csv(out / "homogeneity_annual.csv")
        assert list(rows[0]) == [
            "station",
            "u_pt",
            "p_pt",
            "t_snht",
            "p_snht",
            "v_blrt",
            "p_blrt",
            "u_but",
            "p_but",
            "rejects",
            "class",
        ]
        assert {r["station"] for r in rows} == {"GH001", "GH002", "GH003"}
        monthly = read_csv(out / "homogeneity_monthly.csv")
        # 12 rows per station
        per_station = {}
        for r in monthly:
            per_station.setdefault(r["station"], []).append(int(r["month"]))
        assert all(sorted(v) == list(range(1, 13)) for v in per_station.values())

    def test_station_ids_traceable(self, finished_run):
        _, _, out = finished_run
        known = {"GH001", "GH002", "GH003"}
        for name in ("qc_report.csv", "trends_annual.csv", "trends_monthly.csv"):
            for row in read_csv(out / name):
                assert row["station"] in known

    def test_trend_table_shape(self, finished_run):
        _, _, out = finished_run
        annual = read_csv(out / "trends_annual.csv")
        # 3 stations x 2 datasets x 3 variables
        assert len(annual) == 18
        monthly = read_csv(out / "trends_monthly.csv")
        assert len(monthly) == 18 * 12
        assert {r["dataset"] for r in annual} == {"original", "homogenized"}
        assert {r["variable"] for r in annual} == {"tmax", "tmin", "dtr"}

    def test_geojson_valid(self, finished_run):
        _, _, out = finished_run
        doc = json.loads((out / "trends.geojson").read_text())
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 18 * 13
        for feature in doc["features"]:
            assert feature["type"] == "Feature"
            geom = feature["geometry"]
            assert geom["type"] == "Point"
            lon, lat = geom["coordinates"]
            assert -180 <= lon <= 180
            assert -90 <= lat <= 90
            props = feature["properties"]
            assert set(props) >= {
                "station",
                "dataset",
                "variable",
                "period",
                "n",
                "sen_per_decade",
                "p",
                "significant",
            }

    def test_known_break_found(self, finished_run):
        _, _, out = finished_run
        doc = json.loads((out / "breaks.json").read_text())
        gh2 = doc["stations"]["GH002"]["tmax"]["breaks"]
        assert len(gh2) == 1
        # the step is injected halfway through the 20-year record
        assert abs(gh2[0]["index"] - 120) <= 6
        assert doc["stations"]["GH001"]["tmax"]["breaks"] == []

    def test_homogenization_shrinks_step_trend(self, finished_run):
        _, _, out = finished_run
        rows = read_csv(out / "trends_annual.csv")
        by = {(r["station"], r["dataset"], r["variable"]): r for r in rows}
        raw = float(by[("GH002", "original", "tmax")]["sen_per_decade"])
        adj = float(by[("GH002", "homogenized", "tmax")]["sen_per_decade"])
        assert adj < raw  # the artificial step no longer masquerades as trend

    def test_manifest_contents(self, finished_run):
        config, _, out = finished_run
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == config.seed
        assert manifest["config"]["homogeneity"]["n_sims"] == 1000
        assert set(manifest["stations"]) == {"GH001", "GH002", "GH003"}
        assert "dtr_annual" in manifest["stations"]["GH001"]["effective_n"]
        assert "manifest.json" not in manifest["artifacts"]
        assert any(k.endswith("qc_report.csv") for k in manifest["artifacts"])


class TestStages:
    def test_stage_reruns_consume_artifacts(self, demo_dataset, tmp_path):
        _, config_path = demo_dataset
        config = RunConfig.from_file(config_path)
        config.out_dir = tmp_path / "staged"
        run_stages(config, "qc")
        assert (config.out_dir / "qc_report.csv").exists()
        run_stages(config, "homogeneity")
        assert (config.out_dir / "homogeneity_annual.csv").exists()
        run_stages(config, "homogenize")
        assert (config.out_dir / "breaks.json").exists()
        run_stages(config, "trends")
        assert (config.out_dir / "trends.geojson").exists()

    def test_trends_before_qc_is_input_error(self, demo_dataset, tmp_path):
        _, config_path = demo_dataset
        config = RunConfig.from_file(config_path)
        config.out_dir = tmp_path / "empty"
        with pytest.raises(Exception, match="qc stage"):
            run_stages(config, "trends")

    def test_failure_removes_partial_outputs(self, demo_dataset, tmp_path):
        root, config_path = demo_dataset
        config = RunConfig.from_file(config_path)
        config.out_dir = tmp_path / "broken"
        config.metadata_csv = root / "does-not-exist.csv"
        with pytest.raises(Exception):
            run_stages(config, "all")
        leftovers = list(config.out_dir.rglob("*")) if config.out_dir.exists() else []
        assert [p for p in leftovers if p.is_file()] == []


class TestShortStation:
    def test_short_station_skipped_with_warning(self, tmp_path):
        root = tmp_path / "short"
        make_demo_dataset(root, n_years=20, seed=7, n_sims=1000)
        # add a 4th station with only 3 years of data: too short for the
        # battery and the trend tests, but fine for QC
        src = (root / "stations" / "GH001.csv").read_text().splitlines()
        short_rows = [src[0]] + [
            line.replace("GH001", "GH004")
            for line in src[1:]
            if line.split(",")[1][:4] in ("1990", "1991", "1992")
        ]
        (root / "stations" / "GH004.csv").write_text("\n".join(short_rows) + "\n")
        (root / "reference" / "GH004.csv").write_text(
            (root / "reference" / "GH001.csv")
            .read_text()
            .replace("GH001", "GH004")
        )
        with open(root / "metadata.csv", "a", encoding="utf-8") as fh:
            fh.write("GH004,Dora Hill,8.1,-1.0,150,Forest\n")
        config = RunConfig.from_file(root / "run.toml")
        state = run_pipeline(config)
        assert any("GH004" in w and "too short" in w for w in state.warnings)
        rows = read_csv(config.out_dir / "trends_annual.csv")
        assert all(r["station"] != "GH004" for r in rows)
        manifest = json.loads((config.out_dir / "manifest.json").read_text())
        assert any("GH004" in w for w in manifest["warnings"])


class TestCli:
    def test_cli_all_and_exit_codes(self, demo_dataset, tmp_path):
        _, config_path = demo_dataset
        out = tmp_path / "cliout"
        code = cli_main(
            ["all", "--config", str(config_path), "--out", str(out), "--seed", "20210"]
        )
        assert code == 0
        assert (out / "manifest.json").exists()

    def test_cli_bad_n_sims_exit_2(self, demo_dataset, tmp_path):
        root, config_path = demo_dataset
        bad = tmp_path / "bad.toml"
        bad.write_text(
            config_path.read_text().replace("n_sims = 1000", "n_sims = 500")
        )
        code = cli_main(["all", "--config", str(bad), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_cli_missing_config_exit_2(self, monkeypatch):
        monkeypatch.delenv("HOMETREND_CONFIG", raising=False)
        assert cli_main(["qc"]) == 2

    def test_cli_env_config(self, demo_dataset, tmp_path, monkeypatch):
        _, config_path = demo_dataset
        monkeypatch.setenv("HOMETREND_CONFIG", str(config_path))
        out = tmp_path / "envout"
        assert cli_main(["qc", "--out", str(out)]) == 0
        assert (out / "qc_report.csv").exists()

    def test_cli_nonexistent_stations_exit_2(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            'seed = 1\n[inputs]\nstations_dir = "missing"\nmetadata_csv = "meta.csv"\n'
        )
        assert cli_main(["qc", "--config", str(cfg)]) == 2

    def test_internal_error_exit_3(self, demo_dataset, tmp_path, monkeypatch):
        from hometrend import pipeline

        _, config_path = demo_dataset

        def boom(config, state):
            raise RuntimeError("disk on fire")

        monkeypatch.setitem(pipeline.STAGES, "qc", (boom,))
        code = cli_main(
            ["qc", "--config", str(config_path), "--out", str(tmp_path / "o")]
        )
        assert code == 3
