import json

import pandas as pd
import pytest

from src.main import build_parser, main, parse_float_list
from src.models.config import McmcConfig
from src.models.pattern import Window
from src.models.processes import preset
from src.reporting.artifacts import write_json, write_pattern_csv
from src.simulation.samplers import sample_gibbs, sample_poisson
from src.utils.rng import derive_seed
from tests.conftest import write_station_csv


@pytest.fixture
def station_file(tmp_path, unit):
    return write_pattern_csv(sample_poisson(150.0, unit, seed=2024), tmp_path / "stations.csv")


def _snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes() for p in sorted(directory.rglob("*")) if p.is_file()}


class TestParsing:
    def test_float_list_forms(self):
        assert parse_float_list("0.1,0.2") == (0.1, 0.2)
        assert parse_float_list("-10:10:5") == (-10.0, -5.0, 0.0, 5.0, 10.0)

    def test_bare_shadowing_flag(self, tmp_path):
        args = build_parser().parse_args(["coverage", "--input", "x.csv", "--sigma-shadow"])
        assert args.sigma_shadow == 8.0
        args = build_parser().parse_args(["coverage", "--input", "x.csv"])
        assert args.sigma_shadow == 0.0

    def test_family_aliases(self):
        args = build_parser().parse_args(["fit", "--input", "x.csv", "--families", "ppp,sh,mcp"])
        assert args.families == ("poisson", "strauss_hardcore", "matern_cluster")

    def test_bad_list_exits(self):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["envelope", "--input", "x.csv", "--grid", "a,b"])
        assert info.value.code == 2


class TestSimulate:
    def test_preset(self, tmp_path, capsys):
        assert main(["simulate", "--preset", "urban-poisson", "--seed", "5", "--out", str(tmp_path)]) == 0
        meta = json.loads((tmp_path / "simulation.json").read_text())
        points = pd.read_csv(tmp_path / "points.csv")
        assert len(points) == meta["n_points"]
        assert meta["model"] == preset("urban-poisson").to_dict()
        assert f"Simulated {meta['n_points']} points" in capsys.readouterr().out

    def test_family_with_params(self, tmp_path):
        argv = ["simulate", "--family", "strauss", "--param", "beta=100", "--param", "gamma=0.5",
                "--param", "r=0.05", "--mcmc-steps", "500", "--seed", "1", "--out", str(tmp_path)]
        assert main(argv) == 0
        points = pd.read_csv(tmp_path / "points.csv")
        assert ((points[["x", "y"]] >= 0) & (points[["x", "y"]] <= 1)).all().all()

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["simulate", "--preset", "urban-mcp", "--seed", "9", "--out", str(tmp_path / name)])
        assert _snapshot(tmp_path / "a") == _snapshot(tmp_path / "b")

    def test_missing_parameter(self, tmp_path, capsys):
        assert main(["simulate", "--family", "strauss", "--param", "beta=100", "--out", str(tmp_path)]) == 2
        assert "Error:" in capsys.readouterr().err

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CELLGEO_SEED", "5")
        main(["simulate", "--preset", "urban-poisson", "--out", str(tmp_path / "env")])
        monkeypatch.delenv("CELLGEO_SEED")
        main(["simulate", "--preset", "urban-poisson", "--seed", "5", "--out", str(tmp_path / "flag")])
        assert _snapshot(tmp_path / "env") == _snapshot(tmp_path / "flag")

    def test_bad_environment_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CELLGEO_SEED", "abc")
        assert main(["simulate", "--preset", "urban-poisson", "--out", str(tmp_path)]) == 2


class TestAnalysisCommands:
    def test_classify(self, tmp_path, station_file):
        assert main(["classify", "--input", str(station_file), "--out", str(tmp_path / "c")]) == 0
        data = json.loads((tmp_path / "c" / "classification.json").read_text())
        assert data["verdict"] in ("clustered", "repulsive", "neither")
        assert data["n_points"] > 0
        assert (tmp_path / "c" / "prejudgement.csv").is_file()

    def test_fit(self, tmp_path, station_file):
        argv = ["fit", "--input", str(station_file), "--families", "poisson,strauss", "--r-grid", "0.03,0.05",
                "--out", str(tmp_path / "f")]
        assert main(argv) == 0
        fitted = json.loads((tmp_path / "f" / "fit_strauss.json").read_text())
        assert fitted["family"] == "strauss"
        assert fitted["r"] in (0.03, 0.05)
        assert "diagnostics" in fitted

    def test_envelope_prints_alpha(self, tmp_path, station_file, capsys):
        argv = ["envelope", "--input", str(station_file), "--families", "poisson", "--nsim", "19", "--nrank", "1",
                "--statistic", "K", "--grid", "0.05,0.1", "--seed", "3", "--out", str(tmp_path / "e")]
        assert main(argv) == 0
        out = capsys.readouterr().out
        assert "poisson:" in out and "(alpha=0.1)" in out
        report = json.loads((tmp_path / "e" / "envelope_K_poisson.json").read_text())
        assert report["envelope"]["alpha"] == pytest.approx(0.1)
        assert report["test"]["rejected"] == bool(report["test"]["exceedance_intervals"])

    def test_envelope_from_model_file(self, tmp_path, station_file):
        model = write_json({"family": "poisson", "lambda": 150.0}, tmp_path / "model.json")
        argv = ["envelope", "--input", str(station_file), "--model", str(model), "--nsim", "19", "--nrank", "1",
                "--grid", "0.05,0.1", "--out", str(tmp_path / "e")]
        assert main(argv) == 0
        assert (tmp_path / "e" / "envelope_L_poisson.csv").is_file()

    def test_coverage(self, tmp_path, station_file):
        argv = ["coverage", "--input", str(station_file), "--n-users", "200", "--thresholds=-10:10:5",
                "--out", str(tmp_path / "cov")]
        assert main(argv) == 0
        curve = pd.read_csv(tmp_path / "cov" / "coverage.csv")
        assert list(curve.columns) == ["grid", "value", "reference"]
        assert curve["value"].is_monotonic_decreasing

    def test_survey(self, tmp_path, station_file, capsys):
        argv = ["survey", "--input", str(station_file), "--n-subregions", "20", "--label", "synthetic",
                "--out", str(tmp_path / "s")]
        assert main(argv) == 0
        table = pd.read_csv(tmp_path / "s" / "survey.csv")
        assert list(table.columns) == ["region", "point_count", "area", "clustered_pct", "repulsive_pct",
                                       "n_classified"]
        assert table.loc[0, "region"] == "synthetic"
        assert "synthetic: clustered" in capsys.readouterr().out

    def test_kde(self, tmp_path, station_file):
        argv = ["kde", "--input", str(station_file), "--nx", "8", "--ny", "6", "--out", str(tmp_path / "k")]
        assert main(argv) == 0
        assert len(pd.read_csv(tmp_path / "k" / "density.csv")) == 48

    def test_missing_input(self, tmp_path):
        assert main(["classify", "--input", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 3

    def test_malformed_input(self, tmp_path, capsys):
        path = write_station_csv(tmp_path / "bad.csv", ["id", "x", "y"], [("a", 0, 0), ("b", "?", 1)])
        assert main(["kde", "--input", str(path), "--out", str(tmp_path)]) == 3
        assert "line" in capsys.readouterr().err


class TestPipeline:
    ARGS = ["--families", "poisson,strauss", "--r-grid", "0.03,0.05", "--nsim", "19", "--nrank", "1",
            "--mcmc-steps", "200", "--n-users", "100", "--thresholds=-10:10:10", "--seed", "11"]

    def test_outputs_and_determinism(self, tmp_path, station_file, capsys):
        out = tmp_path / "run"
        argv = ["pipeline", "--input", str(station_file), "--out", str(out), *self.ARGS]
        assert main(argv) == 0
        first = _snapshot(out)
        assert main(argv) == 0
        assert _snapshot(out) == first

        for name in ("pattern.csv", "ingest.json", "classification.json", "prejudgement.csv", "fit_poisson.json",
                     "fit_strauss.json", "envelope_L_poisson.csv", "envelope_coverage_strauss.json",
                     "coverage_observed.csv", "summary.json", "manifest.json"):
            assert name in first

        summary = json.loads(first["summary.json"])
        assert set(summary["models"]) == {"poisson", "strauss"}
        for name, res in summary["models"].items():
            assert res["rejected"] == (res["L"]["rejected"] or res["coverage"]["rejected"])
            assert (name in summary["non_rejected"]) != res["rejected"]

        manifest = json.loads(first["manifest.json"])
        assert [s["stage"] for s in manifest["completed_stages"]] == [
            "ingest", "classify", "fit", "envelope_L", "envelope_coverage", "summary"]
        assert manifest["failed_stage"] is None
        assert "Non-rejected models:" in capsys.readouterr().out

    def test_stage_failure_is_recorded(self, tmp_path):
        path = write_station_csv(tmp_path / "one.csv", ["id", "x", "y"], [("a", 0.5, 0.5)])
        out = tmp_path / "run"
        assert main(["pipeline", "--input", str(path), "--out", str(out), *self.ARGS]) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["failed_stage"] == "ingest"
        assert manifest["completed_stages"] == []

    def test_pipeline_envelope_defaults(self):
        args = build_parser().parse_args(["pipeline", "--input", "x.csv", "--out", "o"])
        assert (args.nsim, args.nrank) == (199, 1)
        assert len(args.l_grid) == 10
        assert args.l_grid[0] == pytest.approx(0.02) and args.l_grid[-1] == pytest.approx(0.2)
        args = build_parser().parse_args(["envelope", "--input", "x.csv", "--families", "poisson"])
        assert (args.nsim, args.nrank) == (99, 5)

    @pytest.mark.slow
    def test_strauss_hardcore_data_single_out_their_family(self, tmp_path):
        spec = preset("rural-sh")
        hits = 0
        for i in range(20):
            data = sample_gibbs(spec, Window.unit(), McmcConfig(n_steps=20_000), derive_seed(777, i))
            path = write_pattern_csv(data, tmp_path / f"sh_{i}.csv")
            out = tmp_path / f"run_{i}"
            argv = ["pipeline", "--input", str(path), "--out", str(out), "--families", "poisson,sh",
                    "--mcmc-steps", "10000", "--seed", str(i)]
            assert main(argv) == 0
            non_rejected = json.loads((out / "summary.json").read_text())["non_rejected"]
            hits += "strauss_hardcore" in non_rejected and "poisson" not in non_rejected
        assert hits >= 16


class TestFigures:
    def test_kde_plot(self, tmp_path, station_file):
        out = tmp_path / "k"
        assert main(["kde", "--input", str(station_file), "--nx", "8", "--ny", "8", "--plot", "--out", str(out)]) == 0
        assert (out / "figures" / "density.png").stat().st_size > 0

    def test_envelope_plot(self, tmp_path, station_file):
        out = tmp_path / "e"
        argv = ["envelope", "--input", str(station_file), "--families", "poisson", "--nsim", "19", "--nrank", "1",
                "--grid", "0.05,0.1", "--plot", "--out", str(out)]
        assert main(argv) == 0
        assert (out / "figures" / "envelope_L_poisson.png").is_file()
