import csv
import json
import math

import pytest

from urnscheme.cli import fmt, main

CONFIG = """
version = 1
[distribution]
kind = "zipf"
theta = 0.5
[experiment]
n = 100000
grid = [0.5, 1.0]
kmax = 2
m_reps = 400
master_seed = 11
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(CONFIG)
    return path


class TestFormatting:
    def test_round_trip_digits(self):
        x = 0.1 + 0.2
        assert float(fmt(x)) == x
        assert fmt(3) == "3" and fmt(float("nan")) == "nan" and fmt(True) == "true"


class TestMain:
    def test_no_arguments(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 2

    def test_theory_value(self, capsys):
        assert main(["theory", "--theta", "0.5", "--i", "1", "--j", "1", "--tau", "1", "--t", "1"]) == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(0.734174, abs=1e-6)

    def test_theory_bad_theta(self, capsys):
        assert main(["theory", "--theta", "1.5"]) == 2

    def test_theory_table(self, tmp_path, capsys):
        code = main(["theory", "--theta", "0.5", "--table", "--nu", "2", "--grid", "0.5,1",
                     "--n", "10000", "--identity", "--out-dir", str(tmp_path)])
        assert code == 0
        paths = capsys.readouterr().out.split()
        rows = list(csv.DictReader(open(paths[0])))
        assert list(rows[0]) == ["i", "j", "tau", "t", "theta", "c_star", "c_tilde_over_alpha", "residual"]
        assert len(rows) == 2 * 2 * 2 * 2
        r = rows[-1]
        assert float(r["residual"]) == pytest.approx(float(r["c_tilde_over_alpha"]) - float(r["c_star"]))
        ident = list(csv.DictReader(open(paths[1])))
        assert all(float(x["residual"]) <= 1e-10 for x in ident)

    def test_verify_passing_config_and_outputs(self, config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["verify", str(config), "--out-dir", str(out)])
        captured = capsys.readouterr()
        printed = captured.out.split()
        assert code == 0, captured.err
        assert str(out / "report.json") in printed
        report = json.loads((out / "report.json").read_text())
        assert report["passed"] is True
        rows = list(csv.DictReader(open(out / "report_covariance.csv")))
        first = report["tables"]["covariance"][0]
        assert float(rows[0]["empirical"]) == first["empirical"]

    def test_verify_failure_exit_code(self, tmp_path, capsys):
        path = tmp_path / "strict.toml"
        path.write_text(CONFIG + "[tolerances]\ncov_rel = 1e-9\ncov_se = 1e-9\nvar_rel = 1e-9\n")
        assert main(["verify", str(path), "--out-dir", str(tmp_path / "o")]) == 1

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text(CONFIG.replace("grid = [0.5, 1.0]", "grid = [0.5, 0.2]"))
        assert main(["verify", str(path)]) == 2
        assert "grid not ascending" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["verify", str(tmp_path / "nope.toml")]) == 2

    def test_seed_override_changes_output(self, config, tmp_path, capsys):
        main(["verify", str(config), "--out-dir", str(tmp_path / "a"), "--format", "json"])
        main(["verify", str(config), "--out-dir", str(tmp_path / "b"), "--format", "json", "--seed", "12"])
        a = (tmp_path / "a" / "report.json").read_text()
        b = (tmp_path / "b" / "report.json").read_text()
        assert a != b
        assert not (tmp_path / "a" / "report_covariance.csv").exists()

    def test_env_default_directory(self, config, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("URNSCHEME_OUT_DIR", str(tmp_path / "env"))
        assert main(["simulate", str(config), "--format", "csv"]) == 0
        assert (tmp_path / "env" / "paths.csv").exists()

    def test_simulate_rows(self, config, tmp_path, capsys):
        assert main(["simulate", str(config), "--out-dir", str(tmp_path), "--format", "csv"]) == 0
        rows = list(csv.DictReader(open(tmp_path / "paths.csv")))
        assert len(rows) == 400 * 2 * 2
        assert set(rows[0]) == {"rep", "t", "k", "r_star", "normalized"}

    def test_gp_outputs(self, tmp_path, capsys):
        assert main(["gp", "--theta", "0.5", "--nu", "2", "--grid", "0.5,1", "--reps", "4",
                     "--out-dir", str(tmp_path)]) == 0
        kernel = list(csv.DictReader(open(tmp_path / "gp_kernel.csv")))
        assert len(kernel) == 16
        assert float(kernel[15]["value"]) == pytest.approx(
            float(next(r for r in kernel if r["row"] == "3" and r["col"] == "3")["value"]))
        paths = list(csv.DictReader(open(tmp_path / "gp_paths.csv")))
        assert len(paths) == 4 * 2 * 2

    def test_gp_wiener(self, tmp_path, capsys):
        assert main(["gp", "--theta", "1", "--reps", "3", "--format", "json", "--out-dir", str(tmp_path)]) == 0
        data = json.loads((tmp_path / "gp.json").read_text())
        assert len(data["paths"]) == 3 * 4

    def test_estimate(self, capsys):
        assert main(["estimate", "--r-n", "1000", "--n", "1000000"]) == 0
        assert float(capsys.readouterr().out) == pytest.approx(0.5)
        assert main(["estimate"]) == 2

    def test_estimate_from_config(self, config, capsys):
        assert main(["estimate", "--config", str(config)]) == 0
        assert 0.3 < float(capsys.readouterr().out) < 0.7

    def test_byte_identical_across_threads(self, config, tmp_path, capsys):
        main(["verify", str(config), "--out-dir", str(tmp_path / "t1"), "--threads", "1"])
        main(["verify", str(config), "--out-dir", str(tmp_path / "t4"), "--threads", "4"])
        for name in ("report.json", "report_covariance.csv", "report_criteria.csv"):
            assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes()

    def test_json_mirrors_csv(self, config, tmp_path, capsys):
        main(["verify", str(config), "--out-dir", str(tmp_path)])
        report = json.loads((tmp_path / "report.json").read_text())
        rows = list(csv.DictReader(open(tmp_path / "report_criteria.csv")))
        for row, item in zip(rows, report["tables"]["criteria"]):
            assert float(row["value"]) == item["value"]
            assert math.isfinite(item["value"])
