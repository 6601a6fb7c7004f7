import json
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from overlap_lab.cli import main

from helpers import confounded_dataset


@pytest.fixture
def runner():
    return CliRunner()


def write_tall_csv(path, seed=0, n=160):
    data, _ = confounded_dataset(seed, n=n)
    rows = ["y,t,z1"]
    for i in range(data.n):
        rows.append(f"{float(data.y[i])!r},{int(data.t[i])},{float(data.z[i, 0])!r}")
    path.write_text("\n".join(rows) + "\n")
    return path


def base_config(tmp_path, extra="", seed=11):
    csv_path = write_tall_csv(tmp_path / "data.csv")
    cfg = tmp_path / "config.toml"
    cfg.write_text(
        f'seed = {seed}\n\n[dataset]\npath = "{csv_path}"\noutcome = "y"\ntreatment = "t"\n'
        + extra
    )
    return cfg


def run_ok(runner, args):
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output + str(result.exception)
    return result


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text())


class TestSimulate:
    def simulate_cfg(self, tmp_path):
        cfg = tmp_path / "sim.toml"
        cfg.write_text(
            "seed = 5\n[simulate]\nc_family = 'inverse-square'\n"
            "a_family = 'harmonic'\ngrid_size = 12\nkl_terms = 8\n"
            "n_samples = 25\nnoise_sd = 0.05\n"
        )
        return cfg

    def test_writes_samples_and_report(self, runner, tmp_path):
        cfg = self.simulate_cfg(tmp_path)
        out = tmp_path / "out"
        run_ok(runner, ["simulate", "--config", str(cfg), "--out", str(out)])
        report = read_report(out)
        assert report["task"] == "simulate"
        assert report["n_samples"] == 50  # both groups
        assert (out / "samples.csv").exists()
        assert (out / "report.md").exists()

    def test_mercer_spec_flag(self, runner, tmp_path):
        from overlap_lab import Grid, mercer_from_families, save_mercer_spec

        spec = mercer_from_families(Grid.regular(6), "geometric", "zero", 4)
        spec_path = tmp_path / "spec.txt"
        save_mercer_spec(spec, spec_path)
        cfg = tmp_path / "sim.toml"
        cfg.write_text("seed = 5\n[simulate]\nn_samples = 10\n")
        out = tmp_path / "out2"
        run_ok(
            runner,
            [
                "simulate", "--config", str(cfg), "--out", str(out),
                "--mercer-spec", str(spec_path),
            ],
        )
        assert read_report(out)["grid_size"] == 6

    def test_byte_identical_reruns(self, runner, tmp_path):
        cfg = self.simulate_cfg(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_ok(runner, ["simulate", "--config", str(cfg), "--out", str(out1)])
        run_ok(runner, ["simulate", "--config", str(cfg), "--out", str(out2)])
        assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()
        assert (out1 / "samples.csv").read_bytes() == (out2 / "samples.csv").read_bytes()


class TestDiagnose:
    def test_divergence_from_spec_families(self, runner, tmp_path):
        cfg = tmp_path / "div.toml"
        cfg.write_text(
            "seed = 3\n[divergence]\nc_family = 'inverse-square'\n"
            "a_family = 'inverse-square'\ngrid_size = 16\nkl_terms = 12\nnoise_sd = 0.1\n"
        )
        out = tmp_path / "out"
        run_ok(runner, ["diagnose", "divergence", "--config", str(cfg), "--out", str(out)])
        report = read_report(out)
        assert report["verdict"] == "equivalent"
        assert "bhat_coefficient" in report["divergence"]

    def test_eps_b_flag_forces_orthogonal(self, runner, tmp_path):
        cfg = tmp_path / "div.toml"
        cfg.write_text(
            "seed = 3\n[divergence]\nc_family = 'inverse-square'\n"
            "a_family = 'inverse-square'\ngrid_size = 16\nkl_terms = 12\nnoise_sd = 0.1\n"
        )
        out = tmp_path / "out"
        run_ok(
            runner,
            [
                "diagnose", "divergence", "--config", str(cfg), "--out", str(out),
                "--eps-b", "0.99",
            ],
        )
        assert read_report(out)["verdict"] == "orthogonal"

    def test_phase_transition_from_samples(self, runner, tmp_path):
        sim_cfg = tmp_path / "sim.toml"
        sim_cfg.write_text(
            "seed = 6\n[simulate]\nc_family = 'geometric'\na_family = 'harmonic'\n"
            "grid_size = 24\nkl_terms = 20\nn_samples = 400\nnoise_sd = 0.1\n"
        )
        out = tmp_path / "sim_out"
        run_ok(runner, ["simulate", "--config", str(sim_cfg), "--out", str(out)])
        ph_cfg = tmp_path / "ph.toml"
        ph_cfg.write_text(
            f'seed = 6\n[phase_transition]\nsamples = "{out / "samples.csv"}"\n'
            "n_components = 12\n"
        )
        out2 = tmp_path / "ph_out"
        run_ok(
            runner, ["diagnose", "phase-transition", "--config", str(ph_cfg), "--out", str(out2)]
        )
        report = read_report(out2)
        assert report["phase_transition"]["growth_ratio"] > 0
        assert report["note"]
        assert len(report["phase_transition"]["partial_sums"]) == 12


class TestFitTrimMargin:
    def test_fit_logistic(self, runner, tmp_path):
        cfg = base_config(tmp_path)
        out = tmp_path / "out"
        run_ok(runner, ["fit", "logistic", "--config", str(cfg), "--out", str(out)])
        report = read_report(out)
        assert report["model"]["kind"] == "logistic"
        assert len(report["model"]["coefficients"]) == 2

    def test_fit_svm_with_flags(self, runner, tmp_path):
        cfg = base_config(tmp_path, "[svm]\ntol = 1e-5\n")
        out = tmp_path / "out"
        run_ok(
            runner,
            [
                "fit", "svm", "--config", str(cfg), "--out", str(out),
                "--sigma2", "1.5", "--lambda", "0.4",
            ],
        )
        report = read_report(out)
        assert report["model"]["kind"] == "svm"
        assert report["model"]["kernel"]["sigma2"] == 1.5
        assert report["model"]["lambda"] == 0.4
        assert report["model"]["kkt_residual"] <= 1e-4

    def test_trim_crump(self, runner, tmp_path):
        cfg = base_config(tmp_path)
        out = tmp_path / "out"
        run_ok(runner, ["trim", "crump", "--config", str(cfg), "--out", str(out)])
        report = read_report(out)
        assert report["n_retained"] + report["n_excluded"] == report["n"]
        assert len(report["member"]) == report["n"]

    def test_margin(self, runner, tmp_path):
        cfg = base_config(tmp_path, "[svm]\nsigma2 = 1.0\nlambda = 0.5\n")
        out = tmp_path / "out"
        run_ok(
            runner,
            ["margin", "--config", str(cfg), "--out", str(out), "--threshold", "1.0"],
        )
        report = read_report(out)
        assert report["n_margin"] + report["n_outside"] == report["n"]
        assert report["n_margin"] == len(report["indices"])


class TestEstimate:
    def test_dim_all(self, runner, tmp_path):
        cfg = base_config(tmp_path)
        out = tmp_path / "out"
        run_ok(
            runner,
            [
                "estimate", "--config", str(cfg), "--out", str(out),
                "--method", "dim", "--subpop", "all",
            ],
        )
        report = read_report(out)
        est = report["estimates"][0]
        assert est["estimand"] == "ace"
        assert est["n_subpop"] == 160
        md = (out / "report.md").read_text()
        for token in ("estimand", "n_subpop", "estimate", "SE", str(est["n_subpop"])):
            assert token in md

    def test_ipw_crump(self, runner, tmp_path):
        cfg = base_config(tmp_path)
        out = tmp_path / "out"
        run_ok(
            runner,
            [
                "estimate", "--config", str(cfg), "--out", str(out),
                "--method", "ipw", "--subpop", "crump",
            ],
        )
        est = read_report(out)["estimates"][0]
        assert est["estimand"] == "ace_region"
        assert "crump" in est["region_descriptor"]

    def test_margin_subpop(self, runner, tmp_path):
        cfg = base_config(
            tmp_path, "[svm]\nsigma2 = 1.0\nlambda = 0.5\n\n[estimate]\nn_boot = 0\n"
        )
        out = tmp_path / "out"
        run_ok(
            runner,
            [
                "estimate", "--config", str(cfg), "--out", str(out),
                "--method", "dim", "--subpop", "margin",
            ],
        )
        est = read_report(out)["estimates"][0]
        assert est["estimand"] == "ace_margin"
        assert est["n_subpop"] >= 2


class TestExplain:
    def test_margin_region_tree(self, runner, tmp_path):
        cfg = base_config(
            tmp_path,
            "[svm]\nsigma2 = 1.0\nlambda = 0.5\n\n[explain]\nregion = 'margin'\nmin_leaf = 5\nmax_depth = 3\n",
        )
        out = tmp_path / "out"
        run_ok(runner, ["explain", "--config", str(cfg), "--out", str(out), "--cc", "0.1"])
        report = read_report(out)
        assert report["cc"] == 0.1
        assert report["n_in_region"] + report["n_outside_region"] == 160
        assert report["tree"]["root"]["n"] == 160
        assert "leaf" in report["tree_outline"] or "split" in report["tree_outline"]


class TestRhc:
    def test_synthetic_stand_in(self, runner, tmp_path):
        # the real dataset is user-supplied; any CSV with the right schema runs,
        # with count verification reported rather than assumed
        cfg = base_config(
            tmp_path,
            "[rhc]\nsigma2_sweep = [0.5, 1.0]\nlambda = 0.5\nn_boot = 0\n"
            "min_leaf = 10\nmax_depth = 3\n",
        )
        out = tmp_path / "out"
        run_ok(runner, ["rhc", "--config", str(cfg), "--out", str(out)])
        report = read_report(out)
        assert report["counts"]["verified"] is False  # synthetic file
        assert len(report["sweep"]) == 2
        assert report["reference"]["margin_size"] == 3663
        assert report["reference"]["ace"] == 0.049
        assert report["reference"]["se"] == 0.016
        assert "tree_outline" in report


class TestErrorPaths:
    def test_missing_config_file(self, runner, tmp_path):
        result = runner.invoke(
            main, ["simulate", "--config", str(tmp_path / "nope.toml")]
        )
        assert result.exit_code == 2
        doc = json.loads(result.output.strip().splitlines()[-1])
        assert doc["error"] == "invalid-config"

    def test_missing_column_exit_code(self, runner, tmp_path):
        csv_path = tmp_path / "data.csv"
        csv_path.write_text("y,z1\n1.0,0.5\n")
        cfg = tmp_path / "config.toml"
        cfg.write_text(f'[dataset]\npath = "{csv_path}"\noutcome = "y"\ntreatment = "t"\n')
        result = runner.invoke(main, ["fit", "logistic", "--config", str(cfg)])
        assert result.exit_code == 3
        doc = json.loads(result.output.strip().splitlines()[-1])
        assert doc["error"] == "schema-mismatch"

    def test_parse_error_exit_code(self, runner, tmp_path):
        csv_path = tmp_path / "data.csv"
        csv_path.write_text("y,t,z1\n1.0,2,0.5\n0.0,0,0.1\n")
        cfg = tmp_path / "config.toml"
        cfg.write_text(f'[dataset]\npath = "{csv_path}"\noutcome = "y"\ntreatment = "t"\n')
        result = runner.invoke(main, ["fit", "logistic", "--config", str(cfg)])
        assert result.exit_code == 4

    def test_separation_exit_code(self, runner, tmp_path):
        rows = ["y,t,z1"]
        for i in range(30):
            z = (i - 15) / 5.0 + (0.1 if i >= 15 else -0.1)
            rows.append(f"0.0,{1 if z > 0 else 0},{z!r}")
        csv_path = tmp_path / "sep.csv"
        csv_path.write_text("\n".join(rows) + "\n")
        cfg = tmp_path / "config.toml"
        cfg.write_text(f'[dataset]\npath = "{csv_path}"\noutcome = "y"\ntreatment = "t"\n')
        result = runner.invoke(main, ["fit", "logistic", "--config", str(cfg)])
        assert result.exit_code == 6


class TestModuleEntryPoint:
    def test_python_dash_m(self, tmp_path):
        cfg = tmp_path / "sim.toml"
        cfg.write_text(
            "seed = 5\n[simulate]\nc_family = 'inverse-square'\na_family = 'zero'\n"
            "grid_size = 6\nkl_terms = 4\nn_samples = 5\n"
        )
        out = tmp_path / "out"
        proc = subprocess.run(
            [
                sys.executable, "-m", "overlap_lab", "simulate",
                "--config", str(cfg), "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (out / "report.json").exists()
