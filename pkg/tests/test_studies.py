import json
from pathlib import Path

import numpy as np
import pytest

from overlap_lab import (
    KernelSpec,
    ace_difference_in_means,
    ace_oracle,
    crump_region,
    fit_kernel_svm,
    fit_logistic,
    margin_set,
)
from overlap_lab.reports import report_json, sanitize
from overlap_lab.studies import run_phase_transition_study, subseed

from helpers import varying_propensity_dataset

SMALL_STUDY_CFG = {
    "study": {
        "grid_sizes": [8, 16],
        "n_samples": 300,
        "n_components": 8,
        "kl_terms": 20,
    }
}


@pytest.fixture(scope="module")
def small_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    return run_phase_transition_study(SMALL_STUDY_CFG, 7, out), out


class TestPhaseTransitionStudy:

    def test_cell_structure(self, small_study):
        report, _ = small_study
        for spec in ("convergent", "divergent"):
            for g in ("8", "16"):
                cell = report["results"][spec][g]
                assert set(cell) >= {
                    "divergence_model",
                    "divergence_empirical",
                    "phase_transition",
                    "phase_verdict",
                    "svm",
                }
                assert cell["svm"]["n_train"] + cell["svm"]["n_test"] == 300

    def test_curves_emitted(self, small_study):
        report, out = small_study
        lines = (out / "curves.csv").read_text().strip().splitlines()
        assert lines[0].startswith("spec,grid_size")
        assert len(lines) == 1 + 2 * 2

    def test_api_determinism(self, small_study, tmp_path):
        report, _ = small_study
        again = run_phase_transition_study(SMALL_STUDY_CFG, 7, tmp_path)
        assert report_json(report) == report_json(again)

    def test_null_spec_accuracy_near_chance(self, tmp_path):
        cfg = {
            "study": {
                "grid_sizes": [8, 32],
                "specs": {"null": {"c_family": "inverse-square", "a_family": "zero"}},
            }
        }
        report = run_phase_transition_study(cfg, 20260809, tmp_path)
        for g in ("8", "32"):
            acc = report["results"]["null"][g]["svm"]["accuracy"]
            assert abs(acc - 0.5) <= 0.05
            coef = report["results"]["null"][g]["divergence_model"]["bhat_coefficient"]
            assert coef == pytest.approx(1.0, abs=1e-12)


class TestSubseed:
    def test_stable_and_distinct(self):
        assert subseed(1, "a", 2) == subseed(1, "a", 2)
        assert subseed(1, "a", 2) != subseed(1, "a", 3)
        assert subseed(1, "a") != subseed(2, "a")


class TestReportSerialization:
    def test_json_roundtrip_reproduces_numbers_exactly(self):
        report = {
            "task": "estimate",
            "values": [0.1, 1e-17, 123456.789012345, float(np.float64(2.5))],
            "nested": {"x": np.float64(0.3333333333333333), "n": np.int64(7)},
        }
        text = report_json(report)
        back = json.loads(text)
        assert back["values"] == sanitize(report)["values"]
        assert back["nested"]["x"] == 0.3333333333333333
        assert back["nested"]["n"] == 7

    def test_identical_reports_identical_bytes(self):
        report = {"b": 1.5, "a": [1, 2, 3]}
        assert report_json(report) == report_json(dict(reversed(report.items())))


class TestSimulationConsistency:
    def test_trimmed_estimate_approaches_oracle_with_n(self):
        # difference in means on the trimmed subpopulation tracks the oracle
        # subpopulation effect, with shrinking error from n=500 to n=5000
        def trimmed_error(seed, n):
            data, _ = varying_propensity_dataset(seed, n=n)
            fit = fit_logistic(data)
            region = crump_region(fit.scores)
            est = ace_difference_in_means(data, region.member).estimate
            truth = ace_oracle(data, region.member)
            return abs(est - truth)

        small = np.mean([trimmed_error(40 + k, 500) for k in range(5)])
        large = np.mean([trimmed_error(40 + k, 5000) for k in range(5)])
        assert large < small

    def test_margin_estimate_approaches_oracle_with_n(self):
        def margin_error(seed, n):
            data, _ = varying_propensity_dataset(seed, n=n)
            fit = fit_kernel_svm(data, KernelSpec(sigma2=1.0), lam=0.5, tol=1e-4)
            member = margin_set(fit, 1.0).member_mask(data.n)
            est = ace_difference_in_means(data, member).estimate
            truth = ace_oracle(data, member)
            return abs(est - truth)

        small = np.mean([margin_error(60 + k, 300) for k in range(3)])
        large = np.mean([margin_error(60 + k, 1200) for k in range(3)])
        assert large < small
