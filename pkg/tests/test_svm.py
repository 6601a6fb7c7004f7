import numpy as np
import pytest

from overlap_lab import (
    KernelSpec,
    ObservationalDataset,
    fit_kernel_svm,
    margin_set,
    svm_decision_function,
)
from overlap_lab.errors import (
    EmptyMarginError,
    InvalidConfigError,
    MissingGroupError,
    UnsupportedModelError,
)
from overlap_lab.svm import kkt_violations, smo_solve


def linear_kernel_dataset(x, labels):
    x = np.asarray(x, dtype=float).reshape(len(labels), -1)
    k = x @ x.T
    t = (np.asarray(labels) > 0).astype(int)
    data = ObservationalDataset(y=np.zeros(len(labels)), t=t, z=x)
    return data, KernelSpec(kind="user-matrix", matrix=k)


class TestTwoPointProblem:
    def test_analytic_solution(self):
        # x = -1 (label -1) and x = +1 (label +1) with a linear kernel and a
        # small penalty solve to f(x) = x: both points sit on the margin
        data, kernel = linear_kernel_dataset([-1.0, 1.0], [-1, 1])
        fit = fit_kernel_svm(data, kernel, lam=1e-3, tol=1e-8)
        assert fit.decision_values[0] == pytest.approx(-1.0, abs=1e-6)
        assert fit.decision_values[1] == pytest.approx(1.0, abs=1e-6)

    def test_kkt_is_tight(self):
        data, kernel = linear_kernel_dataset([-1.0, 1.0], [-1, 1])
        fit = fit_kernel_svm(data, kernel, lam=1e-3, tol=1e-8)
        assert fit.kkt_residual <= 1e-8


def random_fit(seed, n=80, p=3, lam=0.05, tol=1e-6):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, p))
    t = (z[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(int)
    if t.all() or not t.any():
        t[0] = 1 - t[0]
    data = ObservationalDataset(y=np.zeros(n), t=t, z=z)
    kernel = KernelSpec(kind="gaussian", sigma2=float(p))
    return data, fit_kernel_svm(data, kernel, lam=lam, tol=tol)


class TestKKT:
    def test_every_unit_within_tol_from_scratch(self):
        # dedicated checker: recompute decisions and violations independently
        from overlap_lab.gp import kernel_gram

        for seed in range(5):
            data, fit = random_fit(seed, tol=1e-6)
            k = kernel_gram(fit.kernel, data.z)
            decision = k @ (fit.dual_weights * data.signed_labels)
            viol = kkt_violations(
                data.signed_labels, fit.dual_weights, decision, 1.0 / (2.0 * fit.lam)
            )
            assert np.max(viol) <= 1e-5
            assert np.all(np.isfinite(fit.decision_values))

    def test_duplicate_dataset_invariance(self):
        # duplicating every row doubles the hinge sum; doubling lambda
        # restores the same argmin, so decisions agree on the originals
        data, fit = random_fit(3, n=60, lam=0.05, tol=1e-8)
        dup = ObservationalDataset(
            y=np.concatenate([data.y, data.y]),
            t=np.concatenate([data.t, data.t]),
            z=np.vstack([data.z, data.z]),
        )
        fit2 = fit_kernel_svm(dup, fit.kernel, lam=2 * 0.05, tol=1e-8)
        assert np.allclose(fit2.decision_values[:60], fit.decision_values, atol=1e-4)

    def test_row_permutation_invariance(self):
        data, fit = random_fit(4, n=70, tol=1e-8)
        rng = np.random.default_rng(0)
        perm = rng.permutation(data.n)
        permuted = ObservationalDataset(
            y=data.y[perm], t=data.t[perm], z=data.z[perm]
        )
        fit2 = fit_kernel_svm(permuted, fit.kernel, lam=fit.lam, tol=1e-8)
        assert np.allclose(fit2.decision_values, fit.decision_values[perm], atol=1e-4)


class TestMarginSet:
    def test_definition(self):
        from overlap_lab import PropensityFit

        fit = PropensityFit(
            kind="svm", decision_values=np.array([-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])
        )
        m = margin_set(fit, 1.0)
        assert list(m.indices) == [1, 2, 3, 4]

    def test_empty_margin_raises(self):
        from overlap_lab import PropensityFit

        fit = PropensityFit(kind="svm", decision_values=np.array([-3.0, 2.5, 4.0]))
        with pytest.raises(EmptyMarginError):
            margin_set(fit, 1.0)

    def test_monotone_in_threshold(self):
        _, fit = random_fit(7, n=100)
        prev = set()
        for threshold in (0.25, 0.5, 1.0, 2.0, 4.0):
            idx = set(margin_set(fit, threshold).indices.tolist())
            assert prev <= idx
            prev = idx

    def test_requires_svm_fit(self):
        from overlap_lab import fit_logistic

        data, _ = random_fit(8)
        logit = fit_logistic(data)
        with pytest.raises(UnsupportedModelError):
            margin_set(logit, 1.0)

    def test_positive_threshold_required(self):
        _, fit = random_fit(9)
        with pytest.raises(InvalidConfigError):
            margin_set(fit, 0.0)


class TestFitValidation:
    def test_single_class_rejected(self):
        data = ObservationalDataset(
            y=np.zeros(4), t=np.ones(4, dtype=int), z=np.arange(4.0)
        )
        with pytest.raises(MissingGroupError):
            fit_kernel_svm(data, KernelSpec(sigma2=1.0), lam=0.1)

    def test_non_psd_user_matrix_rejected(self):
        data = ObservationalDataset(
            y=np.zeros(2), t=np.array([0, 1]), z=np.array([[0.0], [1.0]])
        )
        bad = KernelSpec(kind="user-matrix", matrix=np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(InvalidConfigError):
            fit_kernel_svm(data, bad, lam=0.1)

    def test_lambda_positive(self):
        data = ObservationalDataset(
            y=np.zeros(2), t=np.array([0, 1]), z=np.array([[0.0], [1.0]])
        )
        with pytest.raises(InvalidConfigError):
            fit_kernel_svm(data, KernelSpec(sigma2=1.0), lam=0.0)


class TestDecisionFunction:
    def test_out_of_sample_matches_in_sample(self):
        data, fit = random_fit(10, n=50)
        recomputed = svm_decision_function(fit, data.z)
        assert np.allclose(recomputed, fit.decision_values, atol=1e-8)

    def test_rejects_user_matrix_kernel(self):
        data, kernel = linear_kernel_dataset([-1.0, 1.0], [-1, 1])
        fit = fit_kernel_svm(data, kernel, lam=0.01)
        with pytest.raises(UnsupportedModelError):
            svm_decision_function(fit, np.array([[0.5]]))


class TestSolver:
    def test_flat_diagonal_direction(self):
        # a zero kernel column stays at the bound its gradient points to
        k = np.array([[0.0, 0.0], [0.0, 1.0]])
        y = np.array([1.0, -1.0])
        sol = smo_solve(k, y, c_box=2.0, tol=1e-10)
        assert sol.alpha[0] == 2.0
        assert sol.kkt_residual <= 1e-10

    def test_update_budget_enforced(self):
        rng = np.random.default_rng(11)
        z = rng.normal(size=(40, 2))
        k = z @ z.T
        y = np.where(rng.random(40) < 0.5, 1.0, -1.0)
        with pytest.raises(RuntimeError):
            smo_solve(k, y, c_box=100.0, tol=1e-14, max_updates=3)
