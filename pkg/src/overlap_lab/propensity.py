"""Propensity models, margin sets and the variance-based trimming region.

Two propensity fits are supported: logistic regression by iteratively
reweighted least squares, producing probabilities for weighting and trimming,
and a kernel support vector machine whose decision values define the margin
subpopulation.  SVM outputs are deliberately never converted to
probabilities; the margin is their only downstream use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyMarginError,
    InvalidConfigError,
    MissingGroupError,
    SeparationError,
    UnsupportedModelError,
)
from .gp import KernelSpec, kernel_gram
from .svm import smo_solve

_SCORE_CLIP = 1e-12


@dataclass(frozen=True)
class ObservationalDataset:
    """Per-unit outcome y, treatment t in {0,1} and covariate rows z.

    Oracle potential outcomes are simulation-only; when both are present the
    consistency identity y = y1 * t + y0 * (1 - t) is enforced.
    """

    y: np.ndarray
    t: np.ndarray
    z: np.ndarray
    covariate_names: tuple[str, ...] | None = None
    oracle_y0: np.ndarray | None = None
    oracle_y1: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        t = np.asarray(self.t)
        z = np.atleast_2d(np.asarray(self.z, dtype=float))
        if z.shape[0] == 1 and y.size > 1:
            z = z.T
        n = y.size
        if y.ndim != 1 or t.shape != (n,) or z.shape[0] != n:
            raise InvalidConfigError("y, t and z must have one row per unit")
        if not np.all(np.isin(t, (0, 1))):
            raise InvalidConfigError("treatment must be 0 or 1")
        t = t.astype(int)
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
            raise InvalidConfigError("outcome and covariates must be finite")
        names = self.covariate_names
        if names is not None:
            names = tuple(names)
            if len(names) != z.shape[1]:
                raise InvalidConfigError("one covariate name per column is required")
        y0, y1 = self.oracle_y0, self.oracle_y1
        if (y0 is None) != (y1 is None):
            raise InvalidConfigError("oracle outcomes must come as a pair")
        if y0 is not None:
            y0 = np.asarray(y0, dtype=float)
            y1 = np.asarray(y1, dtype=float)
            if y0.shape != (n,) or y1.shape != (n,):
                raise InvalidConfigError("oracle outcomes must have one value per unit")
            observed = y1 * t + y0 * (1 - t)
            if not np.allclose(y, observed, atol=1e-8):
                raise InvalidConfigError(
                    "consistency violated: y must equal y1*t + y0*(1-t)"
                )
        for attr, val in (
            ("y", y),
            ("t", t),
            ("z", z),
            ("covariate_names", names),
            ("oracle_y0", y0),
            ("oracle_y1", y1),
        ):
            object.__setattr__(self, attr, val)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def signed_labels(self) -> np.ndarray:
        """Treatment recoded to {-1, +1} for margin-based fitting."""
        return 2.0 * self.t - 1.0

    def subset(self, index) -> "ObservationalDataset":
        index = np.asarray(index)
        return ObservationalDataset(
            y=self.y[index],
            t=self.t[index],
            z=self.z[index],
            covariate_names=self.covariate_names,
            oracle_y0=None if self.oracle_y0 is None else self.oracle_y0[index],
            oracle_y1=None if self.oracle_y1 is None else self.oracle_y1[index],
        )


@dataclass(frozen=True)
class PropensityFit:
    """Fitted propensity model: logistic scores or SVM decision values."""

    kind: str
    scores: np.ndarray | None = None
    decision_values: np.ndarray | None = None
    coefficients: np.ndarray | None = None  # logistic: [intercept, coef_1..coef_p]
    dual_weights: np.ndarray | None = None
    support_indices: np.ndarray | None = None
    lam: float | None = None
    kernel: KernelSpec | None = None
    kkt_residual: float | None = None
    n_iterations: int = 0
    ll_path: tuple[float, ...] = ()
    train_z: np.ndarray | None = field(default=None, repr=False)
    train_labels: np.ndarray | None = field(default=None, repr=False)


def _require_both_arms(t: np.ndarray) -> None:
    if not (np.any(t == 1) and np.any(t == 0)):
        raise MissingGroupError("both treatment arms are required for fitting")


def _log_likelihood(eta: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(t * eta - np.logaddexp(0.0, eta)))


def fit_logistic(
    data: ObservationalDataset,
    max_iter: int = 100,
    tol: float = 1e-8,
    ridge: float = 1e-8,
) -> PropensityFit:
    """Maximum-likelihood logistic propensity fit by IRLS with step halving.

    The ridge term only stabilizes the normal equations for rank-deficient
    designs; it is not a penalty on the likelihood.  Perfect separation is an
    error, not a warning: a strictly sign-perfect iterate proves the data are
    completely separated, which is exactly the positivity violation this
    model is meant to surface.
    """
    _require_both_arms(data.t)
    n = data.n
    x = np.column_stack([np.ones(n), data.z])
    t = data.t.astype(float)
    signs = data.signed_labels
    beta = np.zeros(x.shape[1])
    eta = x @ beta
    ll = _log_likelihood(eta, t)
    ll_path = [ll]
    grad_tol = tol * max(1.0, float(n))
    it = 0
    for it in range(1, max_iter + 1):
        # a strictly sign-perfect iterate proves complete separation; a huge
        # linear predictor is quasi-separation in float arithmetic
        if np.min(signs * eta) > 0.0:
            raise SeparationError(
                "perfect separation: a sign-perfect linear predictor exists, "
                "so the propensity is not bounded away from 0 and 1"
            )
        if np.max(np.abs(eta)) >= 100.0:
            raise SeparationError(
                "propensity scores numerically degenerate "
                "(|linear predictor| >= 100); treating as quasi-separation"
            )
        p = 1.0 / (1.0 + np.exp(-eta))
        grad = x.T @ (t - p)
        if np.max(np.abs(grad)) <= grad_tol:
            break
        w = np.clip(p * (1.0 - p), 1e-10, None)
        h = (x.T * w) @ x
        h[np.diag_indices_from(h)] += ridge * max(1.0, float(np.trace(h)) / h.shape[0])
        step = np.linalg.solve(h, grad)
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            cand_eta = x @ cand
            cand_ll = _log_likelihood(cand_eta, t)
            if cand_ll >= ll - 1e-12:
                break
            scale *= 0.5
        beta, eta, ll = cand, cand_eta, cand_ll
        ll_path.append(ll)
    p = 1.0 / (1.0 + np.exp(-eta))
    scores = np.clip(p, _SCORE_CLIP, 1.0 - _SCORE_CLIP)
    return PropensityFit(
        kind="logistic",
        scores=scores,
        coefficients=beta,
        n_iterations=it,
        ll_path=tuple(ll_path),
    )


def predict_propensity(fit: PropensityFit, z) -> np.ndarray:
    """Inverse-logit of the linear predictor for new covariate rows."""
    if fit.kind != "logistic":
        raise UnsupportedModelError(
            "only logistic fits produce probabilities; SVM decision values "
            "are margin scores, not propensities"
        )
    z = np.atleast_2d(np.asarray(z, dtype=float))
    eta = fit.coefficients[0] + z @ fit.coefficients[1:]
    p = 1.0 / (1.0 + np.exp(-eta))
    return np.clip(p, _SCORE_CLIP, 1.0 - _SCORE_CLIP)


def fit_kernel_svm(
    data: ObservationalDataset,
    kernel: KernelSpec,
    lam: float,
    tol: float = 1e-5,
    max_updates: int | None = None,
) -> PropensityFit:
    """Fit the hinge + lam ||f||_K^2 objective via the dual solver.

    Labels are the treatment recoded to {-1, +1}; decision values f(Z_i) are
    returned for every unit together with the worst KKT residual.
    """
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidConfigError("lambda must be > 0")
    _require_both_arms(data.t)
    y = data.signed_labels
    if kernel.kind == "gaussian":
        k = kernel_gram(kernel, data.z)
    else:
        k = kernel.matrix
        if k.shape[0] != data.n:
            raise InvalidConfigError("user kernel matrix must match the sample size")
        eig_min = float(np.linalg.eigvalsh(k)[0])
        if eig_min < -1e-8 * max(float(np.abs(k).max()), 1e-300):
            raise InvalidConfigError(f"kernel matrix is not PSD (min eigenvalue {eig_min:.3e})")
    sol = smo_solve(k, y, c_box=1.0 / (2.0 * lam), tol=tol, max_updates=max_updates)
    support = np.flatnonzero(sol.alpha > 1e-12)
    return PropensityFit(
        kind="svm",
        decision_values=sol.decision_values,
        dual_weights=sol.alpha,
        support_indices=support,
        lam=lam,
        kernel=kernel,
        kkt_residual=sol.kkt_residual,
        n_iterations=sol.n_updates,
        train_z=data.z,
        train_labels=y,
    )


def svm_decision_function(fit: PropensityFit, z) -> np.ndarray:
    """Decision values f(z) = sum_i alpha_i y_i K(z, Z_i) at new points."""
    if fit.kind != "svm":
        raise UnsupportedModelError("decision function requires an svm fit")
    if fit.kernel.kind != "gaussian":
        raise UnsupportedModelError(
            "out-of-sample decisions need a pointwise kernel (gaussian)"
        )
    z = np.atleast_2d(np.asarray(z, dtype=float))
    idx = fit.support_indices
    cross = kernel_gram(fit.kernel, z, fit.train_z[idx])
    return cross @ (fit.dual_weights[idx] * fit.train_labels[idx])


@dataclass(frozen=True)
class MarginSet:
    """Units whose decision value lies inside the hinge elbow."""

    indices: np.ndarray
    threshold: float

    def member_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.indices] = True
        return mask


def margin_set(fit: PropensityFit, threshold: float = 1.0) -> MarginSet:
    """Indices with |f(Z_i)| <= threshold (default 1, the hinge elbow)."""
    if fit.kind != "svm":
        raise UnsupportedModelError("margin extraction requires an svm fit")
    if not threshold > 0:
        raise InvalidConfigError("margin threshold must be positive")
    idx = np.flatnonzero(np.abs(fit.decision_values) <= threshold)
    if idx.size == 0:
        raise EmptyMarginError(
            "no unit has |f| <= threshold; the margin estimand is undefined"
        )
    return MarginSet(indices=idx, threshold=float(threshold))


@dataclass(frozen=True)
class TrimmingRegion:
    """Propensity trimming region [c*, 1 - c*] with per-unit membership."""

    c_star: float
    member: np.ndarray
    degenerate: bool = False


def crump_region(scores: np.ndarray, grid_step: float = 0.001) -> TrimmingRegion:
    """Variance-minimizing trimming cutoff on a grid over [0, 0.5).

    c* is the smallest grid value satisfying

        1 / (c (1 - c)) <= 2 * mean{ 1 / (e (1 - e)) : e in [c, 1 - c] },

    the optimality rule that depends only on the marginal score distribution.
    If no grid value qualifies, the largest cutoff keeping the region
    nonempty is returned with the degenerate flag set.
    """
    e = np.asarray(scores, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise InvalidConfigError("scores must be a nonempty vector")
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise InvalidConfigError("scores must lie strictly in (0, 1)")
    g = 1.0 / (e * (1.0 - e))
    grid = np.arange(0.0, 0.5, grid_step)
    fallback = None
    for c in grid:
        mask = (e >= c) & (e <= 1.0 - c)
        if not mask.any():
            break
        fallback = c
        lhs = np.inf if c == 0.0 else 1.0 / (c * (1.0 - c))
        if lhs <= 2.0 * float(np.mean(g[mask])):
            return TrimmingRegion(c_star=float(c), member=mask, degenerate=False)
    if fallback is None:
        raise InvalidConfigError("no nonempty trimming region exists on the grid")
    mask = (e >= fallback) & (e <= 1.0 - fallback)
    return TrimmingRegion(c_star=float(fallback), member=mask, degenerate=True)


def propensity_fit_to_dict(fit: PropensityFit) -> dict:
    """JSON-ready model artifact (coefficients, or dual weights + kernel)."""
    if fit.kind == "logistic":
        return {
            "kind": "logistic",
            "coefficients": [float(b) for b in fit.coefficients],
            "n_iterations": fit.n_iterations,
        }
    idx = fit.support_indices
    out = {
        "kind": "svm",
        "lambda": fit.lam,
        "kkt_residual": fit.kkt_residual,
        "n_updates": fit.n_iterations,
        "support_indices": [int(i) for i in idx],
        "dual_weights": [float(a) for a in fit.dual_weights[idx]],
        "support_labels": [float(v) for v in fit.train_labels[idx]],
        "kernel": {"kind": fit.kernel.kind},
    }
    if fit.kernel.kind == "gaussian":
        out["kernel"]["sigma2"] = fit.kernel.sigma2
        out["support_vectors"] = [[float(v) for v in row] for row in fit.train_z[idx]]
    return out
