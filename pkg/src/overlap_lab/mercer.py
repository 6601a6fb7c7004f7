"""Empirical Mercer spectra and the phase-transition statistic.

The integral operator of the pooled covariance is discretized with trapezoid
quadrature: with weights W = diag(w), the symmetric problem
W^{1/2} C W^{1/2} u = c u gives eigenfunctions psi = W^{-1/2} u that are
orthonormal under the quadrature inner product <f, g> = sum_i w_i f_i g_i.

The overlap statistic is the partial sum S_J = sum_{j<=J} a_j^2 / c_j of the
squared mean-difference coefficients over the eigenvalues: a convergent
series is compatible with strict functional overlap, a divergent one rules it
out.  Divergence is not decidable at finite J, so the verdict is a growth
heuristic on the partial sums and is labeled as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfigError, MissingGroupError
from .gp import FunctionalSampleSet, Grid

#: Relative eigenvalue floor applied before dividing by estimated eigenvalues.
DEFAULT_RIDGE_FACTOR = 1e-10


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Trapezoid quadrature weights for the grid points."""
    t = grid.points
    if t.size == 1:
        return np.ones(1)
    w = np.empty_like(t)
    w[0] = 0.5 * (t[1] - t[0])
    w[-1] = 0.5 * (t[-1] - t[-2])
    w[1:-1] = 0.5 * (t[2:] - t[:-2])
    return w


@dataclass(frozen=True)
class SpectralEstimate:
    """Top-J eigenpairs of the pooled covariance operator.

    eigenvectors[j] is psi_j on the grid (rows), orthonormal under the
    quadrature weights; mean_coeffs holds the projections of the group-mean
    difference and is None until projected.
    """

    grid: Grid
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    quadrature_weights: np.ndarray
    ridge: float
    mean_coeffs: np.ndarray | None = None


@dataclass(frozen=True)
class PhaseTransitionReport:
    """Partial sums S_1..S_J of a_j^2 / c_j and their growth diagnostic."""

    partial_sums: np.ndarray
    growth_ratio: float

    @property
    def statistic(self) -> float:
        return float(self.partial_sums[-1])

    def as_dict(self) -> dict:
        return {
            "partial_sums": [float(s) for s in self.partial_sums],
            "statistic": self.statistic,
            "growth_ratio": self.growth_ratio,
        }


def empirical_eigendecomposition(
    samples: FunctionalSampleSet, n_components: int, ridge: float | None = None
) -> SpectralEstimate:
    """Estimate the shared spectrum from paths, pooling both groups.

    Each group is centered at its own mean before pooling, matching the
    shared-covariance model.  Eigenvalues below the ridge floor (default
    1e-10 times the top eigenvalue) are raised to it so later division by
    c_j stays finite.
    """
    if n_components < 1:
        raise InvalidConfigError("n_components must be >= 1")
    if n_components > samples.grid.size:
        raise InvalidConfigError(
            f"n_components={n_components} exceeds grid size {samples.grid.size}"
        )
    if samples.n_samples < n_components:
        raise InvalidConfigError("pooled sample size must be >= n_components")
    centered = samples.values.copy()
    n_groups = 0
    for g in (0, 1):
        mask = samples.group == g
        if mask.any():
            centered[mask] -= centered[mask].mean(axis=0)
            n_groups += 1
    dof = max(samples.n_samples - n_groups, 1)
    cov = centered.T @ centered / dof

    w = trapezoid_weights(samples.grid)
    sqrt_w = np.sqrt(w)
    sym = sqrt_w[:, None] * cov * sqrt_w[None, :]
    eigvals, eigvecs = np.linalg.eigh(sym)
    order = np.argsort(eigvals)[::-1][:n_components]
    c = np.clip(eigvals[order], 0.0, None)
    psi = (eigvecs[:, order] / sqrt_w[:, None]).T
    if ridge is None:
        ridge = DEFAULT_RIDGE_FACTOR * max(float(c[0]), np.finfo(float).tiny)
    if ridge < 0:
        raise InvalidConfigError("ridge must be >= 0")
    c = np.maximum(c, ridge)
    return SpectralEstimate(
        grid=samples.grid,
        eigenvalues=c,
        eigenvectors=psi,
        quadrature_weights=w,
        ridge=float(ridge),
    )


def project_mean_difference(
    samples: FunctionalSampleSet, spectral: SpectralEstimate
) -> SpectralEstimate:
    """Fill mean_coeffs with a_j = <mean1 - mean0, psi_j> under quadrature."""
    if not np.array_equal(samples.grid.points, spectral.grid.points):
        raise InvalidConfigError("samples and spectral estimate must share a grid")
    for g in (0, 1):
        if not np.any(samples.group == g):
            raise MissingGroupError(f"group {g} has no samples")
    diff = samples.rows(1).mean(axis=0) - samples.rows(0).mean(axis=0)
    coeffs = spectral.eigenvectors @ (spectral.quadrature_weights * diff)
    return replace(spectral, mean_coeffs=coeffs)


def phase_transition_statistic(
    eigenvalues: np.ndarray, mean_coeffs: np.ndarray
) -> PhaseTransitionReport:
    """Partial sums S_J = sum_{j<=J} a_j^2 / c_j and the growth ratio
    S_J / S_{ceil(J/2)} (defined as 1 when the half sum is zero)."""
    c = np.asarray(eigenvalues, dtype=float)
    a = np.asarray(mean_coeffs, dtype=float)
    if c.shape != a.shape or c.ndim != 1 or c.size == 0:
        raise InvalidConfigError("eigenvalues and coefficients must match, nonempty")
    if np.any(c <= 0):
        raise InvalidConfigError("eigenvalues must be > 0 after ridge flooring")
    sums = np.cumsum(a**2 / c)
    half = sums[(c.size + 1) // 2 - 1]
    ratio = 1.0 if half == 0.0 else float(sums[-1] / half)
    return PhaseTransitionReport(partial_sums=sums, growth_ratio=ratio)


def spectral_phase_report(spectral: SpectralEstimate) -> PhaseTransitionReport:
    if spectral.mean_coeffs is None:
        raise InvalidConfigError("project the mean difference before the statistic")
    return phase_transition_statistic(spectral.eigenvalues, spectral.mean_coeffs)


def overlap_verdict(
    report: PhaseTransitionReport,
    growth_threshold: float = 2.0,
    plausible_threshold: float = 1.1,
) -> str:
    """Heuristic verdict from partial-sum growth.

    Fast-growing partial sums behave like a divergent series (overlap cannot
    hold); flat ones are compatible with a convergent series (overlap
    plausible); in between is inconclusive.  Any finite truncation of a
    divergent series is finite, so only growth is observable.
    """
    if growth_threshold <= plausible_threshold:
        raise InvalidConfigError("growth_threshold must exceed plausible_threshold")
    ratio = report.growth_ratio
    if ratio >= growth_threshold:
        return "orthogonal-overlap-violated"
    if ratio <= plausible_threshold and np.isfinite(report.statistic):
        return "equivalent-overlap-plausible"
    return "inconclusive"
