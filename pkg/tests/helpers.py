"""Shared simulation builders for the test suite."""

from __future__ import annotations

import numpy as np

from overlap_lab import FunctionalSampleSet, Grid, MercerSpec, ObservationalDataset
from overlap_lab.mercer import trapezoid_weights


def quadrature_orthonormal_basis(grid: Grid, n_terms: int) -> np.ndarray:
    """Fourier modes re-orthonormalized exactly under trapezoid quadrature."""
    w = trapezoid_weights(grid)
    t = grid.points
    raw = [np.ones_like(t)]
    for j in range(1, n_terms):
        raw.append(np.sqrt(2.0) * np.cos(j * np.pi * t))
    m = np.vstack(raw) * np.sqrt(w)
    q, r = np.linalg.qr(m.T)
    basis = (q / np.sqrt(w)[:, None]).T
    return basis * np.sign(np.diag(r))[:, None]


def diagonal_mercer(
    grid: Grid, eigenvalues, mean_coeffs=None
) -> MercerSpec:
    """Spec with a quadrature-orthonormal basis and the given spectrum."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    if mean_coeffs is None:
        mean_coeffs = np.zeros_like(eigenvalues)
    basis = quadrature_orthonormal_basis(grid, eigenvalues.size)
    return MercerSpec(
        grid=grid,
        eigenvalues=eigenvalues,
        mean_coeffs=np.asarray(mean_coeffs, dtype=float),
        basis=basis,
    )


def confounded_dataset(seed: int, n: int = 500, effect: float = 1.0, beta: float = 0.6):
    """Confounded design: e(z) = logistic(z), constant treatment effect.

    The covariate shifts both treatment odds and the baseline outcome, so the
    naive difference in means is biased upward by about 0.5 while the true
    effect is `effect`.  Returns (dataset, true propensity scores).
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    e = 1.0 / (1.0 + np.exp(-z))
    t = (rng.random(n) < e).astype(int)
    y0 = beta * z + rng.standard_normal(n)
    y1 = y0 + effect
    y = y1 * t + y0 * (1 - t)
    return (
        ObservationalDataset(y=y, t=t, z=z, oracle_y0=y0, oracle_y1=y1),
        e,
    )


def extreme_score_dataset(seed: int, n: int = 1000, effect: float = 1.0):
    """2% of units get propensities 0.001 / 0.999; effect is constant."""
    rng = np.random.default_rng(seed)
    e = rng.uniform(0.05, 0.95, n)
    k = max(n // 100, 1)
    e[:k] = 0.001
    e[k : 2 * k] = 0.999
    t = (rng.random(n) < e).astype(int)
    y0 = rng.standard_normal(n)
    y1 = y0 + effect
    y = y1 * t + y0 * (1 - t)
    data = ObservationalDataset(y=y, t=t, z=e, oracle_y0=y0, oracle_y1=y1)
    return data, e


def varying_propensity_dataset(seed: int, n: int = 500, effect: float = 1.0):
    """Propensity varies with z but outcomes do not depend on z.

    Difference-in-means is then consistent for the constant effect on any
    covariate-defined subpopulation, which is what the shrinking-error
    consistency checks need; confounding-robustness is exercised separately
    with IPW.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    e = 1.0 / (1.0 + np.exp(-1.5 * z))
    t = (rng.random(n) < e).astype(int)
    y0 = rng.standard_normal(n)
    y1 = y0 + effect
    y = y1 * t + y0 * (1 - t)
    return ObservationalDataset(y=y, t=t, z=z, oracle_y0=y0, oracle_y1=y1), e


def randomized_dataset(seed: int, n: int = 200, p: int = 2, effect: float = 1.0):
    """Completely randomized design with constant effect."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, p))
    t = (rng.random(n) < 0.5).astype(int)
    y0 = rng.standard_normal(n)
    y1 = y0 + effect
    y = y1 * t + y0 * (1 - t)
    return ObservationalDataset(y=y, t=t, z=z, oracle_y0=y0, oracle_y1=y1)


def two_group_samples(mercer: MercerSpec, n_per_group: int, seed: int, noise_sd=0.0):
    from overlap_lab import sample_paths

    g0 = sample_paths(mercer, n_per_group, seed, "zero", noise_sd)
    g1 = sample_paths(mercer, n_per_group, seed + 1, "m1", noise_sd)
    return FunctionalSampleSet.concat(g0, g1)


def random_gaussian_pair(rng: np.random.Generator, dim: int):
    from overlap_lab import GaussianMeasurePair

    m0 = rng.normal(0.0, 1.0, dim)
    m1 = m0 + rng.normal(0.0, 0.7, dim)
    a = rng.normal(0.0, 1.0, (dim, dim))
    b = rng.normal(0.0, 1.0, (dim, dim))
    return GaussianMeasurePair(
        mean0=m0,
        mean1=m1,
        cov0=a @ a.T + 0.3 * np.eye(dim),
        cov1=b @ b.T + 0.3 * np.eye(dim),
    )


def random_discrete_pair(rng: np.random.Generator, max_support: int = 10):
    """Random finite fixture; occasionally plants a hard 0/1 propensity."""
    from overlap_lab import DiscreteDistributionPair

    while True:
        m = int(rng.integers(2, max_support + 1))
        pz = rng.dirichlet(np.ones(m))
        e = rng.random(m)
        if rng.random() < 0.15:
            e[rng.integers(m)] = float(rng.choice([0.0, 1.0]))
        if rng.random() < 0.15:
            pz[rng.integers(m)] = 0.0
            pz = pz / pz.sum()
        alpha = float(pz @ e)
        if 0.0 < alpha < 1.0:
            return DiscreteDistributionPair.from_propensities(
                np.arange(m, dtype=float), pz, e
            )
