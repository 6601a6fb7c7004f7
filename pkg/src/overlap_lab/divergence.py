"""Divergences between Gaussian measures and overlap dichotomy verdicts.

For restrictions of two Gaussian measures to an n-point grid, with means m0,
m1 and covariances S0, S1 and the average S = (S0 + S1) / 2:

    L  = 2 log|S| - log|S0| - log|S1|
    D2 = (m1 - m0)' S^{-1} (m1 - m0)

the Bhattacharyya distance is L/4 + D2/8 and the Bhattacharyya coefficient
(the Hellinger affinity, an integral in [0, 1]) is exp(-(L/4 + D2/8)).  The
symmetrized relative entropy J is KL(mu0 | mu1) + KL(mu1 | mu0).  Two Gaussian
measures are either equivalent or orthogonal; orthogonality corresponds to
coefficient -> 0 or J -> infinity and is operationalized here with finite
thresholds.

Also implements the strict-overlap / bounded-likelihood-ratio equivalence for
finite discrete covariate distributions as an executable check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import InvalidConfigError, SingularCovarianceError
from .gp import Grid, MercerSpec

_PSD_TOL = 1e-8


def _check_covariance(m: np.ndarray, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise InvalidConfigError(f"{name} must be square")
    if not np.all(np.isfinite(m)):
        raise InvalidConfigError(f"{name} must be finite")
    scale = max(np.abs(m).max(), 1e-300)
    if not np.allclose(m, m.T, atol=1e-10 * scale):
        raise InvalidConfigError(f"{name} must be symmetric")
    eig = np.linalg.eigvalsh(m)
    if eig[0] < -_PSD_TOL * max(eig[-1], 1e-300):
        raise InvalidConfigError(f"{name} is not PSD (min eigenvalue {eig[0]:.3e})")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class GaussianMeasurePair:
    """Means and covariances of two Gaussian measures restricted to n points."""

    mean0: np.ndarray
    mean1: np.ndarray
    cov0: np.ndarray
    cov1: np.ndarray

    def __post_init__(self):
        m0 = np.atleast_1d(np.asarray(self.mean0, dtype=float))
        m1 = np.atleast_1d(np.asarray(self.mean1, dtype=float))
        if m0.shape != m1.shape or m0.ndim != 1:
            raise InvalidConfigError("means must be 1-D vectors of equal length")
        c0 = _check_covariance(self.cov0, "cov0")
        c1 = _check_covariance(self.cov1, "cov1")
        n = m0.size
        if c0.shape != (n, n) or c1.shape != (n, n):
            raise InvalidConfigError("covariance dimensions must match the means")
        for attr, val in (("mean0", m0), ("mean1", m1), ("cov0", c0), ("cov1", c1)):
            object.__setattr__(self, attr, val)

    @property
    def dim(self) -> int:
        return self.mean0.size

    def swapped(self) -> "GaussianMeasurePair":
        return GaussianMeasurePair(self.mean1, self.mean0, self.cov1, self.cov0)


@dataclass(frozen=True)
class DivergenceResult:
    """Closed-form divergence summary for a Gaussian pair.

    bhat_coefficient = exp(-bhat_distance) with bhat_distance = L/4 + D2/8.
    J is filled by the relative-entropy computation and may be None if only
    the Bhattacharyya part was requested.
    """

    L: float
    D2: float
    bhat_distance: float
    bhat_coefficient: float
    J: float | None = None

    def as_dict(self) -> dict:
        return {
            "L": self.L,
            "D2": self.D2,
            "bhat_distance": self.bhat_distance,
            "bhat_coefficient": self.bhat_coefficient,
            "J": self.J,
        }


def _chol_logdet(m: np.ndarray, what: str) -> tuple[np.ndarray, float]:
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"{what} is singular; support mismatch (orthogonality-suspect), refusing to regularize"
        ) from None
    return chol, 2.0 * float(np.sum(np.log(np.diag(chol))))


def _psd_logdet(m: np.ndarray) -> float:
    """log|m| for a PSD matrix; -inf when singular (degenerate measure)."""
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        return -math.inf
    return float(logdet)


def gaussian_bhattacharyya(pair: GaussianMeasurePair) -> DivergenceResult:
    """Closed-form L, D2, Bhattacharyya distance and coefficient.

    Requires the averaged covariance to be invertible; a singular average is
    surfaced as an error rather than pseudo-inverted.  A singular cov0 or
    cov1 alone yields L = +inf, distance = +inf and coefficient 0 (a
    degenerate measure is orthogonal to any full-rank one).
    """
    avg = 0.5 * (pair.cov0 + pair.cov1)
    chol, logdet_avg = _chol_logdet(avg, "averaged covariance (cov0 + cov1)/2")
    diff = pair.mean1 - pair.mean0
    u = np.linalg.solve(chol, diff)
    d2 = float(u @ u)
    L = 2.0 * logdet_avg - _psd_logdet(pair.cov0) - _psd_logdet(pair.cov1)
    L = max(L, 0.0) if math.isfinite(L) else math.inf
    distance = L / 4.0 + d2 / 8.0
    coefficient = math.exp(-distance) if math.isfinite(distance) else 0.0
    return DivergenceResult(
        L=L, D2=d2, bhat_distance=distance, bhat_coefficient=coefficient
    )


def gaussian_relative_entropy(pair: GaussianMeasurePair) -> float:
    """Symmetrized relative entropy J = KL(mu0 | mu1) + KL(mu1 | mu0)."""

    def kl(m_a, c_a, m_b, c_b) -> float:
        chol_b, logdet_b = _chol_logdet(c_b, "covariance")
        logdet_a = _psd_logdet(c_a)
        if not math.isfinite(logdet_a):
            raise SingularCovarianceError(
                "singular covariance; relative entropy undefined (orthogonality-suspect)"
            )
        sol = np.linalg.solve(chol_b, np.linalg.solve(chol_b, c_a).T)  # c_b^{-1} c_a
        trace = float(np.trace(sol))
        u = np.linalg.solve(chol_b, m_b - m_a)
        maha = float(u @ u)
        return 0.5 * (trace + maha - pair.dim + logdet_b - logdet_a)

    j = kl(pair.mean0, pair.cov0, pair.mean1, pair.cov1) + kl(
        pair.mean1, pair.cov1, pair.mean0, pair.cov0
    )
    return max(j, 0.0)


def gaussian_divergences(pair: GaussianMeasurePair) -> DivergenceResult:
    """Bhattacharyya summary plus J in one result."""
    base = gaussian_bhattacharyya(pair)
    j = gaussian_relative_entropy(pair)
    return DivergenceResult(
        L=base.L,
        D2=base.D2,
        bhat_distance=base.bhat_distance,
        bhat_coefficient=base.bhat_coefficient,
        J=j,
    )


def dichotomy_verdict(
    result: DivergenceResult, eps_b: float = 1e-8, cap_j: float = 1e6
) -> str:
    """"equivalent" or "orthogonal" from finite thresholds.

    Orthogonality in theory is coefficient = 0 or J = infinity; from finite
    data this is operationalized as coefficient <= eps_b or J >= cap_j.
    """
    if not (eps_b > 0 and cap_j > 0):
        raise InvalidConfigError("eps_b and cap_j must be positive")
    if result.J is None:
        raise InvalidConfigError("verdict needs a result with J populated")
    if result.bhat_coefficient <= eps_b or result.J >= cap_j:
        return "orthogonal"
    return "equivalent"


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    se: float
    n_draws: int


def monte_carlo_bhattacharyya(
    pair: GaussianMeasurePair, n_draws: int = 10**6, seed: int = 0
) -> MonteCarloEstimate:
    """Importance-sampling oracle for the Bhattacharyya coefficient.

    Draws from the equal-weight mixture mu = (mu0 + mu1)/2 and averages
    sqrt(p0 p1) / q, an unbiased estimate of the affinity integral.  Intended
    as an independent check of the closed form at small dimension.
    """
    if pair.dim > 4:
        raise InvalidConfigError("monte carlo oracle is restricted to dimension <= 4")
    if n_draws < 10**5:
        raise InvalidConfigError("oracle needs n_draws >= 1e5")
    rng = np.random.default_rng(seed)
    chol0, logdet0 = _chol_logdet(pair.cov0, "cov0")
    chol1, logdet1 = _chol_logdet(pair.cov1, "cov1")
    pick = rng.random(n_draws) < 0.5
    z = rng.standard_normal((n_draws, pair.dim))
    x = np.where(
        pick[:, None], pair.mean0 + z @ chol0.T, pair.mean1 + z @ chol1.T
    )

    log_norm = -0.5 * pair.dim * math.log(2.0 * math.pi)

    def logpdf(mean, chol, logdet):
        u = np.linalg.solve(chol, (x - mean).T)
        return log_norm - 0.5 * logdet - 0.5 * np.sum(u * u, axis=0)

    lp0 = logpdf(pair.mean0, chol0, logdet0)
    lp1 = logpdf(pair.mean1, chol1, logdet1)
    # log q = logsumexp(lp0, lp1) - log 2
    hi = np.maximum(lp0, lp1)
    logq = hi + np.log1p(np.exp(-np.abs(lp0 - lp1))) - math.log(2.0)
    w = np.exp(0.5 * (lp0 + lp1) - logq)
    est = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(n_draws))
    return MonteCarloEstimate(estimate=est, se=se, n_draws=n_draws)


def pair_from_mercer(
    spec: MercerSpec, grid: Grid | None = None, noise_sd: float = 0.0
) -> GaussianMeasurePair:
    """Restriction of the two-group process model to its grid.

    Group 0 has mean zero, group 1 has mean sum_j a_j psi_j; both share the
    expansion covariance.  noise_sd adds the observation-noise nugget that
    makes restrictions beyond the truncation rank nonsingular.
    """
    if grid is not None and not np.array_equal(grid.points, spec.grid.points):
        raise InvalidConfigError("grid must match the spec grid")
    cov = spec.covariance(noise_sd=noise_sd)
    m1 = spec.mean_function()
    return GaussianMeasurePair(
        mean0=np.zeros_like(m1), mean1=m1, cov0=cov, cov1=cov
    )


def pair_from_samples(values0: np.ndarray, values1: np.ndarray) -> GaussianMeasurePair:
    """Empirical Gaussian pair: per-group sample means and covariances."""
    v0 = np.atleast_2d(np.asarray(values0, dtype=float))
    v1 = np.atleast_2d(np.asarray(values1, dtype=float))
    if v0.shape[1] != v1.shape[1]:
        raise InvalidConfigError("groups must share the grid dimension")
    if v0.shape[0] < 2 or v1.shape[0] < 2:
        raise InvalidConfigError("each group needs at least two samples")
    return GaussianMeasurePair(
        mean0=v0.mean(axis=0),
        mean1=v1.mean(axis=0),
        cov0=np.cov(v0, rowvar=False),
        cov1=np.cov(v1, rowvar=False),
    )


# ---------------------------------------------------------------------------
# Strict overlap vs bounded likelihood ratio, on finite discrete fixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDistributionPair:
    """Finite covariate distribution with a propensity value per point.

    pz is the marginal covariate law, e the treatment probability per point
    and alpha the marginal treated fraction.  The group densities relative to
    the marginal are f1 = e / alpha and f0 = (1 - e) / (1 - alpha), which are
    valid densities exactly when alpha = sum(pz * e).
    """

    support: np.ndarray
    pz: np.ndarray
    e: np.ndarray
    alpha: float

    def __post_init__(self):
        pz = np.asarray(self.pz, dtype=float)
        e = np.asarray(self.e, dtype=float)
        support = np.asarray(self.support, dtype=float)
        if pz.ndim != 1 or pz.shape != e.shape or support.shape[0] != pz.size:
            raise InvalidConfigError("support, pz and e must have matching length")
        if np.any(pz < 0) or abs(pz.sum() - 1.0) > 1e-9:
            raise InvalidConfigError("pz must be a probability vector")
        if np.any(e < 0) or np.any(e > 1):
            raise InvalidConfigError("e must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfigError("alpha must lie in (0, 1)")
        if abs(float(pz @ e) - self.alpha) > 1e-8:
            raise InvalidConfigError("alpha must equal sum(pz * e) for valid densities")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "pz", pz)
        object.__setattr__(self, "e", e)

    @staticmethod
    def from_propensities(support, pz, e) -> "DiscreteDistributionPair":
        pz = np.asarray(pz, dtype=float)
        e = np.asarray(e, dtype=float)
        return DiscreteDistributionPair(
            support=support, pz=pz, e=e, alpha=float(pz @ e)
        )


def lr_bounds(eta: float, alpha: float) -> tuple[float, float]:
    """Bounds on LR(z) = f1/f0 implied by strict overlap at level eta:
    eta/(1-eta) <= alpha/(1-alpha) LR(z) <= (1-eta)/eta, solved for LR."""
    if not 0.0 < eta < 0.5:
        raise InvalidConfigError("eta must lie strictly inside (0, 0.5)")
    if not 0.0 < alpha < 1.0:
        raise InvalidConfigError("alpha must lie in (0, 1)")
    ratio = (1.0 - alpha) / alpha
    return (eta / (1.0 - eta)) * ratio, ((1.0 - eta) / eta) * ratio


def check_overlap_lr_equivalence(d: DiscreteDistributionPair, eta: float) -> str:
    """Check strict overlap and the likelihood-ratio bounds agree pointwise.

    Strict overlap is eta <= e(z) <= 1 - eta on the support; the bound form is
    eta/(1-eta) <= alpha/(1-alpha) LR(z) <= (1-eta)/eta with LR = f1/f0 from
    Bayes rule.  The two are equivalent, so the only legal outcomes are
    "both-hold" and "both-fail"; a disagreement raises, since it would mean
    the arithmetic itself is broken.

    Both sides are evaluated in exact rational arithmetic over the decimal
    values the inputs print as (0.2 means 1/5, not the nearest double): the
    bounds use <=, so equality-boundary fixtures must compare exactly, and
    float cancellation in 1 - e would otherwise scramble them by one ulp.
    """
    if not 0.0 < eta < 0.5:
        raise InvalidConfigError("eta must lie strictly inside (0, 0.5)")
    eta_f = Fraction(str(float(eta)))
    alpha_f = Fraction(str(float(d.alpha)))
    lo = eta_f / (1 - eta_f)
    hi = (1 - eta_f) / eta_f
    scale = alpha_f / (1 - alpha_f)

    overlap_holds = True
    bounds_hold = True
    for pz, e in zip(d.pz, d.e):
        if pz <= 0.0:  # almost-everywhere semantics drop null support points
            continue
        e_f = Fraction(str(float(e)))
        if not (eta_f <= e_f <= 1 - eta_f):
            overlap_holds = False
        f1 = e_f / alpha_f
        f0 = (1 - e_f) / (1 - alpha_f)
        if f0 == 0:
            # LR = +infinity (f1 > 0 whenever f0 = 0 on a live point)
            bounds_hold = False
            continue
        scaled = scale * (f1 / f0)
        if not (lo <= scaled <= hi):
            bounds_hold = False

    if overlap_holds != bounds_hold:
        raise RuntimeError(
            "strict overlap and likelihood-ratio bounds disagree; "
            f"overlap={overlap_holds} bounds={bounds_hold}"
        )
    return "both-hold" if overlap_holds else "both-fail"
