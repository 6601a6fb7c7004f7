"""Average-causal-effect estimators over full or data-adaptive subpopulations.

All estimators target the ACE restricted to the supplied member mask; reports
carry the estimand name and the region definition so a subpopulation effect
is never presented as the full-population one.  Standard errors come either
from a plug-in (influence-function) formula or from a nonparametric bootstrap
that re-runs the whole pipeline, including any model refits, per resample.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DivisionHazardError,
    InvalidConfigError,
    MissingGroupError,
    OracleUnavailableError,
    OverlapLabError,
    UnstableEstimandError,
)
from .gp import KernelSpec
from .propensity import (
    ObservationalDataset,
    PropensityFit,
    fit_kernel_svm,
    fit_logistic,
    margin_set,
)

#: Units with 1/e or 1/(1-e) above this are flagged (not rejected) in reports.
HIGH_WEIGHT_LIMIT = 1e3


@dataclass(frozen=True)
class CausalReport:
    """Point estimate, SE and provenance for one estimand."""

    estimand: str  # ace | ace_region | ace_margin
    estimate: float
    se: float
    n_subpop: int
    region_descriptor: str
    config_hash: str = ""
    flags: tuple[str, ...] = ()
    n_boot_failed: int = 0

    def __post_init__(self):
        if self.n_subpop < 1:
            raise InvalidConfigError("a report needs a nonempty subpopulation")
        if self.se < 0:
            raise InvalidConfigError("se must be >= 0")

    def as_dict(self) -> dict:
        return {
            "estimand": self.estimand,
            "estimate": self.estimate,
            "se": self.se,
            "n_subpop": self.n_subpop,
            "region_descriptor": self.region_descriptor,
            "config_hash": self.config_hash,
            "flags": list(self.flags),
            "n_boot_failed": self.n_boot_failed,
        }


def hash_config(obj) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    payload = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def _as_member(data: ObservationalDataset, member) -> np.ndarray:
    if member is None:
        return np.ones(data.n, dtype=bool)
    member = np.asarray(member, dtype=bool)
    if member.shape != (data.n,):
        raise InvalidConfigError("member mask must have one flag per unit")
    return member


def ace_oracle(data: ObservationalDataset, member=None) -> float:
    """Ground-truth subpopulation ACE: mean of (y1 - y0) over member units.

    Only available in simulation mode, where potential outcomes are known.
    """
    if data.oracle_y0 is None or data.oracle_y1 is None:
        raise OracleUnavailableError("dataset has no oracle potential outcomes")
    member = _as_member(data, member)
    if not member.any():
        raise MissingGroupError("member set is empty; the estimand is undefined")
    return float(np.mean(data.oracle_y1[member] - data.oracle_y0[member]))


def ace_difference_in_means(
    data: ObservationalDataset,
    member=None,
    estimand: str | None = None,
    region_descriptor: str = "all units",
    config_hash: str = "",
) -> CausalReport:
    """mean(y | t=1, member) - mean(y | t=0, member) with a two-sample SE."""
    member = _as_member(data, member)
    y1 = data.y[member & (data.t == 1)]
    y0 = data.y[member & (data.t == 0)]
    if y1.size == 0 or y0.size == 0:
        raise MissingGroupError("subpopulation must contain both treatment arms")
    estimate = float(y1.mean() - y0.mean())
    var1 = float(y1.var(ddof=1)) if y1.size > 1 else 0.0
    var0 = float(y0.var(ddof=1)) if y0.size > 1 else 0.0
    se = math.sqrt(var1 / y1.size + var0 / y0.size)
    if estimand is None:
        estimand = "ace" if member.all() else "ace_region"
    return CausalReport(
        estimand=estimand,
        estimate=estimate,
        se=se,
        n_subpop=int(member.sum()),
        region_descriptor=region_descriptor,
        config_hash=config_hash,
    )


def ace_ipw(
    data: ObservationalDataset,
    fit: PropensityFit,
    member=None,
    stabilized: bool = True,
    estimand: str | None = None,
    region_descriptor: str = "all units",
    config_hash: str = "",
) -> CausalReport:
    """Hajek inverse-probability-weighted ACE on the member subpopulation.

    estimate = sum(w t y)/sum(w t) - sum(v (1-t) y)/sum(v (1-t)) with
    w = 1/e and v = 1/(1-e); the normalized form makes constant scores
    coincide exactly with the difference in means.  stabilized=False uses the
    Horvitz-Thompson denominators (member count) instead.
    """
    if fit.kind != "logistic" or fit.scores is None:
        raise InvalidConfigError("IPW consumes logistic propensity scores only")
    member = _as_member(data, member)
    if not member.any():
        raise MissingGroupError("member set is empty")
    e = fit.scores[member]
    y = data.y[member]
    t = data.t[member].astype(float)
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise DivisionHazardError("propensity scores on the boundary {0, 1}")
    if not (np.any(t == 1) and np.any(t == 0)):
        raise MissingGroupError("subpopulation must contain both treatment arms")
    w = 1.0 / e
    v = 1.0 / (1.0 - e)
    flags: tuple[str, ...] = ()
    if max(float(w.max()), float(v.max())) >= HIGH_WEIGHT_LIMIT:
        flags = ("high-weight",)
    if stabilized:
        s1 = float(np.sum(w * t))
        s0 = float(np.sum(v * (1.0 - t)))
    else:
        s1 = s0 = float(member.sum())
    mu1 = float(np.sum(w * t * y)) / s1
    mu0 = float(np.sum(v * (1.0 - t) * y)) / s0
    psi = (w * t * (y - mu1)) / s1 - (v * (1.0 - t) * (y - mu0)) / s0
    se = math.sqrt(float(np.sum(psi**2)))
    if estimand is None:
        estimand = "ace" if member.all() else "ace_region"
    return CausalReport(
        estimand=estimand,
        estimate=mu1 - mu0,
        se=se,
        n_subpop=int(member.sum()),
        region_descriptor=region_descriptor,
        config_hash=config_hash,
        flags=flags,
    )


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    n_resamples: int
    n_failed: int
    failure_categories: tuple[str, ...] = field(default=())


def bootstrap_se(
    estimator: Callable[[ObservationalDataset], float],
    data: ObservationalDataset,
    n_boot: int = 500,
    seed: int = 0,
) -> BootstrapResult:
    """SE as the standard deviation of the estimator over seeded resamples.

    Resamples on which the estimator fails with a package error (empty
    margin, one-armed subpopulation, separation, ...) are excluded and
    counted; more than 50% failures means the estimand itself is unstable.
    """
    if n_boot < 100:
        raise InvalidConfigError("bootstrap needs n_boot >= 100")
    rng = np.random.default_rng(seed)
    estimates = []
    failures: list[str] = []
    for _ in range(n_boot):
        idx = rng.integers(0, data.n, size=data.n)
        try:
            estimates.append(float(estimator(data.subset(idx))))
        except OverlapLabError as exc:
            failures.append(exc.category)
    if len(failures) > 0.5 * n_boot:
        raise UnstableEstimandError(
            f"{len(failures)}/{n_boot} bootstrap resamples failed "
            f"({sorted(set(failures))}); the estimand is unstable"
        )
    se = float(np.std(estimates, ddof=1)) if len(estimates) > 1 else 0.0
    return BootstrapResult(
        se=se,
        n_resamples=n_boot,
        n_failed=len(failures),
        failure_categories=tuple(sorted(set(failures))),
    )


def margin_ace_pipeline(
    data: ObservationalDataset,
    kernel: KernelSpec,
    lam: float,
    threshold: float = 1.0,
    estimator_kind: str = "dim",
    n_boot: int = 500,
    seed: int = 0,
    svm_tol: float = 1e-5,
    config_hash: str = "",
) -> CausalReport:
    """Margin-based subpopulation ACE: fit SVM, take the margin, estimate.

    estimator_kind "dim" is the difference in means on the margin; "ipw"
    fits a logistic model on the full data and weights within the margin.
    With n_boot > 0 the SE re-runs the entire pipeline (SVM refit included)
    per resample, so the variability of the region itself is included;
    n_boot = 0 keeps the plug-in SE of the inner estimator.
    """
    if estimator_kind not in ("dim", "ipw"):
        raise InvalidConfigError("estimator_kind must be 'dim' or 'ipw'")

    def run(d: ObservationalDataset) -> CausalReport:
        svm_fit = fit_kernel_svm(d, kernel, lam, tol=svm_tol)
        member = margin_set(svm_fit, threshold).member_mask(d.n)
        descriptor = f"margin |f| <= {threshold:g}"
        if estimator_kind == "dim":
            return ace_difference_in_means(
                d, member, estimand="ace_margin", region_descriptor=descriptor
            )
        logit = fit_logistic(d)
        return ace_ipw(
            d, logit, member, estimand="ace_margin", region_descriptor=descriptor
        )

    report = run(data)
    se = report.se
    n_failed = 0
    if n_boot:
        boot = bootstrap_se(lambda d: run(d).estimate, data, n_boot=n_boot, seed=seed)
        se = boot.se
        n_failed = boot.n_failed
    if not config_hash:
        config_hash = hash_config(
            {
                "kernel": kernel.kind,
                "sigma2": kernel.sigma2 if kernel.kind == "gaussian" else None,
                "lambda": lam,
                "threshold": threshold,
                "estimator": estimator_kind,
                "n_boot": n_boot,
                "seed": seed,
            }
        )
    return CausalReport(
        estimand=report.estimand,
        estimate=report.estimate,
        se=se,
        n_subpop=report.n_subpop,
        region_descriptor=report.region_descriptor,
        config_hash=config_hash,
        flags=report.flags,
        n_boot_failed=n_failed,
    )
