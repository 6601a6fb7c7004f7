"""Dual coordinate solver for the regularized hinge objective.

Minimizes sum_i |1 - y_i f(Z_i)|_+ + lam ||f||_K^2 over the RKHS of K.  By
the representer theorem f(x) = sum_i alpha_i y_i K(x, x_i) and the dual is

    max_alpha  sum_i alpha_i - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
    s.t.       0 <= alpha_i <= C,   C = 1 / (2 lam)

with no offset term, since the objective penalizes all of f.  The solver is
pairwise coordinate ascent: each step exactly maximizes the two currently
worst Karush-Kuhn-Tucker violators, one coordinate at a time, which for the
box-only dual is an exact clipped Newton update per coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError


@dataclass(frozen=True)
class SMOSolution:
    alpha: np.ndarray
    decision_values: np.ndarray
    kkt_residual: float
    n_updates: int


def kkt_violations(y: np.ndarray, alpha: np.ndarray, decision: np.ndarray, c_box: float) -> np.ndarray:
    """Per-unit KKT violation of the box dual, computed from scratch.

    With g_i = 1 - y_i f_i:  alpha_i = 0 needs g_i <= 0, alpha_i = C needs
    g_i >= 0, interior alpha needs g_i = 0.  Returns the magnitude of each
    unit's violated condition (0 where satisfied).
    """
    g = 1.0 - y * decision
    at_lower = alpha <= 0.0
    at_upper = alpha >= c_box
    viol = np.abs(g)
    viol[at_lower] = np.maximum(g[at_lower], 0.0)
    viol[at_upper] = np.maximum(-g[at_upper], 0.0)
    return viol


def smo_solve(
    k: np.ndarray,
    y: np.ndarray,
    c_box: float,
    tol: float = 1e-5,
    max_updates: int | None = None,
) -> SMOSolution:
    """Run pairwise coordinate ascent until the worst violation is <= tol."""
    n = y.size
    if k.shape != (n, n):
        raise InvalidConfigError("kernel matrix must be n x n")
    if not c_box > 0:
        raise InvalidConfigError("box constraint must be positive (lambda too large?)")
    if max_updates is None:
        max_updates = 400 * n + 20_000
    diag = np.ascontiguousarray(np.diag(k))
    alpha = np.zeros(n)
    f = np.zeros(n)  # decision values K @ (alpha * y)
    g = np.ones(n)  # dual gradient 1 - y * f
    updates = 0

    def violations() -> np.ndarray:
        viol = np.abs(g)
        lower = alpha <= 0.0
        upper = alpha >= c_box
        viol[lower] = np.maximum(g[lower], 0.0)
        viol[upper] = np.maximum(-g[upper], 0.0)
        return viol

    def step(i: int) -> None:
        nonlocal updates
        q = diag[i]
        if q > 1e-12:
            new = min(max(alpha[i] + g[i] / q, 0.0), c_box)
        elif g[i] > 0:
            new = c_box  # flat direction: gradient pushes to the upper bound
        elif g[i] < 0:
            new = 0.0
        else:
            return
        delta = new - alpha[i]
        if delta == 0.0:
            return
        alpha[i] = new
        col = k[:, i]
        f_update = delta * y[i]
        f[:] += f_update * col
        g[:] -= f_update * (y * col)
        updates += 1

    while True:
        viol = violations()
        i = int(np.argmax(viol))
        worst = viol[i]
        if worst <= tol:
            break
        step(i)
        viol[i] = 0.0
        j = int(np.argmax(viol))
        if viol[j] > tol:
            step(j)
        if updates > max_updates:
            raise RuntimeError(
                f"dual solver did not reach tol={tol} within {max_updates} updates "
                f"(residual {worst:.3e}); consider a larger lambda or tol"
            )

    residual = float(np.max(kkt_violations(y, alpha, f, c_box)))
    return SMOSolution(alpha=alpha, decision_values=f, kkt_residual=residual, n_updates=updates)
