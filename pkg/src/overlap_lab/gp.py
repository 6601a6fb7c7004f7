"""Covariance kernels, Mercer expansions and seeded Gaussian-process paths.

Processes are handled through their finite-dimensional restrictions to a grid
of index points.  A kernel k(s, t) = sum_j c_j psi_j(s) psi_j(t) is carried as
an explicit truncated expansion (``MercerSpec``); path simulation is the
truncated Karhunen-Loeve sum Z(t) = m(t) + sum_j sqrt(c_j) xi_j psi_j(t) with
xi_j i.i.d. standard normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError

#: Relative tolerance for treating a symmetric matrix as PSD; eigenvalues in
#: [-PSD_TOL * max_eig, 0) are clipped to zero, anything below is rejected.
PSD_TOL = 1e-8

#: Default truncation level for Karhunen-Loeve simulation.
DEFAULT_KL_TERMS = 50


@dataclass(frozen=True)
class Grid:
    """Ordered index points t_1 < ... < t_n."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size == 0:
            raise InvalidConfigError("grid must be a nonempty 1-D array")
        if not np.all(np.isfinite(pts)):
            raise InvalidConfigError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise InvalidConfigError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @staticmethod
    def regular(n: int, start: float = 0.0, stop: float = 1.0, endpoint: bool = False) -> "Grid":
        """Uniform grid of n points; endpoint=False keeps grids of sizes
        8 | 32 | 128 nested inside one another."""
        if n < 1:
            raise InvalidConfigError("grid size must be >= 1")
        return Grid(np.linspace(start, stop, n, endpoint=endpoint))


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel: the Gaussian kernel exp(-|x-y|^2 / (2 sigma2)), or a
    user-supplied PSD matrix indexed by a grid / training set."""

    kind: str = "gaussian"
    sigma2: float = 1.0
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "user-matrix"):
            raise InvalidConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
                raise InvalidConfigError("gaussian kernel needs sigma2 > 0")
        else:
            if self.matrix is None:
                raise InvalidConfigError("user-matrix kernel needs a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidConfigError("kernel matrix must be square")
            if not np.allclose(m, m.T, atol=1e-10 * max(1.0, np.abs(m).max())):
                raise InvalidConfigError("kernel matrix must be symmetric")
            object.__setattr__(self, "matrix", m)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for scalar or vector inputs.

    Symmetric in (x, y); k(x, x) = 1 for the gaussian kind.  A user-matrix
    kernel has no pointwise form, so evaluation is rejected.
    """
    if spec.kind != "gaussian":
        raise InvalidConfigError("pointwise evaluation needs a gaussian kernel")
    dx = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return float(np.exp(-np.dot(dx.ravel(), dx.ravel()) / (2.0 * spec.sigma2)))


def kernel_gram(spec: KernelSpec, x: np.ndarray, z: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix K[i, j] = k(x_i, z_j) for row-wise inputs (gaussian kind)."""
    if spec.kind != "gaussian":
        raise InvalidConfigError("gram assembly needs a gaussian kernel")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    z = x if z is None else np.atleast_2d(np.asarray(z, dtype=float))
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(z * z, axis=1)[None, :]
        - 2.0 * x @ z.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * spec.sigma2))


def covariance_on_grid(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """Covariance matrix M[i, j] = k(t_i, t_j) on the grid, validated PSD.

    Eigenvalues in [-PSD_TOL * max_eig, 0) are clipped to zero for Cholesky
    stability; more negative ones mean a genuinely non-PSD user matrix.
    """
    if spec.kind == "gaussian":
        m = kernel_gram(spec, grid.points[:, None])
    else:
        m = spec.matrix
        if m.shape[0] != grid.size:
            raise InvalidConfigError(
                f"kernel matrix is {m.shape[0]}x{m.shape[0]} but grid has {grid.size} points"
            )
    eigvals = np.linalg.eigvalsh(m)
    lo, hi = eigvals[0], max(eigvals[-1], 0.0)
    if lo >= 0.0:
        return m
    if lo < -PSD_TOL * max(hi, 1e-300):
        raise InvalidConfigError(f"kernel matrix is not PSD (min eigenvalue {lo:.3e})")
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    m = (v * w) @ v.T
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class MercerSpec:
    """Truncated Mercer expansion on a grid.

    eigenvalues c_j are nonnegative and nonincreasing, mean_coeffs a_j expand
    the group-1 mean m1(t) = sum_j a_j psi_j(t) (the group-0 mean is zero by
    convention), and ``basis`` holds psi_j evaluated on the grid, row j.
    """

    grid: Grid
    eigenvalues: np.ndarray
    mean_coeffs: np.ndarray
    basis: np.ndarray
    basis_family: str = "matrix"

    def __post_init__(self):
        c = np.asarray(self.eigenvalues, dtype=float)
        a = np.asarray(self.mean_coeffs, dtype=float)
        b = np.asarray(self.basis, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise InvalidConfigError("eigenvalues must be a nonempty 1-D array")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise InvalidConfigError("eigenvalues must be finite and >= 0")
        if np.any(np.diff(c) > 1e-12 * max(c[0], 1.0)):
            raise InvalidConfigError("eigenvalues must be nonincreasing")
        if a.shape != c.shape:
            raise InvalidConfigError("mean_coeffs length must match eigenvalues")
        if b.shape != (c.size, self.grid.size):
            raise InvalidConfigError(
                f"basis must be {c.size}x{self.grid.size}, got {b.shape}"
            )
        if not np.all(np.isfinite(b)) or not np.all(np.isfinite(a)):
            raise InvalidConfigError("basis and mean_coeffs must be finite")
        object.__setattr__(self, "eigenvalues", c)
        object.__setattr__(self, "mean_coeffs", a)
        object.__setattr__(self, "basis", b)

    @property
    def n_terms(self) -> int:
        return self.eigenvalues.size

    def mean_function(self) -> np.ndarray:
        """m1 on the grid: sum_j a_j psi_j."""
        return self.mean_coeffs @ self.basis

    def covariance(self, noise_sd: float = 0.0) -> np.ndarray:
        """sum_j c_j psi_j psi_j^T on the grid, plus optional white nugget."""
        m = (self.basis.T * self.eigenvalues) @ self.basis
        m = 0.5 * (m + m.T)
        if noise_sd:
            m = m + (noise_sd**2) * np.eye(self.grid.size)
        return m


def fourier_basis(grid: Grid, n_terms: int) -> np.ndarray:
    """Cosine basis on [0, 1]: psi_1 = 1, psi_j(t) = sqrt(2) cos((j-1) pi t).

    Orthonormal in L2[0, 1]; approximately orthonormal under trapezoid
    quadrature once the grid resolves the mode.
    """
    if n_terms < 1:
        raise InvalidConfigError("need at least one basis term")
    t = grid.points
    rows = [np.ones_like(t)]
    for j in range(1, n_terms):
        rows.append(math.sqrt(2.0) * np.cos(j * math.pi * t))
    return np.vstack(rows)


#: Named eigenvalue / mean-coefficient families for config-driven simulation.
SEQUENCE_FAMILIES = {
    "inverse-square": lambda j: 1.0 / j**2,
    "geometric": lambda j: 0.5**j,
    "harmonic": lambda j: 1.0 / j,
    "zero": lambda j: np.zeros_like(j, dtype=float),
}


def sequence_family(name: str, n_terms: int) -> np.ndarray:
    try:
        fam = SEQUENCE_FAMILIES[name]
    except KeyError:
        raise InvalidConfigError(
            f"unknown sequence family {name!r}; choose from {sorted(SEQUENCE_FAMILIES)}"
        ) from None
    return np.asarray(fam(np.arange(1, n_terms + 1, dtype=float)), dtype=float)


def mercer_from_families(
    grid: Grid,
    c_family: str,
    a_family: str,
    n_terms: int = DEFAULT_KL_TERMS,
) -> MercerSpec:
    """MercerSpec with named eigenvalue/mean families over the Fourier basis."""
    return MercerSpec(
        grid=grid,
        eigenvalues=sequence_family(c_family, n_terms),
        mean_coeffs=sequence_family(a_family, n_terms),
        basis=fourier_basis(grid, n_terms),
        basis_family="fourier",
    )


def gaussian_kernel_mercer(sigma2: float, n_terms: int, grid: Grid) -> MercerSpec:
    """Explicit expansion of the 1-D gaussian kernel exp(-(x-y)^2 / (2 sigma2)):
    c_n = sqrt(2 sigma2^n / n) with psi_n(x) = x^n exp(-sigma2 x^2).

    The psi_n are used verbatim (they are not orthonormal as written); the
    mean coefficients are left at zero.  The sequence c_n is nonincreasing
    only for sigma2 small enough relative to n_terms, otherwise the expansion
    cannot form a valid spec and is rejected.
    """
    if n_terms < 1:
        raise InvalidConfigError("n_terms must be >= 1")
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise InvalidConfigError("sigma2 must be > 0")
    n = np.arange(1, n_terms + 1, dtype=float)
    c = np.sqrt(2.0 * sigma2**n / n)
    if np.any(np.diff(c) > 1e-12 * c[0]):
        raise InvalidConfigError(
            f"sigma2={sigma2} gives increasing eigenvalues over {n_terms} terms"
        )
    x = grid.points
    basis = np.vstack([x**k * np.exp(-sigma2 * x**2) for k in range(1, n_terms + 1)])
    return MercerSpec(
        grid=grid,
        eigenvalues=c,
        mean_coeffs=np.zeros(n_terms),
        basis=basis,
        basis_family="gaussian-kernel",
    )


@dataclass(frozen=True)
class FunctionalSampleSet:
    """Sample paths on a common grid with a {0, 1} group label per row."""

    grid: Grid
    values: np.ndarray
    group: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[1] != self.grid.size:
            raise InvalidConfigError("values must have one column per grid point")
        if not np.all(np.isfinite(v)):
            raise InvalidConfigError("sample values must be finite")
        g = self.group
        g = np.zeros(v.shape[0], dtype=int) if g is None else np.asarray(g, dtype=int)
        if g.shape != (v.shape[0],):
            raise InvalidConfigError("one group label per sample row is required")
        if not np.all((g == 0) | (g == 1)):
            raise InvalidConfigError("group labels must be 0 or 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "group", g)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def rows(self, group: int) -> np.ndarray:
        return self.values[self.group == group]

    @staticmethod
    def concat(a: "FunctionalSampleSet", b: "FunctionalSampleSet") -> "FunctionalSampleSet":
        if not np.array_equal(a.grid.points, b.grid.points):
            raise InvalidConfigError("sample sets must share a grid")
        return FunctionalSampleSet(
            grid=a.grid,
            values=np.vstack([a.values, b.values]),
            group=np.concatenate([a.group, b.group]),
        )


def sample_paths(
    mercer: MercerSpec,
    n_samples: int,
    seed: int,
    group_mean: str = "zero",
    noise_sd: float = 0.0,
) -> FunctionalSampleSet:
    """Simulate paths by the truncated Karhunen-Loeve sum.

    Deterministic given the seed.  group_mean="zero" uses m(t) = 0 and labels
    the rows 0; "m1" uses m(t) = sum_j a_j psi_j(t) and labels them 1.
    noise_sd adds i.i.d. observation noise per grid value (default none).
    """
    if n_samples < 1:
        raise InvalidConfigError("n_samples must be >= 1")
    if group_mean not in ("zero", "m1"):
        raise InvalidConfigError("group_mean must be 'zero' or 'm1'")
    if noise_sd < 0:
        raise InvalidConfigError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_samples, mercer.n_terms))
    values = (xi * np.sqrt(mercer.eigenvalues)) @ mercer.basis
    if group_mean == "m1":
        values = values + mercer.mean_function()
    if noise_sd:
        values = values + noise_sd * rng.standard_normal(values.shape)
    label = 0 if group_mean == "zero" else 1
    return FunctionalSampleSet(
        grid=mercer.grid,
        values=values,
        group=np.full(n_samples, label, dtype=int),
    )


def save_mercer_spec(spec: MercerSpec, path) -> None:
    """Write a plain-text spec: `term, j, c_j, a_j` lines plus the grid.

    Named basis families round-trip by name; an arbitrary numeric basis is
    stored row-wise in `psi` lines.
    """
    lines = ["# mercer spec: term, j, c_j, a_j", f"basis, {spec.basis_family}"]
    for j in range(spec.n_terms):
        lines.append(
            f"term, {j + 1}, {float(spec.eigenvalues[j])!r}, {float(spec.mean_coeffs[j])!r}"
        )
    lines.append("grid, " + ", ".join(repr(float(t)) for t in spec.grid.points))
    if spec.basis_family != "fourier":
        # only the fourier family regenerates from its name; anything else is
        # stored numerically
        for j in range(spec.n_terms):
            lines.append(
                f"psi, {j + 1}, " + ", ".join(repr(float(v)) for v in spec.basis[j])
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mercer_spec(path) -> MercerSpec:
    """Inverse of :func:`save_mercer_spec`."""
    family = "matrix"
    terms: list[tuple[int, float, float]] = []
    grid_points = None
    psi_rows: dict[int, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                if parts[0] == "basis":
                    family = parts[1]
                elif parts[0] == "term":
                    terms.append((int(parts[1]), float(parts[2]), float(parts[3])))
                elif parts[0] == "grid":
                    grid_points = np.array([float(p) for p in parts[1:]])
                elif parts[0] == "psi":
                    psi_rows[int(parts[1])] = np.array([float(p) for p in parts[2:]])
                else:
                    raise ValueError(f"unknown record {parts[0]!r}")
            except (ValueError, IndexError) as exc:
                raise InvalidConfigError(f"{path}:{lineno}: bad spec line ({exc})") from exc
    if not terms or grid_points is None:
        raise InvalidConfigError(f"{path}: spec needs term lines and a grid line")
    terms.sort()
    grid = Grid(grid_points)
    c = np.array([t[1] for t in terms])
    a = np.array([t[2] for t in terms])
    if family == "fourier":
        basis = fourier_basis(grid, len(terms))
    else:
        try:
            basis = np.vstack([psi_rows[j + 1] for j in range(len(terms))])
        except KeyError as exc:
            raise InvalidConfigError(f"{path}: missing psi line for term {exc}") from exc
    return MercerSpec(grid=grid, eigenvalues=c, mean_coeffs=a, basis=basis, basis_family=family)
