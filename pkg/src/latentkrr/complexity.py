"""RKHS complexity machinery: kernel complexity function, critical radius,
statistical/effective dimension, decay-rate fits and a Monte Carlo estimator
of the localized empirical Rademacher complexity.

A spectrum is a non-increasing eigenvalue vector plus an analytic tail mass
for generator families (polynomial decay c j^{-2a}, exponential decay
exp(-g j)) whose trace extends beyond the stored truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .exceptions import ContractError, DegenerateInputError, NumericError
from .kernels import GramMatrix

_TRUNC_RELTOL = 1e-16
_MAX_TRUNC = 100_000


@dataclass
class Spectrum:
    """Non-increasing nonnegative eigenvalues, with optional tail trace mass."""

    values: np.ndarray
    tail: float = 0.0  # trace carried by eigenvalues beyond the stored ones

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ContractError("empty spectrum")
        if np.any(v < 0) or np.any(np.diff(v) > 0):
            raise ContractError("eigenvalues must be nonnegative and non-increasing")
        if v[0] <= 0:
            raise DegenerateInputError("degenerate kernel: largest eigenvalue is zero")
        self.values = v

    @property
    def trace(self) -> float:
        return float(self.values.sum() + self.tail)

    @classmethod
    def finite(cls, values) -> "Spectrum":
        return cls(np.sort(np.asarray(values, dtype=float).ravel())[::-1])

    @classmethod
    def polynomial(cls, alpha: float, c: float = 1.0, truncation_len: int | None = None) -> "Spectrum":
        """mu_j = c j^{-2 alpha}; tail beyond truncation via the integral bound."""
        if alpha <= 0.5 or c <= 0:
            raise ContractError("need alpha > 1/2 and c > 0")
        if truncation_len is None:
            # j where mu_j < reltol * mu_1, capped for memory
            truncation_len = min(int(_TRUNC_RELTOL ** (-1.0 / (2 * alpha))) + 1, _MAX_TRUNC)
        j = np.arange(1, truncation_len + 1, dtype=float)
        vals = c * j ** (-2.0 * alpha)
        tail = c * truncation_len ** (1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
        return cls(vals, tail=tail)

    @classmethod
    def exponential(cls, gamma: float, c: float = 1.0, truncation_len: int | None = None) -> "Spectrum":
        """mu_j = c exp(-gamma j); geometric tail beyond truncation."""
        if gamma <= 0 or c <= 0:
            raise ContractError("need gamma > 0 and c > 0")
        if truncation_len is None:
            truncation_len = min(int(np.log(1.0 / _TRUNC_RELTOL) / gamma) + 2, _MAX_TRUNC)
        j = np.arange(1, truncation_len + 1, dtype=float)
        vals = c * np.exp(-gamma * j)
        q = np.exp(-gamma)
        tail = c * q ** (truncation_len + 1) / (1.0 - q)
        return cls(vals, tail=tail)


def empirical_spectrum(gram_norm: GramMatrix) -> Spectrum:
    """Eigenvalues of a normalized Gram, clamped at zero, sorted non-increasing."""
    if not gram_norm.normalized:
        raise ContractError("expected a normalized Gram matrix")
    try:
        w = np.linalg.eigvalsh(gram_norm.values)
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigendecomposition failed") from exc
    w = np.maximum(w[::-1], 0.0)
    return Spectrum(w)


def complexity_R(spec: Spectrum, n: int, delta: float) -> float:
    """R(delta) = ((1/n) sum_j min(delta, mu_j))^{1/2}."""
    if n < 1:
        raise ContractError("n must be >= 1")
    if delta < 0:
        raise ContractError("delta must be nonnegative")
    if delta == 0.0:
        return 0.0
    s = float(np.minimum(spec.values, delta).sum()) + spec.tail
    return float(np.sqrt(s / n))


def statistical_dimension(spec: Spectrum, delta: float) -> int:
    """Number of eigenvalues >= delta."""
    if delta <= 0:
        raise ContractError("delta must be positive")
    return int(np.count_nonzero(spec.values >= delta))


def effective_dimension(spec: Spectrum, delta: float) -> float:
    """D(delta) = sum_j mu_j / (mu_j + delta), tail entries approximated by tail/delta."""
    if delta <= 0:
        raise ContractError("delta must be positive")
    return float((spec.values / (spec.values + delta)).sum() + spec.tail / delta)


@dataclass
class FixedPointResult:
    delta_star: float
    iterations: int
    residual: float
    bracket: tuple


def fixed_point(spec: Spectrum, n: int, rel_tol: float = 1e-10) -> FixedPointResult:
    """Unique positive solution of R(delta) = delta, by bisection.

    R is sub-root, so g(delta) = R(delta) - delta has exactly one positive
    root and changes sign across it; the upper bracket sqrt(trace/n) + 1
    satisfies g < 0 because R plateaus at sqrt(trace/n).
    """
    if spec.values[0] <= 0:
        raise DegenerateInputError("all-zero spectrum has no positive fixed point")
    plateau = np.sqrt(spec.trace / n)
    lo, hi = 1e-300 * max(plateau, 1.0), plateau + 1.0
    it = 0
    while hi - lo > rel_tol * max(lo, 1e-300) and it < 20000:
        mid = 0.5 * (lo + hi)
        if complexity_R(spec, n, mid) - mid > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    delta_star = 0.5 * (lo + hi)
    residual = abs(complexity_R(spec, n, delta_star) - delta_star)
    return FixedPointResult(delta_star=delta_star, iterations=it, residual=residual, bracket=(lo, hi))


@dataclass
class RateFitResult:
    slope: float
    intercept: float
    n_grid: np.ndarray
    delta_stars: np.ndarray


def rate_fit(spec: Spectrum, n_grid) -> RateFitResult:
    """OLS slope of log delta*(n) against log n over a sample-size grid."""
    n_grid = np.asarray(n_grid, dtype=float).ravel()
    if n_grid.size < 3 or n_grid.max() / n_grid.min() < 100.0:
        raise ContractError("n_grid needs >= 3 values spanning at least 2 decades")
    deltas = np.array([fixed_point(spec, int(n)).delta_star for n in n_grid])
    res = stats.linregress(np.log(n_grid), np.log(deltas))
    return RateFitResult(
        slope=float(res.slope), intercept=float(res.intercept),
        n_grid=n_grid, delta_stars=deltas,
    )


@dataclass
class RademacherEstimate:
    mean: float
    std_error: float
    draws: int
    radius: float
    delta: float


def rademacher_mc(
    gram_norm: GramMatrix, radius: float, delta: float, draws: int, seed
) -> RademacherEstimate:
    """Monte Carlo estimate of the localized empirical Rademacher complexity.

    Uses the closed-form ellipse relaxation: per sign draw eps, with
    eigenpairs (mu_j, u_j) of the normalized Gram and v_j = sqrt(n mu_j) u_j,

        sup  = sqrt( V * sum_j c_j^2 / nu_j ),   c_j = eps' v_j / n,
        nu_j = max(mu_j / delta, 1),             V = 1 + 9 radius^2.
    """
    if not gram_norm.normalized:
        raise ContractError("expected a normalized Gram matrix")
    if delta <= 0 or draws < 1 or radius <= 0:
        raise ContractError("need delta > 0, draws >= 1, radius > 0")
    n = gram_norm.size
    w, U = np.linalg.eigh(gram_norm.values)
    w = np.maximum(w[::-1], 0.0)
    U = U[:, ::-1]
    V = 1.0 + 9.0 * radius**2
    nu = np.maximum(w / delta, 1.0)
    scale = np.sqrt(n * w)  # v_j = scale_j * u_j
    rng = np.random.default_rng(seed)
    eps = rng.choice([-1.0, 1.0], size=(draws, n))
    c = (eps @ U) * scale / n  # draws x n, entries c_j per draw
    sups = np.sqrt(V * (c * c / nu).sum(axis=1))
    mean = float(sups.mean())
    se = float(sups.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return RademacherEstimate(mean=mean, std_error=se, draws=draws, radius=radius, delta=delta)
