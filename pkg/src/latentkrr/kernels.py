"""Kernel families, Gram matrices, bandwidth heuristics and RKHS displacement.

All kernels act on rows of real matrices.  Gram construction enforces exact
symmetry (upper triangle mirrored) and Gram matrices carry a flag recording
whether entries were divided by the number of points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, DegenerateInputError

_FAMILIES = ("linear", "polynomial", "gaussian", "laplacian")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its parameters.

    ``kappa_sq`` is the uniform bound on K(z, z): 1.0 for the radial families,
    ``inf`` for linear/polynomial (finite only on a bounded domain).
    """

    family: str
    bandwidth: float | None = None
    degree: int | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ContractError(f"unknown kernel family: {self.family!r}")
        if self.family in ("gaussian", "laplacian"):
            if self.bandwidth is None or self.bandwidth <= 0:
                raise ContractError(f"{self.family} kernel needs a positive bandwidth")
        if self.family == "polynomial":
            if self.degree is None or self.degree < 1:
                raise ContractError("polynomial kernel needs a positive integer degree")
            if self.offset < 0:
                raise ContractError("polynomial offset must be nonnegative")

    @property
    def kappa_sq(self) -> float:
        return 1.0 if self.family in ("gaussian", "laplacian") else math.inf

    def to_json(self) -> str:
        d: dict = {"family": self.family}
        if self.family in ("gaussian", "laplacian"):
            d["bandwidth"] = self.bandwidth
        elif self.family == "polynomial":
            d["degree"] = self.degree
            d["offset"] = self.offset
        return json.dumps(d)

    @classmethod
    def from_json(cls, s: str) -> "KernelSpec":
        d = json.loads(s)
        return cls(**d)


@dataclass
class GramMatrix:
    """A bit-for-bit symmetric kernel matrix.

    ``normalized`` means entries are n^{-1} K(., .), the scaling used by the
    ridge system and all spectral quantities.
    """

    values: np.ndarray
    normalized: bool
    size: int = field(init=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ContractError("Gram matrix must be square")
        self.size = self.values.shape[0]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",")


def _check_points(pts, name="points") -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ContractError(f"{name} must be a non-empty 2-d array")
    if not np.all(np.isfinite(pts)):
        raise ContractError(f"{name} contains non-finite entries")
    return pts


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Stable expansion: clamp cancellation noise before any sqrt.
    sq = (a * a).sum(axis=1)[:, None] - 2.0 * a @ b.T + (b * b).sum(axis=1)[None, :]
    return np.maximum(sq, 0.0)


def _kernel_cross(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """K(a_i, b_j) for all row pairs."""
    if spec.family == "linear":
        return a @ b.T
    if spec.family == "polynomial":
        return (a @ b.T + spec.offset) ** spec.degree
    if spec.family == "gaussian":
        return np.exp(-_sq_dists(a, b) / spec.bandwidth**2)
    # laplacian, Euclidean norm
    return np.exp(-np.sqrt(_sq_dists(a, b)) / spec.bandwidth)


def eval_kernel(spec: KernelSpec, z, zp) -> float:
    """Evaluate K(z, z') for two single points."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    zp = np.atleast_1d(np.asarray(zp, dtype=float))
    if z.shape != zp.shape:
        raise ContractError(f"dimension mismatch: {z.shape} vs {zp.shape}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(zp))):
        raise ContractError("non-finite coordinates")
    return float(_kernel_cross(spec, z[None, :], zp[None, :])[0, 0])


def gram(spec: KernelSpec, pts, normalize: bool = False) -> GramMatrix:
    """Kernel matrix over point rows; optionally divided by the point count."""
    pts = _check_points(pts)
    m = pts.shape[0]
    vals = _kernel_cross(spec, pts, pts)
    # Mirror the upper triangle so symmetry is exact despite rounding.
    vals = np.triu(vals) + np.triu(vals, 1).T
    if spec.family in ("gaussian", "laplacian"):
        # K(z, z) = 1 analytically; the distance expansion leaves 1 - O(eps).
        np.fill_diagonal(vals, 1.0)
    if normalize:
        vals = vals / m
    return GramMatrix(vals, normalized=normalize)


def cross_gram(spec: KernelSpec, pts_a, pts_b) -> np.ndarray:
    """Rectangular kernel matrix K(a_i, b_j); used by out-of-sample prediction."""
    a = _check_points(pts_a, "pts_a")
    b = _check_points(pts_b, "pts_b")
    if a.shape[1] != b.shape[1]:
        raise ContractError("point sets have different dimensions")
    return _kernel_cross(spec, a, b)


def median_bandwidth(pts) -> float:
    """Median of all pairwise Euclidean distances.

    Even pair counts take the midpoint of the two central order statistics.
    """
    pts = _check_points(pts)
    m = pts.shape[0]
    if m < 2:
        raise ContractError("need at least two points")
    d2 = _sq_dists(pts, pts)
    iu = np.triu_indices(m, k=1)
    dists = np.sqrt(d2[iu])
    med = float(np.median(dists))
    if med <= 0.0:
        raise DegenerateInputError("all pairwise distances are zero")
    return med


def kernel_displacement(spec: KernelSpec, z, zhat) -> float:
    """Squared RKHS distance ||K_z - K_zhat||_K^2 via the polarization identity."""
    val = eval_kernel(spec, z, z) - 2.0 * eval_kernel(spec, z, zhat) + eval_kernel(spec, zhat, zhat)
    # Analytically >= 0; anything below is rounding noise.
    return max(val, 0.0)
