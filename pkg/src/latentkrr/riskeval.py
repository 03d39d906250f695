"""Predictor evaluation: empirical prediction error, kernel-space latent
error, Procrustes-aligned factor recovery and design signal-to-noise ratio.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, DegenerateInputError
from .kernels import KernelSpec


@dataclass
class RiskReport:
    mse: float
    excess_estimate: float | None = None
    latent_error: float | None = None
    aligned_factor_mse: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "mse": self.mse,
                "excess_estimate": self.excess_estimate,
                "latent_error": self.latent_error,
                "aligned_factor_mse": self.aligned_factor_mse,
            }
        )


def empirical_mse(predictions, Y) -> float:
    predictions = np.asarray(predictions, dtype=float).ravel()
    Y = np.asarray(Y, dtype=float).ravel()
    if predictions.shape != Y.shape or Y.size < 1:
        raise ContractError("predictions and Y must be non-empty and equal length")
    return float(np.mean((Y - predictions) ** 2))


def latent_error(kernel: KernelSpec, Z, Zhat) -> float:
    """Mean squared RKHS distance between kernel sections at Z_i and Zhat_i."""
    Z = np.asarray(Z, dtype=float)
    Zhat = np.asarray(Zhat, dtype=float)
    if Z.shape != Zhat.shape:
        raise ContractError("Z and Zhat must have equal shapes")
    if Z.ndim == 1:
        Z, Zhat = Z[:, None], Zhat[:, None]
    # Vectorized polarization: K(z,z) - 2 K(z,zhat) + K(zhat,zhat) per row.
    kzz = _diag_kernel(kernel, Z)
    khh = _diag_kernel(kernel, Zhat)
    kzh = _rowwise_kernel(kernel, Z, Zhat)
    disp = np.maximum(kzz - 2.0 * kzh + khh, 0.0)
    return float(disp.mean())


def _rowwise_kernel(kernel: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """K(a_i, b_i) for paired rows."""
    if kernel.family == "linear":
        return (A * B).sum(axis=1)
    if kernel.family == "polynomial":
        return ((A * B).sum(axis=1) + kernel.offset) ** kernel.degree
    sq = np.maximum(((A - B) ** 2).sum(axis=1), 0.0)
    if kernel.family == "gaussian":
        return np.exp(-sq / kernel.bandwidth**2)
    return np.exp(-np.sqrt(sq) / kernel.bandwidth)


def _diag_kernel(kernel: KernelSpec, pts: np.ndarray) -> np.ndarray:
    if kernel.family in ("gaussian", "laplacian"):
        return np.ones(pts.shape[0])
    if kernel.family == "linear":
        return (pts * pts).sum(axis=1)
    return ((pts * pts).sum(axis=1) + kernel.offset) ** kernel.degree


def procrustes_align(Zhat, Z) -> tuple[np.ndarray, float]:
    """Best orthogonal alignment of Zhat to Z rows.

    Returns (Q, aligned_mse) with Q orthogonal minimizing ||Zhat - Z Q'||_F and
    aligned_mse = ||Zhat - Z Q'||_F^2 / m.
    """
    Zhat = np.asarray(Zhat, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if Zhat.shape != Z.shape:
        raise ContractError("Zhat and Z must have equal shapes")
    m, r = Z.shape
    if m < r:
        raise ContractError("need at least r rows")
    M = Zhat.T @ Z
    U, _, Vt = np.linalg.svd(M)
    Q = U @ Vt
    aligned_mse = float(np.sum((Zhat - Z @ Q.T) ** 2) / m)
    return Q, aligned_mse


def snr(A, Sigma_Z, Sigma_W) -> float:
    """r-th largest eigenvalue of A Sigma_Z A' over the operator norm of Sigma_W.

    ``Sigma_W`` may be a scalar, meaning sigma^2 I.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ContractError("A must be 2-d")
    p, r = A.shape
    Sigma_Z = np.asarray(Sigma_Z, dtype=float)
    if Sigma_Z.shape != (r, r):
        raise ContractError("Sigma_Z must be r x r")
    # Nonzero eigenvalues of A S A' equal those of S^{1/2} A'A S^{1/2} (r x r).
    wz, Vz = np.linalg.eigh(Sigma_Z)
    if np.any(wz < -1e-10 * max(wz.max(), 1.0)):
        raise ContractError("Sigma_Z must be PSD")
    root = Vz @ (np.sqrt(np.maximum(wz, 0.0))[:, None] * Vz.T)
    small = root @ (A.T @ A) @ root
    lam_r = float(np.sort(np.linalg.eigvalsh(small))[0])  # r-th largest of rank<=r matrix
    if np.isscalar(Sigma_W) or np.ndim(Sigma_W) == 0:
        if float(Sigma_W) <= 0:
            raise ContractError("scalar Sigma_W must be positive")
        op = float(Sigma_W)
    else:
        Sigma_W = np.asarray(Sigma_W, dtype=float)
        if Sigma_W.shape != (p, p):
            raise ContractError("Sigma_W must be p x p (or a scalar)")
        op = float(np.linalg.eigvalsh(Sigma_W)[-1])
    if lam_r <= 0:
        raise DegenerateInputError("design is degenerate: lambda_r(A Sigma_Z A') <= 0")
    return lam_r / op
