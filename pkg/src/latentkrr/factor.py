"""Nonparametric factor-model data generation and PCA factor prediction.

Data follow X = Z A' + W with low-dimensional latent Z and a nonlinear
regression Y = f(Z) + eps.  Factors are predicted linearly, Zhat = X B',
with B from the top-r SVD of (np)^{-1/2} X on an auxiliary sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import ContractError, NumericError

#: column SDs of the loading rows in the benchmark design (variances 10, 5.5, 1)
DEFAULT_LOADING_COL_SD = (np.sqrt(10.0), np.sqrt(5.5), 1.0)


def nonlinear_benchmark(Z: np.ndarray) -> np.ndarray:
    """The 3-factor benchmark regression function used by the simulations."""
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    return 2.0 * np.sin(3.0 * np.pi * z1) + 3.0 * np.abs(z1 - 0.5) - np.exp(z2**2 - z3**2)


@dataclass(frozen=True)
class FactorConfig:
    n: int = 800
    p: int = 2000
    r: int = 3
    alpha_snr: float = 1.0
    loading_col_sd: tuple = DEFAULT_LOADING_COL_SD
    noise_w_sd: float = 1.5
    noise_eps_sd: float = 0.8
    latent_law: str = "uniform01"
    regression_fn: str = "nonlinear_benchmark"
    beta: tuple | None = None  # coefficients when regression_fn == "linear"

    def __post_init__(self):
        if min(self.n, self.p, self.r) < 1 or self.r > self.p:
            raise ContractError("need n, p, r >= 1 and r <= p")
        if len(self.loading_col_sd) != self.r or any(s <= 0 for s in self.loading_col_sd):
            raise ContractError("loading_col_sd must have r positive entries")
        if self.noise_w_sd <= 0 or self.noise_eps_sd <= 0 or self.alpha_snr <= 0:
            raise ContractError("scales must be positive")
        if self.latent_law != "uniform01":
            raise ContractError(f"unknown latent law: {self.latent_law!r}")
        if self.regression_fn not in ("nonlinear_benchmark", "linear", "zero"):
            raise ContractError(f"unknown regression_fn: {self.regression_fn!r}")
        if self.regression_fn == "nonlinear_benchmark" and self.r != 3:
            raise ContractError("the benchmark regression function requires r == 3")
        if self.regression_fn == "linear" and (self.beta is None or len(self.beta) != self.r):
            raise ContractError("linear regression_fn needs beta of length r")

    def regression(self, Z: np.ndarray) -> np.ndarray:
        if self.regression_fn == "nonlinear_benchmark":
            return nonlinear_benchmark(Z)
        if self.regression_fn == "linear":
            return Z @ np.asarray(self.beta, dtype=float)
        return np.zeros(Z.shape[0])

    def to_dict(self) -> dict:
        d = {
            "n": self.n, "p": self.p, "r": self.r, "alpha_snr": self.alpha_snr,
            "loading_col_sd": list(self.loading_col_sd),
            "noise_w_sd": self.noise_w_sd, "noise_eps_sd": self.noise_eps_sd,
            "latent_law": self.latent_law, "regression_fn": self.regression_fn,
        }
        if self.beta is not None:
            d["beta"] = list(self.beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FactorConfig":
        d = dict(d)
        if "loading_col_sd" in d:
            d["loading_col_sd"] = tuple(d["loading_col_sd"])
        if d.get("beta") is not None:
            d["beta"] = tuple(d["beta"])
        return cls(**d)


@dataclass
class SampleSet:
    X: np.ndarray  # n x p
    Z: np.ndarray  # n x r
    Y: np.ndarray  # n
    A_used: np.ndarray  # p x r

    def export_csv(self, prefix) -> None:
        np.savetxt(f"{prefix}_X.csv", self.X, delimiter=",")
        np.savetxt(f"{prefix}_Z.csv", self.Z, delimiter=",")
        np.savetxt(f"{prefix}_Y.csv", self.Y, delimiter=",")


def simulate(config: FactorConfig, seed) -> SampleSet:
    """Draw one sample set; bit-identical for identical (config, seed)."""
    rng = np.random.default_rng(seed)
    n, p, r = config.n, config.p, config.r
    Z = rng.uniform(0.0, 1.0, size=(n, r))
    A = rng.normal(0.0, 1.0, size=(p, r)) * np.asarray(config.loading_col_sd)
    A = config.alpha_snr * A
    W = rng.normal(0.0, config.noise_w_sd, size=(n, p))
    eps = rng.normal(0.0, config.noise_eps_sd, size=n)
    X = Z @ A.T + W
    Y = config.regression(Z) + eps
    return SampleSet(X=X, Z=Z, Y=Y, A_used=A)


def _top_r_svd(X: np.ndarray, r: int):
    """Sign-fixed top-r SVD of X / sqrt(n p)."""
    n, p = X.shape
    if r > min(n, p):
        raise ContractError("r exceeds min(n, p)")
    U, s, Vt = np.linalg.svd(X / np.sqrt(n * p), full_matrices=False)
    if s[r - 1] <= 1e-12 * s[0]:
        raise NumericError("rank-deficient design: r-th singular value vanishes")
    U, s, Vt = U[:, :r], s[:r], Vt[:r]
    # Determinism: largest-magnitude entry of each right singular vector positive.
    for j in range(r):
        k = np.argmax(np.abs(Vt[j]))
        if Vt[j, k] < 0:
            Vt[j] *= -1.0
            U[:, j] *= -1.0
    return U, s, Vt


class PCAFactorPredictor(BaseEstimator, TransformerMixin):
    """Linear factor map fitted by PCA on an auxiliary sample.

    After ``fit(X)``:  ``B_`` (r x p) maps observations to predicted factors,
    ``A_`` (p x r) is the loading estimate, ``singular_values_`` the top-r
    singular values of the (optionally column-centered) X / sqrt(n p).
    ``transform(X)`` returns (X - mean_) @ B_.T.

    With ``center=True`` the fitting sample's column means are removed before
    the SVD and subtracted again at transform time.  Centering keeps the
    whitened factor coordinates orthogonal when the latent variables have a
    non-zero mean; the default is the plain uncentered map.
    """

    def __init__(self, r: int = 3, center: bool = False):
        self.r = r
        self.center = center

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ContractError("X must be 2-d")
        n, p = X.shape
        self.mean_ = X.mean(axis=0) if self.center else np.zeros(p)
        U, s, Vt = _top_r_svd(X - self.mean_, self.r)
        self.B_ = (Vt / s[:, None]) / np.sqrt(p)
        self.A_ = np.sqrt(p) * Vt.T * s
        self.singular_values_ = s
        self.n_features_in_ = p
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.B_.shape[1]:
            raise ContractError("feature dimension mismatch")
        return (X - self.mean_) @ self.B_.T

    def to_json(self) -> str:
        return json.dumps(
            {"r": self.r, "center": self.center, "B": self.B_.tolist(), "mean": self.mean_.tolist()}
        )


def fit_pca_predictor(X_aux, r: int) -> PCAFactorPredictor:
    return PCAFactorPredictor(r=r).fit(X_aux)


def predict_factors(pred: PCAFactorPredictor, X) -> np.ndarray:
    return pred.transform(X)


def cross_fit_factors(X, r: int, k: int, seed) -> np.ndarray:
    """k-fold cross-fitting: each fold's factors come from the complement's map."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if k < 2:
        raise ContractError("need at least 2 folds")
    idx = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(idx, k)
    if any(n - len(f) < r for f in folds):
        raise ContractError("a fold complement has fewer than r rows")
    out = np.empty((n, r))
    for fold in folds:
        comp = np.setdiff1d(np.arange(n), fold)
        pred = PCAFactorPredictor(r=r).fit(X[comp])
        out[fold] = pred.transform(X[fold])
    return out


def eigen_ratio_rank(X_aux, r_max: int) -> int:
    """Singular-value ratio heuristic for the number of factors."""
    X_aux = np.asarray(X_aux, dtype=float)
    n, p = X_aux.shape
    if r_max > min(n, p) - 1:
        raise ContractError("r_max must be at most min(n, p) - 1")
    s = np.linalg.svd(X_aux / np.sqrt(n * p), compute_uv=False)
    s = np.maximum(s[: r_max + 1], 1e-300)
    ratios = s[:-1] / s[1:]
    return int(np.argmax(ratios)) + 1
