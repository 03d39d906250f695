"""Kernel ridge regression with squared and general convex losses.

The representer system uses the normalized kernel matrix K_x (entries
n^{-1} K) throughout:

    alpha = n^{-1/2} (K_x + lam I)^{-1} y            (squared loss)
    f(z)  = n^{-1/2} sum_i alpha_i K(x_i, z)

General convex losses minimize

    J(alpha) = (1/n) sum_j L(y_j, sqrt(n) (K_x alpha)_j) + lam alpha' K_x alpha

by gradient descent with Armijo backtracking.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin

from .exceptions import ContractError, NumericError
from .kernels import GramMatrix, KernelSpec, _check_points, cross_gram, gram


@dataclass(frozen=True)
class LossSpec:
    """Convex per-observation loss.

    kinds: squared; logistic / exponential (labels in {-1, +1}, margin form);
    check (pinball, slope tau on positive residuals); huber.
    """

    kind: str = "squared"
    tau: float | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in ("squared", "logistic", "exponential", "check", "huber"):
            raise ContractError(f"unknown loss kind: {self.kind!r}")
        if self.kind == "check" and not (self.tau is not None and 0.0 < self.tau < 1.0):
            raise ContractError("check loss needs tau in (0, 1)")
        if self.kind == "huber" and not (self.threshold is not None and self.threshold > 0):
            raise ContractError("huber loss needs a positive threshold")

    def value(self, y: np.ndarray, f: np.ndarray) -> np.ndarray:
        if self.kind == "squared":
            return (y - f) ** 2
        if self.kind == "logistic":
            return np.logaddexp(0.0, -y * f)
        if self.kind == "exponential":
            return np.exp(-y * f)
        if self.kind == "check":
            u = y - f
            return u * (self.tau - (u < 0))
        u = y - f  # huber
        t = self.threshold
        return np.where(np.abs(u) <= t, 0.5 * u * u, t * (np.abs(u) - 0.5 * t))

    def grad_f(self, y: np.ndarray, f: np.ndarray) -> np.ndarray:
        """(Sub)gradient of L(y, f) in f."""
        if self.kind == "squared":
            return -2.0 * (y - f)
        if self.kind == "logistic":
            return -y / (1.0 + np.exp(y * f))
        if self.kind == "exponential":
            return -y * np.exp(-y * f)
        if self.kind == "check":
            u = y - f
            # d rho/d u = tau for u > 0, tau - 1 for u <= 0
            return -np.where(u > 0, self.tau, self.tau - 1.0)
        u = y - f  # huber
        return -np.clip(u, -self.threshold, self.threshold)

    def to_json(self) -> str:
        d: dict = {"kind": self.kind}
        if self.kind == "check":
            d["tau"] = self.tau
        elif self.kind == "huber":
            d["threshold"] = self.threshold
        return json.dumps(d)

    @classmethod
    def from_json(cls, s: str) -> "LossSpec":
        return cls(**json.loads(s))


@dataclass
class SolverResult:
    alpha: np.ndarray
    objective: float
    n_iter: int
    converged: bool


def _check_normalized(gram_norm: GramMatrix):
    if not gram_norm.normalized:
        raise ContractError("expected a normalized Gram matrix")


def fit_squared(gram_norm: GramMatrix, y, lam: float) -> np.ndarray:
    """Representer coefficients for the squared loss: n^{-1/2}(K_x + lam I)^{-1} y."""
    _check_normalized(gram_norm)
    y = np.asarray(y, dtype=float).ravel()
    n = gram_norm.size
    if y.shape[0] != n:
        raise ContractError("response length does not match Gram size")
    if lam <= 0:
        raise ContractError("lambda must be positive")
    A = gram_norm.values + lam * np.eye(n)
    try:
        c = cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        # Rounding can push the smallest eigenvalue just below zero.
        A = A + 1e-12 * np.trace(A) * np.eye(n)
        try:
            c = cho_factor(A, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NumericError("Cholesky factorization failed") from exc
    return cho_solve(c, y) / np.sqrt(n)


def _objective(gram_norm_vals, y, lam, loss, alpha, fitted=None):
    n = y.shape[0]
    if fitted is None:
        fitted = np.sqrt(n) * (gram_norm_vals @ alpha)
    return float(np.mean(loss.value(y, fitted)) + lam * alpha @ gram_norm_vals @ alpha)


def fit_general(
    gram_norm: GramMatrix,
    y,
    lam: float,
    loss: LossSpec,
    max_iter: int = 5000,
    tol: float = 1e-10,
    step0: float = 1.0,
) -> SolverResult:
    """First-order descent with Armijo backtracking on the representer objective.

    The descent direction is the kernel-preconditioned gradient
    d = L'(y, f)/sqrt(n) + 2 lam alpha (the gradient in the RKHS geometry,
    since dJ/dalpha = K d), which keeps the effective condition number at
    (1 + lam)/lam instead of depending on the smallest Gram eigenvalue.
    """
    _check_normalized(gram_norm)
    y = np.asarray(y, dtype=float).ravel()
    n = gram_norm.size
    if y.shape[0] != n:
        raise ContractError("response length does not match Gram size")
    if lam <= 0:
        raise ContractError("lambda must be positive")
    K = gram_norm.values
    sqrt_n = np.sqrt(n)

    alpha = np.zeros(n)
    obj = _objective(K, y, lam, loss, alpha)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        fitted = sqrt_n * (K @ alpha)
        d = loss.grad_f(y, fitted) / sqrt_n + 2.0 * lam * alpha
        # Directional derivative along -d is -d' K d (the squared RKHS norm).
        slope = float(d @ (K @ d))
        if slope <= 0.0:
            converged = True
            break
        step = step0
        new_obj = None
        while step > 1e-16:
            cand = alpha - step * d
            cand_obj = _objective(K, y, lam, loss, cand)
            if cand_obj <= obj - 1e-4 * step * slope:
                new_obj = cand_obj
                break
            step *= 0.5
        if new_obj is None:
            break  # no descent step found (subgradient kink); keep best iterate
        alpha = alpha - step * d
        if obj - new_obj < tol * max(abs(obj), 1.0) * 1.0:
            obj = new_obj
            converged = True
            break
        obj = new_obj
    if not converged:
        warnings.warn(
            f"general-loss solver did not converge in {max_iter} iterations "
            f"(objective {obj:.6g})",
            RuntimeWarning,
        )
    return SolverResult(alpha=alpha, objective=obj, n_iter=it, converged=converged)


def predict_from_alpha(kernel: KernelSpec, train_pts, alpha, new_pts) -> np.ndarray:
    """n^{-1/2} sum_i alpha_i K(train_i, new_j)."""
    train_pts = _check_points(train_pts, "train_pts")
    alpha = np.asarray(alpha, dtype=float).ravel()
    n = train_pts.shape[0]
    if alpha.shape[0] != n:
        raise ContractError("alpha length does not match training set")
    return cross_gram(kernel, new_pts, train_pts) @ alpha / np.sqrt(n)


class KernelRidge(BaseEstimator, RegressorMixin):
    """Kernel ridge regressor on observed or predicted feature inputs.

    Parameters
    ----------
    kernel : KernelSpec
    lam : positive ridge penalty
    loss : LossSpec, defaults to squared (closed-form solve); any other kind
        uses the iterative convex solver.
    """

    def __init__(self, kernel=None, lam=1.0, loss=None, max_iter=5000, tol=1e-10, step0=1.0):
        self.kernel = kernel
        self.lam = lam
        self.loss = loss
        self.max_iter = max_iter
        self.tol = tol
        self.step0 = step0

    def fit(self, X, y):
        X = _check_points(X, "X")
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != X.shape[0]:
            raise ContractError("X and y have different lengths")
        kernel = self.kernel if self.kernel is not None else KernelSpec("gaussian", bandwidth=1.0)
        loss = self.loss if self.loss is not None else LossSpec("squared")
        K = gram(kernel, X, normalize=True)
        if loss.kind == "squared":
            self.alpha_ = fit_squared(K, y, self.lam)
            self.converged_ = True
            self.n_iter_ = 0
            self.objective_ = _objective(K.values, y, self.lam, loss, self.alpha_)
        else:
            res = fit_general(K, y, self.lam, loss, self.max_iter, self.tol, self.step0)
            self.alpha_ = res.alpha
            self.converged_ = res.converged
            self.n_iter_ = res.n_iter
            self.objective_ = res.objective
        self.X_fit_ = X
        self.kernel_ = kernel
        self.loss_ = loss
        return self

    def predict(self, X):
        return predict_from_alpha(self.kernel_, self.X_fit_, self.alpha_, X)

    def rkhs_norm_sq(self) -> float:
        """||f||_K^2 = n alpha' K_x alpha of the fitted function."""
        Kraw = gram(self.kernel_, self.X_fit_, normalize=False)
        return float(self.alpha_ @ Kraw.values @ self.alpha_)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kernel": json.loads(self.kernel_.to_json()),
                "loss": json.loads(self.loss_.to_json()),
                "lambda": self.lam,
                "alpha": self.alpha_.tolist(),
                "inputs": self.X_fit_.tolist(),
            }
        )

    @classmethod
    def from_json(cls, s: str) -> "KernelRidge":
        d = json.loads(s)
        model = cls(kernel=KernelSpec(**d["kernel"]), lam=d["lambda"], loss=LossSpec(**d["loss"]))
        model.kernel_ = model.kernel
        model.loss_ = model.loss
        model.lam = d["lambda"]
        model.alpha_ = np.asarray(d["alpha"], dtype=float)
        model.X_fit_ = np.asarray(d["inputs"], dtype=float)
        model.converged_ = True
        model.n_iter_ = 0
        return model


@dataclass
class CvRow:
    lam: float
    mean_loss: float
    sd_loss: float


def cross_validate_lambda(
    points,
    y,
    kernel: KernelSpec,
    loss: LossSpec,
    grid,
    folds: int = 3,
    seed: int = 0,
) -> tuple[float, list[CvRow]]:
    """Pick lambda from a grid by k-fold CV; ties broken toward larger lambda.

    Fold assignment is a seeded shuffle split into contiguous blocks, so the
    result is deterministic given the seed.
    """
    points = _check_points(points, "points")
    y = np.asarray(y, dtype=float).ravel()
    n = points.shape[0]
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0):
        raise ContractError("lambda grid must be non-empty and positive")
    if folds < 2 or folds > n:
        raise ContractError("folds must be in [2, n]")
    idx = np.random.default_rng(seed).permutation(n)
    fold_ids = np.array_split(idx, folds)
    if min(len(f) for f in fold_ids) < 1:
        raise ContractError("a fold would be empty")

    # One Gram over all points; folds reuse submatrices.
    K_full = gram(kernel, points, normalize=False).values
    fold_losses = np.empty((grid.size, folds))
    for k, val_idx in enumerate(fold_ids):
        train_idx = np.setdiff1d(np.arange(n), val_idx)
        nt = train_idx.size
        K_tr = GramMatrix(K_full[np.ix_(train_idx, train_idx)] / nt, normalized=True)
        K_val = K_full[np.ix_(val_idx, train_idx)]
        y_tr, y_val = y[train_idx], y[val_idx]
        for g, lam in enumerate(grid):
            if loss.kind == "squared":
                alpha = fit_squared(K_tr, y_tr, lam)
            else:
                alpha = fit_general(K_tr, y_tr, lam, loss).alpha
            pred = K_val @ alpha / np.sqrt(nt)
            fold_losses[g, k] = float(np.mean(loss.value(y_val, pred)))
    means = fold_losses.mean(axis=1)
    sds = fold_losses.std(axis=1, ddof=1) if folds > 1 else np.zeros(grid.size)
    # argmin with ties toward the larger lambda
    order = np.lexsort((-grid, means))
    best = order[0]
    table = [CvRow(float(grid[g]), float(means[g]), float(sds[g])) for g in range(grid.size)]
    return float(grid[best]), table
