"""Config-driven simulation experiments comparing factor-based predictors.

Each replication draws a loading matrix, then independent training, auxiliary
and test samples sharing that loading.  Methods:

    krr_zhat_aux       KRR on factors predicted with a PCA map from the aux sample
    krr_zhat_insample  KRR on factors predicted with a PCA map from the training X
    krr_z              KRR on the true latent factors (oracle)
    krr_x              KRR directly on the raw high-dimensional X
    lr_z               OLS on the true latent factors (with intercept)

All kernel methods use a Gaussian kernel with median-heuristic bandwidth and
pick lambda by k-fold cross-validation.  Seeds are derived per
(master_seed, sweep index, replication, stream) through SeedSequence, so
replications are independent and the full report is reproducible regardless
of execution order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import ContractError, NumericError
from .factor import FactorConfig, PCAFactorPredictor, SampleSet
from .kernels import KernelSpec, gram, median_bandwidth
from .krr import LossSpec, cross_validate_lambda, fit_squared, predict_from_alpha
from .riskeval import empirical_mse

METHODS = ("krr_zhat_aux", "krr_zhat_insample", "krr_z", "krr_x", "lr_z")
_STREAMS = {"loading": 0, "train": 1, "aux": 2, "test": 3, "cv": 4}


@dataclass(frozen=True)
class ExperimentConfig:
    factor: FactorConfig = field(default_factory=FactorConfig)
    kernel_policy: str = "gaussian_median"
    lambda_grid: tuple = tuple(np.logspace(-5, 0, 10))
    cv_folds: int = 3
    methods: tuple = METHODS
    replications: int = 100
    test_size: int | None = None  # None means m = n
    master_seed: int = 0
    sweep_param: str = "n"  # one of n | p | alpha_snr
    sweep_values: tuple = (800,)

    def __post_init__(self):
        if self.kernel_policy != "gaussian_median":
            raise ContractError(f"unknown kernel policy: {self.kernel_policy!r}")
        if self.replications < 1:
            raise ContractError("replications must be >= 1")
        if len(self.sweep_values) == 0 or len(self.lambda_grid) == 0:
            raise ContractError("sweep_values and lambda_grid must be non-empty")
        if self.sweep_param not in ("n", "p", "alpha_snr"):
            raise ContractError(f"unknown sweep parameter: {self.sweep_param!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ContractError(f"unknown or empty methods: {bad}")

    def factor_at(self, sweep_value) -> FactorConfig:
        if self.sweep_param == "n":
            return replace(self.factor, n=int(sweep_value))
        if self.sweep_param == "p":
            return replace(self.factor, p=int(sweep_value))
        return replace(self.factor, alpha_snr=float(sweep_value))

    def to_dict(self) -> dict:
        return {
            "factor": self.factor.to_dict(),
            "kernel_policy": self.kernel_policy,
            "lambda_grid": list(map(float, self.lambda_grid)),
            "cv_folds": self.cv_folds,
            "methods": list(self.methods),
            "replications": self.replications,
            "test_size": self.test_size,
            "master_seed": self.master_seed,
            "sweep_param": self.sweep_param,
            "sweep_values": list(self.sweep_values),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "factor" in d:
            d["factor"] = FactorConfig.from_dict(d["factor"])
        for key in ("lambda_grid", "methods", "sweep_values"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _stream_seed(master_seed: int, sweep_index: int, rep_index: int, stream: str):
    return np.random.SeedSequence(
        entropy=(int(master_seed), int(sweep_index), int(rep_index), _STREAMS[stream])
    )


def _simulate(cfg: FactorConfig, seed_seq, A: np.ndarray) -> SampleSet:
    rng = np.random.default_rng(seed_seq)
    Z = rng.uniform(0.0, 1.0, size=(cfg.n, cfg.r))
    W = rng.normal(0.0, cfg.noise_w_sd, size=(cfg.n, cfg.p))
    eps = rng.normal(0.0, cfg.noise_eps_sd, size=cfg.n)
    return SampleSet(X=Z @ A.T + W, Z=Z, Y=cfg.regression(Z) + eps, A_used=A)


def ols_fit(Z, Y, intercept: bool = False) -> np.ndarray:
    """Least-squares coefficients; jitters the normal equations if singular."""
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if Z.ndim != 2 or Z.shape[0] != Y.shape[0] or Z.shape[0] <= Z.shape[1]:
        raise ContractError("need n > r rows matching the response length")
    D = np.column_stack([np.ones(Z.shape[0]), Z]) if intercept else Z
    G = D.T @ D
    rhs = D.T @ Y
    try:
        c = cho_factor(G)
    except np.linalg.LinAlgError:
        G = G + 1e-10 * np.trace(G) * np.eye(G.shape[0])
        c = cho_factor(G)
    return cho_solve(c, rhs)


def _krr_error(train_pts, y_train, test_pts, y_test, lambda_grid, cv_folds, cv_seed):
    sigma = median_bandwidth(train_pts)
    kernel = KernelSpec("gaussian", bandwidth=sigma)
    lam, _ = cross_validate_lambda(
        train_pts, y_train, kernel, LossSpec("squared"), lambda_grid, cv_folds, cv_seed
    )
    K = gram(kernel, train_pts, normalize=True)
    alpha = fit_squared(K, y_train, lam)
    pred = predict_from_alpha(kernel, train_pts, alpha, test_pts)
    return empirical_mse(pred, y_test)


def run_replication(config: ExperimentConfig, sweep_index: int, rep_index: int) -> dict:
    """One replication; returns {method: (error, runtime_sec)}."""
    sweep_value = config.sweep_values[sweep_index]
    cfg = config.factor_at(sweep_value)
    m = config.test_size if config.test_size is not None else cfg.n

    rng_a = np.random.default_rng(_stream_seed(config.master_seed, sweep_index, rep_index, "loading"))
    A = cfg.alpha_snr * (
        rng_a.normal(0.0, 1.0, size=(cfg.p, cfg.r)) * np.asarray(cfg.loading_col_sd)
    )
    train = _simulate(cfg, _stream_seed(config.master_seed, sweep_index, rep_index, "train"), A)
    aux = _simulate(cfg, _stream_seed(config.master_seed, sweep_index, rep_index, "aux"), A)
    test = _simulate(
        replace(cfg, n=m), _stream_seed(config.master_seed, sweep_index, rep_index, "test"), A
    )
    cv_seed = int(
        _stream_seed(config.master_seed, sweep_index, rep_index, "cv").generate_state(1)[0]
    )

    results = {}
    for method in config.methods:
        t0 = time.perf_counter()
        try:
            if method in ("krr_zhat_aux", "krr_zhat_insample"):
                source = aux.X if method == "krr_zhat_aux" else train.X
                # Centered map: uniform latents have mean 1/2, and centering
                # keeps the whitened coordinates orthogonal.
                pca = PCAFactorPredictor(r=cfg.r, center=True).fit(source)
                err = _krr_error(
                    pca.transform(train.X), train.Y, pca.transform(test.X), test.Y,
                    config.lambda_grid, config.cv_folds, cv_seed,
                )
            elif method == "krr_z":
                err = _krr_error(
                    train.Z, train.Y, test.Z, test.Y,
                    config.lambda_grid, config.cv_folds, cv_seed,
                )
            elif method == "krr_x":
                err = _krr_error(
                    train.X, train.Y, test.X, test.Y,
                    config.lambda_grid, config.cv_folds, cv_seed,
                )
            else:  # lr_z
                beta = ols_fit(train.Z, train.Y, intercept=True)
                pred = beta[0] + test.Z @ beta[1:]
                err = empirical_mse(pred, test.Y)
        except Exception as exc:
            raise NumericError(
                f"method {method} failed at sweep value {sweep_value!r}, "
                f"replication {rep_index} (master_seed {config.master_seed}): {exc}"
            ) from exc
        results[method] = (float(err), time.perf_counter() - t0)
    return results


@dataclass
class ExperimentReport:
    rows: list  # dicts: sweep_value, method, mean_error, sd_error, mean_runtime_sec
    config_hash: str
    master_seed: int
    replications: int

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("sweep,method,mean,sd,runtime_s\n")
            for row in self.rows:
                fh.write(
                    f"{row['sweep_value']},{row['method']},{row['mean_error']:.10g},"
                    f"{row['sd_error']:.10g},{row['mean_runtime_sec']:.6g}\n"
                )

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self))

    def mean_error(self, sweep_value, method) -> float:
        for row in self.rows:
            if row["sweep_value"] == sweep_value and row["method"] == method:
                return row["mean_error"]
        raise KeyError((sweep_value, method))


def _rep_task(args):
    config_dict, sweep_index, rep_index = args
    config = ExperimentConfig.from_dict(config_dict)
    return sweep_index, rep_index, run_replication(config, sweep_index, rep_index)


def run_sweep(config: ExperimentConfig, n_jobs: int | None = None) -> ExperimentReport:
    """Run all replications over the sweep and aggregate mean/SD per method.

    ``n_jobs`` defaults to the LATENTKRR_JOBS environment variable, then 1.
    Results are merged in (sweep, replication) order, so the report does not
    depend on scheduling.
    """
    if n_jobs is None:
        n_jobs = int(os.environ.get("LATENTKRR_JOBS", "1"))
    tasks = [
        (config.to_dict(), si, ri)
        for si in range(len(config.sweep_values))
        for ri in range(config.replications)
    ]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            raw = list(pool.map(_rep_task, tasks))
    else:
        raw = [_rep_task(t) for t in tasks]
    raw.sort(key=lambda t: (t[0], t[1]))

    rows = []
    for si, sweep_value in enumerate(config.sweep_values):
        per_rep = [r for s, _, r in raw if s == si]
        for method in config.methods:
            errs = np.array([rep[method][0] for rep in per_rep])
            times = np.array([rep[method][1] for rep in per_rep])
            rows.append(
                {
                    "sweep_value": sweep_value,
                    "method": method,
                    "mean_error": float(errs.mean()),
                    "sd_error": float(errs.std(ddof=1)) if errs.size > 1 else 0.0,
                    "mean_runtime_sec": float(times.mean()),
                }
            )
    return ExperimentReport(
        rows=rows,
        config_hash=config.hash(),
        master_seed=config.master_seed,
        replications=config.replications,
    )
