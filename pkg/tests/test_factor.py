"""Factor-model simulation, PCA factor prediction and cross-fitting."""

import json
import math

import numpy as np
import pytest

from latentkrr.exceptions import ContractError, NumericError
from latentkrr.factor import (
    DEFAULT_LOADING_COL_SD,
    FactorConfig,
    PCAFactorPredictor,
    cross_fit_factors,
    eigen_ratio_rank,
    fit_pca_predictor,
    nonlinear_benchmark,
    predict_factors,
    simulate,
)
from latentkrr.riskeval import procrustes_align

N_CASES = 100


def whiten_columns(Z):
    """sqrt(n) times an orthonormal basis of col(Z), oriented along Z."""
    U, _, Vt = np.linalg.svd(Z, full_matrices=False)
    return math.sqrt(Z.shape[0]) * U @ Vt


# ---------------------------------------------------------------- fixed values

def test_benchmark_function_hand_values():
    Z = np.array([[0.5, 0.0, 0.0], [0.0, 1.0, 0.0]])
    vals = nonlinear_benchmark(Z)
    # 2 sin(1.5 pi) + 0 - exp(0) = -3;  0 + 1.5 - e
    assert vals[0] == pytest.approx(-3.0, abs=1e-12)
    assert vals[1] == pytest.approx(1.5 - math.e, abs=1e-12)


def test_simulate_shapes_and_determinism():
    cfg = FactorConfig(n=50, p=40)
    s1, s2 = simulate(cfg, 7), simulate(cfg, 7)
    assert s1.X.shape == (50, 40) and s1.Z.shape == (50, 3) and s1.Y.shape == (50,)
    assert np.array_equal(s1.X, s2.X) and np.array_equal(s1.Y, s2.Y)
    assert not np.array_equal(s1.X, simulate(cfg, 8).X)


def test_simulate_moments():
    cfg = FactorConfig(n=200, p=3000)
    s = simulate(cfg, 0)
    assert np.all((s.Z >= 0) & (s.Z <= 1))
    # loading columns scaled by the configured SDs (variances 10, 5.5, 1)
    col_sd = s.A_used.std(axis=0, ddof=1)
    assert np.allclose(col_sd, DEFAULT_LOADING_COL_SD, rtol=0.1)
    resid = s.X - s.Z @ s.A_used.T
    assert resid.std() == pytest.approx(cfg.noise_w_sd, rel=0.05)
    eps = s.Y - nonlinear_benchmark(s.Z)
    assert eps.std() == pytest.approx(cfg.noise_eps_sd, rel=0.25)


def test_simulate_linear_and_zero_regression():
    cfg = FactorConfig(n=30, p=10, regression_fn="linear", beta=(1.0, -2.0, 0.5))
    s = simulate(cfg, 1)
    assert np.allclose(
        s.Y - s.Z @ np.array([1.0, -2.0, 0.5]), s.Y - cfg.regression(s.Z)
    )
    zero = FactorConfig(n=30, p=10, regression_fn="zero")
    assert np.all(zero.regression(s.Z) == 0)


def test_factor_config_contracts():
    with pytest.raises(ContractError):
        FactorConfig(n=0)
    with pytest.raises(ContractError):
        FactorConfig(r=5, p=4)
    with pytest.raises(ContractError):
        FactorConfig(loading_col_sd=(1.0, 2.0))  # wrong length for r=3
    with pytest.raises(ContractError):
        FactorConfig(noise_w_sd=0.0)
    with pytest.raises(ContractError):
        FactorConfig(latent_law="gaussian")
    with pytest.raises(ContractError):
        FactorConfig(regression_fn="cubic")
    with pytest.raises(ContractError):
        FactorConfig(r=2, loading_col_sd=(1.0, 1.0))  # benchmark needs r = 3
    with pytest.raises(ContractError):
        FactorConfig(regression_fn="linear")  # missing beta


def test_factor_config_dict_roundtrip():
    cfg = FactorConfig(n=100, p=50, alpha_snr=0.3, regression_fn="linear", beta=(1, 2, 3))
    assert FactorConfig.from_dict(cfg.to_dict()) == cfg


def test_sample_set_csv_export(tmp_path):
    s = simulate(FactorConfig(n=10, p=6), 0)
    prefix = str(tmp_path / "sample")
    s.export_csv(prefix)
    assert np.allclose(np.loadtxt(prefix + "_X.csv", delimiter=","), s.X)
    assert np.allclose(np.loadtxt(prefix + "_Z.csv", delimiter=","), s.Z)
    assert np.allclose(np.loadtxt(prefix + "_Y.csv", delimiter=","), s.Y)


def test_pca_loading_map_inverse_relation():
    # B A = I_r by construction of the whitened map.
    X = np.random.default_rng(0).normal(size=(60, 30))
    pred = fit_pca_predictor(X, 4)
    assert np.allclose(pred.B_ @ pred.A_, np.eye(4), atol=1e-10)


def test_pca_transform_is_linear_map():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 20))
    pred = fit_pca_predictor(X, 3)
    Xnew = rng.normal(size=(7, 20))
    assert np.allclose(predict_factors(pred, Xnew), Xnew @ pred.B_.T)


def test_pca_sign_convention_deterministic():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 25))
    p1 = fit_pca_predictor(X, 3)
    p2 = fit_pca_predictor(X.copy(), 3)
    assert np.array_equal(p1.B_, p2.B_)
    # each row of B has its largest-magnitude V entry positive
    for row in np.sqrt(25) * (p1.B_ * p1.singular_values_[:, None]):
        assert row[np.argmax(np.abs(row))] > 0


def test_pca_centered_map():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(80, 15)) + 5.0
    pred = PCAFactorPredictor(r=2, center=True).fit(X)
    assert np.allclose(pred.mean_, X.mean(axis=0))
    Zh = pred.transform(X)
    assert np.allclose(Zh.T @ Zh / 80, np.eye(2), atol=1e-8)
    d = json.loads(pred.to_json())
    assert d["center"] and len(d["mean"]) == 15


def test_pca_contracts():
    rng = np.random.default_rng(4)
    with pytest.raises(ContractError):
        fit_pca_predictor(rng.normal(size=(5, 4)), 5)
    with pytest.raises(NumericError):
        fit_pca_predictor(np.outer(np.arange(1, 7.0), np.ones(4)), 2)  # rank one
    pred = fit_pca_predictor(rng.normal(size=(10, 6)), 2)
    with pytest.raises(ContractError):
        pred.transform(rng.normal(size=(3, 5)))


def test_cross_fit_shapes_and_determinism():
    X = np.random.default_rng(5).normal(size=(40, 12))
    z1 = cross_fit_factors(X, 3, 4, seed=0)
    z2 = cross_fit_factors(X, 3, 4, seed=0)
    assert z1.shape == (40, 3)
    assert np.array_equal(z1, z2)
    assert not np.array_equal(z1, cross_fit_factors(X, 3, 4, seed=1))
    with pytest.raises(ContractError):
        cross_fit_factors(X, 3, 1, seed=0)


def test_cross_fit_uses_complement_map():
    # With 2 folds, each half's factors come from the other half's fit.
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 10))
    out = cross_fit_factors(X, 2, 2, seed=3)
    idx = np.random.default_rng(3).permutation(30)
    folds = np.array_split(idx, 2)
    comp = np.setdiff1d(np.arange(30), folds[0])
    pred = fit_pca_predictor(X[comp], 2)
    assert np.allclose(out[folds[0]], pred.transform(X[folds[0]]))


def test_eigen_ratio_rank_recovers_three_factors():
    # Equal-strength factors: the largest singular-value ratio sits at k = 3.
    s = simulate(FactorConfig(n=300, p=500, loading_col_sd=(2.0, 2.0, 2.0)), 0)
    assert eigen_ratio_rank(s.X, 8) == 3
    with pytest.raises(ContractError):
        eigen_ratio_rank(s.X, 300)


# ----------------------------------------------------------------- invariants

def test_invariant_scale_equivariance():
    rng = np.random.default_rng(301)
    for _ in range(N_CASES):
        n, p = int(rng.integers(8, 40)), int(rng.integers(5, 20))
        r = int(rng.integers(1, min(n, p, 4)))
        X = rng.normal(size=(n, p))
        c = float(10.0 ** rng.uniform(-2, 2))
        base = fit_pca_predictor(X, r)
        scaled = fit_pca_predictor(c * X, r)
        assert np.allclose(scaled.B_, base.B_ / c, rtol=1e-8, atol=1e-12)
        assert np.allclose(scaled.A_, base.A_ * c, rtol=1e-8, atol=1e-10)
        assert np.allclose((c * X) @ scaled.B_.T, X @ base.B_.T, atol=1e-8)


def test_invariant_whitened_scores():
    rng = np.random.default_rng(302)
    for _ in range(N_CASES):
        n, p = int(rng.integers(8, 50)), int(rng.integers(4, 25))
        r = int(rng.integers(1, min(n, p, 5)))
        X = rng.normal(size=(n, p))
        Zh = fit_pca_predictor(X, r).transform(X)
        assert np.allclose(Zh.T @ Zh / n, np.eye(r), atol=1e-8)


def test_invariant_noiseless_reconstruction():
    rng = np.random.default_rng(303)
    for _ in range(N_CASES):
        n, p = int(rng.integers(10, 40)), int(rng.integers(6, 25))
        r = int(rng.integers(1, 4))
        X = rng.normal(size=(n, r)) @ rng.normal(size=(r, p))
        pred = fit_pca_predictor(X, r)
        Zh = pred.transform(X)
        assert np.linalg.norm(X - Zh @ pred.A_.T) <= 1e-6 * np.linalg.norm(X)


def test_invariant_snr_monotone_alignment_error():
    # Stronger loadings give uniformly better factor recovery on a seed pool.
    alphas = (0.1, 0.5, 1.0)
    seeds = range(12)
    means = []
    for alpha in alphas:
        errs = []
        for seed in seeds:
            cfg = FactorConfig(n=150, p=400, alpha_snr=alpha)
            s = simulate(cfg, seed)
            pred = fit_pca_predictor(s.X, 3)
            _, err = procrustes_align(pred.transform(s.X), whiten_columns(s.Z))
            errs.append(err)
        means.append(np.mean(errs))
    assert means[0] >= means[1] >= means[2]
