"""Kernel evaluation, Gram construction, bandwidth heuristic and displacement."""

import json
import math

import numpy as np
import pytest

from latentkrr.exceptions import ContractError, DegenerateInputError
from latentkrr.kernels import (
    GramMatrix,
    KernelSpec,
    cross_gram,
    eval_kernel,
    gram,
    kernel_displacement,
    median_bandwidth,
)

N_CASES = 100


def random_kernel(rng, families=("linear", "polynomial", "gaussian", "laplacian")):
    family = families[rng.integers(len(families))]
    if family in ("gaussian", "laplacian"):
        return KernelSpec(family, bandwidth=float(rng.uniform(0.3, 3.0)))
    if family == "polynomial":
        return KernelSpec(family, degree=int(rng.integers(1, 4)), offset=float(rng.uniform(0, 2)))
    return KernelSpec("linear")


# ---------------------------------------------------------------- fixed values

def test_gaussian_value():
    k = KernelSpec("gaussian", bandwidth=1.0)
    assert eval_kernel(k, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(math.exp(-1.0), abs=1e-15)
    assert eval_kernel(k, [1.0, 2.0], [1.0, 2.0]) == 1.0


def test_gaussian_bandwidth_scaling():
    k = KernelSpec("gaussian", bandwidth=2.0)
    # squared distance 4, bandwidth^2 = 4
    assert eval_kernel(k, [0.0], [2.0]) == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_laplacian_value():
    k = KernelSpec("laplacian", bandwidth=0.5)
    # Euclidean distance 1, so exp(-1/0.5) = exp(-2)
    assert eval_kernel(k, [0.0, 0.0], [0.6, 0.8]) == pytest.approx(math.exp(-2.0), abs=1e-14)


def test_linear_and_polynomial_values():
    assert eval_kernel(KernelSpec("linear"), [1.0, 2.0], [3.0, 4.0]) == pytest.approx(11.0)
    k = KernelSpec("polynomial", degree=2, offset=1.0)
    assert eval_kernel(k, [1.0, 2.0], [3.0, 4.0]) == pytest.approx(144.0)  # (11 + 1)^2


def test_median_bandwidth_odd_and_even_counts():
    # distances {1, 3, 2} -> median 2
    assert median_bandwidth(np.array([[0.0], [1.0], [3.0]])) == pytest.approx(2.0)
    # distances {1, 2, 4, 1, 3, 2} -> midpoint of 2 and 2
    assert median_bandwidth(np.array([[0.0], [1.0], [2.0], [4.0]])) == pytest.approx(2.0)


def test_displacement_gaussian_closed_form():
    k = KernelSpec("gaussian", bandwidth=1.5)
    z, zh = np.array([0.2, -1.0]), np.array([1.0, 0.5])
    d2 = float(((z - zh) ** 2).sum())
    expected = 2.0 - 2.0 * math.exp(-d2 / 1.5**2)
    assert kernel_displacement(k, z, zh) == pytest.approx(expected, abs=1e-14)


def test_kappa_sq():
    assert KernelSpec("gaussian", bandwidth=1.0).kappa_sq == 1.0
    assert KernelSpec("laplacian", bandwidth=1.0).kappa_sq == 1.0
    assert KernelSpec("linear").kappa_sq == math.inf


# ------------------------------------------------------------------ contracts

def test_kernel_spec_contracts():
    with pytest.raises(ContractError):
        KernelSpec("cubic")
    with pytest.raises(ContractError):
        KernelSpec("gaussian")
    with pytest.raises(ContractError):
        KernelSpec("gaussian", bandwidth=0.0)
    with pytest.raises(ContractError):
        KernelSpec("polynomial")
    with pytest.raises(ContractError):
        KernelSpec("polynomial", degree=2, offset=-1.0)


def test_input_contracts():
    k = KernelSpec("gaussian", bandwidth=1.0)
    with pytest.raises(ContractError):
        eval_kernel(k, [0.0, 1.0], [0.0])
    with pytest.raises(ContractError):
        eval_kernel(k, [np.nan], [0.0])
    with pytest.raises(ContractError):
        gram(k, np.empty((0, 2)))
    with pytest.raises(ContractError):
        median_bandwidth(np.array([[1.0]]))
    with pytest.raises(DegenerateInputError):
        median_bandwidth(np.ones((4, 2)))
    with pytest.raises(ContractError):
        cross_gram(k, np.ones((2, 3)), np.ones((2, 2)))
    with pytest.raises(ContractError):
        GramMatrix(np.ones((2, 3)), normalized=False)


def test_kernel_spec_json_roundtrip():
    for k in (
        KernelSpec("gaussian", bandwidth=1.5),
        KernelSpec("laplacian", bandwidth=0.3),
        KernelSpec("linear"),
        KernelSpec("polynomial", degree=3, offset=0.5),
    ):
        assert KernelSpec.from_json(k.to_json()) == k


def test_gram_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    G = gram(KernelSpec("gaussian", bandwidth=1.0), rng.normal(size=(5, 2)))
    path = tmp_path / "gram.csv"
    G.to_csv(path)
    back = np.loadtxt(path, delimiter=",")
    assert np.allclose(back, G.values)


def test_normalized_flag_and_scaling():
    pts = np.random.default_rng(1).normal(size=(7, 2))
    k = KernelSpec("gaussian", bandwidth=1.0)
    raw = gram(k, pts, normalize=False)
    norm = gram(k, pts, normalize=True)
    assert not raw.normalized and norm.normalized
    assert np.allclose(raw.values / 7, norm.values)


def test_one_dimensional_points_promoted():
    vals = gram(KernelSpec("linear"), np.array([1.0, 2.0, 3.0])).values
    assert vals.shape == (3, 3)
    assert vals[1, 2] == pytest.approx(6.0)


# ----------------------------------------------------------------- invariants

def test_invariant_gram_symmetry_exact():
    rng = np.random.default_rng(101)
    for _ in range(N_CASES):
        pts = rng.normal(scale=rng.uniform(0.1, 5.0), size=(int(rng.integers(2, 40)), int(rng.integers(1, 6))))
        vals = gram(random_kernel(rng), pts).values
        assert np.array_equal(vals, vals.T)


def test_invariant_gram_numerically_psd():
    rng = np.random.default_rng(102)
    for _ in range(N_CASES):
        pts = rng.normal(size=(int(rng.integers(2, 60)), int(rng.integers(1, 6))))
        w = np.linalg.eigvalsh(gram(random_kernel(rng), pts).values)
        assert w.min() >= -1e-10 * max(w.max(), 0.0) - 1e-12


def test_invariant_radial_gram_bounded():
    rng = np.random.default_rng(103)
    for _ in range(N_CASES):
        pts = rng.normal(size=(int(rng.integers(2, 40)), int(rng.integers(1, 5))))
        fam = ("gaussian", "laplacian")[rng.integers(2)]
        vals = gram(KernelSpec(fam, bandwidth=float(rng.uniform(0.2, 3.0))), pts).values
        assert np.all(vals > 0.0) and np.all(vals <= 1.0)
        assert np.array_equal(np.diag(vals), np.ones(len(pts)))


def test_invariant_displacement_nonnegative_and_matches_gram_form():
    rng = np.random.default_rng(104)
    for _ in range(N_CASES):
        k = random_kernel(rng)
        dim = int(rng.integers(1, 5))
        z, zh = rng.normal(size=dim), rng.normal(size=dim)
        disp = kernel_displacement(k, z, zh)
        assert disp >= 0.0
        G = gram(k, np.vstack([z, zh])).values
        assert disp == pytest.approx(max(G[0, 0] - 2 * G[0, 1] + G[1, 1], 0.0), abs=1e-12)


def test_invariant_orthogonal_invariance():
    rng = np.random.default_rng(105)
    for _ in range(N_CASES):
        dim = int(rng.integers(1, 6))
        Q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        z, zp = rng.uniform(-2, 2, size=dim), rng.uniform(-2, 2, size=dim)
        k = random_kernel(rng)
        assert eval_kernel(k, Q @ z, Q @ zp) == pytest.approx(eval_kernel(k, z, zp), abs=1e-12)
