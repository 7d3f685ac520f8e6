import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import lsq_linear
from sklearn.base import clone

from bcred.blocks import contiguous_partition, extract_block, tile_partition
from bcred.denoisers import (Expanding, GradientStep, Identity, LinearSmoother,
                             SoftThreshold, TV1DProx, TV2DProx, blockwise_denoise,
                             check_block_nonexpansive, denoise, red_objective_linear,
                             red_operator_H, soft_threshold, tv1d_prox, tv1d_value,
                             tv2d_prox)
from bcred.exceptions import DimensionMismatchError, IncompatibleDenoiserError
from bcred.moreau import L1, moreau_gradient


def _tv1d_dual_oracle(y, w):
    """Prox of ``w * TV`` via its box-constrained dual, solved by BVLS."""
    n = y.size
    if n == 1 or w == 0.0:
        return y.copy()
    Dt = np.zeros((n, n - 1))
    Dt[np.arange(n - 1), np.arange(n - 1)] = -1.0
    Dt[np.arange(1, n), np.arange(n - 1)] = 1.0
    z = lsq_linear(Dt, y, bounds=(-w, w), method="bvls", tol=1e-14).x
    return y - Dt @ z


def _prox_objective(z, y, w):
    return 0.5 * float(np.sum((z - y) ** 2)) + w * tv1d_value(z)


def test_soft_threshold_examples():
    D = SoftThreshold(0.5)
    assert np.array_equal(D.denoise(np.array([2.0, 0.0, -0.2, -3.0])), [1.5, 0.0, 0.0, -2.5])


def test_tv1d_examples():
    assert np.array_equal(tv1d_prox(np.full(7, 3.5), 2.0), np.full(7, 3.5))
    assert np.allclose(tv1d_prox(np.array([0.0, 1.0]), 0.25), [0.25, 0.75], atol=1e-15)
    # large weight collapses to the mean
    y = np.array([1.0, 5.0, 2.0])
    assert np.allclose(tv1d_prox(y, 100.0), np.full(3, y.mean()))


@settings(max_examples=80, deadline=None)
@given(n=st.integers(1, 64), w=st.floats(0.0, 3.0), seed=st.integers(0, 10 ** 6))
def test_tv1d_matches_qp_oracle(n, w, seed):
    y = np.random.default_rng(seed).standard_normal(n) * 2
    z = tv1d_prox(y, w)
    ref = _tv1d_dual_oracle(y, w)
    assert _prox_objective(z, y, w) <= _prox_objective(ref, y, w) + 1e-9
    assert np.allclose(z, ref, atol=1e-7)


def test_tv2d_constant_image_unchanged():
    img = np.full((6, 5), 0.7)
    assert np.allclose(tv2d_prox(img, 0.3), img, atol=1e-8)


def test_tv2d_dual_objective_nonincreasing():
    img = np.random.default_rng(1).standard_normal((8, 9))
    _, hist = tv2d_prox(img, 0.4, n_iter=200, tol=0.0, return_history=True)
    assert np.all(np.diff(hist) <= 1e-12)


def test_tv2d_reduces_total_variation():
    from bcred.denoisers import tv2d_value
    img = np.random.default_rng(2).standard_normal((8, 8))
    out = TV2DProx(0.5, (8, 8)).denoise(img.ravel()).reshape(8, 8)
    assert tv2d_value(out) < tv2d_value(img)


def test_red_operator_examples():
    x = np.random.default_rng(3).standard_normal(10)
    assert np.array_equal(red_operator_H(Identity(), x, 2.0), np.zeros(10))
    assert np.allclose(red_operator_H(GradientStep(0.3, 1.5), x, 1.5), 0.3 * x, rtol=1e-15)
    lam, tau = 0.6, 2.5
    H = red_operator_H(SoftThreshold(lam / tau), x, tau)
    assert np.allclose(H, tau * moreau_gradient(L1(lam), 1.0 / tau, x), atol=1e-12)


def test_blockwise_pad_zero_and_full():
    P = tile_partition(8, 10, 3, 4)
    x = np.random.default_rng(4).standard_normal(80)
    D = TV2DProx(0.3, (8, 10))
    for i in range(P.n_blocks):
        r0, r1, c0, c1 = P.tiles[i]
        tile = x.reshape(8, 10)[r0:r1, c0:c1]
        bare = D.denoise(tile.ravel(), shape=tile.shape)
        assert np.array_equal(blockwise_denoise(D, x, P, i, 0), bare)
        full = extract_block(D.denoise(x), P, i)
        assert np.array_equal(blockwise_denoise(D, x, P, i, 10), full)


def test_blockwise_linear_smoother_interior_tile_exact():
    k = np.outer([0.25, 0.5, 0.25], [0.25, 0.5, 0.25])
    D = LinearSmoother(k, shape=(9, 9))
    P = tile_partition(9, 9, 3, 3)
    x = np.random.default_rng(5).standard_normal(81)
    interior = 4
    assert np.allclose(blockwise_denoise(D, x, P, interior, 1),
                       extract_block(D.denoise(x), P, interior), rtol=0, atol=1e-15)


def test_blockwise_needs_tiles():
    with pytest.raises(IncompatibleDenoiserError):
        blockwise_denoise(Identity(), np.zeros(6), contiguous_partition(6, 2), 0, 1)


def test_certificates():
    P = contiguous_partition(40, 5)
    rep = check_block_nonexpansive(Identity(), P, trials=100)
    assert rep.max_ratio == 1.0 and rep.passed
    rep = check_block_nonexpansive(Expanding(2.0), P, trials=100)
    assert rep.max_ratio == 2.0 and not rep.passed
    for D in (SoftThreshold(0.3), TV1DProx(0.4), GradientStep(1.9, 1.0),
              LinearSmoother((0.2, 0.6, 0.2))):
        assert check_block_nonexpansive(D, P, trials=1000, seed=1).passed


def test_certificate_padded_linear_smoother():
    P = tile_partition(12, 12, 4, 4)
    rep = check_block_nonexpansive(LinearSmoother(shape=(12, 12)), P, trials=300, pad=2,
                                   shape=(12, 12))
    assert rep.passed


def test_gradient_step_guard():
    with pytest.raises(ValueError):
        GradientStep(lam=2.5, tau=1.0).denoise(np.ones(3))
    GradientStep(lam=2.0, tau=1.0).denoise(np.ones(3))


def test_parameter_validation():
    with pytest.raises(ValueError):
        SoftThreshold(-1.0).denoise(np.ones(2))
    with pytest.raises(ValueError):
        LinearSmoother((0.3, 0.3, 0.3)).denoise(np.ones(4))
    with pytest.raises(ValueError):
        LinearSmoother((0.5, 0.3, 0.2)).denoise(np.ones(4))
    with pytest.raises(DimensionMismatchError):
        TV2DProx(0.1, (3, 3)).denoise(np.ones(8))


def test_red_objective_linear_examples():
    x = np.random.default_rng(6).standard_normal(12)
    assert red_objective_linear(LinearSmoother((0.0, 1.0, 0.0)), x, 1.7) == 0.0
    c = np.full(12, 2.5)
    assert abs(red_objective_linear(LinearSmoother((1 / 3, 1 / 3, 1 / 3)), c, 1.0)) <= 1e-13
    with pytest.raises(IncompatibleDenoiserError):
        red_objective_linear(SoftThreshold(0.1), x, 1.0)


def test_red_objective_gradient_matches_H():
    D = LinearSmoother((0.25, 0.5, 0.25))
    rng = np.random.default_rng(7)
    tau, eps = 1.3, 1e-6
    for _ in range(10):
        x = rng.standard_normal(9)
        fd = np.array([(red_objective_linear(D, x + eps * e, tau)
                        - red_objective_linear(D, x - eps * e, tau)) / (2 * eps)
                       for e in np.eye(9)])
        assert np.allclose(fd, red_operator_H(D, x, tau), atol=1e-5)


def test_linear_smoother_matrix_symmetric():
    W = LinearSmoother((0.25, 0.5, 0.25), shape=(4, 5)).matrix(20)
    assert np.allclose(W, W.T, atol=1e-15)
    assert np.allclose(W.sum(axis=1), 1.0)
    assert np.linalg.norm(W, 2) <= 1 + 1e-12


def test_sklearn_transformer_api():
    D = SoftThreshold(threshold=0.5)
    assert D.get_params() == {"threshold": 0.5}
    X = np.array([[2.0, -0.1], [0.0, -3.0]])
    assert np.array_equal(D.fit(X).transform(X), [[1.5, 0.0], [0.0, -2.5]])
    D2 = clone(D).set_params(threshold=1.0)
    assert np.array_equal(D2.fit_transform(X), [[1.0, 0.0], [0.0, -2.0]])
    assert np.array_equal(denoise(D, np.array([1.0])), [0.5])
    assert np.array_equal(soft_threshold(np.array([-1.0]), 0.25), [-0.75])
