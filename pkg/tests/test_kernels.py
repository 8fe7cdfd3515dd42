"""The numba and numpy kernels must agree, and the numpy ones match hand values."""

import math

import numpy as np
import pytest

from spectre._kernels import numba_kernels, numpy_kernels

needs_numba = pytest.mark.skipif(numba_kernels is None, reason="numba kernels unavailable")


def test_tail_pick_hand_case():
    # values above c'=3: 10, 5 (fractions 1/10, 2/10)
    a = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 5.0, 10.0])
    eps = 0.1
    # bound(t) = 3 eps / (t^2 ln^2 t); frac/bound is larger at t=10
    b10 = 3 * eps / (100 * math.log(10) ** 2)
    b5 = 3 * eps / (25 * math.log(5) ** 2)
    assert 0.1 / b10 > 0.2 / b5
    assert numpy_kernels.cov_tail_pick(a, eps, 3.0) == 10.0


def test_tail_pick_none_above_threshold():
    assert math.isnan(numpy_kernels.cov_tail_pick(np.array([0.5, 1.0, 2.9]), 0.1, 3.0))


def test_mean_tail_pick_no_violation():
    a = np.array([0.1, 0.2])
    assert math.isnan(numpy_kernels.mean_tail_pick(a, 0.5, 0.1, 10.0, 1.0))


def test_row_quadforms_hand():
    X = np.array([[1.0, 2.0], [0.0, 1.0]])
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(numpy_kernels.row_quadforms(X, A), [2 + 4 + 12, 3])


def test_lloyd_two_obvious_clusters():
    P = np.array([[0.0], [0.1], [10.0], [10.2]])
    assign, cent, obj = numpy_kernels.lloyd_2means(P, P[0], P[3], 100)
    np.testing.assert_array_equal(assign, [0, 0, 1, 1])
    np.testing.assert_allclose(cent.ravel(), [0.05, 10.1])
    assert np.all(np.diff(obj) <= 1e-12)


@needs_numba
@pytest.mark.parametrize("seed", range(5))
def test_agreement(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((300, 7))
    A = rng.standard_normal((7, 7))
    np.testing.assert_allclose(numba_kernels.row_quadforms(X, A), numpy_kernels.row_quadforms(X, A), rtol=1e-12, atol=1e-12)
    V = rng.standard_normal((7, 7))
    np.testing.assert_allclose(numba_kernels.kr_apply(X, V), numpy_kernels.kr_apply(X, V), rtol=1e-10, atol=1e-10)
    a = np.abs(rng.standard_normal(500)) * 4
    a[:3] = 9.0  # ties
    for eps in (0.01, 0.05, 0.2):
        x, y = numba_kernels.cov_tail_pick(a, eps, 3.0), numpy_kernels.cov_tail_pick(a, eps, 3.0)
        assert (math.isnan(x) and math.isnan(y)) or x == y
        x, y = numba_kernels.mean_tail_pick(a, 0.3, eps, 5.0, 1.0), numpy_kernels.mean_tail_pick(a, 0.3, eps, 5.0, 1.0)
        assert (math.isnan(x) and math.isnan(y)) or x == y
    P = np.vstack([rng.standard_normal((80, 3)), rng.standard_normal((40, 3)) + 3])
    r1 = numba_kernels.lloyd_2means(P, P[0].copy(), P[-1].copy(), 100)
    r2 = numpy_kernels.lloyd_2means(P, P[0].copy(), P[-1].copy(), 100)
    np.testing.assert_array_equal(r1[0], r2[0])
    np.testing.assert_allclose(r1[1], r2[1], rtol=1e-12)
