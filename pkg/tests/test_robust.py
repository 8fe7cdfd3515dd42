import math

import numpy as np
import pytest

from spectre.errors import IllConditionedError, InsufficientDataError, ParameterError
from spectre.linalg import dense_T
from spectre.robust import (
    FilterConfig,
    cov_filter_step,
    find_max_poly,
    mean_filter_step,
    pair_differences,
    robust_cov,
    robust_gaussian,
    robust_mean,
)
from spectre.robust import _robust_cov


def rel_err(S):
    return np.linalg.norm(np.eye(S.shape[0]) - S)


def test_mean_point_mass():
    mu, it = robust_mean(np.zeros((500, 3)), 0.05)
    np.testing.assert_array_equal(mu, 0.0)
    assert it == 1


def test_mean_planted_outliers():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.standard_normal((1000, 2)), np.full((50, 2), 10.0)])
    mu, _ = robust_mean(X, 0.05)
    assert np.linalg.norm(mu) < np.linalg.norm(X.mean(axis=0))
    assert np.linalg.norm(mu) <= 0.2


def test_mean_step_certifies_clean():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((2000, 2))
    out = mean_filter_step(X, 0.05)
    assert out.is_estimate
    lam = np.abs(np.linalg.eigvalsh(np.cov(X.T, bias=True) - np.eye(2))).max()
    assert out.statistic == pytest.approx(lam, rel=1e-6)


def test_mean_step_removes_far_point():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((500, 2))
    X[17] = [100.0, 0.0]
    out = mean_filter_step(X, 0.05)
    assert not out.is_estimate
    assert 17 not in out.survivors
    assert out.survivors.size < 500


def test_cov_clean_matches_sample():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((3000, 2)) * [2.0, 1.0]
    S, _ = robust_cov(X, 0.02)
    W = np.diag([0.5, 1.0])
    naive = X.T @ X / 3000
    assert rel_err(W @ S @ W) <= 3 * rel_err(W @ naive @ W)


def test_cov_variance_spike():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((2000, 4))
    spike = np.zeros((100, 4))
    spike[:, 0] = 10.0 * np.where(np.arange(100) % 2, 1.0, -1.0)
    X = np.vstack([X, spike])
    S, _ = robust_cov(X, 0.05)
    assert 0.7 <= S[0, 0] <= 1.5
    assert (X.T @ X / X.shape[0])[0, 0] > 3


def test_cov_step_clean_certifies_early():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((3000, 3))
    _, it = robust_cov(X, 0.05)
    assert it <= 2


def test_cov_hard_threshold():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((1000, 3))
    X[5] = math.sqrt(1e4 * 3) * np.array([1.0, 0.0, 0.0])
    out = cov_filter_step(X, 0.05)
    assert not out.is_estimate and 5 not in out.survivors


def test_cov_affine_scaling():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((2000, 3))
    X[:60, 1] = 8.0
    S1, _ = robust_cov(X, 0.05)
    S2, _ = robust_cov(3.0 * X, 0.05)
    np.testing.assert_allclose(S2, 9.0 * S1, rtol=1e-6)


def test_max_poly_normalized_and_near_two():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((5000, 2))
    Sigma = X.T @ X / 5000
    poly = find_max_poly(X, Sigma)
    assert np.linalg.norm(poly.M) == pytest.approx(1.0, abs=1e-8)
    dense_top = np.linalg.eigvalsh(dense_T((X @ poly.whitener).T))[-1]
    assert poly.lambda_star == pytest.approx(dense_top, rel=1e-6)
    assert abs(poly.lambda_star - 2.0) <= 0.2


def test_max_poly_zero_mean_large_n():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((100_000, 3))
    poly = find_max_poly(X, np.eye(3))
    assert abs(poly.evaluate(X).mean()) <= 0.05


def test_max_poly_spike_concentrates():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((2000, 3))
    X[:100] = 0.0
    X[:50, 0], X[50:100, 0] = 6.0, -6.0
    Sigma = X.T @ X / X.shape[0]
    poly = find_max_poly(X, Sigma)
    i, j = np.unravel_index(np.argmax(np.abs(poly.M)), poly.M.shape)
    assert (i, j) == (0, 0)


def test_pair_differences_odd():
    X = np.arange(10.0).reshape(5, 2)
    P = pair_differences(X)
    np.testing.assert_allclose(P, (X[:2] - X[2:4]) / math.sqrt(2))


def test_gaussian_clean():
    rng = np.random.default_rng(11)
    mu0 = np.array([3.0, -1.0, 2.0])
    X = mu0 + rng.standard_normal((4000, 3))
    est = robust_gaussian(X, 0.05)
    assert np.linalg.norm(est.mean - mu0) <= 3 * math.sqrt(3 / 4000)
    naive = np.cov(X.T, bias=True)
    assert rel_err(est.cov) <= 3 * rel_err(naive)
    assert est.iterations_mean >= 1 and est.iterations_cov >= 1
    np.testing.assert_array_equal(est.cov, est.cov.T)


def test_gaussian_identical_rows():
    with pytest.raises(IllConditionedError):
        robust_gaussian(np.ones((100, 2)), 0.05)


def test_gaussian_too_few_rows():
    with pytest.raises(InsufficientDataError):
        robust_gaussian(np.random.default_rng(0).standard_normal((5, 3)), 0.05)


def test_gaussian_eps_zero_is_sample_stats():
    X = np.random.default_rng(12).standard_normal((50, 2))
    est = robust_gaussian(X, 0.0)
    np.testing.assert_allclose(est.mean, X.mean(axis=0))
    np.testing.assert_allclose(est.cov, np.cov(X.T, bias=True))


@pytest.mark.parametrize("eps", [-0.1, 0.33, 0.5])
def test_eps_range(eps):
    with pytest.raises(ParameterError):
        robust_cov(np.ones((10, 2)), eps)


@pytest.mark.parametrize("seed", range(5))
def test_planted_outlier_suite(seed):
    # displacement 10 sigma, eps 0.1: keep >= 95% clean, beat the naive error
    rng = np.random.default_rng(100 + seed)
    n, k, eps = 4000, 6, 0.1
    nb = int(eps * n)
    X = rng.standard_normal((n, k))
    u = rng.standard_normal(k)
    u /= np.linalg.norm(u)
    X[:nb] = np.outer(np.where(np.arange(nb) % 2, 1.0, -1.0), u) * 10.0
    S, _, kept = _robust_cov(X, eps, FilterConfig())
    assert rel_err(S) < rel_err(X.T @ X / n)
    assert np.sum(kept >= nb) >= 0.95 * (n - nb)


def test_frozen_trace():
    # snapshot of a spiked run; naive variance on axis 2 is 3.14
    rng = np.random.default_rng(13)
    X = rng.standard_normal((1500, 3))
    X[:40, 2] = 9.0
    S, it = robust_cov(X, 0.05, FilterConfig())
    assert it == FROZEN_ITER
    np.testing.assert_allclose(np.diag(S), FROZEN_DIAG, rtol=1e-8)
    assert abs(S[2, 2] - 1.0) < 0.05


FROZEN_ITER = 2
FROZEN_DIAG = [1.00937508, 1.02503454, 1.0071585]
