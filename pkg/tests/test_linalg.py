import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectre.errors import ConvergenceError, DataError, IllConditionedError, ParameterError
from spectre.linalg import (
    ImplicitTMatrix,
    apply_implicit_T,
    as_rep_matrix,
    dense_T,
    fix_signs,
    inv_sqrt,
    khatri_rao_columns,
    sqrtm_psd,
    top_eig_sym,
    top_k_svd,
    whiten,
)


def test_as_rep_matrix_rejects_nan():
    with pytest.raises(DataError):
        as_rep_matrix([[1.0, np.nan]])


def test_as_rep_matrix_promotes_vector():
    assert as_rep_matrix([1.0, 2.0]).shape == (2, 1)


def test_fix_signs_largest_entry_positive():
    V = np.array([[0.6, 0.1], [-0.8, -0.2]])
    out = fix_signs(V)
    np.testing.assert_array_equal(out, [[-0.6, -0.1], [0.8, 0.2]])


def test_top_k_svd_diagonal_oracle():
    # singular values of diag(5, 3, 1) padded with zero rows
    M = np.zeros((6, 3))
    M[0, 0], M[1, 1], M[2, 2] = 5.0, 3.0, 1.0
    U, s = top_k_svd(M, 2)
    np.testing.assert_allclose(s, [5.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(U, [[1, 0], [0, 1], [0, 0]], atol=1e-12)


def test_top_k_svd_wide_matches_numpy():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((20, 50))
    U, s = top_k_svd(M, 4)
    _, s_ref, Vt = np.linalg.svd(M)
    np.testing.assert_allclose(s, s_ref[:4], rtol=1e-10)
    np.testing.assert_allclose(np.abs(U.T @ Vt[:4].T), np.eye(4), atol=1e-8)


def test_top_k_svd_randomized_path():
    rng = np.random.default_rng(4)
    # two power passes resolve a well-separated top subspace
    spec = np.r_[[1e4, 5e3, 2e3], np.ones(597)]
    M = rng.standard_normal((700, 600)) * np.sqrt(spec)
    U, s = top_k_svd(M, 3, seed=1)
    _, s_ref, Vt = np.linalg.svd(M, full_matrices=False)
    np.testing.assert_allclose(s, s_ref[:3], rtol=1e-8)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-10)
    assert np.linalg.norm(np.abs(U.T @ Vt[:3].T) - np.eye(3)) < 1e-6


def test_top_k_svd_small_examples():
    U, s = top_k_svd(np.array([[2.0, 0.0], [0.0, 1.0]]), 1)
    np.testing.assert_allclose(s, [2.0])
    np.testing.assert_allclose(np.abs(U), [[1.0], [0.0]], atol=1e-12)
    U, s = top_k_svd(np.eye(3), 3)
    np.testing.assert_allclose(s, [1, 1, 1], atol=1e-12)
    np.testing.assert_allclose(U.T @ U, np.eye(3), atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_top_k_svd_residual_matches_tail(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((50, 8))
    U, s = top_k_svd(M, 4)
    s_ref = np.linalg.svd(M, compute_uv=False)
    np.testing.assert_allclose(s, s_ref[:4], rtol=1e-8)
    np.testing.assert_allclose(U.T @ U, np.eye(4), atol=1e-10)
    resid = np.linalg.norm(M - M @ U @ U.T)
    assert resid == pytest.approx(np.sqrt(np.sum(s_ref[4:] ** 2)), rel=1e-8)


def test_top_k_svd_bad_k():
    with pytest.raises(ParameterError):
        top_k_svd(np.ones((3, 2)), 3)


def test_top_eig_sym_dense_oracle():
    A = np.diag([1.0, 4.0, -7.0, 2.0])
    la = top_eig_sym(A)
    assert la.value == pytest.approx(4.0, abs=1e-10)
    np.testing.assert_allclose(la.vector, [0, 1, 0, 0], atol=1e-8)
    lm = top_eig_sym(A, which="LM")
    assert lm.value == pytest.approx(-7.0, abs=1e-10)


def test_top_eig_sym_convergence_error_carries_best():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((200, 200))
    A = A + A.T
    with pytest.raises(ConvergenceError) as info:
        top_eig_sym(A, tol=1e-14, max_iter=3, basis=2)
    assert info.value.best is not None


def test_inv_sqrt_and_sqrtm():
    S = np.array([[4.0, 0.0], [0.0, 9.0]])
    np.testing.assert_allclose(inv_sqrt(S), np.diag([0.5, 1 / 3]), atol=1e-15)
    np.testing.assert_allclose(sqrtm_psd(S), np.diag([2.0, 3.0]), atol=1e-15)


def test_inv_sqrt_singular():
    with pytest.raises(IllConditionedError):
        inv_sqrt(np.diag([1.0, 0.0]))


def test_whiten_shape_mismatch():
    with pytest.raises(ParameterError):
        whiten(np.ones((3, 2)), np.zeros(3), np.eye(2))


def test_khatri_rao_column():
    Y = np.array([[1.0, 2.0], [3.0, 4.0]])
    Z = khatri_rao_columns(Y)
    # vec(y y') in column-major order
    np.testing.assert_array_equal(Z[:, 0], [1, 3, 3, 9])
    np.testing.assert_array_equal(Z[:, 1], [4, 8, 8, 16])


def test_dense_T_frozen():
    Y = np.array([[1.0, 0.0], [0.0, 2.0]])
    # (1/2)(z1 z1' + z2 z2') - vec(I) vec(I)'
    expect = np.array(
        [[-0.5, 0, 0, -1], [0, 0, 0, 0], [0, 0, 0, 0], [-1, 0, 0, 7]],
        dtype=float,
    )
    np.testing.assert_array_equal(dense_T(Y), expect)


@settings(max_examples=40, deadline=None)
@given(k=st.integers(1, 6), m=st.integers(1, 30), seed=st.integers(0, 10_000))
def test_implicit_matches_dense(k, m, seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((k, m))
    v = rng.standard_normal(k * k)
    fast = apply_implicit_T(ImplicitTMatrix(Y), v)
    slow = dense_T(Y) @ v
    assert np.linalg.norm(fast - slow) <= 1e-9 * max(np.linalg.norm(slow), 1.0)


def test_implicit_wrong_length():
    with pytest.raises(ParameterError):
        apply_implicit_T(ImplicitTMatrix(np.ones((2, 3))), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 6), seed=st.integers(0, 10_000))
def test_whiten_with_sample_stats_is_isotropic(k, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((3 * k + 5, k)) @ rng.standard_normal((k, k)) + 4.0
    mu = X.mean(axis=0)
    C = X - mu
    T = whiten(X, mu, C.T @ C / X.shape[0])
    np.testing.assert_allclose(T.T @ T / X.shape[0], np.eye(k), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_sym_exp_positive_definite(k, seed):
    from spectre.linalg import sym_func

    # unit-scale entries keep cond(exp(A)) far below 1/machine-eps, where
    # positive definiteness is still observable in float64
    A = np.random.default_rng(seed).standard_normal((k, k))
    E = sym_func(A + A.T, np.exp)
    assert np.all(np.linalg.eigvalsh(E) > 0)
