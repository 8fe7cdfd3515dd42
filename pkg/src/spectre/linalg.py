"""Numerical kernels shared by the estimators.

Everything here is a pure function of its inputs plus an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._kernels import kernels
from .errors import ConvergenceError, DataError, IllConditionedError, NumericError, ParameterError

GRAM_SVD_LIMIT = 512
PD_RELATIVE_FLOOR = 1e-10


def as_rep_matrix(X, name: str = "input") -> np.ndarray:
    """Validate a 2-D finite float array and return it as float64."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DataError(f"{name} must have at least one row and one column, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} contains non-finite entries")
    return A


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties between equal magnitudes go to the lowest index (``argmax`` order).
    """
    V = np.array(V, dtype=np.float64, copy=True)
    if V.ndim == 1:
        if V[np.argmax(np.abs(V))] < 0:
            V = -V
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


# ---------------------------------------------------------------------------
# truncated SVD
# ---------------------------------------------------------------------------


def top_k_svd(M, k: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` right singular subspace of a row-sample matrix.

    ``M`` is ``n x d`` with one sample per row, so the returned ``U`` is
    ``d x k`` and ``M @ U`` projects every sample onto the subspace.

    Parameters
    ----------
    M : array_like, shape (n, d)
        Centered data.
    k : int
        Number of directions, ``1 <= k <= min(n, d)``.
    seed : int
        Seed for the randomized path (used only when ``min(n, d) > 512``).

    Returns
    -------
    U : ndarray, shape (d, k)
        Orthonormal columns, sign-normalized.
    sigma : ndarray, shape (k,)
        Singular values in descending order.
    """
    M = as_rep_matrix(M, "M")
    n, d = M.shape
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= min(n, d)):
        raise ParameterError(f"k must be an integer in [1, {min(n, d)}], got {k!r}")
    k = int(k)
    if min(n, d) <= GRAM_SVD_LIMIT:
        U, sigma = _gram_svd(M, k)
    else:
        U, sigma = _randomized_svd(M, k, seed)
    return fix_signs(U), sigma


def _gram_svd(M, k):
    n, d = M.shape
    if d <= n:
        w, V = np.linalg.eigh(M.T @ M)
        order = np.argsort(w)[::-1][:k]
        U = V[:, order]
        sigma = np.sqrt(np.clip(w[order], 0.0, None))
        # one Rayleigh-Ritz pass on the thin projection recovers accuracy lost
        # by squaring the condition number
        B = M @ U
        Ub, s, Vbt = np.linalg.svd(B, full_matrices=False)
        U = U @ Vbt.T
        sigma = s
        return U, sigma
    w, W = np.linalg.eigh(M @ M.T)
    order = np.argsort(w)[::-1][:k]
    W = W[:, order]
    B = M.T @ W
    Q, _ = np.linalg.qr(B)
    Ub, s, Vbt = np.linalg.svd(M @ Q, full_matrices=False)
    return Q @ Vbt.T, s


def _randomized_svd(M, k, seed, oversample=10, power_iters=2):
    n, d = M.shape
    rng = np.random.default_rng(seed)
    p = min(k + oversample, min(n, d))
    Omega = rng.standard_normal((n, p))
    # range finder on M^T, whose column space is the right singular subspace
    Q, _ = np.linalg.qr(M.T @ Omega)
    for _ in range(power_iters):
        Q, _ = np.linalg.qr(M @ Q)
        Q, _ = np.linalg.qr(M.T @ Q)
    _, s, Vt = np.linalg.svd(M @ Q, full_matrices=False)
    return Q @ Vt.T[:, :k], s[:k]


# ---------------------------------------------------------------------------
# top eigenpair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigPair:
    value: float
    vector: np.ndarray


def _as_operator(A) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    if isinstance(A, ImplicitTMatrix):
        return A.matvec, A.k * A.k
    if hasattr(A, "matvec") and hasattr(A, "shape"):
        return A.matvec, int(A.shape[0])
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"operator must be square, got shape {A.shape}")
    return (lambda v: A @ v), A.shape[0]


def top_eig_sym(
    A,
    tol: float = 1e-8,
    max_iter: int = 1000,
    seed: int = 0,
    *,
    which: str = "LA",
    v0: np.ndarray | None = None,
    basis: int = 40,
) -> EigPair:
    """Extreme eigenpair of a symmetric operator by restarted Lanczos.

    ``A`` may be a dense symmetric matrix, an :class:`ImplicitTMatrix`, or any
    object with ``matvec`` and ``shape``.  ``which="LA"`` selects the largest
    algebraic eigenvalue, ``"LM"`` the largest magnitude.  The returned pair
    satisfies ``||A v - lam v|| <= tol * max(|lam|, 1)``; otherwise
    :class:`ConvergenceError` is raised after ``max_iter`` operator
    applications with the best iterate attached.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if which not in ("LA", "LM"):
        raise ParameterError(f"which must be 'LA' or 'LM', got {which!r}")
    matvec, n = _as_operator(A)
    rng = np.random.default_rng(seed)
    if v0 is None or not np.any(v0):
        v = rng.standard_normal(n)
    else:
        v = np.array(v0, dtype=np.float64).reshape(n)
    v /= np.linalg.norm(v)
    nb = max(1, min(n, basis))

    used = 0
    best = None
    best_res = np.inf
    while used < max_iter:
        Q = np.zeros((n, nb))
        alphas = np.zeros(nb)
        betas = np.zeros(max(nb - 1, 0))
        Q[:, 0] = v
        m = nb
        for j in range(nb):
            w = matvec(Q[:, j])
            used += 1
            a = float(Q[:, j] @ w)
            alphas[j] = a
            if j == nb - 1:
                break
            # full reorthogonalization, twice for stability
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
            w = w - Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
            b = float(np.linalg.norm(w))
            scale = max(abs(a), float(np.max(np.abs(alphas[: j + 1]))), 1e-300)
            if b <= 1e-12 * scale:
                if j + 1 >= n:
                    m = j + 1
                    break
                # invariant subspace: continue with a fresh orthogonal direction
                w = rng.standard_normal(n)
                w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
                w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
                w /= np.linalg.norm(w)
                betas[j] = 0.0
                Q[:, j + 1] = w
            else:
                betas[j] = b
                Q[:, j + 1] = w / b
            if used >= max_iter:
                m = j + 2
                # finish with the basis built so far
                w = matvec(Q[:, j + 1])
                used += 1
                alphas[j + 1] = float(Q[:, j + 1] @ w)
                break
        if m == 1:
            theta = np.array([alphas[0]])
            S = np.ones((1, 1))
        else:
            theta, S = eigh_tridiagonal(alphas[:m], betas[: m - 1])
        idx = int(np.argmax(theta)) if which == "LA" else int(np.argmax(np.abs(theta)))
        lam = float(theta[idx])
        x = Q[:, :m] @ S[:, idx]
        x /= np.linalg.norm(x)
        r = matvec(x) - lam * x
        used += 1
        res = float(np.linalg.norm(r))
        if res < best_res:
            best_res = res
            best = EigPair(lam, fix_signs(x))
        if res <= tol * max(abs(lam), 1.0):
            return EigPair(lam, fix_signs(x))
        v = x
    raise ConvergenceError(
        f"Lanczos did not reach residual {tol:g} within {max_iter} applications (best {best_res:.3g})",
        best=best,
    )


# ---------------------------------------------------------------------------
# symmetric matrix functions and whitening
# ---------------------------------------------------------------------------


def sym_eigh(A) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError("matrix contains non-finite entries")
    try:
        return np.linalg.eigh(symmetrize(A))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from exc


def sym_func(A, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply a scalar function to a symmetric matrix through its eigenvalues."""
    w, V = sym_eigh(A)
    return symmetrize((V * f(w)) @ V.T)


def pd_floor(Sigma) -> float:
    k = Sigma.shape[0]
    return PD_RELATIVE_FLOOR * max(float(np.trace(Sigma)) / k, 0.0)


def inv_sqrt(Sigma) -> np.ndarray:
    """Symmetric inverse square root; refuses matrices below the PD floor."""
    w, V = sym_eigh(Sigma)
    floor = pd_floor(Sigma)
    if w[0] <= floor or floor <= 0.0:
        raise IllConditionedError(
            f"matrix is not positive definite: min eigenvalue {w[0]:.3g} <= floor {floor:.3g}"
        )
    return symmetrize((V / np.sqrt(w)) @ V.T)


def sqrtm_psd(Sigma) -> np.ndarray:
    return sym_func(Sigma, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def whiten(X, mu, Sigma) -> np.ndarray:
    """Map every row ``x`` to ``Sigma^{-1/2} (x - mu)``."""
    X = as_rep_matrix(X, "X")
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    Sigma = np.asarray(Sigma, dtype=np.float64)
    k = X.shape[1]
    if mu.shape != (k,) or Sigma.shape != (k, k):
        raise ParameterError(f"dimension mismatch: X has {k} columns, mu {mu.shape}, Sigma {Sigma.shape}")
    return (X - mu) @ inv_sqrt(Sigma)


# ---------------------------------------------------------------------------
# implicit Khatri-Rao operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImplicitTMatrix:
    """``T = -vec(I) vec(I)' + (1/m) sum_i z_i z_i'`` with ``z_i = vec(y_i y_i')``.

    ``Y`` holds the whitened samples as columns (``k x m``).  Flattening is
    column-major.  The matrix is never formed; :meth:`matvec` costs
    ``O(m k^2)`` time and ``O(m k + k^2)`` memory.
    """

    Y: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=np.float64)
        if Y.ndim != 2 or Y.shape[1] < 1:
            raise ParameterError(f"Y must be k x m with m >= 1, got shape {Y.shape}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "_rows", np.ascontiguousarray(Y.T))

    @property
    def k(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.k * self.k, self.k * self.k)

    def matvec(self, v) -> np.ndarray:
        return apply_implicit_T(self, v)

    def dense(self) -> np.ndarray:
        """Materialize ``T``; only for testing and benchmarking."""
        return dense_T(self.Y)


def apply_implicit_T(T: ImplicitTMatrix, v) -> np.ndarray:
    k = T.k
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (k * k,):
        raise ParameterError(f"vector must have length {k * k}, got shape {v.shape}")
    V = v.reshape(k, k, order="F")
    out = kernels.kr_apply(T._rows, V)
    # the quadratic form only sees the symmetric part of V, so the data term
    # is symmetric; the identity term carries trace(V)
    out[np.diag_indices(k)] -= np.trace(V)
    return out.reshape(-1, order="F")


def khatri_rao_columns(Y) -> np.ndarray:
    """Columnwise Kronecker product ``Y (.) Y``; column ``i`` is ``vec(y_i y_i')``."""
    Y = np.asarray(Y, dtype=np.float64)
    k, m = Y.shape
    return (Y[:, None, :] * Y[None, :, :]).reshape(k * k, m, order="F")


def dense_T(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=np.float64)
    k, m = Y.shape
    Z = khatri_rao_columns(Y)
    Iflat = np.eye(k).reshape(-1, order="F")
    return Z @ Z.T / m - np.outer(Iflat, Iflat)
