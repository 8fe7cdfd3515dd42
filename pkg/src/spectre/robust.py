"""Filter-based robust estimation of a Gaussian's mean and covariance.

Each filter step either certifies the current sample statistics or returns a
strictly smaller survivor set; the outer loops repeat until certification.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels
from .errors import IllConditionedError, InsufficientDataError, ParameterError
from .linalg import (
    ImplicitTMatrix,
    as_rep_matrix,
    fix_signs,
    inv_sqrt,
    pd_floor,
    sqrtm_psd,
    sym_eigh,
    symmetrize,
    top_eig_sym,
)

logger = logging.getLogger(__name__)

MAX_EPS = 0.33


@dataclass(frozen=True)
class FilterConfig:
    """Constants and solver settings for the filters.

    ``c_poly`` multiplies the ``eps log^2(1/eps)`` slack of the covariance
    certificate; the certificate is additionally scaled by the random-matrix
    edge ``(1 + sqrt(D/m))^2`` (``D = k(k+1)/2``) when
    ``finite_sample_correction`` is set.  ``removal_cap`` bounds the total
    number of rows a loop may discard to ``removal_cap * eps * n``
    (``None`` disables the cap).
    """

    c_mean: float = 10.0
    c_poly: float = 0.3
    c_quad: float = 3.0
    c_prime: float = 3.0
    nu: float = 1.0
    tau: float = 0.1
    finite_sample_correction: bool = True
    removal_cap: float | None = 4.0
    eig_tol: float = 1e-8
    eig_max_iter: int = 2000
    seed: int = 0

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class FilterOutcome:
    kind: str  # "estimate" or "reduced"
    estimate: np.ndarray | None = None
    survivors: np.ndarray | None = None
    statistic: float = math.nan
    threshold: float = math.nan
    eigvec: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_estimate(self) -> bool:
        return self.kind == "estimate"


@dataclass(frozen=True)
class MaxPoly:
    """Even degree-2 polynomial ``p(x) = (y' M y - tr M) / sqrt(2)``, ``y = W x``."""

    M: np.ndarray
    lambda_star: float
    whitener: np.ndarray
    eigvec: np.ndarray = field(repr=False)

    def evaluate(self, X) -> np.ndarray:
        Y = np.asarray(X, dtype=np.float64) @ self.whitener
        return (kernels.row_quadforms(Y, self.M) - np.trace(self.M)) / math.sqrt(2.0)


@dataclass(frozen=True)
class RobustEstimate:
    mean: np.ndarray
    cov: np.ndarray
    iterations_mean: int
    iterations_cov: int
    removed_by_filter: int
    removed_cov: int = 0
    removed_mean: int = 0


def _check_eps(eps: float, allow_zero: bool = False) -> float:
    eps = float(eps)
    lo_ok = eps >= 0 if allow_zero else eps > 0
    if not (lo_ok and eps < MAX_EPS):
        raise ParameterError(f"eps must lie in {'[0' if allow_zero else '(0'}, {MAX_EPS}), got {eps}")
    return eps


def _drop_one(scores: np.ndarray) -> np.ndarray:
    keep = np.ones(scores.shape[0], dtype=bool)
    keep[int(np.argmax(scores))] = False
    return np.flatnonzero(keep)


# ---------------------------------------------------------------------------
# mean
# ---------------------------------------------------------------------------


def mean_filter_step(S, eps: float, cfg: FilterConfig = FilterConfig(), v0=None) -> FilterOutcome:
    """One pass of the unknown-mean filter on (approximately) whitened rows.

    Certifies the sample mean when the largest-magnitude eigenvalue of
    ``Cov(S) - I`` is at most ``c_mean * eps * log(1/eps)``; otherwise
    projects on the offending eigenvector and removes the rows beyond the
    threshold whose empirical tail most exceeds the Gaussian bound.
    """
    S = as_rep_matrix(S, "S")
    eps = _check_eps(eps)
    m, d = S.shape
    mu = S.mean(axis=0)
    C = S - mu
    Sigma = symmetrize(C.T @ C / m)
    pair = top_eig_sym(Sigma - np.eye(d), tol=cfg.eig_tol, max_iter=cfg.eig_max_iter, seed=cfg.seed, which="LM", v0=v0)
    lam = abs(pair.value)
    thr = cfg.c_mean * eps * math.log(1.0 / eps)
    if lam <= thr:
        return FilterOutcome("estimate", estimate=mu, statistic=lam, threshold=thr, eigvec=pair.vector)
    delta = 3.0 * math.sqrt(eps * lam)
    a = np.abs(C @ pair.vector)
    log_term = math.log(d * math.log(d / (eps * cfg.tau)))
    cut = kernels.mean_tail_pick(a, delta, eps, log_term, cfg.nu)
    if math.isnan(cut):
        survivors = _drop_one(a)
    else:
        survivors = np.flatnonzero(a < cut)
    return FilterOutcome("reduced", survivors=survivors, statistic=lam, threshold=thr, eigvec=pair.vector)


def _filter_loop(step, finalize, S, eps, cfg, what):
    n, k = S.shape
    idx = np.arange(n)
    cap = None if cfg.removal_cap is None else int(math.floor(cfg.removal_cap * eps * n))
    v0 = None
    iterations = 0
    while True:
        iterations += 1
        out = step(S[idx], eps, cfg, v0=v0)
        if out.is_estimate:
            return out.estimate, iterations, idx
        v0 = out.eigvec
        idx = idx[out.survivors]
        if idx.shape[0] < k + 1:
            raise InsufficientDataError(
                f"robust {what}: only {idx.shape[0]} samples survive filtering in dimension {k}"
            )
        if cap is not None and n - idx.shape[0] >= cap:
            logger.debug("robust %s: removal cap %d reached after %d iterations", what, cap, iterations)
            return finalize(S[idx]), iterations, idx


def _robust_mean(S, eps, cfg):
    return _filter_loop(mean_filter_step, lambda X: X.mean(axis=0), S, eps, cfg, "mean")


def robust_mean(S, eps: float, cfg: FilterConfig = FilterConfig()) -> tuple[np.ndarray, int]:
    """Filter until the mean filter certifies; returns ``(mean, iterations)``."""
    S = as_rep_matrix(S, "S")
    if _check_eps(eps, allow_zero=True) == 0:
        return S.mean(axis=0), 1
    mu, iterations, _ = _robust_mean(S, eps, cfg)
    return mu, iterations


# ---------------------------------------------------------------------------
# covariance
# ---------------------------------------------------------------------------


def find_max_poly(S, Sigma_prime, cfg: FilterConfig = FilterConfig(), v0=None) -> MaxPoly:
    """Degree-2 polynomial with the largest empirical variance relative to ``N(0, Sigma')``."""
    S = as_rep_matrix(S, "S")
    W = inv_sqrt(Sigma_prime)
    Y = S @ W
    T = ImplicitTMatrix(Y.T)
    pair = top_eig_sym(T, tol=cfg.eig_tol, max_iter=cfg.eig_max_iter, seed=cfg.seed, which="LA", v0=v0)
    k = S.shape[1]
    M = symmetrize(pair.vector.reshape(k, k, order="F"))
    nrm = np.linalg.norm(M)
    if nrm > 0:
        M = M / nrm
    M = fix_signs(M.reshape(-1, order="F")).reshape(k, k, order="F")
    return MaxPoly(M=M, lambda_star=pair.value, whitener=W, eigvec=pair.vector)


def cov_certificate_threshold(eps: float, m: int, k: int, cfg: FilterConfig) -> float:
    thr = 1.0 + cfg.c_poly * eps * math.log(1.0 / eps) ** 2
    if cfg.finite_sample_correction:
        thr *= (1.0 + math.sqrt(k * (k + 1) / 2.0 / m)) ** 2
    return thr


def cov_filter_step(S, eps: float, cfg: FilterConfig = FilterConfig(), v0=None) -> FilterOutcome:
    """One pass of the unknown-covariance filter on zero-mean rows."""
    S = as_rep_matrix(S, "S")
    eps = _check_eps(eps)
    m, k = S.shape
    Sigma = symmetrize(S.T @ S / m)
    W = inv_sqrt(Sigma)
    quad = np.sum((S @ W) ** 2, axis=1)
    hard = cfg.c_quad * k * math.log(10.0 * m)
    if np.any(quad >= hard):
        return FilterOutcome("reduced", survivors=np.flatnonzero(quad < hard), statistic=float(quad.max()), threshold=hard, eigvec=v0)

    poly = find_max_poly(S, Sigma, cfg, v0=v0)
    p = poly.evaluate(S)
    # equals lambda_star / 2 because Sigma is the second moment of S itself
    q_emp = float(np.mean(p * p))
    thr = cov_certificate_threshold(eps, m, k, cfg)
    if q_emp <= thr:
        return FilterOutcome("estimate", estimate=Sigma, statistic=q_emp, threshold=thr, eigvec=poly.eigvec)
    mu = float(np.sort(p)[(m - 1) // 2])
    a = np.abs(p - mu)
    cut = kernels.cov_tail_pick(a, eps, cfg.c_prime)
    if math.isnan(cut):
        survivors = _drop_one(a)
    else:
        survivors = np.flatnonzero(a < cut)
    return FilterOutcome("reduced", survivors=survivors, statistic=q_emp, threshold=thr, eigvec=poly.eigvec)


def _robust_cov(S, eps, cfg):
    return _filter_loop(cov_filter_step, _second_moment, S, eps, cfg, "covariance")


def robust_cov(S, eps: float, cfg: FilterConfig = FilterConfig()) -> tuple[np.ndarray, int]:
    """Filter zero-mean rows until the covariance filter certifies."""
    S = as_rep_matrix(S, "S")
    if _check_eps(eps, allow_zero=True) == 0:
        Sigma = symmetrize(S.T @ S / S.shape[0])
        _require_pd(Sigma)
        return Sigma, 1
    Sigma, iterations, _ = _robust_cov(S, eps, cfg)
    return Sigma, iterations


def _second_moment(S):
    return symmetrize(S.T @ S / S.shape[0])


def _require_pd(Sigma):
    w, _ = sym_eigh(Sigma)
    floor = pd_floor(Sigma)
    if floor <= 0 or w[0] <= floor:
        raise IllConditionedError(f"covariance is singular (min eigenvalue {w[0]:.3g})")


# ---------------------------------------------------------------------------
# joint estimate
# ---------------------------------------------------------------------------


def pair_differences(S) -> np.ndarray:
    """``(x_i - x_{h+i}) / sqrt(2)`` for ``i < h = n // 2``; an odd last row is dropped."""
    S = np.asarray(S, dtype=np.float64)
    h = S.shape[0] // 2
    return (S[:h] - S[h : 2 * h]) / math.sqrt(2.0)


def robust_gaussian(S, eps: float, cfg: FilterConfig = FilterConfig()) -> RobustEstimate:
    """Robust mean and covariance of an arbitrary Gaussian.

    The covariance is estimated from differences of paired samples (zero
    mean, same covariance), the data are whitened with it, and the mean is
    estimated on the whitened rows and mapped back.
    """
    S = as_rep_matrix(S, "S")
    eps = _check_eps(eps, allow_zero=True)
    n, k = S.shape
    if n < 2 * (k + 1):
        raise InsufficientDataError(f"need at least {2 * (k + 1)} samples in dimension {k}, got {n}")
    if eps == 0:
        mu = S.mean(axis=0)
        C = S - mu
        Sigma = symmetrize(C.T @ C / n)
        _require_pd(Sigma)
        return RobustEstimate(mu, Sigma, 1, 1, 0)

    pairs = pair_differences(S)
    Sigma, it_cov, kept_pairs = _robust_cov(pairs, eps, cfg)
    W = inv_sqrt(Sigma)
    Xw = S @ W
    mu_w, it_mean, kept_rows = _robust_mean(Xw, eps, cfg)
    mu = sqrtm_psd(Sigma) @ mu_w
    removed_cov = pairs.shape[0] - kept_pairs.shape[0]
    removed_mean = n - kept_rows.shape[0]
    return RobustEstimate(mu, Sigma, it_mean, it_cov, removed_cov + removed_mean, removed_cov, removed_mean)
