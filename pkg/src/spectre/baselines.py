"""Comparison defenses: top-PCA-direction scoring and activation clustering."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels
from .detect import top_indices
from .errors import DegenerateDataError, ParameterError
from .linalg import as_rep_matrix, top_k_svd

logger = logging.getLogger(__name__)

LLOYD_MAX_ITER = 100
ORACLE_MAX_ROUNDS = 10_000


def removal_budget(eps: float, n: int, multiplier: float = 1.5) -> int:
    if not 0 <= eps < 1:
        raise ParameterError(f"eps must lie in [0, 1), got {eps}")
    return min(int(math.floor(multiplier * eps * n + 1e-9)), n)


def pca_defense(S, eps: float, multiplier: float = 1.5) -> np.ndarray:
    """Indices of the rows with the largest |projection| on the top singular direction."""
    S = as_rep_matrix(S, "S")
    n = S.shape[0]
    if n < 2:
        raise ParameterError("pca_defense needs at least 2 rows")
    C = S - S.mean(axis=0)
    if not np.any(C):
        raise DegenerateDataError("all rows are identical; no principal direction")
    U, _ = top_k_svd(C, 1)
    return top_indices(np.abs(C @ U[:, 0]), removal_budget(eps, n, multiplier))


@dataclass
class ClusterPair:
    assignment: np.ndarray
    centroids: np.ndarray
    objective: np.ndarray = field(repr=False, default=None)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == c)


def _project(S, k_dims):
    S = as_rep_matrix(S, "S")
    n, d = S.shape
    if n < 2:
        raise ParameterError("clustering needs at least 2 rows")
    if not 1 <= k_dims <= min(n, d):
        raise ParameterError(f"k_dims must lie in [1, {min(n, d)}], got {k_dims}")
    C = S - S.mean(axis=0)
    U, _ = top_k_svd(C, k_dims)
    return C @ U


def _init_pair(P, rng):
    """Two seeded rows that differ, if the data allow it."""
    n = P.shape[0]
    i, j = rng.choice(n, size=2, replace=False)
    if np.array_equal(P[i], P[j]):
        others = np.flatnonzero(np.any(P != P[i], axis=1))
        if others.size:
            j = others[rng.integers(others.size)]
    return P[i].copy(), P[j].copy()


def _two_means(P, rng) -> ClusterPair:
    c0, c1 = _init_pair(P, rng)
    assign, cent, obj = kernels.lloyd_2means(P, c0, c1, LLOYD_MAX_ITER)
    return ClusterPair(np.asarray(assign, dtype=np.int64), np.asarray(cent), np.asarray(obj))


def activation_clustering(S, k_dims: int = 10, seed: int = 0) -> ClusterPair:
    """Center, project on the top ``k_dims`` PCA directions and split with 2-means."""
    P = _project(S, k_dims)
    return _two_means(P, np.random.default_rng(seed))


@dataclass
class OracleRemoval:
    removed: np.ndarray
    complete: bool
    rounds: int


def clustering_with_oracle(S, k_dims: int, eps: float, poison_mask, seed: int = 0, multiplier: float = 1.5) -> OracleRemoval:
    """Build the removal set one sample at a time from the more-poisoned cluster.

    Every round re-runs 2-means from a fresh seeded start, lets the
    ground-truth oracle pick the cluster with the larger poison fraction and
    draws one of its members uniformly.  Stops after ``ORACLE_MAX_ROUNDS``
    rounds with ``complete=False`` if the budget is still unfilled.
    """
    P = _project(S, k_dims)
    n = P.shape[0]
    mask = np.asarray(poison_mask, dtype=bool)
    if mask.shape != (n,):
        raise ParameterError(f"poison_mask must have length {n}, got {mask.shape}")
    budget = removal_budget(eps, n, multiplier)
    rng = np.random.default_rng(seed)
    chosen = np.zeros(n, dtype=bool)
    count = rounds = 0
    while count < budget and rounds < ORACLE_MAX_ROUNDS:
        rounds += 1
        pair = _two_means(P, rng)
        fracs = []
        for c in (0, 1):
            idx = pair.members(c)
            fracs.append(mask[idx].mean() if idx.size else -1.0)
        cluster = pair.members(int(fracs[1] > fracs[0]))
        h = cluster[rng.integers(cluster.size)]
        if not chosen[h]:
            chosen[h] = True
            count += 1
    complete = count >= budget
    if not complete:
        logger.warning("cluster oracle stopped after %d rounds with %d of %d samples", rounds, count, budget)
    return OracleRemoval(np.flatnonzero(chosen), complete, rounds)
