"""SPECTRE poison detection, adaptive dimension choice and target-label search."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ParameterError, SpectreError
from .linalg import as_rep_matrix, inv_sqrt, symmetrize, top_k_svd, whiten
from .que import DEFAULT_ALPHA, QueScoreVector, que_scores
from .robust import MAX_EPS, FilterConfig, RobustEstimate, robust_gaussian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectreConfig:
    eps: float
    alpha: float = DEFAULT_ALPHA
    k: int | None = None
    k_max: int = 64
    removal_multiplier: float = 1.5
    seed: int = 0
    split_svd: bool = False
    filter: FilterConfig = field(default_factory=FilterConfig)

    def __post_init__(self):
        if not 0 < self.eps < MAX_EPS:
            raise ParameterError(f"eps must lie in (0, {MAX_EPS}), got {self.eps}")
        if not self.removal_multiplier > 0:
            raise ParameterError(f"removal_multiplier must be positive, got {self.removal_multiplier}")
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be nonnegative, got {self.alpha}")
        if self.k_max < 1:
            raise ParameterError(f"k_max must be >= 1, got {self.k_max}")
        if self.k is not None and not 1 <= self.k <= self.k_max:
            raise ParameterError(f"k must lie in [1, k_max={self.k_max}], got {self.k}")

    def budget(self, n: int) -> int:
        return min(int(math.floor(self.removal_multiplier * self.eps * n + 1e-9)), n)

    def to_dict(self) -> dict:
        out = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "filter"}
        out["filter"] = self.filter.to_dict()
        return out


@dataclass
class DetectionReport:
    removed: np.ndarray
    k_used: int
    mean_que: float
    scores: QueScoreVector
    per_k_diagnostics: list[tuple[int, float]] = field(default_factory=list)
    estimate: RobustEstimate | None = field(default=None, repr=False)


def top_indices(scores: np.ndarray, count: int) -> np.ndarray:
    """Sorted indices of the ``count`` largest scores, ties to the lower index."""
    if count <= 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:count]).astype(np.int64)


def _subspace(C: np.ndarray, k: int, cfg: SpectreConfig) -> np.ndarray:
    if not cfg.split_svd:
        U, _ = top_k_svd(C, k, seed=cfg.seed)
        return U
    rng = np.random.default_rng(cfg.seed)
    half = np.sort(rng.permutation(C.shape[0])[: C.shape[0] // 2])
    if k > min(half.size, C.shape[1]):
        raise ParameterError(f"k={k} exceeds the rank available to the split SVD")
    U, _ = top_k_svd(C[half], k, seed=cfg.seed)
    return U


def _detect_projected(P: np.ndarray, cfg: SpectreConfig) -> tuple[np.ndarray, QueScoreVector, RobustEstimate]:
    est = robust_gaussian(P, cfg.eps, cfg.filter)
    T2 = whiten(P, est.mean, est.cov)
    sc = que_scores(T2, cfg.alpha)
    removed = top_indices(sc.scores, cfg.budget(P.shape[0]))
    return removed, sc, est


def dimension_quality(P: np.ndarray, removed: np.ndarray, alpha: float) -> float:
    """Mean QUE score of all rows after whitening with the survivors' covariance."""
    keep = np.ones(P.shape[0], dtype=bool)
    keep[removed] = False
    Q = P[keep]
    mu = Q.mean(axis=0)
    C = Q - mu
    cov = symmetrize(C.T @ C / max(Q.shape[0] - 1, 1))
    T = (P - mu) @ inv_sqrt(cov)
    return float(np.mean(que_scores(T, alpha).scores))


def spectre_detect(S, k: int, cfg: SpectreConfig) -> DetectionReport:
    """Remove the ``floor(multiplier * eps * n)`` rows with the largest QUE scores.

    The rows are centered, projected on their top-``k`` singular subspace,
    whitened with a robust mean/covariance estimate and scored.
    """
    S = as_rep_matrix(S, "S")
    n, d = S.shape
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= min(n, d)):
        raise ParameterError(f"k must be an integer in [1, {min(n, d)}], got {k!r}")
    C = S - S.mean(axis=0)
    P = C @ _subspace(C, int(k), cfg)
    return _report_for_projection(P, int(k), cfg)


def _report_for_projection(P, k, cfg, Pq=None):
    try:
        removed, sc, est = _detect_projected(P, cfg)
    except SpectreError as exc:
        raise type(exc)(f"k={k}: {exc}") from exc
    q = dimension_quality(P if Pq is None else Pq, removed, cfg.alpha)
    return DetectionReport(removed=removed, k_used=k, mean_que=q, scores=sc, per_k_diagnostics=[(k, q)], estimate=est)


def k_grid(k_max: int) -> list[int]:
    stride = 1 if k_max <= 64 else max(1, k_max // 64)
    return list(range(1, k_max + 1, stride))


@dataclass
class KSweep:
    ks: list[int]
    q: list[float]
    reports: dict[int, DetectionReport] = field(repr=False)

    @property
    def best(self) -> tuple[int, float]:
        i = int(np.argmax(self.q))  # first maximum, i.e. smallest k
        return self.ks[i], self.q[i]

    def diagnostics(self) -> list[tuple[int, float]]:
        return list(zip(self.ks, self.q))


def sweep_k(S, cfg: SpectreConfig, ks: list[int] | None = None) -> KSweep:
    """Run SPECTRE for every ``k`` on the grid and record the mean QUE score."""
    S = as_rep_matrix(S, "S")
    n, d = S.shape
    if cfg.k_max > min(n, d):
        raise ParameterError(f"k_max={cfg.k_max} exceeds min(n, d)={min(n, d)}")
    C = S - S.mean(axis=0)
    U = _subspace(C, cfg.k_max, cfg)
    Pfull = C @ U
    ks = k_grid(cfg.k_max) if ks is None else list(ks)
    qs, reports = [], {}
    for k in ks:
        # q is always measured in the k_max-dimensional projection, so values
        # are comparable across k
        rep = _report_for_projection(Pfull[:, :k], k, cfg, Pfull)
        reports[k] = rep
        qs.append(rep.mean_que)
        logger.debug("k=%d q=%.6g", k, rep.mean_que)
    return KSweep(ks, qs, reports)


def k_identifier(S, cfg: SpectreConfig) -> tuple[int, float]:
    return sweep_k(S, cfg).best


def spectre_adaptive(S, cfg: SpectreConfig) -> DetectionReport:
    """SPECTRE at the ``k`` chosen by :func:`k_identifier`, with the per-k table attached."""
    sw = sweep_k(S, cfg)
    k, _ = sw.best
    rep = sw.reports[k]
    rep.per_k_diagnostics = sw.diagnostics()
    return rep


@dataclass
class TargetReport:
    label: int
    k: int
    q: float
    per_label: dict[int, KSweep] = field(repr=False)

    def table(self) -> list[dict]:
        rows = []
        for label, sw in sorted(self.per_label.items()):
            k, q = sw.best
            rows.append({"label": label, "k": k, "q": q, "per_k": [[kk, qq] for kk, qq in sw.diagnostics()]})
        return rows


def identify_target(datasets: Mapping[int, np.ndarray], cfg: SpectreConfig, parallel: int = 1) -> TargetReport:
    """Pick the label whose best mean QUE score is largest (ties to the lowest label)."""
    if len(datasets) < 2:
        raise ParameterError("need representations for at least two labels")
    labels = sorted(datasets)
    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            sweeps = dict(zip(labels, pool.map(lambda lb: sweep_k(datasets[lb], cfg), labels)))
    else:
        sweeps = {lb: sweep_k(datasets[lb], cfg) for lb in labels}
    best_label, best_k, best_q = None, None, -math.inf
    for lb in labels:
        k, q = sweeps[lb].best
        if q > best_q:
            best_label, best_k, best_q = lb, k, q
    return TargetReport(best_label, best_k, best_q, sweeps)


def target_identifier(datasets: Mapping[int, np.ndarray], cfg: SpectreConfig, parallel: int = 1) -> tuple[int, int, float]:
    rep = identify_target(datasets, cfg, parallel)
    return rep.label, rep.k, rep.q
