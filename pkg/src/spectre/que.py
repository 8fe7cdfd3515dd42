"""Quantum-entropy (QUE) outlier scores on whitened representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import kernels
from .errors import ParameterError
from .linalg import as_rep_matrix, fix_signs, sym_eigh

DEFAULT_ALPHA = 4.0
DEGENERATE_GAP = 1e-8


@dataclass(frozen=True)
class QueScoreVector:
    scores: np.ndarray
    alpha: float


def _second_moment(T2: np.ndarray) -> np.ndarray:
    n = T2.shape[0]
    S = T2.T @ T2 / n
    return 0.5 * (S + S.T)


def que_weight_matrix(Sigma_tilde, alpha: float) -> np.ndarray:
    """``Q_alpha / tr(Q_alpha)`` for a second-moment matrix.

    The exponent is shifted by its largest value before exponentiating, which
    leaves the normalized matrix unchanged and keeps large ``alpha`` finite.
    """
    if alpha < 0 or not np.isfinite(alpha):
        raise ParameterError(f"alpha must be a finite nonnegative number, got {alpha}")
    w, V = sym_eigh(Sigma_tilde)
    k = w.shape[0]
    top = w[-1]
    if alpha == 0 or top - 1.0 <= DEGENERATE_GAP:
        return np.eye(k) / k
    expo = alpha * (w - 1.0) / (top - 1.0)
    q = np.exp(expo - expo.max())
    Q = (V * q) @ V.T
    return 0.5 * (Q + Q.T) / q.sum()


def que_scores(T2, alpha: float = DEFAULT_ALPHA) -> QueScoreVector:
    """QUE score ``h' Q_alpha h / tr(Q_alpha)`` of every (whitened) row."""
    T2 = as_rep_matrix(T2, "T2")
    W = que_weight_matrix(_second_moment(T2), alpha)
    scores = kernels.row_quadforms(T2, W)
    return QueScoreVector(np.maximum(scores, 0.0), float(alpha))


def projected_norm_scores(T2) -> np.ndarray:
    """Squared projection on the top principal direction (the alpha -> inf limit)."""
    T2 = as_rep_matrix(T2, "T2")
    _, V = sym_eigh(_second_moment(T2))
    v = fix_signs(V[:, -1])
    return (T2 @ v) ** 2
