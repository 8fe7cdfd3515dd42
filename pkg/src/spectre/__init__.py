"""Poisoned-sample detection in learned representations via robust whitening and QUE scoring."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .baselines import ClusterPair, activation_clustering, clustering_with_oracle, pca_defense
from .detect import (
    DetectionReport,
    SpectreConfig,
    identify_target,
    k_identifier,
    spectre_adaptive,
    spectre_detect,
    sweep_k,
    target_identifier,
)
from .errors import (
    ConvergenceError,
    DataError,
    DegenerateDataError,
    IllConditionedError,
    InsufficientDataError,
    NumericError,
    ParameterError,
    SpectreError,
)
from .io import read_mask, read_matrix, read_rmx, write_mask, write_rmx
from .linalg import ImplicitTMatrix, apply_implicit_T, top_eig_sym, top_k_svd, whiten
from .que import QueScoreVector, projected_norm_scores, que_scores
from .robust import FilterConfig, RobustEstimate, find_max_poly, robust_cov, robust_gaussian, robust_mean
from .synth import LabeledDataset, SynthSpec, eval_removal, generate

__all__ = [
    "BACKEND",
    "ClusterPair",
    "ConvergenceError",
    "DataError",
    "DegenerateDataError",
    "DetectionReport",
    "FilterConfig",
    "IllConditionedError",
    "ImplicitTMatrix",
    "InsufficientDataError",
    "LabeledDataset",
    "NumericError",
    "ParameterError",
    "QueScoreVector",
    "RobustEstimate",
    "SpectreConfig",
    "SpectreError",
    "SynthSpec",
    "activation_clustering",
    "apply_implicit_T",
    "clustering_with_oracle",
    "eval_removal",
    "find_max_poly",
    "generate",
    "identify_target",
    "k_identifier",
    "pca_defense",
    "projected_norm_scores",
    "que_scores",
    "read_mask",
    "read_matrix",
    "read_rmx",
    "robust_cov",
    "robust_gaussian",
    "robust_mean",
    "spectre_adaptive",
    "spectre_detect",
    "sweep_k",
    "target_identifier",
    "top_eig_sym",
    "top_k_svd",
    "whiten",
    "write_mask",
    "write_rmx",
]
