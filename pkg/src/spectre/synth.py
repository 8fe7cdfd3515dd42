"""Synthetic labeled representations with planted poison clusters.

Clean rows of every label are Gaussian with a shared anisotropic covariance;
the target label additionally receives ``floor(eps * n_clean)`` poisons split
into ``m`` tight clusters displaced along chosen eigendirections.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError

SignatureDirs = Union[str, Sequence[Sequence[float]]]


def spectrum_profile(d: int, condition_number: float = 100.0, kind: str = "geometric", n_top: int = 0) -> list[float]:
    """Descending covariance eigenvalues with the given condition number.

    ``geometric`` decays evenly on a log scale from ``condition_number`` to 1.
    ``spiked`` puts ``n_top`` directions on a geometric ramp from
    ``condition_number`` down to ``sqrt(condition_number)`` and leaves the
    remaining ``d - n_top`` at 1.
    """
    if d < 1 or condition_number < 1:
        raise ParameterError("need d >= 1 and condition_number >= 1")
    if kind == "geometric":
        if d == 1:
            return [1.0]
        return list(np.geomspace(condition_number, 1.0, d))
    if kind == "spiked":
        if not 0 <= n_top < d:
            raise ParameterError(f"n_top must lie in [0, {d}), got {n_top}")
        top = list(np.geomspace(condition_number, math.sqrt(condition_number), n_top)) if n_top else []
        return top + [1.0] * (d - n_top)
    raise ParameterError(f"unknown spectrum kind {kind!r}")


@dataclass
class SynthSpec:
    n_clean: int
    d: int
    eps: float
    m: int = 1
    clean_spectrum: list[float] | None = None
    signature_dirs: SignatureDirs = "auto"
    displacement: float = 6.0
    poison_spread: float = 1.0
    num_labels: int = 1
    target_label: int = 0
    seed: int = 0

    @property
    def n_poison(self) -> int:
        return int(math.floor(self.eps * self.n_clean + 1e-9))

    def spectrum(self) -> np.ndarray:
        if self.clean_spectrum is None:
            return np.asarray(spectrum_profile(self.d), dtype=np.float64)
        return np.asarray(self.clean_spectrum, dtype=np.float64)

    def validate(self) -> None:
        if self.n_clean < 1 or self.d < 1:
            raise ParameterError("n_clean and d must be positive")
        if not 0 <= self.eps < 1:
            raise ParameterError(f"eps must lie in [0, 1), got {self.eps}")
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.eps > 0 and self.n_poison < self.m:
            raise ParameterError(f"floor(eps * n_clean) = {self.n_poison} is smaller than m = {self.m}")
        spec = self.spectrum()
        if spec.shape != (self.d,) or not np.all(spec > 0) or not np.all(np.isfinite(spec)):
            raise ParameterError("clean_spectrum must hold d positive finite values")
        if np.any(np.diff(spec) > 0):
            raise ParameterError("clean_spectrum must be in descending order")
        if isinstance(self.signature_dirs, str):
            if self.signature_dirs not in ("auto", "top"):
                raise ParameterError(f"signature_dirs must be 'auto', 'top' or explicit vectors, got {self.signature_dirs!r}")
            if self.m > self.d:
                raise ParameterError("m cannot exceed d with automatic signature placement")
        else:
            dirs = np.asarray(self.signature_dirs, dtype=np.float64)
            if dirs.shape != (self.m, self.d):
                raise ParameterError(f"signature_dirs must have shape ({self.m}, {self.d}), got {dirs.shape}")
            if not np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-8):
                raise ParameterError("explicit signature directions must be unit vectors")
        if self.num_labels < 1 or not 0 <= self.target_label < self.num_labels:
            raise ParameterError("target_label must index one of num_labels labels")
        if self.displacement < 0 or self.poison_spread < 0:
            raise ParameterError("displacement and poison_spread must be nonnegative")

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["clean_spectrum"] is not None:
            out["clean_spectrum"] = [float(v) for v in out["clean_spectrum"]]
        if not isinstance(out["signature_dirs"], str):
            out["signature_dirs"] = [[float(v) for v in row] for row in out["signature_dirs"]]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown SynthSpec fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ParameterError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class LabeledDataset:
    data: dict[int, np.ndarray]
    poison_mask: dict[int, np.ndarray]
    spec: SynthSpec
    centers: np.ndarray = field(repr=False, default=None)
    basis: np.ndarray = field(repr=False, default=None)


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(Z)
    return Q * np.sign(np.diag(R))


def label_mean(label: int, d: int) -> np.ndarray:
    mu = np.zeros(d)
    mu[label % d] = 10.0 * (1 + label // d)
    return mu


def way_sizes(total: int, m: int) -> list[int]:
    base, rem = divmod(total, m)
    return [base + (1 if j < rem else 0) for j in range(m)]


def generate(spec: SynthSpec) -> LabeledDataset:
    """Draw a dataset; identical specs give identical arrays."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    lam = spec.spectrum()
    V = random_orthogonal(d, rng)
    cov_sqrt = V * np.sqrt(lam)

    if isinstance(spec.signature_dirs, str):
        cols = list(range(d - 1, d - 1 - spec.m, -1)) if spec.signature_dirs == "auto" else list(range(spec.m))
        dirs = V[:, cols].T
        sig_sd = np.sqrt(lam[cols])
    else:
        dirs = np.asarray(spec.signature_dirs, dtype=np.float64)
        Sigma = (V * lam) @ V.T
        sig_sd = np.sqrt(np.einsum("ij,jk,ik->i", dirs, Sigma, dirs))

    data, masks = {}, {}
    centers = None
    for label in range(spec.num_labels):
        mu = label_mean(label, d)
        clean = mu + rng.standard_normal((spec.n_clean, d)) @ cov_sqrt.T
        if label == spec.target_label and spec.n_poison > 0:
            centers = mu + spec.displacement * sig_sd[:, None] * dirs
            parts = []
            for j, size in enumerate(way_sizes(spec.n_poison, spec.m)):
                parts.append(centers[j] + spec.poison_spread * rng.standard_normal((size, d)))
            rows = np.vstack([clean] + parts)
            mask = np.zeros(rows.shape[0], dtype=bool)
            mask[spec.n_clean :] = True
            perm = rng.permutation(rows.shape[0])
            rows, mask = rows[perm], mask[perm]
        else:
            rows = clean
            mask = np.zeros(rows.shape[0], dtype=bool)
        data[label] = rows
        masks[label] = mask
    return LabeledDataset(data=data, poison_mask=masks, spec=spec, centers=centers, basis=V)


@dataclass(frozen=True)
class RemovalMetrics:
    p_rm: int
    recall: float
    clean_removed: int

    def to_dict(self) -> dict:
        return {"p_rm": self.p_rm, "recall": self.recall, "clean_removed": self.clean_removed}


def eval_removal(mask, removed) -> RemovalMetrics:
    """Count how many of the removed indices are true poisons."""
    mask = np.asarray(mask, dtype=bool)
    removed = np.unique(np.asarray(removed, dtype=np.int64))
    if removed.size and (removed.min() < 0 or removed.max() >= mask.shape[0]):
        raise ParameterError("removed indices out of range")
    p_rm = int(mask[removed].sum())
    total = int(mask.sum())
    recall = p_rm / total if total else 0.0
    return RemovalMetrics(p_rm, recall, int(removed.size - p_rm))


# ---------------------------------------------------------------------------
# benchmark suites
# ---------------------------------------------------------------------------

SUITE_EPS = (0.025, 0.05, 0.1)


def hidden_signature_suite(count: int = 30, n_clean: int = 5000, d: int = 64, condition_number: float = 100.0, n_top: int = 2) -> list[SynthSpec]:
    """Planted instances with the signature in the smallest-variance directions.

    Instance ``i`` uses ``m = 1 + i % 3`` ways and ``eps = SUITE_EPS[(i // 3) % 3]``
    with seed ``i``.  The clean spectrum has ``n_top`` strong directions on top
    of a flat unit bulk, so the poisons only surface after whitening.
    """
    spectrum = spectrum_profile(d, condition_number, "spiked", n_top=n_top)
    return [
        SynthSpec(
            n_clean=n_clean,
            d=d,
            eps=SUITE_EPS[(i // 3) % 3],
            m=1 + i % 3,
            clean_spectrum=spectrum,
            displacement=6.0,
            seed=i,
        )
        for i in range(count)
    ]
