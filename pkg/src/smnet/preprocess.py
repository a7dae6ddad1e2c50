"""Segment equalization by cyclic row repetition, flattening, and exact PCA."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .binfmt import read_pca, write_pca
from .errors import DimensionMismatch, InsufficientData, InvalidConfig, TargetBelowObserved
from .feature_store import ClipRecord

DEFAULT_PCA_COMPONENTS = 1000


@dataclass(frozen=True)
class EqualizationConfig:
    target_segments: int | str = "auto"

    def resolve(self, train_clips: Iterable[ClipRecord]) -> int:
        """Concrete target: the fixed value, or max S over ``train_clips`` for ``auto``."""
        observed = max((c.n_segments for c in train_clips), default=0)
        if self.target_segments == "auto":
            if observed < 1:
                raise InsufficientData("cannot resolve auto target without training clips")
            return observed
        target = int(self.target_segments)
        if target < 1:
            raise InvalidConfig("target_segments must be positive")
        if target < observed:
            raise TargetBelowObserved(f"target {target} is below observed max S={observed}")
        return target


def equalize(segments: np.ndarray | ClipRecord, target_segments: int) -> np.ndarray:
    """Repeat rows cyclically up to ``target_segments`` and flatten row-major.

    Row i of the padded matrix is segment ``i mod S``. Clips longer than the
    target are rejected rather than truncated.
    """
    if isinstance(segments, ClipRecord):
        segments = segments.segments
    segments = np.asarray(segments, dtype=np.float64)
    n_seg = segments.shape[0]
    if n_seg < 1:
        raise InsufficientData("clip has no segments")
    if target_segments < n_seg:
        raise TargetBelowObserved(f"clip has {n_seg} segments, target is {target_segments}")
    rows = np.arange(target_segments) % n_seg
    return segments[rows].reshape(-1)


def equalize_many(clips: Sequence[ClipRecord], target_segments: int) -> np.ndarray:
    return np.stack([equalize(c, target_segments) for c in clips])


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray               # (D_flat,)
    components: np.ndarray         # (p, D_flat), orthonormal rows
    explained_variance: np.ndarray  # (p,), non-increasing

    @property
    def n_components(self) -> int:
        return int(self.components.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.components.shape[1])

    def save(self, path: str | Path) -> None:
        write_pca(Path(path), self.mean, self.components, self.explained_variance)

    @classmethod
    def load(cls, path: str | Path) -> "PcaModel":
        mean, components, explained = read_pca(Path(path))
        return cls(mean=mean, components=components, explained_variance=explained)


def fit_pca(train_vectors: np.ndarray, p: int = DEFAULT_PCA_COMPONENTS) -> PcaModel:
    """Fit PCA by a dense SVD of the centered training matrix.

    Keeps ``min(p, rank)`` components. Each component is sign-flipped so its
    largest-magnitude entry is positive (first such entry on ties).
    """
    X = np.asarray(train_vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientData("PCA needs at least two training vectors")
    if p < 1:
        raise InvalidConfig("requested component count must be >= 1")
    n, d = X.shape
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s[0] * max(n, d) * np.finfo(np.float64).eps if s.size else 0.0
    rank = int(np.sum(s > tol))
    keep = min(p, rank)
    components = vt[:keep].copy()
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(keep), pivots])
    components *= signs[:, None]
    explained = s[:keep] ** 2 / (n - 1)
    return PcaModel(mean=mean, components=components, explained_variance=explained)


def project(model: PcaModel, v: np.ndarray) -> np.ndarray:
    """(v - mean) @ components.T for one vector or a stack of row vectors."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"vector length {v.shape[-1]} != PCA input dim {model.input_dim}")
    return (v - model.mean) @ model.components.T


def reconstruct(model: PcaModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) @ model.components + model.mean
