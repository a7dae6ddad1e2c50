"""Lloyd's k-means with k-means++ seeding, and per-class subsampling of training clips."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .binfmt import read_centroids, write_centroids
from .errors import InvalidConfig, InvalidCounts, IoFailure, TooFewPoints
from .feature_store import ClipRecord, Dataset
from .knn import squared_distances

_MONOTONE_RTOL = 1e-9


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0
    subsample_fraction: float = 1.0
    init: str = "kmeans++"  # or "random"

    def validate(self) -> None:
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.max_iter < 1:
            raise InvalidConfig("max_iter must be >= 1")
        if self.tol < 0:
            raise InvalidConfig("tol must be nonnegative")
        if not 0 < self.subsample_fraction <= 1:
            raise InvalidConfig("subsample_fraction must lie in (0, 1]")
        if self.init not in ("kmeans++", "random"):
            raise InvalidConfig(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class ClusterAssignment:
    clip_ids: tuple[str, ...]   # the clips actually clustered, row order of ``points``
    labels: np.ndarray          # (n,) cluster id per clip
    centroids: np.ndarray       # (k, p)
    inertia: float
    iterations_run: int
    points: np.ndarray          # (n, p) the clustered vectors
    inertia_history: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def label_of(self) -> dict[str, int]:
        return {cid: int(lab) for cid, lab in zip(self.clip_ids, self.labels)}

    def save(self, csv_path: str | Path, centroid_path: str | Path) -> None:
        try:
            with Path(csv_path).open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["clip_id", "cluster_id"])
                for cid, lab in zip(self.clip_ids, self.labels):
                    writer.writerow([cid, int(lab)])
        except OSError as e:
            raise IoFailure(f"cannot write {csv_path}: {e}") from e
        write_centroids(Path(centroid_path), self.centroids)


def load_cluster_labels(csv_path: str | Path) -> dict[str, int]:
    with Path(csv_path).open(encoding="utf-8", newline="") as fh:
        return {row["clip_id"]: int(row["cluster_id"]) for row in csv.DictReader(fh)}


def load_centroids(path: str | Path) -> np.ndarray:
    return read_centroids(Path(path))


def default_k(n_classes: int, n_streams: int) -> int:
    """Cluster budget floor(M / N)."""
    if n_streams < 1 or n_classes < n_streams:
        raise InvalidCounts(f"need M >= N >= 1, got M={n_classes}, N={n_streams}")
    return n_classes // n_streams


def subsample_per_class(ds: Dataset, fraction: float, seed: int) -> list[ClipRecord]:
    """ceil(fraction * count) training clips per class, chosen by seeded shuffle.

    Returned in dataset order.
    """
    if not 0 < fraction <= 1:
        raise InvalidConfig("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, clip in enumerate(ds.clips):
        if clip.split == "train":
            by_class.setdefault(clip.class_id, []).append(i)
    chosen: list[int] = []
    for class_id in sorted(by_class):
        idx = by_class[class_id]
        take = max(1, math.ceil(fraction * len(idx)))
        perm = rng.permutation(len(idx))
        chosen.extend(idx[j] for j in perm[:take])
    return [ds.clips[i] for i in sorted(chosen)]


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++: each step draws ``2 + log k`` D^2-weighted candidates
    and keeps the one that lowers the potential most."""
    n = points.shape[0]
    trials = 2 + int(np.log(k))
    centers = [int(rng.integers(n))]
    closest = squared_distances(points[centers[0]], points)[0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center; take the first unused index
            nxt = int(np.setdiff1d(np.arange(n), centers)[0])
            centers.append(nxt)
            continue
        candidates = rng.choice(n, size=trials, p=closest / total)
        cand_d2 = np.minimum(closest, squared_distances(points[candidates], points))
        best = int(np.argmin(cand_d2.sum(axis=1)))
        centers.append(int(candidates[best]))
        closest = cand_d2[best]
    return points[centers].copy()


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = squared_distances(points, centroids)
    labels = np.argmin(d2, axis=1)  # first minimum = lowest centroid id
    return labels, d2[np.arange(points.shape[0]), labels]


def _update(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
            dist2: np.ndarray) -> np.ndarray:
    k = centroids.shape[0]
    new = np.empty_like(centroids)
    counts = np.bincount(labels, minlength=k)
    taken: set[int] = set()
    for j in range(k):
        if counts[j]:
            new[j] = points[labels == j].mean(axis=0)
    for j in np.flatnonzero(counts == 0):
        # re-seed from the point lying farthest from its own centroid
        order = np.argsort(-dist2, kind="stable")
        pick = next(int(i) for i in order if int(i) not in taken)
        taken.add(pick)
        new[j] = points[pick]
    return new


def _sse(points: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    diff = points - centroids[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def _check_monotone(history: list[float]) -> None:
    if len(history) >= 2:
        prev, cur = history[-2], history[-1]
        if cur > prev + _MONOTONE_RTOL * max(prev, 1.0):
            raise AssertionError(f"k-means inertia increased: {prev!r} -> {cur!r}")


def run_kmeans(points: np.ndarray, cfg: KmeansConfig,
               clip_ids: Sequence[str] | None = None) -> ClusterAssignment:
    """Lloyd iterations from a seeded initialization.

    Stops after ``max_iter`` updates or once no centroid moves more than
    ``tol``. Inertia is checked to be non-increasing after every step.
    """
    cfg.validate()
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise TooFewPoints("no points to cluster")
    n = X.shape[0]
    if n < cfg.k:
        raise TooFewPoints(f"{n} points cannot form {cfg.k} clusters")
    ids = tuple(clip_ids) if clip_ids is not None else tuple(str(i) for i in range(n))
    if len(ids) != n:
        raise InvalidConfig("clip_ids length does not match points")

    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "kmeans++":
        centroids = _kmeanspp(X, cfg.k, rng)
    else:
        centroids = X[rng.choice(n, size=cfg.k, replace=False)].copy()

    history: list[float] = []
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        labels, d2 = _assign(X, centroids)
        history.append(_sse(X, labels, centroids))
        _check_monotone(history)
        new = _update(X, labels, centroids, d2)
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift <= cfg.tol:
            break

    labels, d2 = _assign(X, centroids)
    for _ in range(cfg.k):
        empty = np.flatnonzero(np.bincount(labels, minlength=cfg.k) == 0)
        if empty.size == 0:
            break
        centroids = _update(X, labels, centroids, d2)
        labels, d2 = _assign(X, centroids)
    inertia = _sse(X, labels, centroids)
    history.append(inertia)
    _check_monotone(history)
    return ClusterAssignment(
        clip_ids=ids,
        labels=labels,
        centroids=centroids,
        inertia=inertia,
        iterations_run=iterations,
        points=X,
        inertia_history=tuple(history),
    )
