"""Accuracy reports, neighbourhood diagnostics and the online throughput harness."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .classify import ClassifierConfig, TrainedStream, predict, predict_proba, stream_accuracy, train_classifier
from .errors import ClassTooSmall, EmptyTestSet, InvalidConfig, UntrainedStream
from .feature_store import ClipRecord, Dataset
from .fusion import FusionDecision, FusionMode, fuse
from .knn import knn_indices
from .partition import DEFAULT_KNN_K, StreamPlan
from .preprocess import EqualizationConfig, PcaModel, equalize, equalize_many, project

EXTRACTION_CAVEAT = (
    "CNN feature extraction is not part of the measured path: timing covers "
    "segment equalization, PCA projection, stream prediction and fusion only. "
    "In a full video system extraction dominates online time (roughly 85-95%), "
    "so these fps figures are an upper bound on end-to-end throughput."
)
VIDEO_AGGREGATIONS = ("majority", "mean_score")
STAGES = ("equalize", "project", "predict", "fuse")


def _as_modes(modes: Sequence[FusionMode | str]) -> list[FusionMode]:
    return [m if isinstance(m, FusionMode) else FusionMode(m) for m in modes]


def _resolve_target(ds: Dataset, target_segments: int | None) -> int:
    if target_segments is not None:
        return int(target_segments)
    return EqualizationConfig("auto").resolve(ds.train)


def reduced_features(clips: Sequence[ClipRecord], pca: PcaModel, target_segments: int) -> np.ndarray:
    return project(pca, equalize_many(clips, target_segments))


def _check_streams(plan: StreamPlan, streams: Sequence[TrainedStream]) -> None:
    if len(streams) != plan.n_streams:
        raise UntrainedStream(f"plan has {plan.n_streams} streams, {len(streams)} trained")
    for sid, (ts, roster) in enumerate(zip(streams, plan.stream_rosters)):
        if ts is None or tuple(ts.roster) != tuple(roster):
            raise UntrainedStream(f"stream {sid} is missing or trained on a different roster")


def class_means_of(streams: Sequence[TrainedStream]) -> dict[int, np.ndarray]:
    return {c: ts.class_means[i] for ts in streams for i, c in enumerate(ts.roster)}


def member_bank_of(streams: Sequence[TrainedStream]) -> dict[int, np.ndarray]:
    return {c: bank for ts in streams for c, bank in ts.member_bank.items()}


def aggregate_video(decisions: Sequence[FusionDecision], how: str = "majority") -> int:
    """Video prediction from its clips' fused decisions.

    ``majority``: most frequent clip prediction, ties to the highest summed
    fused score, then the lowest class id. ``mean_score``: class with the
    largest summed score over the clips' score breakdowns.
    """
    if how == "majority":
        votes = Counter(d.predicted_class for d in decisions)
        summed: dict[int, float] = defaultdict(float)
        for d in decisions:
            summed[d.predicted_class] += d.score
        return min(votes, key=lambda c: (-votes[c], -summed[c], c))
    if how == "mean_score":
        summed = defaultdict(float)
        for d in decisions:
            for c, (_, _, s) in d.score_breakdown.items():
                summed[c] += s
        return min(summed, key=lambda c: (-summed[c], c))
    raise InvalidConfig(f"unknown video aggregation {how!r}")


@dataclass
class EvalReport:
    per_stream_accuracy: list[float]
    clip_accuracy: dict[str, float]
    video_accuracy: dict[str, float]
    confusion_matrix: np.ndarray
    confusion_mode: str
    baseline_monolithic_accuracy: float | None = None
    metadata: dict = field(default_factory=dict)
    decisions: list[tuple[str, str, int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_stream_accuracy": self.per_stream_accuracy,
            "clip_accuracy": self.clip_accuracy,
            "video_accuracy": self.video_accuracy,
            "confusion_mode": self.confusion_mode,
            "confusion_matrix": self.confusion_matrix.tolist(),
            "baseline_monolithic_accuracy": self.baseline_monolithic_accuracy,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        lines = ["stream  accuracy"]
        lines += [f"{i:>6}  {a:8.4f}" for i, a in enumerate(self.per_stream_accuracy)]
        lines.append("")
        lines.append("mode     clip      video")
        for mode in self.clip_accuracy:
            lines.append(f"{mode:<7}  {self.clip_accuracy[mode]:.4f}    {self.video_accuracy[mode]:.4f}")
        if self.baseline_monolithic_accuracy is not None:
            lines.append(f"monolithic baseline (clip): {self.baseline_monolithic_accuracy:.4f}")
        return "\n".join(lines)

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        (directory / "eval_report.json").write_text(self.to_json(), encoding="utf-8")
        with (directory / "confusion.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            n = self.confusion_matrix.shape[0]
            writer.writerow(["true\\pred", *range(n)])
            for i, row in enumerate(self.confusion_matrix):
                writer.writerow([i, *row.tolist()])
        with (directory / "decisions.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["clip_id", "mode", "predicted_class", "true_class"])
            writer.writerows(self.decisions)


def evaluate(ds: Dataset, plan: StreamPlan, streams: Sequence[TrainedStream], pca: PcaModel,
             modes: Sequence[FusionMode | str] = ("w_raw", "w_mean", "w_min"),
             target_segments: int | None = None, confusion_mode: str | None = None,
             video_aggregation: str = "majority",
             metadata: dict | None = None) -> EvalReport:
    """Fused clip- and video-level accuracy per mode plus roster-restricted stream accuracy."""
    _check_streams(plan, streams)
    modes = _as_modes(modes)
    if not modes:
        raise InvalidConfig("no fusion modes requested")
    test = ds.test
    if not test:
        raise EmptyTestSet("dataset has no test clips")
    target = _resolve_target(ds, target_segments)
    X = reduced_features(test, pca, target)
    y = np.array([c.class_id for c in test])
    probs = [np.atleast_2d(predict_proba(ts, X)) for ts in streams]
    means = class_means_of(streams)
    bank = member_bank_of(streams)
    confusion_mode = confusion_mode or ("w_mean" if "w_mean" in [m.name for m in modes] else modes[0].name)

    clip_acc: dict[str, float] = {}
    video_acc: dict[str, float] = {}
    decisions_out: list[tuple[str, str, int, int]] = []
    confusion = np.zeros((ds.n_classes, ds.n_classes), dtype=np.int64)
    for mode in modes:
        decisions = [
            fuse(mode, [p[i] for p in probs], plan, X[i], means, bank) for i in range(len(test))
        ]
        predicted = np.array([d.predicted_class for d in decisions])
        clip_acc[mode.name] = float(np.mean(predicted == y))
        by_video: dict[str, list[int]] = defaultdict(list)
        for i, clip in enumerate(test):
            by_video[clip.video_id].append(i)
        hits = [
            aggregate_video([decisions[i] for i in idx], video_aggregation) == y[idx[0]]
            for _, idx in sorted(by_video.items())
        ]
        video_acc[mode.name] = float(np.mean(hits))
        decisions_out += [(c.clip_id, mode.name, int(p), int(c.class_id)) for c, p in zip(test, predicted)]
        if mode.name == confusion_mode:
            np.add.at(confusion, (y, predicted), 1)

    meta = {
        "plan_digest": hashlib.sha256(plan.to_json().encode()).hexdigest(),
        "target_segments": target,
        "pca_components": pca.n_components,
        "video_aggregation": video_aggregation,
        "n_test_clips": len(test),
    }
    meta.update(metadata or {})
    return EvalReport(
        per_stream_accuracy=[stream_accuracy(ts, X, y) for ts in streams],
        clip_accuracy=clip_acc,
        video_accuracy=video_acc,
        confusion_matrix=confusion,
        confusion_mode=confusion_mode,
        metadata=meta,
        decisions=decisions_out,
    )


def baseline_monolithic(ds: Dataset, pca: PcaModel, cfg: ClassifierConfig,
                        target_segments: int | None = None) -> float:
    """Clip-level test accuracy of one classifier trained on every class."""
    target = _resolve_target(ds, target_segments)
    train, test = ds.train, ds.test
    if not test:
        raise EmptyTestSet("dataset has no test clips")
    model = train_classifier(range(ds.n_classes), reduced_features(train, pca, target),
                             np.array([c.class_id for c in train]), cfg)
    y = np.array([c.class_id for c in test])
    return float(np.mean(predict(model, reduced_features(test, pca, target)) == y))


def ann_quality(ds: Dataset, pca: PcaModel, class_ids: Sequence[int],
                knn_k: int = DEFAULT_KNN_K, target_segments: int | None = None) -> dict[int, float]:
    """Mean percentage of same-class clips among each member's ``knn_k`` nearest training clips."""
    if knn_k < 1:
        raise InvalidConfig("knn_k must be >= 1")
    target = _resolve_target(ds, target_segments)
    train = ds.train
    X = reduced_features(train, pca, target)
    y = np.array([c.class_id for c in train])
    neighbours = knn_indices(X, X, knn_k, exclude_self=True)
    out: dict[int, float] = {}
    for c in class_ids:
        rows = np.flatnonzero(y == c)
        if rows.size < 2:
            raise ClassTooSmall(f"class {c} has {rows.size} training members")
        out[int(c)] = float(100.0 * np.mean(y[neighbours[rows]] == c))
    return out


@dataclass
class BenchReport:
    total_frames: int
    online_seconds: float
    fps: float
    stage_seconds: dict[str, float]
    stage_shares: dict[str, float]
    mode: str
    repetitions: int
    n_clips: int
    note: str = EXTRACTION_CAVEAT

    def to_dict(self) -> dict:
        return {
            "total_frames": self.total_frames,
            "online_seconds": self.online_seconds,
            "fps": self.fps,
            "stage_seconds": self.stage_seconds,
            "stage_shares": self.stage_shares,
            "mode": self.mode,
            "repetitions": self.repetitions,
            "n_clips": self.n_clips,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def text(self) -> str:
        shares = ", ".join(f"{k} {100 * v:.1f}%" for k, v in self.stage_shares.items())
        return (f"{self.mode}: {self.fps:.1f} fps over {self.total_frames} frames "
                f"({self.online_seconds:.4f} s online; {shares})\n{self.note}")


def bench(ds: Dataset, plan: StreamPlan, streams: Sequence[TrainedStream], pca: PcaModel,
          mode: FusionMode | str = "w_mean", repetitions: int = 3,
          target_segments: int | None = None) -> BenchReport:
    """Time the per-clip online path over the test split, keeping the fastest repetition."""
    _check_streams(plan, streams)
    mode = _as_modes([mode])[0]
    test = ds.test
    if not test:
        raise EmptyTestSet("dataset has no test clips")
    if repetitions < 1:
        raise InvalidConfig("repetitions must be >= 1")
    target = _resolve_target(ds, target_segments)
    means = class_means_of(streams)
    bank = member_bank_of(streams)
    clock = time.perf_counter

    best: dict[str, float] | None = None
    for _ in range(repetitions):
        spent = dict.fromkeys(STAGES, 0.0)
        for clip in test:
            t0 = clock()
            flat = equalize(clip, target)
            t1 = clock()
            z = project(pca, flat)
            t2 = clock()
            probs = [predict_proba(ts, z) for ts in streams]
            t3 = clock()
            fuse(mode, probs, plan, z, means, bank)
            t4 = clock()
            spent["equalize"] += t1 - t0
            spent["project"] += t2 - t1
            spent["predict"] += t3 - t2
            spent["fuse"] += t4 - t3
        if best is None or sum(spent.values()) < sum(best.values()):
            best = spent
    total = sum(best.values())
    frames = sum(c.frame_count for c in test)
    return BenchReport(
        total_frames=frames,
        online_seconds=total,
        fps=frames / total,
        stage_seconds=best,
        stage_shares={k: v / total for k, v in best.items()},
        mode=mode.name,
        repetitions=repetitions,
        n_clips=len(test),
    )
