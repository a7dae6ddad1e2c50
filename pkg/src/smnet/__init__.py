"""Dissimilarity-based class partitioning across specialized classifier streams,
with late fusion of the stream decisions, over pre-extracted clip features."""

from .classify import ClassifierConfig, TrainedStream, predict_proba, stream_accuracy, train_stream
from .clustering import ClusterAssignment, KmeansConfig, default_k, run_kmeans, subsample_per_class
from .evaluation import EvalReport, BenchReport, ann_quality, baseline_monolithic, bench, evaluate
from .feature_store import ClipRecord, Dataset, SynthSpec, generate_synthetic, load_dataset, save_dataset
from .fusion import FusionDecision, FusionMode, fuse, fuse_mean_weighted, fuse_min_weighted, fuse_raw
from .partition import (
    StreamPlan,
    VoteRecord,
    build_affiliations,
    build_plan,
    consensus_vote,
    decreasing_percentages,
)
from .pipeline import RunConfig, make_plan, run_pipeline, train_streams
from .preprocess import EqualizationConfig, PcaModel, equalize, fit_pca, project

__version__ = "0.1.0"

__all__ = [
    "ann_quality",
    "baseline_monolithic",
    "bench",
    "BenchReport",
    "build_affiliations",
    "build_plan",
    "ClassifierConfig",
    "ClipRecord",
    "ClusterAssignment",
    "consensus_vote",
    "Dataset",
    "decreasing_percentages",
    "default_k",
    "EqualizationConfig",
    "equalize",
    "EvalReport",
    "evaluate",
    "fit_pca",
    "fuse",
    "fuse_mean_weighted",
    "fuse_min_weighted",
    "fuse_raw",
    "FusionDecision",
    "FusionMode",
    "generate_synthetic",
    "KmeansConfig",
    "load_dataset",
    "make_plan",
    "PcaModel",
    "predict_proba",
    "project",
    "run_kmeans",
    "run_pipeline",
    "RunConfig",
    "save_dataset",
    "stream_accuracy",
    "StreamPlan",
    "subsample_per_class",
    "SynthSpec",
    "train_stream",
    "train_streams",
    "TrainedStream",
    "VoteRecord",
]
