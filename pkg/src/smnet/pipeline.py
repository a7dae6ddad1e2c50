"""Run configuration and the stage functions that chain the modules together.

Every stage derives its own seed from the global run seed by a fixed offset,
so a single stage can be re-run in isolation and reproduce its output.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .classify import ClassifierConfig, TrainedStream, load_stream, save_stream, train_stream
from .clustering import ClusterAssignment, KmeansConfig, default_k, run_kmeans, subsample_per_class
from .errors import InvalidConfig, IoFailure, MissingFile
from .evaluation import BenchReport, EvalReport, baseline_monolithic, evaluate, reduced_features
from .feature_store import Dataset, SynthSpec, generate_synthetic, load_dataset
from .fusion import FusionMode
from .partition import StreamPlan, build_plan
from .preprocess import EqualizationConfig, PcaModel, equalize_many, fit_pca

log = logging.getLogger(__name__)

SEED_OFFSETS = {"subsample": 1, "kmeans": 2, "assignment": 3, "classifier": 4}
FUSION_ALIASES = {"raw": "w_raw", "mean": "w_mean", "min": "w_min",
                  "w_raw": "w_raw", "w_mean": "w_mean", "w_min": "w_min"}


def stage_seed(seed: int, stage: str) -> int:
    return seed + SEED_OFFSETS[stage]


@dataclass
class RunConfig:
    dataset: str = ""
    out: str = "run"
    seed: int = 0
    streams: int = 4
    pca_components: int = 1000
    target_segments: str = "auto"
    kmeans_k: int = 0  # 0 -> floor(M / N)
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-6
    kmeans_init: str = "kmeans++"
    subsample_fraction: float = 1.0
    knn_k: int = 100
    assignment: str = "cvdp"
    classifier: str = "softmax"
    l2_lambda: float = 1e-4
    learning_rate: float = 0.1
    max_epochs: int = 500
    early_stop_tol: float = 1e-7
    hidden_units: int = 128
    fusion: tuple[str, ...] = ("w_raw", "w_mean", "w_min")
    w_min_variant: str = "weighted_product"
    epsilon: float = 1e-9
    video_aggregation: str = "majority"
    workers: int = 1
    baseline: bool = False
    bench_repetitions: int = 3
    synth: SynthSpec | None = None

    def validate(self) -> None:
        if self.streams < 1:
            raise InvalidConfig("streams must be >= 1")
        if self.pca_components < 1:
            raise InvalidConfig("pca_components must be >= 1")
        if self.knn_k < 1:
            raise InvalidConfig("knn_k must be >= 1")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        for m in self.fusion:
            if m not in FUSION_ALIASES:
                raise InvalidConfig(f"unknown fusion mode {m!r}")
        self.kmeans_config(1).validate()
        self.classifier_config().validate()
        self.fusion_modes()

    def kmeans_config(self, k: int) -> KmeansConfig:
        return KmeansConfig(k=k, max_iter=self.kmeans_max_iter, tol=self.kmeans_tol,
                            seed=stage_seed(self.seed, "kmeans"),
                            subsample_fraction=self.subsample_fraction, init=self.kmeans_init)

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(kind=self.classifier, l2_lambda=self.l2_lambda,
                                learning_rate=self.learning_rate, max_epochs=self.max_epochs,
                                early_stop_tol=self.early_stop_tol, hidden_units=self.hidden_units,
                                seed=stage_seed(self.seed, "classifier"))

    def fusion_modes(self) -> list[FusionMode]:
        return [FusionMode(FUSION_ALIASES[m], self.w_min_variant, self.epsilon) for m in self.fusion]

    def equalization(self) -> EqualizationConfig:
        t = self.target_segments
        return EqualizationConfig("auto" if str(t) == "auto" else int(t))

    def experiment_metadata(self) -> dict[str, Any]:
        """Settings that shape results; paths and worker counts are left out."""
        skip = {"dataset", "out", "workers", "synth"}
        meta = {k: v for k, v in asdict(self).items() if k not in skip}
        meta["fusion"] = list(self.fusion)
        return meta

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            if f.name == "synth":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(value)
            lines.append(f"{f.name} = {value}")
        if self.synth is not None:
            for k, v in asdict(self.synth).items():
                if isinstance(v, (tuple, list)):
                    v = ",".join(str(x) for x in v)
                lines.append(f"synth.{k} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(raw: str, template: Any) -> Any:
    if isinstance(template, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidConfig(f"not a boolean: {raw!r}")
    if isinstance(template, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if template and isinstance(template[0], int):
            return tuple(int(p) for p in parts)
        return tuple(parts)
    try:
        return type(template)(raw)
    except (TypeError, ValueError) as e:
        raise InvalidConfig(f"cannot parse {raw!r} as {type(template).__name__}") from e


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def apply_settings(cfg: RunConfig, settings: dict[str, str]) -> RunConfig:
    """Return a copy of ``cfg`` with string-valued ``settings`` applied."""
    known = {f.name: f for f in fields(RunConfig)}
    updates: dict[str, Any] = {}
    synth_updates: dict[str, Any] = {}
    defaults = SynthSpec()
    for key, raw in settings.items():
        if key.startswith("synth."):
            name = key.split(".", 1)[1]
            if not hasattr(defaults, name):
                raise InvalidConfig(f"unknown synth setting {name!r}")
            synth_updates[name] = _coerce(raw, getattr(defaults, name))
        elif key in known and key != "synth":
            updates[key] = _coerce(raw, getattr(cfg, key))
        else:
            raise InvalidConfig(f"unknown config key {key!r}")
    cfg = replace(cfg, **updates)
    if synth_updates:
        cfg = replace(cfg, synth=replace(cfg.synth or defaults, **synth_updates))
    return cfg


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise MissingFile(f"config file not found: {path}") from e
    return apply_settings(base or RunConfig(), parse_config_text(text))


def load_input_dataset(cfg: RunConfig) -> Dataset:
    if cfg.dataset:
        return load_dataset(cfg.dataset)
    if cfg.synth is not None:
        return generate_synthetic(cfg.synth)
    raise InvalidConfig("no dataset path or synthetic spec configured")


@dataclass
class PlanArtifacts:
    target_segments: int
    pca: PcaModel
    clusters: ClusterAssignment | None
    plan: StreamPlan


@dataclass
class RunResult:
    artifacts: PlanArtifacts
    streams: list[TrainedStream]
    report: EvalReport | None = None
    bench_report: BenchReport | None = None
    extras: dict[str, Any] = field(default_factory=dict)


def make_plan(ds: Dataset, cfg: RunConfig) -> PlanArtifacts:
    """Equalize, fit PCA on the training split, cluster, and partition classes into streams."""
    cfg.validate()
    target = cfg.equalization().resolve(ds.train)
    train = ds.train
    pca = fit_pca(equalize_many(train, target), cfg.pca_components)
    chosen = subsample_per_class(ds, cfg.subsample_fraction, stage_seed(cfg.seed, "subsample"))
    points = reduced_features(chosen, pca, target)
    k = cfg.kmeans_k or default_k(ds.n_classes, cfg.streams)
    clusters = run_kmeans(points, cfg.kmeans_config(k), [c.clip_id for c in chosen])
    plan = build_plan(clusters, ds, cfg.streams, cfg.knn_k, cfg.assignment,
                      stage_seed(cfg.seed, "assignment"))
    log.info("plan: k=%d, stream sizes %s, %d voted classes", k, plan.stream_sizes, len(plan.votes))
    return PlanArtifacts(target, pca, clusters, plan)


def train_streams(ds: Dataset, art: PlanArtifacts, cfg: RunConfig) -> list[TrainedStream]:
    train = ds.train
    X = reduced_features(train, art.pca, art.target_segments)
    y = np.array([c.class_id for c in train])
    ccfg = cfg.classifier_config()

    def fit(sid: int) -> TrainedStream:
        return train_stream(art.plan, sid, X, y, ccfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fit, range(art.plan.n_streams)))
    return [fit(sid) for sid in range(art.plan.n_streams)]


def evaluate_run(ds: Dataset, art: PlanArtifacts, streams: list[TrainedStream],
                 cfg: RunConfig) -> EvalReport:
    report = evaluate(ds, art.plan, streams, art.pca, cfg.fusion_modes(),
                      target_segments=art.target_segments,
                      video_aggregation=cfg.video_aggregation,
                      metadata={"config": cfg.experiment_metadata()})
    if cfg.baseline:
        report.baseline_monolithic_accuracy = baseline_monolithic(
            ds, art.pca, cfg.classifier_config(), art.target_segments)
    return report


def run_pipeline(ds: Dataset, cfg: RunConfig, with_eval: bool = True) -> RunResult:
    art = make_plan(ds, cfg)
    streams = train_streams(ds, art, cfg)
    report = evaluate_run(ds, art, streams, cfg) if with_eval else None
    return RunResult(art, streams, report)


# on-disk layout of a run directory

def save_plan_artifacts(art: PlanArtifacts, out: str | Path) -> None:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {out}: {e}") from e
    (out / "preprocess.json").write_text(
        json.dumps({"target_segments": art.target_segments}, sort_keys=True) + "\n", encoding="utf-8")
    art.pca.save(out / "pca.smnp")
    art.clusters.save(out / "clusters.csv", out / "centroids.smnc")
    art.plan.save(out / "plan.json")


def load_plan_artifacts(out: str | Path) -> PlanArtifacts:
    """Reload a saved plan; the cluster assignment itself is not needed downstream."""
    out = Path(out)
    plan_path = out / "plan.json"
    if not plan_path.exists():
        raise MissingFile(f"no plan found at {plan_path}; run 'plan' first")
    meta = json.loads((out / "preprocess.json").read_text(encoding="utf-8"))
    return PlanArtifacts(int(meta["target_segments"]), PcaModel.load(out / "pca.smnp"), None,
                         StreamPlan.load(plan_path))


def save_streams(streams: list[TrainedStream], out: str | Path) -> None:
    models = Path(out) / "models"
    models.mkdir(parents=True, exist_ok=True)
    for ts in streams:
        save_stream(ts, models)


def load_streams(out: str | Path, n_streams: int) -> list[TrainedStream]:
    return [load_stream(Path(out) / "models", sid) for sid in range(n_streams)]
