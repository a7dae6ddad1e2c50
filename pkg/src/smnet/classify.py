"""Per-stream probabilistic classifiers trained by full-batch gradient descent.

Two model kinds share one interface: ``softmax`` (multinomial logistic
regression, the reference) and ``mlp1`` (one ReLU hidden layer). Inputs are
standardized per feature with statistics from the stream's own training data.

An RBF-kernel SVM with Platt-scaled probabilities would slot in behind the
same ``predict_proba`` contract; its reference settings are kernel=rbf,
C=10, gamma=1e-4.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DivergedLoss,
    EmptyRosterClass,
    EmptyTestSet,
    InvalidConfig,
    IoFailure,
    MissingFile,
    RosterMismatch,
)
from .partition import StreamPlan

KINDS = ("softmax", "mlp1")


@dataclass(frozen=True)
class ClassifierConfig:
    kind: str = "softmax"
    l2_lambda: float = 1e-4
    learning_rate: float = 0.1
    max_epochs: int = 500
    early_stop_tol: float = 1e-7
    hidden_units: int = 128
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidConfig(f"unknown classifier kind {self.kind!r}")
        if self.l2_lambda < 0:
            raise InvalidConfig("l2_lambda must be nonnegative")
        if self.learning_rate <= 0 or self.max_epochs < 1 or self.hidden_units < 1:
            raise InvalidConfig("learning_rate, max_epochs and hidden_units must be positive")
        if self.early_stop_tol < 0:
            raise InvalidConfig("early_stop_tol must be nonnegative")


@dataclass
class TrainedStream:
    stream_id: int
    roster: tuple[int, ...]
    config: ClassifierConfig
    params: dict[str, np.ndarray]
    input_mean: np.ndarray
    input_scale: np.ndarray
    class_means: np.ndarray                  # (len(roster), p), roster order
    member_bank: dict[int, np.ndarray]       # class id -> (n_c, p) training vectors
    loss_curve: tuple[float, ...] = field(default_factory=tuple)

    @property
    def input_dim(self) -> int:
        return int(self.input_mean.shape[0])

    def class_mean(self, class_id: int) -> np.ndarray:
        return self.class_means[self.roster.index(class_id)]


def _param_shapes(cfg: ClassifierConfig, p: int, n_out: int) -> dict[str, tuple[int, ...]]:
    if cfg.kind == "softmax":
        return {"W": (p, n_out), "b": (n_out,)}
    h = cfg.hidden_units
    return {"W1": (p, h), "b1": (h,), "W2": (h, n_out), "b2": (n_out,)}


def init_params(cfg: ClassifierConfig, p: int, n_out: int) -> dict[str, np.ndarray]:
    shapes = _param_shapes(cfg, p, n_out)
    if cfg.kind == "softmax":
        return {name: np.zeros(shape) for name, shape in shapes.items()}
    rng = np.random.default_rng(cfg.seed)
    return {
        "W1": rng.standard_normal(shapes["W1"]) * np.sqrt(2.0 / p),
        "b1": np.zeros(shapes["b1"]),
        "W2": rng.standard_normal(shapes["W2"]) * np.sqrt(1.0 / cfg.hidden_units),
        "b2": np.zeros(shapes["b2"]),
    }


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _logits(kind: str, params: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    if kind == "softmax":
        return X @ params["W"] + params["b"]
    hidden = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return hidden @ params["W2"] + params["b2"]


def loss_and_grad(kind: str, params: dict[str, np.ndarray], X: np.ndarray, y: np.ndarray,
                  l2_lambda: float) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus (l2_lambda / 2) * squared norm of the weight matrices.

    ``y`` holds roster indices (0..C-1), ``X`` is already standardized.
    """
    n = X.shape[0]
    if kind == "softmax":
        probs = _softmax(X @ params["W"] + params["b"])
        loss = -np.log(probs[np.arange(n), y] + 1e-300).mean()
        loss += 0.5 * l2_lambda * np.sum(params["W"] ** 2)
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        return float(loss), {
            "W": X.T @ dlogits + l2_lambda * params["W"],
            "b": dlogits.sum(axis=0),
        }
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    probs = _softmax(hidden @ params["W2"] + params["b2"])
    loss = -np.log(probs[np.arange(n), y] + 1e-300).mean()
    loss += 0.5 * l2_lambda * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dhidden = (dlogits @ params["W2"].T) * (pre > 0)
    return float(loss), {
        "W1": X.T @ dhidden + l2_lambda * params["W1"],
        "b1": dhidden.sum(axis=0),
        "W2": hidden.T @ dlogits + l2_lambda * params["W2"],
        "b2": dlogits.sum(axis=0),
    }


def _standardizer(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


def train_classifier(roster: Sequence[int], X: np.ndarray, y: np.ndarray,
                     cfg: ClassifierConfig, stream_id: int = 0) -> TrainedStream:
    """Fit a classifier over ``roster`` on the rows of ``X`` whose label is in the roster."""
    cfg.validate()
    roster = tuple(int(c) for c in roster)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    keep = np.isin(y, roster)
    X, y = X[keep], y[keep]
    index = {c: i for i, c in enumerate(roster)}
    for c in roster:
        if not np.any(y == c):
            raise EmptyRosterClass(f"stream {stream_id}: class {c} has no training samples")
    targets = np.array([index[int(c)] for c in y])

    mean, scale = _standardizer(X)
    Z = (X - mean) / scale
    params = init_params(cfg, X.shape[1], len(roster))
    curve: list[float] = []
    prev = np.inf
    for _ in range(cfg.max_epochs):
        loss, grads = loss_and_grad(cfg.kind, params, Z, targets, cfg.l2_lambda)
        if not np.isfinite(loss):
            raise DivergedLoss(f"stream {stream_id}: non-finite loss after {len(curve)} epochs")
        curve.append(loss)
        if abs(prev - loss) < cfg.early_stop_tol:
            break
        prev = loss
        for name in params:
            params[name] = params[name] - cfg.learning_rate * grads[name]

    bank = {c: X[y == c].copy() for c in roster}
    return TrainedStream(
        stream_id=stream_id,
        roster=roster,
        config=cfg,
        params=params,
        input_mean=mean,
        input_scale=scale,
        class_means=np.stack([bank[c].mean(axis=0) for c in roster]),
        member_bank=bank,
        loss_curve=tuple(curve),
    )


def train_stream(plan: StreamPlan, stream_id: int, train_features: np.ndarray,
                 train_labels: np.ndarray, cfg: ClassifierConfig) -> TrainedStream:
    if not 0 <= stream_id < plan.n_streams:
        raise RosterMismatch(f"plan has no stream {stream_id}")
    return train_classifier(plan.stream_rosters[stream_id], train_features, train_labels,
                            cfg, stream_id)


def predict_proba(ts: TrainedStream, v: np.ndarray) -> np.ndarray:
    """Class probabilities over ``ts.roster`` for one vector or a stack of rows."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != ts.input_dim:
        raise DimensionMismatch(f"input length {v.shape[-1]} != model input {ts.input_dim}")
    z = (v - ts.input_mean) / ts.input_scale
    return _softmax(_logits(ts.config.kind, ts.params, z))


def predict(ts: TrainedStream, X: np.ndarray) -> np.ndarray:
    """Roster class id with highest probability; ties go to the lowest roster index."""
    probs = np.atleast_2d(predict_proba(ts, X))
    return np.asarray(ts.roster)[np.argmax(probs, axis=1)]


def stream_accuracy(ts: TrainedStream, X: np.ndarray, y: np.ndarray) -> float:
    """Accuracy on the rows whose label belongs to the stream's roster."""
    y = np.asarray(y)
    keep = np.isin(y, ts.roster)
    if not keep.any():
        raise EmptyTestSet(f"stream {ts.stream_id}: no test clips in roster")
    return float(np.mean(predict(ts, np.asarray(X)[keep]) == y[keep]))


# persistence: JSON header + float64 LE blob holding params, standardizer,
# class means and member bank in the order listed in the header


def _blob_layout(ts: TrainedStream) -> list[tuple[str, np.ndarray]]:
    parts = [(f"param:{k}", v) for k, v in ts.params.items()]
    parts += [("input_mean", ts.input_mean), ("input_scale", ts.input_scale),
              ("class_means", ts.class_means)]
    parts += [(f"bank:{c}", ts.member_bank[c]) for c in ts.roster]
    return parts


def save_stream(ts: TrainedStream, directory: str | Path) -> tuple[Path, Path]:
    directory = Path(directory)
    layout = _blob_layout(ts)
    header = {
        "stream_id": ts.stream_id,
        "kind": ts.config.kind,
        "roster": list(ts.roster),
        "config": asdict(ts.config),
        "arrays": [[name, list(arr.shape)] for name, arr in layout],
        "loss_curve": list(ts.loss_curve),
    }
    json_path = directory / f"stream_{ts.stream_id}.json"
    bin_path = directory / f"stream_{ts.stream_id}.bin"
    try:
        json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        bin_path.write_bytes(b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for _, a in layout))
    except OSError as e:
        raise IoFailure(f"cannot write stream {ts.stream_id}: {e}") from e
    return json_path, bin_path


def load_stream(directory: str | Path, stream_id: int) -> TrainedStream:
    directory = Path(directory)
    json_path = directory / f"stream_{stream_id}.json"
    bin_path = directory / f"stream_{stream_id}.bin"
    if not json_path.exists() or not bin_path.exists():
        raise MissingFile(f"model files for stream {stream_id} not found in {directory}")
    header = json.loads(json_path.read_text(encoding="utf-8"))
    flat = np.frombuffer(bin_path.read_bytes(), dtype="<f8").astype(np.float64)
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in header["arrays"]:
        size = int(np.prod(shape)) if shape else 1
        arrays[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    if offset != flat.size:
        raise IoFailure(f"stream {stream_id}: blob size does not match header")
    roster = tuple(header["roster"])
    return TrainedStream(
        stream_id=int(header["stream_id"]),
        roster=roster,
        config=ClassifierConfig(**header["config"]),
        params={k.split(":", 1)[1]: v for k, v in arrays.items() if k.startswith("param:")},
        input_mean=arrays["input_mean"],
        input_scale=arrays["input_scale"],
        class_means=arrays["class_means"],
        member_bank={c: arrays[f"bank:{c}"] for c in roster},
        loss_curve=tuple(header["loss_curve"]),
    )
