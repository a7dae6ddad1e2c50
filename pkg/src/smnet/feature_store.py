"""Per-clip feature datasets: manifest I/O, validation and a synthetic generator.

A dataset on disk is one UTF-8 CSV manifest plus one SMNF binary file per clip.
The manifest may open with a ``# smnet: {...}`` JSON comment carrying the
class list, feature dimension and generator seed, so that a saved dataset
reloads field-for-field.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .binfmt import read_features, read_features_header, write_features
from .errors import (
    CorruptHeader,
    DimensionMismatch,
    DuplicateClipId,
    InvalidDataset,
    InvalidSpec,
    IoFailure,
    MissingFile,
    UnknownClass,
)

MANIFEST_FIELDS = ("clip_id", "video_id", "class_name", "split", "frame_count", "feature_file")
MANIFEST_NAME = "manifest.csv"
SPLITS = ("train", "test")
FRAMES_PER_SEGMENT = 16
_META_PREFIX = "# smnet:"


@dataclass
class ClipRecord:
    clip_id: str
    video_id: str
    class_id: int
    split: str
    segments: np.ndarray  # S x d, float32
    frame_count: int

    @property
    def n_segments(self) -> int:
        return int(self.segments.shape[0])


@dataclass
class Dataset:
    clips: list[ClipRecord]
    class_names: list[str]
    raw_dim: int
    rng_seed: int = 0

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def split(self, name: str) -> list[ClipRecord]:
        return [c for c in self.clips if c.split == name]

    @property
    def train(self) -> list[ClipRecord]:
        return self.split("train")

    @property
    def test(self) -> list[ClipRecord]:
        return self.split("test")

    def clip_by_id(self) -> dict[str, ClipRecord]:
        return {c.clip_id: c for c in self.clips}


def validate_dataset(ds: Dataset) -> None:
    """Raise if ``ds`` breaks any dataset invariant."""
    if not ds.clips:
        raise InvalidDataset("dataset has no clips")
    if not ds.class_names:
        raise InvalidDataset("dataset has no classes")
    seen: set[str] = set()
    has_split = {name: set() for name in SPLITS}
    for clip in ds.clips:
        if clip.clip_id in seen:
            raise DuplicateClipId(f"duplicate clip_id {clip.clip_id!r}")
        seen.add(clip.clip_id)
        if not 0 <= clip.class_id < ds.n_classes:
            raise UnknownClass(f"clip {clip.clip_id!r} has class_id {clip.class_id}")
        if clip.split not in SPLITS:
            raise InvalidDataset(f"clip {clip.clip_id!r} has split {clip.split!r}")
        if clip.segments.ndim != 2 or clip.segments.shape[0] < 1:
            raise InvalidDataset(f"clip {clip.clip_id!r} has no segments")
        if clip.segments.shape[1] != ds.raw_dim:
            raise DimensionMismatch(
                f"clip {clip.clip_id!r} has dim {clip.segments.shape[1]}, dataset dim {ds.raw_dim}"
            )
        if clip.frame_count < 1:
            raise InvalidDataset(f"clip {clip.clip_id!r} has frame_count {clip.frame_count}")
        has_split[clip.split].add(clip.class_id)
    for name in SPLITS:
        missing = sorted(set(range(ds.n_classes)) - has_split[name])
        if missing:
            raise InvalidDataset(f"classes {missing[:5]} have no {name} clips")


def _parse_meta(lines: list[str]) -> dict:
    for line in lines:
        if line.startswith(_META_PREFIX):
            try:
                return json.loads(line[len(_META_PREFIX):])
            except json.JSONDecodeError as e:
                raise CorruptHeader(f"unreadable manifest metadata: {e}") from e
    return {}


def load_dataset(manifest_path: str | Path) -> Dataset:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise MissingFile(f"manifest not found: {manifest_path}") from e
    except OSError as e:
        raise IoFailure(f"cannot read manifest {manifest_path}: {e}") from e

    lines = text.splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    meta = _parse_meta(comments)
    reader = csv.DictReader(body)
    if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_FIELDS:
        raise CorruptHeader(f"manifest header must be {','.join(MANIFEST_FIELDS)}")
    rows = list(reader)

    if "class_names" in meta:
        class_names = list(meta["class_names"])
    else:
        class_names = sorted({r["class_name"] for r in rows})
    class_index = {name: i for i, name in enumerate(class_names)}
    raw_dim = meta.get("raw_dim")

    root = manifest_path.parent
    clips: list[ClipRecord] = []
    seen: set[str] = set()
    for row in rows:
        clip_id = row["clip_id"]
        if clip_id in seen:
            raise DuplicateClipId(f"duplicate clip_id {clip_id!r}")
        seen.add(clip_id)
        if row["class_name"] not in class_index:
            raise UnknownClass(f"clip {clip_id!r}: unknown class {row['class_name']!r}")
        path = root / row["feature_file"]
        if not path.exists():
            raise MissingFile(f"clip {clip_id!r}: feature file {path} not found")
        _, cols = read_features_header(path)
        if raw_dim is None:
            raw_dim = cols
        if cols != raw_dim:
            raise DimensionMismatch(f"clip {clip_id!r}: feature dim {cols} != manifest dim {raw_dim}")
        segments = read_features(path)
        frames = row["frame_count"].strip()
        frame_count = int(frames) if frames else FRAMES_PER_SEGMENT * segments.shape[0]
        clips.append(ClipRecord(
            clip_id=clip_id,
            video_id=row["video_id"],
            class_id=class_index[row["class_name"]],
            split=row["split"],
            segments=segments,
            frame_count=frame_count,
        ))
    ds = Dataset(clips=clips, class_names=class_names, raw_dim=int(raw_dim or 0),
                 rng_seed=int(meta.get("rng_seed", 0)))
    validate_dataset(ds)
    return ds


def save_dataset(ds: Dataset, directory: str | Path) -> Path:
    """Write ``ds`` as manifest.csv plus one ``.smnf`` file per clip; return the manifest path."""
    validate_dataset(ds)
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise IoFailure(f"cannot create {directory}: {e}") from e

    meta = {"class_names": ds.class_names, "raw_dim": ds.raw_dim, "rng_seed": ds.rng_seed}
    manifest = directory / MANIFEST_NAME
    try:
        with manifest.open("w", encoding="utf-8", newline="") as fh:
            fh.write(_META_PREFIX + " " + json.dumps(meta, sort_keys=True) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MANIFEST_FIELDS)
            for i, clip in enumerate(ds.clips):
                fname = f"clip_{i:06d}.smnf"
                write_features(directory / fname, clip.segments)
                writer.writerow([clip.clip_id, clip.video_id, ds.class_names[clip.class_id],
                                 clip.split, clip.frame_count, fname])
    except OSError as e:
        raise IoFailure(f"cannot write dataset to {directory}: {e}") from e
    return manifest


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic grouped-Gaussian dataset.

    Distances are in units of ``noise_sigma``. Group centers sit on scaled
    vertices of a random orthonormal frame, so every pair of groups is exactly
    ``group_separation`` apart; each class mean is its group center plus an
    offset of length ``within_group_spread`` in a random direction.
    """

    num_groups: int = 4
    classes_per_group: int = 4
    clips_per_class: int = 10
    dim: int = 16
    group_separation: float = 10.0
    within_group_spread: float = 2.0
    noise_sigma: float = 1.0
    segments_per_clip: tuple[int, int] = (1, 3)
    seed: int = 0
    clips_per_video: int = 1
    test_fraction: float = 0.2

    @property
    def n_classes(self) -> int:
        return self.num_groups * self.classes_per_group

    def validate(self) -> None:
        if self.num_groups < 1 or self.classes_per_group < 1:
            raise InvalidSpec("num_groups and classes_per_group must be >= 1")
        if self.clips_per_class < 2:
            raise InvalidSpec("clips_per_class must be >= 2")
        if self.dim < 1:
            raise InvalidSpec("dim must be >= 1")
        if self.num_groups > self.dim:
            raise InvalidSpec("num_groups must not exceed dim (group centers use an orthonormal frame)")
        if not self.group_separation > self.within_group_spread > 0:
            raise InvalidSpec("need group_separation > within_group_spread > 0")
        if not self.noise_sigma > 0:
            raise InvalidSpec("noise_sigma must be positive")
        s_min, s_max = self.segments_per_clip
        if not 1 <= s_min <= s_max:
            raise InvalidSpec("segments_per_clip must satisfy 1 <= S_min <= S_max")
        if self.clips_per_video < 1:
            raise InvalidSpec("clips_per_video must be >= 1")
        if self.clips_per_class < 2 * self.clips_per_video:
            raise InvalidSpec("each class needs at least two videos (one per split)")
        if not 0 < self.test_fraction < 1:
            raise InvalidSpec("test_fraction must lie in (0, 1)")


def _layout(spec: SynthSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    sigma = spec.noise_sigma
    frame, _ = np.linalg.qr(rng.standard_normal((spec.dim, spec.dim)))
    scale = spec.group_separation * sigma / math.sqrt(2.0)
    centers = frame[:, :spec.num_groups].T * scale
    directions = rng.standard_normal((spec.n_classes, spec.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    groups = np.repeat(np.arange(spec.num_groups), spec.classes_per_group)
    means = centers[groups] + directions * spec.within_group_spread * sigma
    return centers, means


def synthetic_layout(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray]:
    """Group centers (G x d) and class means (M x d) that ``generate_synthetic`` uses."""
    spec.validate()
    return _layout(spec, np.random.default_rng(spec.seed))


def generate_synthetic(spec: SynthSpec) -> Dataset:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    _, means = _layout(spec, rng)
    s_min, s_max = spec.segments_per_clip
    n_videos = math.ceil(spec.clips_per_class / spec.clips_per_video)

    clips: list[ClipRecord] = []
    for c in range(spec.n_classes):
        n_test = min(max(1, round(spec.test_fraction * n_videos)), n_videos - 1)
        order = rng.permutation(n_videos)
        test_videos = set(order[:n_test].tolist())
        for j in range(spec.clips_per_class):
            video = j // spec.clips_per_video
            n_seg = int(rng.integers(s_min, s_max + 1))
            noise = rng.standard_normal((n_seg, spec.dim)) * spec.noise_sigma
            segments = (means[c] + noise).astype(np.float32)
            clips.append(ClipRecord(
                clip_id=f"c{c:03d}_v{video:03d}_k{j:03d}",
                video_id=f"c{c:03d}_v{video:03d}",
                class_id=c,
                split="test" if video in test_videos else "train",
                segments=segments,
                frame_count=FRAMES_PER_SEGMENT * n_seg,
            ))
    names = [f"class_{c:03d}" for c in range(spec.n_classes)]
    ds = Dataset(clips=clips, class_names=names, raw_dim=spec.dim, rng_seed=spec.seed)
    validate_dataset(ds)
    return ds


def group_of_class(spec: SynthSpec) -> np.ndarray:
    """Ground-truth group id for every class of a synthetic dataset."""
    return np.repeat(np.arange(spec.num_groups), spec.classes_per_group)
