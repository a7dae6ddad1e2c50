"""Little-endian binary containers shared by the feature, PCA and centroid files.

Every container starts with a 4-byte magic and a u16 format version.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptHeader, IoFailure, MissingFile

FORMAT_VERSION = 1

SMNF_MAGIC = b"SMNF"  # per-clip segment features, float32
SMNP_MAGIC = b"SMNP"  # fitted PCA model, float64
SMNC_MAGIC = b"SMNC"  # k-means centroids, float64

_MATRIX_HEADER = struct.Struct("<4sHII")


def _read_bytes(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except FileNotFoundError as e:
        raise MissingFile(f"file not found: {path}") from e
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e


def _write_bytes(path: Path, payload: bytes) -> None:
    try:
        Path(path).write_bytes(payload)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def pack_matrix(magic: bytes, matrix: np.ndarray, dtype: str) -> bytes:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    rows, cols = matrix.shape
    header = _MATRIX_HEADER.pack(magic, FORMAT_VERSION, rows, cols)
    return header + np.ascontiguousarray(matrix, dtype=dtype).tobytes()


def unpack_matrix(magic: bytes, raw: bytes, dtype: str, source: str = "<bytes>") -> np.ndarray:
    if len(raw) < _MATRIX_HEADER.size:
        raise CorruptHeader(f"{source}: truncated header")
    got_magic, version, rows, cols = _MATRIX_HEADER.unpack_from(raw)
    if got_magic != magic:
        raise CorruptHeader(f"{source}: bad magic {got_magic!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptHeader(f"{source}: unsupported version {version}")
    itemsize = np.dtype(dtype).itemsize
    expected = _MATRIX_HEADER.size + rows * cols * itemsize
    if len(raw) != expected:
        raise CorruptHeader(f"{source}: payload is {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype=dtype, offset=_MATRIX_HEADER.size, count=rows * cols)
    return data.reshape(rows, cols).astype(dtype.lstrip("<"), copy=True)


def write_features(path: Path, segments: np.ndarray) -> None:
    """Write an S x d segment matrix as an SMNF file (float32 LE, row-major)."""
    _write_bytes(path, pack_matrix(SMNF_MAGIC, segments, "<f4"))


def read_features(path: Path) -> np.ndarray:
    return unpack_matrix(SMNF_MAGIC, _read_bytes(path), "<f4", str(path))


def read_features_header(path: Path) -> tuple[int, int]:
    raw = _read_bytes(path)
    if len(raw) < _MATRIX_HEADER.size:
        raise CorruptHeader(f"{path}: truncated header")
    magic, version, rows, cols = _MATRIX_HEADER.unpack_from(raw)
    if magic != SMNF_MAGIC or version != FORMAT_VERSION:
        raise CorruptHeader(f"{path}: bad magic/version")
    return rows, cols


def write_centroids(path: Path, centroids: np.ndarray) -> None:
    _write_bytes(path, pack_matrix(SMNC_MAGIC, centroids, "<f8"))


def read_centroids(path: Path) -> np.ndarray:
    return unpack_matrix(SMNC_MAGIC, _read_bytes(path), "<f8", str(path))


_PCA_HEADER = struct.Struct("<4sHII")


def write_pca(path: Path, mean: np.ndarray, components: np.ndarray,
              explained_variance: np.ndarray) -> None:
    p, d_flat = components.shape
    payload = (
        _PCA_HEADER.pack(SMNP_MAGIC, FORMAT_VERSION, p, d_flat)
        + np.ascontiguousarray(mean, dtype="<f8").tobytes()
        + np.ascontiguousarray(components, dtype="<f8").tobytes()
        + np.ascontiguousarray(explained_variance, dtype="<f8").tobytes()
    )
    _write_bytes(path, payload)


def read_pca(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    raw = _read_bytes(path)
    if len(raw) < _PCA_HEADER.size:
        raise CorruptHeader(f"{path}: truncated header")
    magic, version, p, d_flat = _PCA_HEADER.unpack_from(raw)
    if magic != SMNP_MAGIC:
        raise CorruptHeader(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptHeader(f"{path}: unsupported version {version}")
    n_values = d_flat + p * d_flat + p
    if len(raw) != _PCA_HEADER.size + 8 * n_values:
        raise CorruptHeader(f"{path}: payload size does not match header")
    values = np.frombuffer(raw, dtype="<f8", offset=_PCA_HEADER.size).astype(np.float64)
    mean = values[:d_flat]
    components = values[d_flat:d_flat + p * d_flat].reshape(p, d_flat)
    explained = values[d_flat + p * d_flat:]
    return mean, components, explained
