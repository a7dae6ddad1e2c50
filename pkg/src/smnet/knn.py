"""Exact brute-force k-nearest-neighbour search under Euclidean distance."""

from __future__ import annotations

import numpy as np


def squared_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (n_queries, n_points)."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    x = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d2 = (q * q).sum(1)[:, None] - 2.0 * q @ x.T + (x * x).sum(1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def knn_indices(queries: np.ndarray, points: np.ndarray, k: int,
                exclude_self: bool = False) -> np.ndarray:
    """Indices of the ``k`` nearest ``points`` for every query row.

    Ties are broken by lower point index. With ``exclude_self`` the queries
    must be the points themselves and each row skips its own index.
    """
    d2 = squared_distances(queries, points)
    n_points = d2.shape[1]
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
        n_points -= 1
    k = min(k, n_points)
    # stable sort keeps lower indices first among equal distances
    order = np.argsort(d2, axis=1, kind="stable")
    return order[:, :k]
