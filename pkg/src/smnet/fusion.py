"""Late fusion of per-stream probability vectors into one dataset-wide decision.

Three rules:

* ``w_raw``  - the largest raw probability over all streams.
* ``w_mean`` - every probability scaled by the inverse distance from the test
  vector to that class's training mean, then the global maximum.
* ``w_min``  - per-stream raw winners, rescored by the distance to their
  nearest training member (``weighted_product``), or decided by that distance
  alone (``pure_min_distance``).

All ties resolve to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidConfig, MissingClassMean, MissingMemberBank, RosterMismatch
from .partition import StreamPlan

MODES = ("w_raw", "w_mean", "w_min")
W_MIN_VARIANTS = ("weighted_product", "pure_min_distance")
DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True)
class FusionMode:
    name: str = "w_mean"
    w_min_variant: str = "weighted_product"
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self) -> None:
        if self.name not in MODES:
            raise InvalidConfig(f"unknown fusion mode {self.name!r}")
        if self.w_min_variant not in W_MIN_VARIANTS:
            raise InvalidConfig(f"unknown w_min variant {self.w_min_variant!r}")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")


@dataclass(frozen=True)
class FusionDecision:
    predicted_class: int
    per_stream_winner: tuple[tuple[int, float], ...]
    score_breakdown: dict[int, tuple[float, float, float]]  # class -> (raw prob, weight, score)

    @property
    def score(self) -> float:
        return self.score_breakdown[self.predicted_class][2]


def _best(scores: Mapping[int, float]) -> int:
    return min(scores, key=lambda c: (-scores[c], c))


def _check(stream_probs: Sequence[np.ndarray], plan: StreamPlan) -> list[np.ndarray]:
    if len(stream_probs) != plan.n_streams:
        raise RosterMismatch(f"{len(stream_probs)} probability vectors for {plan.n_streams} streams")
    out = []
    for sid, (probs, roster) in enumerate(zip(stream_probs, plan.stream_rosters)):
        probs = np.asarray(probs, dtype=np.float64).reshape(-1)
        if probs.size != len(roster):
            raise RosterMismatch(f"stream {sid}: {probs.size} probabilities for {len(roster)} classes")
        out.append(probs)
    return out


def _raw_winners(probs: list[np.ndarray], plan: StreamPlan) -> list[tuple[int, float]]:
    winners = []
    for p, roster in zip(probs, plan.stream_rosters):
        c = _best({cls: float(p[i]) for i, cls in enumerate(roster)})
        winners.append((c, float(p[roster.index(c)])))
    return winners


def fuse_raw(stream_probs: Sequence[np.ndarray], plan: StreamPlan) -> FusionDecision:
    probs = _check(stream_probs, plan)
    winners = _raw_winners(probs, plan)
    breakdown = {c: (s, 1.0, s) for c, s in winners}
    best = _best({c: s for c, s in winners})
    return FusionDecision(best, tuple(winners), breakdown)


def fuse_mean_weighted(stream_probs: Sequence[np.ndarray], plan: StreamPlan,
                       class_means: Mapping[int, np.ndarray], test_vector: np.ndarray,
                       epsilon: float = DEFAULT_EPSILON) -> FusionDecision:
    probs = _check(stream_probs, plan)
    v = np.asarray(test_vector, dtype=np.float64)
    breakdown: dict[int, tuple[float, float, float]] = {}
    winners = []
    for p, roster in zip(probs, plan.stream_rosters):
        stream_scores = {}
        for i, c in enumerate(roster):
            if c not in class_means:
                raise MissingClassMean(f"no mean vector for class {c}")
            w = 1.0 / max(epsilon, float(np.linalg.norm(v - class_means[c])))
            breakdown[c] = (float(p[i]), w, float(p[i]) * w)
            stream_scores[c] = float(p[i]) * w
        c = _best(stream_scores)
        winners.append((c, stream_scores[c]))
    best = _best({c: s for c, (_, _, s) in breakdown.items()})
    return FusionDecision(best, tuple(winners), breakdown)


def min_member_distance(bank: np.ndarray, v: np.ndarray) -> float:
    diff = np.asarray(bank, dtype=np.float64) - v
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def fuse_min_weighted(stream_probs: Sequence[np.ndarray], plan: StreamPlan,
                      member_bank: Mapping[int, np.ndarray], test_vector: np.ndarray,
                      variant: str = "weighted_product",
                      epsilon: float = DEFAULT_EPSILON) -> FusionDecision:
    if variant not in W_MIN_VARIANTS:
        raise InvalidConfig(f"unknown w_min variant {variant!r}")
    probs = _check(stream_probs, plan)
    v = np.asarray(test_vector, dtype=np.float64)
    raw = _raw_winners(probs, plan)
    distances: dict[int, float] = {}
    breakdown: dict[int, tuple[float, float, float]] = {}
    winners = []
    for c, p in raw:
        if c not in member_bank or len(member_bank[c]) == 0:
            raise MissingMemberBank(f"no training members banked for class {c}")
        d = min_member_distance(member_bank[c], v)
        w = 1.0 / max(epsilon, d)
        distances[c] = d
        score = p * w if variant == "weighted_product" else w
        breakdown[c] = (p, w, score)
        winners.append((c, score))
    if variant == "weighted_product":
        best = _best({c: s for c, (_, _, s) in breakdown.items()})
    else:
        best = min(distances, key=lambda c: (distances[c], c))
    return FusionDecision(best, tuple(winners), breakdown)


def fuse(mode: FusionMode, stream_probs: Sequence[np.ndarray], plan: StreamPlan,
         test_vector: np.ndarray, class_means: Mapping[int, np.ndarray] | None = None,
         member_bank: Mapping[int, np.ndarray] | None = None) -> FusionDecision:
    if mode.name == "w_raw":
        return fuse_raw(stream_probs, plan)
    if mode.name == "w_mean":
        if class_means is None:
            raise MissingClassMean("w_mean needs class means")
        return fuse_mean_weighted(stream_probs, plan, class_means, test_vector, mode.epsilon)
    if member_bank is None:
        raise MissingMemberBank("w_min needs a member bank")
    return fuse_min_weighted(stream_probs, plan, member_bank, test_vector,
                             mode.w_min_variant, mode.epsilon)
