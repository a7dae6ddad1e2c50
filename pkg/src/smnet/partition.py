"""Class-to-stream partitioning.

Clusters of training clips are turned into class affiliations; classes with
no majority cluster are settled by nearest-neighbour Consensus Voting; then
Decreasing Percentages deals each cluster's classes across the streams so the
most strongly affiliated (most mutually similar) classes never share one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .clustering import ClusterAssignment
from .errors import EmptyClass, InvalidConfig, InvalidCounts, NoCandidateNeighbors
from .feature_store import Dataset
from .knn import knn_indices

DEFAULT_KNN_K = 100
ASSIGNMENTS = ("cvdp", "random")


@dataclass(frozen=True)
class ClassAffiliation:
    class_id: int
    histogram: dict[int, int]   # cluster id -> clustered member count
    majority_cluster: int
    affiliation_pct: float      # share of members in majority_cluster, 0..100
    is_problematic: bool

    @property
    def n_members(self) -> int:
        return sum(self.histogram.values())


AffiliationTable = dict[int, ClassAffiliation]


@dataclass(frozen=True)
class VoteRecord:
    class_id: int
    member_votes: tuple[tuple[str, int | None], ...]  # (clip_id, cluster or None for abstain)
    tally: dict[int, int]
    winning_cluster: int
    fallback: bool = False  # every member abstained

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "member_votes": [[cid, vote] for cid, vote in self.member_votes],
            "tally": [[c, n] for c, n in sorted(self.tally.items())],
            "winning_cluster": self.winning_cluster,
            "fallback": self.fallback,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoteRecord":
        return cls(
            class_id=int(d["class_id"]),
            member_votes=tuple((cid, None if v is None else int(v)) for cid, v in d["member_votes"]),
            tally={int(c): int(n) for c, n in d["tally"]},
            winning_cluster=int(d["winning_cluster"]),
            fallback=bool(d["fallback"]),
        )


@dataclass(frozen=True)
class StreamPlan:
    n_streams: int
    class_to_stream: dict[int, int]
    class_to_cluster: dict[int, int]
    stream_rosters: tuple[tuple[int, ...], ...]  # ascending class ids per stream
    cluster_orderings: dict[int, tuple[tuple[int, float], ...]]  # descending affiliation
    votes: tuple[VoteRecord, ...] = ()
    assignment: str = "cvdp"

    @property
    def n_classes(self) -> int:
        return len(self.class_to_stream)

    @property
    def stream_sizes(self) -> list[int]:
        return [len(r) for r in self.stream_rosters]

    def to_dict(self) -> dict:
        return {
            "N": self.n_streams,
            "assignment": self.assignment,
            "clusters": [
                {"id": cid, "classes": [{"class_id": c, "affiliation_pct": pct} for c, pct in order]}
                for cid, order in sorted(self.cluster_orderings.items())
            ],
            "streams": [list(r) for r in self.stream_rosters],
            "votes": [v.to_dict() for v in self.votes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "StreamPlan":
        rosters = tuple(tuple(int(c) for c in r) for r in d["streams"])
        orderings = {
            int(cl["id"]): tuple((int(e["class_id"]), float(e["affiliation_pct"])) for e in cl["classes"])
            for cl in d["clusters"]
        }
        return cls(
            n_streams=int(d["N"]),
            class_to_stream={c: s for s, r in enumerate(rosters) for c in r},
            class_to_cluster={c: cid for cid, order in orderings.items() for c, _ in order},
            stream_rosters=rosters,
            cluster_orderings=orderings,
            votes=tuple(VoteRecord.from_dict(v) for v in d.get("votes", [])),
            assignment=d.get("assignment", "cvdp"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "StreamPlan":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _clustered_classes(ca: ClusterAssignment, ds: Dataset) -> np.ndarray:
    class_of = {c.clip_id: c.class_id for c in ds.clips}
    return np.array([class_of[cid] for cid in ca.clip_ids], dtype=int)


def _affiliation(class_id: int, histogram: dict[int, int], cluster: int | None = None) -> ClassAffiliation:
    total = sum(histogram.values())
    if cluster is None:
        # most members; ties go to the lowest cluster id
        cluster = min(histogram, key=lambda c: (-histogram[c], c))
    pct = 100.0 * histogram.get(cluster, 0) / total
    return ClassAffiliation(class_id, dict(sorted(histogram.items())), cluster, pct, pct < 50.0)


def build_affiliations(ca: ClusterAssignment, ds: Dataset) -> AffiliationTable:
    """Per-class cluster histogram, majority cluster and affiliation percentage.

    A class is problematic when fewer than half of its clustered members sit
    in its majority cluster; exactly 50% is not problematic.
    """
    classes = _clustered_classes(ca, ds)
    table: AffiliationTable = {}
    for class_id in range(ds.n_classes):
        members = ca.labels[classes == class_id]
        if members.size == 0:
            raise EmptyClass(f"class {class_id} has no clustered members")
        clusters, counts = np.unique(members, return_counts=True)
        hist = {int(c): int(n) for c, n in zip(clusters, counts)}
        table[class_id] = _affiliation(class_id, hist)
    return table


def consensus_vote(pc: int, ca: ClusterAssignment, ds: Dataset, aff: AffiliationTable,
                   knn_k: int = DEFAULT_KNN_K) -> VoteRecord:
    """Settle the cluster of one problematic class by member-wise neighbour votes.

    Each member looks up its ``knn_k`` nearest clustered clips among the
    non-problematic classes whose majority cluster is one of the candidate
    clusters (those in the problematic class's own histogram). A member votes
    for the candidate holding strictly the most of its neighbours and abstains
    on a tie. The class goes to the candidate with most votes; ties fall to
    the larger member count in that cluster, then the lowest cluster id.
    """
    if knn_k < 1:
        raise InvalidConfig("knn_k must be >= 1")
    entry = aff[pc]
    candidates = sorted(entry.histogram)
    classes = _clustered_classes(ca, ds)

    pool_classes = [c for c, a in aff.items()
                    if not a.is_problematic and a.majority_cluster in entry.histogram]
    pool_mask = np.isin(classes, pool_classes)
    if not pool_mask.any():
        raise NoCandidateNeighbors(
            f"class {pc}: no non-problematic members in candidate clusters {candidates}"
        )
    pool_points = ca.points[pool_mask]
    pool_cluster = np.array([aff[c].majority_cluster for c in classes[pool_mask]])

    member_rows = np.flatnonzero(classes == pc)
    neighbours = knn_indices(ca.points[member_rows], pool_points, knn_k)

    tally = {c: 0 for c in candidates}
    votes: list[tuple[str, int | None]] = []
    for row, nbrs in zip(member_rows, neighbours):
        counts = np.array([(pool_cluster[nbrs] == c).sum() for c in candidates])
        top = counts.max()
        vote = candidates[int(np.argmax(counts))] if (counts == top).sum() == 1 else None
        if vote is not None:
            tally[vote] += 1
        votes.append((ca.clip_ids[row], vote))

    if all(v is None for _, v in votes):
        winner, fallback = entry.majority_cluster, True
    else:
        winner = min(candidates, key=lambda c: (-tally[c], -entry.histogram[c], c))
        fallback = False
    return VoteRecord(pc, tuple(votes), tally, winner, fallback)


def _orderings(aff: AffiliationTable) -> dict[int, tuple[tuple[int, float], ...]]:
    by_cluster: dict[int, list[tuple[int, float]]] = {}
    for class_id, a in aff.items():
        by_cluster.setdefault(a.majority_cluster, []).append((class_id, a.affiliation_pct))
    return {
        cid: tuple(sorted(members, key=lambda e: (-e[1], e[0])))
        for cid, members in sorted(by_cluster.items())
    }


def _finish(n_streams: int, class_to_stream: dict[int, int], aff: AffiliationTable,
            votes: tuple[VoteRecord, ...], assignment: str) -> StreamPlan:
    rosters = tuple(
        tuple(sorted(c for c, s in class_to_stream.items() if s == sid)) for sid in range(n_streams)
    )
    return StreamPlan(
        n_streams=n_streams,
        class_to_stream=dict(sorted(class_to_stream.items())),
        class_to_cluster={c: a.majority_cluster for c, a in sorted(aff.items())},
        stream_rosters=rosters,
        cluster_orderings=_orderings(aff),
        votes=votes,
        assignment=assignment,
    )


def decreasing_percentages(aff: AffiliationTable, n_streams: int,
                           votes: tuple[VoteRecord, ...] = ()) -> StreamPlan:
    """Deal classes to streams cluster by cluster, most affiliated first.

    Clusters are visited in ascending id. Within a cluster each class goes to
    the least-loaded stream not yet used by this cluster in the current round
    of ``n_streams`` deals (lowest stream id on ties); the round resets once
    every stream has been used.
    """
    if n_streams < 1 or len(aff) < n_streams:
        raise InvalidCounts(f"need M >= N >= 1, got M={len(aff)}, N={n_streams}")
    loads = [0] * n_streams
    class_to_stream: dict[int, int] = {}
    for _, ordering in _orderings(aff).items():
        used: set[int] = set()
        for class_id, _ in ordering:
            if len(used) == n_streams:
                used.clear()
            sid = min((s for s in range(n_streams) if s not in used), key=lambda s: (loads[s], s))
            used.add(sid)
            loads[sid] += 1
            class_to_stream[class_id] = sid
    return _finish(n_streams, class_to_stream, aff, votes, "cvdp")


def random_assignment(aff: AffiliationTable, n_streams: int, seed: int) -> StreamPlan:
    """Baseline: shuffle classes and deal them round-robin, ignoring clusters."""
    if n_streams < 1 or len(aff) < n_streams:
        raise InvalidCounts(f"need M >= N >= 1, got M={len(aff)}, N={n_streams}")
    order = np.random.default_rng(seed).permutation(sorted(aff))
    class_to_stream = {int(c): i % n_streams for i, c in enumerate(order)}
    return _finish(n_streams, class_to_stream, aff, (), "random")


def apply_votes(aff: AffiliationTable, votes: list[VoteRecord] | tuple[VoteRecord, ...]) -> AffiliationTable:
    """Move each voted class to its winning cluster, recomputing its share there."""
    out = dict(aff)
    for v in votes:
        moved = _affiliation(v.class_id, aff[v.class_id].histogram, v.winning_cluster)
        out[v.class_id] = replace(moved, is_problematic=aff[v.class_id].is_problematic)
    return out


def build_plan(ca: ClusterAssignment, ds: Dataset, n_streams: int,
               knn_k: int = DEFAULT_KNN_K, assignment: str = "cvdp", seed: int = 0) -> StreamPlan:
    """Affiliations, Consensus Voting on every problematic class, then Decreasing Percentages.

    ``assignment="random"`` skips voting and dealing and returns the random baseline.
    """
    if assignment not in ASSIGNMENTS:
        raise InvalidConfig(f"unknown assignment {assignment!r}")
    aff = build_affiliations(ca, ds)
    if assignment == "random":
        return random_assignment(aff, n_streams, seed)
    votes = tuple(
        consensus_vote(c, ca, ds, aff, knn_k) for c in sorted(aff) if aff[c].is_problematic
    )
    return decreasing_percentages(apply_votes(aff, votes), n_streams, votes)
