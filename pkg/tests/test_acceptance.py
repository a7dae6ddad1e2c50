"""Acceptance criteria, one test each, at their stated tolerances.

Run alone with ``pytest -m acceptance -v``; a PASS/FAIL line per criterion is
printed in the terminal summary.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from oracles import (
    brute_mean_weighted,
    brute_min_distance,
    concat_argmax,
    finite_difference_error,
    random_fusion_case,
)
from smnet.classify import ClassifierConfig, init_params
from smnet.cli import main
from smnet.clustering import KmeansConfig, run_kmeans
from smnet.evaluation import EXTRACTION_CAVEAT, baseline_monolithic, bench
from smnet.feature_store import SynthSpec, generate_synthetic
from smnet.fusion import fuse_mean_weighted, fuse_min_weighted, fuse_raw
from smnet.pipeline import RunConfig, make_plan, run_pipeline
from smnet.preprocess import fit_pca, project, reconstruct

pytestmark = pytest.mark.acceptance

SEEDS = range(20)


def overlapping(seed):
    """Four groups of four classes; classes inside a group overlap."""
    return generate_synthetic(SynthSpec(num_groups=4, classes_per_group=4, clips_per_class=20,
                                        dim=16, group_separation=12.0, within_group_spread=1.5,
                                        clips_per_video=2, seed=seed))


def separable(seed):
    return generate_synthetic(SynthSpec(num_groups=4, classes_per_group=4, clips_per_class=20,
                                        dim=16, group_separation=20.0, within_group_spread=10.0,
                                        clips_per_video=2, seed=seed))


def test_ac01_stream_sizes_101_classes():
    start = time.perf_counter()
    # 101 is prime, so one class per group; the orthonormal group frame needs dim >= 101
    ds = generate_synthetic(SynthSpec(num_groups=101, classes_per_group=1, clips_per_class=5,
                                      dim=128, seed=0))
    plan = make_plan(ds, RunConfig(streams=4, seed=0)).plan
    elapsed = time.perf_counter() - start
    assert sorted(plan.stream_sizes) == [25, 25, 25, 26]
    assert elapsed < 5.0


def test_ac02_top_n_distinct_streams():
    violations, voted = 0, 0
    for seed in range(100):
        ds = generate_synthetic(SynthSpec(num_groups=5, classes_per_group=4, clips_per_class=10,
                                          dim=16, group_separation=3.0, within_group_spread=2.0,
                                          seed=seed))
        plan = make_plan(ds, RunConfig(streams=4, seed=seed)).plan
        voted += len(plan.votes)
        for order in plan.cluster_orderings.values():
            top = [plan.class_to_stream[c] for c, _ in order[:min(plan.n_streams, len(order))]]
            violations += len(top) - len(set(top))
    assert voted > 0  # the geometry must exercise voting, not only clean clusters
    assert violations == 0


def test_ac03_fusion_matches_brute_force():
    rng = np.random.default_rng(2024)
    mismatches = {"w_raw": 0, "w_mean": 0, "w_min": 0}
    for _ in range(1000):
        plan, probs, means, bank, v = random_fusion_case(rng)
        rosters = plan.stream_rosters
        mismatches["w_raw"] += fuse_raw(probs, plan).predicted_class != concat_argmax(probs, rosters)
        mismatches["w_mean"] += (fuse_mean_weighted(probs, plan, means, v, 1e-9).predicted_class
                                 != brute_mean_weighted(probs, rosters, means, v, 1e-9))
        mismatches["w_min"] += (fuse_min_weighted(probs, plan, bank, v, "pure_min_distance").predicted_class
                                != brute_min_distance(probs, rosters, bank, v))
    assert mismatches == {"w_raw": 0, "w_mean": 0, "w_min": 0}


def test_ac04_kmeans_recovers_separated_blobs():
    start = time.perf_counter()
    recovered = 0
    for seed in range(100):
        ds = generate_synthetic(SynthSpec(num_groups=4, classes_per_group=1, clips_per_class=25,
                                          group_separation=10.0, segments_per_clip=(1, 1), seed=seed))
        X = np.array([c.segments[0] for c in ds.clips], dtype=np.float64)
        y = [c.class_id for c in ds.clips]
        ca = run_kmeans(X, KmeansConfig(k=4, seed=seed))  # raises if inertia ever rises
        hist = np.array(ca.inertia_history)
        assert np.all(np.diff(hist) <= 1e-9 * hist[:-1])
        recovered += adjusted_rand_score(y, ca.labels) == 1.0
    assert recovered >= 95
    assert time.perf_counter() - start < 30.0


def test_ac05_pca_exactness():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((60, 24)) @ rng.standard_normal((24, 24))
    model = fit_pca(X, 24)
    gram = model.components @ model.components.T
    assert np.abs(gram - np.eye(24)).max() <= 1e-8
    Z = project(model, X)
    dx = ((X[:, None] - X[None]) ** 2).sum(-1)
    dz = ((Z[:, None] - Z[None]) ** 2).sum(-1)
    off = ~np.eye(len(X), dtype=bool)
    assert np.max(np.abs(dz[off] - dx[off]) / dx[off]) <= 1e-6
    v = rng.standard_normal(24) * 4
    assert np.linalg.norm(reconstruct(model, project(model, v)) - v) / np.linalg.norm(v) <= 1e-6


def test_ac06_classifier_gradients():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((5, 4))
    y = np.array([0, 1, 2, 1, 0])
    for kind in ("softmax", "mlp1"):
        params = init_params(ClassifierConfig(kind=kind, hidden_units=7, seed=1), 4, 3)
        params = {k: v + 0.3 * rng.standard_normal(v.shape) for k, v in params.items()}
        assert finite_difference_error(kind, params, X, y, 1e-2) <= 1e-5, kind


def test_ac07_cvdp_not_worse_than_random():
    start = time.perf_counter()
    cvdp, rand = [], []
    for seed in SEEDS:
        ds = overlapping(seed)
        cfg = RunConfig(streams=4, seed=seed, fusion=("w_mean",))
        cvdp.append(run_pipeline(ds, cfg).report.clip_accuracy["w_mean"])
        rand.append(run_pipeline(ds, replace(cfg, assignment="random")).report.clip_accuracy["w_mean"])
    print(f"\nW_mean clip accuracy over {len(cvdp)} seeds: cvdp {np.mean(cvdp):.4f}, "
          f"random {np.mean(rand):.4f}")
    assert np.mean(cvdp) >= np.mean(rand)
    assert time.perf_counter() - start < 300.0


def test_ac08_partition_matches_monolithic():
    ds = separable(0)
    cfg = RunConfig(streams=4, seed=0, fusion=("w_raw", "w_mean"), baseline=True)
    report = run_pipeline(ds, cfg).report
    mono = report.baseline_monolithic_accuracy
    print(f"\nseparable benchmark: W_mean {report.clip_accuracy['w_mean']:.4f}, monolithic {mono:.4f}")
    assert abs(report.clip_accuracy["w_mean"] - mono) <= 0.02
    # one stream holding every class: its raw argmax is the monolithic classifier
    single = run_pipeline(ds, replace(cfg, streams=1)).report
    assert single.clip_accuracy["w_raw"] == mono
    art = make_plan(ds, replace(cfg, streams=1))
    assert baseline_monolithic(ds, art.pca, cfg.classifier_config(), art.target_segments) == mono


def test_ac09_video_w_mean_beats_w_raw():
    wins = 0
    for seed in SEEDS:
        rep = run_pipeline(overlapping(seed), RunConfig(streams=4, seed=seed,
                                                        fusion=("w_raw", "w_mean"))).report
        wins += rep.video_accuracy["w_mean"] >= rep.video_accuracy["w_raw"]
    print(f"\nvideo-level W_mean >= W_raw in {wins}/{len(SEEDS)} seeds")
    assert wins >= 15


def _artifact_bytes(run_dir):
    files = ["plan.json", "eval_report.json", *sorted(
        str(p.relative_to(run_dir)) for p in (run_dir / "models").iterdir())]
    return {name: (run_dir / name).read_bytes() for name in files}


def test_ac10_identical_runs_identical_bytes(tmp_path):
    data = tmp_path / "data"
    assert main(["synth", "--out", str(data), "--seed", "3", "--clips-per-video", "2"]) == 0
    for classifier in ("softmax", "mlp1"):
        outputs = []
        for name in ("a", "b"):
            out = tmp_path / classifier / name
            shared = ["--out", str(out), "--seed", "11"]
            assert main(["plan", "--dataset", str(data), *shared, "--classifier", classifier,
                         "--subsample", "0.5"]) == 0
            assert main(["train", *shared]) == 0
            assert main(["eval", *shared, "--baseline"]) == 0
            outputs.append(_artifact_bytes(out))
        assert outputs[0].keys() == outputs[1].keys()
        assert any(name.endswith(".bin") for name in outputs[0])
        for name in outputs[0]:
            assert outputs[0][name] == outputs[1][name], (classifier, name)


def test_ac11_bench_report():
    ds = overlapping(0)
    result = run_pipeline(ds, RunConfig(streams=4, seed=0), with_eval=False)
    art = result.artifacts
    for mode in ("w_raw", "w_mean", "w_min"):
        rep = bench(ds, art.plan, result.streams, art.pca, mode, 3, art.target_segments)
        assert rep.fps > 0
        assert abs(sum(rep.stage_shares.values()) - 1.0) <= 0.01
        assert EXTRACTION_CAVEAT in rep.text()
        assert "feature extraction is not part of the measured path" in rep.text()
