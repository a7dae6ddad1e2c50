"""
Measuring online throughput
===========================

Time the inference path (equalize, project, predict, fuse) over the test
split and report frames per second with a per-stage breakdown.
"""

from smnet import RunConfig, SynthSpec, bench, generate_synthetic
from smnet.pipeline import run_pipeline

ds = generate_synthetic(SynthSpec(num_groups=4, classes_per_group=4, clips_per_class=30,
                                  dim=64, segments_per_clip=(2, 6), seed=1))
result = run_pipeline(ds, RunConfig(streams=4, seed=1), with_eval=False)
art = result.artifacts

for mode in ("w_raw", "w_mean", "w_min"):
    rep = bench(ds, art.plan, result.streams, art.pca, mode, repetitions=3,
                target_segments=art.target_segments)
    shares = "  ".join(f"{k} {100 * v:5.1f}%" for k, v in rep.stage_shares.items())
    print(f"{mode:<7} {rep.fps:10.0f} fps   {shares}")

# the caveat travels with every report
print()
print(rep.note)
