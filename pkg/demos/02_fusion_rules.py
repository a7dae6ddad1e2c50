"""
Comparing the three fusion rules on one clip
============================================

Each stream only knows its own classes. Here one test clip is pushed through
every stream and the per-class scores of each rule are printed side by side.
"""

from smnet import FusionMode, RunConfig, SynthSpec, fuse, generate_synthetic
from smnet.classify import predict_proba
from smnet.evaluation import class_means_of, member_bank_of, reduced_features
from smnet.pipeline import run_pipeline

ds = generate_synthetic(SynthSpec(num_groups=3, classes_per_group=4, clips_per_class=15,
                                  dim=12, group_separation=10.0, within_group_spread=1.5,
                                  seed=4))
result = run_pipeline(ds, RunConfig(streams=3, seed=4), with_eval=False)
art, streams = result.artifacts, result.streams

# reduce one test clip exactly as the online path does
clip = ds.test[0]
v = reduced_features([clip], art.pca, art.target_segments)[0]
probs = [predict_proba(ts, v) for ts in streams]
means, bank = class_means_of(streams), member_bank_of(streams)
print(f"test clip {clip.clip_id}, true class {clip.class_id}")

for mode in (FusionMode("w_raw"), FusionMode("w_mean"), FusionMode("w_min"),
             FusionMode("w_min", "pure_min_distance")):
    d = fuse(mode, probs, art.plan, v, means, bank)
    label = mode.name if mode.name != "w_min" else f"w_min/{mode.w_min_variant}"
    print(f"\n{label}: predicts {d.predicted_class}")
    print("  per-stream winners:", [(c, round(s, 4)) for c, s in d.per_stream_winner])
    top = sorted(d.score_breakdown.items(), key=lambda kv: -kv[1][2])[:3]
    for c, (p, w, s) in top:
        print(f"  class {c:>2}: prob {p:.3f}  weight {w:8.3f}  score {s:8.4f}")

# across the whole test split
rep = run_pipeline(ds, RunConfig(streams=3, seed=4)).report
print()
print({m: round(a, 3) for m, a in rep.clip_accuracy.items()})
