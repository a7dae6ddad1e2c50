"""Command-line entry point: ``smnet {synth,plan,train,eval,bench}``.

Settings are resolved in increasing precedence: defaults, the ``run.cfg``
saved in the output directory by an earlier stage, ``--config``, then flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .classify import predict
from .errors import InvalidSpec, SmnError
from .evaluation import bench, reduced_features
from .feature_store import SynthSpec, generate_synthetic, save_dataset
from .pipeline import (
    FUSION_ALIASES,
    RunConfig,
    apply_settings,
    evaluate_run,
    load_config,
    load_input_dataset,
    load_plan_artifacts,
    load_streams,
    make_plan,
    save_plan_artifacts,
    save_streams,
    train_streams,
)

RUN_CFG = "run.cfg"


def _add_shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="run directory")
    p.add_argument("--dataset", help="manifest.csv (or its directory)")
    p.add_argument("--streams", type=int, metavar="N")
    p.add_argument("--pca-components", type=int)
    p.add_argument("--knn-k", type=int)
    p.add_argument("--fusion", action="append", choices=["raw", "mean", "min"])
    p.add_argument("--assignment", choices=["cvdp", "random"])
    p.add_argument("--workers", type=int)
    p.add_argument("--baseline", action="store_true", default=None)
    p.add_argument("--subsample", type=float, dest="subsample_fraction")
    p.add_argument("--classifier", choices=["softmax", "mlp1"])
    p.add_argument("--repetitions", type=int, dest="bench_repetitions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a synthetic dataset")
    synth.add_argument("--config")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--groups", type=int, dest="num_groups")
    synth.add_argument("--classes-per-group", type=int)
    synth.add_argument("--clips-per-class", type=int)
    synth.add_argument("--clips-per-video", type=int)
    synth.add_argument("--dim", type=int)
    synth.add_argument("--separation", type=float, dest="group_separation")
    synth.add_argument("--spread", type=float, dest="within_group_spread")
    synth.add_argument("--noise", type=float, dest="noise_sigma")
    synth.add_argument("--segments", help="S_min,S_max", dest="segments_per_clip")

    for name, help_text in [("plan", "cluster and partition classes into streams"),
                            ("train", "train one classifier per stream"),
                            ("eval", "evaluate fused accuracy"),
                            ("bench", "measure online throughput")]:
        _add_shared(sub.add_parser(name, help=help_text))
    return parser


def _flag_settings(args: argparse.Namespace) -> dict[str, str]:
    keys = ["seed", "out", "dataset", "streams", "pca_components", "knn_k", "assignment",
            "workers", "baseline", "subsample_fraction", "classifier", "bench_repetitions"]
    settings = {k: str(getattr(args, k)) for k in keys if getattr(args, k, None) is not None}
    if args.fusion:
        settings["fusion"] = ",".join(FUSION_ALIASES[m] for m in args.fusion)
    return settings


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    flags = _flag_settings(args)
    out = flags.get("out")
    if out and (Path(out) / RUN_CFG).exists() and args.command != "plan":
        cfg = load_config(Path(out) / RUN_CFG, cfg)
    if args.config:
        cfg = load_config(args.config, cfg)
    cfg = apply_settings(cfg, flags)
    cfg.validate()
    return cfg


def cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec()
    if args.config:
        spec = load_config(args.config).synth or spec
    updates = {}
    for name in ["num_groups", "classes_per_group", "clips_per_class", "clips_per_video", "dim",
                 "group_separation", "within_group_spread", "noise_sigma", "seed"]:
        if getattr(args, name) is not None:
            updates[name] = getattr(args, name)
    if args.segments_per_clip:
        try:
            lo, hi = (int(x) for x in args.segments_per_clip.split(","))
        except ValueError as e:
            raise InvalidSpec(f"--segments expects S_min,S_max, got {args.segments_per_clip!r}") from e
        updates["segments_per_clip"] = (lo, hi)
    spec = replace(spec, **updates)
    manifest = save_dataset(generate_synthetic(spec), args.out)
    print(f"wrote {spec.n_classes}-class dataset to {manifest}")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    ds = load_input_dataset(cfg)
    art = make_plan(ds, cfg)
    out = Path(cfg.out)
    save_plan_artifacts(art, out)
    (out / RUN_CFG).write_text(cfg.to_text(), encoding="utf-8")
    print(f"{art.plan.assignment} plan: {cfg.streams} streams, sizes {art.plan.stream_sizes}, "
          f"{len(art.plan.votes)} voted classes -> {out / 'plan.json'}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    art = load_plan_artifacts(cfg.out)
    ds = load_input_dataset(cfg)
    streams = train_streams(ds, art, cfg)
    save_streams(streams, cfg.out)
    X = reduced_features(ds.train, art.pca, art.target_segments)
    y = np.array([c.class_id for c in ds.train])
    for ts in streams:
        keep = np.isin(y, ts.roster)
        acc = float(np.mean(predict(ts, X[keep]) == y[keep]))
        print(f"stream {ts.stream_id}: {len(ts.roster)} classes, train accuracy {acc:.4f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    art = load_plan_artifacts(cfg.out)
    ds = load_input_dataset(cfg)
    streams = load_streams(cfg.out, art.plan.n_streams)
    report = evaluate_run(ds, art, streams, cfg)
    report.save(cfg.out)
    print(report.table())
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    art = load_plan_artifacts(cfg.out)
    ds = load_input_dataset(cfg)
    streams = load_streams(cfg.out, art.plan.n_streams)
    reports = {}
    for mode in cfg.fusion_modes():
        rep = bench(ds, art.plan, streams, art.pca, mode, cfg.bench_repetitions, art.target_segments)
        reports[mode.name] = rep.to_dict()
        print(rep.text())
    (Path(cfg.out) / "bench_report.json").write_text(
        json.dumps(reports, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


COMMANDS = {"synth": cmd_synth, "plan": cmd_plan, "train": cmd_train,
            "eval": cmd_eval, "bench": cmd_bench}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except SmnError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
