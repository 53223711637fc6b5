"""Command-line entry points: synth, track, eval, distill-study."""

from __future__ import annotations

import argparse
import csv
import json
from pathlib import Path

import numpy as np

from .dcf import TrainingSet
from .distill import distill_channels
from .features import FeatureSpec, extract_patch, featurize, read_sequence, write_sequence
from .friendliness import average_friendliness
from .metrics import (
    PRECISION_THRESHOLDS,
    SUCCESS_THRESHOLDS,
    TrackResult,
    precision_curve,
    success_curve,
)
from .synth import SynthSpec, generate_sequence
from .tracker import TrackerConfig, run_sequence

_FEATURE_KEYS = (
    "provider",
    "bins",
    "cell_size",
    "window",
    "normalize",
    "path_template",
    "noise_channels",
    "noise_sigma",
    "noise_seed",
)
_TRACKER_KEYS = (
    "lam",
    "learning_rate",
    "label_sigma",
    "max_rounds",
    "projection_dim",
    "distill",
    "prune_max_iters",
    "padding",
    "out_size",
)


def load_config(path, overrides=None) -> TrackerConfig:
    """Build a TrackerConfig from a JSON file plus CLI overrides."""
    raw = {}
    if path:
        raw = json.loads(Path(path).read_text())
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    feature_kwargs = {k: raw[k] for k in _FEATURE_KEYS if k in raw}
    tracker_kwargs = {k: raw[k] for k in _TRACKER_KEYS if k in raw}
    if "out_size" in tracker_kwargs:
        tracker_kwargs["out_size"] = tuple(tracker_kwargs["out_size"])
    return TrackerConfig(feature_spec=FeatureSpec(**feature_kwargs), **tracker_kwargs)


def _parse_motion(text):
    steps = []
    for part in text.split(";"):
        dx, dy = part.split(",")
        steps.append((float(dx), float(dy)))
    return tuple(steps)


def cmd_synth(args):
    spec = SynthSpec(
        frames=args.frames,
        frame_size=(args.frame_size, args.frame_size),
        object_size=(args.object_size, args.object_size),
        motion=_parse_motion(args.motion),
        texture_seed=args.seed,
    )
    frames, boxes = generate_sequence(spec)
    write_sequence(args.out, frames, boxes)
    print(f"wrote {len(frames)} frames to {args.out}")


def cmd_track(args):
    config = load_config(
        args.config,
        {
            "lam": args.lam,
            "label_sigma": args.label_sigma,
            "projection_dim": args.projection_dim,
        },
    )
    frames, gt = read_sequence(args.seq)
    records = run_sequence(frames, gt[0], config)
    payload = {
        "sequence": str(args.seq),
        "config": _config_dict(config),
        "frames": records,
    }
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(f"tracked {len(records)} frames -> {args.out}")


def _config_dict(config: TrackerConfig):
    out = {k: getattr(config.feature_spec, k) for k in _FEATURE_KEYS}
    out.update({k: getattr(config, k) for k in _TRACKER_KEYS})
    out["out_size"] = list(config.out_size)
    return out


def cmd_eval(args):
    payload = json.loads(Path(args.results).read_text())
    _, gt = read_sequence(args.seq)
    records = payload["frames"]
    if len(records) != len(gt):
        raise SystemExit(f"{len(records)} tracked frames but {len(gt)} ground-truth boxes")
    result = TrackResult(
        boxes=[tuple(r["box"]) for r in records],
        gt=gt,
        timings=[r["time_s"] for r in records],
        channels_used=records[-1]["channels"],
    )
    p_curve, p20 = precision_curve(result)
    s_curve, auc = success_curve(result)
    with open(args.curves, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "precision", "success"])
        for i, t in enumerate(SUCCESS_THRESHOLDS):
            prec = f"{p_curve[i]:.6f}" if i < len(PRECISION_THRESHOLDS) else ""
            writer.writerow([f"{t:.2f}", prec, f"{s_curve[i]:.6f}"])
    summary = {
        "precision_at_20": p20,
        "auc": auc,
        "fps": result.fps,
        "mean_channels": float(np.mean([r["channels"] for r in records])),
        "frames": len(records),
    }
    Path(args.summary).write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))


def cmd_distill_study(args):
    config = load_config(args.config, {"lam": args.lam, "label_sigma": args.label_sigma})
    frames, gt = read_sequence(args.seq)
    k = min(args.frames, len(frames))
    if k < 2:
        raise SystemExit("need at least 2 frames for the study")
    maps = []
    for i in range(k):
        patch = extract_patch(
            frames[i], gt[i], config.padding, config.out_size, frame_index=i + 1
        )
        maps.append(featurize(patch, config.feature_spec))
    report = average_friendliness(maps)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "spatial", "temporal", "friendliness", "rank"])
        for row in report.rows():
            writer.writerow(row)
    print(f"wrote per-channel report for d={report.d} -> {args.out}")
    if args.trace_out:
        from .labels import LabelConfig, gaussian_label

        grid_h, grid_w = maps[0].shape[1:]
        label = gaussian_label(
            LabelConfig(grid_h, grid_w, config.label_sigma),
            grid_h / config.padding,
            grid_w / config.padding,
        )
        ts = TrainingSet(samples=np.stack(maps), label=label, lam=config.lam)
        _flt, sel, trace = distill_channels(maps, ts, max_rounds=config.max_rounds)
        with open(args.trace_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "loss"])
            for i, value in enumerate(trace):
                writer.writerow([i, f"{value:.12g}"])
        print(f"distilled to {sel.count} channels; trace -> {args.trace_out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="cdtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic sequence directory")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--frame-size", type=int, default=96)
    p.add_argument("--object-size", type=int, default=24)
    p.add_argument("--motion", default="2,1", help="per-frame dx,dy steps, ';'-separated")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="run the tracker over a sequence")
    p.add_argument("--seq", required=True)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", required=True, help="results JSON path")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--label-sigma", type=float, default=None)
    p.add_argument("--projection-dim", type=int, default=None)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="score results against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--seq", required=True)
    p.add_argument("--curves", default="curves.csv")
    p.add_argument("--summary", default="summary.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("distill-study", help="per-channel friendliness report")
    p.add_argument("--seq", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--out", required=True, help="per-channel CSV path")
    p.add_argument("--trace-out", default=None, help="optional loss-trace CSV")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--label-sigma", type=float, default=None)
    p.set_defaults(func=cmd_distill_study)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
