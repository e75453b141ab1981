"""Command-line entry point: ``zonedepth <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error (bad or missing input).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .calibration import CalibrationFrame, EmConfig, calibration_report, fit_plane_em, solve_extrinsics
from .errors import ConvergenceError, DegenerateGeometryError, NoValidPixelsError, UnobservableError
from .evaluation import compute_metrics, plane_bias_jitter
from .geometry import DepthMap, Rect
from .io import read_dmap, read_extrinsics, read_intrinsics, read_json, read_plane, write_dmap, write_json
from .sensor import SensorConfig, ZoneGrid, simulate_zone_grid

METRICS_HELP = """metrics over pixels with valid ground truth:
  delta_i  fraction of pixels with max(pred/gt, gt/pred) < 1.25^i (i = 1, 2, 3)
  rel      mean |pred - gt| / gt
  rmse     sqrt(mean (pred - gt)^2), meters
  log10    mean |log10 pred - log10 gt|"""


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(obj, out=None):
    if out:
        write_json(out, obj)
    print(json.dumps(obj, indent=2))


def _sensor_config(path) -> SensorConfig:
    return SensorConfig.from_dict(read_json(path)) if path else SensorConfig()


# --- commands -------------------------------------------------------------

def cmd_simulate(args):
    depth = read_dmap(args.depth)
    cfg = _sensor_config(args.config)
    K = read_intrinsics(args.intrinsics) if args.intrinsics else cfg.tof_intrinsics()
    if (depth.width, depth.height) != (K.width, K.height):
        raise DataError(f"{args.depth}: raster is {depth.width}x{depth.height}, intrinsics expect {K.width}x{K.height}")
    if args.noise_std > 0:
        rng = np.random.default_rng(args.seed)
        depth = DepthMap(depth.values + rng.normal(0.0, args.noise_std, depth.values.shape), depth.valid)
    zones = simulate_zone_grid(depth, K, cfg)
    write_json(args.out, zones.to_dict())
    print(f"{int(zones.valid.sum())}/{zones.rows * zones.cols} valid zones -> {args.out}")


def cmd_calibrate(args):
    root = Path(args.captures)
    if not root.is_dir():
        raise DataError(f"captures folder not found: {root}")
    cfg = _sensor_config(args.config)
    K_tof = cfg.tof_intrinsics()
    frames, inliers, total = [], 0, 0
    for cap in sorted(p for p in root.iterdir() if p.is_dir()):
        zones_path, points_path = cap / "zones.json", cap / "points.json"
        if not zones_path.exists() or not points_path.exists():
            continue
        zones = ZoneGrid.from_dict(read_json(zones_path))
        points = np.asarray(read_json(points_path), dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise DataError(f"{points_path}: expected an array of [x, y, z] points")
        try:
            fit = fit_plane_em(zones, K_tof, EmConfig())
        except DegenerateGeometryError as exc:
            print(f"skipping {cap}: {exc}", file=sys.stderr)
            continue
        frames.append(CalibrationFrame(fit.plane, points))
        inliers += int(fit.inlier_mask.sum())
        total += int(zones.valid.sum())
    if not frames:
        raise DataError(f"{root}: no usable (zones.json, points.json) captures")
    init = read_extrinsics(args.init) if args.init else None
    e = solve_extrinsics(frames, init)
    report = calibration_report(frames, e)
    write_json(args.out, e.to_dict())
    _emit({
        "before_m": report["mean_distance_before"],
        "after_m": report["mean_distance_after"],
        "frames_used": len(frames),
        "inlier_fraction": inliers / total if total else 0.0,
    })


def cmd_generate(args):
    from .training.data import write_dataset

    paths = write_dataset(args.out, args.count, args.seed)
    print(f"wrote {len(paths)} scenes to {args.out}")


def cmd_train(args):
    from .training.data import TensorDataset, load_dataset
    from .training.train import TrainConfig, train

    cfg = TrainConfig.from_dict(read_json(args.config)) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.steps is not None:
        cfg = replace(cfg, steps=args.steps)
    train_data = TensorDataset(load_dataset(args.data))
    val_data = TensorDataset(load_dataset(args.val)) if args.val else None
    log_path = args.log or str(Path(args.out).with_suffix(".jsonl"))
    result = train(cfg, train_data, val_data, log_path=log_path, checkpoint_path=args.out)
    print(json.dumps(result.history[-1]))


def cmd_predict(args):
    import torch

    from .nn.checkpoint import load_checkpoint
    from .training.data import TensorDataset, load_sample

    model, _ = load_checkpoint(args.checkpoint)
    data = TensorDataset([load_sample(args.scene)])
    inp, _, _ = data.batch([0])
    with torch.no_grad():
        depth = model(inp)[0].numpy().astype(float)
    write_dmap(args.out, DepthMap(depth))
    print(f"wrote {args.out}")


def cmd_eval(args):
    pred, gt = read_dmap(args.pred), read_dmap(args.gt)
    if pred.values.shape != gt.values.shape:
        raise DataError(f"{args.pred}: shape {pred.values.shape} does not match {args.gt} {gt.values.shape}")
    _emit(compute_metrics(pred, gt).to_dict(), args.out)


def cmd_plane_bench(args):
    K = read_intrinsics(args.intrinsics)
    preds = [read_dmap(p) for p in args.preds]
    region = Rect(*args.region) if args.region else Rect(0, 0, K.width, K.height)
    reference = read_plane(args.reference) if args.reference else None
    _emit(plane_bias_jitter(preds, K, region, reference).to_dict(), args.out)


def cmd_ablate(args):
    from .training.train import ABLATIONS, TrainConfig

    raw = read_json(args.config)
    if not isinstance(raw, dict):
        raise DataError(f"{args.config}: expected a JSON object")
    TrainConfig.from_dict(raw)  # validate the input first
    out = dict(raw)
    if ABLATIONS[args.name]:
        out["fusion"] = {**raw.get("fusion", {}), **ABLATIONS[args.name]}
    TrainConfig.from_dict(out)
    _emit(out, args.out)


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .training.train import ABLATIONS

    p = _Parser(prog="zonedepth", description="Zone ToF simulation, calibration and RGB + zone depth fusion.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="zone readings from a ToF-frame depth raster")
    s.add_argument("--depth", required=True, help="DMAP raster in the ToF frame")
    s.add_argument("--intrinsics", help="JSON intrinsics of the raster (default: from sensor config)")
    s.add_argument("--config", help="sensor config JSON")
    s.add_argument("--out", required=True)
    s.add_argument("--noise-std", type=float, default=0.0, help="Gaussian depth noise in meters before binning")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("calibrate", help="solve RGB-to-ToF extrinsics from planar captures")
    s.add_argument("--captures", required=True, help="folder of capture folders with zones.json and points.json")
    s.add_argument("--out", required=True)
    s.add_argument("--init", help="initial extrinsics JSON (default identity)")
    s.add_argument("--config", help="sensor config JSON")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("generate", help="write a synthetic scene dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("train", help="train the fusion network")
    s.add_argument("--config", help="train config JSON")
    s.add_argument("--data", required=True, help="dataset folder")
    s.add_argument("--val", help="validation dataset folder (default: training data)")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--log", help="JSON-lines metric log (default: next to the checkpoint)")
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict a depth raster for one scene folder")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--scene", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("eval", help="depth metrics of a prediction", epilog=METRICS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("plane-bench", help="bias and jitter on a flat target")
    s.add_argument("--preds", nargs="+", required=True, help="DMAP predictions of a static plane")
    s.add_argument("--intrinsics", required=True)
    s.add_argument("--region", nargs=4, type=float, metavar=("X0", "Y0", "X1", "Y1"))
    s.add_argument("--reference", help="reference plane JSON (default: robust fit to the predictions)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_plane_bench)

    s = sub.add_parser("ablate", help="emit the train config of an ablation variant")
    s.add_argument("--name", required=True, choices=sorted(ABLATIONS))
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        args.func(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: missing input {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 2
    except (DataError, ValueError, KeyError, json.JSONDecodeError, NoValidPixelsError,
            DegenerateGeometryError, UnobservableError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
