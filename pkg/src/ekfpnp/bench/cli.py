"""``ekfpnp-bench`` command line."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .. import pnp_bootstrap as pnp
from ..errors import EKFPnPError
from ..simgen import NoiseSchedule, SceneConfig, SimSequence, TrajectoryConfig, simulate
from .experiment import METHODS, ExperimentConfig, FilterConfig, run_experiment, run_sequence
from .export import export

EXPERIMENT_NAMES = {"vary-n": "vary_n", "vary-sigma": "vary_sigma", "timing": "timing", "single": "single_run"}


def _load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    overrides = {}
    if args.experiment:
        overrides["experiment"] = EXPERIMENT_NAMES[args.experiment]
    if args.scene:
        overrides["scene_modes"] = (args.scene,)
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    out = cfg.out or "results"
    result = run_experiment(cfg)
    for p in export(result, out):
        print(p)
    return 0


def cmd_simulate(args) -> int:
    scene = SceneConfig(args.points, args.scene, args.seed)
    traj = TrajectoryConfig(n_frames=args.frames, seed=args.seed)
    sched = None if args.noiseless else NoiseSchedule(seed=args.seed)
    seq = simulate(scene, traj, sched)
    if args.out in (None, "-"):
        json.dump(seq.to_dict(), sys.stdout)
        sys.stdout.write("\n")
    else:
        seq.write(args.out)
    return 0


def cmd_track(args) -> int:
    seq = SimSequence.read(args.input)
    fcfg = FilterConfig()
    if args.config:
        fcfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text())).filter
    run = run_sequence(seq, args.method, fcfg, pnp.GNConfig())
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["frame", "cx", "cy", "cz", "qw", "qx", "qy", "qz", "e_rot_deg", "e_trans_pct", "failed"])
        for k, pose in enumerate(run.poses):
            vals = [""] * 7 if pose is None else [repr(float(x)) for x in (*pose.c, *pose.q)]
            w.writerow([k, *vals, repr(float(run.e_rot[k])), repr(float(run.e_trans[k])), int(run.failed[k])])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ekfpnp-bench", description="EKF pose tracking benchmarks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and export results")
    run.add_argument("--experiment", choices=sorted(EXPERIMENT_NAMES))
    run.add_argument("--scene", choices=["ordinary", "planar"])
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    sim = sub.add_parser("simulate", help="write a synthetic sequence as JSON")
    sim.add_argument("--scene", choices=["ordinary", "planar"], default="ordinary")
    sim.add_argument("--points", type=int, default=100)
    sim.add_argument("--frames", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noiseless", action="store_true")
    sim.add_argument("--out", help="output path (default stdout)")
    sim.set_defaults(func=cmd_simulate)

    track = sub.add_parser("track", help="estimate poses for a sequence file")
    track.add_argument("--input", required=True)
    track.add_argument("--method", choices=METHODS, default="ekf")
    track.add_argument("--config", help="experiment config JSON; only the filter block is used")
    track.add_argument("--out", help="CSV path (default stdout)")
    track.set_defaults(func=cmd_track)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (EKFPnPError, ValueError, OSError, KeyError, TypeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
