"""Writers for experiment results: long-form CSV, provenance JSON and SVG plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .experiment import SINGLE, ExperimentResult

CSV_COLUMNS = (
    "experiment",
    "scene_mode",
    "method",
    "sweep_value",
    "trial",
    "frame",
    "e_rot_deg",
    "e_trans_pct",
    "time_s",
    "failed",
)

PROVENANCE = {
    "trajectory": "fixed per scene mode, generated from the trajectory config",
    "per_trial": "point set, noise-level assignment and pixel noise redrawn from seeds derived from (seed, scene mode, sweep index, trial)",
    "reported_error": "final frame of each trial; failed frames excluded from means",
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def csv_rows(result: ExperimentResult):
    cfg = result.config
    per_frame = cfg.write_per_frame
    for r in result.records:
        T = len(r.e_rot)
        frames = range(T) if per_frame else (T - 1,)
        for k in frames:
            time_s = r.time_s[k] if per_frame else float(np.mean(r.time_s[2:]))
            yield (
                cfg.experiment,
                r.scene_mode,
                r.method,
                _fmt(r.sweep_value),
                str(r.trial),
                str(k),
                _fmt(r.e_rot[k]),
                _fmt(r.e_trans[k]),
                _fmt(time_s),
                _fmt(r.failed[k]),
            )


def write_csv(result: ExperimentResult, path) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(CSV_COLUMNS)
        for row in csv_rows(result):
            w.writerow(row)
            n += 1
    return n


def write_config(result: ExperimentResult, path) -> None:
    doc = {
        "config": result.config.to_dict(),
        "sweep_variable": result.config.sweep_variable,
        "sweep_values": list(result.config.sweep_values),
        "provenance": PROVENANCE,
        "summary": result.summary(),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _plot(result: ExperimentResult, mode: str, metric: str, label: str, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = result.config
    plt.rcParams["svg.hashsalt"] = "ekfpnp"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method in cfg.methods:
        if cfg.experiment == SINGLE:
            y = result.frame_means(mode, method, cfg.sweep_values[0], metric)
            x = np.arange(len(y))
            xlabel = "frame"
        else:
            x = np.asarray(cfg.sweep_values, dtype=float)
            y = [result.mean(mode, method, v, metric)[0] for v in cfg.sweep_values]
            xlabel = cfg.sweep_variable
        ax.plot(x, y, marker="o" if cfg.experiment != SINGLE else None, label=method)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(label)
    ax.set_title(f"{cfg.experiment} ({mode})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def export(result: ExperimentResult, out_dir) -> list:
    """Write ``results.csv``, ``config.json`` and SVG plots; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "results.csv", out / "config.json"]
    write_csv(result, paths[0])
    write_config(result, paths[1])
    metrics = [("e_rot", "mean rotation error (deg)"), ("e_trans", "mean translation error (%)")]
    if result.config.timed:
        metrics.append(("time_s", "mean time per frame (s)"))
    for mode in result.config.scene_modes:
        for metric, label in metrics:
            p = out / f"{result.config.experiment}_{mode}_{metric}.svg"
            _plot(result, mode, metric, label, p)
            paths.append(p)
    return paths
