"""End-to-end acceptance checks, one test per criterion.

Each test appends a ``[PASS]``/``[FAIL]`` line that pytest prints in an
"acceptance criteria" section at the end of the run; run this file alone with
``pytest tests/test_acceptance.py -v``.
"""

import functools
import json
import time

import numpy as np
import pytest
from scipy.stats import chi2

from conftest import ACCEPTANCE, central_diff, random_quat, rel_err
from ekfpnp.bench import EKF, ExperimentConfig, rot_error, run_experiment, run_sequence, trans_error
from ekfpnp.bench.cli import main
from ekfpnp.camera import Intrinsics, Pose, jacobian_obs_state, observe, observe_state
from ekfpnp.ekf import FilterState, MeasurementNoise, ProcessNoise, correct, init_from_two_poses, motion_model
from ekfpnp.ekf import predict, transition_jacobians
from ekfpnp.geom3 import quat_from_rotvec
from ekfpnp.pnp_bootstrap import PnPProblem, solve
from ekfpnp.simgen import ORDINARY, PLANAR, NoiseSchedule, SceneConfig, TrajectoryConfig, simulate


def criterion(number, title):
    """Record a PASS/FAIL line for the wrapped test, whatever way it ends."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                ACCEPTANCE.append(f"[FAIL] {number}. {title}: {msg}")
                raise
            ACCEPTANCE.append(f"[PASS] {number}. {title}: {detail}")

        return run

    return wrap


@criterion(1, "Jacobian fidelity")
def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(1)
    intr = Intrinsics()
    t0 = time.perf_counter()
    worst = {"F": 0.0, "G": 0.0, "H": 0.0}
    for _ in range(1000):
        q = random_quat(rng) * rng.uniform(0.8, 1.2)
        s = np.concatenate((rng.uniform(-5, 5, 3), q, rng.normal(size=3) * 0.1, rng.normal(size=3) * 0.1))
        F, G = transition_jacobians(s)
        worst["F"] = max(worst["F"], rel_err(F, central_diff(motion_model, s)))
        worst["G"] = max(worst["G"], rel_err(G, central_diff(lambda u: motion_model(s, u), np.zeros(6))))
        # points 2..10 m ahead of the camera along its (unit-normalized) axes
        pose = Pose(q=q, c=s[:3])
        xc = np.column_stack((rng.uniform(-1, 1, (10, 2)), np.ones(10))) * rng.uniform(2, 10, (10, 1))
        pts = xc @ pose.R + pose.c
        H = jacobian_obs_state(s, intr, pts)
        worst["H"] = max(worst["H"], rel_err(H, central_diff(lambda x: observe_state(x, intr, pts), s)))
    elapsed = time.perf_counter() - t0
    detail = ", ".join(f"max rel err {k} {v:.2e}" for k, v in worst.items()) + f", {elapsed:.1f} s"
    assert max(worst.values()) < 1e-4, detail
    assert elapsed < 10.0, detail
    return detail


@criterion(2, "Noiseless convergence")
def test_noiseless_convergence():
    seq = simulate(SceneConfig(100, ORDINARY, 0), TrajectoryConfig(), None)
    t0 = time.perf_counter()
    run = run_sequence(seq, EKF)
    elapsed = time.perf_counter() - t0
    e_rot, e_trans = run.e_rot[11:], run.e_trans[11:]
    detail = f"max e_rot {e_rot.max():.2e} deg, max e_trans {e_trans.max():.2e} %, {elapsed:.2f} s"
    assert np.all(e_rot < 0.5) and np.all(e_trans < 0.5), detail
    assert elapsed < 5.0, detail
    return detail


@criterion(3, "Baseline exactness")
def test_baseline_exactness():
    intr = Intrinsics()
    worst_rot = worst_trans = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        truth = Pose(q=random_quat(rng), c=rng.uniform(-3, 3, 3))
        xc = np.column_stack((rng.uniform(-2, 2, (20, 2)), rng.uniform(4, 8, 20)))
        pts = xc @ truth.R + truth.c
        est = solve(PnPProblem(pts, observe(truth, intr, pts), intr))
        worst_rot = max(worst_rot, rot_error(truth.R, est.R))
        worst_trans = max(worst_trans, trans_error(truth.t, est.t))
    detail = f"max e_rot {worst_rot:.2e} deg, max e_trans {worst_trans:.2e} % over 100 seeds"
    assert worst_rot < 1e-5 and worst_trans < 1e-5, detail
    return detail


def ramped_runs(mode, methods, trials=30):
    cfg = ExperimentConfig(trials=trials, n_points=100, scene_modes=(mode,), methods=methods, seed=2024)
    return run_experiment(cfg)


@criterion(4, "Robustness ordering")
def test_robustness_ordering():
    t0 = time.perf_counter()
    res = ramped_runs(ORDINARY, ("ekf", "baseline"))
    elapsed = time.perf_counter() - t0
    (value,) = res.config.sweep_values
    final = {}
    for method in ("ekf", "baseline"):
        for metric in ("e_rot", "e_trans"):
            mean, excluded = res.mean(ORDINARY, method, value, metric)
            assert excluded == 0, f"{method} {metric}: {excluded} failed trial(s)"
            final[method, metric] = mean
    curve = res.frame_means(ORDINARY, "ekf", value, "e_rot")
    mid, last = curve[99], curve[-1]
    detail = (
        f"final e_rot ekf {final['ekf', 'e_rot']:.3f} vs baseline {final['baseline', 'e_rot']:.3f} deg, "
        f"e_trans ekf {final['ekf', 'e_trans']:.3f} vs baseline {final['baseline', 'e_trans']:.3f} %, "
        f"ekf e_rot frame 200/100 = {last:.3f}/{mid:.3f}, {elapsed:.0f} s"
    )
    assert final["ekf", "e_rot"] < final["baseline", "e_rot"], detail
    assert final["ekf", "e_trans"] < final["baseline", "e_trans"], detail
    assert last < 2 * mid, detail
    assert elapsed < 300, detail
    return detail


@criterion(5, "Planar tracking")
def test_planar_tracking():
    res = ramped_runs(PLANAR, ("ekf",))
    recs = res.records
    assert len(recs) == 30
    e_rot = np.array([r.e_rot for r in recs])
    e_trans = np.array([r.e_trans for r in recs])
    finite = np.isfinite(e_rot).all() and np.isfinite(e_trans).all()
    overall, final = e_rot.mean(), e_rot[:, -1].mean()
    detail = f"all finite {finite}, mean e_rot {overall:.3f} deg (final frame {final:.3f} deg)"
    assert finite and not any(r.failed.any() for r in recs), detail
    assert overall < 5.0 and final < 5.0, detail
    return detail


@criterion(6, "Metric examples")
def test_metric_examples():
    R = Pose(q=random_quat(np.random.default_rng(6))).R
    c, s = np.cos(np.radians(5.0)), np.sin(np.radians(5.0))
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    got = (
        rot_error(R, R),
        rot_error(R, R @ Rz),
        trans_error([0, 0, 10], [0, 0, 10]),
        trans_error([0, 0, 10], [0, 0, 11]),
    )
    want = (0.0, 5.0, 0.0, 100 / 11)
    detail = ", ".join(f"{g:.12g}" for g in got)
    assert all(abs(g - w) <= 1e-9 for g, w in zip(got, want)), detail
    return detail


@criterion(7, "Filter consistency")
def test_innovation_consistency():
    # linear regime: only the center is uncertain, with a small prior spread
    rng = np.random.default_rng(2024)
    intr = Intrinsics()
    n, sigma, var_c, trials = 100, 1.0, 1e-4, 100
    pose = Pose(q=quat_from_rotvec([0.05, -0.03, 0.02]), c=[0.1, -0.1, 0.0])
    nis = []
    for _ in range(trials):
        pts = rng.uniform([-2, -2, 4], [2, 2, 8], size=(n, 3))
        P = np.zeros((13, 13))
        P[0:3, 0:3] = var_c * np.eye(3)
        prior = np.concatenate((pose.c + rng.normal(size=3) * np.sqrt(var_c), pose.q, np.zeros(6)))
        z = observe(pose, intr, pts) + rng.normal(size=2 * n) * sigma
        nis.append(correct(FilterState(prior, P), z, pts, intr, MeasurementNoise(sigma))[1].nis)
    mean = float(np.mean(nis))
    dof = 2 * n
    # 99% band for one draw, widened by 25% either side
    lo, hi = 0.75 * chi2.ppf(0.005, dof), 1.25 * chi2.ppf(0.995, dof)
    # the same band for the average of independent draws is much narrower
    alo, ahi = 0.75 * chi2.ppf(0.005, trials * dof) / trials, 1.25 * chi2.ppf(0.995, trials * dof) / trials
    detail = f"mean NIS {mean:.2f} for {dof} dof, band [{lo:.1f}, {hi:.1f}], averaged band [{alo:.1f}, {ahi:.1f}]"
    assert lo <= mean <= hi and alo <= mean <= ahi, detail
    return detail


@criterion(8, "Determinism")
def test_results_csv_byte_identical(tmp_path):
    cfg = {"trials": 3, "point_counts": [20, 60], "trajectory": {"n_frames": 40}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    digests = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["run", "--experiment", "vary-n", "--seed", "11", "--out", str(out),
                   "--config", str(tmp_path / "cfg.json")])
        assert rc == 0
        digests.append((out / "results.csv").read_bytes())
    size = len(digests[0])
    detail = f"two runs, results.csv {size} bytes each, identical {digests[0] == digests[1]}"
    assert size > 0 and digests[0] == digests[1], detail
    return detail


def ekf_frame_time(n, frames=40, reps=5):
    """10th-percentile wall time of one predict+correct step."""
    seq = simulate(SceneConfig(n, ORDINARY, 0), TrajectoryConfig(n_frames=frames), NoiseSchedule(seed=0))
    st0 = init_from_two_poses(seq.poses[0], seq.poses[1])
    pn, times = ProcessNoise(), []
    for _ in range(reps):
        st = st0
        for k in range(2, frames):
            mn = MeasurementNoise(max(np.sqrt(seq.common_variance(k)), 0.1))
            t0 = time.perf_counter()
            st = predict(st, pn)
            st, _ = correct(st, seq.noisy[k], seq.points, seq.intr, mn)
            times.append(time.perf_counter() - t0)
    return float(np.percentile(times, 10)), float(np.median(times))


@criterion(9, "Scaling audit")
def test_scaling():
    ns = np.arange(20, 201, 20)
    stats = np.array([ekf_frame_time(int(n)) for n in ns])
    p10, median = stats[:, 0], stats[:, 1]
    exponent = np.polyfit(np.log(ns), np.log(p10), 1)[0]
    detail = (
        f"per-frame time at n=200 {1e3 * median[-1]:.2f} ms (median), "
        f"{1e3 * p10[-1]:.2f} ms (p10); fitted exponent {exponent:.2f} over n=20..200"
    )
    assert median[-1] < 0.05, detail
    return detail


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
