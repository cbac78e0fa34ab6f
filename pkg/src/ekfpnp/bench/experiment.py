"""Monte-Carlo experiments comparing the filter against per-frame PnP."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .. import pnp_bootstrap as pnp
from ..camera import Pose
from ..ekf import (
    InitialUncertainty,
    MeasurementNoise,
    ProcessNoise,
    correct,
    init_from_two_poses,
    predict,
    state_pose,
)
from ..errors import (
    CheiralityViolation,
    ConfigError,
    DegenerateConfiguration,
    InitializationFailure,
    SingularInnovation,
    ZeroEstimate,
)
from ..simgen import (
    ORDINARY,
    PLANAR,
    SCENE_MODES,
    NoiseSchedule,
    SceneConfig,
    SimSequence,
    TrajectoryConfig,
    gen_trajectory,
    scene_centroid,
    simulate,
)
from .metrics import rot_error, trans_error

log = logging.getLogger(__name__)

EKF = "ekf"
BASELINE = "baseline"
METHODS = (EKF, BASELINE)

VARY_N = "vary_n"
VARY_SIGMA = "vary_sigma"
TIMING = "timing"
SINGLE = "single_run"
EXPERIMENTS = (VARY_N, VARY_SIGMA, TIMING, SINGLE)


@dataclass(frozen=True)
class FilterConfig:
    sigma_a: float = 0.05
    sigma_alpha: float = 0.05
    init_c: float = 1e-4
    init_q: float = 1e-4
    init_v: float = 1e-2
    init_w: float = 1e-2
    # lower bound on the pixel std handed to the filter; the ramp starts at zero
    sigma_floor: float = 0.1

    @property
    def process_noise(self) -> ProcessNoise:
        return ProcessNoise(self.sigma_a, self.sigma_alpha)

    @property
    def prior(self) -> InitialUncertainty:
        return InitialUncertainty(self.init_c, self.init_q, self.init_v, self.init_w)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = SINGLE
    trials: int = 100
    point_counts: tuple = tuple(range(20, 201, 20))
    sigma_max: tuple = tuple(float(s) for s in range(1, 16))
    n_points: int = 100
    sigma_levels: tuple = tuple(float(s) for s in range(1, 11))
    scene_modes: tuple = SCENE_MODES
    methods: tuple = METHODS
    filter: FilterConfig = field(default_factory=FilterConfig)
    gn: pnp.GNConfig = field(default_factory=pnp.GNConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    seed: int = 0
    out: str | None = None
    per_frame: bool | None = None
    record_timing: bool | None = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for name in ("point_counts", "sigma_max", "sigma_levels", "scene_modes", "methods"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.trials <= 0 or self.n_points <= 0 or self.workers <= 0:
            raise ConfigError("counts must be positive")
        if not self.sweep_values:
            raise ConfigError("empty sweep")
        if not self.scene_modes or any(m not in SCENE_MODES for m in self.scene_modes):
            raise ConfigError(f"scene modes must be drawn from {SCENE_MODES}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods must be drawn from {METHODS}")

    @property
    def sweep_values(self) -> tuple:
        if self.experiment in (VARY_N, TIMING):
            return self.point_counts
        if self.experiment == VARY_SIGMA:
            return self.sigma_max
        return (self.n_points,)

    @property
    def sweep_variable(self) -> str:
        return "max_sigma_px" if self.experiment == VARY_SIGMA else "n_points"

    @property
    def write_per_frame(self) -> bool:
        return self.experiment == SINGLE if self.per_frame is None else self.per_frame

    @property
    def timed(self) -> bool:
        return self.experiment == TIMING if self.record_timing is None else self.record_timing

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        nested = {"filter": FilterConfig, "gn": pnp.GNConfig, "trajectory": TrajectoryConfig}
        for key, typ in nested.items():
            if key in d and isinstance(d[key], dict):
                d[key] = typ(**d[key])
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def trial_setup(self, sweep_value, trial: int, mode: str) -> tuple:
        """Scene and noise configs for one trial; seeds derived from the base seed."""
        ss = np.random.SeedSequence(
            [self.seed, SCENE_MODES.index(mode), self.sweep_values.index(sweep_value), trial]
        )
        scene_seed, noise_seed = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
        if self.experiment == VARY_SIGMA:
            levels = tuple(sweep_value * (i + 1) / 10.0 for i in range(10))
            n = self.n_points
        else:
            levels = self.sigma_levels
            n = int(sweep_value) if self.experiment != SINGLE else self.n_points
        return SceneConfig(n, mode, scene_seed), NoiseSchedule(levels, noise_seed)


@dataclass
class SequenceRun:
    """Per-frame output of one method on one sequence."""

    method: str
    poses: list
    times: np.ndarray
    failed: np.ndarray
    e_rot: np.ndarray = field(default_factory=lambda: np.zeros(0))
    e_trans: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def score(self, seq: SimSequence) -> "SequenceRun":
        T = seq.n_frames
        self.e_rot = np.full(T, np.nan)
        self.e_trans = np.full(T, np.nan)
        for k, (gt, est) in enumerate(zip(seq.poses, self.poses)):
            if est is None:
                continue
            self.e_rot[k] = rot_error(gt.R, est.R)
            try:
                self.e_trans[k] = trans_error(gt.t, est.t)
            except ZeroEstimate:
                self.failed[k] = True
        return self


def _bootstrap(seq: SimSequence, gn: pnp.GNConfig) -> tuple[Pose, Pose]:
    if seq.scene.mode == PLANAR:
        return seq.poses[0], seq.poses[1]
    try:
        return tuple(pnp.solve(pnp.PnPProblem(seq.points, seq.noisy[k], seq.intr), gn) for k in (0, 1))
    except (DegenerateConfiguration, CheiralityViolation) as exc:
        raise InitializationFailure(f"bootstrap failed: {exc}") from exc


def run_ekf(seq: SimSequence, fcfg: FilterConfig, gn: pnp.GNConfig) -> SequenceRun:
    T = seq.n_frames
    times = np.zeros(T)
    failed = np.zeros(T, dtype=bool)
    t0 = time.perf_counter()
    p0, p1 = _bootstrap(seq, gn)
    times[0] = times[1] = 0.5 * (time.perf_counter() - t0)
    st = init_from_two_poses(p0, p1, 1.0, fcfg.prior)
    poses = [p0, p1]
    pn = fcfg.process_noise
    for k in range(2, T):
        t0 = time.perf_counter()
        st = predict(st, pn)
        sigma = max(np.sqrt(seq.common_variance(k)), fcfg.sigma_floor)
        try:
            st, info = correct(st, seq.noisy[k], seq.points, seq.intr, MeasurementNoise(sigma))
            failed[k] = info.skipped
        except SingularInnovation:
            failed[k] = True
        times[k] = time.perf_counter() - t0
        poses.append(state_pose(st))
    return SequenceRun(EKF, poses, times, failed)


def run_baseline(seq: SimSequence, gn: pnp.GNConfig) -> SequenceRun:
    """Independent per-frame solves.

    Planar scenes cannot be initialized by the DLT, so each frame is refined
    from the previous estimate, starting from the ground-truth first pose.
    """
    T = seq.n_frames
    times = np.zeros(T)
    failed = np.zeros(T, dtype=bool)
    poses = []
    prev = seq.poses[0]
    for k in range(T):
        prob = pnp.PnPProblem(seq.points, seq.noisy[k], seq.intr)
        t0 = time.perf_counter()
        try:
            if seq.scene.mode == ORDINARY:
                est = pnp.solve(prob, gn)
            else:
                est = pnp.refine_gn(prev, prob, gn).pose
                prev = est
        except (DegenerateConfiguration, CheiralityViolation):
            est = None
            failed[k] = True
        times[k] = time.perf_counter() - t0
        poses.append(est)
    return SequenceRun(BASELINE, poses, times, failed)


def run_sequence(seq: SimSequence, method: str, fcfg: FilterConfig | None = None, gn: pnp.GNConfig | None = None):
    """Per-frame pose estimates, timings and failure flags for one method."""
    fcfg = fcfg or FilterConfig()
    gn = gn or pnp.GNConfig()
    if method == EKF:
        run = run_ekf(seq, fcfg, gn)
    elif method == BASELINE:
        run = run_baseline(seq, gn)
    else:
        raise ValueError(f"unknown method {method!r}")
    return run.score(seq)


@dataclass
class TrialRecord:
    scene_mode: str
    method: str
    sweep_value: float
    trial: int
    e_rot: np.ndarray
    e_trans: np.ndarray
    time_s: np.ndarray
    failed: np.ndarray


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list

    def cells(self):
        keys = []
        for r in self.records:
            key = (r.scene_mode, r.method, r.sweep_value)
            if key not in keys:
                keys.append(key)
        return keys

    def select(self, scene_mode, method, sweep_value) -> list:
        return [
            r
            for r in self.records
            if (r.scene_mode, r.method, r.sweep_value) == (scene_mode, method, sweep_value)
        ]

    def final_values(self, scene_mode, method, sweep_value, metric: str) -> np.ndarray:
        """Final-frame values over trials; NaN where that frame failed."""
        out = []
        for r in self.select(scene_mode, method, sweep_value):
            v = getattr(r, metric)[-1]
            out.append(np.nan if r.failed[-1] else v)
        return np.asarray(out, dtype=float)

    def mean(self, scene_mode, method, sweep_value, metric: str) -> tuple[float, int]:
        """Mean final-frame metric and the number of excluded (failed) trials."""
        if metric == "time_s":
            vals = np.array(
                [np.mean(r.time_s[2:]) for r in self.select(scene_mode, method, sweep_value)]
            )
        else:
            vals = self.final_values(scene_mode, method, sweep_value, metric)
        ok = vals[np.isfinite(vals)]
        excluded = int(vals.size - ok.size)
        return (float(np.mean(ok)) if ok.size else float("nan")), excluded

    def frame_means(self, scene_mode, method, sweep_value, metric: str) -> np.ndarray:
        """Per-frame mean over trials, skipping failed frames."""
        rows = self.select(scene_mode, method, sweep_value)
        stack = np.array([np.where(r.failed, np.nan, getattr(r, metric)) for r in rows])
        with np.errstate(invalid="ignore"):
            counts = np.isfinite(stack).sum(axis=0)
            sums = np.nansum(stack, axis=0)
            return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    def summary(self) -> list:
        rows = []
        for mode, method, value in self.cells():
            row = {"scene_mode": mode, "method": method, "sweep_value": value}
            for metric in ("e_rot", "e_trans", "time_s"):
                row[metric], row[f"{metric}_excluded"] = self.mean(mode, method, value, metric)
            rows.append(row)
        return rows


def _run_trial(cfg: ExperimentConfig, poses_by_mode: dict, mode: str, value, trial: int) -> list:
    scene, sched = cfg.trial_setup(value, trial, mode)
    seq = simulate(scene, cfg.trajectory, sched, poses=poses_by_mode[mode])
    records = []
    for method in cfg.methods:
        try:
            run = run_sequence(seq, method, cfg.filter, cfg.gn)
            e_rot, e_trans, t, failed = run.e_rot, run.e_trans, run.times, run.failed
        except InitializationFailure as exc:
            log.warning("%s/%s/%s trial %d: %s", mode, method, value, trial, exc)
            T = seq.n_frames
            e_rot, e_trans, t = np.full(T, np.nan), np.full(T, np.nan), np.zeros(T)
            failed = np.ones(T, dtype=bool)
        if not cfg.timed:
            t = np.full_like(t, np.nan)
        records.append(TrialRecord(mode, method, value, trial, e_rot, e_trans, t, failed))
    return records


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the sweep x trials grid for every scene mode and method.

    The trajectory is fixed per scene mode; points and noise are redrawn for
    every trial.
    """
    poses_by_mode = {mode: gen_trajectory(cfg.trajectory, scene_centroid(mode)) for mode in cfg.scene_modes}
    jobs = [
        (mode, value, trial)
        for mode in cfg.scene_modes
        for value in cfg.sweep_values
        for trial in range(cfg.trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as ex:
            futures = [ex.submit(_run_trial, cfg, poses_by_mode, *job) for job in jobs]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_run_trial(cfg, poses_by_mode, *job) for job in jobs]
    records = [r for chunk in chunks for r in chunk]
    order = {(m, v): (cfg.scene_modes.index(m), cfg.sweep_values.index(v)) for m, v, _ in jobs}
    records.sort(key=lambda r: (*order[(r.scene_mode, r.sweep_value)], cfg.methods.index(r.method), r.trial))
    return ExperimentResult(cfg, records)
