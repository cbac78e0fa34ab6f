"""Synthetic sequences: point clouds, a smooth camera path and ramped pixel noise.

Everything is a pure function of the configs and their seeds. Independent
random streams are derived with :class:`numpy.random.SeedSequence` from
``(seed, purpose, index...)`` entropy tuples, so trials and frames never share
a stream.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .camera import Intrinsics, Pose, observe, world_to_camera
from .errors import ConfigError
from .geom3 import quat_from_rotvec, quat_mul, rotmat_to_quat

ORDINARY = "ordinary"
PLANAR = "planar"
SCENE_MODES = (ORDINARY, PLANAR)

ORDINARY_BOX = ((-2.0, 2.0), (-2.0, 2.0), (4.0, 8.0))
PLANAR_SQUARE = ((-2.0, 2.0), (-2.0, 2.0))

# stream tags mixed into seed entropy
_POINTS, _TRAJ, _GROUPS, _NOISE = 1, 2, 3, 4


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *map(int, keys)]))


def scene_centroid(mode: str) -> np.ndarray:
    if mode == ORDINARY:
        return np.array([np.mean(r) for r in ORDINARY_BOX])
    if mode == PLANAR:
        return np.array([0.0, 0.0, 0.0])
    raise ConfigError(f"unknown scene mode {mode!r}")


@dataclass(frozen=True)
class SceneConfig:
    n_points: int = 100
    mode: str = ORDINARY
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SCENE_MODES:
            raise ConfigError(f"unknown scene mode {self.mode!r}")
        minimum = 6 if self.mode == ORDINARY else 4
        if self.n_points < minimum:
            raise ConfigError(f"{self.mode} scenes need at least {minimum} points")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Camera path on a horizontal arc around the scene centroid.

    Angles are radians, lengths meters. The arc is swept at constant angular
    rate; height, radius, roll and small yaw/pitch offsets from the look-at
    direction follow sinusoids whose phases are drawn from ``seed``.
    """

    n_frames: int = 200
    radius: float = 10.0
    arc: float = np.pi / 2
    height_amplitude: float = 1.0
    radius_amplitude: float = 1.0
    yaw_amplitude: float = 0.05
    pitch_amplitude: float = 0.05
    roll_amplitude: float = 0.3
    cycles: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.n_frames < 3:
            raise ConfigError("a trajectory needs at least 3 frames")
        if self.radius <= 0:
            raise ConfigError("radius must be positive")


@dataclass(frozen=True)
class NoiseSchedule:
    """Pixel noise levels, each assigned to an equal share of the points.

    The noise std of a point is its level times ``k / (T - 1)`` at frame ``k``
    of ``T``.
    """

    sigma_levels: tuple = tuple(float(s) for s in range(1, 11))
    seed: int = 0

    def __post_init__(self):
        levels = tuple(float(s) for s in self.sigma_levels)
        if not levels or any(not s > 0 for s in levels):
            raise ConfigError("noise levels must be positive")
        object.__setattr__(self, "sigma_levels", levels)

    def assign(self, n_points: int) -> np.ndarray:
        """Per-point sigma: a seeded permutation split into equal groups."""
        levels = np.asarray(self.sigma_levels)
        order = rng_for(self.seed, _GROUPS).permutation(n_points)
        group = np.empty(n_points, dtype=int)
        group[order] = (np.arange(n_points) * len(levels)) // n_points
        return levels[group]


def gen_points(cfg: SceneConfig) -> np.ndarray:
    rng = rng_for(cfg.seed, _POINTS)
    if cfg.mode == ORDINARY:
        lo = np.array([r[0] for r in ORDINARY_BOX])
        hi = np.array([r[1] for r in ORDINARY_BOX])
        return rng.uniform(lo, hi, size=(cfg.n_points, 3))
    lo = np.array([r[0] for r in PLANAR_SQUARE])
    hi = np.array([r[1] for r in PLANAR_SQUARE])
    xy = rng.uniform(lo, hi, size=(cfg.n_points, 2))
    return np.column_stack((xy, np.zeros(cfg.n_points)))


def look_at(center: np.ndarray, target: np.ndarray) -> np.ndarray:
    """World-to-camera rotation with the optical axis toward ``target``.

    Image y points along world +y (down) as far as the viewing direction allows.
    """
    z = target - center
    z = z / np.linalg.norm(z)
    x = np.cross([0.0, 1.0, 0.0], z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack((x, y, z))


def gen_trajectory(cfg: TrajectoryConfig, target: np.ndarray) -> list:
    """Ground-truth camera poses, one per frame, viewing ``target``."""
    target = np.asarray(target, dtype=float)
    phases = rng_for(cfg.seed, _TRAJ).uniform(0.0, 2 * np.pi, size=5)
    k = np.arange(cfg.n_frames)
    u = k / (cfg.n_frames - 1)
    w = 2 * np.pi * cfg.cycles * u

    phi = cfg.arc * (u - 0.5)
    r = cfg.radius + cfg.radius_amplitude * np.sin(w + phases[0])
    h = cfg.height_amplitude * np.sin(w + phases[1])
    yaw = cfg.yaw_amplitude * np.sin(w + phases[2])
    pitch = cfg.pitch_amplitude * np.sin(w + phases[3])
    roll = cfg.roll_amplitude * np.sin(w + phases[4])

    poses = []
    for i in range(cfg.n_frames):
        c = target + np.array([r[i] * np.sin(phi[i]), h[i], -r[i] * np.cos(phi[i])])
        q_look = rotmat_to_quat(look_at(c, target))
        # offsets expressed in the camera frame: yaw about y, pitch about x, roll about z
        q_off = quat_mul(
            quat_from_rotvec([0.0, 0.0, roll[i]]),
            quat_mul(quat_from_rotvec([pitch[i], 0.0, 0.0]), quat_from_rotvec([0.0, yaw[i], 0.0])),
        )
        pose = Pose(q=quat_mul(q_off, q_look), c=c)
        if not world_to_camera(pose, target)[2] > 0:
            raise ConfigError(f"frame {i}: scene centroid is behind the camera")
        poses.append(pose)
    return poses


def ramp(k: int, n_frames: int) -> float:
    return k / (n_frames - 1)


def apply_noise(clean: np.ndarray, sigmas: np.ndarray, k: int, n_frames: int, seed: int) -> np.ndarray:
    """Add the frame-``k`` Gaussian pixel noise to one observation vector."""
    clean = np.asarray(clean, dtype=float)
    scale = np.repeat(np.asarray(sigmas, dtype=float) * ramp(k, n_frames), 2)
    if k == 0:
        return clean.copy()
    return clean + scale * rng_for(seed, _NOISE, k).standard_normal(clean.shape)


def common_variance(sigmas: np.ndarray, k: int, n_frames: int) -> float:
    """Mean of the per-point noise variances at frame ``k``."""
    return float(np.mean((np.asarray(sigmas) * ramp(k, n_frames)) ** 2))


@dataclass
class SimSequence:
    poses: list
    points: np.ndarray
    clean: np.ndarray
    noisy: np.ndarray
    sigmas: np.ndarray
    intr: Intrinsics = field(default_factory=Intrinsics)
    scene: SceneConfig = field(default_factory=SceneConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    noise: NoiseSchedule | None = None

    @property
    def n_frames(self) -> int:
        return len(self.poses)

    def frame_sigmas(self, k: int) -> np.ndarray:
        return self.sigmas * ramp(k, self.n_frames)

    def common_variance(self, k: int) -> float:
        return common_variance(self.sigmas, k, self.n_frames)

    def to_dict(self) -> dict:
        return {
            "format": "ekfpnp.simsequence/1",
            "config": {
                "scene": asdict(self.scene),
                "trajectory": asdict(self.trajectory),
                "noise": None if self.noise is None else asdict(self.noise),
                "intrinsics": asdict(self.intr),
            },
            "poses": [{"c": p.c.tolist(), "q": p.q.tolist()} for p in self.poses],
            "points": self.points.tolist(),
            "sigmas": self.sigmas.tolist(),
            "clean": self.clean.tolist(),
            "noisy": self.noisy.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimSequence":
        cfg = d["config"]
        noise = cfg.get("noise")
        return cls(
            poses=[Pose(q=p["q"], c=p["c"]) for p in d["poses"]],
            points=np.asarray(d["points"], dtype=float),
            clean=np.asarray(d["clean"], dtype=float),
            noisy=np.asarray(d["noisy"], dtype=float),
            sigmas=np.asarray(d["sigmas"], dtype=float),
            intr=Intrinsics(**cfg["intrinsics"]),
            scene=SceneConfig(**cfg["scene"]),
            trajectory=TrajectoryConfig(**cfg["trajectory"]),
            noise=None if noise is None else NoiseSchedule(**noise),
        )

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def read(cls, path) -> "SimSequence":
        return cls.from_dict(json.loads(Path(path).read_text()))


def simulate(
    scene: SceneConfig,
    traj: TrajectoryConfig,
    sched: NoiseSchedule | None,
    intr: Intrinsics | None = None,
    poses: list | None = None,
) -> SimSequence:
    """Generate a full sequence. ``sched=None`` gives noiseless observations.

    Pass ``poses`` to reuse an already generated trajectory.
    """
    intr = intr or Intrinsics()
    pts = gen_points(scene)
    if poses is None:
        poses = gen_trajectory(traj, scene_centroid(scene.mode))
    clean = np.stack([observe(p, intr, pts) for p in poses])
    if sched is None:
        sigmas = np.zeros(len(pts))
        noisy = clean.copy()
    else:
        sigmas = sched.assign(len(pts))
        noisy = np.stack([apply_noise(clean[k], sigmas, k, len(poses), sched.seed) for k in range(len(poses))])
    return SimSequence(poses, pts, clean, noisy, sigmas, intr, scene, traj, sched)
