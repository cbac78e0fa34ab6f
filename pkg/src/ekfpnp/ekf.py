"""Extended Kalman filter for sequential camera pose estimation.

The state is the 13-vector ``[c, q, v, w]``: camera center, world-to-camera
orientation quaternion, linear velocity and angular velocity (per frame). The
motion model is constant velocity driven by random accelerations; the
observation model is the pinhole reprojection of known 3D points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .camera import CHEIRALITY_EPS, Intrinsics, Pose, as_points, jacobian_obs_state, observe_state
from .errors import SingularInnovation
from .geom3 import (
    dquat_from_rotvec,
    dquatmul_left,
    dquatmul_right,
    quat_from_rotvec,
    quat_mul,
    quat_normalize,
    quat_to_rotmat,
    rotvec_between,
)

STATE_DIM = 13
C, Q, V, W = slice(0, 3), slice(3, 7), slice(7, 10), slice(10, 13)
MIN_POINTS = 3


@dataclass(frozen=True)
class FilterState:
    s: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float).reshape(STATE_DIM)
        P = np.array(self.P, dtype=float).reshape(STATE_DIM, STATE_DIM)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "P", P)

    @property
    def c(self) -> np.ndarray:
        return self.s[C]

    @property
    def q(self) -> np.ndarray:
        return self.s[Q]

    @property
    def v(self) -> np.ndarray:
        return self.s[V]

    @property
    def w(self) -> np.ndarray:
        return self.s[W]


@dataclass(frozen=True)
class ProcessNoise:
    """Standard deviations of the linear (m/frame^2) and angular (rad/frame^2) accelerations."""

    sigma_a: float = 0.05
    sigma_alpha: float = 0.05

    def __post_init__(self):
        if self.sigma_a < 0 or self.sigma_alpha < 0:
            raise ValueError("process noise must be non-negative")

    def covariance(self, dt: float = 1.0) -> np.ndarray:
        """Covariance of the velocity impulses ``[a dt, alpha dt]``."""
        return np.diag([(self.sigma_a * dt) ** 2] * 3 + [(self.sigma_alpha * dt) ** 2] * 3)


@dataclass(frozen=True)
class MeasurementNoise:
    sigma_px: float

    def __post_init__(self):
        if not self.sigma_px > 0:
            raise ValueError(f"pixel noise must be positive, got {self.sigma_px}")


@dataclass(frozen=True)
class InitialUncertainty:
    """Diagonal variances of the initial covariance, per state block."""

    c: float = 1e-4
    q: float = 1e-4
    v: float = 1e-2
    w: float = 1e-2

    def covariance(self) -> np.ndarray:
        return np.diag([self.c] * 3 + [self.q] * 4 + [self.v] * 3 + [self.w] * 3)


@dataclass(frozen=True)
class UpdateInfo:
    """Diagnostics of one correction step."""

    innovation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    used: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    excluded: tuple = ()
    skipped: bool = False
    nis: float = float("nan")
    H: np.ndarray = field(default=None, repr=False)
    P_prior: np.ndarray = field(default=None, repr=False)
    sigma_px: float = float("nan")

    @cached_property
    def innovation_cov(self) -> np.ndarray:
        """``H P H^T + sigma^2 I``, built on demand."""
        if self.H is None:
            return np.zeros((0, 0))
        S = self.H @ self.P_prior @ self.H.T
        S[np.diag_indices_from(S)] += self.sigma_px**2
        return S


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def state_from_pose(pose: Pose, v=(0.0, 0.0, 0.0), w=(0.0, 0.0, 0.0), P=None) -> FilterState:
    s = np.concatenate((pose.c, pose.q, np.asarray(v, float), np.asarray(w, float)))
    if P is None:
        P = InitialUncertainty().covariance()
    return FilterState(s, P)


def state_pose(st: FilterState) -> Pose:
    return Pose(q=st.q, c=st.c)


def init_from_two_poses(
    p0: Pose, p1: Pose, dt: float = 1.0, prior: InitialUncertainty | None = None
) -> FilterState:
    """Filter state at the second pose, with velocities from the pose difference."""
    prior = prior or InitialUncertainty()
    v = (p1.c - p0.c) / dt
    w = rotvec_between(p0.q, p1.q) / dt
    return state_from_pose(p1, v, w, prior.covariance())


def motion_model(s: np.ndarray, impulse: np.ndarray | None = None, dt: float = 1.0) -> np.ndarray:
    """Constant-velocity mean map with velocity impulses ``[nu, Omega]``.

    The quaternion product is not renormalized, so this is the map whose
    Jacobians :func:`transition_jacobians` returns.
    """
    s = np.asarray(s, dtype=float)
    nu = np.zeros(3) if impulse is None else impulse[:3]
    om = np.zeros(3) if impulse is None else impulse[3:]
    v = s[V] + nu
    w = s[W] + om
    out = np.empty(STATE_DIM)
    out[C] = s[C] + v * dt
    out[Q] = quat_mul(s[Q], quat_from_rotvec(w * dt))
    out[V] = v
    out[W] = w
    return out


def transition_jacobians(s: np.ndarray, dt: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """``F`` (13x13, w.r.t. the state) and ``G`` (13x6, w.r.t. the impulses)."""
    q, w = s[Q], s[W]
    dq_dw = dquatmul_right(q) @ dquat_from_rotvec(w * dt) * dt

    F = np.eye(STATE_DIM)
    F[C, V] = dt * np.eye(3)
    F[Q, Q] = dquatmul_left(quat_from_rotvec(w * dt))
    F[Q, W] = dq_dw

    G = np.zeros((STATE_DIM, 6))
    G[C, 0:3] = dt * np.eye(3)
    G[Q, 3:6] = dq_dw
    G[V, 0:3] = np.eye(3)
    G[W, 3:6] = np.eye(3)
    return F, G


def predict(st: FilterState, pn: ProcessNoise, dt: float = 1.0) -> FilterState:
    F, G = transition_jacobians(st.s, dt)
    s = motion_model(st.s, None, dt)
    s[Q] = quat_normalize(s[Q])
    P = F @ st.P @ F.T + G @ pn.covariance(dt) @ G.T
    return FilterState(s, _symmetrize(P))


def correct(
    st: FilterState,
    z: np.ndarray,
    pts,
    intr: Intrinsics,
    mn: MeasurementNoise,
) -> tuple[FilterState, UpdateInfo]:
    """Kalman correction against pixel observations ``z`` of ``pts``.

    Points behind the predicted camera are dropped from the update and listed
    in ``UpdateInfo.excluded``. With fewer than three usable points the update
    is skipped and the prior returned unchanged.
    """
    pts = as_points(pts)
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * len(pts),):
        raise ValueError(f"observation length {z.shape} does not match {len(pts)} points")

    depth = ((pts - st.c) @ quat_to_rotmat(st.q).T)[:, 2]
    keep = np.flatnonzero(depth > CHEIRALITY_EPS)
    excluded = tuple(int(i) for i in np.flatnonzero(~(depth > CHEIRALITY_EPS)))
    if len(keep) < MIN_POINTS:
        return st, UpdateInfo(used=keep, excluded=excluded, skipped=True)

    pts_k = pts[keep]
    z_k = z.reshape(-1, 2)[keep].reshape(-1)
    H = jacobian_obs_state(st.s, intr, pts_k)
    nu = z_k - observe_state(st.s, intr, pts_k)

    # With U = sigma^2 I and P = L L^T, the gain P H^T (H P H^T + U)^-1 equals
    # L cap^-1 L^T H^T with the 13x13 SPD matrix cap = sigma^2 I + L^T H^T H L.
    sigma2 = mn.sigma_px**2
    evals, evecs = np.linalg.eigh(st.P)
    L = evecs * np.sqrt(np.clip(evals, 0.0, None))
    HL = H @ L
    cap = HL.T @ HL
    cap[np.diag_indices_from(cap)] += sigma2
    try:
        factor = cho_factor(cap, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise SingularInnovation(f"innovation covariance not positive definite: {exc}") from exc
    K = L @ cho_solve(factor, HL.T)
    s = st.s + K @ nu
    s[Q] = quat_normalize(s[Q])
    P = _symmetrize((np.eye(STATE_DIM) - K @ H) @ st.P)
    b = HL.T @ nu
    nis = float((nu @ nu - b @ cho_solve(factor, b)) / sigma2)
    info = UpdateInfo(
        innovation=nu, used=keep, excluded=excluded, nis=nis, H=H, P_prior=st.P, sigma_px=mn.sigma_px
    )
    return FilterState(s, P), info
