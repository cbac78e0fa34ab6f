"""Per-frame PnP: linear DLT resectioning followed by Gauss-Newton refinement.

Intrinsics are known, so the DLT works on normalized image coordinates and
only the rotation, translation and a free scale are recovered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics, Pose, as_points, jacobian_obs_state, observe_state
from .errors import CheiralityViolation, DegenerateConfiguration
from .geom3 import dquat_from_rotvec, dquatmul_right, quat_from_rotvec, quat_mul, quat_normalize, rotmat_to_quat

DLT_MIN_POINTS = 6
GN_MIN_POINTS = 4
RANK_TOL = 1e-10
MAX_HALVINGS = 10


@dataclass(frozen=True)
class PnPProblem:
    pts: np.ndarray
    obs: np.ndarray
    intr: Intrinsics = field(default_factory=Intrinsics)

    def __post_init__(self):
        pts = as_points(self.pts)
        obs = np.asarray(self.obs, dtype=float).reshape(-1)
        if obs.shape != (2 * len(pts),):
            raise ValueError(f"{len(pts)} points but {obs.size} observation values")
        object.__setattr__(self, "pts", pts)
        object.__setattr__(self, "obs", obs)


@dataclass(frozen=True)
class GNConfig:
    max_iters: int = 20
    step_tol: float = 1e-10
    residual_tol: float = 1e-12

    def __post_init__(self):
        if self.max_iters <= 0 or self.step_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("GN settings must be positive")


@dataclass(frozen=True)
class GNResult:
    pose: Pose
    costs: list
    iterations: int
    converged: bool


def _normalizing_transform(x: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(dim)."""
    dim = x.shape[1]
    centroid = x.mean(axis=0)
    mean_dist = np.linalg.norm(x - centroid, axis=1).mean()
    scale = np.sqrt(dim) / mean_dist if mean_dist > 0 else 1.0
    T = np.eye(dim + 1)
    T[:dim, :dim] *= scale
    T[:dim, dim] = -scale * centroid
    return T


def solve_dlt(prob: PnPProblem) -> Pose:
    """Linear pose from at least six non-coplanar correspondences."""
    n = len(prob.pts)
    if n < DLT_MIN_POINTS:
        raise ValueError(f"DLT needs at least {DLT_MIN_POINTS} points, got {n}")
    intr = prob.intr
    uv = prob.obs.reshape(-1, 2)
    m = np.column_stack(((uv[:, 0] - intr.cx) / intr.f, (uv[:, 1] - intr.cy) / intr.f))

    T2 = _normalizing_transform(m)
    T3 = _normalizing_transform(prob.pts)
    mh = np.column_stack((m, np.ones(n))) @ T2.T
    Xh = np.column_stack((prob.pts, np.ones(n))) @ T3.T

    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = Xh
    A[0::2, 8:12] = -mh[:, 0:1] * Xh
    A[1::2, 4:8] = Xh
    A[1::2, 8:12] = -mh[:, 1:2] * Xh
    _, sv, Vt = np.linalg.svd(A, full_matrices=False)
    if sv[-2] <= RANK_TOL * sv[0]:
        raise DegenerateConfiguration("point configuration is coplanar or otherwise rank deficient")

    P = np.linalg.solve(T2, Vt[-1].reshape(3, 4) @ T3)
    M = P[:, :3]
    if np.linalg.det(M) < 0:
        P = -P
        M = -M
    U, S, Vt3 = np.linalg.svd(M)
    R = U @ Vt3
    scale = S.mean()
    t = P[:, 3] / scale
    return Pose(q=rotmat_to_quat(R), c=-R.T @ t)


def _cost(pose_s: np.ndarray, prob: PnPProblem) -> float:
    r = prob.obs - observe_state(pose_s, prob.intr, prob.pts)
    return float(r @ r)


def _pose_vector(q: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.concatenate((c, q, np.zeros(6)))


def refine_gn(init: Pose, prob: PnPProblem, cfg: GNConfig | None = None) -> GNResult:
    """Minimize the summed squared pixel residual over ``(c, rotation)``.

    The rotation is perturbed on the right, ``q <- q * exp(delta)``. Each
    accepted step lowers the cost; rejected steps are halved up to ten times.
    """
    cfg = cfg or GNConfig()
    if len(prob.pts) < GN_MIN_POINTS:
        raise ValueError(f"refinement needs at least {GN_MIN_POINTS} points")
    q, c = init.q.copy(), init.c.copy()
    s = _pose_vector(q, c)
    try:
        cost = _cost(s, prob)
    except CheiralityViolation:
        raise CheiralityViolation("initial pose has points behind the camera") from None
    costs = [cost]
    dexp0 = dquat_from_rotvec(np.zeros(3))
    converged = cost < cfg.residual_tol
    it = 0
    while not converged and it < cfg.max_iters:
        it += 1
        r = prob.obs - observe_state(s, prob.intr, prob.pts)
        Hs = jacobian_obs_state(s, prob.intr, prob.pts)
        J = np.hstack((Hs[:, 0:3], Hs[:, 3:7] @ dquatmul_right(q) @ dexp0))
        step, *_ = np.linalg.lstsq(J, r, rcond=None)

        alpha = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            dc, dth = alpha * step[:3], alpha * step[3:]
            q_new = quat_normalize(quat_mul(q, quat_from_rotvec(dth)))
            c_new = c + dc
            s_new = _pose_vector(q_new, c_new)
            try:
                cost_new = _cost(s_new, prob)
            except CheiralityViolation:
                alpha *= 0.5
                continue
            if cost_new <= cost:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # no descent along the GN direction: current pose is the best visited
            converged = np.linalg.norm(step) <= cfg.step_tol or cost < cfg.residual_tol
            break
        q, c, s = q_new, c_new, s_new
        cost = cost_new
        costs.append(cost)
        if np.linalg.norm(alpha * step) <= cfg.step_tol or cost < cfg.residual_tol:
            converged = True
    return GNResult(Pose(q=q, c=c), costs, it, bool(converged))


def solve(prob: PnPProblem, cfg: GNConfig | None = None) -> Pose:
    """DLT initialization refined by Gauss-Newton."""
    return refine_gn(solve_dlt(prob), prob, cfg).pose


def rms_reprojection(pose: Pose, prob: PnPProblem) -> float:
    r = prob.obs - observe_state(_pose_vector(pose.q, pose.c), prob.intr, prob.pts)
    return float(np.sqrt(np.mean(r * r)))

