"""Pinhole observation model and its Jacobian with respect to the filter state.

Point sets are ``(n, 3)`` arrays of world coordinates. Observation vectors are
flat ``(2n,)`` arrays laid out ``[u0, v0, u1, v1, ...]`` in pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CheiralityViolation
from .geom3 import IDENTITY, quat_normalize, quat_rotate, quat_to_rotmat

CHEIRALITY_EPS = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    f: float = 800.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Camera pose: ``q`` rotates world into camera, ``c`` is the camera center."""

    q: np.ndarray = field(default_factory=lambda: IDENTITY.copy())
    c: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(4)
        # renormalizing an already-unit quaternion can flip low bits; keep it exact
        if abs(np.linalg.norm(q) - 1.0) > 4 * np.finfo(float).eps:
            q = quat_normalize(q)
        object.__setattr__(self, "q", q.copy())
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(3))

    @property
    def R(self) -> np.ndarray:
        return quat_to_rotmat(self.q)

    @property
    def t(self) -> np.ndarray:
        """Translation of ``x_cam = R x_world + t``."""
        return -self.R @ self.c


def as_points(pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError(f"expected a non-empty (n, 3) point array, got shape {pts.shape}")
    return pts


def world_to_camera(pose: Pose, x: np.ndarray) -> np.ndarray:
    """Camera-frame coordinates ``R (x - c)`` of one point or an ``(n, 3)`` array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return quat_rotate(pose.q, x - pose.c)
    return (x - pose.c) @ quat_to_rotmat(pose.q).T


def project(intr: Intrinsics, xc: np.ndarray) -> np.ndarray:
    """Pinhole projection of a camera-frame point to pixels."""
    xc = np.asarray(xc, dtype=float)
    if not xc[2] > CHEIRALITY_EPS:
        raise CheiralityViolation(f"point {xc} is not in front of the camera")
    return np.array([intr.f * xc[0] / xc[2] + intr.cx, intr.f * xc[1] / xc[2] + intr.cy])


def _project_many(intr: Intrinsics, xc: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(~(xc[:, 2] > CHEIRALITY_EPS))
    if bad.size:
        raise CheiralityViolation(f"{bad.size} point(s) behind the camera", bad)
    uv = intr.f * xc[:, :2] / xc[:, 2:3]
    uv[:, 0] += intr.cx
    uv[:, 1] += intr.cy
    return uv.reshape(-1)


def observe(pose: Pose, intr: Intrinsics, pts) -> np.ndarray:
    """Stacked pixel observations of ``pts`` seen from ``pose``."""
    pts = as_points(pts)
    return _project_many(intr, world_to_camera(pose, pts))


def observe_state(s: np.ndarray, intr: Intrinsics, pts) -> np.ndarray:
    """Observation model evaluated on the raw 13-vector (``q`` not renormalized)."""
    pts = as_points(pts)
    xc = (pts - s[0:3]) @ quat_to_rotmat(s[3:7]).T
    return _project_many(intr, xc)


def _drot_dq(q: np.ndarray) -> np.ndarray:
    """Derivatives of the quadratic-form rotation matrix, shape (4, 3, 3)."""
    w, x, y, z = 2.0 * np.asarray(q, dtype=float)
    return np.array(
        [
            [[w, -z, y], [z, w, -x], [-y, x, w]],
            [[x, y, z], [y, -x, -w], [z, w, -x]],
            [[-y, x, w], [x, y, z], [-w, z, -y]],
            [[-z, -w, x], [w, -z, y], [x, y, z]],
        ]
    )


def jacobian_obs_state(state, intr: Intrinsics, pts) -> np.ndarray:
    """Analytic ``(2n, 13)`` Jacobian of the observation model.

    ``state`` is a :class:`~ekfpnp.ekf.FilterState` or a raw 13-vector. The
    quaternion columns are derivatives with respect to the four raw
    components; the velocity columns are identically zero.
    """
    s = np.asarray(getattr(state, "s", state), dtype=float)
    pts = as_points(pts)
    c, q = s[0:3], s[3:7]
    R = quat_to_rotmat(q)
    d = pts - c
    xc = d @ R.T
    bad = np.flatnonzero(~(xc[:, 2] > CHEIRALITY_EPS))
    if bad.size:
        raise CheiralityViolation(f"{bad.size} point(s) behind the camera", bad)

    n = len(pts)
    inv_z = 1.0 / xc[:, 2]
    # d(pixel)/d(xc), shape (n, 2, 3)
    Jp = np.zeros((n, 2, 3))
    Jp[:, 0, 0] = intr.f * inv_z
    Jp[:, 1, 1] = intr.f * inv_z
    Jp[:, 0, 2] = -intr.f * xc[:, 0] * inv_z**2
    Jp[:, 1, 2] = -intr.f * xc[:, 1] * inv_z**2

    # d(xc)/dq, shape (n, 3, 4)
    dxc_dq = np.einsum("kij,nj->nik", _drot_dq(q), d)

    H = np.zeros((n, 2, 13))
    H[:, :, 0:3] = -Jp @ R
    H[:, :, 3:7] = Jp @ dxc_dq
    return H.reshape(2 * n, 13)
