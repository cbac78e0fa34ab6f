"""Quaternion algebra and the analytic derivatives used by the filter.

Quaternions are length-4 float arrays ``[w, x, y, z]`` (scalar first) under the
Hamilton product. A quaternion ``q`` used as a camera orientation rotates world
vectors into the camera frame: ``x_cam = quat_rotate(q, x_world)``.
"""

from __future__ import annotations

import numpy as np

SMALL_ANGLE = 1e-8
# Below this angle the second-derivative coefficient of the exponential is
# evaluated by series; the closed form loses all digits to cancellation.
_SERIES_ANGLE = 1e-2

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat(w: float, x: float, y: float, z: float) -> np.ndarray:
    """Build a unit quaternion from (possibly unnormalized) components."""
    return quat_normalize(np.array([w, x, y, z], dtype=float))


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalize quaternion {q!r}")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b``. The result is not renormalized."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _sinc_half(theta: float) -> float:
    """sin(theta/2)/theta with a Taylor fallback near zero."""
    if theta < SMALL_ANGLE:
        return 0.5 - theta * theta / 48.0
    return np.sin(0.5 * theta) / theta


def quat_from_rotvec(rotvec: np.ndarray) -> np.ndarray:
    """Unit quaternion of the rotation ``rotvec`` (axis times angle, radians)."""
    v = np.asarray(rotvec, dtype=float)
    theta = float(np.linalg.norm(v))
    if theta < SMALL_ANGLE:
        w = 1.0 - theta * theta / 8.0
    else:
        w = np.cos(0.5 * theta)
    return np.concatenate(([w], _sinc_half(theta) * v))


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of ``q``.

    Uses the homogeneous quadratic form, so for a non-unit ``q`` the result is
    ``|q|^2`` times a rotation. This keeps ``quat_to_rotmat(q) @ x`` equal to the
    sandwich product ``q * [0, x] * conj(q)`` for every ``q``.
    """
    w, x, y, z = q
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    return np.array(
        [
            [ww + xx - yy - zz, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), ww - xx + yy - zz, 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), ww - xx - yy + zz],
        ]
    )


def quat_rotate(q: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Rotate ``x`` by ``q`` through the sandwich product ``q * [0, x] * q*``."""
    p = np.concatenate(([0.0], np.asarray(x, dtype=float)))
    return quat_mul(quat_mul(q, p), quat_conj(q))[1:]


def rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (with ``w >= 0``) of a proper rotation matrix."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    # Shepperd's method: pivot on the largest of w, x, y, z
    cands = np.array([tr, R[0, 0], R[1, 1], R[2, 2]])
    i = int(np.argmax(cands))
    if i == 0:
        s = 2.0 * np.sqrt(max(1.0 + tr, 0.0))
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif i == 1:
        s = 2.0 * np.sqrt(max(1.0 + R[0, 0] - R[1, 1] - R[2, 2], 0.0))
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif i == 2:
        s = 2.0 * np.sqrt(max(1.0 - R[0, 0] + R[1, 1] - R[2, 2], 0.0))
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(max(1.0 - R[0, 0] - R[1, 1] + R[2, 2], 0.0))
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    if q[0] < 0.0:
        q = -q
    return quat_normalize(q)


def rotvec_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Rotation vector ``theta`` with ``a * quat_from_rotvec(theta) == ±b``.

    The representative of ``b`` closest to ``a`` is used, so ``|theta| <= pi``.
    """
    d = quat_mul(quat_conj(a), b)
    if d[0] < 0.0:
        d = -d
    v = d[1:]
    s = float(np.linalg.norm(v))
    if s < SMALL_ANGLE:
        return 2.0 * v / d[0]
    return 2.0 * np.arctan2(s, d[0]) * v / s


def dquatmul_left(b: np.ndarray) -> np.ndarray:
    """Jacobian of ``quat_mul(a, b)`` with respect to ``a``."""
    w, x, y, z = b
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


def dquatmul_right(a: np.ndarray) -> np.ndarray:
    """Jacobian of ``quat_mul(a, b)`` with respect to ``b``."""
    w, x, y, z = a
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def dquat_from_rotvec(rotvec: np.ndarray) -> np.ndarray:
    """4x3 Jacobian of :func:`quat_from_rotvec`."""
    v = np.asarray(rotvec, dtype=float)
    theta = float(np.linalg.norm(v))
    s = _sinc_half(theta)
    # ds/dtheta / theta
    if theta < _SERIES_ANGLE:
        t2 = theta * theta
        ds_over_t = -1.0 / 24.0 + t2 / 960.0 - t2 * t2 / 107520.0
    else:
        ds_over_t = (0.5 * np.cos(0.5 * theta) * theta - np.sin(0.5 * theta)) / theta**3
    J = np.empty((4, 3))
    J[0] = -0.5 * s * v
    J[1:] = s * np.eye(3) + ds_over_t * np.outer(v, v)
    return J


def skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )
