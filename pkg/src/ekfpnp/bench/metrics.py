"""Pose error metrics."""

import numpy as np

from ..errors import ZeroEstimate


def rot_error(R_true: np.ndarray, R: np.ndarray) -> float:
    """Largest angle (degrees) between corresponding columns of two rotations.

    The column angle is ``arccos(a . b)``, evaluated as ``atan2(|a x b|, a . b)``:
    identical for unit columns, but arccos near 1 turns rounding in the dot
    product into ~1e-6 degree of spurious error. The dot is still clamped to
    [-1, 1] so no input yields NaN.
    """
    A = np.asarray(R_true, dtype=float)
    B = np.asarray(R, dtype=float)
    cos = np.clip(np.sum(A * B, axis=0), -1.0, 1.0)
    sin = np.linalg.norm(np.cross(A.T, B.T), axis=1)
    return float(np.degrees(np.arctan2(sin, cos)).max())


def trans_error(t_true: np.ndarray, t: np.ndarray) -> float:
    """Relative translation error in percent, normalized by the estimate's norm."""
    t = np.asarray(t, dtype=float)
    norm = np.linalg.norm(t)
    if norm == 0.0:
        raise ZeroEstimate("translation estimate has zero norm")
    return float(np.linalg.norm(np.asarray(t_true, dtype=float) - t) / norm * 100.0)
