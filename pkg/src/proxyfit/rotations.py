"""Axis-angle <-> rotation matrix conversions (numpy, float64)."""

from __future__ import annotations

import numpy as np


def axis_angle_to_matrix(aa: np.ndarray) -> np.ndarray:
    """Rodrigues formula for a single axis-angle vector (3,) -> (3, 3)."""
    aa = np.asarray(aa, dtype=np.float64)
    theta = float(np.linalg.norm(aa))
    if theta < 1e-12:
        return np.eye(3)
    k = aa / theta
    K = np.array(
        [
            [0.0, -k[2], k[1]],
            [k[2], 0.0, -k[0]],
            [-k[1], k[0], 0.0],
        ]
    )
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    """Log map of a proper rotation matrix -> axis-angle (3,)."""
    R = np.asarray(R, dtype=np.float64)
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_theta))
    if theta < 1e-9:
        return np.zeros(3)
    if theta > np.pi - 1e-6:
        # Near pi the skew part vanishes; recover the axis from R + I.
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
        # Fix signs using the largest component.
        i = int(np.argmax(axis))
        if axis[i] > 0:
            axis = axis / axis[i]
            axis[(i + 1) % 3] = A[i, (i + 1) % 3] / axis[i]
            axis[(i + 2) % 3] = A[i, (i + 2) % 3] / axis[i]
        axis = axis / np.linalg.norm(axis)
        return theta * axis
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return theta / (2.0 * np.sin(theta)) * w


def canonicalize_axis_angle(aa: np.ndarray) -> np.ndarray:
    """Wrap rotation angles into (-pi, pi] keeping the rotation unchanged."""
    aa = np.asarray(aa, dtype=np.float64)
    theta = float(np.linalg.norm(aa))
    if theta <= np.pi or theta < 1e-12:
        return aa.copy()
    wrapped = np.remainder(theta + np.pi, 2.0 * np.pi) - np.pi
    return aa * (wrapped / theta)
