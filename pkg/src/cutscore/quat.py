"""Small quaternion helpers used by the synthetic generator.

Quaternions are stored as (qx, qy, qz, qw) arrays, matching the channel
layout of trajectory files. All functions accept and return float64
numpy arrays and never mutate their inputs.
"""

from __future__ import annotations

import numpy as np


def normalize(q: np.ndarray) -> np.ndarray:
    """Return q scaled to unit norm. Zero-norm input is the caller's bug."""
    return q / np.linalg.norm(q)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b in (x, y, z, w) component order."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    """Unit quaternion rotating by `angle` radians about `axis`."""
    axis = normalize(np.asarray(axis, dtype=float))
    half = 0.5 * angle
    return np.concatenate([np.sin(half) * axis, [np.cos(half)]])


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Apply the rotation represented by unit quaternion q to 3-vector v."""
    u = q[:3]
    w = q[3]
    return v + 2.0 * np.cross(u, np.cross(u, v) + w * v)


def align_vectors(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Shortest-arc unit quaternion rotating unit vector src onto dst.

    The antipodal case (src ~ -dst) has no unique shortest arc; it is
    resolved deterministically by a half-turn about a fixed axis
    perpendicular to src.
    """
    src = normalize(np.asarray(src, dtype=float))
    dst = normalize(np.asarray(dst, dtype=float))
    d = float(np.dot(src, dst))
    if d < -1.0 + 1e-12:
        perp = np.cross(src, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(perp) < 1e-8:
            perp = np.cross(src, np.array([0.0, 1.0, 0.0]))
        return from_axis_angle(perp, np.pi)
    xyz = np.cross(src, dst)
    return normalize(np.concatenate([xyz, [1.0 + d]]))
