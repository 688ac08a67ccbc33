"""Shared oracles and builders for the test suite."""

import numpy as np
import pytest

from cutscore.trajectories import Frame, RawTrajectory


def fd_grad(f, arr, eps=1e-5):
    """Central finite-difference gradient of scalar f() wrt arr.

    Perturbs arr in place and restores it; f must read arr on every call.
    """
    grad = np.zeros_like(arr)
    flat, gflat = arr.ravel(), grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def rel_err(a, b):
    """Elementwise relative error, zero when both gradients vanish."""
    return np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-10)


def conv1d_bruteforce(x, kernel, bias):
    """Nested-loop zero-padded cross-correlation, the conv oracle."""
    batch, n, c_in = x.shape
    k, _, c_out = kernel.shape
    pad = (k - 1) // 2
    y = np.zeros((batch, n, c_out))
    for b in range(batch):
        for t in range(n):
            for o in range(c_out):
                acc = bias[o]
                for j in range(k):
                    src = t + j - pad
                    if 0 <= src < n:
                        for c in range(c_in):
                            acc += x[b, src, c] * kernel[j, c, o]
                y[b, t, o] = acc
    return y


def index_coded_trajectory(m, traj_id="coded", label=None):
    """Trajectory whose quaternions encode the frame index.

    Augmentation centers translations, so the quaternion channels (which
    augmentation must leave untouched) are the only way to trace an output
    row back to its source frame. Angles stay in (0, pi/2) so decoding by
    atan2 is exact for any practical m.
    """
    theta = (np.arange(m) + 0.5) * (np.pi / 2) / m
    frames = [
        Frame(
            index=i,
            translation=np.array([float(i), 0.0, 0.0]),
            rotation=np.array([np.sin(th), 0.0, 0.0, np.cos(th)]),
        )
        for i, th in enumerate(theta)
    ]
    return RawTrajectory(id=traj_id, frames=frames, label=label)


def decode_indices(window, m):
    """Recover the source frame indices encoded by index_coded_trajectory."""
    theta = np.arctan2(window.values[:, 3], window.values[:, 6])
    return np.round(theta * m * 2 / np.pi - 0.5).astype(int)


@pytest.fixture
def tiny_model():
    """The small architecture used for gradient checks."""
    from cutscore.network import init_model

    return init_model(
        input_len=16, input_channels=3, block_channels=(4, 8, 12, 16), seed=3
    )
