"""Seeded generator of labeled synthetic cutting trajectories.

The real VR recordings are private, so experiments run on a synthetic
proxy in which the quality class controls the two observable axes of a
good cut: higher classes are longer and more collinear. Each trajectory
is a straight 3D segment in a uniformly random direction, perturbed by
per-frame perpendicular Gaussian jitter and one low-frequency sinusoidal
bend, both shrinking as the class improves. The tool orientation follows
the local direction of motion with small-angle noise that also shrinks
with class quality. Adjacent classes deliberately overlap so that they
are learnable but not trivially separable.

Generation is deterministic: trajectory ordinal o under seed s draws from
its own generator seeded by (s, o), so datasets are reproducible byte for
byte and trajectories could be produced in any order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quat
from .errors import TooShort
from .util import atomic_write_text
from .trajectories import (
    Frame,
    LABELS_HEADER,
    NUM_CLASSES,
    RawTrajectory,
    write_trajectory,
)

TOOL_AXIS = np.array([0.0, 0.0, 1.0])


@dataclass
class SynthConfig:
    per_class: int = 30
    frames_range: tuple[int, int] = (120, 400)
    base_length: float = 0.10       # meters; class c cuts base_length * (0.5 + 0.1c)
    jitter_scale: float = 0.004     # sigma(c) = jitter_scale * (5 - c) + jitter_floor
    jitter_floor: float = 0.0005
    bend_scale: float = 0.004      # sinusoidal bend amplitude per quality step below 5
    rotation_noise: float = 0.05   # small-angle tool noise (rad) per quality step below 5
    speed_noise: float = 0.12      # relative speed irregularity per quality step below 5
    tremor_fraction: float = 0.3   # share of wobble energy in frame-rate tremor vs smooth drift
    seed: int = 0

    def __post_init__(self) -> None:
        if self.per_class < 1:
            raise ValueError("per_class must be at least 1")
        if self.frames_range[0] < 2 or self.frames_range[0] > self.frames_range[1]:
            raise ValueError("frames_range must satisfy 2 <= min <= max")
        if self.jitter_scale <= 0:
            raise ValueError("jitter_scale must be positive so noise decreases with class")

    def class_length(self, c: int) -> float:
        return self.base_length * (0.5 + 0.1 * c)

    def class_jitter(self, c: int) -> float:
        return self.jitter_scale * (NUM_CLASSES - 1 - c) + self.jitter_floor


def _perpendicular_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    helper = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(u, helper)) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(u, e1)


def _smooth_noise(rng: np.random.Generator, m: int) -> np.ndarray:
    """Unit-RMS band-limited noise: the slow drift component of hand wobble.

    White Gaussian noise is blurred with a Gaussian kernel whose width
    scales with the trajectory length (wobble lives in time, not frames)
    and rescaled to unit standard deviation.
    """
    width = max(3.0, m / 25.0)
    taps = np.arange(-int(3 * width), int(3 * width) + 1)
    kernel = np.exp(-0.5 * (taps / width) ** 2)
    smoothed = np.convolve(rng.normal(size=m + taps.size - 1), kernel, mode="valid")
    std = smoothed.std()
    return smoothed / std if std > 0 else smoothed


def _hand_noise(rng: np.random.Generator, m: int, tremor_fraction: float) -> np.ndarray:
    """Unit-RMS wobble: smooth drift plus frame-rate tremor."""
    drift = _smooth_noise(rng, m)
    tremor = rng.normal(size=m)
    return np.sqrt(1.0 - tremor_fraction) * drift + np.sqrt(tremor_fraction) * tremor


def _synth_trajectory(cfg: SynthConfig, c: int, ordinal: int) -> RawTrajectory:
    rng = np.random.default_rng([cfg.seed, ordinal])
    m = int(rng.integers(cfg.frames_range[0], cfg.frames_range[1] + 1))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    origin = rng.uniform(-0.1, 0.1, size=3)
    e1, e2 = _perpendicular_basis(direction)

    quality_gap = NUM_CLASSES - 1 - c

    # unsteady hands also advance unevenly along the cut
    speed = np.maximum(1.0 + cfg.speed_noise * quality_gap * _smooth_noise(rng, m), 0.05)
    s = np.concatenate([[0.0], np.cumsum(speed[:-1])])
    s /= s[-1]
    positions = origin + np.outer(s * cfg.class_length(c), direction)
    # one full bend cycle: zero net endpoint displacement, so the chord
    # keeps the intended cut length
    bend_angle = rng.uniform(0.0, 2 * np.pi)
    bend_dir = np.cos(bend_angle) * e1 + np.sin(bend_angle) * e2
    phase = rng.uniform(0.0, 2 * np.pi)
    bend = cfg.bend_scale * quality_gap * (np.sin(2 * np.pi * s + phase) - np.sin(phase))
    positions += np.outer(bend, bend_dir)

    # the blade follows the intended path, not the wobbled one
    ideal = positions.copy()

    # wobble is anchored where the blade enters and leaves the tissue
    envelope = np.sqrt(np.clip(4.0 * s * (1.0 - s), 0.0, 1.0))
    sigma = cfg.class_jitter(c)
    for axis in (e1, e2):
        wobble = _hand_noise(rng, m, cfg.tremor_fraction) * envelope
        rms = np.sqrt((wobble ** 2).mean())
        if rms > 0:
            positions += np.outer(sigma * wobble / rms, axis)

    # small-angle tool noise about two perpendicular axes
    rot_sigma = cfg.rotation_noise * quality_gap + 1e-3
    wobble1 = rot_sigma * _hand_noise(rng, m, cfg.tremor_fraction)
    wobble2 = rot_sigma * _hand_noise(rng, m, cfg.tremor_fraction)

    frames = []
    for i in range(m):
        lo = max(i - 1, 0)
        hi = min(i + 1, m - 1)
        motion = ideal[hi] - ideal[lo]
        norm = np.linalg.norm(motion)
        local_dir = motion / norm if norm > 1e-12 else direction
        q = quat.align_vectors(TOOL_AXIS, local_dir)
        noise = quat.multiply(
            quat.from_axis_angle(e1, wobble1[i]), quat.from_axis_angle(e2, wobble2[i])
        )
        q = quat.normalize(quat.multiply(noise, q))
        frames.append(Frame(index=i, translation=positions[i], rotation=q))
    return RawTrajectory(id=f"traj_c{c}_{ordinal:04d}", frames=frames, label=c)


def generate_trajectories(cfg: SynthConfig) -> list[RawTrajectory]:
    """All labeled trajectories for a config, in (class, ordinal) order."""
    out = []
    ordinal = 0
    for c in range(NUM_CLASSES):
        for _ in range(cfg.per_class):
            out.append(_synth_trajectory(cfg, c, ordinal))
            ordinal += 1
    return out


def generate(cfg: SynthConfig, out_dir: str | Path) -> Path:
    """Write a dataset directory: one CSV per trajectory plus labels.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [LABELS_HEADER]
    for t in generate_trajectories(cfg):
        fname = f"{t.id}.csv"
        write_trajectory(t, out_dir / fname)
        rows.append(f"{fname},{t.label}")
    atomic_write_text(out_dir / "labels.csv", "\n".join(rows) + "\n")
    return out_dir


def describe(t: RawTrajectory) -> tuple[float, float]:
    """Quality diagnostics: (chord length, RMS residual to the best-fit line).

    The residual comes from an orthogonal least-squares line fit on the
    translations: the line through the centroid along the principal
    direction minimizes the summed squared perpendicular distances.
    """
    if len(t.frames) < 2:
        raise TooShort(f"trajectory {t.id}: need at least 2 frames")
    points = np.array([f.translation for f in t.frames])
    chord = float(np.linalg.norm(points[-1] - points[0]))
    centered = points - points.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    along = centered @ vt[0]
    residual_sq = np.maximum((centered ** 2).sum(axis=1) - along ** 2, 0.0)
    return chord, float(np.sqrt(residual_sq.mean()))
