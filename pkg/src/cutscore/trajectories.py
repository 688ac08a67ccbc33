"""Trajectory and window data types, file formats, and augmentation.

A recording is a variable-length sequence of per-frame tool transforms
(translation + unit quaternion). Training consumes fixed-length windows
cut from recordings by seeded random subsampling: one permutation of the
frame indices is drawn, split into floor(M/N) groups of N, and each
group is sorted back into temporal order. No frame is used twice, so a
long recording yields several windows and nothing is fabricated.

File formats:
  trajectory CSV  header ``frame,tx,ty,tz,qx,qy,qz,qw``, one row per frame
  labels.csv      header ``file,label`` mapping trajectory files to 0-5
  window CSV      repeated blocks of a ``#window N=.. C=7 source=.. label=..``
                  line followed by N data rows
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateFrameIndex,
    EmptyDataset,
    HeterogeneousWindows,
    IoFailure,
    LabelOutOfRange,
    MalformedRow,
    NonUnitQuaternion,
    TooShort,
    TooShortForWindow,
)
from .util import atomic_write_text, derive_seed

TRAJECTORY_HEADER = "frame,tx,ty,tz,qx,qy,qz,qw"
LABELS_HEADER = "file,label"
CHANNELS = 7  # tx, ty, tz, qx, qy, qz, qw
NUM_CLASSES = 6

# pre-normalization tolerance on |q| - 1; worse than this is rejected
QUAT_NORM_TOLERANCE = 1e-2


@dataclass
class Frame:
    """One captured tool transform."""

    index: int
    translation: np.ndarray  # (3,) meters
    rotation: np.ndarray     # (4,) unit quaternion, (qx, qy, qz, qw)


@dataclass
class RawTrajectory:
    """A full recording of one action, optionally labeled 0-5."""

    id: str
    frames: list[Frame]
    label: int | None = None

    def __len__(self) -> int:
        return len(self.frames)

    def as_matrix(self) -> np.ndarray:
        """Frame values as an (M, 7) array in channel order tx..qw."""
        return np.array(
            [np.concatenate([f.translation, f.rotation]) for f in self.frames]
        )


@dataclass
class Window:
    """Fixed-length (N, 7) slice of a trajectory, the classifier input unit."""

    source_id: str
    values: np.ndarray  # (N, 7)
    label: int | None = None


def parse_trajectory(path: str | Path, traj_id: str | None = None) -> RawTrajectory:
    """Read one trajectory CSV, renormalizing quaternions.

    Frames are sorted by index. Raises MalformedRow, NonUnitQuaternion,
    DuplicateFrameIndex, or TooShort on bad files; IoFailure if the file
    cannot be read.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if not lines or lines[0].strip() != TRAJECTORY_HEADER:
        raise MalformedRow(f"{path}: missing header '{TRAJECTORY_HEADER}'")

    frames: list[Frame] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 8:
            raise MalformedRow(f"{path}:{lineno}: expected 8 columns, got {len(fields)}")
        try:
            index = int(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise MalformedRow(f"{path}:{lineno}: non-numeric field") from exc
        if index < 0:
            raise MalformedRow(f"{path}:{lineno}: negative frame index {index}")
        q = np.array(values[3:])
        norm = float(np.linalg.norm(q))
        if abs(norm - 1.0) > QUAT_NORM_TOLERANCE:
            raise NonUnitQuaternion(
                f"{path}:{lineno}: quaternion norm {norm:.6f} deviates from 1"
            )
        frames.append(Frame(index, np.array(values[:3]), q / norm))

    frames.sort(key=lambda f: f.index)
    for a, b in zip(frames, frames[1:]):
        if a.index == b.index:
            raise DuplicateFrameIndex(f"{path}: frame index {a.index} appears twice")
    if len(frames) < 2:
        raise TooShort(f"{path}: {len(frames)} frame(s), need at least 2")

    return RawTrajectory(id=traj_id or path.stem, frames=frames)


def center_window(w: Window) -> Window:
    """Shift translations so the window starts at the origin.

    Quaternion channels and absolute scale are untouched: cut length
    carries skill information and must survive preprocessing. Idempotent.
    """
    values = w.values.copy()
    values[:, :3] -= values[0, :3]
    return Window(source_id=w.source_id, values=values, label=w.label)


def sample_and_augment(t: RawTrajectory, n: int, seed: int) -> list[Window]:
    """Cut a recording into floor(M/N) centered windows of N frames each.

    A seeded permutation of {0..M-1} is split into consecutive groups of
    N indices; each group is sorted ascending and gathered, so temporal
    order is preserved and no source frame appears in two windows. The
    leftover M mod N indices are discarded. Deterministic in (t, n, seed).
    """
    m = len(t.frames)
    if m < n:
        raise TooShortForWindow(f"trajectory {t.id}: M={m} < N={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    matrix = t.as_matrix()
    windows = []
    for g in range(m // n):
        idx = np.sort(perm[g * n:(g + 1) * n])
        w = Window(source_id=t.id, values=matrix[idx], label=t.label)
        windows.append(center_window(w))
    return windows


def _format_row(row: np.ndarray) -> str:
    # repr of a Python float is the shortest decimal that round-trips exactly
    return ",".join(repr(float(v)) for v in row)


def write_windows(windows: list[Window], path: str | Path) -> None:
    """Write windows as a window CSV. Values round-trip exactly."""
    if not windows:
        raise EmptyDataset("no windows to write")
    shape = windows[0].values.shape
    for w in windows:
        if w.values.shape != shape:
            raise HeterogeneousWindows(
                f"window shapes differ: {shape} vs {w.values.shape}"
            )
    lines = []
    for w in windows:
        label = "none" if w.label is None else str(w.label)
        lines.append(f"#window N={shape[0]} C={shape[1]} source={w.source_id} label={label}")
        lines.extend(_format_row(row) for row in w.values)
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def read_windows(path: str | Path) -> list[Window]:
    """Read a window CSV written by write_windows."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    windows: list[Window] = []
    i = 0
    while i < len(lines):
        line = lines[i]
        if not line.strip():
            i += 1
            continue
        if not line.startswith("#window "):
            raise MalformedRow(f"{path}:{i + 1}: expected '#window' header")
        fields = dict(part.split("=", 1) for part in line[len("#window "):].split())
        try:
            n = int(fields["N"])
            c = int(fields["C"])
            source = fields["source"]
            label = None if fields["label"] == "none" else int(fields["label"])
        except (KeyError, ValueError) as exc:
            raise MalformedRow(f"{path}:{i + 1}: bad window header") from exc
        block = lines[i + 1:i + 1 + n]
        if len(block) < n:
            raise MalformedRow(f"{path}: window at line {i + 1} is truncated")
        try:
            values = np.array([[float(v) for v in row.split(",")] for row in block])
        except ValueError as exc:
            raise MalformedRow(f"{path}: non-numeric value in window at line {i + 1}") from exc
        if values.shape != (n, c):
            raise MalformedRow(f"{path}: window at line {i + 1} has wrong shape")
        windows.append(Window(source_id=source, values=values, label=label))
        i += 1 + n
    if not windows:
        raise EmptyDataset(f"{path}: no windows")
    return windows


def augment_dataset(
    trajectories: list[RawTrajectory], n: int, seed: int
) -> tuple[list[Window], list[str]]:
    """Window every trajectory with at least N frames; report the rest.

    Each trajectory draws from its own seed derived from (seed, position),
    so results do not depend on how many trajectories precede a given one
    being re-windowed elsewhere. Returns (windows, skipped trajectory ids);
    recordings shorter than one window are rejected, never padded.
    """
    windows: list[Window] = []
    skipped: list[str] = []
    for i, t in enumerate(trajectories):
        if len(t.frames) < n:
            skipped.append(t.id)
            continue
        windows.extend(sample_and_augment(t, n, derive_seed(seed, i)))
    return windows, skipped


def write_trajectory(t: RawTrajectory, path: str | Path) -> None:
    """Write one trajectory CSV. parse_trajectory reads the values back exactly."""
    lines = [TRAJECTORY_HEADER]
    for f in t.frames:
        lines.append(f"{f.index}," + _format_row(np.concatenate([f.translation, f.rotation])))
    atomic_write_text(Path(path), "\n".join(lines) + "\n")


def load_dataset(
    data_dir: str | Path, labels_path: str | Path | None = None
) -> list[RawTrajectory]:
    """Load a dataset manifest: labeled trajectory CSVs under one directory.

    labels_path defaults to ``<data_dir>/labels.csv``. Trajectories are
    returned in manifest row order.
    """
    data_dir = Path(data_dir)
    labels_path = Path(labels_path) if labels_path else data_dir / "labels.csv"
    try:
        lines = labels_path.read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {labels_path}: {exc}") from exc
    if not lines or lines[0].strip() != LABELS_HEADER:
        raise MalformedRow(f"{labels_path}: missing header '{LABELS_HEADER}'")

    trajectories = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise MalformedRow(f"{labels_path}:{lineno}: expected 'file,label'")
        fname, label_str = fields[0].strip(), fields[1].strip()
        try:
            label = int(label_str)
        except ValueError as exc:
            raise MalformedRow(f"{labels_path}:{lineno}: non-integer label") from exc
        if not 0 <= label < NUM_CLASSES:
            raise LabelOutOfRange(f"{labels_path}:{lineno}: label {label} not in 0..5")
        t = parse_trajectory(data_dir / fname)
        t.label = label
        trajectories.append(t)
    if not trajectories:
        raise EmptyDataset(f"{labels_path}: no entries")
    return trajectories
