"""Small helpers shared across modules: atomic writes and seed derivation."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import IoFailure


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path via a temp file + rename, so readers never see
    a partially written artifact."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def derive_seed(seed: int, salt: int) -> int:
    """Deterministically derive an independent child seed from (seed, salt).

    Used to give each pipeline stage (augmentation, splitting, weight
    init, shuffling) and each trajectory its own stream while keeping a
    single user-facing seed.
    """
    return int(np.random.SeedSequence([seed, salt]).generate_state(1)[0])
