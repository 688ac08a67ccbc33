"""Score computation and evaluation metrics.

Class labels 0-5 stand for quality scores 0-10 in steps of two: a window's
score is twice the expected class under the model's probabilities, and an
action's score is the mean over its windows. Both therefore live in
[0, 10], hitting the endpoints only for one-hot extremes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoWindows, NotAProbabilityVector, UnlabeledWindow
from .network import CnnModel, predict_proba
from .trajectories import NUM_CLASSES, Window


@dataclass
class WindowScore:
    window_id: str
    probabilities: np.ndarray  # (6,)
    score: float               # in [0, 10]


@dataclass
class ScoreReport:
    per_window: list[WindowScore]
    total: float

    @property
    def window_count(self) -> int:
        return len(self.per_window)

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "windows": [
                {
                    "id": ws.window_id,
                    "s_tr": ws.score,
                    "p": [float(v) for v in ws.probabilities],
                }
                for ws in self.per_window
            ],
        }


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) ints, rows = true class, columns = predicted

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0

    def to_csv(self) -> str:
        k = self.counts.shape[0]
        lines = ["true," + ",".join(f"pred_{j}" for j in range(k))]
        for i in range(k):
            lines.append(f"{i}," + ",".join(str(int(c)) for c in self.counts[i]))
        return "\n".join(lines) + "\n"


def score_window(p: np.ndarray) -> float:
    """Map 6-class probabilities to a 0-10 score: twice the expected class."""
    p = np.asarray(p, dtype=float)
    if p.shape != (NUM_CLASSES,):
        raise NotAProbabilityVector(f"expected {NUM_CLASSES} probabilities, got shape {p.shape}")
    if p.min() < 0.0:
        raise NotAProbabilityVector("probabilities must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise NotAProbabilityVector(f"probabilities sum to {p.sum():.8f}, not 1")
    return float(2.0 * np.dot(np.arange(NUM_CLASSES), p))


def score_action(
    probabilities: list[np.ndarray], window_ids: list[str] | None = None
) -> ScoreReport:
    """Score an action from its windows' probabilities; total is the mean."""
    if not probabilities:
        raise NoWindows("an action needs at least one window to score")
    if window_ids is None:
        window_ids = [str(k) for k in range(len(probabilities))]
    per_window = [
        WindowScore(window_id=wid, probabilities=np.asarray(p, dtype=float), score=score_window(p))
        for wid, p in zip(window_ids, probabilities)
    ]
    total = float(np.mean([ws.score for ws in per_window]))
    return ScoreReport(per_window=per_window, total=total)


def score_windows(model: CnnModel, windows: list[Window]) -> ScoreReport:
    """Run inference on windows and score the action they form."""
    if not windows:
        raise NoWindows("no windows to score")
    probs = predict_proba(model, np.stack([w.values for w in windows]))
    ids = [f"{w.source_id}:{k}" for k, w in enumerate(windows)]
    return score_action(list(probs), ids)


def evaluate(model: CnnModel, windows: list[Window]) -> tuple[float, ConfusionMatrix]:
    """Accuracy and confusion matrix of argmax predictions on labeled windows.

    Probability ties resolve to the lowest class index.
    """
    if not windows:
        raise NoWindows("no windows to evaluate")
    for w in windows:
        if w.label is None:
            raise UnlabeledWindow(f"window from {w.source_id} has no label")
    x = np.stack([w.values for w in windows])
    y = np.array([w.label for w in windows], dtype=int)
    predicted = predict_proba(model, x).argmax(axis=1)
    k = model.num_classes
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (y, predicted), 1)
    cm = ConfusionMatrix(counts=counts)
    return cm.accuracy, cm
