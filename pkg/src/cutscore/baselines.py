"""Classical classifiers over flattened windows, for the comparison table.

All three models consume the same representation: each (N, 7) window is
flattened to an N*7 feature row and standardized per feature with the
training split's statistics. They are deliberately simple from-scratch
implementations with fixed optimization budgets; every fit is
deterministic, since all updates are full-batch and need no sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSet
from .network import softmax
from .trajectories import Window


@dataclass
class BaselineConfig:
    logreg_learning_rate: float = 0.1
    logreg_iterations: int = 500
    logreg_l2: float = 1e-4
    knn_k: int = 5
    svm_epochs: int = 1000
    svm_l2: float = 1e-4


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # floored at 1e-12

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        return cls(mean=x.mean(axis=0), std=np.maximum(x.std(axis=0), 1e-12))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def windows_to_features(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten windows to rows of an (B, N*C) feature matrix plus labels."""
    x = np.stack([w.values.ravel() for w in windows])
    y = np.array([w.label for w in windows], dtype=int)
    return x, y


@dataclass
class LinearModel:
    weights: np.ndarray  # (features, classes)
    bias: np.ndarray     # (classes,)

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        # argmax resolves ties toward the lowest class index
        return self.decision_values(x).argmax(axis=1)


def fit_logreg(x: np.ndarray, y: np.ndarray, cfg: BaselineConfig | None = None) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent.

    Cross-entropy plus L2 (on the weights, not the bias), zero init.
    The 1/B gradient normalization makes the fit invariant to duplicating
    every training row.
    """
    cfg = cfg or BaselineConfig()
    if x.shape[0] == 0:
        raise EmptyTrainingSet("logistic regression needs at least one row")
    b, d = x.shape
    k = int(y.max()) + 1
    onehot = np.zeros((b, k))
    onehot[np.arange(b), y] = 1.0
    w = np.zeros((d, k))
    bias = np.zeros(k)
    for _ in range(cfg.logreg_iterations):
        probs = softmax(x @ w + bias)
        err = (probs - onehot) / b
        w -= cfg.logreg_learning_rate * (x.T @ err + cfg.logreg_l2 * w)
        bias -= cfg.logreg_learning_rate * err.sum(axis=0)
    return LinearModel(weights=w, bias=bias)


def predict_knn(
    train_x: np.ndarray, train_y: np.ndarray, queries: np.ndarray, k: int
) -> np.ndarray:
    """Euclidean k-nearest-neighbor majority vote.

    Equal distances resolve to the lower training-row index (stable sort);
    vote ties resolve to the lowest class index.
    """
    if train_x.shape[0] == 0:
        raise EmptyTrainingSet("KNN needs at least one training row")
    if not 1 <= k <= train_x.shape[0]:
        raise ValueError(f"k={k} must lie in 1..{train_x.shape[0]}")
    queries = np.atleast_2d(queries)
    # squared distances suffice for ranking
    d2 = (
        (queries ** 2).sum(axis=1, keepdims=True)
        - 2.0 * queries @ train_x.T
        + (train_x ** 2).sum(axis=1)
    )
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    n_classes = int(train_y.max()) + 1
    out = np.empty(queries.shape[0], dtype=int)
    for i, idx in enumerate(nearest):
        out[i] = int(np.bincount(train_y[idx], minlength=n_classes).argmax())
    return out


@dataclass
class SvmModel:
    """One-vs-rest linear SVM; the bias lives in an appended constant feature."""

    weights: np.ndarray  # (features + 1, classes)

    def decision_values(self, x: np.ndarray) -> np.ndarray:
        return _augment(x) @ self.weights

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.decision_values(x).argmax(axis=1)


def _augment(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def fit_svm(x: np.ndarray, y: np.ndarray, cfg: BaselineConfig | None = None) -> SvmModel:
    """One-vs-rest hinge loss + L2 by full-batch subgradient descent.

    Step schedule 1/(l2 * t) with t the epoch number; the huge early steps
    are tamed by the (1 - 1/t) weight shrinkage the same schedule induces.
    """
    cfg = cfg or BaselineConfig()
    if x.shape[0] == 0:
        raise EmptyTrainingSet("SVM needs at least one training row")
    xa = _augment(x)
    b, d = xa.shape
    k = int(y.max()) + 1
    targets = np.where(y[:, None] == np.arange(k), 1.0, -1.0)  # (B, K)
    w = np.zeros((d, k))
    lam = cfg.svm_l2
    for t in range(1, cfg.svm_epochs + 1):
        margins = targets * (xa @ w)
        active = (margins < 1.0).astype(float)
        subgrad = lam * w - (xa.T @ (active * targets)) / b
        w -= (1.0 / (lam * t)) * subgrad
    return SvmModel(weights=w)


def run_baselines(
    train: list[Window],
    test: list[Window],
    cfg: BaselineConfig | None = None,
) -> dict[str, float]:
    """Fit all three baselines on train windows; return test accuracies."""
    cfg = cfg or BaselineConfig()
    x_train, y_train = windows_to_features(train)
    x_test, y_test = windows_to_features(test)
    scaler = Standardizer.fit(x_train)
    x_train = scaler.transform(x_train)
    x_test = scaler.transform(x_test)

    results = {}
    logreg = fit_logreg(x_train, y_train, cfg)
    results["logreg"] = float(np.mean(logreg.predict(x_test) == y_test))
    knn_pred = predict_knn(x_train, y_train, x_test, cfg.knn_k)
    results["knn"] = float(np.mean(knn_pred == y_test))
    svm = fit_svm(x_train, y_train, cfg)
    results["svm"] = float(np.mean(svm.predict(x_test) == y_test))
    return results
