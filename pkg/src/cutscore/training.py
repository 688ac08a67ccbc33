"""Loss, optimizer, dataset splitting, training loops, and model files.

Training is fully deterministic: the epoch shuffles, the split, and the
weight initialization all flow from explicit integer seeds, so equal
(model, data, config) inputs reproduce histories and parameters bit for
bit. Model selection keeps the parameter snapshot of the epoch with the
highest validation accuracy, ties resolved toward the earliest epoch.

Transfer retraining freezes a prefix of the four conv blocks: frozen
parameters receive no optimizer updates and frozen batch norms run in
inference mode, so every frozen tensor (running statistics included) is
bitwise identical before and after retraining.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ClassCountMismatch,
    CorruptModelFile,
    EmptyClass,
    EmptySplit,
    FreezeOutOfRange,
    IoFailure,
    LabelOutOfRange,
    SchemaVersionMismatch,
    ShapeMismatch,
    UnlabeledWindow,
)
from .util import atomic_write_text
from .network import (
    Block,
    BatchNormLayer,
    CnnModel,
    ConvLayer,
    TRAINING,
    model_backward,
    model_forward,
    predict_proba,
)
from .trajectories import Window

MODEL_FORMAT_VERSION = 1
PROB_FLOOR = 1e-12  # clamp inside the log so confident mistakes stay finite


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 100
    batch_size: int = 16
    split_ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    freeze_blocks: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if min(self.split_ratios) <= 0 or abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError("split_ratios must be positive and sum to 1")
        if not 0 <= self.freeze_blocks <= 4:
            raise FreezeOutOfRange(f"freeze_blocks={self.freeze_blocks} not in 0..4")


@dataclass
class SplitDataset:
    train: list[Window]
    val: list[Window]
    test: list[Window]
    class_count: int


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float


def sparse_ce_loss(
    probs: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean negative log-probability of the true class.

    Returns (loss, gradient), where the gradient is taken with respect to
    the pre-softmax logits via the softmax cross-entropy identity
    (probs - onehot) / B, which is what `model_backward` consumes.
    """
    labels = np.asarray(labels)
    b, k = probs.shape
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= k:
        raise LabelOutOfRange(f"labels must lie in 0..{k - 1}")
    p_true = probs[np.arange(b), labels]
    loss = float(-np.mean(np.log(np.maximum(p_true, PROB_FLOOR))))
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return loss, grad


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to the params in place."""
    state.t += 1
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatch(f"gradient/state shape mismatch for {name}")
        m = state.m[name]
        v = state.v[name]
        m[...] = b1 * m + (1 - b1) * g
        v[...] = b2 * v + (1 - b2) * g * g
        p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_epsilon)
    return params, state


def split_dataset(
    windows: list[Window],
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
    class_count: int | None = None,
    group_by_source: bool = True,
) -> SplitDataset:
    """Stratified train/val/test split at the trajectory level.

    All windows of one recording land in the same split so near-duplicate
    windows cannot leak across splits; pass group_by_source=False to
    split individual windows instead. Per class, trajectory counts match
    the ratios by largest remainder. Deterministic in seed.
    """
    if not windows:
        raise EmptySplit("no windows to split")
    groups: dict[str, list[Window]] = {}
    labels: dict[str, int] = {}
    for i, w in enumerate(windows):
        if w.label is None:
            raise UnlabeledWindow(f"window from {w.source_id} has no label")
        key = w.source_id if group_by_source else f"{w.source_id}#{i}"
        groups.setdefault(key, []).append(w)
        labels[key] = w.label

    k = class_count if class_count is not None else max(labels.values()) + 1
    if max(labels.values()) >= k:
        raise LabelOutOfRange(f"label {max(labels.values())} >= class_count {k}")
    by_class: dict[int, list[str]] = {c: [] for c in range(k)}
    for key in sorted(groups):
        by_class[labels[key]].append(key)

    rng = np.random.default_rng(seed)
    parts: tuple[list[Window], list[Window], list[Window]] = ([], [], [])
    for c in range(k):
        ids = by_class[c]
        if not ids:
            raise EmptyClass(f"class {c} has no trajectories")
        order = rng.permutation(len(ids))
        counts = _largest_remainder(len(ids), ratios)
        cursor = 0
        for part, count in zip(parts, counts):
            for j in order[cursor:cursor + count]:
                part.extend(groups[ids[j]])
            cursor += count
    train, val, test = parts
    return SplitDataset(train=train, val=val, test=test, class_count=k)


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(x) for x in raw]
    # hand out the leftovers by descending fractional part, earlier part wins ties
    order = np.argsort([-(x - int(x)) for x in raw], kind="stable")
    for i in range(n - sum(counts)):
        counts[order[i]] += 1
    return counts


def _stack(windows: list[Window]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([w.values for w in windows])
    y = np.array([w.label for w in windows], dtype=int)
    return x, y


def _frozen_prefix(name: str, freeze_blocks: int) -> bool:
    return name.startswith("block") and int(name[5]) <= freeze_blocks


def train(
    model: CnnModel, data: SplitDataset, cfg: TrainConfig
) -> tuple[CnnModel, list[EpochRecord]]:
    """Train with shuffled mini-batches; return the best-validation snapshot.

    The passed model is trained in place for cfg.epochs epochs; the
    returned model is a copy taken after the epoch with the highest
    validation accuracy (earliest such epoch on ties). Train loss and
    accuracy are accumulated over the epoch's batches as seen during
    training; validation accuracy is a full inference pass per epoch.
    The test split is never touched here.
    """
    if not data.train or not data.val:
        raise EmptySplit("training requires non-empty train and val splits")
    if data.class_count != model.num_classes:
        raise ClassCountMismatch(
            f"model has {model.num_classes} classes, data has {data.class_count}"
        )
    x_train, y_train = _stack(data.train)
    x_val, y_val = _stack(data.val)
    n = x_train.shape[0]

    all_params = model.param_dict()
    trainable = {
        name: p for name, p in all_params.items()
        if not _frozen_prefix(name, cfg.freeze_blocks)
    }
    state = AdamState.for_params(trainable)
    rng = np.random.default_rng(cfg.seed)

    history: list[EpochRecord] = []
    best_model = model.copy()
    best_val = -1.0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            probs, cache = model_forward(
                model, xb, mode=TRAINING, frozen_blocks=cfg.freeze_blocks
            )
            loss, grad_logits = sparse_ce_loss(probs, yb)
            grads = model_backward(model, cache, grad_logits)
            adam_step(trainable, {k: grads[k] for k in trainable}, state, cfg)
            loss_sum += loss * len(idx)
            correct += int(np.sum(probs.argmax(axis=1) == yb))
        val_probs = predict_proba(model, x_val)
        val_acc = float(np.mean(val_probs.argmax(axis=1) == y_val))
        record = EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / n,
            train_acc=correct / n,
            val_acc=val_acc,
        )
        history.append(record)
        if val_acc > best_val:
            best_val = val_acc
            best_model = model.copy()

    best_model.train_meta = {
        "seed": cfg.seed,
        "epochs_run": cfg.epochs,
        "best_val_acc": best_val,
    }
    return best_model, history


def retrain_transfer(
    model: CnnModel, new_data: SplitDataset, cfg: TrainConfig
) -> tuple[CnnModel, list[EpochRecord]]:
    """Adapt a trained model to a related task with the first blocks frozen.

    With cfg.freeze_blocks = k, only blocks k+1..4 and the dense head are
    updated; frozen blocks (batch-norm statistics included) stay bitwise
    identical. freeze_blocks = 0 is plain training from the given weights.
    """
    if new_data.class_count != model.num_classes:
        raise ClassCountMismatch(
            f"model has {model.num_classes} classes, new data has {new_data.class_count}"
        )
    return train(model, new_data, cfg)


# --- model files ----------------------------------------------------------

def _tensor_entry(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "values": arr.ravel().tolist()}


def save_model(model: CnnModel, path: str | Path) -> None:
    """Serialize a model to JSON. Values survive the round trip exactly:
    floats are printed as shortest decimals that parse back bit-identical."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "arch": {
            "input_len": model.input_len,
            "input_channels": model.input_channels,
            "block_channels": list(model.block_channels),
            "kernel_size": model.kernel_size,
            "num_classes": model.num_classes,
        },
        "params": {k: _tensor_entry(v) for k, v in model.param_dict().items()},
        "bn_running": {k: _tensor_entry(v) for k, v in model.running_stats_dict().items()},
        "train_meta": model.train_meta,
    }
    atomic_write_text(Path(path), json.dumps(doc))


def _read_tensor(section: dict, name: str, shape: tuple[int, ...]) -> np.ndarray:
    entry = section.get(name)
    if entry is None:
        raise CorruptModelFile(f"tensor {name}: missing")
    if tuple(entry.get("shape", ())) != shape:
        raise CorruptModelFile(f"tensor {name}: shape {entry.get('shape')} != {list(shape)}")
    values = entry.get("values")
    if not isinstance(values, list) or len(values) != int(np.prod(shape)):
        raise CorruptModelFile(f"tensor {name}: expected {int(np.prod(shape))} values")
    return np.array(values, dtype=float).reshape(shape)


def load_model(path: str | Path) -> CnnModel:
    """Load a model saved by save_model; inference output is bit-identical."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"{path}: not valid JSON: {exc}") from exc

    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise SchemaVersionMismatch(
            f"{path}: format_version {doc.get('format_version')!r}, "
            f"expected {MODEL_FORMAT_VERSION}"
        )
    try:
        arch = doc["arch"]
        input_len = int(arch["input_len"])
        input_channels = int(arch["input_channels"])
        block_channels = tuple(int(c) for c in arch["block_channels"])
        kernel_size = int(arch["kernel_size"])
        num_classes = int(arch["num_classes"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModelFile(f"{path}: bad arch section: {exc}") from exc
    if len(block_channels) != 4:
        raise CorruptModelFile(f"{path}: block_channels must have 4 entries")

    params = doc.get("params", {})
    bn_running = doc.get("bn_running", {})
    blocks = []
    c_in = input_channels
    for b, c_out in enumerate(block_channels, start=1):
        conv1 = ConvLayer(
            kernel=_read_tensor(params, f"block{b}.conv1.kernel", (kernel_size, c_in, c_out)),
            bias=_read_tensor(params, f"block{b}.conv1.bias", (c_out,)),
        )
        conv2 = ConvLayer(
            kernel=_read_tensor(params, f"block{b}.conv2.kernel", (kernel_size, c_out, c_out)),
            bias=_read_tensor(params, f"block{b}.conv2.bias", (c_out,)),
        )
        bn = BatchNormLayer(
            gamma=_read_tensor(params, f"block{b}.bn.gamma", (c_out,)),
            beta=_read_tensor(params, f"block{b}.bn.beta", (c_out,)),
            running_mean=_read_tensor(bn_running, f"block{b}.bn.running_mean", (c_out,)),
            running_var=_read_tensor(bn_running, f"block{b}.bn.running_var", (c_out,)),
        )
        blocks.append(Block(conv1=conv1, conv2=conv2, bn=bn))
        c_in = c_out

    return CnnModel(
        input_len=input_len,
        input_channels=input_channels,
        block_channels=block_channels,
        kernel_size=kernel_size,
        num_classes=num_classes,
        blocks=blocks,
        head_weight=_read_tensor(params, "head.weight", (block_channels[-1], num_classes)),
        head_bias=_read_tensor(params, "head.bias", (num_classes,)),
        train_meta=doc.get("train_meta", {}),
    )


def history_to_json(history: list[EpochRecord]) -> str:
    """Render the per-epoch metrics as a JSON array of records."""
    return json.dumps([asdict(r) for r in history], indent=2)
