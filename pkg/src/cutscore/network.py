"""From-scratch 1D CNN with exact analytic gradients, in double precision.

The classifier stacks four blocks of (conv, ReLU, conv, ReLU, batch norm)
with channel counts growing per block, then global average pooling, a
flatten (an identity once pooling has collapsed the time axis), and a
dense softmax head: 8 conv + 4 batch-norm + pool + flatten + dense = 15
countable layers.

Tensors are plain float64 numpy arrays shaped (batch, time, channels).
Convolutions are stride-1 cross-correlations with symmetric zero padding,
so the time length is preserved through the whole stack. Every forward
run in training mode returns a cache holding exactly the intermediates
the backward pass needs; `model_backward` then produces a gradient for
every parameter tensor, checked against central finite differences in
the test suite.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import ChannelMismatch, DegenerateBatch, ShapeMismatch, StaleCache

TRAINING = "training"
INFERENCE = "inference"


@dataclass
class ConvLayer:
    kernel: np.ndarray  # (K, in_channels, out_channels)
    bias: np.ndarray    # (out_channels,)

    def __post_init__(self) -> None:
        if self.kernel.shape[0] % 2 == 0:
            raise ShapeMismatch("kernel size must be odd for symmetric same-padding")


@dataclass
class BatchNormLayer:
    gamma: np.ndarray         # (channels,)
    beta: np.ndarray          # (channels,)
    running_mean: np.ndarray  # (channels,)
    running_var: np.ndarray   # (channels,)
    momentum: float = 0.9     # new = momentum * old + (1 - momentum) * batch
    epsilon: float = 1e-5


@dataclass
class Block:
    conv1: ConvLayer
    conv2: ConvLayer
    bn: BatchNormLayer


@dataclass
class CnnModel:
    input_len: int
    input_channels: int
    block_channels: tuple[int, int, int, int]
    kernel_size: int
    num_classes: int
    blocks: list[Block]
    head_weight: np.ndarray  # (last_block_channels, num_classes)
    head_bias: np.ndarray    # (num_classes,)
    train_meta: dict = field(default_factory=dict)

    @property
    def layer_count(self) -> int:
        # conv layers + batch norms + pool/flatten/dense head
        return 2 * len(self.blocks) + len(self.blocks) + 3

    def param_dict(self) -> dict[str, np.ndarray]:
        """Live references to every trainable tensor, in a fixed order."""
        params: dict[str, np.ndarray] = {}
        for b, block in enumerate(self.blocks, start=1):
            params[f"block{b}.conv1.kernel"] = block.conv1.kernel
            params[f"block{b}.conv1.bias"] = block.conv1.bias
            params[f"block{b}.conv2.kernel"] = block.conv2.kernel
            params[f"block{b}.conv2.bias"] = block.conv2.bias
            params[f"block{b}.bn.gamma"] = block.bn.gamma
            params[f"block{b}.bn.beta"] = block.bn.beta
        params["head.weight"] = self.head_weight
        params["head.bias"] = self.head_bias
        return params

    def running_stats_dict(self) -> dict[str, np.ndarray]:
        """Live references to the batch-norm running statistics."""
        stats: dict[str, np.ndarray] = {}
        for b, block in enumerate(self.blocks, start=1):
            stats[f"block{b}.bn.running_mean"] = block.bn.running_mean
            stats[f"block{b}.bn.running_var"] = block.bn.running_var
        return stats

    def parameter_count(self) -> int:
        return sum(p.size for p in self.param_dict().values())

    def copy(self) -> "CnnModel":
        return copy.deepcopy(self)


def init_model(
    input_len: int = 64,
    input_channels: int = 7,
    block_channels: tuple[int, int, int, int] = (16, 32, 64, 128),
    kernel_size: int = 3,
    num_classes: int = 6,
    seed: int = 0,
) -> CnnModel:
    """Build a fresh model with seeded uniform(+-1/sqrt(fan_in)) weights.

    Biases start at zero, batch-norm at the identity transform with
    running statistics (0, 1).
    """
    if list(block_channels) != sorted(set(block_channels)) or len(block_channels) != 4:
        raise ShapeMismatch("block_channels must be 4 strictly increasing integers")
    rng = np.random.default_rng(seed)

    def conv(c_in: int, c_out: int) -> ConvLayer:
        bound = 1.0 / np.sqrt(kernel_size * c_in)
        kernel = rng.uniform(-bound, bound, size=(kernel_size, c_in, c_out))
        return ConvLayer(kernel=kernel, bias=np.zeros(c_out))

    blocks = []
    c_in = input_channels
    for c_out in block_channels:
        bn = BatchNormLayer(
            gamma=np.ones(c_out),
            beta=np.zeros(c_out),
            running_mean=np.zeros(c_out),
            running_var=np.ones(c_out),
        )
        blocks.append(Block(conv1=conv(c_in, c_out), conv2=conv(c_out, c_out), bn=bn))
        c_in = c_out

    bound = 1.0 / np.sqrt(block_channels[-1])
    head_weight = rng.uniform(-bound, bound, size=(block_channels[-1], num_classes))
    return CnnModel(
        input_len=input_len,
        input_channels=input_channels,
        block_channels=tuple(block_channels),
        kernel_size=kernel_size,
        num_classes=num_classes,
        blocks=blocks,
        head_weight=head_weight,
        head_bias=np.zeros(num_classes),
    )


# --- layer forward/backward ---------------------------------------------------

def _pad_time(x: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (pad, pad), (0, 0)))


def _conv1d_forward(x: np.ndarray, layer: ConvLayer) -> tuple[np.ndarray, np.ndarray]:
    k, c_in, c_out = layer.kernel.shape
    if x.ndim != 3 or x.shape[2] != c_in:
        raise ChannelMismatch(f"input has {x.shape[-1] if x.ndim == 3 else '?'} channels, layer expects {c_in}")
    n = x.shape[1]
    x_pad = _pad_time(x, (k - 1) // 2)
    y = np.broadcast_to(layer.bias, (x.shape[0], n, c_out)).copy()
    for j in range(k):
        y += np.tensordot(x_pad[:, j:j + n, :], layer.kernel[j], axes=([2], [0]))
    return y, x_pad


def _conv1d_backward(
    grad_y: np.ndarray, x_pad: np.ndarray, layer: ConvLayer
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = layer.kernel.shape[0]
    n = grad_y.shape[1]
    pad = (k - 1) // 2
    grad_kernel = np.empty_like(layer.kernel)
    grad_x_pad = np.zeros_like(x_pad)
    for j in range(k):
        grad_kernel[j] = np.tensordot(x_pad[:, j:j + n, :], grad_y, axes=([0, 1], [0, 1]))
        grad_x_pad[:, j:j + n, :] += np.tensordot(grad_y, layer.kernel[j], axes=([2], [1]))
    grad_bias = grad_y.sum(axis=(0, 1))
    grad_x = grad_x_pad[:, pad:pad + n, :] if pad else grad_x_pad
    return grad_x, grad_kernel, grad_bias


def conv1d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Stride-1 same-padded cross-correlation, (B, N, C_in) -> (B, N, C_out)."""
    y, _ = _conv1d_forward(x, layer)
    return y


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _batchnorm_forward(
    x: np.ndarray, layer: BatchNormLayer, training: bool
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray] | None]:
    if x.shape[2] != layer.gamma.shape[0]:
        raise ChannelMismatch(
            f"input has {x.shape[2]} channels, batch norm expects {layer.gamma.shape[0]}"
        )
    if training:
        if x.shape[0] * x.shape[1] < 2:
            raise DegenerateBatch("batch statistics need at least 2 values per channel")
        mean = x.mean(axis=(0, 1))
        var = x.var(axis=(0, 1))  # biased
        layer.running_mean[...] = layer.momentum * layer.running_mean + (1 - layer.momentum) * mean
        layer.running_var[...] = layer.momentum * layer.running_var + (1 - layer.momentum) * var
    else:
        mean = layer.running_mean
        var = layer.running_var
    inv_std = 1.0 / np.sqrt(var + layer.epsilon)
    x_hat = (x - mean) * inv_std
    y = layer.gamma * x_hat + layer.beta
    cache = (x_hat, inv_std) if training else None
    return y, cache


def _batchnorm_backward(
    grad_y: np.ndarray, x_hat: np.ndarray, inv_std: np.ndarray, gamma: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = grad_y.shape[0] * grad_y.shape[1]
    grad_gamma = (grad_y * x_hat).sum(axis=(0, 1))
    grad_beta = grad_y.sum(axis=(0, 1))
    grad_xhat = grad_y * gamma
    grad_x = (inv_std / m) * (
        m * grad_xhat
        - grad_xhat.sum(axis=(0, 1))
        - x_hat * (grad_xhat * x_hat).sum(axis=(0, 1))
    )
    return grad_x, grad_gamma, grad_beta


def batchnorm_forward(x: np.ndarray, layer: BatchNormLayer, mode: str = TRAINING) -> np.ndarray:
    """Per-channel normalization over the batch and time axes.

    Training mode uses batch statistics (biased variance) and updates the
    layer's running statistics in place; inference mode reads the running
    statistics only. The learned affine transform is applied last.
    """
    if mode not in (TRAINING, INFERENCE):
        raise ValueError(f"mode must be '{TRAINING}' or '{INFERENCE}'")
    y, _ = _batchnorm_forward(x, layer, training=mode == TRAINING)
    return y


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the time axis, (B, N, C) -> (B, C)."""
    return x.mean(axis=1)


def dense_softmax(h: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map followed by a max-stabilized softmax; rows sum to 1."""
    if h.ndim != 2 or h.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"features of width {h.shape}, head expects {weight.shape[0]}")
    logits = h @ weight + bias
    return softmax(logits)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True) if logits.shape[0] else logits
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True) if logits.shape[0] else e


# --- full model ---------------------------------------------------------------

@dataclass
class ForwardCache:
    """Intermediates retained by a training-mode forward pass."""

    model_id: int
    mode: str
    frozen_blocks: int
    block_caches: list  # per block: (x_pad1, z1, a1_pad, z2, bn_cache)
    pooled: np.ndarray  # (B, C_last)
    time_len: int


def model_forward(
    model: CnnModel, x: np.ndarray, mode: str = TRAINING, frozen_blocks: int = 0
) -> tuple[np.ndarray, ForwardCache | None]:
    """Run the full stack; returns (probabilities, cache).

    The cache is only built in training mode. Batch norms of the first
    `frozen_blocks` blocks always run in inference mode so that frozen
    running statistics survive transfer retraining untouched.
    """
    if mode not in (TRAINING, INFERENCE):
        raise ValueError(f"mode must be '{TRAINING}' or '{INFERENCE}'")
    if x.ndim != 3 or x.shape[1] != model.input_len or x.shape[2] != model.input_channels:
        raise ShapeMismatch(
            f"input shape {x.shape} does not match model "
            f"(*, {model.input_len}, {model.input_channels})"
        )
    training = mode == TRAINING
    block_caches = []
    out = x
    for b, block in enumerate(model.blocks):
        bn_training = training and b >= frozen_blocks
        z1, x_pad1 = _conv1d_forward(out, block.conv1)
        a1 = relu(z1)
        z2, a1_pad = _conv1d_forward(a1, block.conv2)
        a2 = relu(z2)
        out, bn_cache = _batchnorm_forward(a2, block.bn, training=bn_training)
        if training:
            block_caches.append((x_pad1, z1, a1_pad, z2, bn_cache))
    pooled = global_avg_pool(out)
    probs = dense_softmax(pooled, model.head_weight, model.head_bias)
    if not training:
        return probs, None
    cache = ForwardCache(
        model_id=id(model),
        mode=mode,
        frozen_blocks=frozen_blocks,
        block_caches=block_caches,
        pooled=pooled,
        time_len=model.input_len,
    )
    return probs, cache


def model_backward(
    model: CnnModel, cache: ForwardCache | None, grad_logits: np.ndarray
) -> dict[str, np.ndarray]:
    """Backpropagate d(loss)/d(logits) to every parameter tensor.

    Frozen blocks receive exact zero gradients. The cache must come from
    a training-mode forward on this same model object.
    """
    if cache is None or cache.mode != TRAINING or cache.model_id != id(model):
        raise StaleCache("backward needs the cache of a training-mode forward on this model")
    grads = {name: np.zeros_like(p) for name, p in model.param_dict().items()}

    grads["head.weight"][...] = cache.pooled.T @ grad_logits
    grads["head.bias"][...] = grad_logits.sum(axis=0)
    grad_pooled = grad_logits @ model.head_weight.T

    n = cache.time_len
    grad_out = np.broadcast_to(grad_pooled[:, None, :] / n, (grad_pooled.shape[0], n, grad_pooled.shape[1]))
    for b in range(len(model.blocks) - 1, cache.frozen_blocks - 1, -1):
        block = model.blocks[b]
        x_pad1, z1, a1_pad, z2, bn_cache = cache.block_caches[b]
        x_hat, inv_std = bn_cache
        grad_a2, grad_gamma, grad_beta = _batchnorm_backward(
            grad_out, x_hat, inv_std, block.bn.gamma
        )
        grads[f"block{b + 1}.bn.gamma"][...] = grad_gamma
        grads[f"block{b + 1}.bn.beta"][...] = grad_beta
        grad_z2 = grad_a2 * (z2 > 0)
        grad_a1, grad_k2, grad_b2 = _conv1d_backward(grad_z2, a1_pad, block.conv2)
        grads[f"block{b + 1}.conv2.kernel"][...] = grad_k2
        grads[f"block{b + 1}.conv2.bias"][...] = grad_b2
        grad_z1 = grad_a1 * (z1 > 0)
        grad_out, grad_k1, grad_b1 = _conv1d_backward(grad_z1, x_pad1, block.conv1)
        grads[f"block{b + 1}.conv1.kernel"][...] = grad_k1
        grads[f"block{b + 1}.conv1.bias"][...] = grad_b1
    return grads


def predict_proba(model: CnnModel, values: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode class probabilities for a stack of windows (B, N, C)."""
    if values.shape[0] == 0:
        return np.zeros((0, model.num_classes))
    chunks = [
        model_forward(model, values[i:i + batch_size], mode=INFERENCE)[0]
        for i in range(0, values.shape[0], batch_size)
    ]
    return np.vstack(chunks)
