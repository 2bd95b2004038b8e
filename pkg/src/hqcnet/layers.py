"""Classical network layers with hand-rolled reverse-mode gradients.

The stack mirrors the image branch of the hybrid model: three blocks of
[3x3 conv (stride 1, pad 1) -> ReLU -> 2x2 max-pool -> dropout(0.5)],
then flatten and a linear projection to the quantum register width.
On a 1x8x8 input the shapes walk 16x8x8 -> 16x4x4 -> 32x4x4 -> 32x2x2
-> 64x2x2 -> 64x1x1 -> 64 -> n_out.

Layer classes run on batches (B, ...) and cache whatever the backward
pass needs; the module-level functions are the single-sample primitives
the classes are built from.  Max-pool ties break toward the first entry
in row-major block order so the backward scatter is deterministic.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


# ---------------------------------------------------------------------------
# Functional primitives (single sample)

def conv2d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """3x3 convolution, stride 1, zero padding 1; (C,H,W) -> (K,H,W)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected (C,H,W) input, got shape {x.shape}")
    out, _ = _conv_batch_forward(x[None], np.asarray(weights, float), np.asarray(bias, float))
    return out[0]


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def maxpool2x2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 max-pool with stride 2 on (C,H,W); returns (pooled, argmax).

    argmax holds the winning position within each block, 0..3 in
    row-major block order, as needed to route gradients back.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValueError(f"expected (C,H,W) input, got shape {x.shape}")
    out, idx = _pool_batch_forward(x[None])
    return out[0], idx[0]


def dropout(x: np.ndarray, p: float, mode: str, rng: np.random.Generator) -> np.ndarray:
    """Inverted dropout: zero entries with probability p, rescale by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown dropout mode {mode!r}")
    x = np.asarray(x, dtype=float)
    if mode == "eval":
        return x.copy()
    mask = rng.random(x.shape) < (1.0 - p)
    return x * mask / (1.0 - p)


def linear_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map W x + b on a single vector."""
    x = np.asarray(x, dtype=float)
    weights = np.asarray(weights, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if x.ndim != 1 or weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ValueError(
            f"shape mismatch: x {x.shape}, W {weights.shape}"
        )
    if bias.shape != (weights.shape[0],):
        raise ValueError(f"bias shape {bias.shape} != ({weights.shape[0]},)")
    return weights @ x + bias


# ---------------------------------------------------------------------------
# Batched kernels

def _conv_patches(x: np.ndarray) -> np.ndarray:
    """(B,C,H,W) -> (B,C,9,H,W) of padded 3x3 neighborhoods."""
    b, c, h, w = x.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    return np.stack(
        [padded[:, :, di : di + h, dj : dj + w] for di in range(3) for dj in range(3)],
        axis=2,
    )


def _conv_batch_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    k, c, kh, kw = weights.shape
    if (kh, kw) != (3, 3):
        raise ValueError("kernel must be 3x3")
    if x.shape[1] != c:
        raise ValueError(f"input has {x.shape[1]} channels, weights expect {c}")
    if bias.shape != (k,):
        raise ValueError(f"bias shape {bias.shape} != ({k},)")
    patches = _conv_patches(x)
    out = np.einsum("bcpij,kcp->bkij", patches, weights.reshape(k, c, 9))
    return out + bias[None, :, None, None], patches


def _pool_batch_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even spatial dims, got {h}x{w}")
    blocks = (
        x.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    idx = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


# ---------------------------------------------------------------------------
# Layers

class Conv2d:
    """3x3 same-padding convolution with optional bias."""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 use_bias: bool = True, label: str = "conv"):
        bound = math.sqrt(1.0 / (in_channels * 9))
        self.weights = rng.uniform(-bound, bound, (out_channels, in_channels, 3, 3))
        self.bias = rng.uniform(-bound, bound, out_channels) if use_bias else np.zeros(out_channels)
        self.use_bias = use_bias
        self.label = label
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._patches = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        out, self._patches = _conv_batch_forward(x, self.weights, self.bias)
        return out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._patches is None:
            raise RuntimeError("backward called before forward")
        k, c = self.weights.shape[:2]
        self.grad_weights = np.einsum(
            "bcpij,bkij->kcp", self._patches, upstream
        ).reshape(self.weights.shape)
        self.grad_bias = (
            upstream.sum(axis=(0, 2, 3)) if self.use_bias else np.zeros_like(self.bias)
        )
        # input gradient: correlate upstream with the flipped kernels
        flipped = self.weights[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        up_patches = _conv_patches(upstream)
        return np.einsum("bkpij,ckp->bcij", up_patches, flipped.reshape(c, k, 9))

    def parameters(self):
        named = [(f"{self.label}.weights", self.weights)]
        if self.use_bias:
            named.append((f"{self.label}.bias", self.bias))
        return named

    def gradients(self):
        named = [(f"{self.label}.weights", self.grad_weights)]
        if self.use_bias:
            named.append((f"{self.label}.bias", self.grad_bias))
        return named


class ReLU:
    def __init__(self, label: str = "relu"):
        self.label = label
        self._mask = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._mask is None:
            raise RuntimeError("backward called before forward")
        return upstream * self._mask

    def parameters(self):
        return []

    def gradients(self):
        return []


class MaxPool2x2:
    def __init__(self, label: str = "pool"):
        self.label = label
        self._idx = None
        self._in_shape = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        out, self._idx = _pool_batch_forward(x)
        self._in_shape = x.shape
        return out

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._idx is None:
            raise RuntimeError("backward called before forward")
        b, c, h, w = self._in_shape
        blocks = np.zeros((b, c, h // 2, w // 2, 4))
        np.put_along_axis(blocks, self._idx[..., None], upstream[..., None], axis=-1)
        return (
            blocks.reshape(b, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h, w)
        )

    def parameters(self):
        return []

    def gradients(self):
        return []


class Dropout:
    """Train-time mask with 1/(1-p) rescale; identity at eval."""

    def __init__(self, p: float, label: str = "dropout"):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self.label = label
        self._scale_mask = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        if not train or self.p == 0.0:
            self._scale_mask = 1.0
            return x
        if rng is None:
            raise ValueError("train-mode dropout needs a generator")
        keep = rng.random(x.shape) < (1.0 - self.p)
        self._scale_mask = keep / (1.0 - self.p)
        return x * self._scale_mask

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._scale_mask is None:
            raise RuntimeError("backward called before forward")
        return upstream * self._scale_mask

    def parameters(self):
        return []

    def gradients(self):
        return []


class Flatten:
    def __init__(self, label: str = "flatten"):
        self.label = label
        self._in_shape = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._in_shape is None:
            raise RuntimeError("backward called before forward")
        return upstream.reshape(self._in_shape)

    def parameters(self):
        return []

    def gradients(self):
        return []


class Linear:
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 use_bias: bool = True, label: str = "linear"):
        bound = math.sqrt(1.0 / in_features)
        self.weights = rng.uniform(-bound, bound, (out_features, in_features))
        self.bias = rng.uniform(-bound, bound, out_features) if use_bias else np.zeros(out_features)
        self.use_bias = use_bias
        self.label = label
        self.grad_weights = np.zeros_like(self.weights)
        self.grad_bias = np.zeros_like(self.bias)
        self._input = None

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.weights.shape[1]:
            raise ValueError(
                f"input shape {x.shape} incompatible with weights {self.weights.shape}"
            )
        self._input = x
        return x @ self.weights.T + self.bias

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        if self._input is None:
            raise RuntimeError("backward called before forward")
        self.grad_weights = upstream.T @ self._input
        self.grad_bias = (
            upstream.sum(axis=0) if self.use_bias else np.zeros_like(self.bias)
        )
        return upstream @ self.weights

    def parameters(self):
        named = [(f"{self.label}.weights", self.weights)]
        if self.use_bias:
            named.append((f"{self.label}.bias", self.bias))
        return named

    def gradients(self):
        named = [(f"{self.label}.weights", self.grad_weights)]
        if self.use_bias:
            named.append((f"{self.label}.bias", self.grad_bias))
        return named


class LayerStack:
    """Ordered layers with batched forward/backward and named parameters."""

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x: np.ndarray, train: bool, rng=None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train, rng)
        return x

    def backward(self, upstream: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            upstream = layer.backward(upstream)
        return upstream

    def parameters(self):
        return [pair for layer in self.layers for pair in layer.parameters()]

    def gradients(self):
        return [pair for layer in self.layers for pair in layer.gradients()]

    def shape_chain(self, input_shape=(1, 8, 8)) -> list[tuple[str, tuple[int, ...]]]:
        """Per-layer output shapes for one sample, dropout omitted
        (it never changes shape and is off at eval)."""
        x = np.zeros((1, *input_shape))
        rows = [("input", tuple(input_shape))]
        for layer in self.layers:
            x = layer.forward(x, train=False)
            if isinstance(layer, (Dropout, ReLU)):
                continue
            rows.append((layer.label, tuple(int(d) for d in x.shape[1:])))
        return rows

    def state_dict(self) -> dict[str, np.ndarray]:
        return dict(self.parameters())

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        for name, param in self.parameters():
            if name not in tensors:
                raise KeyError(f"checkpoint missing tensor {name!r}")
            value = np.asarray(tensors[name], dtype=float)
            if value.shape != param.shape:
                raise ValueError(
                    f"tensor {name!r} shape {value.shape} != {param.shape}"
                )
            param[...] = value


def cnn_stack(n_outputs: int, rng: np.random.Generator, dropout_p: float = 0.5,
              use_bias: bool = True) -> LayerStack:
    """The three-block image branch: (1,8,8) -> n_outputs features."""
    if n_outputs < 1:
        raise ValueError("n_outputs must be positive")
    layers = []
    channels = [1, 16, 32, 64]
    for block in range(3):
        layers.append(
            Conv2d(channels[block], channels[block + 1], rng, use_bias,
                   label=f"conv{block + 1}")
        )
        layers.append(ReLU(label=f"relu{block + 1}"))
        layers.append(MaxPool2x2(label=f"pool{block + 1}"))
        layers.append(Dropout(dropout_p, label=f"dropout{block + 1}"))
    layers.append(Flatten())
    layers.append(Linear(64, n_outputs, rng, use_bias))
    return LayerStack(layers)


# ---------------------------------------------------------------------------
# Checkpoints

_CHECKPOINT_FORMAT = "hqcnet-checkpoint"
_CHECKPOINT_VERSION = 1


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as canonical JSON (sorted keys, fixed layout),
    so identical state produces identical bytes."""
    doc = {
        "format": _CHECKPOINT_FORMAT,
        "version": _CHECKPOINT_VERSION,
        "tensors": {
            name: {
                "shape": list(np.asarray(arr).shape),
                "data": np.asarray(arr, dtype=float).ravel().tolist(),
            }
            for name, arr in tensors.items()
        },
    }
    Path(path).write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    )


def load_checkpoint(path) -> dict[str, np.ndarray]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise ValueError(f"not a checkpoint file: {path}")
    if doc.get("version") != _CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    return {
        name: np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        for name, entry in doc["tensors"].items()
    }
