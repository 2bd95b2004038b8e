"""Hybrid model assembly and the training loop.

The model runs image -> CNN stack -> n_q features -> quantum layer ->
one scalar -> linear head -> 3 class scores.  Backpropagation crosses
the quantum boundary through the layer's shift-rule gradients: the head
gradient w.r.t. the scalar multiplies both the gradient w.r.t. theta
(parameter update) and the gradient w.r.t. the encoded features
(continuing into the classical stack).

The optimizer is Nesterov-momentum SGD with L2 weight decay evaluated
at the lookahead point:

    v <- mu v - eta grad L(p + mu v),    p <- p + v

where grad L includes 2*lambda*(p + mu v).  Early stopping monitors
validation accuracy with a patience window; the best-validation
parameter snapshot is kept alongside the full accuracy series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import build_two_local, named_feature_map
from .data import LABEL_TO_INDEX, LABELS
from .layers import LayerStack, Linear, cnn_stack
from .qnn import QuantumLayer, forward_and_grads, forward_batch
from .qsim import parity_observable, run_circuit_batch

N_CLASSES = len(LABELS)


class DivergenceError(RuntimeError):
    """Training hit a non-finite loss or gradient; carries the partial log."""

    def __init__(self, epoch: int, series: "AccuracySeries | None", message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch
        self.series = series


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-6
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [1, max_epochs]")


@dataclass(frozen=True)
class AccuracySeries:
    epochs: np.ndarray
    train: np.ndarray
    val: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "epochs", np.asarray(self.epochs, dtype=int))
        object.__setattr__(self, "train", np.asarray(self.train, dtype=float))
        object.__setattr__(self, "val", np.asarray(self.val, dtype=float))
        if not (len(self.epochs) == len(self.train) == len(self.val)):
            raise ValueError("series columns must have equal length")
        if len(self.epochs) == 0:
            raise ValueError("empty series")
        if self.epochs[0] != 1 or np.any(np.diff(self.epochs) <= 0):
            raise ValueError("epochs must strictly increase starting at 1")

    def __len__(self) -> int:
        return len(self.epochs)


# ---------------------------------------------------------------------------
# Loss

def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(y_true: np.ndarray, scores: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy for one sample; returns (loss, dL/dscores)."""
    y_true = np.asarray(y_true, dtype=float)
    scores = np.asarray(scores, dtype=float)
    if y_true.shape != scores.shape or y_true.ndim != 1:
        raise ValueError(f"shape mismatch: {y_true.shape} vs {scores.shape}")
    hot = np.flatnonzero(y_true == 1.0)
    if len(hot) != 1 or y_true.sum() != 1.0:
        raise ValueError("y_true must be one-hot")
    if not np.all(np.isfinite(scores)):
        raise ArithmeticError("non-finite class scores")
    probs = softmax(scores)
    loss = -math.log(max(probs[hot[0]], 1e-12))
    return loss, probs - y_true


def _cross_entropy_batch(
    label_indices: np.ndarray, scores: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean loss over a batch and dL/dscores already scaled by 1/B."""
    if not np.all(np.isfinite(scores)):
        raise ArithmeticError("non-finite class scores")
    batch = scores.shape[0]
    probs = softmax(scores)
    picked = np.clip(probs[np.arange(batch), label_indices], 1e-12, None)
    loss = float(-np.log(picked).mean())
    grad = probs.copy()
    grad[np.arange(batch), label_indices] -= 1.0
    return loss, grad / batch


def one_hot(label_index: int, n_classes: int = N_CLASSES) -> np.ndarray:
    vec = np.zeros(n_classes)
    vec[label_index] = 1.0
    return vec


# ---------------------------------------------------------------------------
# Optimizer

def sgd_nesterov_step(params, velocities, grad_fn, config: TrainConfig):
    """One Nesterov step; pure in its inputs, returns (params, velocities).

    grad_fn receives the lookahead parameter list and must return the
    data-loss gradients evaluated there; the weight-decay term is added
    here.  A non-finite gradient aborts before any state changes.
    """
    lookahead = [p + config.momentum * v for p, v in zip(params, velocities)]
    grads = grad_fn(lookahead)
    if len(grads) != len(params):
        raise ValueError("grad_fn returned wrong number of gradients")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise ArithmeticError("non-finite gradient; step aborted")
    new_velocities = [
        config.momentum * v
        - config.learning_rate * (g + 2.0 * config.weight_decay * la)
        for v, g, la in zip(velocities, grads, lookahead)
    ]
    new_params = [p + v for p, v in zip(params, new_velocities)]
    return new_params, new_velocities


# ---------------------------------------------------------------------------
# Model

class HybridModel:
    """CNN feature extractor -> quantum layer -> linear class head."""

    def __init__(self, classical: LayerStack, quantum: QuantumLayer, head: Linear):
        tail = classical.layers[-1]
        if not isinstance(tail, Linear) or tail.weights.shape[0] != quantum.n_inputs:
            raise ValueError(
                "classical stack must end in a linear layer of width n_qubits"
            )
        if head.weights.shape != (N_CLASSES, 1):
            raise ValueError(f"head must map 1 scalar to {N_CLASSES} scores")
        self.classical = classical
        self.quantum = quantum
        self.head = head
        names = [name for name, _ in self.parameters()]
        if len(names) != len(set(names)):
            raise ValueError("parameter names must be unique across components")

    def parameters(self):
        return (
            self.classical.parameters()
            + self.head.parameters()
            + [("quantum.theta", self.quantum.theta)]
        )

    def forward(self, images: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        feats = self.classical.forward(images, train, rng)
        qvals = forward_batch(self.quantum, feats)
        return self.head.forward(qvals[:, None], train)

    def predict(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.forward(images, train=False), axis=1)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self.parameters()}

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        for name, arr in self.parameters():
            if name not in tensors:
                raise KeyError(f"state missing tensor {name!r}")
            value = np.asarray(tensors[name], dtype=float)
            if value.shape != arr.shape:
                raise ValueError(f"tensor {name!r} shape {value.shape} != {arr.shape}")
            arr[...] = value


def build_hybrid_model(
    n_qubits: int,
    feature_map_name: str,
    ansatz_depth: int,
    seed: int,
    dropout_p: float = 0.5,
) -> HybridModel:
    """Wire up CNN + named feature map + hardware-efficient ansatz + head.

    One seeded generator draws every initial tensor in a fixed order, so
    equal seeds give bitwise-equal models.  Rotation angles start small
    (U(-0.1, 0.1)) to keep the variational block near identity.
    """
    rng = np.random.default_rng(seed)
    stack = cnn_stack(n_qubits, rng, dropout_p=dropout_p)
    feature_map = named_feature_map(feature_map_name, n_qubits)
    ansatz = build_two_local(n_qubits, ansatz_depth)
    theta = rng.uniform(-0.1, 0.1, ansatz.n_params)
    quantum = QuantumLayer(feature_map, ansatz, parity_observable(n_qubits), theta)
    head = Linear(1, N_CLASSES, rng, label="head")
    return HybridModel(stack, quantum, head)


def _loss_and_gradients(model: HybridModel, images, label_indices, rng):
    """Forward + full backward for one batch; returns (loss, {name: grad})."""
    feats = model.classical.forward(images, train=True, rng=rng)
    qvals, grad_theta, grad_input = forward_and_grads(model.quantum, feats)
    scores = model.head.forward(qvals[:, None], train=True)
    loss, dscores = _cross_entropy_batch(label_indices, scores)
    dq = model.head.backward(dscores)[:, 0]
    model.classical.backward(dq[:, None] * grad_input)
    grads = dict(model.classical.gradients())
    grads.update(model.head.gradients())
    grads["quantum.theta"] = (dq[:, None] * grad_theta).sum(axis=0)
    return loss, grads


def images_and_labels(dataset) -> tuple[np.ndarray, np.ndarray]:
    """Stack heatmap samples into (n,1,8,8) images and label indices."""
    if not dataset:
        raise ValueError("empty dataset")
    images = np.stack([s.grid for s in dataset])[:, None, :, :]
    labels = np.array([LABEL_TO_INDEX[s.label] for s in dataset], dtype=int)
    return images, labels


def accuracy_from_scores(scores: np.ndarray, label_indices: np.ndarray) -> float:
    """Fraction of rows whose argmax matches the label."""
    if scores.shape[0] == 0:
        raise ValueError("empty score matrix")
    return float(np.mean(np.argmax(scores, axis=1) == label_indices))


def evaluate(model: HybridModel, dataset) -> float:
    """Argmax accuracy with dropout off."""
    images, labels = images_and_labels(dataset)
    return accuracy_from_scores(model.forward(images, train=False), labels)


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class TrainResult:
    series: AccuracySeries
    losses: np.ndarray
    best_state: dict[str, np.ndarray]
    best_epoch: int
    best_val_accuracy: float
    stopped_early: bool


def train(model: HybridModel, train_set, val_set, config: TrainConfig) -> TrainResult:
    """Epoch loop with per-epoch shuffling and patience-based stopping.

    Deterministic for a fixed (model state, config.seed).  Raises
    DivergenceError, carrying the series logged so far, if a loss or
    gradient goes non-finite.
    """
    images, labels = images_and_labels(train_set)
    rng = np.random.default_rng(config.seed)
    storage = [arr for _, arr in model.parameters()]
    names = [name for name, _ in model.parameters()]
    velocities = [np.zeros_like(arr) for arr in storage]

    epochs: list[int] = []
    train_curve: list[float] = []
    val_curve: list[float] = []
    losses: list[float] = []
    best_val = -1.0
    best_epoch = 0
    best_state = model.state_dict()
    stale = 0
    stopped_early = False

    def partial_series():
        if not epochs:
            return None
        return AccuracySeries(np.array(epochs), np.array(train_curve), np.array(val_curve))

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start : start + config.batch_size]

            def grad_fn(lookahead):
                for arr, la in zip(storage, lookahead):
                    arr[...] = la
                loss, grads = _loss_and_gradients(
                    model, images[idx], labels[idx], rng
                )
                if not math.isfinite(loss):
                    raise DivergenceError(epoch, partial_series(), "non-finite loss")
                grad_fn.loss = loss
                return [grads[name] for name in names]

            current = [arr.copy() for arr in storage]
            try:
                new_params, velocities = sgd_nesterov_step(
                    current, velocities, grad_fn, config
                )
            except ArithmeticError as err:
                raise DivergenceError(epoch, partial_series(), str(err)) from err
            for arr, new in zip(storage, new_params):
                arr[...] = new
            epoch_loss += grad_fn.loss * len(idx)

        epochs.append(epoch)
        train_curve.append(evaluate(model, train_set))
        val_curve.append(evaluate(model, val_set))
        losses.append(epoch_loss / len(order))

        if val_curve[-1] > best_val:
            best_val = val_curve[-1]
            best_epoch = epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                stopped_early = True
                break

    return TrainResult(
        series=AccuracySeries(np.array(epochs), np.array(train_curve), np.array(val_curve)),
        losses=np.array(losses),
        best_state=best_state,
        best_epoch=best_epoch,
        best_val_accuracy=best_val,
        stopped_early=stopped_early,
    )


# ---------------------------------------------------------------------------
# Stage capture

CAPTURE_STAGES = ("post_classical", "post_feature_map", "post_qnn")


def capture_stage(model: HybridModel, dataset, stage: str) -> np.ndarray:
    """Intermediate representations for every sample, dropout off.

    post_classical: the n_q-dimensional CNN features.
    post_feature_map: the encoded statevector as real coordinates
    (real parts then imaginary parts, 2^(n_q+1) columns).
    post_qnn: the scalar quantum outputs, one column.
    """
    if stage not in CAPTURE_STAGES:
        raise ValueError(f"unknown stage {stage!r}; choose from {CAPTURE_STAGES}")
    images, _ = images_and_labels(dataset)
    feats = model.classical.forward(images, train=False)
    if stage == "post_classical":
        return feats
    if stage == "post_feature_map":
        states = run_circuit_batch(model.quantum.feature_map, feats, np.zeros(0))
        return np.hstack([states.real, states.imag])
    return forward_batch(model.quantum, feats)[:, None]
