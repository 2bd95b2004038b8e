"""Estimator-style quantum layer with exact shift-rule gradients.

A QuantumLayer composes a data-encoding circuit with a trainable ansatz
and reads out one Pauli expectation, f(x; theta).  Gradients come from
the two-point shift rule: every rotation generator here is a Pauli
string with eigenvalues +-1, so

    df/dphi = (f(phi + pi/2) - f(phi - pi/2)) / 2

holds exactly for each gate angle phi.  Trainable parameters appear in
exactly one ansatz rotation each, so the rule applies directly; inputs
appear in many encoding angles, so the input gradient sums the per-
occurrence shift derivative times the symbolic d(angle)/dx_j.

All shifted evaluations for a batch are packed into one large state
batch (samples x shift variants) and run through the simulator in a
single pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qsim import (
    ParamCircuit,
    PauliObservable,
    expectation_batch,
    run_circuit_batch,
)

_HALF_PI = math.pi / 2.0


@dataclass
class QuantumLayer:
    """Feature map + ansatz + observable, with trainable angles theta."""

    feature_map: ParamCircuit
    ansatz: ParamCircuit
    observable: PauliObservable
    theta: np.ndarray

    def __post_init__(self):
        if self.feature_map.n_qubits != self.ansatz.n_qubits:
            raise ValueError("feature map and ansatz act on different registers")
        if self.observable.n_qubits != self.ansatz.n_qubits:
            raise ValueError("observable length does not match register")
        if self.feature_map.n_params != 0:
            raise ValueError("feature map must not own trainable parameters")
        if self.ansatz.n_inputs != 0:
            raise ValueError("ansatz must not read classical inputs")
        self.theta = np.asarray(self.theta, dtype=float).copy()
        if self.theta.shape != (self.ansatz.n_params,):
            raise ValueError(
                f"theta shape {self.theta.shape} != ({self.ansatz.n_params},)"
            )
        self._composite = ParamCircuit(
            self.feature_map.n_qubits,
            self.feature_map.n_inputs,
            self.ansatz.n_params,
            self.feature_map.gates + self.ansatz.gates,
        )
        exprs = [g.angle for g in self._composite.gates if g.angle is not None]
        self._angle_exprs = exprs
        self._input_gate_ids = [
            k for k, e in enumerate(exprs) if e.input_indices()
        ]
        self._param_gate_ids = [
            k for k, e in enumerate(exprs) if e.param_indices()
        ]

    @property
    def n_qubits(self) -> int:
        return self.ansatz.n_qubits

    @property
    def n_inputs(self) -> int:
        return self.feature_map.n_inputs

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params


def forward_batch(layer: QuantumLayer, x: np.ndarray) -> np.ndarray:
    """f(x_b; theta) for each row of x, shape (B,)."""
    x = _check_inputs(layer, x)
    psi = run_circuit_batch(layer._composite, x, layer.theta)
    return expectation_batch(psi, layer.observable)


def forward_and_grads(
    layer: QuantumLayer,
    x: np.ndarray,
    need_input_grad: bool = True,
    need_theta_grad: bool = True,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Values plus shift-rule gradients for a batch of input rows.

    Returns (values (B,), grad_theta (B, n_params) or None,
    grad_input (B, n_inputs) or None).  One simulator pass evaluates the
    unshifted circuit and every +-pi/2 angle variant side by side.
    """
    x = _check_inputs(layer, x)
    batch = x.shape[0]
    in_ids = layer._input_gate_ids if need_input_grad else []
    par_ids = layer._param_gate_ids if need_theta_grad else []
    variants = 1 + 2 * len(in_ids) + 2 * len(par_ids)
    n_angles = len(layer._angle_exprs)

    shifts = np.zeros((n_angles, variants * batch))
    for slot, gate_id in enumerate(in_ids + par_ids):
        plus = (1 + 2 * slot) * batch
        minus = (2 + 2 * slot) * batch
        shifts[gate_id, plus : plus + batch] = _HALF_PI
        shifts[gate_id, minus : minus + batch] = -_HALF_PI

    tiled = np.tile(x, (variants, 1))
    psi = run_circuit_batch(layer._composite, tiled, layer.theta, shifts)
    values = expectation_batch(psi, layer.observable).reshape(variants, batch)

    def shift_derivative(slot: int) -> np.ndarray:
        return 0.5 * (values[1 + 2 * slot] - values[2 + 2 * slot])

    grad_theta = None
    grad_input = None
    if need_input_grad:
        grad_input = np.zeros((batch, layer.n_inputs))
        for slot, gate_id in enumerate(in_ids):
            dfdphi = shift_derivative(slot)
            expr = layer._angle_exprs[gate_id]
            for j in expr.input_indices():
                grad_input[:, j] += dfdphi * expr.partial_input_batch(
                    j, x, layer.theta
                )
    if need_theta_grad:
        grad_theta = np.zeros((batch, layer.n_params))
        offset = len(in_ids)
        for slot, gate_id in enumerate(par_ids):
            dfdphi = shift_derivative(offset + slot)
            expr = layer._angle_exprs[gate_id]
            for j in expr.param_indices():
                grad_theta[:, j] += dfdphi * expr.partial_param_batch(
                    j, x, layer.theta
                )
    return values[0], grad_theta, grad_input


def qnn_forward(layer: QuantumLayer, x) -> float:
    """Single-sample expectation value, in [-1, 1] for a unit Pauli."""
    return float(forward_batch(layer, _one_row(layer, x))[0])


def qnn_grad_theta(layer: QuantumLayer, x) -> np.ndarray:
    """df/dtheta at one sample via the parameter-shift rule."""
    _, grad, _ = forward_and_grads(
        layer, _one_row(layer, x), need_input_grad=False
    )
    return grad[0]


def qnn_grad_input(layer: QuantumLayer, x) -> np.ndarray:
    """df/dx at one sample: per-occurrence shifts chained through the
    symbolic angle derivatives."""
    _, _, grad = forward_and_grads(
        layer, _one_row(layer, x), need_theta_grad=False
    )
    return grad[0]


def _one_row(layer: QuantumLayer, x) -> np.ndarray:
    row = np.asarray(x, dtype=float)
    if row.shape != (layer.n_inputs,):
        raise ValueError(f"expected {layer.n_inputs} inputs, got shape {row.shape}")
    return row[None, :]


def _check_inputs(layer: QuantumLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != layer.n_inputs:
        raise ValueError(
            f"input batch shape {x.shape} incompatible with arity {layer.n_inputs}"
        )
    return x
