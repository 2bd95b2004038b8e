"""Dense statevector simulation of parameterized circuits.

Qubit ordering is little-endian throughout: qubit 0 is the least
significant bit of an amplitude index, so |q2 q1 q0> = |110> lives at
index 6.  All kernels operate on batches of states (shape ``(B, 2**n)``)
so that many circuit evaluations (samples, shifted-parameter variants)
run as single numpy operations; the public single-state API wraps the
batch of one.

Supported gates: H, RX, RY, RZ, RZZ, CX.  RZZ is a native diagonal
kernel, not a CX-RZ-CX decomposition (the equivalence is checked by
tests).  Circuits are immutable once built and safe to share across
threads; states are never mutated in place by gate application.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

SINGLE_QUBIT_KINDS = frozenset({"H", "RX", "RY", "RZ"})
TWO_QUBIT_KINDS = frozenset({"RZZ", "CX"})
GATE_KINDS = SINGLE_QUBIT_KINDS | TWO_QUBIT_KINDS
ROTATION_KINDS = frozenset({"RX", "RY", "RZ", "RZZ"})

_H_MATRIX = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_CX_MATRIX = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


# ---------------------------------------------------------------------------
# Angle expressions


@dataclass(frozen=True)
class Factor:
    """One multiplicand of an angle term.

    kind "input" is x_i, "param" is theta_j, "pi_minus_input" is (pi - x_i).
    """

    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in ("input", "param", "pi_minus_input"):
            raise ValueError(f"unknown factor kind {self.kind!r}")
        if self.index < 0:
            raise ValueError("factor index must be non-negative")


@dataclass(frozen=True)
class AngleExpr:
    """Gate angle as ``scale * sum(prod(factors) for factors in terms)``.

    An empty factor tuple is the constant 1, so a fixed angle c is
    ``AngleExpr(scale=c, terms=((),))``.  Empty ``terms`` evaluates to 0.
    """

    scale: float
    terms: tuple[tuple[Factor, ...], ...]

    @staticmethod
    def constant(value: float) -> "AngleExpr":
        return AngleExpr(value, ((),))

    @staticmethod
    def input(i: int, scale: float = 1.0) -> "AngleExpr":
        return AngleExpr(scale, ((Factor("input", i),),))

    @staticmethod
    def param(j: int, scale: float = 1.0) -> "AngleExpr":
        return AngleExpr(scale, ((Factor("param", j),),))

    @staticmethod
    def pi_minus_product(indices: Sequence[int], scale: float = 1.0) -> "AngleExpr":
        """scale * prod_i (pi - x_i), the second-order data map term."""
        return AngleExpr(scale, (tuple(Factor("pi_minus_input", i) for i in indices),))

    def input_indices(self) -> frozenset[int]:
        return frozenset(
            f.index for term in self.terms for f in term if f.kind != "param"
        )

    def param_indices(self) -> frozenset[int]:
        return frozenset(
            f.index for term in self.terms for f in term if f.kind == "param"
        )

    def evaluate(self, inputs: Sequence[float], params: Sequence[float]) -> float:
        return float(
            self.evaluate_batch(
                np.asarray(inputs, dtype=float).reshape(1, -1),
                np.asarray(params, dtype=float),
            )[0]
        )

    def evaluate_batch(self, inputs: np.ndarray, params: np.ndarray) -> np.ndarray:
        """Evaluate for a batch of input rows; params may be 1-D (shared) or 2-D."""
        n_rows = inputs.shape[0]
        total = np.zeros(n_rows)
        for term in self.terms:
            prod = np.ones(n_rows)
            for f in term:
                prod = prod * _factor_values(f, inputs, params)
            total += prod
        return self.scale * total

    def partial_input_batch(
        self, j: int, inputs: np.ndarray, params: np.ndarray
    ) -> np.ndarray:
        """d(angle)/d(x_j) for a batch of input rows, by the product rule."""
        n_rows = inputs.shape[0]
        total = np.zeros(n_rows)
        for term in self.terms:
            for k, f in enumerate(term):
                if f.kind == "param" or f.index != j:
                    continue
                sign = 1.0 if f.kind == "input" else -1.0
                rest = np.full(n_rows, sign)
                for m, other in enumerate(term):
                    if m != k:
                        rest = rest * _factor_values(other, inputs, params)
                total += rest
        return self.scale * total

    def partial_param_batch(
        self, j: int, inputs: np.ndarray, params: np.ndarray
    ) -> np.ndarray:
        """d(angle)/d(theta_j) for a batch of input rows."""
        n_rows = inputs.shape[0]
        total = np.zeros(n_rows)
        for term in self.terms:
            for k, f in enumerate(term):
                if f.kind != "param" or f.index != j:
                    continue
                rest = np.ones(n_rows)
                for m, other in enumerate(term):
                    if m != k:
                        rest = rest * _factor_values(other, inputs, params)
                total += rest
        return self.scale * total


def _factor_values(f: Factor, inputs: np.ndarray, params: np.ndarray) -> np.ndarray:
    if f.kind == "input":
        return inputs[:, f.index]
    if f.kind == "pi_minus_input":
        return math.pi - inputs[:, f.index]
    if params.ndim == 1:
        return params[f.index]
    return params[:, f.index]


# ---------------------------------------------------------------------------
# Gates and circuits


@dataclass(frozen=True)
class GateOp:
    """One gate: kind, target qubits, and an optional angle expression."""

    kind: str
    targets: tuple[int, ...]
    angle: AngleExpr | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in SINGLE_QUBIT_KINDS else 2
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} expects {arity} target(s), got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate targets {self.targets}")
        if self.kind in ROTATION_KINDS and self.angle is None:
            raise ValueError(f"{self.kind} requires an angle")
        if self.kind in ("H", "CX") and self.angle is not None:
            raise ValueError(f"{self.kind} takes no angle")


@dataclass(frozen=True)
class ParamCircuit:
    """Ordered gate list with declared input/parameter arities."""

    n_qubits: int
    n_inputs: int
    n_params: int
    gates: tuple[GateOp, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if self.n_inputs < 0 or self.n_params < 0:
            raise ValueError("arities must be non-negative")
        for g in self.gates:
            if any(t >= self.n_qubits or t < 0 for t in g.targets):
                raise IndexError(f"gate target out of range: {g}")
            if g.angle is not None:
                if any(i >= self.n_inputs for i in g.angle.input_indices()):
                    raise ValueError(f"angle references input beyond arity: {g}")
                if any(j >= self.n_params for j in g.angle.param_indices()):
                    raise ValueError(f"angle references param beyond arity: {g}")


@dataclass(frozen=True)
class Statevector:
    """Pure n-qubit state; amplitudes indexed little-endian."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError("amplitude length must be 2**n_qubits")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def zero_state(n_qubits: int) -> Statevector:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


@dataclass(frozen=True)
class PauliObservable:
    """Weighted Pauli string; paulis[q] acts on qubit q."""

    paulis: str
    coefficient: float = 1.0

    def __post_init__(self):
        if not self.paulis or any(c not in "IXYZ" for c in self.paulis):
            raise ValueError(f"invalid Pauli string {self.paulis!r}")
        if not math.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    @property
    def n_qubits(self) -> int:
        return len(self.paulis)


def parity_observable(n_qubits: int) -> PauliObservable:
    """Global parity Z on every qubit, the quantum layer's default readout."""
    return PauliObservable("Z" * n_qubits, 1.0)


# ---------------------------------------------------------------------------
# Gate matrices

def gate_matrix(kind: str, angle: float | None = None) -> np.ndarray:
    """Exact unitary of a gate kind (2x2, or 4x4 with the first target as
    the high bit of the 2-qubit basis index)."""
    if kind not in GATE_KINDS:
        raise ValueError(f"unknown gate kind {kind!r}")
    if kind == "H":
        return _H_MATRIX.copy()
    if kind == "CX":
        return _CX_MATRIX.copy()
    if angle is None or not math.isfinite(angle):
        raise ValueError(f"{kind} requires a finite angle")
    half = angle / 2.0
    c, s = math.cos(half), math.sin(half)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-1j * half), 0], [0, np.exp(1j * half)]])
    # RZZ: diagonal phases, -theta/2 on equal bits, +theta/2 on unequal bits
    d = np.exp(np.array([-1j, 1j, 1j, -1j]) * half)
    return np.diag(d)


# ---------------------------------------------------------------------------
# Batched kernels

@lru_cache(maxsize=None)
def _bit_signs(n_qubits: int, qubit: int) -> np.ndarray:
    """(-1)**bit_q(k) over all indices k; +1 where the bit is 0."""
    k = np.arange(2**n_qubits)
    return 1.0 - 2.0 * ((k >> qubit) & 1)


@lru_cache(maxsize=None)
def _cx_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    k = np.arange(2**n_qubits)
    flip = ((k >> control) & 1).astype(bool)
    out = k.copy()
    out[flip] ^= 1 << target
    return out


def _apply_mixing_1q(
    psi: np.ndarray,
    n_qubits: int,
    qubit: int,
    m00,
    m01,
    m10,
    m11,
) -> np.ndarray:
    """Apply a 2x2 matrix on one qubit of a (B, 2**n) batch.

    Matrix entries may be scalars or (B,) arrays (per-row angles).
    """
    batch = psi.shape[0]
    low, high = 2**qubit, 2 ** (n_qubits - 1 - qubit)
    view = psi.reshape(batch, high, 2, low)
    a0, a1 = view[:, :, 0, :], view[:, :, 1, :]

    def rows(m):
        return m[:, None, None] if isinstance(m, np.ndarray) else m

    out = np.empty_like(view)
    out[:, :, 0, :] = rows(m00) * a0 + rows(m01) * a1
    out[:, :, 1, :] = rows(m10) * a0 + rows(m11) * a1
    return out.reshape(batch, -1)


def apply_gate_batch(
    psi: np.ndarray, n_qubits: int, gate: GateOp, angles: np.ndarray | float | None
) -> np.ndarray:
    """Apply one gate to a batch of states; angles is scalar or (B,)."""
    kind = gate.kind
    if kind == "H":
        q = gate.targets[0]
        inv = 1 / math.sqrt(2)
        return _apply_mixing_1q(psi, n_qubits, q, inv, inv, inv, -inv)
    if kind == "CX":
        perm = _cx_permutation(n_qubits, *gate.targets)
        return psi[:, perm]

    theta = np.asarray(angles, dtype=float)
    half = theta.item() / 2.0 if theta.ndim == 0 else theta / 2.0
    if kind == "RZ":
        signs = _bit_signs(n_qubits, gate.targets[0])
        if isinstance(half, float):
            return psi * np.exp(-1j * half * signs)
        return psi * np.exp(-1j * half[:, None] * signs[None, :])
    if kind == "RZZ":
        a, b = gate.targets
        signs = _bit_signs(n_qubits, a) * _bit_signs(n_qubits, b)
        if isinstance(half, float):
            return psi * np.exp(-1j * half * signs)
        return psi * np.exp(-1j * half[:, None] * signs[None, :])

    c, s = np.cos(half), np.sin(half)
    q = gate.targets[0]
    if kind == "RX":
        return _apply_mixing_1q(psi, n_qubits, q, c + 0j, -1j * s, -1j * s, c + 0j)
    if kind == "RY":
        return _apply_mixing_1q(psi, n_qubits, q, c + 0j, -s + 0j, s + 0j, c + 0j)
    raise ValueError(f"unknown gate kind {kind!r}")


def run_circuit_batch(
    circuit: ParamCircuit,
    inputs: np.ndarray,
    params: np.ndarray,
    angle_shifts: np.ndarray | None = None,
) -> np.ndarray:
    """Run a circuit on a batch of input rows from |0...0>.

    inputs: (B, n_inputs); params: (n_params,) shared or (B, n_params)
    per-row.  angle_shifts, when given, has shape (n_angle_gates, B) and
    is added to the evaluated angle of each angle-bearing gate in order
    (the hook used by occurrence-level parameter shifts).  Returns the
    final states, shape (B, 2**n_qubits).
    """
    inputs = np.asarray(inputs, dtype=float)
    params = np.asarray(params, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != circuit.n_inputs:
        raise ValueError(
            f"inputs shape {inputs.shape} incompatible with arity {circuit.n_inputs}"
        )
    if params.shape[-1] != circuit.n_params and circuit.n_params > 0:
        raise ValueError(
            f"params shape {params.shape} incompatible with arity {circuit.n_params}"
        )
    batch = inputs.shape[0]
    psi = np.zeros((batch, 2**circuit.n_qubits), dtype=complex)
    psi[:, 0] = 1.0
    angle_idx = 0
    for gate in circuit.gates:
        if gate.angle is None:
            psi = apply_gate_batch(psi, circuit.n_qubits, gate, None)
            continue
        theta = gate.angle.evaluate_batch(inputs, params)
        if angle_shifts is not None:
            theta = theta + angle_shifts[angle_idx]
        angle_idx += 1
        psi = apply_gate_batch(psi, circuit.n_qubits, gate, theta)
    return psi


def expectation_batch(psi: np.ndarray, obs: PauliObservable) -> np.ndarray:
    """<psi|P|psi> for each row of a (B, 2**n) batch; returns real (B,)."""
    n = obs.n_qubits
    if psi.shape[1] != 2**n:
        raise ValueError("observable length does not match state size")
    flip, phase = _pauli_action(obs.paulis)
    k = np.arange(2**n)
    src = k ^ flip
    values = np.einsum("bk,bk,k->b", psi.conj(), psi[:, src], phase[src])
    return obs.coefficient * values.real


@lru_cache(maxsize=None)
def _pauli_action(paulis: str) -> tuple[int, np.ndarray]:
    """Flip mask and per-source-index phase of P: (P psi)[j ^ flip] = phase[j] psi[j]."""
    n = len(paulis)
    flip = 0
    k = np.arange(2**n)
    phase = np.ones(2**n, dtype=complex)
    for q, p in enumerate(paulis):
        bit = (k >> q) & 1
        if p == "X":
            flip |= 1 << q
        elif p == "Y":
            flip |= 1 << q
            phase = phase * (1j * (1.0 - 2.0 * bit))
        elif p == "Z":
            phase = phase * (1.0 - 2.0 * bit)
    return flip, phase


# ---------------------------------------------------------------------------
# Single-state API

def apply_gate(
    state: Statevector, gate: GateOp, angle_value: float | None = None
) -> Statevector:
    """Apply one gate to a state; rotation kinds need an explicit angle."""
    if any(t >= state.n_qubits for t in gate.targets):
        raise IndexError(f"gate targets {gate.targets} out of range")
    if gate.kind in ROTATION_KINDS and angle_value is None:
        raise ValueError(f"{gate.kind} requires angle_value")
    psi = apply_gate_batch(
        state.amplitudes[None, :], state.n_qubits, gate, angle_value
    )
    return Statevector(state.n_qubits, psi[0])


def run_circuit(
    circuit: ParamCircuit, inputs: Sequence[float], params: Sequence[float]
) -> Statevector:
    """Run from |0...0> with concrete inputs and parameters."""
    x = np.asarray(inputs, dtype=float)
    p = np.asarray(params, dtype=float)
    if x.shape != (circuit.n_inputs,):
        raise ValueError(f"expected {circuit.n_inputs} inputs, got {x.shape}")
    if p.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} params, got {p.shape}")
    psi = run_circuit_batch(circuit, x[None, :], p)
    return Statevector(circuit.n_qubits, psi[0])


def expectation(state: Statevector, obs: PauliObservable) -> float:
    """coefficient * <psi|P|psi>, clamped to its real part.

    The imaginary residue of a Pauli expectation is zero in exact
    arithmetic; anything above 1e-10 indicates a corrupted state.
    """
    if obs.n_qubits != state.n_qubits:
        raise ValueError("observable length does not match state")
    flip, phase = _pauli_action(obs.paulis)
    k = np.arange(2**state.n_qubits)
    src = k ^ flip
    amps = state.amplitudes
    value = complex(np.sum(amps.conj() * phase[src] * amps[src]))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        raise ArithmeticError(f"non-real Pauli expectation: {value}")
    return obs.coefficient * value.real
