"""Feature-map and ansatz circuit construction.

Three feature-map families share the same skeleton: every repetition
opens with a Hadamard wall, then applies data-dependent rotations.

* Z family: RZ(2*x_i) on each qubit i.  Phase-only encoding.
* ZZ family: the Z layer plus, per entangled pair (i, j), the sandwich
  CX(i,j) - RZ(2*(pi-x_i)(pi-x_j)) on j - CX(i,j).
* PAULI family: arbitrary Pauli strings.  A string of length m slides
  over every window of m adjacent qubits; each placement is basis-changed
  onto Z (H for X, RX(pi/2) for Y), CX-chained along its support,
  rotated by RZ(2*phi(x)) on the last support qubit, then undone.  The
  data map phi is x_i for single-qubit support and prod(pi - x_i)
  otherwise.

The variational ansatz is the hardware-efficient two-local circuit:
per block, RY then RZ on every qubit followed by a linear CX chain,
giving exactly 2 * depth * n_qubits trainable angles (no trailing
rotation layer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .qsim import AngleExpr, GateOp, ParamCircuit

FAMILIES = ("Z", "ZZ", "PAULI")
ENTANGLEMENTS = ("linear", "full", "none")

# The nine circuit names used throughout configs and the CLI.
FEATURE_MAP_NAMES = (
    "z_reps_1",
    "z_reps_2",
    "z_reps_3",
    "zz_reps_1_linear",
    "zz_reps_2_linear",
    "zz_reps_3_full",
    "pauli_xyz_1_rep",
    "pauli_z_yy_zxz_linear",
    "pauli_z_yy_zxz_rep_2",
)


@dataclass(frozen=True)
class FeatureMapSpec:
    family: str
    reps: int = 1
    entanglement: str = "linear"
    pauli_strings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if self.entanglement not in ENTANGLEMENTS:
            raise ValueError(
                f"unknown entanglement {self.entanglement!r}; choose from {ENTANGLEMENTS}"
            )
        if self.family == "PAULI":
            if not self.pauli_strings:
                raise ValueError("PAULI family requires at least one Pauli string")
            for s in self.pauli_strings:
                if not s:
                    raise ValueError("empty Pauli string")
                if any(c not in "IXYZ" for c in s):
                    raise ValueError(f"invalid Pauli string {s!r}")
                if set(s) == {"I"}:
                    raise ValueError(f"Pauli string {s!r} has no support")


# zz_reps_1_linear carries a historical name: the configuration it denotes
# is the unentangled single-repetition ZZ map (reported elsewhere as "Reps 1
# No Entanglement").  The entangled variant stays reachable through
# FeatureMapSpec("ZZ", 1, "linear").
_NAMED_SPECS = {
    "z_reps_1": FeatureMapSpec("Z", 1),
    "z_reps_2": FeatureMapSpec("Z", 2),
    "z_reps_3": FeatureMapSpec("Z", 3),
    "zz_reps_1_linear": FeatureMapSpec("ZZ", 1, "none"),
    "zz_reps_2_linear": FeatureMapSpec("ZZ", 2, "linear"),
    "zz_reps_3_full": FeatureMapSpec("ZZ", 3, "full"),
    "pauli_xyz_1_rep": FeatureMapSpec("PAULI", 1, "linear", ("X", "Y", "Z")),
    "pauli_z_yy_zxz_linear": FeatureMapSpec("PAULI", 1, "linear", ("Z", "YY", "ZXZ")),
    "pauli_z_yy_zxz_rep_2": FeatureMapSpec("PAULI", 2, "linear", ("Z", "YY", "ZXZ")),
}


def entangled_pairs(n_qubits: int, entanglement: str) -> list[tuple[int, int]]:
    if entanglement == "linear":
        return [(i, i + 1) for i in range(n_qubits - 1)]
    if entanglement == "full":
        return [(i, j) for i in range(n_qubits) for j in range(i + 1, n_qubits)]
    return []


def _pauli_placements(pauli: str, n_qubits: int) -> list[list[tuple[int, str]]]:
    """Sliding-window placements: [(qubit, non-identity factor), ...] each."""
    width = len(pauli)
    if width > n_qubits:
        raise ValueError(
            f"Pauli string {pauli!r} needs {width} qubits, circuit has {n_qubits}"
        )
    placements = []
    for start in range(n_qubits - width + 1):
        support = [(start + k, c) for k, c in enumerate(pauli) if c != "I"]
        placements.append(support)
    return placements


def build_feature_map(spec: FeatureMapSpec, n_qubits: int) -> ParamCircuit:
    """Construct the data-encoding circuit for one spec.

    Input arity equals n_qubits: component x_i drives the rotations
    anchored on qubit i.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    if spec.family == "ZZ" and spec.entanglement != "none" and n_qubits < 2:
        raise ValueError("entangled ZZ map needs at least 2 qubits")
    gates: list[GateOp] = []
    for _ in range(spec.reps):
        for q in range(n_qubits):
            gates.append(GateOp("H", (q,)))
        if spec.family in ("Z", "ZZ"):
            for q in range(n_qubits):
                gates.append(GateOp("RZ", (q,), AngleExpr.input(q, scale=2.0)))
        if spec.family == "ZZ":
            for i, j in entangled_pairs(n_qubits, spec.entanglement):
                gates.append(GateOp("CX", (i, j)))
                gates.append(
                    GateOp("RZ", (j,), AngleExpr.pi_minus_product([i, j], scale=2.0))
                )
                gates.append(GateOp("CX", (i, j)))
        if spec.family == "PAULI":
            for pauli in spec.pauli_strings:
                for support in _pauli_placements(pauli, n_qubits):
                    gates.extend(_pauli_evolution(support))
    return ParamCircuit(n_qubits, n_qubits, 0, tuple(gates))


def _pauli_evolution(support: list[tuple[int, str]]) -> list[GateOp]:
    """exp(-i phi(x) P) on one placement, via basis change + CX chain."""
    qubits = [q for q, _ in support]
    if len(qubits) == 1:
        angle = AngleExpr.input(qubits[0], scale=2.0)
    else:
        angle = AngleExpr.pi_minus_product(qubits, scale=2.0)
    enter: list[GateOp] = []
    for q, p in support:
        if p == "X":
            enter.append(GateOp("H", (q,)))
        elif p == "Y":
            enter.append(GateOp("RX", (q,), AngleExpr.constant(math.pi / 2)))
    chain = [GateOp("CX", (qubits[k], qubits[k + 1])) for k in range(len(qubits) - 1)]
    rotation = [GateOp("RZ", (qubits[-1],), angle)]
    undo_chain = list(reversed(chain))
    undo_basis = []
    for q, p in reversed(support):
        if p == "X":
            undo_basis.append(GateOp("H", (q,)))
        elif p == "Y":
            undo_basis.append(GateOp("RX", (q,), AngleExpr.constant(-math.pi / 2)))
    return enter + chain + rotation + undo_chain + undo_basis


def named_feature_map(name: str, n_qubits: int) -> ParamCircuit:
    """Look up one of the nine named encodings and build it."""
    spec = feature_map_spec(name)
    return build_feature_map(spec, n_qubits)


def feature_map_spec(name: str) -> FeatureMapSpec:
    try:
        return _NAMED_SPECS[name]
    except KeyError:
        raise KeyError(
            f"unknown feature map {name!r}; valid names: {', '.join(FEATURE_MAP_NAMES)}"
        ) from None


def build_two_local(n_qubits: int, depth: int) -> ParamCircuit:
    """Hardware-efficient ansatz: depth blocks of RY+RZ layers and a CX chain.

    Parameter layout is block-major: block l uses params
    [2*l*n : 2*l*n + n] for the RY layer and the next n for the RZ layer.
    """
    if n_qubits < 2:
        raise ValueError("two-local ansatz needs at least 2 qubits")
    if depth < 1:
        raise ValueError("depth must be positive")
    gates: list[GateOp] = []
    for block in range(depth):
        base = 2 * block * n_qubits
        for q in range(n_qubits):
            gates.append(GateOp("RY", (q,), AngleExpr.param(base + q)))
        for q in range(n_qubits):
            gates.append(GateOp("RZ", (q,), AngleExpr.param(base + n_qubits + q)))
        for q in range(n_qubits - 1):
            gates.append(GateOp("CX", (q, q + 1)))
    return ParamCircuit(n_qubits, 0, 2 * depth * n_qubits, tuple(gates))
