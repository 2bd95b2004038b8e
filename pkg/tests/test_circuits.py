"""Structural and behavioral tests for feature maps and the ansatz."""

import math

import numpy as np
import pytest

from hqcnet.circuits import (
    FEATURE_MAP_NAMES,
    FeatureMapSpec,
    build_feature_map,
    build_two_local,
    entangled_pairs,
    feature_map_spec,
    named_feature_map,
)
from hqcnet.qsim import (
    AngleExpr,
    GateOp,
    apply_gate_batch,
    run_circuit,
)


def gate_kinds(circuit):
    return [g.kind for g in circuit.gates]


class TestFeatureMapSpec:
    def test_rejects_unknown_family(self):
        with pytest.raises(ValueError, match="family"):
            FeatureMapSpec("W", 1)

    def test_rejects_zero_reps(self):
        with pytest.raises(ValueError, match="reps"):
            FeatureMapSpec("Z", 0)

    def test_rejects_unknown_entanglement(self):
        with pytest.raises(ValueError, match="entanglement"):
            FeatureMapSpec("ZZ", 1, "ring")

    def test_pauli_requires_strings(self):
        with pytest.raises(ValueError, match="Pauli string"):
            FeatureMapSpec("PAULI", 1)

    def test_rejects_empty_pauli_string(self):
        with pytest.raises(ValueError, match="empty"):
            FeatureMapSpec("PAULI", 1, pauli_strings=("Z", ""))

    def test_rejects_bad_pauli_letter(self):
        with pytest.raises(ValueError, match="invalid"):
            FeatureMapSpec("PAULI", 1, pauli_strings=("ZQ",))

    def test_rejects_identity_only_string(self):
        with pytest.raises(ValueError, match="support"):
            FeatureMapSpec("PAULI", 1, pauli_strings=("II",))


class TestZFamily:
    def test_single_rep_counts(self):
        fm = build_feature_map(FeatureMapSpec("Z", 1), 3)
        assert len(fm.gates) == 6
        assert fm.n_inputs == 3
        assert fm.n_params == 0
        assert gate_kinds(fm) == ["H"] * 3 + ["RZ"] * 3

    def test_rotation_angle_is_twice_input(self):
        fm = build_feature_map(FeatureMapSpec("Z", 1), 2)
        rz = [g for g in fm.gates if g.kind == "RZ"]
        for q, gate in enumerate(rz):
            assert gate.targets == (q,)
            assert gate.angle.evaluate([0.3, 0.7], []) == pytest.approx(
                2.0 * [0.3, 0.7][q]
            )

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("reps", [1, 2, 3])
    def test_gate_count_formula(self, n, reps):
        fm = build_feature_map(FeatureMapSpec("Z", reps), n)
        assert len(fm.gates) == reps * 2 * n

    def test_no_entangling_gates(self):
        fm = build_feature_map(FeatureMapSpec("Z", 3), 4)
        assert "CX" not in gate_kinds(fm)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_single_rep_probabilities_ignore_input(self, n):
        """One repetition writes phases on |+...+>: uniform probabilities."""
        fm = build_feature_map(FeatureMapSpec("Z", 1), n)
        rng = np.random.default_rng(7)
        for _ in range(5):
            x = rng.uniform(-math.pi, math.pi, size=n)
            state = run_circuit(fm, x, [])
            np.testing.assert_allclose(
                state.probabilities(), np.full(2**n, 2.0**-n), atol=1e-12
            )


class TestZZFamily:
    def test_two_rep_linear_counts(self):
        fm = build_feature_map(FeatureMapSpec("ZZ", 2, "linear"), 3)
        assert len(fm.gates) == 24

    def test_pair_sandwich_structure(self):
        fm = build_feature_map(FeatureMapSpec("ZZ", 1, "linear"), 2)
        assert gate_kinds(fm) == ["H", "H", "RZ", "RZ", "CX", "RZ", "CX"]
        cx_before, pair_rz, cx_after = fm.gates[4:]
        assert cx_before.targets == (0, 1) and cx_after.targets == (0, 1)
        assert pair_rz.targets == (1,)
        x = [0.4, 1.1]
        expected = 2.0 * (math.pi - 0.4) * (math.pi - 1.1)
        assert pair_rz.angle.evaluate(x, []) == pytest.approx(expected)

    def test_entangled_pair_layouts(self):
        assert entangled_pairs(4, "linear") == [(0, 1), (1, 2), (2, 3)]
        assert entangled_pairs(4, "full") == [
            (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
        ]
        assert entangled_pairs(4, "none") == []

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    @pytest.mark.parametrize("reps", [1, 2, 3])
    def test_gate_count_formulas(self, n, reps):
        linear = build_feature_map(FeatureMapSpec("ZZ", reps, "linear"), n)
        assert len(linear.gates) == reps * (2 * n + 3 * (n - 1))
        full = build_feature_map(FeatureMapSpec("ZZ", reps, "full"), n)
        assert len(full.gates) == reps * (2 * n + 3 * n * (n - 1) // 2)
        none = build_feature_map(FeatureMapSpec("ZZ", reps, "none"), n)
        assert len(none.gates) == reps * 2 * n

    def test_entangled_map_needs_two_qubits(self):
        with pytest.raises(ValueError, match="2 qubits"):
            build_feature_map(FeatureMapSpec("ZZ", 1, "linear"), 1)

    def test_cx_rz_cx_matches_native_rzz(self):
        """The pair sandwich is the two-qubit phase rotation, exactly."""
        rng = np.random.default_rng(11)
        for n, (a, b) in [(2, (0, 1)), (3, (0, 2)), (4, (3, 1))]:
            psi = rng.normal(size=(4, 2**n)) + 1j * rng.normal(size=(4, 2**n))
            psi /= np.linalg.norm(psi, axis=1, keepdims=True)
            theta = rng.uniform(-2 * math.pi, 2 * math.pi)
            via_cx = apply_gate_batch(psi, n, GateOp("CX", (a, b)), None)
            via_cx = apply_gate_batch(
                via_cx, n, GateOp("RZ", (b,), AngleExpr.constant(theta)), theta
            )
            via_cx = apply_gate_batch(via_cx, n, GateOp("CX", (a, b)), None)
            native = apply_gate_batch(
                psi, n, GateOp("RZZ", (a, b), AngleExpr.constant(theta)), theta
            )
            np.testing.assert_allclose(via_cx, native, atol=1e-12)


class TestPauliFamily:
    def test_each_input_in_three_angles_for_xyz(self):
        for n in [2, 3, 5]:
            fm = build_feature_map(
                FeatureMapSpec("PAULI", 1, pauli_strings=("X", "Y", "Z")), n
            )
            counts = {i: 0 for i in range(n)}
            for g in fm.gates:
                if g.angle is None:
                    continue
                for i in g.angle.input_indices():
                    counts[i] += 1
            assert all(c == 3 for c in counts.values())

    def test_xyz_gate_count(self):
        # per rep: n H wall, 3n for X (H RZ H), 3n for Y (RX RZ RX), n for Z
        for n in [2, 3, 4]:
            fm = build_feature_map(
                FeatureMapSpec("PAULI", 1, pauli_strings=("X", "Y", "Z")), n
            )
            assert len(fm.gates) == 8 * n

    def test_multiqubit_string_window_slides(self):
        fm = build_feature_map(FeatureMapSpec("PAULI", 1, pauli_strings=("ZZ",)), 3)
        # H wall, then windows (0,1) and (1,2): CX chain + RZ + undo each
        assert gate_kinds(fm) == ["H"] * 3 + ["CX", "RZ", "CX"] * 2
        first, second = fm.gates[4], fm.gates[7]
        assert first.targets == (1,) and second.targets == (2,)
        assert first.angle.input_indices() == frozenset({0, 1})
        assert second.angle.input_indices() == frozenset({1, 2})

    def test_y_basis_change_wraps_rotation(self):
        fm = build_feature_map(FeatureMapSpec("PAULI", 1, pauli_strings=("Y",)), 1)
        assert gate_kinds(fm) == ["H", "RX", "RZ", "RX"]
        enter, _, undo = fm.gates[1:]
        assert enter.angle.evaluate([0.0], []) == pytest.approx(math.pi / 2)
        assert undo.angle.evaluate([0.0], []) == pytest.approx(-math.pi / 2)

    def test_zxz_structure(self):
        fm = build_feature_map(FeatureMapSpec("PAULI", 1, pauli_strings=("ZXZ",)), 3)
        assert gate_kinds(fm) == ["H"] * 3 + ["H", "CX", "CX", "RZ", "CX", "CX", "H"]
        rz = fm.gates[6]
        assert rz.targets == (2,)
        x = [0.2, 0.5, 0.9]
        want = 2.0 * (math.pi - 0.2) * (math.pi - 0.5) * (math.pi - 0.9)
        assert rz.angle.evaluate(x, []) == pytest.approx(want)

    def test_string_wider_than_register_rejected(self):
        with pytest.raises(ValueError, match="needs 3 qubits"):
            build_feature_map(FeatureMapSpec("PAULI", 1, pauli_strings=("ZXZ",)), 2)

    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    @pytest.mark.parametrize("reps", [1, 2, 3])
    def test_z_yy_zxz_gate_count(self, n, reps):
        fm = build_feature_map(
            FeatureMapSpec("PAULI", reps, pauli_strings=("Z", "YY", "ZXZ")), n
        )
        per_rep = n + n + 7 * (n - 1) + 7 * (n - 2)
        assert len(fm.gates) == reps * per_rep


class TestNamedMaps:
    def test_all_nine_build(self):
        for name in FEATURE_MAP_NAMES:
            fm = named_feature_map(name, 3)
            assert fm.n_qubits == 3
            assert fm.n_inputs == 3
            assert fm.n_params == 0

    def test_z_reps_1_has_no_entangling_gates(self):
        fm = named_feature_map("z_reps_1", 3)
        assert "CX" not in gate_kinds(fm)

    def test_zz_reps_3_full_pair_count(self):
        fm = named_feature_map("zz_reps_3_full", 3)
        # 3 repetitions x 3 pairs, each wrapped in two CX
        assert gate_kinds(fm).count("CX") == 18
        assert len(fm.gates) == 3 * (6 + 9)

    def test_zz_reps_1_name_builds_unentangled_variant(self):
        fm = named_feature_map("zz_reps_1_linear", 3)
        assert "CX" not in gate_kinds(fm)
        assert feature_map_spec("zz_reps_1_linear").entanglement == "none"
        entangled = build_feature_map(FeatureMapSpec("ZZ", 1, "linear"), 3)
        assert "CX" in gate_kinds(entangled)

    def test_zz_reps_2_linear_is_entangled(self):
        fm = named_feature_map("zz_reps_2_linear", 3)
        assert gate_kinds(fm).count("CX") == 8

    def test_pauli_names(self):
        xyz = feature_map_spec("pauli_xyz_1_rep")
        assert xyz.pauli_strings == ("X", "Y", "Z") and xyz.reps == 1
        zyz = feature_map_spec("pauli_z_yy_zxz_linear")
        assert zyz.pauli_strings == ("Z", "YY", "ZXZ") and zyz.reps == 1
        rep2 = feature_map_spec("pauli_z_yy_zxz_rep_2")
        assert rep2.pauli_strings == ("Z", "YY", "ZXZ") and rep2.reps == 2

    def test_unknown_name_lists_all_options(self):
        with pytest.raises(KeyError) as err:
            named_feature_map("bogus", 3)
        message = str(err.value)
        for name in FEATURE_MAP_NAMES:
            assert name in message

    def test_construction_is_deterministic(self):
        for name in FEATURE_MAP_NAMES:
            assert named_feature_map(name, 4).gates == named_feature_map(name, 4).gates


class TestTwoLocal:
    def test_depth_one_counts(self):
        tl = build_two_local(3, 1)
        assert gate_kinds(tl) == ["RY"] * 3 + ["RZ"] * 3 + ["CX"] * 2
        assert tl.n_params == 6
        assert tl.n_inputs == 0

    def test_param_count_formula(self):
        assert build_two_local(4, 3).n_params == 24
        for n in [2, 3, 4, 5, 6]:
            for d in [1, 2, 3]:
                assert build_two_local(n, d).n_params == 2 * d * n

    def test_each_param_used_exactly_once(self):
        tl = build_two_local(3, 2)
        used = []
        for g in tl.gates:
            if g.angle is not None:
                (idx,) = g.angle.param_indices()
                used.append(idx)
        assert sorted(used) == list(range(12))

    def test_block_layout(self):
        tl = build_two_local(2, 2)
        kinds = gate_kinds(tl)
        assert kinds == ["RY", "RY", "RZ", "RZ", "CX"] * 2
        # block 1 rotations consume params 4..7
        second_block = [g for g in tl.gates[5:] if g.angle is not None]
        indices = [next(iter(g.angle.param_indices())) for g in second_block]
        assert indices == [4, 5, 6, 7]

    def test_zero_params_acts_as_identity_on_zero_state(self):
        tl = build_two_local(2, 1)
        state = run_circuit(tl, [], np.zeros(4))
        np.testing.assert_allclose(state.amplitudes, [1, 0, 0, 0], atol=1e-15)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            build_two_local(1, 1)
        with pytest.raises(ValueError):
            build_two_local(3, 0)
