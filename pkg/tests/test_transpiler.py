"""Tests for basis decomposition, routing and the complexity objective."""

import copy
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.bopt import genome_space
from src.circuit import Circuit, DesignParams, build_ansatz, template
from src.qsim import Gate, GateKind, Statevector, run_statevector
from src.transpiler import (TranspileError, complexity, decompose_1q, decompose_cr, load_backend_snapshot,
                            peephole, route, transpile)
from tests.conftest import MANILA_PATH

BASIS = {GateKind.ID, GateKind.RZ, GateKind.SX, GateKind.X, GateKind.CX, GateKind.RESET}


def unitary(circuit, params=()):
    """Columns are the circuit's outputs on each basis state."""
    dim = 2 ** circuit.n_qubits
    columns = []
    for j in range(dim):
        basis = np.zeros(dim, dtype=np.complex128)
        basis[j] = 1.0
        columns.append(run_statevector(circuit, params, Statevector(basis, circuit.n_qubits)).amplitudes)
    return np.stack(columns, axis=1)


def equal_up_to_phase(a, b):
    return abs(np.trace(a.conj().T @ b)) / a.shape[0] == pytest.approx(1.0, abs=1e-10)


def manila_document():
    with open(MANILA_PATH, 'r') as f:
        return json.load(f)


class TestBackendSnapshot:
    def test_fixture(self, manila):
        assert manila.n_qubits == 5
        assert len(manila.coupling_map) == 8
        assert manila.basis_gates == frozenset(BASIS)
        assert manila.gate_errors[(GateKind.CX, (0, 1))] == pytest.approx(0.00954102)
        assert manila.readout_errors[2] == pytest.approx(0.0354102)

    def test_lowercase_basis_names_are_accepted(self):
        document = manila_document()
        document["basis_gates"] = [g.lower() for g in document["basis_gates"]]
        assert load_backend_snapshot(document).basis_gates == frozenset(BASIS)

    def test_cx_error_on_uncoupled_pair(self):
        document = manila_document()
        document["gate_errors"].append({"gate": "CX", "qubits": [0, 4], "error": 0.01})
        with pytest.raises(TranspileError):
            load_backend_snapshot(document)

    def test_readout_length(self):
        document = manila_document()
        document["readout_errors"] = document["readout_errors"][:3]
        with pytest.raises(TranspileError):
            load_backend_snapshot(document)

    def test_document_round_trip(self, manila):
        assert load_backend_snapshot(manila.to_document()) == manila


class TestDecomposition:
    @pytest.mark.parametrize("kind", [GateKind.H, GateKind.RX, GateKind.RY])
    def test_single_qubit(self, kind):
        angle = None if kind == GateKind.H else 0.83
        gate = Gate(kind, (0,), angle=angle)
        parts = decompose_1q(gate)
        assert {p.kind for p in parts} <= BASIS
        assert equal_up_to_phase(unitary(Circuit(1, (gate,), 0)), unitary(Circuit(1, parts, 0)))

    @pytest.mark.parametrize("kind", [GateKind.CRX, GateKind.CRY, GateKind.CRZ, GateKind.CZ, GateKind.SWAP])
    def test_two_qubit(self, kind):
        angle = -1.4 if kind in (GateKind.CRX, GateKind.CRY, GateKind.CRZ) else None
        gate = Gate(kind, (1, 0), angle=angle)
        parts = decompose_cr(gate)
        assert all(p.kind == GateKind.CX for p in parts if len(p.qubits) == 2)
        assert equal_up_to_phase(unitary(Circuit(2, (gate,), 0)), unitary(Circuit(2, parts, 0)))

    @pytest.mark.parametrize("kind", [GateKind.RZ, GateKind.X])
    def test_basis_gates_pass_through(self, kind):
        gate = Gate(kind, (2,), angle=0.4 if kind == GateKind.RZ else None)
        assert decompose_1q(gate) == (gate,)

    def test_symbolic_angles_stay_affine(self):
        parts = decompose_cr(Gate.parameterized(GateKind.CRZ, (0, 1), 0))
        scales = [p.param_scale for p in parts if p.param_index is not None]
        assert scales == [0.5, -0.5]


class TestRouting:
    def test_distant_cx_inserts_swaps(self, manila):
        circuit = Circuit(4, (Gate(GateKind.H, (0,)), Gate(GateKind.CX, (0, 3))), 0)
        tc = transpile(circuit, manila)
        assert tc.logical_layout != (0, 1, 2, 3)
        assert sorted(tc.layout) == [0, 1, 2, 3, 4]
        expected = tc.embed_state(run_statevector(circuit))
        assert run_statevector(tc.circuit).fidelity(expected) == pytest.approx(1.0, abs=1e-8)

    def test_cx_two_hops_away_costs_four_cx(self, manila):
        tc = transpile(Circuit(3, (Gate(GateKind.CX, (0, 2)),), 0), manila)
        assert tc.circuit.count_ops()["CX"] == 4
        assert all(g.qubits in manila.coupling_map for g in tc.circuit.gates if g.kind == GateKind.CX)

    def test_single_qubit_circuit_keeps_identity_layout(self, manila):
        circuit = Circuit(4, (Gate(GateKind.H, (0,)), Gate(GateKind.RY, (3,), angle=0.2)), 0)
        assert route(circuit, manila).logical_layout == (0, 1, 2, 3)
        assert transpile(circuit, manila).logical_layout == (0, 1, 2, 3)

    def test_reversed_cx_uses_hadamards(self):
        snapshot = load_backend_snapshot({
            "name": "pair", "n_qubits": 2, "coupling_map": [[0, 1]],
            "basis_gates": ["RZ", "SX", "X", "CX"],
            "gate_errors": [{"gate": "CX", "qubits": [0, 1], "error": 0.01}], "readout_errors": [0.0, 0.0],
        })
        circuit = Circuit(2, (Gate(GateKind.CX, (1, 0)),), 0)
        tc = route(circuit, snapshot)
        assert [g.qubits for g in tc.circuit.gates if g.kind == GateKind.CX] == [(0, 1)]
        assert equal_up_to_phase(unitary(circuit), unitary(tc.circuit))

    def test_disconnected_backend(self):
        snapshot = load_backend_snapshot({
            "name": "split", "n_qubits": 3, "coupling_map": [[0, 1], [1, 0]],
            "basis_gates": ["RZ", "SX", "X", "CX"], "readout_errors": [0.0, 0.0, 0.0],
        })
        with pytest.raises(TranspileError):
            transpile(Circuit(3, (Gate(GateKind.CX, (0, 2)),), 0), snapshot)

    def test_too_many_qubits(self, manila):
        with pytest.raises(TranspileError):
            transpile(Circuit(6, (), 0), manila)

    def test_logical_counts(self, manila):
        tc = transpile(Circuit(4, (Gate(GateKind.X, (0,)),), 0), manila)
        physical = np.zeros(32, dtype=np.int64)
        physical[0b10000] = 7
        physical[0b10001] = 3
        assert_allclose(tc.logical_counts(physical)[0b1000], 10)


class TestPeephole:
    def test_cancels_adjacent_cx(self):
        gates = [Gate(GateKind.CX, (0, 1)), Gate(GateKind.RZ, (2,), angle=0.3), Gate(GateKind.CX, (0, 1))]
        assert peephole(gates) == [Gate(GateKind.RZ, (2,), angle=0.3)]

    def test_blocked_cancellation(self):
        gates = [Gate(GateKind.CX, (0, 1)), Gate(GateKind.SX, (1,)), Gate(GateKind.CX, (0, 1))]
        assert peephole(gates) == gates

    def test_drops_zero_rz(self):
        gates = [Gate(GateKind.RZ, (0,), angle=0.0), Gate(GateKind.RZ, (1,), angle=2 * np.pi),
                 Gate.parameterized(GateKind.RZ, (0,), 0)]
        assert peephole(gates) == [Gate.parameterized(GateKind.RZ, (0,), 0)]


class TestTranspileFidelity:
    def test_random_ansatze(self, manila):
        space = genome_space(DesignParams(4, 5))
        rng = np.random.default_rng(99)
        for _ in range(100):
            circuit = build_ansatz(space.decode(space.sample_uniform(rng)))
            params = rng.uniform(0, 2 * np.pi, circuit.n_params)
            tc = transpile(circuit, manila)
            assert {g.kind for g in tc.circuit.gates} <= BASIS
            assert all(g.qubits in manila.coupling_map for g in tc.circuit.gates if g.kind == GateKind.CX)
            expected = tc.embed_state(run_statevector(circuit, params))
            assert run_statevector(tc.circuit, params).fidelity(expected) >= 1 - 1e-8

    def test_transpiling_twice_adds_nothing(self, manila):
        for circuit in (template("RealAmplitudes", 2, "full"), template("EfficientSU2", 1, "circular")):
            once = transpile(circuit, manila)
            twice = transpile(once.circuit, manila)
            assert len(twice.circuit.gates) == len(once.circuit.gates)
            assert twice.logical_layout == tuple(range(5))

    def test_template_keeps_slots(self, manila):
        circuit = template("RealAmplitudes", 2, "full")
        tc = transpile(circuit, manila)
        assert tc.circuit.n_params == circuit.n_params
        assert {slot for slot, _, _ in tc.source_params.values()} == set(range(circuit.n_params))


class TestComplexity:
    def test_known_values(self, manila):
        rx = Circuit(4, (Gate.parameterized(GateKind.RX, (0,), 0),), 1)
        assert complexity(transpile(rx, manila), manila) == pytest.approx(2 * 0.00035)
        cx = Circuit(4, (Gate(GateKind.CX, (0, 1)),), 0)
        assert complexity(transpile(cx, manila), manila) == pytest.approx(0.00954102)

    def test_empty_circuit(self, manila):
        assert complexity(transpile(Circuit(4, (), 0), manila), manila) == 0.0

    def test_monotone_and_order_free(self, manila):
        base = Circuit(4, (Gate(GateKind.CX, (1, 2)), Gate(GateKind.SX, (3,))), 0)
        extended = Circuit(4, base.gates + (Gate(GateKind.X, (2,)),), 0)
        swapped = Circuit(4, tuple(reversed(base.gates)), 0)
        c = complexity(transpile(base, manila), manila)
        assert complexity(transpile(extended, manila), manila) > c
        assert complexity(transpile(swapped, manila), manila) == pytest.approx(c)

    def test_missing_rate_raises(self, manila):
        document = copy.deepcopy(manila.to_document())
        document["gate_errors"] = [e for e in document["gate_errors"] if e["gate"] != "SX"]
        snapshot = load_backend_snapshot(document)
        with pytest.raises(TranspileError):
            complexity(transpile(Circuit(4, (Gate(GateKind.SX, (0,)),), 0), snapshot), snapshot)
