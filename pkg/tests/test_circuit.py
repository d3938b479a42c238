"""Tests for the circuit container, genome builder, post-processing and templates."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.bopt import genome_space
from src.circuit import (NO_GATE, AnsatzGenome, Circuit, CircuitError, DesignParams, GateChoice,
                         ZZFeatureMap, build_ansatz, entangler_pairs, gate_choices, postprocess,
                         postprocess_with_map, search_space_size, template, zz_feature_map)
from src.qsim import Gate, GateKind, run_statevector

RX, RY, RZ = (GateChoice(k) for k in (GateKind.RX, GateKind.RY, GateKind.RZ))


def genome(entanglement=None, grid=None, n=2, g=2):
    entanglement = entanglement or tuple((0,) * n for _ in range(n))
    grid = grid or tuple((NO_GATE,) * g for _ in range(n))
    return AnsatzGenome(entanglement, grid)


def random_genomes(count, seed=0, design=DesignParams(4, 5)):
    space = genome_space(design)
    rng = np.random.default_rng(seed)
    return [space.decode(space.sample_uniform(rng)) for _ in range(count)]


class TestCircuit:
    def test_slots_must_be_contiguous(self):
        with pytest.raises(CircuitError):
            Circuit(1, (Gate.parameterized(GateKind.RX, (0,), 1),), 1)

    def test_gate_outside_register(self):
        with pytest.raises(CircuitError):
            Circuit(2, (Gate(GateKind.X, (2,)),), 0)

    def test_compose_shifts_slots(self):
        a = Circuit(2, (Gate.parameterized(GateKind.RX, (0,), 0),), 1)
        b = Circuit(2, (Gate.parameterized(GateKind.RY, (1,), 0), Gate.parameterized(GateKind.RZ, (0,), 1)), 2)
        composed = a.compose(b)
        assert composed.n_params == 3
        assert [g.param_index for g in composed.gates] == [0, 1, 2]

    def test_stats(self):
        circuit = Circuit(3, (Gate(GateKind.H, (0,)), Gate(GateKind.CX, (0, 1)), Gate(GateKind.X, (2,)),
                              Gate(GateKind.CX, (1, 2))), 0)
        assert circuit.stats() == {"gates": 4, "two_qubit_gates": 2, "depth": 3, "params": 0}
        assert circuit.count_ops() == {"H": 1, "CX": 2, "X": 1}

    def test_document_round_trip(self):
        circuit = template("EfficientSU2", 1, "circular")
        restored = Circuit.from_document(circuit.to_document(trial_id=3))
        assert restored == circuit

    def test_unknown_format(self):
        with pytest.raises(CircuitError):
            Circuit.from_document({"format": 2, "n_qubits": 1, "n_params": 0, "gates": []})


class TestGenome:
    def test_choices_per_wire(self):
        labels = [c.label for c in gate_choices(4, 1)]
        assert len(labels) == 13
        assert labels[:4] == ["None", "RX", "RY", "RZ"]
        assert labels[4:7] == ["CRX(0)", "CRX(2)", "CRX(3)"]

    def test_label_parse(self):
        assert GateChoice.parse("CRZ(2)") == GateChoice(GateKind.CRZ, 2)
        assert GateChoice.parse("None") == NO_GATE

    def test_controlled_choice_needs_target(self):
        with pytest.raises(CircuitError):
            GateChoice(GateKind.CRY)

    def test_diagonal_must_be_zero(self):
        with pytest.raises(CircuitError):
            genome(entanglement=((1, 0), (0, 0)))

    def test_self_target_is_rejected(self):
        with pytest.raises(CircuitError):
            genome(grid=((GateChoice(GateKind.CRX, 0), NO_GATE), (NO_GATE, NO_GATE)))

    def test_search_space_size(self):
        size = search_space_size(DesignParams(4, 5))
        assert size == 2 ** 12 * 13 ** 20
        assert f"{size:.2e}" == "7.78e+25"

    @pytest.mark.parametrize("n,g,expected", [(1, 2, 16), (2, 1, 196), (3, 1, 64000)])
    def test_small_search_spaces(self, n, g, expected):
        assert search_space_size(DesignParams(n, g)) == expected


class TestBuildAnsatz:
    def test_entanglement_block_first(self):
        g = genome(entanglement=((0, 1), (1, 0)), grid=((RX, NO_GATE), (NO_GATE, NO_GATE)))
        kinds = [(gate.kind, gate.qubits) for gate in build_ansatz(g).gates]
        assert kinds == [(GateKind.H, (0,)), (GateKind.CX, (0, 1)), (GateKind.H, (1,)), (GateKind.CX, (1, 0)),
                         (GateKind.RX, (0,))]

    def test_grid_is_emitted_column_by_column(self):
        g = genome(grid=((RX, RY), (GateChoice(GateKind.CRZ, 0), RZ)))
        circuit = build_ansatz(g)
        assert [(gate.kind, gate.qubits, gate.param_index) for gate in circuit.gates] == [
            (GateKind.RX, (0,), 0), (GateKind.CRZ, (1, 0), 1), (GateKind.RY, (0,), 2), (GateKind.RZ, (1,), 3)]
        assert circuit.n_params == 4

    def test_empty_genome(self):
        circuit = build_ansatz(AnsatzGenome.empty(DesignParams(4, 5)))
        assert circuit.gates == () and circuit.n_params == 0


class TestPostprocess:
    def test_merges_repeated_rotation(self):
        processed, mapping = postprocess_with_map(build_ansatz(genome(grid=((RY, RY), (NO_GATE, NO_GATE)))))
        assert len(processed.gates) == 1
        assert processed.n_params == 1
        assert mapping == {0: 0}

    def test_intervening_gate_blocks_merge(self):
        g = genome(grid=((RX, RX), (GateChoice(GateKind.CRY, 0), NO_GATE)))
        assert len(postprocess(build_ansatz(g)).gates) == 3

    def test_drops_trailing_rz(self):
        processed, mapping = postprocess_with_map(build_ansatz(genome(grid=((RX, RZ), (RZ, NO_GATE)))))
        assert [(g.kind, g.qubits) for g in processed.gates] == [(GateKind.RX, (0,))]
        assert mapping == {0: 0}

    def test_leading_rz_is_kept(self):
        # Only the last gate on a wire can be a dropped RZ
        processed = postprocess(build_ansatz(genome(grid=((RZ, RY), (NO_GATE, NO_GATE)))))
        assert [gate.kind for gate in processed.gates] == [GateKind.RZ, GateKind.RY]

    def test_rz_before_cx_survives_and_trailing_rz_goes(self):
        circuit = Circuit(2, (Gate.parameterized(GateKind.RZ, (0,), 0), Gate(GateKind.CX, (0, 1)),
                              Gate.parameterized(GateKind.RZ, (0,), 1)), 2)
        processed = postprocess(circuit)
        assert [(g.kind, g.qubits) for g in processed.gates] == [(GateKind.RZ, (0,)), (GateKind.CX, (0, 1))]
        assert processed.n_params == 1

    def test_merges_controlled_rotations(self):
        cry = GateChoice(GateKind.CRY, 1)
        processed = postprocess(build_ansatz(genome(grid=((cry, cry), (NO_GATE, NO_GATE)))))
        assert len(processed.gates) == 1
        assert processed.gates[0].kind == GateKind.CRY

    def test_random_genomes_keep_z_distribution(self):
        rng = np.random.default_rng(7)
        for g in random_genomes(500, seed=1):
            circuit = build_ansatz(g)
            bound = circuit.bind(rng.uniform(0, 2 * np.pi, circuit.n_params))
            processed = postprocess(bound)
            assert len(processed.gates) <= len(bound.gates)
            assert postprocess(processed) == processed
            assert_allclose(run_statevector(processed).probabilities(), run_statevector(bound).probabilities(),
                            atol=1e-9)

    def test_idempotent_on_symbolic_circuits(self):
        for g in random_genomes(100, seed=2):
            once = postprocess(build_ansatz(g))
            assert postprocess(once) == once


class TestFeatureMap:
    def test_template_shape(self):
        fmap = ZZFeatureMap(4)
        assert fmap.template.n_params == 10
        assert fmap.template.count_ops() == {"H": 4, "RZ": 10, "CX": 12}

    def test_angles(self):
        x = np.array([0.0, 1.0, np.pi, 2.0])
        angles = ZZFeatureMap(4).angles(x)[0]
        assert_allclose(angles[:4], 2 * x)
        assert angles[4] == pytest.approx(2 * np.pi * (np.pi - 1.0))
        assert angles[5] == pytest.approx(0.0)

    def test_single_qubit_map_is_uniform(self):
        probs = run_statevector(zz_feature_map([1.3])).probabilities()
        assert_allclose(probs, [0.5, 0.5], atol=1e-12)

    def test_zero_features(self):
        fm = ZZFeatureMap(4)
        assert_allclose(fm.angles(np.zeros(4))[0], [0.0] * 4 + [2 * np.pi ** 2] * 6)
        bound = zz_feature_map(np.zeros(4))
        assert bound.count_ops() == {"H": 4, "RZ": 10, "CX": 12}
        assert bound.n_params == 0

    def test_wrong_feature_length(self):
        with pytest.raises(CircuitError):
            zz_feature_map([0.1, 0.2], n_qubits=4)


class TestTemplates:
    def test_real_amplitudes(self):
        circuit = template("RealAmplitudes", 1, "linear")
        assert circuit.n_params == 8
        assert circuit.count_ops() == {"RY": 8, "CX": 3}

    def test_efficient_su2(self):
        circuit = template("EfficientSU2", 2, "full")
        assert circuit.n_params == 24
        assert circuit.count_ops()["CX"] == 12

    def test_efficient_su2_three_reps(self):
        assert template("EfficientSU2", 3, "linear").n_params == 32

    def test_pauli_two_design(self):
        circuit = template("PauliTwoDesign", 2, seed=5)
        assert circuit.n_params == 12
        assert circuit.count_ops()["CZ"] == 6
        assert template("PauliTwoDesign", 2, seed=5) == circuit
        with pytest.raises(CircuitError):
            template("PauliTwoDesign", 1, "linear")

    def test_entangler_pairs(self):
        assert entangler_pairs(4, "reverse_linear") == [(2, 3), (1, 2), (0, 1)]
        assert entangler_pairs(4, "circular") == [(3, 0), (0, 1), (1, 2), (2, 3)]
        assert len(entangler_pairs(4, "full")) == 6

    def test_invalid_options(self):
        with pytest.raises(CircuitError):
            template("RealAmplitudes", 0, "linear")
        with pytest.raises(CircuitError):
            template("RealAmplitudes", 1)
        with pytest.raises(CircuitError):
            template("TwoLocal", 1, "linear")
