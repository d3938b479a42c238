"""
Transpiler for backend snapshots.

Rewrites a logical circuit into a backend's basis gates {ID, RZ, SX, X, CX, RESET},
routes CX gates along the coupling map with greedy shortest-path SWAP insertion,
cleans up with a small peephole pass and scores the result by summed gate error.

Trainable angles stay symbolic through every stage: a decomposed gate carries
``scale * theta[slot] + offset`` of its source slot, so one transpilation serves
every parameter binding.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from logzero import logger
from pydantic import ValidationError

from src.circuit import Circuit
from src.config_manager import load_document
from src.models import BackendSnapshotDocument
from src.qsim import Gate, GateKind, NoiseModel, SimulationError, Statevector

HALF_PI = math.pi / 2


class TranspileError(ValueError):
    """Raised for invalid snapshots or circuits that cannot be mapped onto a backend."""


@dataclass(frozen=True)
class BackendSnapshot:
    """Immutable description of a device: topology, native gates and error rates."""
    name: str
    n_qubits: int
    coupling_map: FrozenSet[Tuple[int, int]]
    basis_gates: FrozenSet[GateKind]
    gate_errors: Dict[Tuple[GateKind, Tuple[int, ...]], float]
    readout_errors: Tuple[float, ...]

    @classmethod
    def from_document(cls, document: BackendSnapshotDocument) -> 'BackendSnapshot':
        return cls(
            name=document.name,
            n_qubits=document.n_qubits,
            coupling_map=frozenset(tuple(pair) for pair in document.coupling_map),
            basis_gates=frozenset(GateKind(g) for g in document.basis_gates),
            gate_errors={(GateKind(e.gate), tuple(e.qubits)): e.error for e in document.gate_errors},
            readout_errors=tuple(document.readout_errors),
        )

    def graph(self) -> nx.Graph:
        """Undirected connectivity graph over every physical qubit."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n_qubits))
        graph.add_edges_from(self.coupling_map)
        return graph

    def noise_model(self) -> NoiseModel:
        return NoiseModel.from_backend(self)

    def to_document(self) -> Dict[str, Any]:
        return {
            "format": 1,
            "name": self.name,
            "n_qubits": self.n_qubits,
            "coupling_map": [list(pair) for pair in sorted(self.coupling_map)],
            "basis_gates": sorted(g.value for g in self.basis_gates),
            "gate_errors": [
                {"gate": kind.value, "qubits": list(qubits), "error": error}
                for (kind, qubits), error in sorted(self.gate_errors.items(), key=lambda kv: (kv[0][0].value, kv[0][1]))
            ],
            "readout_errors": list(self.readout_errors),
        }


def load_backend_snapshot(document: Union[str, Mapping[str, Any]]) -> BackendSnapshot:
    """
    Validate a backend snapshot document.

    Args:
        document: Parsed mapping, or the path of a JSON snapshot file

    Returns:
        BackendSnapshot: Validated snapshot
    """
    if isinstance(document, str):
        document = load_document(document)
    try:
        validated = BackendSnapshotDocument.model_validate(document)
    except ValidationError as e:
        raise TranspileError(f"invalid backend snapshot: {str(e)}") from e
    snapshot = BackendSnapshot.from_document(validated)
    logger.debug(f"Loaded backend {snapshot.name} with {snapshot.n_qubits} qubits")
    return snapshot


@dataclass(frozen=True)
class TranspiledCircuit:
    """
    Basis-gate circuit over the backend's physical qubits.

    ``layout[l]`` is the physical qubit holding logical qubit ``l`` at the end of the
    circuit. Logical indices at and above ``n_logical`` are the idle device qubits,
    so the layout is a full permutation of the device.
    """
    circuit: Circuit
    layout: Tuple[int, ...]
    n_logical: int

    @property
    def source_params(self) -> Dict[int, Tuple[int, float, float]]:
        """Transpiled gate index -> (original slot, scale, offset) of its angle."""
        return {
            index: (g.param_index, g.param_scale, g.angle)
            for index, g in enumerate(self.circuit.gates) if g.param_index is not None
        }

    @property
    def logical_layout(self) -> Tuple[int, ...]:
        return self.layout[:self.n_logical]

    def embed_state(self, state: Statevector) -> Statevector:
        """Physical state the transpiled circuit should produce for a logical output ``state``."""
        if state.n_qubits != self.n_logical:
            raise TranspileError(f"expected a {self.n_logical}-qubit state, got {state.n_qubits}")
        n_physical = len(self.layout)
        full = np.zeros(2 ** n_physical, dtype=np.complex128)
        full[::2 ** (n_physical - self.n_logical)] = state.amplitudes
        inverse = [0] * n_physical
        for logical, physical in enumerate(self.layout):
            inverse[physical] = logical
        permuted = np.transpose(full.reshape((2,) * n_physical), inverse).reshape(-1)
        return Statevector(permuted, n_physical)

    def logical_counts(self, index_counts: np.ndarray) -> np.ndarray:
        """Marginalize physical outcome counts onto the logical qubits, logical qubit 0 first."""
        n_physical = len(self.layout)
        physical = np.arange(2 ** n_physical)
        logical = np.zeros_like(physical)
        for l, p in enumerate(self.logical_layout):
            logical |= ((physical >> (n_physical - 1 - p)) & 1) << (self.n_logical - 1 - l)
        return np.bincount(logical, weights=index_counts, minlength=2 ** self.n_logical).astype(np.int64)


def _scaled(gate: Gate, kind: GateKind, qubits: Tuple[int, ...], factor: float = 1.0,
            shift: float = 0.0) -> Gate:
    """``factor * angle(gate) + shift`` as a gate of ``kind``, still symbolic when ``gate`` is."""
    if gate.param_index is None:
        return Gate(kind, qubits, angle=factor * gate.angle + shift)
    return Gate.parameterized(kind, qubits, gate.param_index, factor * gate.param_scale,
                              factor * gate.angle + shift)


def decompose_1q(gate: Gate) -> Tuple[Gate, ...]:
    """
    Single-qubit gate as RZ / SX / X basis gates, equal up to global phase.

    Uses U3(theta, phi, lam) = RZ(lam), SX, RZ(theta + pi), SX, RZ(phi + pi) in
    circuit order, eliding fixed zero-angle RZ terms.
    """
    if len(gate.qubits) != 1:
        raise TranspileError(f"decompose_1q expects a single-qubit gate, got {gate.kind.value}")
    q = gate.qubits
    kind = gate.kind
    if kind in (GateKind.RZ, GateKind.SX, GateKind.X, GateKind.ID, GateKind.RESET):
        return (gate,)
    if kind == GateKind.H:
        return (Gate(GateKind.RZ, q, angle=HALF_PI), Gate(GateKind.SX, q), Gate(GateKind.RZ, q, angle=HALF_PI))
    if kind == GateKind.RX:
        return (
            Gate(GateKind.RZ, q, angle=HALF_PI), Gate(GateKind.SX, q),
            _scaled(gate, GateKind.RZ, q, shift=math.pi),
            Gate(GateKind.SX, q), Gate(GateKind.RZ, q, angle=HALF_PI),
        )
    if kind == GateKind.RY:
        return (
            Gate(GateKind.SX, q), _scaled(gate, GateKind.RZ, q, shift=math.pi),
            Gate(GateKind.SX, q), Gate(GateKind.RZ, q, angle=math.pi),
        )
    raise TranspileError(f"no single-qubit decomposition for {kind.value}")


def decompose_cr(gate: Gate) -> Tuple[Gate, ...]:
    """
    Two-qubit gate as CX plus single-qubit gates, equal up to global phase.

    CRZ(t) and CRY(t) use the half-angle pattern R(t/2), CX, R(-t/2), CX on the
    target; CRX is CRZ conjugated by H on the target. CZ is H-conjugated CX and
    SWAP is three alternating CX.
    """
    kind = gate.kind
    if kind == GateKind.CX:
        return (gate,)
    if len(gate.qubits) != 2:
        raise TranspileError(f"decompose_cr expects a two-qubit gate, got {kind.value}")
    c, t = gate.qubits
    if kind in (GateKind.CRZ, GateKind.CRY):
        single = GateKind.RZ if kind == GateKind.CRZ else GateKind.RY
        return (
            _scaled(gate, single, (t,), 0.5), Gate(GateKind.CX, (c, t)),
            _scaled(gate, single, (t,), -0.5), Gate(GateKind.CX, (c, t)),
        )
    if kind == GateKind.CRX:
        hadamard = Gate(GateKind.H, (t,))
        return (hadamard,) + decompose_cr(_scaled(gate, GateKind.CRZ, (c, t))) + (hadamard,)
    if kind == GateKind.CZ:
        hadamard = Gate(GateKind.H, (t,))
        return (hadamard, Gate(GateKind.CX, (c, t)), hadamard)
    if kind == GateKind.SWAP:
        return (Gate(GateKind.CX, (c, t)), Gate(GateKind.CX, (t, c)), Gate(GateKind.CX, (c, t)))
    raise TranspileError(f"unsupported two-qubit gate {kind.value}")


def _expand(circuit: Circuit) -> List[Gate]:
    gates: List[Gate] = []
    for gate in circuit.gates:
        parts = decompose_cr(gate) if len(gate.qubits) == 2 else (gate,)
        for part in parts:
            gates.extend(decompose_1q(part) if len(part.qubits) == 1 else (part,))
    return gates


class _Router:
    """Greedy router state: logical <-> physical permutation and emitted gates."""

    def __init__(self, snapshot: BackendSnapshot, initial_layout: Sequence[int]):
        self.snapshot = snapshot
        self.graph = snapshot.graph()
        self.layout = list(initial_layout)
        self.gates: List[Gate] = []
        self.swaps = 0

    def emit_cx(self, control: int, target: int) -> None:
        if (control, target) in self.snapshot.coupling_map:
            self.gates.append(Gate(GateKind.CX, (control, target)))
        elif (target, control) in self.snapshot.coupling_map:
            hadamards = [g for q in (control, target) for g in decompose_1q(Gate(GateKind.H, (q,)))]
            self.gates.extend(hadamards)
            self.gates.append(Gate(GateKind.CX, (target, control)))
            self.gates.extend(hadamards)
        else:
            raise TranspileError(f"physical qubits {control} and {target} are not coupled")

    def swap(self, a: int, b: int) -> None:
        self.emit_cx(a, b)
        self.emit_cx(b, a)
        self.emit_cx(a, b)
        la, lb = self.layout.index(a), self.layout.index(b)
        self.layout[la], self.layout[lb] = b, a
        self.swaps += 1

    def cx(self, control: int, target: int) -> None:
        pc, pt = self.layout[control], self.layout[target]
        if not self.graph.has_edge(pc, pt):
            try:
                path = nx.shortest_path(self.graph, pc, pt)
            except nx.NetworkXNoPath as e:
                raise TranspileError(f"physical qubits {pc} and {pt} are not connected") from e
            for u, v in zip(path[:-2], path[1:-1]):
                self.swap(u, v)
            pc = self.layout[control]
        self.emit_cx(pc, pt)


def route(circuit: Circuit, snapshot: BackendSnapshot,
          initial_layout: Optional[Sequence[int]] = None) -> TranspiledCircuit:
    """
    Map a CX-level circuit onto the coupling map.

    Before every CX whose endpoints are not adjacent, SWAPs (three CX each) move
    the control along a shortest path next to the target and the permutation is
    updated. A CX available only in the opposite direction is reversed with H
    conjugation.

    Args:
        circuit: Circuit whose two-qubit gates are all CX
        snapshot: Target backend
        initial_layout: Physical qubit of each logical qubit, identity when omitted

    Returns:
        TranspiledCircuit: Routed circuit over all physical qubits and its final layout
    """
    n, n_physical = circuit.n_qubits, snapshot.n_qubits
    if n > n_physical:
        raise TranspileError(f"circuit needs {n} qubits, backend {snapshot.name} has {n_physical}")
    start = list(range(n)) if initial_layout is None else [int(p) for p in initial_layout]
    if len(start) != n or len(set(start)) != n or any(not 0 <= p < n_physical for p in start):
        raise TranspileError(f"invalid initial layout {start}")
    start += [p for p in range(n_physical) if p not in start]

    router = _Router(snapshot, start)
    for gate in circuit.gates:
        if gate.kind == GateKind.CX:
            router.cx(*gate.qubits)
        elif len(gate.qubits) == 1:
            router.gates.append(gate.remap(dict(enumerate(router.layout))))
        else:
            raise TranspileError(f"route expects CX as the only two-qubit gate, got {gate.kind.value}")
    if router.swaps:
        logger.debug(f"Routing inserted {router.swaps} SWAPs")
    routed = Circuit(n_physical, tuple(router.gates), circuit.n_params)
    return TranspiledCircuit(routed, tuple(router.layout), n)


def _is_zero_rz(gate: Gate) -> bool:
    return (gate.kind == GateKind.RZ and gate.param_index is None
            and abs(math.remainder(gate.angle, 2 * math.pi)) < 1e-12)


def _cancel_once(gates: List[Gate]) -> Tuple[List[Gate], bool]:
    for index, gate in enumerate(gates):
        if gate.kind != GateKind.CX:
            continue
        for j in range(index + 1, len(gates)):
            if set(gates[j].qubits) & set(gate.qubits):
                if gates[j] == gate:
                    return gates[:index] + gates[index + 1:j] + gates[j + 1:], True
                break
    return gates, False


def peephole(gates: Sequence[Gate]) -> List[Gate]:
    """Drop zero-angle fixed RZ and cancel CX pairs with nothing in between on their qubits."""
    gates = [g for g in gates if not _is_zero_rz(g)]
    changed = True
    while changed:
        gates, changed = _cancel_once(gates)
    return gates


def transpile(circuit: Circuit, snapshot: BackendSnapshot,
              initial_layout: Optional[Sequence[int]] = None) -> TranspiledCircuit:
    """
    Decompose, route and clean up a circuit for a backend.

    Returns:
        TranspiledCircuit: Circuit using only the backend's basis gates, every CX
        on a coupled pair, with trainable slots kept symbolic
    """
    expanded = Circuit(circuit.n_qubits, tuple(_expand(circuit)), circuit.n_params)
    routed = route(expanded, snapshot, initial_layout)
    cleaned = Circuit(routed.circuit.n_qubits, tuple(peephole(routed.circuit.gates)), circuit.n_params)

    foreign = {g.kind for g in cleaned.gates} - snapshot.basis_gates
    if foreign:
        raise TranspileError(f"backend {snapshot.name} lacks basis gates {sorted(k.value for k in foreign)}")
    return TranspiledCircuit(cleaned, routed.layout, routed.n_logical)


def complexity(tc: TranspiledCircuit, snapshot: BackendSnapshot) -> float:
    """Sum of the backend error rates of every gate in a transpiled circuit."""
    noise = snapshot.noise_model()
    try:
        return float(sum(noise.error_rate(g) for g in tc.circuit.gates))
    except SimulationError as e:
        raise TranspileError(str(e)) from e

