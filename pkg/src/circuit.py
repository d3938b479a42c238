"""
Circuit IR and builders.

Holds the circuit container shared by the simulator, transpiler and trainer, the
ZZ feature map, the searchable ansatz genome (entanglement mask plus gate grid)
with its post-processing rules, the baseline templates and search-space
accounting.
"""

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from logzero import logger

from src.qsim import CONTROLLED_ROTATIONS, ROTATIONS, TWO_QUBIT, Gate, GateKind

CIRCUIT_FORMAT = 1


class CircuitError(ValueError):
    """Raised for malformed circuits, genomes or builder options."""


@dataclass(frozen=True)
class Circuit:
    """Ordered gate sequence over ``n_qubits`` with ``n_params`` trainable slots."""
    n_qubits: int
    gates: Tuple[Gate, ...] = ()
    n_params: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'gates', tuple(self.gates))
        if self.n_qubits < 1:
            raise CircuitError("n_qubits must be positive")
        for gate in self.gates:
            if any(q >= self.n_qubits for q in gate.qubits):
                raise CircuitError(f"{gate.kind.value} on {gate.qubits} exceeds {self.n_qubits} qubits")
        slots = {g.param_index for g in self.gates if g.param_index is not None}
        if slots != set(range(self.n_params)):
            raise CircuitError(f"parameter slots {sorted(slots)} are not the contiguous range 0..{self.n_params - 1}")

    def compose(self, other: 'Circuit') -> 'Circuit':
        """Append ``other``; its slots are shifted after this circuit's slots."""
        if other.n_qubits != self.n_qubits:
            raise CircuitError(f"cannot compose {self.n_qubits}-qubit and {other.n_qubits}-qubit circuits")
        shifted = tuple(
            g if g.param_index is None else
            Gate(g.kind, g.qubits, g.angle, g.param_index + self.n_params, g.param_scale)
            for g in other.gates
        )
        return Circuit(self.n_qubits, self.gates + shifted, self.n_params + other.n_params)

    def bind(self, params: Sequence[float]) -> 'Circuit':
        """Circuit with every slot replaced by its bound angle."""
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise CircuitError(f"expected {self.n_params} values, got shape {params.shape}")
        return Circuit(self.n_qubits, tuple(g.bind(params) for g in self.gates), 0)

    def count_ops(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for gate in self.gates:
            counts[gate.kind.value] = counts.get(gate.kind.value, 0) + 1
        return counts

    @property
    def two_qubit_count(self) -> int:
        return sum(1 for g in self.gates if g.kind in TWO_QUBIT)

    def depth(self) -> int:
        """Number of layers when every gate starts right after its qubits are free."""
        level = [0] * self.n_qubits
        for gate in self.gates:
            start = max(level[q] for q in gate.qubits) + 1
            for q in gate.qubits:
                level[q] = start
        return max(level, default=0)

    def stats(self) -> Dict[str, int]:
        return {
            "gates": len(self.gates),
            "two_qubit_gates": self.two_qubit_count,
            "depth": self.depth(),
            "params": self.n_params,
        }

    def to_document(self, **extra: Any) -> Dict[str, Any]:
        """JSON-ready document (format 1)."""
        document = {
            "format": CIRCUIT_FORMAT,
            "n_qubits": self.n_qubits,
            "n_params": self.n_params,
            "gates": [g.to_dict() for g in self.gates],
            "stats": self.stats(),
        }
        document.update(extra)
        return document

    def to_json(self, **extra: Any) -> str:
        return json.dumps(self.to_document(**extra), indent=2)

    @classmethod
    def from_document(cls, document: Mapping[str, Any]) -> 'Circuit':
        if document.get("format") != CIRCUIT_FORMAT:
            raise CircuitError(f"unsupported circuit format: {document.get('format')}")
        gates = tuple(Gate.from_dict(g) for g in document["gates"])
        return cls(int(document["n_qubits"]), gates, int(document["n_params"]))


@dataclass(frozen=True)
class DesignParams:
    """Fixed design choices: wire count and parameterized positions per wire."""
    n_qubits: int = 4
    n_gates: int = 5

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_gates < 1:
            raise CircuitError("n_qubits and n_gates must both be >= 1")


@dataclass(frozen=True)
class GateChoice:
    """
    One cell of the gate grid: no gate, a simple rotation, or a controlled
    rotation whose control is the cell's wire and whose target is ``target``.
    """
    kind: Optional[GateKind] = None
    target: Optional[int] = None

    def __post_init__(self):
        if self.kind is not None:
            object.__setattr__(self, 'kind', GateKind(self.kind))
        if self.kind in CONTROLLED_ROTATIONS:
            if self.target is None:
                raise CircuitError(f"{self.kind.value} choice needs a target qubit")
        elif self.kind is None or self.kind in ROTATIONS:
            if self.target is not None:
                raise CircuitError("only controlled choices carry a target")
        else:
            raise CircuitError(f"{self.kind.value} is not a grid choice")

    @property
    def label(self) -> str:
        if self.kind is None:
            return "None"
        if self.target is None:
            return self.kind.value
        return f"{self.kind.value}({self.target})"

    @classmethod
    def parse(cls, label: str) -> 'GateChoice':
        if label == "None":
            return cls()
        if "(" in label:
            kind, target = label.rstrip(")").split("(")
            return cls(GateKind(kind), int(target))
        return cls(GateKind(label))

    def __str__(self) -> str:
        return self.label


NO_GATE = GateChoice()


def gate_choices(n_qubits: int, qubit: int) -> List[GateChoice]:
    """Every choice available on one wire: 1 + 3 + 3 * (n_qubits - 1) values."""
    choices = [NO_GATE] + [GateChoice(k) for k in (GateKind.RX, GateKind.RY, GateKind.RZ)]
    for kind in (GateKind.CRX, GateKind.CRY, GateKind.CRZ):
        choices.extend(GateChoice(kind, j) for j in range(n_qubits) if j != qubit)
    return choices


@dataclass(frozen=True)
class AnsatzGenome:
    """Searchable ansatz encoding: binary entanglement mask and categorical gate grid."""
    entanglement: Tuple[Tuple[int, ...], ...]
    grid: Tuple[Tuple[GateChoice, ...], ...]

    def __post_init__(self):
        entanglement = tuple(tuple(int(v) for v in row) for row in self.entanglement)
        grid = tuple(tuple(c if isinstance(c, GateChoice) else GateChoice.parse(str(c)) for c in row)
                     for row in self.grid)
        object.__setattr__(self, 'entanglement', entanglement)
        object.__setattr__(self, 'grid', grid)

        n = len(grid)
        if n < 1 or any(len(row) != len(grid[0]) for row in grid) or len(grid[0]) < 1:
            raise CircuitError("gate grid must be a non-empty n_qubits x n_gates matrix")
        if len(entanglement) != n or any(len(row) != n for row in entanglement):
            raise CircuitError(f"entanglement matrix must be {n} x {n}")
        for i, row in enumerate(entanglement):
            if row[i] != 0:
                raise CircuitError("entanglement diagonal must be zero")
            if any(v not in (0, 1) for v in row):
                raise CircuitError("entanglement entries must be 0 or 1")
        for i, row in enumerate(grid):
            for choice in row:
                if choice.target is not None and (choice.target == i or not 0 <= choice.target < n):
                    raise CircuitError(f"invalid target {choice.target} for a controlled choice on wire {i}")

    @property
    def n_qubits(self) -> int:
        return len(self.grid)

    @property
    def n_gates(self) -> int:
        return len(self.grid[0])

    @classmethod
    def empty(cls, design: DesignParams) -> 'AnsatzGenome':
        n, g = design.n_qubits, design.n_gates
        return cls(tuple((0,) * n for _ in range(n)), tuple((NO_GATE,) * g for _ in range(n)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entanglement": [list(row) for row in self.entanglement],
            "grid": [[c.label for c in row] for row in self.grid],
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> 'AnsatzGenome':
        return cls(
            tuple(tuple(row) for row in document["entanglement"]),
            tuple(tuple(GateChoice.parse(c) for c in row) for row in document["grid"]),
        )


class ZZFeatureMap:
    """
    Second-order Pauli-Z feature map with one repetition.

    H on every qubit, RZ(2 x_i) on qubit i, then for every pair i < j:
    CX(i, j), RZ(2 (pi - x_i)(pi - x_j)) on j, CX(i, j).

    The template circuit exposes every encoding angle as a slot, so one compiled
    structure serves all samples; ``angles`` computes the slot values.
    """

    def __init__(self, n_qubits: int):
        if n_qubits < 1:
            raise CircuitError("feature map needs at least one qubit")
        self.n_qubits = n_qubits
        self.pairs = list(combinations(range(n_qubits), 2))
        gates: List[Gate] = [Gate(GateKind.H, (q,)) for q in range(n_qubits)]
        gates += [Gate.parameterized(GateKind.RZ, (q,), q) for q in range(n_qubits)]
        for slot, (i, j) in enumerate(self.pairs, start=n_qubits):
            gates += [
                Gate(GateKind.CX, (i, j)),
                Gate.parameterized(GateKind.RZ, (j,), slot),
                Gate(GateKind.CX, (i, j)),
            ]
        self.template = Circuit(n_qubits, tuple(gates), n_qubits + len(self.pairs))

    def angles(self, features: np.ndarray) -> np.ndarray:
        """Slot values for a (batch, n_qubits) feature matrix (or one feature vector)."""
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if x.shape[1] != self.n_qubits:
            raise CircuitError(f"expected {self.n_qubits} features, got {x.shape[1]}")
        single = 2.0 * x
        pair = [2.0 * (np.pi - x[:, i]) * (np.pi - x[:, j]) for i, j in self.pairs]
        return np.column_stack([single] + pair) if pair else single

    def bind(self, features: Sequence[float]) -> Circuit:
        return self.template.bind(self.angles(features)[0])


class TrivialFeatureMap:
    """Encoder without gates; leaves the register in |0...0>."""

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.template = Circuit(n_qubits, (), 0)

    def angles(self, features: np.ndarray) -> np.ndarray:
        return np.zeros((np.atleast_2d(features).shape[0], 0))

    def bind(self, features: Sequence[float]) -> Circuit:
        return self.template


def zz_feature_map(x: Sequence[float], n_qubits: Optional[int] = None) -> Circuit:
    """
    ZZ feature map bound to one feature vector; no trainable slots.

    Args:
        x: Scaled features, one per qubit
        n_qubits: Expected register size; defaults to ``len(x)``
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if n_qubits is not None and x.shape[0] != n_qubits:
        raise CircuitError(f"feature length {x.shape[0]} does not match {n_qubits} qubits")
    return ZZFeatureMap(x.shape[0]).bind(x)


def build_ansatz(genome: AnsatzGenome) -> Circuit:
    """
    Emit the circuit a genome describes.

    The entanglement block comes first: H on i then CX(i, j) for each set entry,
    row-major. The parameterized block follows column by column, and within a
    column by wire: simple rotations act on the wire, controlled rotations use the
    wire as control. Every emitted rotation gets a fresh slot.
    """
    n = genome.n_qubits
    gates: List[Gate] = []
    for i in range(n):
        for j in range(n):
            if genome.entanglement[i][j]:
                gates += [Gate(GateKind.H, (i,)), Gate(GateKind.CX, (i, j))]

    slot = 0
    for k in range(genome.n_gates):
        for i in range(n):
            choice = genome.grid[i][k]
            if choice.kind is None:
                continue
            qubits = (i,) if choice.target is None else (i, choice.target)
            gates.append(Gate.parameterized(choice.kind, qubits, slot))
            slot += 1
    return Circuit(n, tuple(gates), slot)


def _next_touching(gates: Sequence[Gate], index: int, qubits: Tuple[int, ...]) -> Optional[int]:
    for j in range(index + 1, len(gates)):
        if set(gates[j].qubits) & set(qubits):
            return j
    return None


def _merge(first: Gate, second: Gate, slot_uses: Mapping[int, int]) -> Optional[Gate]:
    """Single gate equal to ``second`` after ``first`` (same kind, same qubits), if expressible."""
    if first.param_index is None and second.param_index is None:
        return Gate(first.kind, first.qubits, angle=first.angle + second.angle)
    if first.param_index is not None and second.param_index is not None:
        if first.param_scale != 1.0 or second.param_scale != 1.0 or slot_uses[second.param_index] != 1:
            return None
        return Gate.parameterized(first.kind, first.qubits, first.param_index, 1.0, first.angle + second.angle)
    bound, fixed = (first, second) if first.param_index is not None else (second, first)
    return Gate(bound.kind, bound.qubits, bound.angle + fixed.angle, bound.param_index, bound.param_scale)


def _merge_repeated(gates: List[Gate]) -> Tuple[List[Gate], bool]:
    slot_uses: Dict[int, int] = {}
    for g in gates:
        if g.param_index is not None:
            slot_uses[g.param_index] = slot_uses.get(g.param_index, 0) + 1

    for index, gate in enumerate(gates):
        if gate.kind not in ROTATIONS and gate.kind not in CONTROLLED_ROTATIONS:
            continue
        nxt = _next_touching(gates, index, gate.qubits)
        if nxt is None or gates[nxt].kind != gate.kind or gates[nxt].qubits != gate.qubits:
            continue
        merged = _merge(gate, gates[nxt], slot_uses)
        if merged is None:
            continue
        return gates[:index] + [merged] + gates[index + 1:nxt] + gates[nxt + 1:], True
    return gates, False


def _drop_trailing_rz(gates: List[Gate], n_qubits: int) -> Tuple[List[Gate], bool]:
    last: Dict[int, int] = {}
    for index, gate in enumerate(gates):
        for q in gate.qubits:
            last[q] = index
    doomed = {index for index in last.values() if gates[index].kind == GateKind.RZ}
    if not doomed:
        return gates, False
    return [g for index, g in enumerate(gates) if index not in doomed], True


def postprocess_with_map(circuit: Circuit) -> Tuple[Circuit, Dict[int, int]]:
    """
    Apply the post-processing rules and report where surviving slots went.

    Returns:
        Tuple[Circuit, Dict[int, int]]: Processed circuit and a map from each
        surviving original slot to its new slot. Slots absent from the map were
        merged into a neighbour or removed with a trailing RZ.
    """
    gates = list(circuit.gates)
    changed = True
    while changed:
        gates, merged = _merge_repeated(gates)
        gates, dropped = _drop_trailing_rz(gates, circuit.n_qubits)
        changed = merged or dropped

    mapping: Dict[int, int] = {}
    for gate in gates:
        if gate.param_index is not None and gate.param_index not in mapping:
            mapping[gate.param_index] = len(mapping)
    reindexed = tuple(
        g if g.param_index is None else
        Gate(g.kind, g.qubits, g.angle, mapping[g.param_index], g.param_scale)
        for g in gates
    )
    processed = Circuit(circuit.n_qubits, reindexed, len(mapping))
    if len(processed.gates) < len(circuit.gates):
        logger.debug(f"Post-processing removed {len(circuit.gates) - len(processed.gates)} gates")
    return processed, mapping


def postprocess(circuit: Circuit) -> Circuit:
    """
    Remove redundant gates before Z-basis measurement, iterated to a fixpoint.

    Rule 1 merges consecutive rotations of the same kind on the same qubit when no
    other gate touches that qubit in between; controlled rotations on the same
    (control, target) merge when nothing touches either qubit in between.
    Rule 2 drops any RZ that is the last gate on its qubit, since it only changes
    phases. Slots are re-indexed contiguously.
    """
    return postprocess_with_map(circuit)[0]


TEMPLATES = ("RealAmplitudes", "EfficientSU2", "PauliTwoDesign")
ENTANGLEMENTS = ("linear", "reverse_linear", "circular", "full")


def entangler_pairs(n_qubits: int, entanglement: str) -> List[Tuple[int, int]]:
    """CX (control, target) pairs of one entanglement layer."""
    linear = [(i, i + 1) for i in range(n_qubits - 1)]
    if entanglement == "linear":
        return linear
    if entanglement == "reverse_linear":
        return list(reversed(linear))
    if entanglement == "circular":
        return ([(n_qubits - 1, 0)] if n_qubits > 2 else []) + linear
    if entanglement == "full":
        return list(combinations(range(n_qubits), 2))
    raise CircuitError(f"unknown entanglement option: {entanglement}")


@dataclass
class _LayerBuilder:
    n_qubits: int
    gates: List[Gate] = field(default_factory=list)
    n_params: int = 0

    def rotations(self, kinds: Sequence[GateKind]) -> None:
        for q, kind in enumerate(kinds):
            self.gates.append(Gate.parameterized(kind, (q,), self.n_params))
            self.n_params += 1

    def circuit(self) -> Circuit:
        return Circuit(self.n_qubits, tuple(self.gates), self.n_params)


def template(name: str, reps: int, entanglement: Optional[str] = None, seed: int = 0,
             n_qubits: int = 4) -> Circuit:
    """
    Build a baseline ansatz template.

    Args:
        name: RealAmplitudes, EfficientSU2 or PauliTwoDesign
        reps: Number of entangling repetitions (>= 1)
        entanglement: linear, reverse_linear, circular or full; PauliTwoDesign
            only accepts builtin (or None)
        seed: Seed of PauliTwoDesign's random rotation axes
        n_qubits: Register size

    Returns:
        Circuit: Template with (reps + 1) rotation layers
    """
    if reps < 1:
        raise CircuitError("reps must be >= 1")
    builder = _LayerBuilder(n_qubits)

    if name == "PauliTwoDesign":
        if entanglement not in (None, "builtin"):
            raise CircuitError("PauliTwoDesign has a builtin entanglement scheme")
        rng = np.random.default_rng(seed)
        axes = (GateKind.RX, GateKind.RY, GateKind.RZ)
        builder.gates += [Gate(GateKind.RY, (q,), angle=np.pi / 4) for q in range(n_qubits)]
        cz_pairs = [(i, i + 1) for i in range(0, n_qubits - 1, 2)] + [(i, i + 1) for i in range(1, n_qubits - 1, 2)]
        for _ in range(reps):
            builder.rotations([axes[a] for a in rng.integers(0, 3, size=n_qubits)])
            builder.gates += [Gate(GateKind.CZ, pair) for pair in cz_pairs]
        builder.rotations([axes[a] for a in rng.integers(0, 3, size=n_qubits)])
        return builder.circuit()

    if name == "RealAmplitudes":
        layer = [GateKind.RY]
    elif name == "EfficientSU2":
        layer = [GateKind.RY, GateKind.RZ]
    else:
        raise CircuitError(f"unknown template: {name}")
    if entanglement in (None, "builtin"):
        raise CircuitError(f"{name} needs one of {', '.join(ENTANGLEMENTS)}")
    pairs = entangler_pairs(n_qubits, entanglement)

    for kind in layer:
        builder.rotations([kind] * n_qubits)
    for _ in range(reps):
        builder.gates += [Gate(GateKind.CX, pair) for pair in pairs]
        for kind in layer:
            builder.rotations([kind] * n_qubits)
    return builder.circuit()


def search_space_size(design: DesignParams) -> int:
    """Number of distinct genomes: 2^(n(n-1)) * (3(n-1) + 4)^(n * n_gates)."""
    n, g = design.n_qubits, design.n_gates
    return 2 ** (n * (n - 1)) * (3 * (n - 1) + 4) ** (n * g)
