"""
Dense statevector simulator.

Simulates circuits over at most a dozen qubits, samples measurement counts with
finite shots and runs noisy executions as Monte Carlo trajectories with Pauli
error injection and readout bit flips.

Bit ordering: qubit 0 is the most significant bit of a state index and the
leftmost character of a bitstring.
"""

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from logzero import logger

if TYPE_CHECKING:
    from src.circuit import Circuit

MAX_QUBITS = 12
NORM_TOLERANCE = 1e-10


class SimulationError(ValueError):
    """Raised for invalid gates, states or simulation inputs."""


class GateKind(str, Enum):
    """Gate kinds understood by the simulator, transpiler and trainer."""
    H = "H"
    X = "X"
    SX = "SX"
    ID = "ID"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CX = "CX"
    CZ = "CZ"
    CRX = "CRX"
    CRY = "CRY"
    CRZ = "CRZ"
    SWAP = "SWAP"
    RESET = "RESET"


ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
CONTROLLED_ROTATIONS = frozenset({GateKind.CRX, GateKind.CRY, GateKind.CRZ})
PARAMETRIC = ROTATIONS | CONTROLLED_ROTATIONS
TWO_QUBIT = frozenset({GateKind.CX, GateKind.CZ, GateKind.SWAP}) | CONTROLLED_ROTATIONS
SELF_INVERSE = frozenset({GateKind.H, GateKind.X, GateKind.ID, GateKind.CX, GateKind.CZ, GateKind.SWAP})


@dataclass(frozen=True)
class Gate:
    """
    One gate application.

    For parameterized gates the effective angle is
    ``param_scale * theta[param_index] + angle``; for fixed gates it is ``angle``.
    Controlled kinds list the control qubit first.
    """
    kind: GateKind
    qubits: Tuple[int, ...]
    angle: Optional[float] = None
    param_index: Optional[int] = None
    param_scale: float = 1.0

    def __post_init__(self):
        try:
            kind = GateKind(self.kind)
        except ValueError as e:
            raise SimulationError(f"unknown gate kind: {self.kind}") from e
        object.__setattr__(self, 'kind', kind)
        object.__setattr__(self, 'qubits', tuple(int(q) for q in self.qubits))

        arity = 2 if kind in TWO_QUBIT else 1
        if len(self.qubits) != arity:
            raise SimulationError(f"{kind.value} acts on {arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise SimulationError(f"{kind.value} qubit indices must be distinct: {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise SimulationError(f"negative qubit index in {self.qubits}")
        if kind in PARAMETRIC:
            if self.angle is None:
                raise SimulationError(f"{kind.value} requires an angle (offset for parameterized gates)")
            object.__setattr__(self, 'angle', float(self.angle))
        elif self.angle is not None or self.param_index is not None:
            raise SimulationError(f"{kind.value} takes no angle")
        if self.param_index is not None and self.param_index < 0:
            raise SimulationError(f"negative parameter slot {self.param_index}")

    @classmethod
    def parameterized(cls, kind: Union[GateKind, str], qubits: Sequence[int], slot: int,
                      scale: float = 1.0, offset: float = 0.0) -> 'Gate':
        """Gate whose angle is ``scale * theta[slot] + offset``."""
        return cls(GateKind(kind), tuple(qubits), angle=offset, param_index=slot, param_scale=scale)

    @property
    def is_parameterized(self) -> bool:
        return self.param_index is not None

    @property
    def is_rotation(self) -> bool:
        return self.kind in ROTATIONS

    def resolve_angle(self, params: Optional[np.ndarray] = None) -> Union[float, np.ndarray]:
        """
        Effective rotation angle.

        Args:
            params: Parameter vector, or a (batch, n_params) matrix

        Returns:
            float for fixed gates or 1-d params, an array of shape (batch,) otherwise
        """
        if self.param_index is None:
            return self.angle
        if params is None:
            raise SimulationError(f"unbound parameter slot {self.param_index} on {self.kind.value}")
        params = np.asarray(params, dtype=float)
        if params.shape[-1] <= self.param_index:
            raise SimulationError(
                f"parameter slot {self.param_index} out of range for {params.shape[-1]} bound values")
        return self.param_scale * params[..., self.param_index] + self.angle

    def bind(self, params: Sequence[float]) -> 'Gate':
        """Same gate with its angle fixed to the resolved value."""
        if self.param_index is None:
            return self
        return Gate(self.kind, self.qubits, angle=float(self.resolve_angle(np.asarray(params, dtype=float))))

    def remap(self, mapping: Mapping[int, int]) -> 'Gate':
        """Same gate on relabelled qubits."""
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.angle,
                    self.param_index, self.param_scale)

    def inverse(self) -> Tuple['Gate', ...]:
        """Gate sequence undoing this gate (fixed angles only)."""
        if self.kind == GateKind.RESET:
            raise SimulationError("RESET is not invertible")
        if self.kind in SELF_INVERSE:
            return (self,)
        if self.kind == GateKind.SX:
            return (self, self, self)
        if self.param_index is not None:
            return (Gate(self.kind, self.qubits, -self.angle, self.param_index, -self.param_scale),)
        return (Gate(self.kind, self.qubits, angle=-self.angle),)

    def to_dict(self) -> Dict:
        """JSON-ready description: kind, qubits and angle or slot."""
        document = {"kind": self.kind.value, "qubits": list(self.qubits)}
        if self.param_index is not None:
            document["slot"] = self.param_index
            if self.param_scale != 1.0:
                document["scale"] = self.param_scale
            if self.angle:
                document["offset"] = self.angle
        elif self.angle is not None:
            document["angle"] = self.angle
        return document

    @classmethod
    def from_dict(cls, document: Mapping) -> 'Gate':
        kind = GateKind(document["kind"])
        qubits = tuple(document["qubits"])
        if "slot" in document:
            return cls.parameterized(kind, qubits, int(document["slot"]),
                                     float(document.get("scale", 1.0)), float(document.get("offset", 0.0)))
        return cls(kind, qubits, angle=document.get("angle"))


@dataclass(frozen=True, eq=False)
class Statevector:
    """Normalized complex amplitude vector of an n-qubit pure state."""
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SimulationError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amplitudes.shape[0] != 2 ** self.n_qubits:
            raise SimulationError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amplitudes.shape[0]}")
        norm = float(np.vdot(amplitudes, amplitudes).real)
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise SimulationError(f"state is not normalized (|psi|^2 = {norm})")
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def zero(cls, n_qubits: int) -> 'Statevector':
        """The |0...0> state."""
        amplitudes = np.zeros(2 ** n_qubits, dtype=np.complex128)
        amplitudes[0] = 1.0
        return cls(amplitudes, n_qubits)

    @classmethod
    def from_bitstring(cls, bits: str) -> 'Statevector':
        """Computational basis state, qubit 0 leftmost."""
        amplitudes = np.zeros(2 ** len(bits), dtype=np.complex128)
        amplitudes[int(bits, 2)] = 1.0
        return cls(amplitudes, len(bits))

    def probabilities(self) -> np.ndarray:
        return _probabilities(self.amplitudes[None, :])[0]

    def fidelity(self, other: 'Statevector') -> float:
        """|<self|other>|, insensitive to global phase."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)))


@dataclass(frozen=True)
class CountsMap:
    """Measurement outcome histogram keyed by bitstring (qubit 0 leftmost)."""
    counts: Dict[str, int]
    n_qubits: int
    total_shots: int

    def __post_init__(self):
        if self.total_shots < 1:
            raise SimulationError("total_shots must be positive")
        if any(len(bits) != self.n_qubits for bits in self.counts):
            raise SimulationError(f"every bitstring must have length {self.n_qubits}")
        if sum(self.counts.values()) != self.total_shots:
            raise SimulationError("counts do not sum to total_shots")

    @classmethod
    def from_index_counts(cls, index_counts: np.ndarray, n_qubits: int) -> 'CountsMap':
        """Build from a dense array of counts indexed by basis-state integer."""
        counts = {format(i, f'0{n_qubits}b'): int(c) for i, c in enumerate(index_counts) if c}
        return cls(counts, n_qubits, int(np.sum(index_counts)))

    def to_index_counts(self) -> np.ndarray:
        dense = np.zeros(2 ** self.n_qubits, dtype=np.int64)
        for bits, count in self.counts.items():
            dense[int(bits, 2)] = count
        return dense

    def get(self, bits: str) -> int:
        return self.counts.get(bits, 0)


@dataclass(frozen=True)
class NoiseModel:
    """
    Per-gate error probabilities and per-qubit readout errors.

    Gate errors are keyed by (kind, physical qubit tuple); ID and RESET
    default to an error of 0 when absent.
    """
    gate_errors: Dict[Tuple[GateKind, Tuple[int, ...]], float]
    readout_errors: Tuple[float, ...]
    n_qubits: int
    default_rate: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'readout_errors', tuple(float(p) for p in self.readout_errors))
        if len(self.readout_errors) != self.n_qubits:
            raise SimulationError("readout_errors must list one probability per qubit")
        rates = list(self.gate_errors.values()) + list(self.readout_errors)
        if self.default_rate is not None:
            rates.append(self.default_rate)
        if any(not 0.0 <= p <= 1.0 for p in rates):
            raise SimulationError("error probabilities must lie in [0, 1]")

    @classmethod
    def from_backend(cls, snapshot) -> 'NoiseModel':
        """Noise model carrying a backend snapshot's error rates."""
        return cls(dict(snapshot.gate_errors), tuple(snapshot.readout_errors), snapshot.n_qubits)

    def error_rate(self, gate: Gate) -> float:
        key = (gate.kind, gate.qubits)
        if key in self.gate_errors:
            return self.gate_errors[key]
        if self.default_rate is not None:
            return self.default_rate
        if gate.kind in (GateKind.ID, GateKind.RESET):
            return 0.0
        raise SimulationError(f"no error rate for {gate.kind.value} on qubits {gate.qubits}")


def uniform_noise(rate: float, readout: float, n_qubits: int) -> NoiseModel:
    """Noise model with one error rate for every gate and one readout error for every qubit."""
    return NoiseModel({}, tuple([readout] * n_qubits), n_qubits, default_rate=rate)


# Gate matrices

_I2 = np.eye(2, dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
PAULIS = np.stack([_I2, _X, _Y, _Z])

_FIXED = {
    GateKind.H: _H, GateKind.X: _X, GateKind.SX: _SX, GateKind.ID: _I2,
    GateKind.CX: _CX, GateKind.CZ: _CZ, GateKind.SWAP: _SWAP,
}


def rotation_matrix(kind: GateKind, theta: Union[float, np.ndarray]) -> np.ndarray:
    """
    2x2 rotation matrix (or a stack of them for an array of angles).

    RZ(theta) = diag(exp(-i theta/2), exp(i theta/2)).
    """
    theta = np.asarray(theta, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    m = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    if kind in (GateKind.RX, GateKind.CRX):
        m[..., 0, 0] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
        m[..., 1, 1] = c
    elif kind in (GateKind.RY, GateKind.CRY):
        m[..., 0, 0] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
        m[..., 1, 1] = c
    elif kind in (GateKind.RZ, GateKind.CRZ):
        m[..., 0, 0] = np.exp(-0.5j * theta)
        m[..., 1, 1] = np.exp(0.5j * theta)
    else:
        raise SimulationError(f"{kind.value} is not a rotation")
    return m


def gate_matrix(gate: Gate, params: Optional[np.ndarray] = None) -> np.ndarray:
    """Unitary of a gate: (2,2) / (4,4), or stacked (batch, d, d) for batched params."""
    if gate.kind == GateKind.RESET:
        raise SimulationError("RESET is not unitary")
    if gate.kind in _FIXED:
        return _FIXED[gate.kind]
    rotation = rotation_matrix(gate.kind, gate.resolve_angle(params))
    if gate.kind in ROTATIONS:
        return rotation
    controlled = np.zeros(rotation.shape[:-2] + (4, 4), dtype=np.complex128)
    controlled[..., 0, 0] = 1.0
    controlled[..., 1, 1] = 1.0
    controlled[..., 2:, 2:] = rotation
    return controlled


# Kernels over a batch of states with shape (batch, 2**n)

def _apply_matrix(states: np.ndarray, matrix: np.ndarray, qubits: Tuple[int, ...], n_qubits: int) -> np.ndarray:
    batch = states.shape[0]
    if len(qubits) == 1:
        q = qubits[0]
        psi = states.reshape(batch, 2 ** q, 2, 2 ** (n_qubits - q - 1))
        if matrix.ndim == 2:
            out = np.einsum('ij,bajc->baic', matrix, psi)
        else:
            out = np.einsum('bij,bajc->baic', matrix, psi)
        return out.reshape(batch, -1)

    a, b = qubits
    psi = states.reshape((batch,) + (2,) * n_qubits)
    psi = np.moveaxis(psi, (1 + a, 1 + b), (1, 2))
    moved_shape = psi.shape
    psi = psi.reshape(batch, 4, -1)
    if matrix.ndim == 2:
        out = np.einsum('ij,bjr->bir', matrix, psi)
    else:
        out = np.einsum('bij,bjr->bir', matrix, psi)
    out = np.moveaxis(out.reshape(moved_shape), (1, 2), (1 + a, 1 + b))
    return out.reshape(batch, -1)


def _apply_reset(states: np.ndarray, qubit: int, n_qubits: int,
                 rng: Optional[np.random.Generator]) -> np.ndarray:
    # Measure the qubit, then flip it back to |0> when the outcome was 1.
    batch = states.shape[0]
    psi = states.reshape(batch, 2 ** qubit, 2, 2 ** (n_qubits - qubit - 1)).copy()
    p1 = np.sum(np.abs(psi[:, :, 1, :]) ** 2, axis=(1, 2))
    if rng is None:
        outcome_one = p1 > 0.5
    else:
        outcome_one = rng.random(batch) < p1
    kept = np.where(outcome_one[:, None, None], psi[:, :, 1, :], psi[:, :, 0, :])
    norms = np.sqrt(np.sum(np.abs(kept) ** 2, axis=(1, 2)))
    out = np.zeros_like(psi)
    out[:, :, 0, :] = kept / norms[:, None, None]
    return out.reshape(batch, -1)


def _check_qubits(gate: Gate, n_qubits: int) -> None:
    if any(q >= n_qubits for q in gate.qubits):
        raise SimulationError(f"{gate.kind.value} on {gate.qubits} exceeds {n_qubits} qubits")


def _apply_batch(states: np.ndarray, gate: Gate, n_qubits: int, params: Optional[np.ndarray] = None,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    if gate.kind == GateKind.RESET:
        return _apply_reset(states, gate.qubits[0], n_qubits, rng)
    return _apply_matrix(states, gate_matrix(gate, params), gate.qubits, n_qubits)


def _probabilities(states: np.ndarray) -> np.ndarray:
    probs = np.abs(states) ** 2
    return probs / probs.sum(axis=-1, keepdims=True)


# Public operations

def apply_gate(state: Statevector, gate: Gate, params: Optional[Sequence[float]] = None,
               rng: Optional[np.random.Generator] = None) -> Statevector:
    """
    Apply one gate to a state.

    Args:
        state: Input state
        gate: Gate to apply; parameterized gates need ``params``
        params: Bound parameter vector
        rng: Generator for the RESET measurement; without one, RESET follows
            the more probable branch

    Returns:
        Statevector: New state
    """
    _check_qubits(gate, state.n_qubits)
    bound = None if params is None else np.asarray(params, dtype=float)
    out = _apply_batch(state.amplitudes[None, :], gate, state.n_qubits, bound, rng)
    return Statevector(out[0], state.n_qubits)


def _validate_params(circuit: 'Circuit', params: np.ndarray) -> None:
    if params.shape[-1] != circuit.n_params:
        raise SimulationError(
            f"circuit has {circuit.n_params} parameter slots, got {params.shape[-1]} bound values")


def run_statevector_batch(circuit: 'Circuit', params: np.ndarray,
                          states: Optional[np.ndarray] = None,
                          rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Run a circuit on a batch of parameter bindings.

    Args:
        circuit: Circuit to run
        params: (batch, n_params) matrix of bound values
        states: (batch, 2**n) input amplitudes, |0...0> when omitted

    Returns:
        np.ndarray: (batch, 2**n) output amplitudes
    """
    params = np.atleast_2d(np.asarray(params, dtype=float))
    _validate_params(circuit, params)
    n = circuit.n_qubits
    if states is None:
        states = np.zeros((params.shape[0], 2 ** n), dtype=np.complex128)
        states[:, 0] = 1.0
    else:
        states = np.asarray(states, dtype=np.complex128).reshape(-1, 2 ** n)
        if params.shape[0] == 1 and states.shape[0] > 1:
            params = np.broadcast_to(params, (states.shape[0], params.shape[1]))
    for gate in circuit.gates:
        _check_qubits(gate, n)
        states = _apply_batch(states, gate, n, params, rng)
    return states


def run_statevector(circuit: 'Circuit', bound_params: Sequence[float] = (),
                    input_state: Optional[Statevector] = None) -> Statevector:
    """
    Apply a circuit's gates in order to an input state.

    Args:
        circuit: Circuit to run
        bound_params: One value per parameter slot
        input_state: Initial state, |0...0> when omitted

    Returns:
        Statevector: Output state
    """
    params = np.asarray(bound_params, dtype=float).reshape(1, -1)
    initial = None
    if input_state is not None:
        if input_state.n_qubits != circuit.n_qubits:
            raise SimulationError(
                f"input state has {input_state.n_qubits} qubits, circuit has {circuit.n_qubits}")
        initial = input_state.amplitudes[None, :]
    out = run_statevector_batch(circuit, params, initial)
    return Statevector(out[0], circuit.n_qubits)


def sample_index_counts(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial sample of ``shots`` outcomes from one probability vector."""
    return rng.multinomial(shots, probs)


def sample_counts(state: Statevector, shots: int, seed: int) -> CountsMap:
    """
    Sample Z-basis measurement outcomes of every qubit.

    Args:
        state: State to measure
        shots: Number of shots (>= 1)
        seed: Seed; identical seeds give identical counts

    Returns:
        CountsMap: Outcome histogram
    """
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    counts = sample_index_counts(state.probabilities(), shots, np.random.default_rng(seed))
    return CountsMap.from_index_counts(counts, state.n_qubits)


def _flip_masks(n_qubits: int) -> np.ndarray:
    return np.array([1 << (n_qubits - 1 - q) for q in range(n_qubits)], dtype=np.int64)


def noisy_index_counts(circuit: 'Circuit', params: np.ndarray, noise: NoiseModel,
                       shots: int, seed: int) -> np.ndarray:
    """
    Trajectory simulation of one parameter binding, as dense index counts.

    Shots whose trajectory draws no gate error share the ideal output state and
    are sampled from it in one multinomial draw; the remaining shots are evolved
    individually with their injected Paulis. Measurement, error events and
    readout flips use three independent streams derived from ``seed``.
    """
    if shots < 1:
        raise SimulationError("shots must be >= 1")
    n = circuit.n_qubits
    if noise.n_qubits < n:
        raise SimulationError(f"noise model covers {noise.n_qubits} qubits, circuit needs {n}")
    params = np.asarray(params, dtype=float).reshape(-1)
    _validate_params(circuit, params)
    gates = circuit.gates
    rates = np.array([noise.error_rate(g) for g in gates], dtype=float)

    measure_rng = np.random.default_rng(seed)
    noise_rng = np.random.default_rng([seed, 1])
    readout_rng = np.random.default_rng([seed, 2])

    events = noise_rng.random((shots, len(gates))) < rates[None, :]
    has_reset = any(g.kind == GateKind.RESET for g in gates)
    faulty = np.ones(shots, bool) if has_reset else events.any(axis=1)
    n_clean = int(shots - faulty.sum())

    outcomes = []
    if n_clean:
        ideal = run_statevector_batch(circuit, params[None, :])
        clean_counts = sample_index_counts(_probabilities(ideal)[0], n_clean, measure_rng)
        outcomes.append(np.repeat(np.arange(2 ** n), clean_counts))

    rows = np.flatnonzero(faulty)
    if rows.size:
        fault_events = events[rows]
        states = np.zeros((rows.size, 2 ** n), dtype=np.complex128)
        states[:, 0] = 1.0
        for k, gate in enumerate(gates):
            _check_qubits(gate, n)
            states = _apply_batch(states, gate, n, params, measure_rng)
            hit = np.flatnonzero(fault_events[:, k])
            if hit.size == 0:
                continue
            for q in gate.qubits:
                paulis = PAULIS[noise_rng.integers(1, 4, size=hit.size)]
                states[hit] = _apply_matrix(states[hit], paulis, (q,), n)
        cumulative = np.cumsum(_probabilities(states), axis=1)
        draws = measure_rng.random(rows.size)
        sampled = np.minimum((cumulative < draws[:, None]).sum(axis=1), 2 ** n - 1)
        outcomes.append(sampled)
        logger.debug(f"{rows.size}/{shots} shots took the faulty trajectory path")

    per_shot = np.concatenate(outcomes).astype(np.int64)
    readout = np.asarray(noise.readout_errors[:n], dtype=float)
    flips = readout_rng.random((shots, n)) < readout[None, :]
    per_shot ^= (flips * _flip_masks(n)[None, :]).sum(axis=1)
    return np.bincount(per_shot, minlength=2 ** n)


def run_noisy(circuit: 'Circuit', bound_params: Sequence[float], noise: NoiseModel,
              shots: int, seed: int) -> CountsMap:
    """
    Sample a circuit under stochastic Pauli noise and readout errors.

    After each gate, with probability equal to that gate's error rate, a uniformly
    random non-identity Pauli is applied to each involved qubit; the measured bit
    of qubit q then flips with probability ``readout_errors[q]``. The circuit is
    expected to be transpiled to the noise model's gate table already.

    Args:
        circuit: Basis-gate circuit
        bound_params: One value per parameter slot
        noise: Error rates
        shots: Number of trajectories
        seed: Seed; identical seeds give identical counts

    Returns:
        CountsMap: Outcome histogram over the circuit's qubits
    """
    counts = noisy_index_counts(circuit, np.asarray(bound_params, dtype=float), noise, shots, seed)
    return CountsMap.from_index_counts(counts, circuit.n_qubits)
