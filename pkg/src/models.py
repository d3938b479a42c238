"""
Pydantic models for documents read from or written to disk.
"""
import math
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

BASIS_GATE_NAMES = ("ID", "RZ", "SX", "X", "CX", "RESET")
TWO_QUBIT_BASIS = ("CX",)


class GateErrorEntry(BaseModel):
    """Error probability of one basis gate on specific physical qubits."""
    gate: str = Field(..., description="Basis gate name, e.g. CX")
    qubits: List[int] = Field(..., description="Physical qubits the gate acts on")
    error: float = Field(..., ge=0.0, le=1.0, description="Error probability")


class BackendSnapshotDocument(BaseModel):
    """Backend snapshot file: coupling map, basis gates and error rates."""
    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "format": 1,
                "name": "manila",
                "n_qubits": 2,
                "coupling_map": [[0, 1], [1, 0]],
                "basis_gates": ["ID", "RZ", "SX", "X", "CX", "RESET"],
                "gate_errors": [{"gate": "CX", "qubits": [0, 1], "error": 0.0095}],
                "readout_errors": [0.03, 0.02],
            }
        }
    )

    format: Literal[1] = Field(1, description="Schema version")
    name: str = Field(..., description="Backend name")
    n_qubits: int = Field(..., gt=0, description="Number of physical qubits")
    coupling_map: List[Tuple[int, int]] = Field(default_factory=list, description="Directed CX pairs")
    basis_gates: List[str] = Field(..., description="Native gate names")
    gate_errors: List[GateErrorEntry] = Field(default_factory=list, description="Per-gate error rates")
    readout_errors: List[float] = Field(..., description="Per-qubit readout error probabilities")

    @model_validator(mode='after')
    def check_consistency(self) -> 'BackendSnapshotDocument':
        self.basis_gates = [g.upper() for g in self.basis_gates]
        unknown = set(self.basis_gates) - set(BASIS_GATE_NAMES)
        if unknown:
            raise ValueError(f"unsupported basis gates: {sorted(unknown)}")
        for a, b in self.coupling_map:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"invalid coupling pair ({a}, {b})")
        if len(self.readout_errors) != self.n_qubits:
            raise ValueError("readout_errors must list one probability per qubit")
        if any(not 0.0 <= p <= 1.0 for p in self.readout_errors):
            raise ValueError("readout errors must lie in [0, 1]")

        coupled = {tuple(pair) for pair in self.coupling_map}
        for entry in self.gate_errors:
            entry.gate = entry.gate.upper()
            if entry.gate not in self.basis_gates:
                raise ValueError(f"error rate given for non-basis gate {entry.gate}")
            arity = 2 if entry.gate in TWO_QUBIT_BASIS else 1
            if len(entry.qubits) != arity or any(not 0 <= q < self.n_qubits for q in entry.qubits):
                raise ValueError(f"invalid qubits {entry.qubits} for {entry.gate}")
            if arity == 2 and tuple(entry.qubits) not in coupled:
                raise ValueError(f"{entry.gate} error keyed on uncoupled pair {entry.qubits}")
        return self


class RunConfig(BaseModel):
    """Effective configuration of one CLI run (defaults, then config file, then flags)."""
    command: str = Field("search", description="Subcommand being run")
    dataset: str = Field("iris", description="iris, synthetic or a path to a dataset CSV")
    n_qubits: int = Field(4, gt=0)
    n_gates: int = Field(5, gt=0)
    mode: Literal["ideal", "noisy", "multi_objective"] = Field("ideal", description="Execution / objective mode")
    backend: Optional[str] = Field(None, description="Backend snapshot path")
    trials: int = Field(600, gt=0)
    k: int = Field(10, gt=0)
    train_fraction: float = Field(0.7, gt=0.0, lt=1.0)
    n_seeds: int = Field(5, gt=0)
    split_seed: int = Field(7)
    max_evals: int = Field(100, gt=0, description="COBYLA evaluation budget")
    rhobeg: float = Field(1.0, gt=0.0)
    rhoend: float = Field(1e-4, gt=0.0)
    shots: int = Field(1024, gt=0)
    parallelism: int = Field(1, gt=0)
    out: str = Field("runs/latest", description="Output directory")
    master_seed: int = Field(2024)
    data_seed: Optional[int] = Field(None, description="Synthetic generator seed, the configured one when unset")
    gamma: float = Field(0.25, gt=0.0, le=1.0)
    n_startup: int = Field(10, ge=0)
    n_candidates: int = Field(24, gt=0)
    prior_weight: float = Field(1.0, gt=0.0)
    templates: List[str] = Field(default_factory=lambda: ["RealAmplitudes", "EfficientSU2", "PauliTwoDesign"])
    reps: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    entanglements: List[str] = Field(default_factory=lambda: ["linear", "reverse_linear", "circular", "full"])
    rescore_noisy: bool = Field(False, description="Re-score Pareto members in the noisy environment")
    resume: bool = Field(False)
    force: bool = Field(False)

    @model_validator(mode='after')
    def check_backend(self) -> 'RunConfig':
        if self.mode in ("noisy", "multi_objective") and not self.backend:
            raise ValueError(f"mode {self.mode} requires a backend snapshot path")
        if self.rhoend > self.rhobeg:
            raise ValueError("rhoend must not exceed rhobeg")
        if any(r < 1 for r in self.reps):
            raise ValueError("template reps must be >= 1")
        return self


class TrialRecord(BaseModel):
    """One line of trials.jsonl."""
    id: int = Field(..., ge=0, description="Trial id (0-based, in suggestion order)")
    assignment: Dict[str, Union[int, str]] = Field(..., description="Value per search dimension")
    objectives: List[float] = Field(default_factory=list, description="Accuracy, then complexity in multi mode")
    state: Literal["pending", "complete", "failed"] = Field(...)
    seed: int = Field(..., description="Derived seed of this trial")
    wall_time: float = Field(0.0, ge=0.0, description="Evaluation time in seconds")
    error: Optional[str] = Field(None, description="Failure message of failed trials")
    std: Optional[float] = Field(None, description="Std of the accuracy estimate")

    @model_validator(mode='after')
    def check_objectives(self) -> 'TrialRecord':
        if self.state == "complete":
            if not self.objectives or any(not math.isfinite(v) for v in self.objectives):
                raise ValueError("complete trials need finite objective values")
        return self


class EvalReport(BaseModel):
    """Accuracies of one design over k splits and n_seeds backend seeds."""
    dataset: str = Field(..., description="Dataset name")
    ansatz_id: str = Field(..., description="Design identifier")
    mode: str = Field(..., description="ideal or noisy")
    kind: str = Field("search", description="baseline, search, multi_objective or degradation")
    k: int = Field(..., gt=0)
    n_seeds: int = Field(..., gt=0)
    per_seed: List[List[float]] = Field(..., description="Validation accuracies, one list of k folds per seed")
    mean: float = Field(...)
    std: float = Field(..., ge=0.0)
    complexity: Optional[float] = Field(None, description="Transpiled complexity when a backend is known")
    stats: Dict[str, int] = Field(default_factory=dict, description="Circuit statistics")

    @model_validator(mode='after')
    def check_aggregates(self) -> 'EvalReport':
        if len(self.per_seed) != self.n_seeds or any(len(folds) != self.k for folds in self.per_seed):
            raise ValueError("per_seed must hold n_seeds lists of k accuracies")
        values = np.asarray(self.accuracies, dtype=float)
        if not math.isclose(self.mean, float(values.mean()), abs_tol=1e-9):
            raise ValueError("mean does not match the stored accuracies")
        if not math.isclose(self.std, float(values.std()), abs_tol=1e-9):
            raise ValueError("std does not match the stored accuracies")
        return self

    @property
    def accuracies(self) -> List[float]:
        return [a for folds in self.per_seed for a in folds]

    @classmethod
    def from_accuracies(cls, dataset: str, ansatz_id: str, mode: str,
                        per_seed: List[List[float]], **extra) -> 'EvalReport':
        values = np.asarray(per_seed, dtype=float)
        return cls(
            dataset=dataset, ansatz_id=ansatz_id, mode=mode,
            k=values.shape[1], n_seeds=values.shape[0],
            per_seed=values.tolist(), mean=float(values.mean()), std=float(values.std()),
            **extra,
        )

    def csv_row(self) -> Dict[str, Union[str, int, float, None]]:
        """Flat row for summary / report CSV files."""
        row = {
            "dataset": self.dataset,
            "ansatz_id": self.ansatz_id,
            "mode": self.mode,
            "kind": self.kind,
            "mean": self.mean,
            "std": self.std,
            "k": self.k,
            "seeds": self.n_seeds,
            "complexity": self.complexity,
        }
        row.update(self.stats)
        return row
