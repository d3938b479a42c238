"""
Variational quantum classifier.

A model composes a feature-map template with an ansatz, samples the composed
circuit with finite shots and reads the class of each outcome as
``bitstring value mod n_classes``. Training minimizes the mean cross-entropy of
the shot-estimated class probabilities with COBYLA; evaluation repeats stratified
random train / validation splits over several backend seeds.
"""

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from logzero import logger
from scipy.optimize import minimize
from sklearn.model_selection import StratifiedShuffleSplit

from src.circuit import Circuit, ZZFeatureMap
from src.config_manager import config
from src.data_manager import Dataset, scale_features
from src.models import EvalReport
from src.qsim import NoiseModel, noisy_index_counts, run_statevector_batch, sample_index_counts
from src.seeding import FOLD, INIT, SAMPLE, SEED, derive_seed
from src.transpiler import BackendSnapshot, TranspiledCircuit, transpile


class TrainingError(ValueError):
    """Raised for invalid models, objectives or evaluation inputs."""


@dataclass(frozen=True, eq=False)
class Execution:
    """Where circuits run: the ideal simulator or a backend's noisy emulation."""
    mode: str = "ideal"
    snapshot: Optional[BackendSnapshot] = None
    noise: Optional[NoiseModel] = None

    @classmethod
    def ideal(cls) -> 'Execution':
        return cls()

    @classmethod
    def noisy(cls, snapshot: BackendSnapshot, noise: Optional[NoiseModel] = None) -> 'Execution':
        return cls("noisy", snapshot, noise or snapshot.noise_model())

    @property
    def is_noisy(self) -> bool:
        return self.mode == "noisy"


IDEAL = Execution.ideal()


@dataclass(frozen=True)
class TrainConfig:
    max_evals: int = 100
    shots: int = 1024
    rhobeg: float = 1.0
    rhoend: float = 1e-4
    prob_floor: float = 1e-10

    @classmethod
    def from_config(cls, **overrides) -> 'TrainConfig':
        section = config.get('vqc') or {}
        values = {name: section[name] for name in cls.__dataclass_fields__ if name in section}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class _TranspileCache:
    """Per-backend transpilations of one composed circuit, shared by every copy of a model."""

    def __init__(self):
        self.circuits: Dict[str, TranspiledCircuit] = {}
        self.lock = threading.Lock()

    def get(self, composed: Circuit, snapshot: BackendSnapshot) -> TranspiledCircuit:
        with self.lock:
            if snapshot.name not in self.circuits:
                self.circuits[snapshot.name] = transpile(composed, snapshot)
            return self.circuits[snapshot.name]


class VqcModel:
    """Feature map + ansatz + trained angles."""

    def __init__(self, feature_map, ansatz: Circuit, n_classes: int,
                 theta: Optional[Sequence[float]] = None,
                 _transpiled: Optional[_TranspileCache] = None):
        if n_classes < 2:
            raise TrainingError("n_classes must be at least 2")
        if feature_map.n_qubits != ansatz.n_qubits:
            raise TrainingError(
                f"feature map has {feature_map.n_qubits} qubits, ansatz has {ansatz.n_qubits}")
        self.feature_map = feature_map
        self.ansatz = ansatz
        self.n_classes = n_classes
        self.theta = np.zeros(ansatz.n_params) if theta is None else np.asarray(theta, dtype=float)
        if self.theta.shape != (ansatz.n_params,):
            raise TrainingError(f"theta has {self.theta.size} values, ansatz has {ansatz.n_params} slots")
        self.composed = feature_map.template.compose(ansatz)
        # Shared between copies made by with_theta
        self._transpiled = _TranspileCache() if _transpiled is None else _transpiled

    def with_theta(self, theta: Sequence[float]) -> 'VqcModel':
        return VqcModel(self.feature_map, self.ansatz, self.n_classes, theta, self._transpiled)

    def transpiled(self, snapshot: BackendSnapshot) -> TranspiledCircuit:
        return self._transpiled.get(self.composed, snapshot)

    def bound_params(self, features: np.ndarray) -> np.ndarray:
        """(batch, n_params) values of the composed circuit: feature angles, then theta."""
        angles = self.feature_map.angles(features)
        return np.hstack([angles, np.broadcast_to(self.theta, (angles.shape[0], self.theta.size))])

    def class_probabilities(self, index_counts: np.ndarray) -> np.ndarray:
        """Aggregate outcome counts (..., 2**n) by ``index mod n_classes`` and normalize."""
        index_counts = np.asarray(index_counts, dtype=float)
        classes = np.arange(index_counts.shape[-1]) % self.n_classes
        totals = np.stack([index_counts[..., classes == c].sum(axis=-1) for c in range(self.n_classes)], axis=-1)
        return totals / totals.sum(axis=-1, keepdims=True)


def _index_counts(model: VqcModel, params: np.ndarray, shots: int, seeds: Sequence[int],
                  execution: Execution) -> np.ndarray:
    if execution.is_noisy:
        tc = model.transpiled(execution.snapshot)
        return np.stack([
            tc.logical_counts(noisy_index_counts(tc.circuit, row, execution.noise, shots, seed))
            for row, seed in zip(params, seeds)
        ])
    states = run_statevector_batch(model.composed, params)
    probs = np.abs(states) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    return np.stack([
        sample_index_counts(row, shots, np.random.default_rng(seed)) for row, seed in zip(probs, seeds)
    ])


def predict_proba(model: VqcModel, x: Sequence[float], shots: int, seed: int,
                  execution: Execution = IDEAL) -> np.ndarray:
    """
    Class probability vector of one sample.

    Args:
        model: Classifier
        x: Scaled feature vector
        shots: Measurement shots
        seed: Sampling seed
        execution: Ideal or noisy

    Returns:
        np.ndarray: n_classes probabilities summing to 1
    """
    params = model.bound_params(np.asarray(x, dtype=float)[None, :])
    return model.class_probabilities(_index_counts(model, params, shots, [seed], execution)[0])


def predict_proba_batch(model: VqcModel, features: np.ndarray, shots: int, seed: int,
                        execution: Execution = IDEAL) -> np.ndarray:
    """Class probabilities of every row; row i samples with ``derive_seed(seed, SAMPLE, i)``."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    params = model.bound_params(features)
    seeds = [derive_seed(seed, SAMPLE, i) for i in range(features.shape[0])]
    return model.class_probabilities(_index_counts(model, params, shots, seeds, execution))


def cross_entropy(probs: np.ndarray, labels: np.ndarray, floor: float = 1e-10) -> float:
    """Mean -log p_true with probabilities clamped to [floor, 1]."""
    p_true = np.clip(probs[np.arange(len(labels)), labels], floor, 1.0)
    return float(-np.mean(np.log(p_true)))


def loss(model: VqcModel, features: np.ndarray, labels: np.ndarray, shots: int, seed: int,
         execution: Execution = IDEAL, floor: float = 1e-10) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= model.n_classes):
        raise TrainingError(f"labels must lie in 0..{model.n_classes - 1}")
    return cross_entropy(predict_proba_batch(model, features, shots, seed, execution), labels, floor)


def accuracy(model: VqcModel, features: np.ndarray, labels: np.ndarray, shots: int, seed: int,
             execution: Execution = IDEAL) -> float:
    predicted = predict_proba_batch(model, features, shots, seed, execution).argmax(axis=1)
    return float(np.mean(predicted == np.asarray(labels)))


class _BudgetExhausted(Exception):
    pass


def cobyla_minimize(f: Callable[[np.ndarray], float], x0: Sequence[float], max_evals: int,
                    rhobeg: float = 1.0, rhoend: float = 1e-4) -> Tuple[np.ndarray, float, int]:
    """
    Minimize ``f`` with COBYLA (no constraints), never exceeding ``max_evals`` calls.

    Args:
        f: Objective
        x0: Starting point, d >= 1
        max_evals: Evaluation budget, at least d + 2
        rhobeg: Initial trust radius; curved valleys such as Rosenbrock from (-1.2, 1) need about 2.0
        rhoend: Final trust radius

    Returns:
        Tuple[np.ndarray, float, int]: Best point seen, its value and evaluations used
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    d = x0.size
    if d < 1:
        raise TrainingError("cobyla_minimize needs at least one variable")
    if max_evals < d + 2:
        raise TrainingError(f"max_evals must be at least d + 2 = {d + 2}")

    best = {"x": x0.copy(), "f": math.inf, "evals": 0}

    def counted(x: np.ndarray) -> float:
        if best["evals"] >= max_evals:
            raise _BudgetExhausted()
        value = float(f(x))
        best["evals"] += 1
        if not math.isfinite(value):
            raise TrainingError(f"objective returned {value} at evaluation {best['evals']}")
        if value < best["f"]:
            best["x"], best["f"] = np.array(x, dtype=float), value
        return value

    try:
        minimize(counted, x0, method='COBYLA',
                 options={'maxiter': max_evals, 'rhobeg': rhobeg, 'tol': rhoend})
    except _BudgetExhausted:
        pass
    return best["x"], best["f"], best["evals"]


def train(model: VqcModel, features: np.ndarray, labels: np.ndarray, cfg: TrainConfig, seed: int,
          execution: Execution = IDEAL) -> VqcModel:
    """
    Fit theta by COBYLA on the training slice.

    Theta starts uniform in [0, 2pi) from ``seed``; every loss evaluation reuses the
    same sampling seed so the objective is deterministic.
    """
    n_params = model.ansatz.n_params
    if n_params == 0:
        return model.with_theta(np.zeros(0))
    theta0 = np.random.default_rng(derive_seed(seed, INIT)).uniform(0.0, 2 * np.pi, n_params)
    sample_seed = derive_seed(seed, SAMPLE)
    budget = cfg.max_evals
    if budget < n_params + 2:
        logger.warning(f"Raising COBYLA budget from {budget} to {n_params + 2} for {n_params} parameters")
        budget = n_params + 2

    def objective(theta: np.ndarray) -> float:
        return loss(model.with_theta(theta), features, labels, cfg.shots, sample_seed, execution, cfg.prob_floor)

    theta, value, evals = cobyla_minimize(objective, theta0, budget, cfg.rhobeg, cfg.rhoend)
    logger.debug(f"Training finished after {evals} evaluations with loss {value:.4f}")
    return model.with_theta(theta)


@dataclass
class _FoldJob:
    seed_index: int
    fold: int
    train_rows: np.ndarray
    val_rows: np.ndarray
    result: float = field(default=float('nan'))


def kfold_evaluate(circuit_builder: Union[Circuit, Callable[[], Circuit]], dataset: Dataset,
                   k: int = 10, train_fraction: float = 0.7, n_seeds: int = 5,
                   execution: Execution = IDEAL, cfg: Optional[TrainConfig] = None,
                   master_seed: int = 0, split_seed: int = 7, parallelism: int = 1,
                   ansatz_id: str = "ansatz", feature_map=None, **report_fields) -> EvalReport:
    """
    Repeated stratified random splits, each trained and scored on its validation part.

    Every (seed, split) pair trains an independent copy of the model; features are
    scaled with statistics of the training rows only.

    Args:
        circuit_builder: Ansatz, or a callable building it
        dataset: Unscaled dataset with one feature per qubit
        k: Number of splits
        train_fraction: Training share of every split
        n_seeds: Backend seeds per split
        execution: Ideal or noisy
        cfg: Training settings, configured defaults when omitted
        master_seed: Root of every training and sampling seed
        split_seed: Seed of the split generator
        parallelism: Worker threads
        ansatz_id: Design identifier written into the report
        feature_map: Encoder, ZZ feature map when omitted

    Returns:
        EvalReport: k x n_seeds validation accuracies with mean and std
    """
    ansatz = circuit_builder if isinstance(circuit_builder, Circuit) else circuit_builder()
    cfg = cfg or TrainConfig.from_config()
    feature_map = feature_map or ZZFeatureMap(ansatz.n_qubits)
    if dataset.n_features != feature_map.n_qubits:
        raise TrainingError(f"{dataset.name} has {dataset.n_features} features for {feature_map.n_qubits} qubits")

    splitter = StratifiedShuffleSplit(n_splits=k, train_size=train_fraction, random_state=split_seed)
    try:
        splits = list(splitter.split(dataset.features, dataset.labels))
    except ValueError as e:
        raise TrainingError(f"cannot stratify {dataset.name}: {str(e)}") from e
    for train_rows, _ in splits:
        if len(np.unique(dataset.labels[train_rows])) != dataset.n_classes:
            raise TrainingError(f"a training split of {dataset.name} misses a class")

    base = VqcModel(feature_map, ansatz, dataset.n_classes)
    if execution.is_noisy:
        # Transpile once before the workers share the model
        base.transpiled(execution.snapshot)
    jobs = [_FoldJob(s, f, train_rows, val_rows)
            for s in range(n_seeds) for f, (train_rows, val_rows) in enumerate(splits)]

    def run(job: _FoldJob) -> _FoldJob:
        scaled, _ = scale_features(dataset, job.train_rows)
        seed = derive_seed(master_seed, FOLD, job.fold, SEED, job.seed_index)
        x_train, y_train = scaled.features[job.train_rows], scaled.labels[job.train_rows]
        x_val, y_val = scaled.features[job.val_rows], scaled.labels[job.val_rows]
        trained = train(base, x_train, y_train, cfg, seed, execution)
        job.result = accuracy(trained, x_val, y_val, cfg.shots, derive_seed(seed, SAMPLE, 1), execution)
        return job

    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            done = list(pool.map(run, jobs))
    else:
        done = [run(job) for job in jobs]

    per_seed: List[List[float]] = [[0.0] * k for _ in range(n_seeds)]
    for job in done:
        per_seed[job.seed_index][job.fold] = job.result
    report = EvalReport.from_accuracies(dataset.name, ansatz_id, execution.mode, per_seed,
                                        stats=ansatz.stats(), **report_fields)
    logger.info(f"{ansatz_id} on {dataset.name} ({execution.mode}): {report.mean:.4f} ± {report.std:.4f}")
    return report


def cohens_d(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """(mean_a - mean_b) over the pooled standard deviation with (n - 1) weights."""
    a, b = np.asarray(sample_a, dtype=float), np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise TrainingError("cohens_d needs at least two values per sample")
    pooled = math.sqrt(((a.size - 1) * a.var(ddof=1) + (b.size - 1) * b.var(ddof=1)) / (a.size + b.size - 2))
    if pooled == 0.0:
        raise TrainingError("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / pooled)


def effect_size_label(d: float) -> str:
    """negligible, small, medium or large by |d|."""
    thresholds = config.get('effect_size') or {}
    magnitude = abs(d)
    if magnitude > thresholds.get('large', 0.8):
        return "large"
    if magnitude > thresholds.get('medium', 0.5):
        return "medium"
    if magnitude > thresholds.get('small', 0.2):
        return "small"
    return "negligible"
