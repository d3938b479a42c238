"""
Tree-structured Parzen Estimator search over the ansatz genome space.

Single-objective mode maximizes validation accuracy; multi-objective mode
maximizes accuracy while minimizing transpiled complexity and keeps a Pareto
front. Internally every objective is minimized, so accuracy is negated where
trials are ranked.

Trials are kept in a ``TrialStore`` that appends one JSON record per finished
trial to ``trials.jsonl``. Suggest and record steps run under the store lock;
evaluations run concurrently outside it, and pending trials are counted in the
bad set (constant liar) so parallel workers do not pile onto one region.
"""

import math
import os
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from logzero import logger
from pydantic import ValidationError

from src.circuit import AnsatzGenome, DesignParams, GateChoice, gate_choices
from src.config_manager import config
from src.models import TrialRecord
from src.seeding import SUGGEST, TRIAL, derive_seed

Value = Union[int, str]
Assignment = Dict[str, Value]


class SearchError(ValueError):
    """Raised for invalid search spaces, histories or trial logs."""


@dataclass(frozen=True)
class Dimension:
    name: str
    choices: Tuple[Value, ...]

    @property
    def is_binary(self) -> bool:
        return self.choices == (0, 1)


@dataclass(frozen=True)
class SearchSpace:
    """Named discrete dimensions; genome spaces also decode assignments to genomes."""
    dimensions: Tuple[Dimension, ...]
    design: Optional[DesignParams] = None

    def __len__(self) -> int:
        return len(self.dimensions)

    @property
    def names(self) -> List[str]:
        return [d.name for d in self.dimensions]

    def sample_uniform(self, rng: np.random.Generator) -> Assignment:
        return {d.name: d.choices[rng.integers(len(d.choices))] for d in self.dimensions}

    def contains(self, assignment: Assignment) -> bool:
        return (set(assignment) == set(self.names)
                and all(assignment[d.name] in d.choices for d in self.dimensions))

    def decode(self, assignment: Assignment) -> AnsatzGenome:
        """Genome an assignment of a genome space stands for."""
        if self.design is None:
            raise SearchError("this search space does not describe genomes")
        if not self.contains(assignment):
            raise SearchError("assignment is outside the search space")
        n, g = self.design.n_qubits, self.design.n_gates
        entanglement = tuple(
            tuple(0 if i == j else int(assignment[f"e_{i}_{j}"]) for j in range(n)) for i in range(n))
        grid = tuple(tuple(GateChoice.parse(str(assignment[f"p_{i}_{k}"])) for k in range(g)) for i in range(n))
        return AnsatzGenome(entanglement, grid)


def genome_space(design: DesignParams) -> SearchSpace:
    """
    Search space of a design: one binary dimension ``e_i_j`` per ordered pair i != j
    and one categorical dimension ``p_i_k`` per grid cell, over the wire's gate choices.
    """
    n = design.n_qubits
    dimensions = [Dimension(f"e_{i}_{j}", (0, 1)) for i in range(n) for j in range(n) if i != j]
    for i in range(n):
        labels = tuple(c.label for c in gate_choices(n, i))
        dimensions += [Dimension(f"p_{i}_{k}", labels) for k in range(design.n_gates)]
    return SearchSpace(tuple(dimensions), design)


@dataclass
class Trial:
    id: int
    assignment: Assignment
    seed: int
    objectives: Tuple[float, ...] = ()
    state: str = "pending"
    wall_time: float = 0.0
    error: Optional[str] = None
    std: Optional[float] = None

    @property
    def losses(self) -> Tuple[float, ...]:
        """Objectives as minimized quantities: (-accuracy[, complexity])."""
        return (-self.objectives[0],) + tuple(self.objectives[1:])

    def to_record(self) -> TrialRecord:
        return TrialRecord(id=self.id, assignment=self.assignment, objectives=list(self.objectives),
                           state=self.state, seed=self.seed, wall_time=self.wall_time,
                           error=self.error, std=self.std)

    @classmethod
    def from_record(cls, record: TrialRecord) -> 'Trial':
        return cls(record.id, dict(record.assignment), record.seed, tuple(record.objectives),
                   record.state, record.wall_time, record.error, record.std)


@dataclass
class Evaluation:
    """What an evaluator reports for one trial."""
    objectives: Tuple[float, ...]
    std: Optional[float] = None


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    prior_weight: float = 1.0

    @classmethod
    def from_config(cls, **overrides) -> 'TpeConfig':
        section = config.get('search', 'tpe') or {}
        values = {name: section[name] for name in cls.__dataclass_fields__ if name in section}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class ParetoFront:
    trials: Tuple[Trial, ...] = ()

    def __iter__(self):
        return iter(self.trials)

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def ids(self) -> List[int]:
        return [t.id for t in self.trials]


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True when loss vector ``a`` is no worse than ``b`` everywhere and better somewhere."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def pareto_front(history: Sequence[Trial]) -> ParetoFront:
    """Completed trials not dominated in (accuracy up, complexity down) by any completed trial."""
    done = [t for t in history if t.state == "complete"]
    members = [t for t in done if not any(dominates(o.losses, t.losses) for o in done if o is not t)]
    return ParetoFront(tuple(sorted(members, key=lambda t: t.id)))


def nondominated_sort(points: np.ndarray) -> List[List[int]]:
    """Indices of ``points`` (rows of losses) grouped into successive non-dominated fronts."""
    if len(points) == 0:
        return []
    points = np.asarray(points, dtype=float).reshape(len(points), -1)
    # beats[i, j]: row i dominates row j
    beats = (np.all(points[:, None, :] <= points[None, :, :], axis=2)
             & np.any(points[:, None, :] < points[None, :, :], axis=2))
    dominated_by = beats.sum(axis=0)
    remaining = np.ones(len(points), dtype=bool)
    fronts: List[List[int]] = []
    while remaining.any():
        front = np.flatnonzero(remaining & (dominated_by == 0))
        fronts.append(front.tolist())
        remaining[front] = False
        dominated_by = dominated_by - beats[front].sum(axis=0)
    return fronts


def crowding_distance(points: np.ndarray) -> np.ndarray:
    """Crowding distance of each row; boundary rows of every objective get infinity."""
    n, m = points.shape
    distance = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for obj in range(m):
        order = np.argsort(points[:, obj], kind='stable')
        values = points[order, obj]
        distance[order[0]] = distance[order[-1]] = np.inf
        span = values[-1] - values[0]
        if span == 0:
            continue
        distance[order[1:-1]] += (values[2:] - values[:-2]) / span
    return distance


def split_single(history: Sequence[Trial], gamma: float) -> Tuple[List[Trial], List[Trial]]:
    """Best ceil(gamma * n) trials by loss (ties by id) and the rest."""
    ranked = sorted(history, key=lambda t: (t.losses[0], t.id))
    n_good = math.ceil(gamma * len(ranked))
    return ranked[:n_good], ranked[n_good:]


def split_multi(history: Sequence[Trial], gamma: float) -> Tuple[List[Trial], List[Trial]]:
    """
    Good set of ceil(gamma * n) trials taken front by front; the front that
    overflows is truncated by descending crowding distance, ties by trial id.
    """
    n_good = math.ceil(gamma * len(history))
    points = np.array([t.losses for t in history], dtype=float)
    good: List[int] = []
    for front in nondominated_sort(points):
        if len(good) + len(front) <= n_good:
            good.extend(front)
            continue
        distance = crowding_distance(points[front])
        ranked = sorted(range(len(front)), key=lambda i: (-distance[i], history[front[i]].id))
        good.extend(front[i] for i in ranked[:n_good - len(good)])
        break
    chosen = set(good)
    return [history[i] for i in good], [t for i, t in enumerate(history) if i not in chosen]


def _log_density(dimension: Dimension, trials: Sequence[Trial], prior_weight: float) -> np.ndarray:
    weights = np.full(len(dimension.choices), prior_weight, dtype=float)
    index = {v: i for i, v in enumerate(dimension.choices)}
    for trial in trials:
        weights[index[trial.assignment[dimension.name]]] += 1.0
    return np.log(weights / weights.sum())


def _suggest_from_split(good: Sequence[Trial], bad: Sequence[Trial], space: SearchSpace,
                        rng: np.random.Generator, cfg: TpeConfig) -> Assignment:
    candidates = [dict() for _ in range(cfg.n_candidates)]
    scores = np.zeros(cfg.n_candidates)
    for dimension in space.dimensions:
        log_l = _log_density(dimension, good, cfg.prior_weight)
        log_g = _log_density(dimension, bad, cfg.prior_weight)
        draws = rng.choice(len(dimension.choices), size=cfg.n_candidates, p=np.exp(log_l))
        scores += log_l[draws] - log_g[draws]
        for candidate, draw in zip(candidates, draws):
            candidate[dimension.name] = dimension.choices[draw]
    return candidates[int(np.argmax(scores))]


def tpe_suggest(history: Sequence[Trial], space: SearchSpace, rng: np.random.Generator,
                cfg: Optional[TpeConfig] = None, pending: Sequence[Trial] = ()) -> Assignment:
    """
    Next assignment for single-objective search.

    With fewer than ``n_startup`` completed trials the draw is uniform. Otherwise
    the best ceil(gamma * n) trials form the good set, the rest (plus pending
    trials) the bad set; each dimension gets smoothed categorical densities
    l(v) and g(v), ``n_candidates`` assignments are drawn from l and the one
    maximizing prod l(v) / g(v) is returned.
    """
    cfg = cfg or TpeConfig.from_config()
    done = [t for t in history if t.state == "complete"]
    if len(done) < max(cfg.n_startup, 1):
        return space.sample_uniform(rng)
    good, bad = split_single(done, cfg.gamma)
    return _suggest_from_split(good, bad + list(pending), space, rng, cfg)


def motpe_suggest(history: Sequence[Trial], space: SearchSpace, rng: np.random.Generator,
                  cfg: Optional[TpeConfig] = None, pending: Sequence[Trial] = ()) -> Assignment:
    """
    Next assignment for two-objective search.

    Like ``tpe_suggest`` but the good set takes whole non-dominated fronts in rank
    order and truncates the last one by crowding distance (ties by trial id).
    """
    cfg = cfg or TpeConfig.from_config()
    done = [t for t in history if t.state == "complete"]
    if any(len(t.objectives) != 2 for t in done):
        raise SearchError("multi-objective suggestion needs two objectives per trial")
    if len(done) < max(cfg.n_startup, 1):
        return space.sample_uniform(rng)
    good, bad = split_multi(done, cfg.gamma)
    return _suggest_from_split(good, bad + list(pending), space, rng, cfg)


class TrialStore:
    """Thread-safe trial history, optionally mirrored to an append-only JSON-lines log."""

    def __init__(self, path: Optional[str] = None, resume: bool = False):
        self.path = path
        self._lock = threading.Lock()
        self.trials: Dict[int, Trial] = {}
        if path and os.path.exists(path) and os.path.getsize(path) > 0:
            if not resume:
                raise SearchError(f"{path} already holds trials; resume or remove it")
            self._load(path)

    def _load(self, path: str) -> None:
        with open(path, 'r') as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = TrialRecord.model_validate_json(line)
                except ValidationError as e:
                    raise SearchError(f"{path}:{number}: invalid trial record: {str(e)}") from e
                self.trials[record.id] = Trial.from_record(record)
        logger.info(f"Resumed {len(self.trials)} trials from {path}")

    @property
    def lock(self) -> threading.Lock:
        return self._lock

    def history(self) -> List[Trial]:
        return [self.trials[i] for i in sorted(self.trials)]

    def completed(self) -> List[Trial]:
        return [t for t in self.history() if t.state == "complete"]

    def pending(self) -> List[Trial]:
        return [t for t in self.history() if t.state == "pending"]

    def finished(self) -> List[Trial]:
        return [t for t in self.history() if t.state != "pending"]

    def next_id(self) -> int:
        return max(self.trials, default=-1) + 1

    def reserve(self, assignment: Assignment, seed: int, trial_id: int) -> Trial:
        """Register a pending trial; call with the lock held."""
        trial = Trial(trial_id, assignment, seed)
        self.trials[trial_id] = trial
        return trial

    def record(self, trial: Trial) -> None:
        """Store a finished trial and append its line to the log."""
        with self._lock:
            self.trials[trial.id] = trial
            if self.path:
                with open(self.path, 'a') as f:
                    f.write(trial.to_record().model_dump_json() + "\n")


Evaluator = Callable[[Assignment, int], Union[float, Sequence[float], Evaluation]]


def _evaluate(evaluator: Evaluator, trial: Trial, n_objectives: int) -> Trial:
    start = time.perf_counter()
    try:
        outcome = evaluator(trial.assignment, trial.seed)
        if not isinstance(outcome, Evaluation):
            values = (outcome,) if np.isscalar(outcome) else tuple(outcome)
            outcome = Evaluation(tuple(values))
        objectives = tuple(float(v) for v in outcome.objectives)
        if len(objectives) != n_objectives:
            raise SearchError(f"evaluator returned {len(objectives)} objectives, expected {n_objectives}")
        if not all(math.isfinite(v) for v in objectives):
            raise SearchError(f"non-finite objectives {objectives}")
        trial = replace(trial, objectives=objectives, state="complete", std=outcome.std)
    except Exception as e:
        logger.warning(f"Trial {trial.id} failed: {str(e)}")
        trial = replace(trial, objectives=(), state="failed", error=str(e))
    return replace(trial, wall_time=time.perf_counter() - start)


def best_trial(history: Sequence[Trial]) -> Optional[Trial]:
    """Completed trial with the highest accuracy, earliest id on ties."""
    done = [t for t in history if t.state == "complete"]
    return min(done, key=lambda t: (t.losses[0], t.id)) if done else None


def optimize(evaluator: Evaluator, space: SearchSpace, n_trials: int, mode: str = "single",
             parallelism: int = 1, rng_seed: int = 0, cfg: Optional[TpeConfig] = None,
             store: Optional[TrialStore] = None) -> Tuple[List[Trial], Union[Trial, ParetoFront, None]]:
    """
    Suggest / evaluate / record loop.

    Trial ``t`` draws its suggestion from ``derive_seed(rng_seed, SUGGEST, t)`` and is
    evaluated with seed ``derive_seed(rng_seed, TRIAL, t)``, so a run (or a resumed
    run) is reproducible at parallelism 1. A failing evaluator marks its trial failed
    and the run continues.

    Args:
        evaluator: Called as evaluator(assignment, seed); returns accuracy, or
            (accuracy, complexity) in multi mode, optionally wrapped in Evaluation
        space: Search space
        n_trials: Finished trials wanted in the store, resumed ones included
        mode: single or multi
        parallelism: Concurrent evaluations
        rng_seed: Master seed
        cfg: TPE settings
        store: Trial store, in-memory when omitted

    Returns:
        Tuple: History ordered by id, and the best trial (single) or the Pareto front (multi)
    """
    if n_trials < 1:
        raise SearchError("n_trials must be >= 1")
    if mode not in ("single", "multi"):
        raise SearchError(f"unknown mode: {mode}")
    cfg = cfg or TpeConfig.from_config()
    store = store or TrialStore()
    suggest = tpe_suggest if mode == "single" else motpe_suggest
    n_objectives = 1 if mode == "single" else 2

    def next_trial() -> Trial:
        with store.lock:
            trial_id = store.next_id()
            rng = np.random.default_rng(derive_seed(rng_seed, SUGGEST, trial_id))
            assignment = suggest(store.completed(), space, rng, cfg, store.pending())
            return store.reserve(assignment, derive_seed(rng_seed, TRIAL, trial_id), trial_id)

    def finish(trial: Trial) -> None:
        store.record(trial)
        if trial.state == "complete":
            logger.info(f"Trial {trial.id}: objectives {', '.join(f'{v:.4f}' for v in trial.objectives)}")

    remaining = n_trials - len(store.finished())
    logger.info(f"Running {max(remaining, 0)} {mode}-objective trials (parallelism {parallelism})")
    if parallelism <= 1:
        for _ in range(remaining):
            finish(_evaluate(evaluator, next_trial(), n_objectives))
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            in_flight = set()
            submitted = 0
            while submitted < remaining or in_flight:
                while submitted < remaining and len(in_flight) < parallelism:
                    in_flight.add(pool.submit(_evaluate, evaluator, next_trial(), n_objectives))
                    submitted += 1
                done, in_flight = wait(in_flight, return_when=FIRST_COMPLETED)
                for future in done:
                    finish(future.result())

    history = store.history()
    best = best_trial(history) if mode == "single" else pareto_front(history)
    return history, best


def random_search(evaluator: Evaluator, space: SearchSpace, n_trials: int, mode: str = "single",
                  rng_seed: int = 0, store: Optional[TrialStore] = None):
    """Uniform random search baseline with the same bookkeeping as ``optimize``."""
    cfg = replace(TpeConfig.from_config(), n_startup=n_trials + 1)
    return optimize(evaluator, space, n_trials, mode, 1, rng_seed, cfg, store)


def hypervolume_2d(losses: np.ndarray, reference: Sequence[float]) -> float:
    """Area dominated by 2-d loss points and bounded by ``reference``."""
    points = np.asarray(losses, dtype=float).reshape(-1, 2)
    points = points[np.all(points < np.asarray(reference), axis=1)]
    if points.size == 0:
        return 0.0
    points = points[np.argsort(points[:, 0], kind='stable')]
    volume, best_y = 0.0, reference[1]
    for x, y in points:
        if y >= best_y:
            continue
        volume += (reference[0] - x) * (best_y - y)
        best_y = y
    return float(volume)
