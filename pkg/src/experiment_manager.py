"""
Experiment manager.
Runs the subcommands of the pipeline: dataset generation, template baselines,
single-objective search (ideal or noisy), multi-objective search and the
cross-run report. Every command writes its artifacts into one run directory.
"""

import json
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
import numpy as np
import pandas as pd
from logzero import logfile, logger
from pydantic import ValidationError

from src.bopt import Evaluation, TpeConfig, TrialStore, genome_space, optimize
from src.circuit import Circuit, DesignParams, build_ansatz, postprocess, template
from src.config_manager import PROJECT_ROOT, ConfigError, config, load_document
from src.data_manager import Dataset, gen_synthetic, load_dataset
from src.models import EvalReport, RunConfig
from src.results_db import REPORTS_FILE, ResultsDB
from src.transpiler import BackendSnapshot, complexity, load_backend_snapshot, transpile
from src.vqc import Execution, TrainConfig, cohens_d, effect_size_label, kfold_evaluate

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

COMMAND_MODES = {"search-noisy": "noisy", "search-mo": "multi_objective"}
NEEDS_BACKEND = ("noisy", "multi_objective")


def _defaults() -> Dict[str, Any]:
    """RunConfig values taken from config.yaml."""
    values = {
        "dataset": config.get('data', 'default_dataset'),
        "n_qubits": config.get('design', 'n_qubits'),
        "n_gates": config.get('design', 'n_gates'),
        "trials": config.get('search', 'trials'),
        "parallelism": config.get('search', 'parallelism'),
        "master_seed": config.get('search', 'master_seed'),
        "k": config.get('evaluation', 'k'),
        "train_fraction": config.get('evaluation', 'train_fraction'),
        "n_seeds": config.get('evaluation', 'n_seeds'),
        "split_seed": config.get('evaluation', 'split_seed'),
        "max_evals": config.get('vqc', 'max_evals'),
        "rhobeg": config.get('vqc', 'rhobeg'),
        "rhoend": config.get('vqc', 'rhoend'),
        "shots": config.get('vqc', 'shots'),
        "out": config.get('output', 'default_dir'),
        "templates": config.get('baseline', 'templates'),
        "reps": config.get('baseline', 'reps'),
        "entanglements": config.get('baseline', 'entanglements'),
    }
    for name in ("gamma", "n_startup", "n_candidates", "prior_weight"):
        values[name] = config.get('search', 'tpe', name)
    return {k: v for k, v in values.items() if v is not None}


def load_run_config(command: str, config_file: Optional[str] = None, **flags: Any) -> RunConfig:
    """
    Merge config.yaml defaults, an optional run config file and CLI flags.

    Args:
        command: Subcommand name
        config_file: JSON or YAML file with RunConfig keys
        **flags: Flag values; None means not given

    Returns:
        RunConfig: Validated configuration
    """
    values = _defaults()
    if config_file:
        document = load_document(config_file)
        unknown = set(document) - set(RunConfig.model_fields)
        if unknown:
            raise ConfigError(f"unknown keys in {config_file}: {sorted(unknown)}")
        values.update(document)
    values.update({k: v for k, v in flags.items() if v is not None})
    values["command"] = command
    if command in COMMAND_MODES:
        values["mode"] = COMMAND_MODES[command]
    if values.get("mode") in NEEDS_BACKEND and not values.get("backend"):
        values["backend"] = config.resolve_path('fixtures', 'backend')
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {str(e)}") from e


class ExperimentManager:
    """Runs one subcommand with a validated RunConfig."""

    def __init__(self, run_config: RunConfig):
        """
        Initialize experiment manager.

        Args:
            run_config: Effective configuration of the run
        """
        self.rc = run_config
        self.out = run_config.out if os.path.isabs(run_config.out) else os.path.join(os.getcwd(), run_config.out)
        self.design = DesignParams(run_config.n_qubits, run_config.n_gates)
        self._snapshot: Optional[BackendSnapshot] = None

    @property
    def snapshot(self) -> Optional[BackendSnapshot]:
        if self._snapshot is None and self.rc.backend:
            path = self.rc.backend
            if not os.path.exists(path) and not os.path.isabs(path):
                path = os.path.join(PROJECT_ROOT, path)
            self._snapshot = load_backend_snapshot(path)
        return self._snapshot

    def execution(self, mode: str) -> Execution:
        if mode == "noisy":
            if self.snapshot is None:
                raise ConfigError("noisy execution needs a backend snapshot")
            return Execution.noisy(self.snapshot)
        return Execution.ideal()

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_config(max_evals=self.rc.max_evals, shots=self.rc.shots,
                                       rhobeg=self.rc.rhobeg, rhoend=self.rc.rhoend)

    def tpe_config(self) -> TpeConfig:
        return TpeConfig(self.rc.gamma, self.rc.n_startup, self.rc.n_candidates, self.rc.prior_weight)

    def path(self, *parts: str) -> str:
        return os.path.join(self.out, *parts)

    def setup_output(self, artifacts: Sequence[str]) -> None:
        """
        Prepare the run directory: refuse to overwrite artifacts unless forced,
        start the run log and record the effective configuration.
        """
        os.makedirs(self.out, exist_ok=True)
        existing = [a for a in artifacts if os.path.exists(self.path(a))]
        if existing and not (self.rc.force or self.rc.resume):
            raise ConfigError(f"{self.out} already holds {', '.join(existing)}; use --force or --resume")
        if self.rc.force:
            for artifact in existing:
                if os.path.isfile(self.path(artifact)):
                    os.remove(self.path(artifact))

        logs_dir = self.path(config.get('output', 'logs_dir') or 'logs')
        os.makedirs(logs_dir, exist_ok=True)
        log_file = os.path.join(logs_dir, f"{self.rc.command}_{datetime.now().strftime('%Y%m%d')}.log")
        logfile(log_file, maxBytes=config.get('output', 'log_max_bytes') or 1e6,
                backupCount=config.get('output', 'log_backups') or 5)
        logger.info(f"Logging to {log_file}")

        with open(self.path("run_config.json"), 'w') as f:
            f.write(self.rc.model_dump_json(indent=2))

    def load_data(self) -> Dataset:
        dataset = load_dataset(self.rc.dataset)
        if dataset.n_features != self.design.n_qubits:
            raise ConfigError(f"{dataset.name} has {dataset.n_features} features for {self.design.n_qubits} qubits")
        return dataset

    def complexity_of(self, circuit: Circuit) -> Optional[float]:
        if self.snapshot is None:
            return None
        return complexity(transpile(circuit, self.snapshot), self.snapshot)

    def evaluate(self, circuit: Circuit, dataset: Dataset, mode: str, ansatz_id: str, kind: str,
                 master_seed: int, parallelism: int = 1) -> EvalReport:
        return kfold_evaluate(
            circuit, dataset, k=self.rc.k, train_fraction=self.rc.train_fraction, n_seeds=self.rc.n_seeds,
            execution=self.execution(mode), cfg=self.train_config(), master_seed=master_seed,
            split_seed=self.rc.split_seed, parallelism=parallelism, ansatz_id=ansatz_id,
            kind=kind, complexity=self.complexity_of(circuit),
        )

    def write_reports(self, reports: Sequence[EvalReport]) -> None:
        """reports.jsonl for the report command and summary.csv for humans."""
        with open(self.path(REPORTS_FILE), 'w') as f:
            for report in reports:
                f.write(report.model_dump_json() + "\n")
        frame = pd.DataFrame([r.csv_row() for r in reports])
        frame.to_csv(self.path("summary.csv"), index=False, float_format="%.10g")
        logger.info(f"✅ Wrote {len(reports)} summary rows to {self.path('summary.csv')}")

    def write_circuit(self, name: str, circuit: Circuit, **extra: Any) -> None:
        os.makedirs(os.path.dirname(self.path(name)), exist_ok=True)
        with open(self.path(name), 'w') as f:
            f.write(circuit.to_json(**extra))

    # Commands

    def cmd_gen_data(self) -> str:
        """Write the synthetic dataset as synthetic.csv."""
        self.setup_output(["synthetic.csv"])
        dataset = gen_synthetic(self.rc.data_seed)
        target = self.path("synthetic.csv")
        dataset.to_csv(target)
        return target

    def cmd_baseline(self) -> pd.DataFrame:
        """
        Evaluate every template configuration and mark the best one per template.

        Returns:
            pd.DataFrame: One row per configuration, with a ``best`` column
        """
        self.setup_output(["baseline.csv", "summary.csv", REPORTS_FILE])
        dataset = self.load_data()
        mode = "noisy" if self.rc.mode == "noisy" else "ideal"
        reports: List[EvalReport] = []
        for name in self.rc.templates:
            options = [None] if name == "PauliTwoDesign" else list(self.rc.entanglements)
            for reps in self.rc.reps:
                for entanglement in options:
                    circuit = template(name, reps, entanglement, seed=self.rc.master_seed,
                                       n_qubits=self.design.n_qubits)
                    ansatz_id = f"{name}(reps={reps})" if entanglement is None else f"{name}(reps={reps},{entanglement})"
                    logger.info(f"Evaluating {ansatz_id}")
                    reports.append(self.evaluate(circuit, dataset, mode, ansatz_id, "baseline",
                                                 self.rc.master_seed, self.rc.parallelism))

        frame = pd.DataFrame([r.csv_row() for r in reports])
        frame["template"] = frame["ansatz_id"].str.split("(").str[0]
        best_index = frame.groupby("template", sort=False)["mean"].idxmax()
        frame["best"] = frame.index.isin(best_index)
        frame.to_csv(self.path("baseline.csv"), index=False, float_format="%.10g")
        self.write_reports(reports)
        for index in best_index:
            logger.info(f"✅ Best {frame.loc[index, 'template']}: {frame.loc[index, 'ansatz_id']} "
                        f"{frame.loc[index, 'mean']:.4f} ± {frame.loc[index, 'std']:.4f}")
        return frame

    def _circuit_for(self, space, assignment) -> Circuit:
        return postprocess(build_ansatz(space.decode(assignment)))

    def cmd_search(self) -> EvalReport:
        """
        Single-objective search in the configured execution mode.

        Writes trials.jsonl, best_circuit.json, reports.jsonl and summary.csv. An ideal
        search with a backend also re-scores its best circuit in the noisy environment.
        """
        mode = "noisy" if self.rc.mode == "noisy" else "ideal"
        self.setup_output(["trials.jsonl", "best_circuit.json", "summary.csv", REPORTS_FILE])
        dataset = self.load_data()
        space = genome_space(self.design)
        reports: Dict[int, EvalReport] = {}

        def evaluator(assignment, seed: int) -> Evaluation:
            circuit = self._circuit_for(space, assignment)
            report = self.evaluate(circuit, dataset, mode, "candidate", "search", seed)
            reports[seed] = report
            return Evaluation((report.mean,), report.std)

        store = TrialStore(self.path("trials.jsonl"), resume=self.rc.resume)
        history, best = optimize(evaluator, space, self.rc.trials, "single", self.rc.parallelism,
                                 self.rc.master_seed, self.tpe_config(), store)
        if best is None:
            raise ConfigError(f"all {len(history)} trials failed")

        circuit = self._circuit_for(space, best.assignment)
        ansatz_id = f"search-{mode}-trial{best.id}"
        report = reports.get(best.seed) or self.evaluate(circuit, dataset, mode, ansatz_id, "search", best.seed)
        report = report.model_copy(update={"ansatz_id": ansatz_id})
        summary = [report]
        if mode == "ideal" and self.snapshot is not None:
            logger.info("Re-scoring the best circuit in the noisy environment")
            summary.append(self.evaluate(circuit, dataset, "noisy", ansatz_id, "degradation", best.seed,
                                         self.rc.parallelism))

        self.write_circuit("best_circuit.json", circuit, trial_id=best.id,
                           genome=space.decode(best.assignment).to_dict(),
                           mean=report.mean, std=report.std, complexity=report.complexity)
        self.write_reports(summary)
        logger.info(f"✅ Best trial {best.id}: {report.mean:.4f} ± {report.std:.4f}")
        return report

    def cmd_search_mo(self) -> pd.DataFrame:
        """
        Two-objective search: ideal accuracy up, transpiled complexity down.

        Writes the Pareto members as pareto/trial_<id>.json plus pareto.csv; with
        ``rescore_noisy`` every member is re-scored in the noisy environment and the
        best noisy mean (lower std on ties) is selected.
        """
        self.setup_output(["trials.jsonl", "pareto.csv", "best_circuit.json", "summary.csv", REPORTS_FILE])
        dataset = self.load_data()
        space = genome_space(self.design)
        reports: Dict[int, EvalReport] = {}

        def evaluator(assignment, seed: int) -> Evaluation:
            circuit = self._circuit_for(space, assignment)
            report = self.evaluate(circuit, dataset, "ideal", "candidate", "multi_objective", seed)
            reports[seed] = report
            return Evaluation((report.mean, report.complexity), report.std)

        store = TrialStore(self.path("trials.jsonl"), resume=self.rc.resume)
        history, front = optimize(evaluator, space, self.rc.trials, "multi", self.rc.parallelism,
                                  self.rc.master_seed, self.tpe_config(), store)
        if len(front) == 0:
            raise ConfigError(f"all {len(history)} trials failed")

        rows, ideal_reports, noisy_reports = [], {}, {}
        for trial in front:
            circuit = self._circuit_for(space, trial.assignment)
            ansatz_id = f"pareto-trial{trial.id}"
            ideal = reports.get(trial.seed) or self.evaluate(circuit, dataset, "ideal", ansatz_id,
                                                             "multi_objective", trial.seed)
            ideal_reports[trial.id] = ideal.model_copy(update={"ansatz_id": ansatz_id})
            row = {"trial_id": trial.id, "accuracy": trial.objectives[0], "complexity": trial.objectives[1],
                   "std": trial.std}
            if self.rc.rescore_noisy:
                noisy = self.evaluate(circuit, dataset, "noisy", ansatz_id, "multi_objective", trial.seed,
                                      self.rc.parallelism)
                noisy_reports[trial.id] = noisy
                row.update({"noisy_mean": noisy.mean, "noisy_std": noisy.std})
            rows.append(row)
            self.write_circuit(os.path.join("pareto", f"trial_{trial.id:04d}.json"), circuit, trial_id=trial.id,
                               genome=space.decode(trial.assignment).to_dict(),
                               accuracy=trial.objectives[0], complexity=trial.objectives[1])

        frame = pd.DataFrame(rows)
        if self.rc.rescore_noisy:
            ranked = frame.sort_values(["noisy_mean", "noisy_std", "trial_id"], ascending=[False, True, True])
        else:
            ranked = frame.sort_values(["accuracy", "std", "trial_id"], ascending=[False, True, True])
        selected = int(ranked.iloc[0]["trial_id"])
        frame["selected"] = frame["trial_id"] == selected
        frame.to_csv(self.path("pareto.csv"), index=False, float_format="%.10g")

        chosen = next(t for t in front if t.id == selected)
        self.write_circuit("best_circuit.json", self._circuit_for(space, chosen.assignment), trial_id=selected,
                           genome=space.decode(chosen.assignment).to_dict(),
                           accuracy=chosen.objectives[0], complexity=chosen.objectives[1])
        summary = [ideal_reports[selected]] + ([noisy_reports[selected]] if selected in noisy_reports else [])
        self.write_reports(summary)
        logger.info(f"✅ Pareto front has {len(front)} members; selected trial {selected}")
        return frame

    def cmd_report(self, run_dirs: Sequence[str]) -> pd.DataFrame:
        """
        Compare the reports of several runs: report.csv and report.svg.

        Within each (dataset, environment) group the first row (the best baseline
        when one exists) is the reference every other row's Cohen's d is taken against.
        """
        if not run_dirs:
            raise ConfigError("report needs at least one run directory")
        self.setup_output(["report.csv", "report.svg"])
        db = ResultsDB()
        try:
            db.load_runs(run_dirs)
            frame = db.comparison()
        finally:
            db.close()

        frame["cohens_d"] = np.nan
        frame["effect"] = None
        for _, group in frame.groupby(["dataset", "environment"], sort=False):
            reference = json.loads(group.iloc[0]["accuracies"])
            for index in group.index[1:]:
                sample = json.loads(frame.loc[index, "accuracies"])
                try:
                    d = cohens_d(sample, reference)
                except ValueError as e:
                    logger.warning(f"Cohen's d undefined for {frame.loc[index, 'design']}: {str(e)}")
                    continue
                frame.loc[index, "cohens_d"] = d
                frame.loc[index, "effect"] = effect_size_label(d)

        frame["relative_drop"] = np.nan
        for index in frame.index[frame["kind"] == "degradation"]:
            row = frame.loc[index]
            source = frame[(frame["run"] == row["run"]) & (frame["design"] == row["design"])
                           & (frame["environment"] == "ideal")]
            if not source.empty and source.iloc[0]["mean"] > 0:
                frame.loc[index, "relative_drop"] = 1.0 - row["mean"] / source.iloc[0]["mean"]

        frame = frame.drop(columns=["accuracies"])
        frame.to_csv(self.path("report.csv"), index=False, float_format="%.10g")
        self._plot(frame)
        logger.info(f"✅ Report with {len(frame)} rows written to {self.path('report.csv')}")
        return frame

    def _plot(self, frame: pd.DataFrame) -> None:
        plt.rcParams['svg.hashsalt'] = 'report'
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(frame)), 4.0))
        labels = [f"{r.design}\n{r.dataset}/{r.environment}" for r in frame.itertuples()]
        colors = ["tab:blue" if env == "ideal" else "tab:red" for env in frame["environment"]]
        ax.bar(range(len(frame)), frame["mean"], yerr=frame["std"], capsize=4, color=colors)
        ax.set_xticks(range(len(frame)))
        ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
        ax.set_ylabel("Validation accuracy")
        ax.set_ylim(0.0, 1.0)
        fig.tight_layout()
        fig.savefig(self.path("report.svg"), format="svg", metadata={"Date": None})
        plt.close(fig)

    def run(self, run_dirs: Optional[Sequence[str]] = None) -> bool:
        """
        Run the configured command.

        Returns:
            bool: True on success, False when the command failed
        """
        commands = {
            "gen-data": self.cmd_gen_data,
            "baseline": self.cmd_baseline,
            "search": self.cmd_search_mo if self.rc.mode == "multi_objective" else self.cmd_search,
            "search-noisy": self.cmd_search,
            "search-mo": self.cmd_search_mo,
            "report": lambda: self.cmd_report(run_dirs or []),
        }
        if self.rc.command not in commands:
            logger.error(f"❌ Unknown command: {self.rc.command}")
            return False
        try:
            logger.info(f"===== {self.rc.command} ({self.rc.mode}, dataset {self.rc.dataset}) =====")
            commands[self.rc.command]()
            return True
        except ValueError as e:
            logger.error(f"❌ {self.rc.command} failed: {str(e)}")
            return False
        except OSError as e:
            logger.error(f"❌ {self.rc.command} could not write its artifacts: {str(e)}")
            return False
