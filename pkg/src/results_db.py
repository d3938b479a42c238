"""
Results database for DuckDB operations.
Collects the evaluation reports of several run directories and builds the
comparison table of the report command with SQL.
"""

import json
import os
from typing import List, Optional, Sequence

import duckdb
import pandas as pd
from logzero import logger

from src.config_manager import ConfigError
from src.models import EvalReport

REPORTS_FILE = "reports.jsonl"


def read_reports(run_dir: str) -> List[EvalReport]:
    """Evaluation reports a run directory recorded, in write order."""
    path = os.path.join(run_dir, REPORTS_FILE)
    if not os.path.exists(path):
        raise ConfigError(f"missing run artifact: {path}")
    with open(path, 'r') as f:
        return [EvalReport.model_validate_json(line) for line in f if line.strip()]


class ResultsDB:
    """In-memory DuckDB holding evaluation reports of one or more runs."""

    def __init__(self, db_path: Optional[str] = None):
        """
        Initialize database connection.

        Args:
            db_path: Optional database file, in-memory when omitted
        """
        self.db_path = db_path or ':memory:'
        self.conn = duckdb.connect(self.db_path)
        self._init_tables()

    def _init_tables(self):
        """Initialize required database tables."""
        self.conn.execute("""
            CREATE TABLE IF NOT EXISTS reports (
                run VARCHAR,
                run_order INTEGER,
                seq INTEGER,
                kind VARCHAR,       -- 'baseline', 'search', 'multi_objective' or 'degradation'
                dataset VARCHAR,
                design VARCHAR,
                environment VARCHAR,  -- 'ideal' or 'noisy'
                mean DOUBLE,
                std DOUBLE,
                k INTEGER,
                seeds INTEGER,
                complexity DOUBLE,
                accuracies VARCHAR  -- JSON list of every fold accuracy
            )
        """)

    def load_runs(self, run_dirs: Sequence[str]) -> int:
        """
        Load the reports of every run directory.

        Returns:
            int: Number of reports loaded
        """
        rows = []
        for run_order, run_dir in enumerate(run_dirs):
            for seq, report in enumerate(read_reports(run_dir)):
                rows.append({
                    "run": os.path.basename(os.path.normpath(run_dir)),
                    "run_order": run_order,
                    "seq": seq,
                    "kind": report.kind,
                    "dataset": report.dataset,
                    "design": report.ansatz_id,
                    "environment": report.mode,
                    "mean": report.mean,
                    "std": report.std,
                    "k": report.k,
                    "seeds": report.n_seeds,
                    "complexity": report.complexity,
                    "accuracies": json.dumps(report.accuracies),
                })
        if not rows:
            raise ConfigError("no evaluation reports found in the given runs")
        incoming = pd.DataFrame(rows)
        self.conn.register('incoming', incoming)
        self.conn.execute("INSERT INTO reports SELECT * FROM incoming")
        self.conn.unregister('incoming')
        logger.info(f"✅ Loaded {len(rows)} reports from {len(run_dirs)} runs")
        return len(rows)

    def comparison(self) -> pd.DataFrame:
        """
        Rows of the comparison table.

        Baselines are reduced to the best template per (dataset, environment); that
        row comes first in its group and serves as the group's reference. Groups
        without baselines keep their rows in run order.
        """
        return self.conn.execute("""
            WITH ranked AS (
                SELECT *,
                       ROW_NUMBER() OVER (
                           PARTITION BY dataset, environment, kind = 'baseline'
                           ORDER BY mean DESC, run_order, seq
                       ) AS rank_in_kind
                FROM reports
            )
            SELECT run, kind, dataset, design, environment, mean, std, k, seeds, complexity, accuracies
            FROM ranked
            WHERE kind <> 'baseline' OR rank_in_kind = 1
            ORDER BY dataset, environment, kind <> 'baseline', run_order, seq
        """).fetchdf()

    def close(self):
        """Close database connection."""
        self.conn.close()
