"""
Dataset manager.
Generates the synthetic benchmark, loads the bundled Iris fixture, scales features
into rotation angles and reads / writes dataset CSV files.
"""

import os
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from logzero import logger
from sklearn.datasets import make_classification
from sklearn.preprocessing import MinMaxScaler

from src.config_manager import PROJECT_ROOT, config


class DatasetError(ValueError):
    """Raised for missing, malformed or inconsistent datasets."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with integer labels 0..n_classes-1."""
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels).astype(np.int64)
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
            raise DatasetError(f"{self.name}: features {features.shape} and labels {labels.shape} do not match")
        if not np.all(np.isfinite(features)):
            raise DatasetError(f"{self.name}: non-finite feature values")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DatasetError(f"{self.name}: labels must lie in 0..{self.n_classes - 1}")
        missing = set(range(self.n_classes)) - set(labels.tolist())
        if missing:
            raise DatasetError(f"{self.name}: classes {sorted(missing)} have no samples")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def histogram(self) -> Dict[int, int]:
        return {c: int(np.sum(self.labels == c)) for c in range(self.n_classes)}

    def with_features(self, features: np.ndarray) -> 'Dataset':
        return Dataset(features, self.labels, self.n_classes, self.name)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=[f"f{i}" for i in range(self.n_features)])
        frame["label"] = self.labels
        return frame

    def to_csv(self, path: str) -> None:
        self.to_frame().to_csv(path, index=False)
        logger.info(f"✅ Wrote {self.n_samples} rows of {self.name} to {path}")

    @classmethod
    def from_csv(cls, path: str, name: Optional[str] = None, n_classes: Optional[int] = None) -> 'Dataset':
        """Read a CSV with feature columns f0..fN and a label column."""
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError as e:
            raise DatasetError(f"dataset file not found: {path}") from e
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DatasetError(f"cannot parse {path}: {str(e)}") from e
        if "label" not in frame.columns:
            raise DatasetError(f"{path} has no label column")
        feature_columns = [c for c in frame.columns if c != "label"]
        if not feature_columns or any(not c.startswith("f") for c in feature_columns):
            raise DatasetError(f"{path} must have feature columns f0..fN before the label column")
        labels = frame["label"].to_numpy()
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if labels.size else 0
        name = name or os.path.splitext(os.path.basename(path))[0]
        return cls(frame[feature_columns].to_numpy(dtype=float), labels, n_classes, name)


def gen_synthetic(seed: Optional[int] = None) -> Dataset:
    """
    Synthetic binary benchmark.

    Two informative features hold unit-variance Gaussian clusters centred on the
    vertices of a square of side 2 * class_sep, two clusters per class. Two
    redundant features are random linear combinations of the informative ones
    plus Gaussian noise. Rows are shuffled.

    Args:
        seed: Generator seed, the configured default when omitted

    Returns:
        Dataset: 1000 x 4 features with a 650 / 350 label split by default
    """
    params = config.get('data', 'synthetic') or {}
    seed = params.get('seed', 42) if seed is None else seed
    features, labels = make_classification(
        n_samples=params.get('n_samples', 1000),
        n_features=params.get('n_features', 4),
        n_informative=params.get('n_informative', 2),
        n_redundant=params.get('n_redundant', 2),
        n_repeated=0,
        n_classes=2,
        n_clusters_per_class=2,
        weights=params.get('weights', [0.65, 0.35]),
        flip_y=params.get('flip_y', 0.0),
        class_sep=params.get('class_sep', 0.4),
        hypercube=True,
        shuffle=False,
        random_state=seed,
    )
    rng = np.random.default_rng(seed)
    n_informative = params.get('n_informative', 2)
    redundant = slice(n_informative, n_informative + params.get('n_redundant', 2))
    features[:, redundant] += rng.normal(0.0, params.get('redundant_noise', 0.1), features[:, redundant].shape)

    order = rng.permutation(features.shape[0])
    dataset = Dataset(features[order], labels[order], 2, "synthetic")
    logger.debug(f"Generated synthetic dataset with seed {seed}: {dataset.histogram()}")
    return dataset


def load_iris(path: Optional[str] = None) -> Dataset:
    """
    Load the bundled Iris fixture (Setosa=0, Versicolour=1, Virginica=2).

    Args:
        path: CSV path, the configured fixture when omitted
    """
    path = path or os.path.join(PROJECT_ROOT, config.get('fixtures', 'iris') or 'data/iris.csv')
    dataset = Dataset.from_csv(path, name="iris", n_classes=3)
    if dataset.features.shape != (150, 4):
        raise DatasetError(f"iris fixture must be 150 x 4, got {dataset.features.shape}")
    return dataset


def load_dataset(name: str) -> Dataset:
    """Dataset by name (iris, synthetic) or CSV path."""
    if name == "iris":
        return load_iris()
    if name == "synthetic":
        return gen_synthetic()
    return Dataset.from_csv(name)


@dataclass(frozen=True, eq=False)
class ScalingParams:
    """Per-feature min-max map fitted on training rows."""
    scaler: MinMaxScaler
    lo: float
    hi: float

    @property
    def data_min(self) -> np.ndarray:
        return self.scaler.data_min_

    @property
    def data_max(self) -> np.ndarray:
        return self.scaler.data_max_

    def transform(self, features: np.ndarray) -> np.ndarray:
        """Map onto [lo, hi], clamping values outside the fitted range; constant features go to the midpoint."""
        scaled = self.scaler.transform(np.asarray(features, dtype=float))
        constant = self.scaler.data_range_ == 0
        scaled[:, constant] = (self.lo + self.hi) / 2
        return scaled


def scale_features(ds: Dataset, fit_rows: Sequence[int], lo: Optional[float] = None,
                   hi: Optional[float] = None) -> Tuple[Dataset, ScalingParams]:
    """
    Min-max scale every feature into [lo, hi] using statistics of ``fit_rows`` only.

    Args:
        ds: Dataset to scale
        fit_rows: Row indices the map is fitted on (training rows)
        lo: Lower bound, configured default 0
        hi: Upper bound, configured default pi

    Returns:
        Tuple[Dataset, ScalingParams]: Scaled dataset (all rows) and the fitted map
    """
    if lo is None:
        lo = config.get('data', 'scaling', 'lo') or 0.0
    if hi is None:
        hi = config.get('data', 'scaling', 'hi') or np.pi
    fit_rows = np.asarray(fit_rows, dtype=np.int64)
    if fit_rows.size == 0:
        raise DatasetError("fit_rows must not be empty")
    if not lo < hi:
        raise DatasetError(f"scaling range [{lo}, {hi}] is empty")
    scaler = MinMaxScaler(feature_range=(lo, hi), clip=True).fit(ds.features[fit_rows])
    params = ScalingParams(scaler, float(lo), float(hi))
    return ds.with_features(params.transform(ds.features)), params
