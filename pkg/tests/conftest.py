"""Shared fixtures for the test suite."""

import os
import sys

import numpy as np
import pytest

# Add the project root to the path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.config_manager import PROJECT_ROOT
from src.data_manager import Dataset, load_iris
from src.transpiler import load_backend_snapshot

MANILA_PATH = os.path.join(PROJECT_ROOT, 'backends', 'manila.json')


@pytest.fixture(scope="session")
def manila():
    return load_backend_snapshot(MANILA_PATH)


@pytest.fixture(scope="session")
def iris():
    return load_iris()


@pytest.fixture
def tiny_dataset():
    """24 rows, 4 features, two well separated classes."""
    rng = np.random.default_rng(3)
    centers = np.array([[0.2, 0.2, 0.8, 0.8], [0.8, 0.8, 0.2, 0.2]])
    labels = np.repeat([0, 1], 12)
    features = centers[labels] + rng.normal(0.0, 0.05, (24, 4))
    return Dataset(features, labels, 2, "tiny")
