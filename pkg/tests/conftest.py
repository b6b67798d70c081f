import numpy as np
import pytest

from logsparse import Setup

EXAMPLE_A = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0]])
EXAMPLE_B = np.array([1.0, 0.0])


@pytest.fixture(autouse=True)
def setup(tmp_path):
    """Every test writes into its own output folder."""
    return Setup(out_dir=str(tmp_path / "out"))


@pytest.fixture
def example_system():
    return EXAMPLE_A.copy(), EXAMPLE_B.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
