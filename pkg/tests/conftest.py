import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctxmatch import DistanceMatrix

# 7x5 worked example used throughout the golden tests (indices 0-based here;
# printed references use 1-based indexing)
FIG_MATRIX = np.array([
    [1.6, 2.5, 1.0, 4.0, 2.3],
    [4.2, 0.5, 1.7, 3.0, 1.1],
    [5.1, 3.5, 3.1, 1.2, 2.0],
    [2.8, 0.6, 2.1, 4.1, 5.0],
    [4.4, 3.4, 2.4, 4.3, 4.5],
    [3.2, 5.5, 5.8, 6.1, 3.6],
    [1.3, 6.0, 3.7, 2.7, 1.4],
])


@pytest.fixture
def fig_dist() -> DistanceMatrix:
    return DistanceMatrix(FIG_MATRIX)


def one_based(pairs):
    """Convert 0-based (i, j) pairs to the 1-based convention of the fixtures."""
    return [(i + 1, j + 1) for i, j in pairs]
