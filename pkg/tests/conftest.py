import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def complex_gaussian(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def informative_fixture(rng, per_class=100, n_attrs=8, informative=(1, 2)):
    """Three classes separable only by the two ``informative`` columns.

    Boxes: class 0 has a in [0,1], b in [0,3]; class 1 a in [2,3], b in [0,1];
    class 2 a in [2,3], b in [2,3]. Neither column alone separates all three.
    Every other column is an independent permutation of uniform noise.
    """
    lo = np.array([[0, 0], [2, 0], [2, 2]], dtype=float)
    hi = np.array([[1, 3], [3, 1], [3, 3]], dtype=float)
    y = np.repeat(np.arange(3), per_class)
    m = len(y)
    x = np.empty((m, n_attrs))
    pts = lo[y] + rng.random((m, 2)) * (hi[y] - lo[y])
    x[:, informative[0]] = pts[:, 0]
    x[:, informative[1]] = pts[:, 1]
    for j in range(n_attrs):
        if j not in informative:
            x[:, j] = rng.permutation(rng.random(m) * 3)
    return x, y
