import numpy as np
import pytest

from pilotwave import schrodinger as S
from pilotwave.grid import GridSpec, WaveFunction, normalize


@pytest.fixture(scope="session")
def ho_grid():
    return GridSpec.uniform(-10.0, 10.0, 256)


@pytest.fixture(scope="session")
def ho(ho_grid):
    return S.harmonic(ho_grid)


@pytest.fixture(scope="session")
def ho_states(ho):
    """First four harmonic-oscillator eigenpairs (energy, state)."""
    return [S.stationary_state(ho, n) for n in range(4)]


def gaussian(grid, x0=0.0, sigma=1.0, k=0.0):
    x = grid.axis(0)
    v = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * k * x)
    return normalize(WaveFunction(grid, v))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip(":")), s)):
            terminalreporter.write_line(line)
