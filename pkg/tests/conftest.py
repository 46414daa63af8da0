import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cns2d.corpus import random_band_limited
from cns2d.spectral import Grid

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def smooth_field(grid, seed, width=3.0, peak=1.0, max_mode=None):
    """Random real band-limited field resolved on ``grid``."""
    rng = np.random.default_rng(seed)
    M = max_mode or min(10, grid.n_points // 4)
    return random_band_limited(rng, M, width, grid.box_length, peak).sample(grid)


def rough_field(grid, seed):
    """White noise: every mode, including Nyquist, is populated."""
    return np.random.default_rng(seed).standard_normal((grid.n_points, grid.n_points))


@pytest.fixture
def grid32():
    return Grid(32)


@pytest.fixture
def grid64():
    return Grid(64)


# acceptance criteria: one line each, shown in the terminal summary
ACCEPTANCE_LINES = []


def report(number, name, passed, detail):
    line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
