import math

import numpy as np
import pytest

from unstable_entropy import (build_grid, build_linear_model, build_shift_model,
                              build_unstable_scheme, lebesgue, measure_for)
from unstable_entropy.partitions import CylinderPartition

LOG_LAMBDA = math.log((3 + math.sqrt(5)) / 2)
LAMBDA = (3 + math.sqrt(5)) / 2


@pytest.fixture(scope="session")
def cat():
    return build_linear_model([[2, 1], [1, 1]])


@pytest.fixture(scope="session")
def grid10():
    return build_grid(10, 0.15)


@pytest.fixture(scope="session")
def cat_scheme(cat, grid10):
    return build_unstable_scheme(cat, grid10)


@pytest.fixture(scope="session")
def leb():
    return lebesgue()


@pytest.fixture(scope="session")
def coin():
    return build_shift_model(probabilities=[0.5, 0.5])


@pytest.fixture(scope="session")
def biased():
    return build_shift_model(probabilities=[0.75, 0.25])


@pytest.fixture(scope="session")
def markov():
    return build_shift_model(transition=[[0.9, 0.1], [0.4, 0.6]])


def shift_setup(model, block_length=1):
    xi = CylinderPartition(model.alphabet_size, block_length)
    scheme = build_unstable_scheme(model, CylinderPartition(model.alphabet_size, 1))
    return measure_for(model), xi, scheme


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_criterion(number: int, ok: bool, detail: str):
    """Print and keep one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
