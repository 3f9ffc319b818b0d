import json
from pathlib import Path

import numpy as np
import pytest

from dualrail.params import paper_params, zero_error_params

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def paper():
    return paper_params()


@pytest.fixture(scope="session")
def zero():
    return zero_error_params()


@pytest.fixture(scope="session")
def golden_pulses():
    return json.loads((DATA / "golden_pulse_errors.json").read_text())


def random_density(dim: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = X @ X.conj().T
    return rho / np.trace(rho)


ACCEPTANCE_LINES: dict = {}  # criterion number -> printed lines


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance scorecard")
        for n in sorted(ACCEPTANCE_LINES):
            for line in ACCEPTANCE_LINES[n]:
                terminalreporter.write_line(line)
