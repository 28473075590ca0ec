import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rfsolve.train import TOY_DISTRIBUTIONS, MlpField, TrainConfig, train  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def mixture():
    return TOY_DISTRIBUTIONS["gaussian-mixture"]()


@pytest.fixture(scope="session")
def trained_mlp(mixture):
    """Default 3x64 tanh field trained on the two-component mixture (seed 0)."""
    model, losses = train(MlpField.init(2, seed=0), mixture, TrainConfig(steps=2000, seed=0))
    return model, losses


@pytest.fixture(scope="session")
def mlp_start(mixture):
    return mixture.sample(64, np.random.default_rng(1))


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"criterion {number:>3}: {'PASS' if passed else 'FAIL'}  {detail}")
        print(ACCEPTANCE_LINES[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
