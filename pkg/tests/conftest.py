import numpy as np
import pytest

from nnsort.datagen import generate
from nnsort.model import TrainConfig, train

PAPER_EXAMPLE = [32, 60, 31, 1, 81, 6, 88, 38, 3, 59, 37, 92, 91]


class TablePredictor:
    """Looks each key up in a fixed dict of logits."""

    def __init__(self, table):
        self.table = dict(table)

    def predict(self, keys):
        return np.array([self.table[float(k)] for k in np.atleast_1d(keys)], dtype=np.float64)


@pytest.fixture
def paper_example():
    return list(PAPER_EXAMPLE)


@pytest.fixture(scope="session")
def quick_uniform_model():
    """Briefly trained model on 1e5 uniform keys (training seed differs from test data)."""
    keys = generate("uniform", 100_000, seed=101)
    return train(keys, TrainConfig(epochs=20, rng_seed=3)).model, keys


@pytest.fixture(scope="session")
def quick_lognormal_model():
    keys = generate("lognormal", 20_000, seed=202)
    return train(keys, TrainConfig(epochs=40, rng_seed=3)).model


ACCEPTANCE_RESULTS = []


def record_criterion(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} {detail}".rstrip())
