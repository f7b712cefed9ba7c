import numpy as np
import pytest

from geomediate.core_model import Dataset


def make_dataset(n=60, p=3, seed=0, names=None, coord_system="planar_meters"):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 1000, (n, 2))
    X = rng.standard_normal((n, p))
    m = X @ rng.uniform(0.2, 0.8, p) + rng.standard_normal(n) * 0.5
    y = X @ rng.uniform(-0.4, 0.4, p) + 0.6 * m + rng.standard_normal(n) * 0.5
    names = names or tuple(f"x{j + 1}" for j in range(p))
    return Dataset(coords=coords, predictors=X, predictor_names=tuple(names), mediator=m,
                   outcome=y, mediator_name="M", outcome_name="y")


@pytest.fixture
def small_data():
    return make_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
