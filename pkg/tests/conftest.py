import numpy as np
import pytest

from gsde_lse.simulate import GridConfig, ScenarioPath, SamplePath, ou_model
from gsde_lse.sublinear import VarianceInterval


@pytest.fixture
def ou():
    return ou_model(1.0, VarianceInterval(0.5, 1.0), theta_set=(0.1, 5.0))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


def make_path(values, dt, sigma2=1.0):
    values = np.asarray(values, dtype=float)
    n = len(values) - 1
    return SamplePath(np.arange(n + 1) * dt, values, np.diff(values), ScenarioPath.constant(sigma2, n))
