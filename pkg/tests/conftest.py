import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dynlab.dynamics import DiskFlowField, ToralAutomorphism, field_X
from dynlab.flatness import bump_alpha
from dynlab.perturbation import chart_for

settings.register_profile("dynlab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dynlab")


@pytest.fixture(scope="session")
def system5():
    A = ToralAutomorphism(5)
    return A, field_X(DiskFlowField(), bump_alpha(), A.d)


@pytest.fixture(scope="session")
def chart5(system5):
    A, X = system5
    return chart_for(X, A, [0.3, 0.6], 0.04)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
