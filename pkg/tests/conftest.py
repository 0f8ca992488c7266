import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ultrapar.kernel import FrozenKernel
from ultrapar.structure import prototype, three_block

settings.register_profile("ultrapar", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ultrapar")


@pytest.fixture(scope="session")
def proto():
    return prototype()


@pytest.fixture(scope="session")
def tri():
    return three_block()


@pytest.fixture(scope="session", params=["prototype", "three_block"])
def structure(request):
    return prototype() if request.param == "prototype" else three_block()


@pytest.fixture(scope="session")
def kproto(proto):
    return FrozenKernel(proto)


@pytest.fixture(scope="session")
def ktri(tri):
    return FrozenKernel(tri)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
