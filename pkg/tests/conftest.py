import math

import numpy as np
import pytest

from hardylab import geometry
from hardylab.kernels import available_backends, load_backend


@pytest.fixture(params=available_backends())
def backend(request):
    return load_backend(request.param)


@pytest.fixture(scope="session")
def koch6():
    return geometry.build_koch_family(math.pi / 3, 6)


@pytest.fixture(scope="session")
def snowflake6():
    return geometry.build_snowflake_domain(math.pi / 3, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
