import numpy as np
import pytest

from ladderlid import kernels
from ladderlid.ladder import LadderConfig, LadderParams


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=kernels.available())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def small_net(sizes=(4, 5, 3), sigma=0.5, seed=0, lateral=(0,), lambdas=None):
    config = LadderConfig(list(sizes), sigma, lambdas, lateral)
    params = LadderParams.init(config, np.random.default_rng(seed))
    return config, params


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
