import numpy as np
import pytest

from services.model import PhysicalParams, coupling_for_cooperativity, homogeneous_ensemble


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="Запуск долгих проверок")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="нужен --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def params():
    """κ = 2π·1 МГц, γ_h = 2π·0.5 МГц"""
    return PhysicalParams()


@pytest.fixture
def c14_ensemble(params):
    n = 100
    return homogeneous_ensemble(n, coupling_for_cooperativity(14.0, n, params))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
