import numpy as np
import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance: end-to-end acceptance runs (slow, fixed seeds)")


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)
