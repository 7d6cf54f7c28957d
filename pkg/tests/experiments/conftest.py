import pytest

from analysis.charflow import compute_blowup
from common.config import BlowupConfig, DyadicConfig
from common.metrics import REGISTRY

SCAN_POINTS = 20_000

FAST_CONFIG = """
[grids]
scan_points = 20000

[geometry]
v_samples = 5
boundary_points = 2000
n_curves = 50
n_segments = 16
appendix_samples = 100
appendix_eps = [1e-3, 1e-4]
width_points = 31
clearance_points = 5

[fdcheck]
refinements = [16, 32, 64]
"""


@pytest.fixture(scope="session")
def blowup_flow():
    return compute_blowup(BlowupConfig().params, SCAN_POINTS)


@pytest.fixture
def small_dyadic():
    def _create_dyadic(**overrides):
        values = {
            "epsilon": 1e-7,
            "j_min": 4,
            "j_max": 7,
            "n1": 64,
            "n2": 32,
            "translation_j": 5,
            "uniformity_eps": [1e-3, 1e-4],
        }
        values.update(overrides)
        return DyadicConfig(**values)

    return _create_dyadic


@pytest.fixture
def fast_config(make_config):
    return make_config(FAST_CONFIG)


@pytest.fixture
def metric_value():
    def _get_value(name, **labels):
        return REGISTRY.get_sample_value(name, labels) or 0.0

    return _get_value
