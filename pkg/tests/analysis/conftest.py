import numpy as np
import pytest

from analysis.charflow import compute_blowup
from analysis.sobolev import SampledField2D
from common.models import ProfileParams
from experiments.fields import bump

SCAN_POINTS = 20_000


@pytest.fixture(scope="session")
def default_flow():
    return compute_blowup(ProfileParams(), SCAN_POINTS)


@pytest.fixture
def make_flow():
    def _create_flow(**overrides):
        return compute_blowup(ProfileParams(**overrides), SCAN_POINTS)

    return _create_flow


@pytest.fixture
def make_field():
    def _create_field(n=64, half_width=2.0, padding=4, fn=None):
        fn = fn or (lambda x1, x2: bump(x1, 0.0, 1.5) * bump(x2, 0.0, 1.5))
        box = (-half_width, half_width)
        return SampledField2D.from_function(fn, box, box, n, n, padding=padding)

    return _create_field


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fd_flow():
    return compute_blowup(ProfileParams(epsilon=0.05), SCAN_POINTS)
