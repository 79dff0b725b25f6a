import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dged.kernels import iter_builtin_fixtures
from dged.state import ConcentrationState, Variant

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BUILTINS = list(iter_builtin_fixtures())
VARIANTS = [Variant.ISOLATED, Variant.NON_ISOLATED]


def state_of(values, variant=Variant.ISOLATED, t=0.0):
    return ConcentrationState(np.asarray(values, dtype=float), t, variant)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
