import os

import numpy as np
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile("qcap", deadline=None, max_examples=40, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("quick", deadline=None, max_examples=10, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
# derandomized so a rare solver stall cannot make the suite flaky
settings.load_profile(os.environ.get("QCAP_HYPOTHESIS_PROFILE", "qcap"))

SEED = int(os.environ.get("QCAP_SEED", 0))


def random_hermitian(side, rng):
    g = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return (g + g.conj().T) / 2


def random_state(side, rng):
    g = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


seeds = st.integers(min_value=0, max_value=2 ** 31 - 1)
