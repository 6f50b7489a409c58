import numpy as np
import pytest

from edca11p.chain import CouplingState
from edca11p.config import load_scenario
from edca11p.params import EdcaConfig, derive_timing


@pytest.fixture(scope="session")
def edca_default():
    return EdcaConfig()


@pytest.fixture(scope="session")
def timing_default(edca_default):
    return derive_timing(edca_default)


@pytest.fixture(scope="session")
def highway():
    return load_scenario("highway.default")


@pytest.fixture(scope="session")
def highload():
    return load_scenario("highload")


def random_coupling(rng: np.random.Generator) -> CouplingState:
    """A valid random coupling state for property tests."""
    th_s = float(rng.uniform(0.0, 0.9))
    th_o = float(rng.uniform(th_s, 1.0))
    share = rng.dirichlet(np.ones(4))
    return CouplingState(
        theta=th_s * share,
        theta_hat_s=th_s,
        theta_hat_o=th_o,
        phi=rng.uniform(0.0, 1.0, 4),
        p_arr=rng.uniform(0.0, 1.0, 4),
        p_qe=rng.uniform(0.0, 1.0, 4),
        p_s=rng.uniform(0.0, 1.0, 4),
    )
