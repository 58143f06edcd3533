import numpy as np
import pytest

from optoread.config import load_config


@pytest.fixture(scope="session")
def cfg():
    return load_config()


@pytest.fixture(scope="session")
def transducer(cfg):
    return cfg.transducer


@pytest.fixture(scope="session")
def cqed(cfg):
    return cfg.cqed


@pytest.fixture(scope="session")
def max_eff_op(cfg):
    """Operating point of the highest-efficiency data set."""
    return cfg.operating_point()


def rand_positive(rng, lo, hi, n=None):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), n))
