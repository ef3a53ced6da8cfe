import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, K, cond=20.0):
    """Random SPD matrix with eigenvalues spread over ``cond``."""
    q, _ = np.linalg.qr(rng.standard_normal((K, K)))
    lam = np.geomspace(1.0, 1.0 / cond, K)
    return (q * lam) @ q.T


def random_correlation(rng, K):
    c = random_spd(rng, K)
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    return 0.5 * (c + c.T)
