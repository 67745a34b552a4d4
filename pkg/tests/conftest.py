import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, n_max, rank=3):
    """Random full-rank-ish density matrix on 0..n_max (test helper)."""
    a = rng.normal(size=(n_max + 1, rank)) + 1j * rng.normal(size=(n_max + 1, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real
