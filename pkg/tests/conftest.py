import numpy as np
import pytest

from qftmpo.tensor import TruncationPolicy


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


@pytest.fixture
def exact_policy():
    return TruncationPolicy(rel_cutoff=1e-14)


def random_state(rng, n):
    vec = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return vec / np.linalg.norm(vec)


def random_unitary(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(a)
    return q * (np.diag(r) / np.abs(np.diag(r)))
