import numpy as np
import pytest


def random_stable(rng, p, symmetric=False, margin=0.1):
    """Random matrix whose symmetric part is negative definite with the given margin."""
    M = rng.standard_normal((p, p)) / np.sqrt(p)
    if symmetric:
        M = 0.5 * (M + M.T)
    sym = 0.5 * (M + M.T)
    top = np.linalg.eigvalsh(sym)[-1]
    return M - (top + margin) * np.eye(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
