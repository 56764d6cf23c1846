import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)


def dense_lax(b):
    """Dense zero-diagonal Jacobi matrix from off-diagonal entries."""
    b = np.asarray(b, dtype=float)
    return np.diag(b, 1) + np.diag(b, -1)


def dense_v(B, n, k):
    """Independent oracle: V^(2k)_n by telescoping the diagonal of a dense
    matrix power of the truncated Jacobi matrix."""
    B = np.asarray(B, dtype=float)
    P = n + k
    ext = np.concatenate([B, np.zeros(max(P - len(B), 0))])
    L = dense_lax(np.sqrt(ext[: P - 1]))
    D = np.diagonal(np.linalg.matrix_power(L, 2 * k))
    return float(sum((-1) ** (n - j) * D[j - 1] for j in range(1, n + 1)))
