"""Dense float64 matrix helpers shared by the network, the costs and the data tools.

Matrices are plain 2-D ``numpy.ndarray`` objects with one example per row.
"""

import numpy as np

BN_EPS = 1e-6


class ShapeError(ValueError):
    pass


def as_matrix(a):
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def matmul(a, b):
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def softmax_rows(z):
    """Row-wise softmax with max subtraction, so large logits never overflow."""
    z = as_matrix(z)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def batch_moments(z):
    """Per-column population mean and variance (divides by the row count)."""
    z = as_matrix(z)
    if z.shape[0] == 0:
        raise ShapeError("batch_moments needs at least one row")
    mean = z.mean(axis=0)
    var = ((z - mean) ** 2).mean(axis=0)
    return mean, var


def make_rng(seed):
    return np.random.default_rng(seed)


def sample_gaussian(rng, rows, cols, sigma):
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return np.zeros((rows, cols))
    return rng.normal(0.0, sigma, size=(rows, cols))
