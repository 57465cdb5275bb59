"""Central finite-difference oracle for gradient tests."""

import numpy as np


def central_difference(f, x, step=1e-5):
    """Numerical gradient of scalar f at x, one coordinate at a time."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    base = x.copy()
    for i in range(x.size):
        original = base.ravel()[i]
        base.ravel()[i] = original + step
        plus = f(base)
        base.ravel()[i] = original - step
        minus = f(base)
        base.ravel()[i] = original
        flat[i] = (plus - minus) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric):
    """Largest coordinate gap, normalized by the overall gradient scale so
    noise on near-zero coordinates does not dominate.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / scale)
