"""Shared test utilities: the finite-difference gradient oracle."""

import numpy as np

from hyfuse import autodiff as ad
from hyfuse.autodiff import Tensor


def numeric_grads(f, arrays, eps=1e-5):
    """Central finite differences of the scalar f(arrays) w.r.t. every entry."""
    grads = [np.zeros_like(a) for a in arrays]
    for i in range(len(arrays)):
        for j in range(arrays[i].size):
            plus = [a.copy() for a in arrays]
            minus = [a.copy() for a in arrays]
            plus[i].flat[j] += eps
            minus[i].flat[j] -= eps
            grads[i].flat[j] = (f(plus) - f(minus)) / (2 * eps)
    return grads


def max_rel_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradcheck(build_loss, arrays, tol=1e-4, eps=1e-5):
    """Assert analytic gradients of build_loss(tensors) match finite differences.

    build_loss receives a list of float64 Tensors and returns a scalar Tensor.
    Returns the worst relative error observed.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    ts = [Tensor(a.copy(), requires_grad=True, dtype=np.float64) for a in arrays]
    loss = build_loss(ts)
    ad.backward(loss)

    def f(arrs):
        return float(build_loss([Tensor(a, dtype=np.float64) for a in arrs]).data)

    numeric = numeric_grads(f, arrays, eps=eps)
    worst = max_rel_error([t.grad for t in ts], numeric)
    assert worst < tol, f"gradient mismatch: max relative error {worst:.3e} >= {tol}"
    return worst
