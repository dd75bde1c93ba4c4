"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .models import ModelParams


class Adam:
    """Standard Adam: first/second moment estimates with bias correction.

    Moment buffers are created lazily on the first step and live in the
    parameters' dtype.
    """

    def __init__(self, learning_rate: float = 1e-5, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        if learning_rate <= 0:
            raise ShapeError(f"learning_rate must be positive, got {learning_rate}")
        if not (0 < beta1 < 1 and 0 < beta2 < 1):
            raise ShapeError(f"betas must lie in (0, 1), got {beta1}, {beta2}")
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = epsilon
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray] | None = None) -> None:
        """Apply one update in place. Gradients default to each tensor's .grad."""
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, tensor in params.items():
            g = tensor.grad if grads is None else grads[name]
            if g is None:
                continue
            if g.shape != tensor.data.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, "
                                 f"parameter has {tensor.data.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(tensor.data)
                self.v[name] = np.zeros_like(tensor.data)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            m_hat = m / c1
            v_hat = v / c2
            tensor.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(tensor.data.dtype)
