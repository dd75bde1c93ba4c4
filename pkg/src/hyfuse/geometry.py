"""Curvature-parameterized Poincare-ball operations.

The three maps (exponential map at the origin, Moebius addition, logarithmic
map at the origin) are implemented exactly in the form used by the fusion
pipeline: the curvature scales the exponential map's argument, the log map
carries no curvature, and Moebius addition is the curvature-free gyrovector
form. Composing exp then log therefore scales by 2*curvature; at curvature
0.5 the round trip is the identity. That scaling is asserted by the test
suite rather than "fixed", since the pipeline is trained end to end and only
requires the maps to be smooth and stable.

All geometry is computed in float64. Ball membership is maintained by
projecting results to norm <= 1 - ball_epsilon. arctanh is evaluated through
its log form after clamping, so boundary points cannot produce infinities.

Plain functions operate on single vectors; the ``*_diff`` variants operate on
[batch, dim] Tensors and register analytic vector-Jacobian products with the
autodiff tape, including the true Jacobian of the projection where it is
active (the clamp is never treated as a gradient blocker).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, _accum, _make
from .errors import (
    BallDomainError,
    ConfigError,
    DegenerateDenominatorError,
    InvalidInputError,
    ShapeError,
)

ZERO_NORM_EPS = 1e-12
DENOM_EPS = 1e-12


@dataclass(frozen=True)
class PoincareConfig:
    """Curvature and clamp margin governing all ball operations."""

    curvature: float = 1.0
    ball_epsilon: float = 1e-5

    def __post_init__(self):
        if not (self.curvature > 0 and np.isfinite(self.curvature)):
            raise ConfigError(f"curvature must be a positive real, got {self.curvature}")
        if not 0 < self.ball_epsilon < 1e-2:
            raise ConfigError(f"ball_epsilon must lie in (0, 1e-2), got {self.ball_epsilon}")

    @property
    def max_norm(self) -> float:
        return 1.0 - self.ball_epsilon


@dataclass
class BallPoint:
    """A point strictly inside the unit ball."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidInputError(f"BallPoint coords must be a vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("BallPoint coords must be finite")
        if np.linalg.norm(arr) >= 1.0:
            raise BallDomainError(f"point norm {np.linalg.norm(arr)} is not < 1")
        self.coords = arr

    @property
    def dim(self) -> int:
        return self.coords.shape[0]


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _ball_coords(p, name: str) -> np.ndarray:
    if isinstance(p, BallPoint):
        return p.coords
    arr = _vector(p, name)
    if np.linalg.norm(arr) >= 1.0:
        raise BallDomainError(f"{name} has norm {np.linalg.norm(arr)}, not < 1")
    return arr


def _arctanh(r: np.ndarray) -> np.ndarray:
    # log form: 0.5 * ln((1+r)/(1-r)), stable for r bounded away from 1
    return 0.5 * (np.log1p(r) - np.log1p(-r))


def _row_norms(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(v, axis=1, keepdims=True)


# --- row kernels (float64, [N, D]); shared by the scalar API and the tape ops ---

def _project_rows(v: np.ndarray, cfg: PoincareConfig) -> tuple[np.ndarray, dict]:
    target = cfg.max_norm
    norms = _row_norms(v)
    over = norms[:, 0] > target
    if not over.any():
        return v, {"over": over, "norms": norms}
    out = v.copy()
    out[over] *= target / norms[over]
    # float rounding can leave a rescaled row a few ulps above the target;
    # nudge it down so projection is bit-exactly idempotent
    while True:
        new_norms = np.linalg.norm(out[over], axis=1)
        bad = new_norms > target
        if not bad.any():
            break
        rows = np.flatnonzero(over)[bad]
        out[rows] *= 1.0 - 1e-15
    return out, {"over": over, "norms": norms}


def _project_rows_vjp(g: np.ndarray, pre: np.ndarray, cache: dict, cfg: PoincareConfig) -> np.ndarray:
    over = cache["over"]
    if not over.any():
        return g
    out = g.copy()
    n = cache["norms"][over]
    u = pre[over] / n
    gdot = np.sum(u * g[over], axis=1, keepdims=True)
    out[over] = (cfg.max_norm / n) * (g[over] - gdot * u)
    return out


def _exp_rows(x: np.ndarray, cfg: PoincareConfig) -> tuple[np.ndarray, dict]:
    norms = _row_norms(x)
    small = norms[:, 0] < ZERO_NORM_EPS
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    pre = x * (np.tanh(cfg.curvature * norms) / safe)
    pre[small] = 0.0
    out, proj = _project_rows(pre, cfg)
    return out, {"x": x, "norms": norms, "small": small, "pre": pre, "proj": proj}


def _exp_rows_vjp(g: np.ndarray, cache: dict, cfg: PoincareConfig) -> np.ndarray:
    g = _project_rows_vjp(g, cache["pre"], cache["proj"], cfg)
    x, norms, small = cache["x"], cache["norms"], cache["small"]
    k = cfg.curvature
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    u = x / safe
    s = np.tanh(k * norms)
    gdot = np.sum(u * g, axis=1, keepdims=True)
    radial = k * (1.0 - s * s) * gdot
    out = (s / safe) * (g - gdot * u) + radial * u
    out[small] = k * g[small]  # Jacobian limit at the origin is k * identity
    return out


def _log_rows(y: np.ndarray, cfg: PoincareConfig) -> tuple[np.ndarray, dict]:
    norms = _row_norms(y)
    if (norms[:, 0] >= 1.0).any():
        raise BallDomainError("log map input has norm >= 1; upstream projection failed")
    small = norms[:, 0] < ZERO_NORM_EPS
    clamped = np.minimum(norms, cfg.max_norm)
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    out = y * (2.0 * _arctanh(clamped) / safe)
    out[small] = 0.0
    return out, {"y": y, "norms": norms, "small": small}


def _log_rows_vjp(g: np.ndarray, cache: dict, cfg: PoincareConfig) -> np.ndarray:
    y, norms, small = cache["y"], cache["norms"], cache["small"]
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    u = y / safe
    a = _arctanh(np.minimum(norms, cfg.max_norm))
    gdot = np.sum(u * g, axis=1, keepdims=True)
    out = (2.0 * a / safe) * (g - gdot * u) + (2.0 / (1.0 - norms * norms)) * gdot * u
    out[small] = 2.0 * g[small]  # Jacobian limit at the origin is 2 * identity
    return out


def _mobius_rows(x: np.ndarray, y: np.ndarray, cfg: PoincareConfig) -> tuple[np.ndarray, dict]:
    dot = np.sum(x * y, axis=1, keepdims=True)
    nx2 = np.sum(x * x, axis=1, keepdims=True)
    ny2 = np.sum(y * y, axis=1, keepdims=True)
    alpha = 1.0 + 2.0 * dot + ny2
    beta = 1.0 - nx2
    den = 1.0 + 2.0 * dot + nx2 * ny2
    if (np.abs(den[:, 0]) < DENOM_EPS).any():
        raise DegenerateDenominatorError("Moebius addition denominator below 1e-12")
    pre = (alpha * x + beta * y) / den
    out, proj = _project_rows(pre, cfg)
    return out, {"x": x, "y": y, "alpha": alpha, "beta": beta, "den": den,
                 "nx2": nx2, "ny2": ny2, "pre": pre, "proj": proj}


def _mobius_rows_vjp(g: np.ndarray, cache: dict, cfg: PoincareConfig) -> tuple[np.ndarray, np.ndarray]:
    g = _project_rows_vjp(g, cache["pre"], cache["proj"], cfg)
    x, y = cache["x"], cache["y"]
    alpha, beta, den = cache["alpha"], cache["beta"], cache["den"]
    nx2, ny2, pre = cache["nx2"], cache["ny2"], cache["pre"]

    g_num = g / den
    g_den = -np.sum(g * pre, axis=1, keepdims=True) / den
    xg = np.sum(x * g_num, axis=1, keepdims=True)
    yg = np.sum(y * g_num, axis=1, keepdims=True)

    gx = alpha * g_num + 2.0 * xg * y - 2.0 * yg * x + g_den * (2.0 * y + 2.0 * x * ny2)
    gy = beta * g_num + 2.0 * xg * (x + y) + g_den * (2.0 * x + 2.0 * y * nx2)
    return gx, gy


# --- plain single-vector API ---

def project_to_ball(v, cfg: PoincareConfig) -> BallPoint:
    """Return v unchanged if its norm is <= 1 - ball_epsilon, else rescale to exactly that norm."""
    arr = _vector(v, "v")
    out, _ = _project_rows(arr[None, :], cfg)
    return BallPoint(out[0])


def exp_map_zero(x, cfg: PoincareConfig) -> BallPoint:
    """tanh(curvature * ||x||) * x/||x|| (zero at the origin), projected into the ball."""
    arr = _vector(x, "x")
    out, _ = _exp_rows(arr[None, :], cfg)
    return BallPoint(out[0])


def log_map_zero(y, cfg: PoincareConfig) -> np.ndarray:
    """2 * arctanh(||y||) * y/||y|| (zero at the origin)."""
    arr = _ball_coords(y, "y")
    out, _ = _log_rows(arr[None, :], cfg)
    return out[0]


def mobius_add(x, y, cfg: PoincareConfig) -> BallPoint:
    """Gyrovector addition of two ball points, projected back into the ball."""
    xa = _ball_coords(x, "x")
    ya = _ball_coords(y, "y")
    if xa.shape != ya.shape:
        raise ShapeError(f"mobius_add: shapes {xa.shape} and {ya.shape} differ")
    out, _ = _mobius_rows(xa[None, :], ya[None, :], cfg)
    return BallPoint(out[0])


# --- differentiable batched counterparts ---

def _check_batch(t: Tensor, name: str) -> np.ndarray:
    if t.data.ndim != 2:
        raise ShapeError(f"{name} must be [batch, dim], got {t.shape}")
    arr = t.data.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def exp_map_zero_diff(x: Tensor, cfg: PoincareConfig) -> Tensor:
    arr = _check_batch(x, "exp_map input")
    out, cache = _exp_rows(arr, cfg)

    def backward(g):
        _accum(x, _exp_rows_vjp(g.astype(np.float64, copy=False), cache, cfg))

    return _make(out.astype(x.dtype), (x,), backward)


def log_map_zero_diff(y: Tensor, cfg: PoincareConfig) -> Tensor:
    arr = _check_batch(y, "log_map input")
    out, cache = _log_rows(arr, cfg)

    def backward(g):
        _accum(y, _log_rows_vjp(g.astype(np.float64, copy=False), cache, cfg))

    return _make(out.astype(y.dtype), (y,), backward)


def mobius_add_diff(x: Tensor, y: Tensor, cfg: PoincareConfig) -> Tensor:
    xa = _check_batch(x, "mobius_add left operand")
    ya = _check_batch(y, "mobius_add right operand")
    if xa.shape != ya.shape:
        raise ShapeError(f"mobius_add: shapes {xa.shape} and {ya.shape} differ")
    out, cache = _mobius_rows(xa, ya, cfg)

    def backward(g):
        gx, gy = _mobius_rows_vjp(g.astype(np.float64, copy=False), cache, cfg)
        _accum(x, gx)
        _accum(y, gy)

    return _make(out.astype(x.dtype), (x, y), backward)
