"""Minimal reverse-mode automatic differentiation over dense tensors.

A Tensor wraps a numpy array plus an optional gradient buffer. Operations
build an implicit tape (each result remembers its parents and a closure that
propagates the upstream gradient); ``backward`` walks that tape once in
reverse topological order. A consumed tape cannot be walked twice.

Dtype policy: weights and activations may be float32 or float64. Reductions
(matmul, convolution, sums) accumulate in float64 and cast back to the
operand dtype, so float32 training stays stable while float64 tensors give
full-precision gradients for finite-difference checks.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidLabelError, ShapeError, StaleTapeError

_FLOAT_DTYPES = (np.float32, np.float64)


class Tensor:
    """Dense n-d array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Wrap an op result, recording tape structure only where gradients flow."""
    needs = any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    if needs:
        out._parents = tuple(p for p in parents if p.requires_grad)
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t.grad += g.astype(t.data.dtype, copy=False)


def _f64(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float64, copy=False)


# --- elementwise and reduction ops ---

def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
    out_data = a.data + b.data

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return _make(out_data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    out_data = a.data * b.data

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _make(out_data, (a, b), backward)


def sum_all(a: Tensor) -> Tensor:
    out_data = np.asarray(np.sum(_f64(a.data)), dtype=a.dtype)

    def backward(g):
        _accum(a, np.broadcast_to(g, a.shape))

    return _make(out_data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def backward(g):
        _accum(a, g * (a.data > 0))

    return _make(out_data, (a,), backward)


# --- shape ops ---

def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _make(out_data, (a,), backward)


def flatten(a: Tensor) -> Tensor:
    """Collapse all axes after the batch axis: [B, ...] -> [B, rest]."""
    if a.data.ndim < 2:
        raise ShapeError(f"flatten: need at least 2 axes, got shape {a.shape}")
    return reshape(a, (a.shape[0], -1))


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two [B, n] tensors along the feature axis."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat: incompatible shapes {a.shape} and {b.shape}")
    out_data = np.concatenate([a.data, b.data], axis=1)
    na = a.shape[1]

    def backward(g):
        _accum(a, g[:, :na])
        _accum(b, g[:, na:])

    return _make(out_data, (a, b), backward)


# --- affine and convolution ---

def dense(inp: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map inp @ weight.T + bias for inp [B, n], weight [m, n], bias [m]."""
    if inp.data.ndim != 2 or weight.data.ndim != 2 or inp.shape[1] != weight.shape[1]:
        raise ShapeError(f"dense: input {inp.shape} incompatible with weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense: bias {bias.shape} incompatible with weight {weight.shape}")
    dtype = np.result_type(inp.dtype, weight.dtype)
    out_data = (_f64(inp.data) @ _f64(weight.data).T + _f64(bias.data)).astype(dtype)

    def backward(g):
        g64 = _f64(g)
        _accum(inp, g64 @ _f64(weight.data))
        _accum(weight, g64.T @ _f64(inp.data))
        _accum(bias, g64.sum(axis=0))

    return _make(out_data, (inp, weight, bias), backward)


def conv1d(inp: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation, stride 1.

    inp [B, C_in, L], weight [C_out, C_in, K], bias [C_out] -> [B, C_out, L-K+1].
    """
    if inp.data.ndim != 3 or weight.data.ndim != 3:
        raise ShapeError(f"conv1d: input {inp.shape} and weight {weight.shape} must be 3-d")
    batch, c_in, length = inp.shape
    c_out, wc_in, kernel = weight.shape
    if wc_in != c_in:
        raise ShapeError(f"conv1d: input channels {c_in} != weight channels {wc_in} "
                         f"(input {inp.shape}, weight {weight.shape})")
    if kernel > length:
        raise ShapeError(f"conv1d: kernel {kernel} exceeds length {length} "
                         f"(input {inp.shape}, weight {weight.shape})")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv1d: bias {bias.shape} incompatible with weight {weight.shape}")
    dtype = np.result_type(inp.dtype, weight.dtype)

    windows = np.lib.stride_tricks.sliding_window_view(_f64(inp.data), kernel, axis=2)
    # windows: [B, C_in, L_out, K]
    out_data = np.einsum("bclk,ock->bol", windows, _f64(weight.data), optimize=True)
    out_data = (out_data + _f64(bias.data)[None, :, None]).astype(dtype)

    def backward(g):
        g64 = _f64(g)
        _accum(weight, np.einsum("bclk,bol->ock", windows, g64, optimize=True))
        _accum(bias, g64.sum(axis=(0, 2)))
        if inp.requires_grad:
            # dL/dinp is the full correlation of g with the kernel-reversed weights
            gpad = np.pad(g64, ((0, 0), (0, 0), (kernel - 1, kernel - 1)))
            gwin = np.lib.stride_tricks.sliding_window_view(gpad, kernel, axis=2)
            wrev = _f64(weight.data)[:, :, ::-1]
            _accum(inp, np.einsum("bosk,ock->bcs", gwin, wrev, optimize=True))

    return _make(out_data, (inp, weight, bias), backward)


# --- loss and regularization ---

def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label], log-sum-exp stabilized."""
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: logits must be [batch, classes], got {logits.shape}")
    labels = np.asarray(labels)
    batch, k = logits.shape
    if labels.shape != (batch,):
        raise ShapeError(f"softmax_cross_entropy: labels {labels.shape} must be ({batch},)")
    if labels.min() < 0 or labels.max() >= k:
        raise InvalidLabelError(f"label index out of range [0, {k}): {labels.min()}..{labels.max()}")

    z = _f64(logits.data)
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True)) + zmax
    losses = lse[:, 0] - z[np.arange(batch), labels]
    out_data = np.asarray(losses.mean(), dtype=logits.dtype)

    probs = np.exp(z - lse)

    def backward(g):
        d = probs.copy()
        d[np.arange(batch), labels] -= 1.0
        _accum(logits, d * (float(g) / batch))

    return _make(out_data, (logits,), backward)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Plain softmax over the last axis, for evaluation-time probabilities."""
    z = _f64(logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def dropout(a: Tensor, rate: float, training: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: surviving activations scaled by 1/(1-rate).

    Identity (the input tensor itself, no RNG consumed) when not training or
    rate == 0, which keeps rate-0 training forwards bit-identical to eval.
    """
    if not 0.0 <= rate < 1.0:
        raise ShapeError(f"dropout: rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return a
    if rng is None:
        raise ShapeError("dropout: an RNG is required in training mode")
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / np.asarray(1.0 - rate, dtype=a.dtype)
    out_data = a.data * keep

    def backward(g):
        _accum(a, g * keep)

    return _make(out_data, (a,), backward)


# --- tape traversal ---

def backward(loss: Tensor) -> None:
    """Populate ∂loss/∂leaf for every requires_grad leaf reachable from loss."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.shape}")
    if loss._consumed:
        raise StaleTapeError("backward() already ran on this graph; rebuild it before differentiating again")
    if not loss.requires_grad:
        loss._consumed = True
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)
            node._backward = None
    loss._consumed = True
