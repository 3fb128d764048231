"""Dense real tensors with reverse-mode differentiation.

Minimal engine: only the primitives the beam regressor needs.  Tensors
default to float64; a graph built from float32 leaves stays in float32.
Gradients are accumulated in reverse topological order, visiting each
node exactly once.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, GraphError


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_grad_fn")

    def __init__(self, data, _parents=(), _grad_fn=None, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self._parents = _parents
        self._grad_fn = _grad_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"

    # Operator sugar; the module-level functions are the primary API.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _toposort(root: Tensor):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order  # parents before children


def backward(loss: Tensor) -> None:
    """Populate .grad with d(loss)/d(node) for every node reachable from loss."""
    if loss.data.size != 1:
        raise GraphError(f"backward root must be scalar, got shape {loss.data.shape}")
    order = _toposort(loss)
    seed = np.ones_like(loss.data)
    loss.grad = seed if loss.grad is None else loss.grad + seed
    local = {id(loss): seed}
    for node in reversed(order):
        g = local.pop(id(node), None)
        if g is None or node._grad_fn is None:
            continue
        parent_grads = node._grad_fn(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            if id(p) in local:
                local[id(p)] = local[id(p)] + pg
            else:
                local[id(p)] = pg
            if p._grad_fn is None:  # leaf: expose accumulated gradient
                p.grad = pg if p.grad is None else p.grad + pg


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise DimensionMismatch(f"add: shapes {a.shape} and {b.shape} do not broadcast")

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise DimensionMismatch(f"mul: shapes {a.shape} and {b.shape} do not broadcast")

    def grad_fn(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, (a, b), grad_fn)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionMismatch("matmul expects tensors with ndim >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionMismatch(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def grad_fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return Tensor(out, (a, b), grad_fn)


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    out = np.where(mask, x.data, 0.0)

    def grad_fn(g):
        return (g * mask,)

    return Tensor(out, (x,), grad_fn)


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return Tensor(out, (x,), grad_fn)


def dropout(x, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout; exact identity when train is False or rate is 0."""
    x = as_tensor(x)
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"dropout rate must be in [0,1), got {rate}")
    if not train or rate == 0.0:
        return Tensor(x.data, (x,), lambda g: (g,))
    if rng is None:
        raise ValueError("dropout in train mode needs an explicit rng")
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) >= rate).astype(x.data.dtype) / keep
    out = x.data * mask

    def grad_fn(g):
        return (g * mask,)

    return Tensor(out, (x,), grad_fn)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = x.data.reshape(shape)

    def grad_fn(g):
        return (g.reshape(x.data.shape),)

    return Tensor(out, (x,), grad_fn)


def flatten(x) -> Tensor:
    """Collapse all but the leading (batch) axis."""
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def transpose(x, axes) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = x.data.transpose(axes)

    def grad_fn(g):
        return (g.transpose(inverse),)

    return Tensor(out, (x,), grad_fn)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = x.data.mean(axis=axis)
    n = x.data.size if axis is None else x.data.shape[axis]

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g / n, x.data.shape).astype(x.data.dtype, copy=False),)
        ge = np.expand_dims(g, axis) / n
        return (np.broadcast_to(ge, x.data.shape).astype(x.data.dtype, copy=False),)

    return Tensor(out, (x,), grad_fn)


def tsum(x, axis=None) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis)

    def grad_fn(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).astype(x.data.dtype, copy=False),)
        ge = np.expand_dims(g, axis)
        return (np.broadcast_to(ge, x.data.shape).astype(x.data.dtype, copy=False),)

    return Tensor(out, (x,), grad_fn)


def conv1d(x, w, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """1-D convolution (cross-correlation) over the last axis.

    x: [B, C_in, L], w: [C_out, C_in, K], bias: [C_out] or None.
    Output: [B, C_out, (L + 2*padding - K)//stride + 1].
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 3 or w.ndim != 3:
        raise DimensionMismatch(f"conv1d expects x [B,C,L] and w [O,C,K], got {x.shape}, {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise DimensionMismatch(f"conv1d: channel mismatch {x.shape[1]} vs {w.shape[1]}")
    if stride < 1 or padding < 0:
        raise ValueError("conv1d: stride must be >= 1 and padding >= 0")
    b_, c_in, length = x.shape
    c_out, _, k = w.shape
    l_pad = length + 2 * padding
    if l_pad < k:
        raise DimensionMismatch(f"conv1d: kernel {k} longer than padded input {l_pad}")
    l_out = (l_pad - k) // stride + 1

    xp = x.data if padding == 0 else np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    # cols: [B, C_in, L_out, K]
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    out = np.tensordot(cols, w.data, axes=([1, 3], [1, 2]))  # [B, L_out, C_out]
    out = np.ascontiguousarray(out.transpose(0, 2, 1))
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionMismatch(f"conv1d: bias shape {bias.shape} != ({c_out},)")
        out = out + bias.data[None, :, None]

    parents = (x, w) if bias is None else (x, w, bias)

    def grad_fn(g):
        # g: [B, C_out, L_out]
        gw = np.tensordot(g, cols, axes=([0, 2], [0, 2]))  # [C_out, C_in, K]
        gcols = np.tensordot(g, w.data, axes=([1], [0]))   # [B, L_out, C_in, K]
        gxp = np.zeros_like(xp)
        for kk in range(k):
            gxp[:, :, kk:kk + stride * l_out:stride] += gcols[:, :, :, kk].transpose(0, 2, 1)
        gx = gxp if padding == 0 else gxp[:, :, padding:padding + length]
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(0, 2))

    return Tensor(out, parents, grad_fn)
