"""Regression losses: Huber, MAE and RMSE.

Each function accepts either plain arrays (returns a float) or a Tensor
prediction (returns a scalar Tensor wired into the graph).  The residual
convention is x = target - prediction.

Note on RMSE: the customary root of the mean *squared difference* is
implemented.  The alternative sqrt(mean(pred^2 - target^2)) sometimes
seen in print can go negative under the radical and is not usable as a
metric.
"""
from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .errors import EmptyInput, LengthMismatch


def _check_pair(pred, target):
    p = pred.data if isinstance(pred, Tensor) else np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=p.dtype)
    if p.ndim != 1 or t.ndim != 1:
        p, t = p.reshape(-1), t.reshape(-1)
    if p.shape != t.shape:
        raise LengthMismatch(f"pred has {p.shape[0]} entries, target has {t.shape[0]}")
    if p.size == 0:
        raise EmptyInput("loss over zero samples is undefined")
    return p, t


def huber_loss(pred, target, delta: float = 0.1):
    """Mean Huber loss: 0.5*x^2 for |x| <= delta, else delta*(|x| - delta/2)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    p, t = _check_pair(pred, target)
    x = t - p
    ax = np.abs(x)
    quad = ax <= delta
    vals = np.where(quad, 0.5 * x * x, delta * (ax - 0.5 * delta))
    out = vals.mean()
    if not isinstance(pred, Tensor):
        return float(out)

    n = p.size

    def grad_fn(g):
        # d(loss)/d(pred) = -psi(x)/n with psi = x inside the knee, delta*sign(x) outside
        psi = np.where(quad, x, delta * np.sign(x))
        return ((-g * psi / n).astype(p.dtype, copy=False).reshape(pred.data.shape),)

    return Tensor(np.asarray(out, dtype=p.dtype), (pred,), grad_fn)


def mae(pred, target):
    """Mean absolute error."""
    p, t = _check_pair(pred, target)
    x = t - p
    out = np.abs(x).mean()
    if not isinstance(pred, Tensor):
        return float(out)

    n = p.size

    def grad_fn(g):
        return ((-g * np.sign(x) / n).astype(p.dtype, copy=False).reshape(pred.data.shape),)

    return Tensor(np.asarray(out, dtype=p.dtype), (pred,), grad_fn)


def rmse(pred, target):
    """Root of the mean squared difference."""
    p, t = _check_pair(pred, target)
    x = t - p
    msd = (x * x).mean()
    out = np.sqrt(msd)
    if not isinstance(pred, Tensor):
        return float(out)

    n = p.size

    def grad_fn(g):
        root = max(float(out), np.finfo(p.dtype).tiny)
        return ((-g * x / (n * root)).astype(p.dtype, copy=False).reshape(pred.data.shape),)

    return Tensor(np.asarray(out, dtype=p.dtype), (pred,), grad_fn)
