"""Adam optimizer, plateau learning-rate scheduler, early stopping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGradient


@dataclass
class OptimizerState:
    """Adam moments plus the classic (non-decoupled) L2 setting."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    l2_lambda: float = 0.0001
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: OptimizerState) -> OptimizerState:
    """One bias-corrected Adam update, in place on the param arrays.

    L2 is applied as classic weight decay: the gradient is augmented with
    l2_lambda * param before the moment updates.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, w in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient for parameter '{name}'")
        if state.l2_lambda:
            g = g + state.l2_lambda * w
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(w)
            state.m[name] = m
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / c1
        vhat = v / c2
        w -= state.learning_rate * mhat / (np.sqrt(vhat) + state.epsilon)
    return state


@dataclass
class SchedulerState:
    """ReduceLROnPlateau: halve the rate after `patience` stale epochs."""

    learning_rate: float = 0.001
    patience: int = 10
    factor: float = 0.5
    min_lr: float = 0.0001
    best_metric: float = float("inf")
    epochs_since_improvement: int = 0


def scheduler_step(state: SchedulerState, val_metric: float) -> SchedulerState:
    if not np.isfinite(val_metric):
        raise ValueError(f"scheduler metric must be finite, got {val_metric}")
    if val_metric < state.best_metric:
        state.best_metric = val_metric
        state.epochs_since_improvement = 0
        return state
    state.epochs_since_improvement += 1
    if state.epochs_since_improvement >= state.patience:
        state.learning_rate = max(state.min_lr, state.learning_rate * state.factor)
        state.epochs_since_improvement = 0
    return state


def early_stop(history, patience: int = 35) -> bool:
    """True iff the last `patience` epochs brought no new best metric."""
    if len(history) == 0:
        return False
    best_idx = int(np.argmin(history))
    return (len(history) - 1 - best_idx) >= patience
