"""Mini-batch training loop: Adam on Huber loss with plateau scheduling,
early stopping and best-weight restoration.

The dataset's leading 80% block is the training split, the tail the
validation split (samples are i.i.d. by construction, and the same
boundary fixed the normalization scale).  Shuffling, dropout and every
other stochastic choice derive from the seed, so reruns are bit-identical.

Training runs in float32 by default: the wall-clock budget of a laptop
CPU leaves no headroom for float64 matmuls, and the quarter-beam target
precision sits far above float32 resolution.  The autodiff engine itself
stays float64 for gradient verification; weights are widened back to
float64 before checkpointing.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .dataset import Dataset
from .errors import ConfigError, EmptyDataset, NonFiniteLoss
from .losses import huber_loss, mae, rmse
from .model import Model, forward
from .optim import OptimizerState, SchedulerState, adam_step, early_stop, scheduler_step


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 100
    delta: float = 0.1
    loss: str = "huber"           # training objective: huber | mae | rmse
    learning_rate: float = 0.001
    l2_lambda: float = 0.0001
    scheduler_patience: int = 10
    scheduler_factor: float = 0.5
    min_learning_rate: float = 0.0001
    early_stopping_patience: int = 35
    seed: int = 0
    restore_best: bool = True
    dtype: str = "float32"
    bs_index: int | None = None   # train on one base station's samples only

    def objective(self):
        if self.loss == "huber":
            return lambda pred, target: huber_loss(pred, target, self.delta)
        if self.loss == "mae":
            return mae
        if self.loss == "rmse":
            return rmse
        raise ConfigError(f"unknown training loss '{self.loss}'")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "epochs", "batch_size", "delta", "loss", "learning_rate", "l2_lambda",
            "scheduler_patience", "scheduler_factor", "min_learning_rate",
            "early_stopping_patience", "seed", "restore_best", "dtype", "bs_index")}


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    learning_rates: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    final_mae: float = float("nan")
    final_rmse: float = float("nan")
    wall_seconds: float = 0.0

    @property
    def best_val_loss(self) -> float:
        return min(self.val_loss) if self.val_loss else float("nan")

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("epoch,train_loss,val_loss,lr\n")
        for i, (tr, va, lr) in enumerate(zip(self.train_loss, self.val_loss,
                                             self.learning_rates), start=1):
            out.write(f"{i},{tr!r},{va!r},{lr!r}\n")
        return out.getvalue()


def _batched_loss(model: Model, features: np.ndarray, targets: np.ndarray,
                  objective, chunk: int = 250) -> float:
    """Objective loss in eval mode, predictions computed in chunks."""
    preds = np.concatenate([
        forward(model, ad.Tensor(features[i:i + chunk]), train_mode=False).data
        for i in range(0, features.shape[0], chunk)])
    return float(objective(preds, targets))


def train(model: Model, dataset: Dataset, config: TrainConfig | None = None) -> TrainReport:
    """Fit the model on the dataset's training split; restores best weights."""
    if config is None:
        config = TrainConfig()
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")

    train_idx, val_idx = dataset.split_indices()
    if config.bs_index is not None:
        bs = np.array([s.bs_index for s in dataset.samples])
        train_idx = train_idx[bs[train_idx] == config.bs_index]
        val_idx = val_idx[bs[val_idx] == config.bs_index]
        if train_idx.size == 0 or val_idx.size == 0:
            raise EmptyDataset(f"no samples for base station {config.bs_index}")
    if config.batch_size < 1 or config.batch_size > train_idx.size:
        raise ConfigError(
            f"batch size {config.batch_size} outside [1, {train_idx.size}]")

    dtype = np.dtype(config.dtype)
    feats = dataset.features.astype(dtype)
    targs = dataset.targets.astype(dtype)
    x_train, y_train = feats[train_idx], targs[train_idx]
    x_val, y_val = feats[val_idx], targs[val_idx]

    model.norm_meta = dataset.norm_meta
    original_dtype = next(iter(model.params.values())).data.dtype
    model.astype(dtype)

    opt = OptimizerState(learning_rate=config.learning_rate, l2_lambda=config.l2_lambda)
    sched = SchedulerState(learning_rate=config.learning_rate,
                           patience=config.scheduler_patience,
                           factor=config.scheduler_factor,
                           min_lr=config.min_learning_rate)
    objective = config.objective()
    report = TrainReport()
    best_state, best_val = None, float("inf")
    start = time.perf_counter()
    n_train = x_train.shape[0]

    for epoch in range(config.epochs):
        perm = rngmod.stream(config.seed, rngmod.SHUFFLE, epoch).permutation(n_train)
        epoch_loss, n_batches = 0.0, 0
        for b, lo in enumerate(range(0, n_train, config.batch_size)):
            idx = perm[lo:lo + config.batch_size]
            xb = ad.Tensor(x_train[idx])
            drop_rng = rngmod.stream(config.seed, rngmod.DROPOUT, epoch, b)
            pred = forward(model, xb, train_mode=True, rng=drop_rng)
            loss = objective(pred, y_train[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteLoss(f"loss became {value} at epoch {epoch + 1}, batch {b + 1}")
            for t in model.params.values():
                t.zero_grad()
            loss.backward()
            opt.learning_rate = sched.learning_rate
            adam_step({k: t.data for k, t in model.params.items()},
                      {k: t.grad for k, t in model.params.items()}, opt)
            epoch_loss += value
            n_batches += 1

        val = _batched_loss(model, x_val, y_val, objective) if x_val.size else float("nan")
        report.train_loss.append(epoch_loss / max(1, n_batches))
        report.val_loss.append(val)
        report.learning_rates.append(sched.learning_rate)
        report.stopped_epoch = epoch + 1

        if np.isfinite(val):
            if val < best_val:
                best_val = val
                best_state = model.state_copy()
                report.best_epoch = epoch + 1
            scheduler_step(sched, val)
            if early_stop(report.val_loss, config.early_stopping_patience):
                break

    if config.restore_best and best_state is not None:
        model.load_state(best_state)
    model.astype(original_dtype)

    if x_val.size:
        pred = _predict_eval(model, x_val.astype(original_dtype))
        report.final_mae = mae(pred, y_val.astype(original_dtype))
        report.final_rmse = rmse(pred, y_val.astype(original_dtype))
    report.wall_seconds = time.perf_counter() - start
    return report


def _predict_eval(model: Model, features: np.ndarray, chunk: int = 250) -> np.ndarray:
    outs = [forward(model, ad.Tensor(features[i:i + chunk]), train_mode=False).data
            for i in range(0, features.shape[0], chunk)]
    return np.concatenate(outs) if outs else np.zeros(0)
