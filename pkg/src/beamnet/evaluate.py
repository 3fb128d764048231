"""Model evaluation against the exhaustive-search oracle.

For every sample the predicted beam's spectral efficiency is compared
with the best achievable SE at the same link budget, recomputed by full
scan so the oracle matches the requested SNR.  Top-k accuracy counts the
oracle beam among the k indices nearest the prediction.  The SE ratio
and top-5 rate carry seeded 95% bootstrap intervals.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import beams as beamsmod
from . import rng as rngmod
from .dataset import Dataset
from .errors import EmptyDataset, MetaMismatch
from .losses import mae as mae_fn
from .losses import rmse as rmse_fn
from .model import Model, decode_beam, param_count, predict_values


@dataclass
class EvalReport:
    mae: float
    rmse: float
    mean_se: float
    se_ratio: float
    top1: float
    top5: float
    n: int
    param_count: int
    se_ratio_ci: tuple
    top5_ci: tuple

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("mae,rmse,mean_se,se_ratio,top1,top5,param_count,n\n")
        out.write(f"{self.mae!r},{self.rmse!r},{self.mean_se!r},{self.se_ratio!r},"
                  f"{self.top1!r},{self.top5!r},{self.param_count},{self.n}\n")
        return out.getvalue()

    def lines(self) -> list:
        return [
            f"samples            {self.n}",
            f"parameters         {self.param_count}",
            f"MAE                {self.mae:.6f}",
            f"RMSE               {self.rmse:.6f}",
            f"mean SE            {self.mean_se:.4f} bits/s/Hz",
            f"SE ratio vs oracle {self.se_ratio:.4f} "
            f"(95% CI {self.se_ratio_ci[0]:.4f}..{self.se_ratio_ci[1]:.4f})",
            f"top-1 accuracy     {self.top1:.4f}",
            f"top-5 accuracy     {self.top5:.4f} "
            f"(95% CI {self.top5_ci[0]:.4f}..{self.top5_ci[1]:.4f})",
        ]


def _bootstrap_ci(values: np.ndarray, seed: int, n_resamples: int = 1000):
    rng = rngmod.stream(seed, rngmod.BOOTSTRAP)
    n = values.shape[0]
    means = rng.choice(values, size=(n_resamples, n), replace=True).mean(axis=1)
    return (float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5)))


def evaluate_predictions(yhat: np.ndarray, dataset: Dataset,
                         codebook: beamsmod.Codebook, budget: beamsmod.LinkBudget,
                         indices=None, param_total: int = 0) -> EvalReport:
    """Score raw regressor outputs over the selected samples."""
    if indices is None:
        indices = np.arange(len(dataset))
    indices = np.asarray(indices)
    if indices.size == 0:
        raise EmptyDataset("no samples selected for evaluation")
    yhat = np.asarray(yhat, dtype=np.float64)
    if yhat.shape[0] != indices.size:
        raise ValueError(f"{yhat.shape[0]} predictions for {indices.size} samples")

    n_beams = dataset.norm_meta.n_beams
    pred_idx = decode_beam(yhat, n_beams)
    se_pred = np.empty(indices.size)
    se_best = np.empty(indices.size)
    best_idx = np.empty(indices.size, dtype=np.int64)
    for j, i in enumerate(indices):
        h = dataset.samples[i].h_mm
        profile = beamsmod.beam_se_profile(h, codebook, budget)
        best_idx[j] = int(np.argmax(profile))
        se_best[j] = profile[best_idx[j]]
        se_pred[j] = profile[pred_idx[j]]

    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(se_best > 0, se_pred / np.maximum(se_best, 1e-300), 1.0)
    top1 = (pred_idx == best_idx).astype(np.float64)
    top5 = (np.abs(pred_idx - best_idx) <= 2).astype(np.float64)
    targets = dataset.targets[indices].astype(np.float64)

    return EvalReport(
        mae=mae_fn(yhat, targets),
        rmse=rmse_fn(yhat, targets),
        mean_se=float(se_pred.mean()),
        se_ratio=float(ratio.mean()),
        top1=float(top1.mean()),
        top5=float(top5.mean()),
        n=int(indices.size),
        param_count=param_total,
        se_ratio_ci=_bootstrap_ci(ratio, dataset.config.base_seed),
        top5_ci=_bootstrap_ci(top5, dataset.config.base_seed),
    )


def evaluate(model: Model, dataset: Dataset, codebook: beamsmod.Codebook,
             budget: beamsmod.LinkBudget, split: str = "val") -> EvalReport:
    """Evaluate a trained model on a dataset split ('val', 'train' or 'all')."""
    if model.norm_meta is None or model.norm_meta != dataset.norm_meta:
        raise MetaMismatch("model and dataset normalization metadata differ")
    train_idx, val_idx = dataset.split_indices()
    indices = {"val": val_idx, "train": train_idx,
               "all": np.arange(len(dataset))}.get(split)
    if indices is None:
        raise ValueError(f"unknown split '{split}'")
    yhat = predict_values(model, dataset.features[indices])
    return evaluate_predictions(yhat, dataset, codebook, budget, indices,
                                param_total=param_count(model))
