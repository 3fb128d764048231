"""Sweep studies: SNR, velocity, distance, Doppler, and loss comparison.

Kinematic sweeps draw fresh samples at each grid point with common
random numbers (the same latent draws across points, only the swept
quantity overridden), age the channel by the MAC profile's CSI
staleness, and compare the model's beam against exhaustive search on
the aged channel.  Reported columns per point:

  mean_se   mean SE of the predicted beam on the (aged) channel
  se_ratio  mean of per-sample SE(predicted)/SE(best) on that channel
  top1/top5 prediction hit rates against the aged-channel optimum
  gain      beam-training gain: overhead-adjusted mean SE of the
            predictor (charged its probe beams) over the adjusted mean
            SE of exhaustive search (charged every codebook beam)

Sweep CSVs use the schema: axis,value,mean_se,se_ratio,top1,top5,gain,n
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import beams as beamsmod
from . import channels as ch
from . import rng as rngmod
from .config import SPEED_OF_LIGHT, ScenarioConfig
from .dataset import Dataset, N_PROBE_BEAMS, raw_feature_matrix
from .errors import EmptyDataset
from .model import Model, build_model, decode_beam, predict_values
from .train import TrainConfig, _batched_loss, train
from .losses import huber_loss, mae, rmse

SNR_GRID_DB = tuple(range(-5, 31, 5))
VELOCITY_GRID_KMH = (0.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0)
DISTANCE_GRID_M = (10.0, 30.0, 60.0, 90.0, 120.0, 150.0)


@dataclass
class SweepPoint:
    value: float
    mean_se: float
    se_ratio: float
    top1: float
    top5: float
    gain: float
    n: int


@dataclass
class SweepResult:
    axis: str
    points: list

    def values(self):
        return [p.value for p in self.points]

    def column(self, name: str):
        return [getattr(p, name) for p in self.points]


def write_sweep_csv(results, path=None) -> str:
    """Serialize one or more SweepResults to the shared CSV schema."""
    if isinstance(results, SweepResult):
        results = [results]
    out = io.StringIO()
    out.write("axis,value,mean_se,se_ratio,top1,top5,gain,n\n")
    for res in results:
        for p in res.points:
            out.write(f"{res.axis},{p.value!r},{p.mean_se!r},{p.se_ratio!r},"
                      f"{p.top1!r},{p.top5!r},{p.gain!r},{p.n}\n")
    text = out.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text


def _se_profiles(power: np.ndarray, snr_linear: float) -> np.ndarray:
    """Per-beam SE from a [C, n_beams] squared-magnitude matrix."""
    return np.log2(1.0 + snr_linear * power).mean(axis=0)


def _beam_power(channel: np.ndarray, codebook: beamsmod.Codebook) -> np.ndarray:
    gains = np.asarray(channel).conj().T.astype(np.complex128) @ codebook.vectors
    return np.abs(gains) ** 2


def _point_from_scores(value, se_pred, se_best, pred_idx, best_idx, mac,
                       n_beams, n_probes=N_PROBE_BEAMS) -> SweepPoint:
    mean_pred = float(se_pred.mean())
    mean_best = float(se_best.mean())
    with np.errstate(invalid="ignore"):
        ratio = np.where(se_best > 0, se_pred / np.maximum(se_best, 1e-300), 1.0)
    num = mean_pred * beamsmod.training_fraction(n_probes, mac)
    den = mean_best * beamsmod.training_fraction(n_beams, mac)
    gain = num / den if den > 0 else beamsmod.UNDEFINED_GAIN
    return SweepPoint(
        value=float(value),
        mean_se=mean_pred,
        se_ratio=float(ratio.mean()),
        top1=float((pred_idx == best_idx).mean()),
        top5=float((np.abs(pred_idx - best_idx) <= 2).mean()),
        gain=gain,
        n=int(se_pred.shape[0]),
    )


def sweep_snr(model: Model, dataset: Dataset, codebook: beamsmod.Codebook,
              grid_db=SNR_GRID_DB, mac_profiles=None, max_samples: int = 400):
    """Mean SE across an SNR grid on the dataset's validation split.

    Returns one SweepResult per MAC profile; the raw SE columns are
    identical across profiles, only the overhead-adjusted gain differs.
    """
    if len(grid_db) == 0:
        raise ValueError("empty SNR grid")
    if mac_profiles is None:
        mac_profiles = (dataset.config.mac,)
    _, val_idx = dataset.split_indices()
    if val_idx.size == 0:
        raise EmptyDataset("dataset has no validation split")
    indices = val_idx[:max_samples]

    n_beams = dataset.norm_meta.n_beams
    yhat = predict_values(model, dataset.features[indices])
    pred_idx = decode_beam(yhat, n_beams)
    powers = [_beam_power(dataset.samples[i].h_mm, codebook) for i in indices]

    results = []
    for mac in mac_profiles:
        points = []
        for snr_db in grid_db:
            snr = 10.0 ** (snr_db / 10.0)
            se_pred = np.empty(len(powers))
            se_best = np.empty(len(powers))
            best_idx = np.empty(len(powers), dtype=np.int64)
            for j, power in enumerate(powers):
                prof = _se_profiles(power, snr)
                best_idx[j] = int(np.argmax(prof))
                se_best[j] = prof[best_idx[j]]
                se_pred[j] = prof[pred_idx[j]]
            points.append(_point_from_scores(snr_db, se_pred, se_best,
                                             pred_idx, best_idx, mac, n_beams))
        results.append(SweepResult(axis=f"snr[{mac.name}]", points=points))
    return results


def _kinematic_point(model: Model, config: ScenarioConfig, codebook,
                     budget: beamsmod.LinkBudget, n_samples: int,
                     velocity_kmh=None, distance_m=None, mac=None,
                     aged: bool = True):
    """Score fresh samples at a fixed kinematic point (common random numbers)."""
    mac = mac or config.mac
    meta = model.norm_meta
    feats = np.empty((n_samples, 2, model.config.input_length), dtype=np.float64)
    aged_channels = []
    for j in range(n_samples):
        geom = ch.sample_geometry(config, j, velocity_kmh=velocity_kmh,
                                  distance_m=distance_m, stream_tag=rngmod.SWEEP)
        paths_mm = ch.synthesize_channel_paths(geom, ch.MMWAVE, config)
        h_mm = paths_mm.sum(axis=0)
        h_sub6 = ch.synthesize_channel(geom, ch.SUB6, config)
        feats[j] = raw_feature_matrix(h_sub6, h_mm, codebook, meta.probe_gain)
        if aged:
            doppler = geom.doppler_hz(config.carrier_freq_mmwave)
            aged_channels.append(ch.apply_doppler(h_mm, doppler, paths_mm,
                                                  mac.csi_staleness))
        else:
            aged_channels.append(h_mm)
    feats /= meta.feature_scale

    yhat = predict_values(model, feats)
    pred_idx = decode_beam(yhat, meta.n_beams)
    se_pred = np.empty(n_samples)
    se_best = np.empty(n_samples)
    best_idx = np.empty(n_samples, dtype=np.int64)
    for j, h in enumerate(aged_channels):
        prof = _se_profiles(_beam_power(h, codebook), budget.snr_linear)
        best_idx[j] = int(np.argmax(prof))
        se_best[j] = prof[best_idx[j]]
        se_pred[j] = prof[pred_idx[j]]
    return se_pred, se_best, pred_idx, best_idx


def _codebook_for(config: ScenarioConfig) -> beamsmod.Codebook:
    ant = config.mmwave_antenna
    return beamsmod.build_codebook(ant[1], ant[2], config.codebook_oversampling)


def sweep_velocity(model: Model, config: ScenarioConfig, grid_kmh=VELOCITY_GRID_KMH,
                   n_samples: int = 500, snr_db: float = 10.0, mac=None) -> SweepResult:
    """SE of aged-channel beam application across a velocity grid."""
    if len(grid_kmh) == 0:
        raise ValueError("empty velocity grid")
    mac = mac or config.mac
    codebook = _codebook_for(config)
    budget = beamsmod.LinkBudget(snr_db=snr_db, n_subcarriers=config.mmwave_subcarriers)
    points = []
    for v in grid_kmh:
        scores = _kinematic_point(model, config, codebook, budget, n_samples,
                                  velocity_kmh=v, mac=mac)
        points.append(_point_from_scores(v, *scores, mac, config.n_beams))
    return SweepResult(axis="velocity", points=points)


def sweep_distance(model: Model, config: ScenarioConfig, grid_m=DISTANCE_GRID_M,
                   n_samples: int = 500, snr_db: float = 10.0, mac=None) -> SweepResult:
    """SE across a distance grid; velocity stays at its drawn value."""
    if len(grid_m) == 0:
        raise ValueError("empty distance grid")
    mac = mac or config.mac
    codebook = _codebook_for(config)
    budget = beamsmod.LinkBudget(snr_db=snr_db, n_subcarriers=config.mmwave_subcarriers)
    points = []
    for d in grid_m:
        scores = _kinematic_point(model, config, codebook, budget, n_samples,
                                  distance_m=d, mac=mac)
        points.append(_point_from_scores(d, *scores, mac, config.n_beams))
    return SweepResult(axis="distance", points=points)


def sweep_velocity_distance(model: Model, config: ScenarioConfig,
                            grid_kmh=VELOCITY_GRID_KMH, grid_m=DISTANCE_GRID_M,
                            n_samples: int = 500, snr_db: float = 10.0, mac=None):
    """Velocity x distance surface; one SweepResult per distance row."""
    if len(grid_kmh) == 0 or len(grid_m) == 0:
        raise ValueError("empty sweep grid")
    mac = mac or config.mac
    codebook = _codebook_for(config)
    budget = beamsmod.LinkBudget(snr_db=snr_db, n_subcarriers=config.mmwave_subcarriers)
    results = []
    for d in grid_m:
        points = []
        for v in grid_kmh:
            scores = _kinematic_point(model, config, codebook, budget, n_samples,
                                      velocity_kmh=v, distance_m=d, mac=mac)
            points.append(_point_from_scores(v, *scores, mac, config.n_beams))
        results.append(SweepResult(axis=f"velocity@d={d:g}m", points=points))
    return results


def sweep_doppler(model: Model, config: ScenarioConfig, grid_kmh=VELOCITY_GRID_KMH,
                  n_samples: int = 500, snr_db: float = 10.0, mac=None) -> SweepResult:
    """SE against the maximum Doppler shift implied by each velocity."""
    if len(grid_kmh) == 0:
        raise ValueError("empty velocity grid")
    mac = mac or config.mac
    codebook = _codebook_for(config)
    budget = beamsmod.LinkBudget(snr_db=snr_db, n_subcarriers=config.mmwave_subcarriers)
    points = []
    for v in grid_kmh:
        scores = _kinematic_point(model, config, codebook, budget, n_samples,
                                  velocity_kmh=v, mac=mac)
        f_d = (v / 3.6) * config.carrier_freq_mmwave / SPEED_OF_LIGHT
        points.append(_point_from_scores(f_d, *scores, mac, config.n_beams))
    return SweepResult(axis="doppler", points=points)


def compare_losses(dataset: Dataset, losses=("huber", "mae", "rmse"),
                   fractions=(0.5, 0.9), epochs: int = 60, seed: int = 0,
                   model_config=None) -> list:
    """Train one model per (loss, fraction) cell with shared seeds.

    Each cell uses the leading `fraction` of the training split and the
    common validation split, and reports the final validation value of
    every metric in its own units.
    """
    from .model import ModelConfig
    rows = []
    train_idx, val_idx = dataset.split_indices()
    for fraction in fractions:
        k = max(1, int(train_idx.size * fraction))
        sub_idx = np.concatenate([train_idx[:k], val_idx])
        sub = Dataset(
            samples=[dataset.samples[i] for i in sub_idx],
            features=dataset.features[sub_idx],
            targets=dataset.targets[sub_idx],
            norm_meta=_refit_fraction(dataset.norm_meta, k, sub_idx.size),
            config=dataset.config,
        )
        for loss_name in losses:
            cfg = TrainConfig(epochs=epochs, loss=loss_name, seed=seed,
                              batch_size=min(100, k))
            model = build_model(model_config or ModelConfig(), seed=seed)
            report = train(model, sub, cfg)
            feats = sub.features[k:].astype(np.float64)
            targs = sub.targets[k:].astype(np.float64)
            rows.append({
                "loss": loss_name,
                "fraction": fraction,
                "val_huber": _batched_loss(model, feats, targs,
                                           lambda p, t: huber_loss(p, t, 0.1)),
                "val_mae": _batched_loss(model, feats, targs, mae),
                "val_rmse": _batched_loss(model, feats, targs, rmse),
                "stopped_epoch": report.stopped_epoch,
            })
    return rows


def _refit_fraction(meta, n_train: int, n_total: int):
    from .dataset import NormMeta
    return NormMeta(feature_scale=meta.feature_scale, probe_gain=meta.probe_gain,
                    n_beams=meta.n_beams, train_fraction=n_train / n_total)


def loss_table_csv(rows, path=None) -> str:
    out = io.StringIO()
    out.write("loss,fraction,val_huber,val_mae,val_rmse,stopped_epoch\n")
    for r in rows:
        out.write(f"{r['loss']},{r['fraction']!r},{r['val_huber']!r},"
                  f"{r['val_mae']!r},{r['val_rmse']!r},{r['stopped_epoch']}\n")
    text = out.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return text
