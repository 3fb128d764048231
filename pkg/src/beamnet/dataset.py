"""Paired-channel datasets: generation, feature assembly, serialization.

A sample pairs the full sub-6GHz CSI with the mm-wave channel of the
same geometry.  The model input stacks, per sample, the real and
imaginary parts of

  * the complete sub-6 CSI, subcarrier-major (8 elements x 32
    subcarriers = 256 complex values), and
  * pilot responses on 16 evenly strided probe beams over the first 8
    mm-wave subcarriers (128 complex values), scaled by 1/sqrt(E) so
    both blocks share one dynamic range,

giving a [2 x 384] feature matrix.  Features are max-abs normalized by
a single scale taken over the training split; targets are the oracle
beam index divided by (n_beams - 1).

Dataset files ("CBRN") are little-endian: magic, version, a dimension
block, float32 feature and target arrays, interleaved-float32 complex
channels, then a length-prefixed JSON metadata blob.
"""
from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import beams as beamsmod
from . import channels as ch
from . import rng as rngmod
from .config import MAC_PROFILES, ScenarioConfig
from .errors import ConfigError, DegenerateData, FormatError

DATASET_MAGIC = b"CBRN"
DATASET_VERSION = 1

N_PROBE_BEAMS = 16
N_PROBE_SUBCARRIERS = 8
#: Elevation column shared by all probe beams (offset of the even stride).
PROBE_ELEVATION_COLUMN = 7

TRAIN_FRACTION = 0.8
LABEL_SNR_DB = 10.0


def probe_beam_indices(n_beams: int, n_probes: int = N_PROBE_BEAMS,
                       offset: int = PROBE_ELEVATION_COLUMN) -> np.ndarray:
    """Evenly strided probe beams: offset, offset+stride, ..."""
    if n_probes < 1 or n_probes > n_beams:
        raise ConfigError(f"cannot place {n_probes} probes in {n_beams} beams")
    stride = n_beams // n_probes
    return np.arange(n_probes) * stride + (offset % stride)


@dataclass
class NormMeta:
    """Scaling constants required to rebuild features at inference time."""

    feature_scale: float
    probe_gain: float
    n_beams: int
    train_fraction: float = TRAIN_FRACTION

    def to_dict(self) -> dict:
        return {"feature_scale": self.feature_scale, "probe_gain": self.probe_gain,
                "n_beams": self.n_beams, "train_fraction": self.train_fraction}

    @classmethod
    def from_dict(cls, d: dict) -> "NormMeta":
        return cls(feature_scale=float(d["feature_scale"]), probe_gain=float(d["probe_gain"]),
                   n_beams=int(d["n_beams"]), train_fraction=float(d["train_fraction"]))


@dataclass
class ChannelSample:
    h_sub6: np.ndarray        # [sub6_elements, C_sub] complex64
    h_mm: np.ndarray          # [mm_elements, C] complex64
    bs_index: int
    user_position: tuple
    velocity: float           # km/h
    heading: float
    los: bool
    doppler_hz: np.ndarray    # [P] mm-wave band Doppler per path
    oracle_beam: int
    oracle_se: float
    seed: int


@dataclass
class Dataset:
    samples: list
    features: np.ndarray      # [N, 2, feature_len] float32, normalized
    targets: np.ndarray       # [N] float32 in [0, 1]
    norm_meta: NormMeta
    config: ScenarioConfig

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def n_train(self) -> int:
        return int(len(self.samples) * self.norm_meta.train_fraction)

    def split_indices(self):
        """Deterministic 80:20 split: leading block trains, tail validates."""
        n = len(self.samples)
        k = self.n_train
        return np.arange(k), np.arange(k, n)


def raw_feature_matrix(h_sub6: np.ndarray, h_mm: np.ndarray,
                       codebook: beamsmod.Codebook, probe_gain: float) -> np.ndarray:
    """Un-normalized [2, feature_len] feature block for one sample."""
    sub_flat = np.asarray(h_sub6).T.reshape(-1)  # subcarrier-major
    probes = probe_beam_indices(codebook.n_beams)
    pilot = (np.asarray(h_mm)[:, :N_PROBE_SUBCARRIERS].conj().T
             @ codebook.vectors[:, probes])      # [8, 16] subcarrier-major
    pilot = pilot.reshape(-1) * probe_gain
    stacked = np.concatenate([sub_flat, pilot])
    return np.stack([stacked.real, stacked.imag]).astype(np.float32)


def normalize_dataset(raw_features: np.ndarray, oracle_beams: np.ndarray,
                      n_beams: int, train_fraction: float = TRAIN_FRACTION):
    """Max-abs scale features by the training split; map beams to [0, 1]."""
    raw_features = np.asarray(raw_features, dtype=np.float32)
    if raw_features.size == 0:
        raise DegenerateData("cannot normalize an empty feature array")
    n_train = max(1, int(raw_features.shape[0] * train_fraction))
    scale = float(np.max(np.abs(raw_features[:n_train])))
    if scale == 0.0:
        raise DegenerateData("feature scale is zero over the training split")
    features = (raw_features / np.float32(scale)).astype(np.float32)
    targets = (np.asarray(oracle_beams, dtype=np.float64) / (n_beams - 1)).astype(np.float32)
    meta = NormMeta(feature_scale=scale, probe_gain=1.0, n_beams=n_beams,
                    train_fraction=train_fraction)
    return features, targets, meta


def _build_sample(config: ScenarioConfig, codebook, budget, probe_gain, index):
    geom = ch.sample_geometry(config, index)
    h_sub6 = ch.synthesize_channel(geom, ch.SUB6, config).astype(np.complex64)
    h_mm = ch.synthesize_channel(geom, ch.MMWAVE, config).astype(np.complex64)
    beam, se = beamsmod.exhaustive_search(h_mm, codebook, budget)
    raw = raw_feature_matrix(h_sub6, h_mm, codebook, probe_gain)
    sample = ChannelSample(
        h_sub6=h_sub6,
        h_mm=h_mm,
        bs_index=geom.bs_index,
        user_position=geom.position,
        velocity=geom.velocity_kmh,
        heading=geom.heading,
        los=geom.los,
        doppler_hz=geom.doppler_hz(config.carrier_freq_mmwave),
        oracle_beam=beam,
        oracle_se=se,
        seed=geom.seed,
    )
    return sample, raw


def generate_dataset(config: ScenarioConfig, label_snr_db: float = LABEL_SNR_DB,
                     workers: int | None = None) -> Dataset:
    """Synthesize config.n_users samples with exhaustive-search labels.

    Deterministic in config.base_seed regardless of worker count: every
    sample derives from its own counter-based stream and results are
    assembled in index order.
    """
    ant = config.mmwave_antenna
    codebook = beamsmod.build_codebook(ant[1], ant[2], config.codebook_oversampling)
    if codebook.n_beams != config.n_beams:
        raise ConfigError(
            f"array {ant} with oversampling {config.codebook_oversampling} "
            f"gives {codebook.n_beams} beams, config says {config.n_beams}")
    if config.mmwave_subcarriers < N_PROBE_SUBCARRIERS:
        raise ConfigError(
            f"need at least {N_PROBE_SUBCARRIERS} mm-wave subcarriers")
    budget = beamsmod.LinkBudget(snr_db=label_snr_db, n_subcarriers=config.mmwave_subcarriers)
    probe_gain = 1.0 / np.sqrt(config.mm_elements)

    n = config.n_users
    if workers is None:
        workers = rngmod.worker_count()
    build = lambda i: _build_sample(config, codebook, budget, probe_gain, i)
    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(build, range(n)))
    else:
        results = [build(i) for i in range(n)]

    samples = [r[0] for r in results]
    if n > 0:
        raw = np.stack([r[1] for r in results])
        oracle = np.array([s.oracle_beam for s in samples])
        features, targets, meta = normalize_dataset(raw, oracle, config.n_beams)
    else:
        features = np.zeros((0, 2, 0), dtype=np.float32)
        targets = np.zeros((0,), dtype=np.float32)
        meta = NormMeta(feature_scale=1.0, probe_gain=1.0, n_beams=config.n_beams)
    meta.probe_gain = float(probe_gain)
    return Dataset(samples=samples, features=features, targets=targets,
                   norm_meta=meta, config=config)


def _config_to_json(config: ScenarioConfig) -> dict:
    return config.to_dict()


def _config_from_json(d: dict) -> ScenarioConfig:
    d = dict(d)
    d.pop("paper_scale_users", None)
    mac = MAC_PROFILES[d.pop("mac")]
    for key in ("mmwave_antenna", "sub6_antenna", "velocity_range", "distance_range", "sector"):
        d[key] = tuple(d[key])
    return ScenarioConfig(mac=mac, **d)


def save_dataset(dataset: Dataset, path) -> None:
    n = len(dataset.samples)
    cfg = dataset.config
    feat = np.ascontiguousarray(dataset.features, dtype="<f4")
    targ = np.ascontiguousarray(dataset.targets, dtype="<f4")
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<I", DATASET_VERSION))
        f.write(struct.pack("<QII", n, feat.shape[1] if n else 2,
                            feat.shape[2] if n else 0))
        f.write(struct.pack("<IIIII", cfg.n_beams, cfg.sub6_elements,
                            cfg.sub6_subcarriers, cfg.mm_elements,
                            cfg.mmwave_subcarriers))
        f.write(feat.tobytes())
        f.write(targ.tobytes())
        for s in dataset.samples:
            f.write(np.ascontiguousarray(s.h_sub6, dtype="<c8").tobytes())
        for s in dataset.samples:
            f.write(np.ascontiguousarray(s.h_mm, dtype="<c8").tobytes())
        meta = {
            "config": _config_to_json(cfg),
            "norm_meta": dataset.norm_meta.to_dict(),
            "samples": [{
                "bs_index": s.bs_index,
                "position": [float(s.user_position[0]), float(s.user_position[1])],
                "velocity": float(s.velocity),
                "heading": float(s.heading),
                "los": bool(s.los),
                "doppler_hz": [float(x) for x in s.doppler_hz],
                "oracle_beam": int(s.oracle_beam),
                "oracle_se": float(s.oracle_se),
                "seed": int(s.seed),
            } for s in dataset.samples],
        }
        blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)


def _read_exact(f, count: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise FormatError(f"truncated dataset file: wanted {count} bytes, got {len(data)}")
    return data


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != DATASET_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != DATASET_VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        n, fdim0, fdim1 = struct.unpack("<QII", _read_exact(f, 16))
        n_beams, sub6_e, sub6_c, mm_e, mm_c = struct.unpack("<IIIII", _read_exact(f, 20))
        features = np.frombuffer(_read_exact(f, n * fdim0 * fdim1 * 4),
                                 dtype="<f4").reshape(n, fdim0, fdim1).copy()
        targets = np.frombuffer(_read_exact(f, n * 4), dtype="<f4").copy()
        h_sub6 = np.frombuffer(_read_exact(f, n * sub6_e * sub6_c * 8),
                               dtype="<c8").reshape(n, sub6_e, sub6_c)
        h_mm = np.frombuffer(_read_exact(f, n * mm_e * mm_c * 8),
                             dtype="<c8").reshape(n, mm_e, mm_c)
        (meta_len,) = struct.unpack("<Q", _read_exact(f, 8))
        meta = json.loads(_read_exact(f, meta_len).decode("utf-8"))
        if f.read(1):
            raise FormatError("trailing bytes after dataset payload")

    config = _config_from_json(meta["config"])
    norm_meta = NormMeta.from_dict(meta["norm_meta"])
    samples = []
    for i, rec in enumerate(meta["samples"]):
        samples.append(ChannelSample(
            h_sub6=h_sub6[i].copy(),
            h_mm=h_mm[i].copy(),
            bs_index=int(rec["bs_index"]),
            user_position=tuple(rec["position"]),
            velocity=float(rec["velocity"]),
            heading=float(rec["heading"]),
            los=bool(rec["los"]),
            doppler_hz=np.asarray(rec["doppler_hz"], dtype=np.float64),
            oracle_beam=int(rec["oracle_beam"]),
            oracle_se=float(rec["oracle_se"]),
            seed=int(rec["seed"]),
        ))
    if len(samples) != n:
        raise FormatError(f"metadata lists {len(samples)} samples, header says {n}")
    return Dataset(samples=samples, features=features, targets=targets,
                   norm_meta=norm_meta, config=config)
