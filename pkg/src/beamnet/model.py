"""Convolution + multi-head-attention beam regressor.

Pipeline: two strided 1-D convolutions compress the [2 x 384] channel
features into per-position embeddings, a single multi-head attention
block mixes positions (softmax(Q K^T / sqrt(d_k)) V per head, heads
concatenated through an output projection), dropout regularizes the
attended representation, and a dense+ReLU layer followed by an affine
head emits one scalar per sample: the normalized beam index.

Checkpoints use the "CBWT" binary format (float64 arrays) plus a JSON
sidecar with the architecture and normalization metadata, so a saved
model is self-contained for inference.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import rng as rngmod
from .dataset import NormMeta
from .errors import ConfigError, DimensionMismatch, FormatError

CHECKPOINT_MAGIC = b"CBWT"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    conv_layers: list = field(default_factory=lambda: [(2, 32, 5, 2), (32, 64, 5, 2)])
    d_model: int = 64
    n_heads: int = 4
    dense_units: int = 44
    dropout: float = 0.2
    input_length: int = 384

    def validate(self):
        if not self.conv_layers:
            raise ConfigError("need at least one conv layer")
        for layer in self.conv_layers:
            if len(layer) != 4 or any(int(v) < 1 for v in layer):
                raise ConfigError(f"bad conv layer spec {layer}")
        if self.conv_layers[-1][1] != self.d_model:
            raise ConfigError(
                f"last conv emits {self.conv_layers[-1][1]} channels, d_model is {self.d_model}")
        for prev, nxt in zip(self.conv_layers, self.conv_layers[1:]):
            if prev[1] != nxt[0]:
                raise ConfigError(f"conv chain mismatch: {prev} -> {nxt}")
        if self.d_model < 1 or self.n_heads < 1 or self.dense_units < 1:
            raise ConfigError("layer sizes must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError("dropout must lie in [0, 1)")
        if self.input_length < 1:
            raise ConfigError("input_length must be >= 1")
        if self.seq_length < 1:
            raise ConfigError("conv stack collapses the sequence to nothing")

    @property
    def seq_length(self) -> int:
        length = self.input_length
        for _, _, kernel, stride in self.conv_layers:
            length = (length + 2 * (kernel // 2) - kernel) // stride + 1
        return length

    def to_dict(self) -> dict:
        return {"conv_layers": [list(c) for c in self.conv_layers],
                "d_model": self.d_model, "n_heads": self.n_heads,
                "dense_units": self.dense_units, "dropout": self.dropout,
                "input_length": self.input_length}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(conv_layers=[tuple(c) for c in d["conv_layers"]],
                   d_model=int(d["d_model"]), n_heads=int(d["n_heads"]),
                   dense_units=int(d["dense_units"]), dropout=float(d["dropout"]),
                   input_length=int(d["input_length"]))


@dataclass
class Model:
    params: dict               # name -> Tensor, insertion order fixed
    config: ModelConfig
    norm_meta: NormMeta | None = None

    def astype(self, dtype) -> None:
        for t in self.params.values():
            t.data = t.data.astype(dtype, copy=False)

    def state_copy(self) -> dict:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state(self, state: dict) -> None:
        for name, t in self.params.items():
            t.data = state[name].astype(t.data.dtype, copy=True)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_model(config: ModelConfig, seed: int = 0) -> Model:
    """Initialize all weights (Glorot uniform, zero biases), seeded."""
    config.validate()
    rng = rngmod.stream(seed, rngmod.PARAMS)
    params: dict = {}

    def param(name, arr):
        params[name] = ad.Tensor(arr)

    for i, (c_in, c_out, kernel, _) in enumerate(config.conv_layers):
        param(f"conv{i}.w", _glorot(rng, c_in * kernel, c_out * kernel, (c_out, c_in, kernel)))
        param(f"conv{i}.b", np.zeros(c_out))
    d = config.d_model
    for name in ("wq", "wk", "wv", "wo"):
        param(f"attn.{name}", _glorot(rng, d, d, (d, d)))
        param(f"attn.b{name[1]}", np.zeros(d))
    dense_in = config.seq_length * d
    param("dense.w", _glorot(rng, dense_in, config.dense_units, (dense_in, config.dense_units)))
    param("dense.b", np.zeros(config.dense_units))
    param("head.w", _glorot(rng, config.dense_units, 1, (config.dense_units, 1)))
    param("head.b", np.zeros(1))
    return Model(params=params, config=config)


def forward(model: Model, batch, train_mode: bool = False,
            rng: np.random.Generator | None = None) -> ad.Tensor:
    """Run the regressor; returns a [B] tensor of normalized beam indices."""
    cfg = model.config
    x = batch if isinstance(batch, ad.Tensor) else ad.Tensor(
        batch, dtype=next(iter(model.params.values())).data.dtype)
    if x.ndim != 3 or x.shape[1] != cfg.conv_layers[0][0] or x.shape[2] != cfg.input_length:
        raise DimensionMismatch(
            f"expected batch [B, {cfg.conv_layers[0][0]}, {cfg.input_length}], got {x.shape}")
    p = model.params

    for i, (_, _, kernel, stride) in enumerate(cfg.conv_layers):
        x = ad.conv1d(x, p[f"conv{i}.w"], p[f"conv{i}.b"],
                      stride=stride, padding=kernel // 2)
        x = ad.relu(x)

    b = x.shape[0]
    s, d, h = cfg.seq_length, cfg.d_model, cfg.n_heads
    dk = d // h
    x = ad.transpose(x, (0, 2, 1))                       # [B, S, D]

    def heads(name):
        proj = ad.add(ad.matmul(x, p[f"attn.{name}"]), p[f"attn.b{name[1]}"])
        return ad.transpose(ad.reshape(proj, (b, s, h, dk)), (0, 2, 1, 3))

    q, k, v = heads("wq"), heads("wk"), heads("wv")
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(dk))
    attn = ad.softmax(scores, axis=-1)
    ctx = ad.matmul(attn, v)                             # [B, H, S, dk]
    ctx = ad.reshape(ad.transpose(ctx, (0, 2, 1, 3)), (b, s, d))
    z = ad.add(ad.matmul(ctx, p["attn.wo"]), p["attn.bo"])
    z = ad.dropout(z, cfg.dropout, train_mode, rng)
    flat = ad.flatten(z)
    hidden = ad.relu(ad.add(ad.matmul(flat, p["dense.w"]), p["dense.b"]))
    out = ad.add(ad.matmul(hidden, p["head.w"]), p["head.b"])
    return ad.reshape(out, (b,))


def decode_beam(yhat, n_beams: int):
    """Round-half-up index decoding, clamped to the codebook range."""
    if n_beams < 1:
        raise ValueError("n_beams must be >= 1")
    scaled = np.floor(np.asarray(yhat, dtype=np.float64) * (n_beams - 1) + 0.5)
    return np.clip(scaled, 0, n_beams - 1).astype(np.int64)


def predict_beam(model: Model, features, n_beams: int) -> int:
    """Beam index for a single [2, L] feature matrix."""
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    yhat = forward(model, arr, train_mode=False).data
    return int(decode_beam(yhat, n_beams)[0])


def predict_beams(model: Model, features, n_beams: int, chunk: int = 256) -> np.ndarray:
    """Vectorized index prediction for a [N, 2, L] feature array."""
    arr = np.asarray(features, dtype=np.float64)
    outs = [forward(model, arr[i:i + chunk], train_mode=False).data
            for i in range(0, arr.shape[0], chunk)]
    yhat = np.concatenate(outs) if outs else np.zeros(0)
    return decode_beam(yhat, n_beams)


def predict_values(model: Model, features, chunk: int = 256) -> np.ndarray:
    """Raw regressor outputs for a [N, 2, L] feature array."""
    arr = np.asarray(features, dtype=np.float64)
    outs = [forward(model, arr[i:i + chunk], train_mode=False).data
            for i in range(0, arr.shape[0], chunk)]
    return np.concatenate(outs) if outs else np.zeros(0)


def param_count(model: Model) -> int:
    return int(sum(t.data.size for t in model.params.values()))


def save_model(model: Model, path) -> None:
    """CBWT checkpoint: manifest of (name, shape) then float64 payloads."""
    path = str(path)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(model.params)))
        for name, tensor in model.params.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            shape = tensor.data.shape
            f.write(struct.pack("<B", len(shape)))
            f.write(struct.pack(f"<{len(shape)}Q", *shape))
        for tensor in model.params.values():
            f.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    sidecar = {"model_config": model.config.to_dict(),
               "norm_meta": model.norm_meta.to_dict() if model.norm_meta else None}
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, sort_keys=True, indent=1)
        f.write("\n")


def load_model(path) -> Model:
    path = str(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        (count,) = struct.unpack("<I", f.read(4))
        manifest = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim)) if ndim else ()
            manifest.append((name, shape))
        params = {}
        for name, shape in manifest:
            n_items = int(np.prod(shape)) if shape else 1
            raw = f.read(n_items * 8)
            if len(raw) != n_items * 8:
                raise FormatError(f"truncated payload for parameter '{name}'")
            params[name] = ad.Tensor(np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
    with open(path + ".json", "r", encoding="utf-8") as f:
        sidecar = json.load(f)
    config = ModelConfig.from_dict(sidecar["model_config"])
    norm_meta = NormMeta.from_dict(sidecar["norm_meta"]) if sidecar["norm_meta"] else None
    model = Model(params=params, config=config, norm_meta=norm_meta)
    if param_count(model) != sum(int(np.prod(s)) if s else 1 for _, s in manifest):
        raise FormatError("parameter manifest does not match payload")
    return model
