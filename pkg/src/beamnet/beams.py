"""Beam codebook construction and spectral-efficiency evaluation.

The codebook is a Kronecker product of DFT bases over a uniform planar
array: an oversampled azimuth basis over the y axis and a critically
sampled elevation basis over the z axis.  Beam b = a*n_el + e pairs
azimuth column a with elevation column e; column 0 is the broadside
(DC) beam.  Columns have unit Euclidean norm by construction.

Spectral efficiency of a beam f on channel H (elements x subcarriers):

    SE = (1/C) * sum_c log2(1 + snr * |g_c|^2),   g_c = H[:,c]^H f

An un-averaged sum variant is exposed as well.  Beam training cost is
accounted for by scaling SE with the fraction of the frame left after
measuring n beams.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, FormatError

CODEBOOK_MAGIC = b"CBKB"
CODEBOOK_VERSION = 1

#: Gain returned when the reference (denominator) SE is zero.
UNDEFINED_GAIN = float("nan")


@dataclass
class LinkBudget:
    snr_db: float
    n_subcarriers: int

    def __post_init__(self):
        if self.n_subcarriers < 1:
            raise ValueError(f"need at least one subcarrier, got {self.n_subcarriers}")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


@dataclass
class Codebook:
    vectors: np.ndarray        # [n_elements, n_beams], complex, unit-norm columns
    azimuth_grid: np.ndarray   # [n_az] beam azimuths, radians
    elevation_grid: np.ndarray  # [n_el] beam elevations, radians
    oversampling: tuple        # (azimuth, elevation)

    @property
    def n_elements(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_beams(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_elevation(self) -> int:
        return self.elevation_grid.shape[0]

    def beam(self, index: int) -> np.ndarray:
        return self.vectors[:, index]


def _dft_basis(n: int, oversampling: int):
    """Columns exp(j*pi*n*u_k)/sqrt(n) for u_k = 2k/(os*n), wrapped to [-1, 1)."""
    points = oversampling * n
    u = 2.0 * np.arange(points) / points
    u = np.where(u >= 1.0, u - 2.0, u)
    phase = np.pi * np.outer(np.arange(n), u)
    return np.exp(1j * phase) / np.sqrt(n), u


def build_codebook(elements_y: int, elements_z: int, oversampling_az: int = 2) -> Codebook:
    """DFT codebook over a y*z planar array with azimuth oversampling."""
    if elements_y < 1 or elements_z < 1 or oversampling_az < 1:
        raise ValueError("element and oversampling counts must be >= 1")
    basis_y, u_y = _dft_basis(elements_y, oversampling_az)
    basis_z, u_z = _dft_basis(elements_z, 1)
    # kron pairs element (y,z) -> row y*nz+z and beam (a,e) -> column a*n_el+e
    vectors = np.kron(basis_y, basis_z)
    return Codebook(
        vectors=vectors,
        azimuth_grid=np.arcsin(u_y),
        elevation_grid=np.arcsin(u_z),
        oversampling=(oversampling_az, 1),
    )


def effective_channel(channel: np.ndarray, beam: np.ndarray) -> np.ndarray:
    """Per-subcarrier complex gain g_c = H[:,c]^H f."""
    channel = np.asarray(channel)
    beam = np.asarray(beam)
    if channel.ndim != 2 or beam.ndim != 1 or channel.shape[0] != beam.shape[0]:
        raise DimensionMismatch(
            f"effective_channel: H {channel.shape} incompatible with f {beam.shape}")
    return channel.conj().T @ beam


def spectral_efficiency(channel, beam, budget: LinkBudget) -> float:
    """Mean over subcarriers of log2(1 + snr*|g_c|^2), bits/s/Hz."""
    g = effective_channel(channel, beam)
    if g.shape[0] != budget.n_subcarriers:
        raise DimensionMismatch(
            f"channel has {g.shape[0]} subcarriers, budget says {budget.n_subcarriers}")
    power = np.abs(g.astype(np.complex128)) ** 2
    return float(np.mean(np.log2(1.0 + budget.snr_linear * power)))


def spectral_efficiency_sum(channel, beam, budget: LinkBudget) -> float:
    """Un-averaged sum variant of the spectral efficiency."""
    return spectral_efficiency(channel, beam, budget) * budget.n_subcarriers


def beam_se_profile(channel: np.ndarray, codebook: Codebook, budget: LinkBudget) -> np.ndarray:
    """Spectral efficiency of every codebook beam on one channel."""
    channel = np.asarray(channel)
    if channel.shape[0] != codebook.n_elements:
        raise DimensionMismatch(
            f"channel has {channel.shape[0]} elements, codebook {codebook.n_elements}")
    if channel.shape[1] != budget.n_subcarriers:
        raise DimensionMismatch(
            f"channel has {channel.shape[1]} subcarriers, budget says {budget.n_subcarriers}")
    gains = channel.conj().T @ codebook.vectors            # [C, n_beams]
    power = np.abs(gains.astype(np.complex128)) ** 2
    return np.log2(1.0 + budget.snr_linear * power).mean(axis=0)


def exhaustive_search(channel, codebook: Codebook, budget: LinkBudget):
    """Best beam by full scan; ties broken toward the lowest index."""
    se = beam_se_profile(channel, codebook, budget)
    best = int(np.argmax(se))
    return best, float(se[best])


def training_fraction(n_trained_beams: int, mac) -> float:
    """Fraction of the frame left after measuring n beams, clipped at 0."""
    if n_trained_beams < 0:
        raise ValueError("beam count cannot be negative")
    used = n_trained_beams * mac.symbol_duration / mac.frame_duration
    return max(0.0, 1.0 - used)


def overhead_adjusted_se(se: float, n_trained_beams: int, mac) -> float:
    """Effective SE after charging beam-measurement airtime."""
    return se * training_fraction(n_trained_beams, mac)


def beam_training_gain(predicted_idx: int, channel_aged, codebook: Codebook,
                       budget: LinkBudget, mac, n_probe_beams: int = 16) -> float:
    """Overhead-adjusted SE of the predicted beam relative to exhaustive search.

    The exhaustive baseline is charged one measurement per codebook beam;
    the predictor is charged only its probe beams.  Both are evaluated on
    the same (aged) channel.  Returns UNDEFINED_GAIN when the baseline's
    adjusted SE is zero.
    """
    if not (0 <= predicted_idx < codebook.n_beams):
        raise ValueError(f"beam index {predicted_idx} outside [0, {codebook.n_beams})")
    se_pred = spectral_efficiency(channel_aged, codebook.beam(predicted_idx), budget)
    _, se_best = exhaustive_search(channel_aged, codebook, budget)
    num = overhead_adjusted_se(se_pred, n_probe_beams, mac)
    den = overhead_adjusted_se(se_best, codebook.n_beams, mac)
    if den == 0.0:
        return UNDEFINED_GAIN
    return num / den


def save_codebook(codebook: Codebook, path) -> None:
    """Binary dump: CBKB magic, version, dims, float64 interleaved columns."""
    vec = np.ascontiguousarray(codebook.vectors.astype(np.complex128))
    with open(path, "wb") as f:
        f.write(CODEBOOK_MAGIC)
        f.write(struct.pack("<I", CODEBOOK_VERSION))
        f.write(struct.pack("<IIII", vec.shape[0], vec.shape[1],
                            codebook.oversampling[0], codebook.oversampling[1]))
        f.write(vec.view(np.float64).astype("<f8").tobytes())
        meta = json.dumps({
            "azimuth_grid": codebook.azimuth_grid.tolist(),
            "elevation_grid": codebook.elevation_grid.tolist(),
        }, sort_keys=True).encode("utf-8")
        f.write(struct.pack("<Q", len(meta)))
        f.write(meta)


def load_codebook(path) -> Codebook:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CODEBOOK_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {CODEBOOK_MAGIC!r}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != CODEBOOK_VERSION:
            raise FormatError(f"unsupported codebook version {version}")
        n_elem, n_beams, os_az, os_el = struct.unpack("<IIII", f.read(16))
        raw = f.read(n_elem * n_beams * 16)
        if len(raw) != n_elem * n_beams * 16:
            raise FormatError("truncated codebook payload")
        vectors = np.frombuffer(raw, dtype="<c16").reshape(n_elem, n_beams).copy()
        (meta_len,) = struct.unpack("<Q", f.read(8))
        meta = json.loads(f.read(meta_len).decode("utf-8"))
    return Codebook(
        vectors=vectors,
        azimuth_grid=np.asarray(meta["azimuth_grid"], dtype=np.float64),
        elevation_grid=np.asarray(meta["elevation_grid"], dtype=np.float64),
        oversampling=(os_az, os_el),
    )
