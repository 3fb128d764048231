"""Seeded geometric channel synthesis with Doppler aging.

Each user sample is a 5-path geometry shared by the sub-6GHz and the
mm-wave band: both see the same departure angles and delays and differ
in carrier frequency, array size and per-band gain statistics.  The
line-of-sight path occupies slot 0; with the scenario's blockage
probability it is suppressed and its power is redistributed over the
reflected paths.

Angles are expressed through the direction cosines u_y = sin(az)cos(el)
and u_z = sin(el) of a boresight-at-broadside planar array, so a path
contributes

    H_p[e, c] = g_p * a_e(u_y, u_z) * exp(-j 2 pi c df tau_p)

with a the unit-modulus steering response and df the subcarrier spacing.
Doppler aging rotates each path by exp(j 2 pi f_d,p dt) and re-sums.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .config import SPEED_OF_LIGHT, ScenarioConfig

#: Reference distance (m) and LOS amplitude at that distance.
REF_DISTANCE = 10.0
REF_AMPLITUDE = 0.62
#: Amplitude decay exponent with distance (power decays twice as fast).
AMP_DECAY = 0.8
#: Mean extra delay of reflected paths, seconds.
NLOS_DELAY_SCALE = 150e-9
#: Per-band relative attenuation of the k-th reflected path, dB.
MM_NLOS_BASE_DB, MM_NLOS_STEP_DB = 5.0, 3.0
SUB6_NLOS_BASE_DB, SUB6_NLOS_STEP_DB = 2.0, 1.5
#: Lognormal jitter applied to every path amplitude, dB std.
SHADOW_DB = 1.5
#: Elevation scatter of reflected paths around the LOS ray, radians.
NLOS_EL_SPREAD = 0.07

SUB6 = "sub6"
MMWAVE = "mmwave"


@dataclass
class Geometry:
    """One user's kinematics plus its multipath decomposition."""

    position: tuple            # (x, y) metres from the serving base station
    distance: float
    velocity_kmh: float
    heading: float             # radians
    bs_index: int
    scene_group: int
    los: bool                  # True when the LOS path survived blockage
    azimuth: np.ndarray        # [P] departure azimuths, radians
    elevation: np.ndarray      # [P] departure elevations, radians (negative = down)
    delays: np.ndarray         # [P] seconds
    gains_sub6: np.ndarray     # [P] complex path gains
    gains_mm: np.ndarray       # [P]
    seed: int                  # stream fingerprint for this sample

    @property
    def n_paths(self) -> int:
        return self.azimuth.shape[0]

    def doppler_hz(self, carrier_freq: float) -> np.ndarray:
        """Per-path Doppler shift for motion along the heading."""
        v_ms = self.velocity_kmh / 3.6
        rel = np.cos(self.heading - self.azimuth) * np.cos(self.elevation)
        return v_ms * carrier_freq / SPEED_OF_LIGHT * rel


def sample_geometry(config: ScenarioConfig, sample_index: int,
                    velocity_kmh: float | None = None,
                    distance_m: float | None = None,
                    stream_tag: int = rngmod.GEOMETRY) -> Geometry:
    """Draw the geometry of one sample, deterministic in (base_seed, index).

    Optional velocity/distance overrides replace the drawn values while
    consuming the same random stream, so sweeps over kinematic grids see
    common random numbers across grid points.
    """
    group = sample_index % config.n_scene_groups
    rng = rngmod.stream(config.base_seed, stream_tag, group, sample_index)
    p = config.n_paths

    bearing = rng.uniform(config.sector[0], config.sector[1])
    d_lo, d_hi = config.distance_range
    distance = d_lo + (d_hi - d_lo) * rng.random()
    v_lo, v_hi = config.velocity_range
    velocity = v_lo + (v_hi - v_lo) * rng.random()
    heading = rng.uniform(0.0, 2.0 * np.pi)
    bs_index = int(rng.integers(config.n_basestations))
    blocked = rng.random() < config.blockage_prob

    nlos_az = rng.uniform(config.sector[0], config.sector[1], size=p - 1)
    nlos_el_jitter = rng.normal(0.0, NLOS_EL_SPREAD, size=p - 1)
    nlos_extra_delay = rng.exponential(NLOS_DELAY_SCALE, size=p - 1)
    atten_jitter_mm = np.abs(rng.normal(0.0, 2.0, size=p - 1))
    atten_jitter_sub6 = np.abs(rng.normal(0.0, 2.0, size=p - 1))
    shadow_db = rng.normal(0.0, SHADOW_DB, size=(2, p))
    refl_phase = rng.uniform(0.0, 2.0 * np.pi, size=(2, p - 1))

    if distance_m is not None:
        distance = float(distance_m)
    if velocity_kmh is not None:
        velocity = float(velocity_kmh)

    los_el = -np.arctan2(config.bs_height, distance)
    azimuth = np.concatenate(([bearing], nlos_az))
    elevation = np.concatenate(([los_el], los_el + nlos_el_jitter))
    delays = np.concatenate(([distance / SPEED_OF_LIGHT],
                             distance / SPEED_OF_LIGHT + nlos_extra_delay))

    base_amp = REF_AMPLITUDE * (REF_DISTANCE / distance) ** AMP_DECAY
    rel_mm = np.concatenate(
        ([0.0], MM_NLOS_BASE_DB + MM_NLOS_STEP_DB * np.arange(p - 1) + atten_jitter_mm))
    rel_sub6 = np.concatenate(
        ([0.0], SUB6_NLOS_BASE_DB + SUB6_NLOS_STEP_DB * np.arange(p - 1) + atten_jitter_sub6))
    amp_mm = base_amp * 10.0 ** (-(rel_mm - shadow_db[0]) / 20.0)
    amp_sub6 = base_amp * 10.0 ** (-(rel_sub6 - shadow_db[1]) / 20.0)

    phase_mm = np.concatenate(([0.0], refl_phase[0]))
    phase_sub6 = np.concatenate(([0.0], refl_phase[1]))
    gains_mm = amp_mm * np.exp(1j * (phase_mm - 2.0 * np.pi * config.carrier_freq_mmwave * delays))
    gains_sub6 = amp_sub6 * np.exp(1j * (phase_sub6 - 2.0 * np.pi * config.carrier_freq_sub6 * delays))

    if blocked:
        gains_mm = _suppress_los(gains_mm)
        gains_sub6 = _suppress_los(gains_sub6)

    return Geometry(
        position=(distance * np.cos(bearing), distance * np.sin(bearing)),
        distance=distance,
        velocity_kmh=velocity,
        heading=heading,
        bs_index=bs_index,
        scene_group=group,
        los=not blocked,
        azimuth=azimuth,
        elevation=elevation,
        delays=delays,
        gains_sub6=gains_sub6,
        gains_mm=gains_mm,
        seed=rngmod.fingerprint(config.base_seed, stream_tag, group, sample_index),
    )


def _suppress_los(gains: np.ndarray) -> np.ndarray:
    """Zero the LOS gain, rescaling the rest so total power is conserved."""
    total = np.sum(np.abs(gains) ** 2)
    rest = np.sum(np.abs(gains[1:]) ** 2)
    out = gains.copy()
    out[0] = 0.0
    if rest > 0.0:
        out[1:] *= np.sqrt(total / rest)
    return out


def steering_vector(u_y: float, u_z: float, n_y: int, n_z: int, spacing: float) -> np.ndarray:
    """Planar-array response, flattened y-major; every entry has modulus 1."""
    phase_y = 2.0 * np.pi * spacing * u_y * np.arange(n_y)
    phase_z = 2.0 * np.pi * spacing * u_z * np.arange(n_z)
    return np.exp(1j * (phase_y[:, None] + phase_z[None, :])).reshape(-1)


def _band_params(config: ScenarioConfig, band: str):
    if band == SUB6:
        ant = config.sub6_antenna
        return (ant[1], ant[2], config.sub6_subcarriers,
                config.bandwidth_sub6 / config.sub6_subcarriers, "gains_sub6")
    if band == MMWAVE:
        ant = config.mmwave_antenna
        return (ant[1], ant[2], config.mmwave_subcarriers,
                config.bandwidth_mmwave / config.mmwave_subcarriers, "gains_mm")
    raise ValueError(f"unknown band '{band}'")


def synthesize_channel_paths(geometry: Geometry, band: str, config: ScenarioConfig) -> np.ndarray:
    """Per-path channel matrices, stacked [P, elements, subcarriers]."""
    if geometry.n_paths < 1:
        raise ValueError("geometry must carry at least one path")
    n_y, n_z, n_sub, delta_f, gain_attr = _band_params(config, band)
    gains = getattr(geometry, gain_attr)
    u_y = np.sin(geometry.azimuth) * np.cos(geometry.elevation)
    u_z = np.sin(geometry.elevation)
    carriers = np.arange(n_sub)
    paths = np.empty((geometry.n_paths, n_y * n_z, n_sub), dtype=np.complex128)
    for i in range(geometry.n_paths):
        steer = steering_vector(u_y[i], u_z[i], n_y, n_z, config.antenna_spacing)
        freq = np.exp(-2j * np.pi * delta_f * geometry.delays[i] * carriers)
        paths[i] = gains[i] * np.outer(steer, freq)
    return paths


def synthesize_channel(geometry: Geometry, band: str, config: ScenarioConfig) -> np.ndarray:
    """Channel matrix [elements, subcarriers] for one band."""
    return synthesize_channel_paths(geometry, band, config).sum(axis=0)


def apply_doppler(channel: np.ndarray, doppler_hz: np.ndarray,
                  paths: np.ndarray, delta_t: float) -> np.ndarray:
    """Age a channel: rotate each path by its Doppler phase and re-sum.

    Exact identity when delta_t == 0 or every Doppler shift is zero.
    Rotation preserves every path magnitude.
    """
    if delta_t < 0:
        raise ValueError("delta_t cannot be negative")
    doppler_hz = np.asarray(doppler_hz, dtype=np.float64)
    if paths.shape[0] != doppler_hz.shape[0]:
        raise ValueError(
            f"{paths.shape[0]} paths but {doppler_hz.shape[0]} Doppler shifts")
    if delta_t == 0.0 or not np.any(doppler_hz):
        return channel
    rot = np.exp(2j * np.pi * doppler_hz * delta_t)
    return np.tensordot(rot, paths, axes=(0, 0)).astype(channel.dtype, copy=False)
