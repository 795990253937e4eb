"""Periodic beam-training emulation: exhaustive sweeps and RSS snapshots.

Every beacon interval each ordered device pair sweeps all (tx beam, rx beam)
combinations.  A snapshot stacks the sweeps of every pair into one dense
(pair, tx, rx) block of dBm measurements; measurement noise is redrawn per
entry, so a static arrangement yields i.i.d.-noisy copies of its noise-free
power map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import ChannelParams, pair_power_matrix, power_to_dbm
from .scene import Arrangement, Device, Scene, ScenarioConfig


@dataclass(frozen=True)
class ProtocolConfig:
    """Sweep cadence: one full round per beacon interval."""

    beacon_interval: float = 0.010
    trainings_per_arrangement: int = 200

    def __post_init__(self):
        if self.beacon_interval <= 0:
            raise ValueError("beacon_interval must be positive")
        if self.trainings_per_arrangement < 1:
            raise ValueError("trainings_per_arrangement must be >= 1")


@dataclass(frozen=True)
class SweepResult:
    """Winning beam combination of one pair sweep (lexicographic tie-break)."""

    best_tx_beam: int
    best_rx_beam: int


@dataclass
class Snapshot:
    """One beam-training round over all ordered pairs at one time index."""

    arrangement_id: int
    time_index: int
    measurements: np.ndarray  # float32, (n_pairs, n_tx, n_rx) dBm


def ordered_pairs(devices) -> tuple[tuple[int, int], ...]:
    """All ordered (tx index, rx index) device pairs, lexicographic."""
    n = len(devices)
    return tuple((i, j) for i in range(n) for j in range(n) if i != j)


def snapshot_feature_count(n_pairs: int, n_tx: int, n_rx: int) -> int:
    return n_pairs * n_tx * n_rx


def run_training(
    scene: Scene,
    tx: Device,
    rx: Device,
    params: ChannelParams,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, SweepResult]:
    """Sweep one ordered pair: dBm per beam combination plus the argmax beams."""
    power = pair_power_matrix(scene, tx, rx, params)
    measurements = power_to_dbm(power)
    if rng is not None:
        measurements = measurements + rng.normal(0.0, params.rss_noise_sigma_db, size=measurements.shape)
    measurements = np.maximum(measurements, params.noise_floor_dbm)
    best_flat = int(np.argmax(measurements))
    best_tx, best_rx = np.unravel_index(best_flat, measurements.shape)
    return measurements, SweepResult(best_tx_beam=int(best_tx), best_rx_beam=int(best_rx))


def pair_base_dbm(cfg: ScenarioConfig, people, params: ChannelParams) -> np.ndarray:
    """Noise-free dBm map over (pair, tx, rx) for a fixed set of people."""
    scene = Scene(cfg.environment, tuple(people))
    pairs = ordered_pairs(cfg.devices)
    n_tx = cfg.devices[0].codebook_tx.n_beams
    n_rx = cfg.devices[0].codebook_rx.n_beams
    base = np.empty((len(pairs), n_tx, n_rx))
    for k, (i, j) in enumerate(pairs):
        base[k] = power_to_dbm(pair_power_matrix(scene, cfg.devices[i], cfg.devices[j], params))
    return base


def collect_snapshots(
    cfg: ScenarioConfig,
    arrangement: Arrangement,
    protocol: ProtocolConfig,
    params: ChannelParams,
    seed: int,
    arrangement_id: int = 0,
) -> list[Snapshot]:
    """All snapshots for one static arrangement, one per beacon interval."""
    rng = np.random.default_rng(seed)
    base = pair_base_dbm(cfg, arrangement.people, params)
    snapshots = []
    for t in range(protocol.trainings_per_arrangement):
        noisy = base + rng.normal(0.0, params.rss_noise_sigma_db, size=base.shape)
        noisy = np.maximum(noisy, params.noise_floor_dbm)
        snapshots.append(
            Snapshot(
                arrangement_id=arrangement_id,
                time_index=t,
                measurements=noisy.astype(np.float32),
            )
        )
    return snapshots


def feature_vector(
    cfg: ScenarioConfig,
    people,
    pair_indices,
    params: ChannelParams,
    rng: np.random.Generator,
) -> np.ndarray:
    """One noisy sweep flattened to raw dBm features, restricted to given pairs.

    Feature order matches the dataset layout: pair block first, then tx beam,
    then rx beam.
    """
    scene = Scene(cfg.environment, tuple(people))
    pairs = ordered_pairs(cfg.devices)
    blocks = []
    for k in pair_indices:
        i, j = pairs[k]
        dbm = power_to_dbm(pair_power_matrix(scene, cfg.devices[i], cfg.devices[j], params))
        dbm = dbm + rng.normal(0.0, params.rss_noise_sigma_db, size=dbm.shape)
        blocks.append(np.maximum(dbm, params.noise_floor_dbm).ravel())
    return np.concatenate(blocks).astype(np.float32)
