"""Physical and stochastic environment of the sensing network.

Covers primary-user ON-OFF channel statistics, the path-loss SNR matrix from
node geometry, frame timing, and the energy-harvesting budget that caps how
many channels each spectrum sensor may sense per frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Sequence, Tuple

import numpy as np

from .detection import DetectorConfig, LocalProbs, local_probs

__all__ = [
    "PuChannel",
    "Geometry",
    "FrameTiming",
    "EnergyModel",
    "NetworkModel",
    "stationary_probs",
    "snr_matrix",
    "fc_gain",
    "capacity_from_snr",
    "max_channels_per_sensor",
    "channel_caps",
    "is_feasible",
    "sample_disk",
    "sample_geometry",
]

# Relative slack for budget comparisons, so that e.g. 1.1 mW * 100 ms vs
# 0.11 mJ is treated as exactly one channel instead of 0.99999.
_BUDGET_SLACK = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PuChannel:
    lambda_on_to_off: float
    lambda_off_to_on: float
    bandwidth: float = 6e6
    capacity: float = math.log2(1 + 10 ** 2.0)

    def __post_init__(self):
        if self.lambda_on_to_off <= 0 or self.lambda_off_to_on <= 0:
            raise ValueError("transition rates must be positive")
        if self.bandwidth <= 0 or self.capacity <= 0:
            raise ValueError("bandwidth and capacity must be positive")

    @property
    def probs(self) -> Tuple[float, float]:
        return stationary_probs(self.lambda_on_to_off, self.lambda_off_to_on)


@dataclass(frozen=True)
class Geometry:
    sensor_positions: np.ndarray
    pu_positions: np.ndarray
    disk_radius: float = 200.0
    path_loss_exponent: float = 3.5
    pu_tx_power: float = 1.0
    fc_position: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "sensor_positions", _frozen(self.sensor_positions).reshape(-1, 2))
        object.__setattr__(self, "pu_positions", _frozen(self.pu_positions).reshape(-1, 2))
        if self.path_loss_exponent <= 2:
            raise ValueError("path-loss exponent must exceed 2")
        if self.pu_tx_power <= 0 or self.disk_radius <= 0:
            raise ValueError("power and radius must be positive")
        slack = 1e-9 * self.disk_radius
        for pts in (self.sensor_positions, self.pu_positions):
            if np.any(np.hypot(pts[:, 0], pts[:, 1]) > self.disk_radius + slack):
                raise ValueError("positions must lie within the disk")

    @property
    def distances(self) -> np.ndarray:
        diff = self.sensor_positions[:, None, :] - self.pu_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


@dataclass(frozen=True)
class FrameTiming:
    frame_len: float = 0.1
    sense_len: float = 0.006
    report_slot: float = 0.001

    def __post_init__(self):
        if min(self.frame_len, self.sense_len, self.report_slot) <= 0:
            raise ValueError("frame timings must be positive")

    def check_reporting(self, m_count: int) -> None:
        """Raise unless sensing plus ``m_count`` report slots fit in a frame."""
        if self.sense_len + m_count * self.report_slot >= self.frame_len:
            raise ValueError(
                f"t_s + M*t_r = {self.sense_len + m_count * self.report_slot:g} s "
                f"does not fit in the {self.frame_len:g} s frame"
            )


@dataclass(frozen=True)
class EnergyModel:
    sense_energy: float
    harvest_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "harvest_rates", _frozen(self.harvest_rates).reshape(-1))
        if self.sense_energy <= 0 or np.any(self.harvest_rates <= 0):
            raise ValueError("sensing energy and harvest rates must be positive")


def stationary_probs(lambda0: float, lambda1: float) -> Tuple[float, float]:
    """Stationary (P(H1), P(H0)) of the ON-OFF chain.

    ``lambda0`` is the ON->OFF rate and ``lambda1`` the OFF->ON rate.
    """
    if not (lambda0 > 0 and lambda1 > 0):
        raise ValueError("transition rates must be positive")
    total = lambda0 + lambda1
    prob_h0 = lambda0 / total
    return 1.0 - prob_h0, prob_h0


def snr_matrix(geom: Geometry, noise_variance: float) -> np.ndarray:
    """Linear PU-to-sensor SNR, power * D**-alpha / noise, shape (M, K)."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    d = geom.distances
    if np.any(d <= 0):
        raise ValueError("a sensor coincides with a PU transmitter")
    return geom.pu_tx_power * d ** (-geom.path_loss_exponent) / noise_variance


def fc_gain(geom: Geometry) -> np.ndarray:
    """Path-loss gain of each sensor's link to the fusion center.

    Only the ordering matters for reporter selection, so no power or noise
    scale is applied. A sensor sitting on the FC gets an infinite gain.
    """
    diff = geom.sensor_positions - np.asarray(geom.fc_position, dtype=float)
    d = np.hypot(diff[:, 0], diff[:, 1])
    with np.errstate(divide="ignore"):
        return d ** (-geom.path_loss_exponent)


def capacity_from_snr(snr_db: float) -> float:
    """Shannon spectral efficiency log2(1 + SNR) in bits/s/Hz."""
    return math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def max_channels_per_sensor(energy: EnergyModel, timing: FrameTiming, sensor: int) -> int:
    """floor(delta_m * T_total / e_s): channels sensor ``sensor`` can afford."""
    budget = energy.harvest_rates[sensor] * timing.frame_len / energy.sense_energy
    return int(math.floor(budget * (1 + _BUDGET_SLACK)))


def channel_caps(energy: EnergyModel, timing: FrameTiming) -> np.ndarray:
    budget = energy.harvest_rates * timing.frame_len / energy.sense_energy
    return np.floor(budget * (1 + _BUDGET_SLACK)).astype(int)


def is_feasible(J, energy: EnergyModel, timing: FrameTiming) -> Tuple[bool, List[int]]:
    """Check the per-sensor harvesting constraint; return (ok, violators)."""
    J = np.asarray(J)
    if J.ndim != 2 or J.shape[0] != energy.harvest_rates.shape[0]:
        raise ValueError(
            f"assignment has shape {J.shape}, expected ({energy.harvest_rates.shape[0]}, K)"
        )
    over = J.sum(axis=1) > channel_caps(energy, timing)
    violators = [int(m) for m in np.flatnonzero(over)]
    return not violators, violators


def sample_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """``n`` points uniform over a disk centred at the origin."""
    u = rng.random((n, 2))
    r = radius * np.sqrt(u[:, 0])
    theta = 2.0 * np.pi * u[:, 1]
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def sample_geometry(
    seed: int,
    m_count: int,
    k_count: int,
    radius: float = 200.0,
    path_loss_exponent: float = 3.5,
    pu_tx_power: float = 1.0,
) -> Geometry:
    """Seeded uniform placement of sensors and one PU transmitter per channel.

    Sensors and PUs draw from separate streams, and points are generated in
    order, so the first ``m`` sensors of an ``M``-sensor layout coincide with
    an ``m``-sensor layout from the same seed. Sweeps over M and K therefore
    grow one deployment instead of redrawing it.
    """
    sensor_rng = np.random.default_rng([seed, 0, 0])
    pu_rng = np.random.default_rng([seed, 0, 1])
    return Geometry(
        sensor_positions=sample_disk(sensor_rng, m_count, radius),
        pu_positions=sample_disk(pu_rng, k_count, radius),
        disk_radius=radius,
        path_loss_exponent=path_loss_exponent,
        pu_tx_power=pu_tx_power,
    )


@dataclass(frozen=True)
class NetworkModel:
    """Everything the throughput evaluator and simulator need about a network.

    ``snr`` is the (M, K) linear PU-to-sensor SNR matrix and ``fc_gain`` the
    per-sensor gain towards the fusion center used for reporter selection.
    """

    channels: Tuple[PuChannel, ...]
    snr: np.ndarray
    timing: FrameTiming
    energy: EnergyModel
    detector: DetectorConfig
    fc_gain: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "snr", _frozen(self.snr))
        M, K = self.snr.shape
        if len(self.channels) != K:
            raise ValueError(f"{len(self.channels)} channels but SNR matrix has {K} columns")
        if self.energy.harvest_rates.shape[0] != M:
            raise ValueError(f"{self.energy.harvest_rates.shape[0]} harvest rates for {M} sensors")
        if np.any(self.snr < 0):
            raise ValueError("SNR must be nonnegative")
        gain = np.ones(M) if self.fc_gain is None else self.fc_gain
        object.__setattr__(self, "fc_gain", _frozen(gain))
        if self.fc_gain.shape != (M,):
            raise ValueError("fc_gain needs one entry per sensor")
        self.timing.check_reporting(M)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.snr.shape

    @cached_property
    def local(self) -> LocalProbs:
        return local_probs(self.snr, self.detector)

    @cached_property
    def prob_h0(self) -> np.ndarray:
        return _frozen([c.probs[1] for c in self.channels])

    @cached_property
    def prob_h1(self) -> np.ndarray:
        return _frozen([c.probs[0] for c in self.channels])

    @cached_property
    def capacity(self) -> np.ndarray:
        return _frozen([c.capacity for c in self.channels])

    @cached_property
    def caps(self) -> np.ndarray:
        return channel_caps(self.energy, self.timing)

    def throughput_bound(self) -> float:
        """sum_k C_k * T_total, strictly above any achievable throughput."""
        return float(self.capacity.sum() * self.timing.frame_len)

    @classmethod
    def from_geometry(
        cls,
        geom: Geometry,
        channels: Sequence[PuChannel],
        timing: FrameTiming,
        energy: EnergyModel,
        detector: DetectorConfig,
    ) -> "NetworkModel":
        return cls(
            channels=tuple(channels),
            snr=snr_matrix(geom, detector.noise_variance),
            timing=timing,
            energy=energy,
            detector=detector,
            fc_gain=fc_gain(geom),
        )
