"""Experiment configuration: defaults, TOML loading, overrides, model building.

Keys mirror the usual parameter table of the network. All quantities are in
SI units (seconds, joules, watts, hertz). Arrays are per channel
(``lambda0``, ``lambda1``) or per sensor (``delta``; a scalar is broadcast).

Example file::

    M = 10
    K = 3
    lambda0 = [0.6, 0.8, 1.0]
    lambda1 = [0.4, 0.8, 0.6]
    delta = 0.007
    phi = 0.0
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Mapping, Tuple, Union

import numpy as np

from .detection import DetectorConfig
from .network import (
    EnergyModel,
    FrameTiming,
    NetworkModel,
    PuChannel,
    capacity_from_snr,
    sample_geometry,
)
from .optimizers import CeParams
from .throughput import ThroughputParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["Config", "ConfigError", "default_config", "load_config", "parse_override", "build_model"]

TABLE_LAMBDA0 = [0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8]
TABLE_LAMBDA1 = [0.4, 0.8, 0.6, 1.6, 1.2, 1.4, 1.8]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class Config:
    # network size
    M: int = 10
    N: int = 30  # data sensors; recorded only
    K: int = 7
    # channels
    W: float = 6e6
    lambda0: Tuple[float, ...] = tuple(TABLE_LAMBDA0)
    lambda1: Tuple[float, ...] = tuple(TABLE_LAMBDA1)
    snr_secondary_db: float = 20.0
    # propagation
    alpha: float = 3.5
    radius: float = 200.0
    pu_power: float = 1.0
    noise_var: float = 1e-6
    # frame and detector
    T_total: float = 0.1
    t_s: float = 0.006
    t_r: float = 0.001
    U: int = 6000
    P_f_bar: float = 0.1
    # energy harvesting
    e_s: float = 1.1e-4
    delta: Union[float, Tuple[float, ...]] = 0.007
    # objective
    PM_thr: float = 0.1
    kappa: float = 0.5
    phi: float = 0.5
    omega: float = -1.0  # negative selects the default (1 + phi) * sum_k C_k * T_total
    # cross-entropy
    Z: int = 300
    rho: float = 0.6
    epsilon: float = 1e-3
    beta: float = 0.3
    i_max: int = 500
    ce_representation: str = "bernoulli"
    # simulator
    mu: float = 1.0
    seed: int = 1

    def __post_init__(self):
        for name in ("lambda0", "lambda1"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        if not np.isscalar(self.delta):
            object.__setattr__(self, "delta", tuple(float(v) for v in self.delta))
        self.validate()

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        need(isinstance(self.M, int) and self.M >= 1, "M", "must be a positive integer")
        need(isinstance(self.K, int) and self.K >= 1, "K", "must be a positive integer")
        need(len(self.lambda0) == self.K, "lambda0", f"needs {self.K} entries, got {len(self.lambda0)}")
        need(len(self.lambda1) == self.K, "lambda1", f"needs {self.K} entries, got {len(self.lambda1)}")
        need(all(v > 0 for v in self.lambda0 + self.lambda1), "lambda0/lambda1", "rates must be positive")
        need(np.isscalar(self.delta) or len(self.delta) == self.M, "delta",
             f"needs a scalar or {self.M} entries")
        need(np.all(np.asarray(self.delta) > 0), "delta", "harvest rates must be positive")
        need(self.alpha > 2, "alpha", "path-loss exponent must exceed 2")
        for key in ("W", "radius", "pu_power", "noise_var", "T_total", "t_s", "t_r", "e_s", "mu"):
            need(getattr(self, key) > 0, key, "must be positive")
        need(self.t_s + self.M * self.t_r < self.T_total, "t_r",
             "t_s + M * t_r must be shorter than T_total")
        need(isinstance(self.U, int) and self.U >= 1, "U", "must be a positive integer")
        need(0 < self.P_f_bar < 1, "P_f_bar", "must lie in (0, 1)")
        need(0 <= self.PM_thr <= 1, "PM_thr", "must lie in [0, 1]")
        need(0 <= self.kappa < 1, "kappa", "must lie in [0, 1)")
        need(self.phi >= 0, "phi", "must be nonnegative")
        need(isinstance(self.Z, int) and self.Z >= 2, "Z", "must be an integer >= 2")
        need(0 < self.rho <= 1, "rho", "must lie in (0, 1]")
        need(self.epsilon > 0, "epsilon", "must be positive")
        need(0 < self.beta <= 1, "beta", "must lie in (0, 1]")
        need(isinstance(self.i_max, int) and self.i_max >= 1, "i_max", "must be a positive integer")
        need(self.ce_representation in ("bernoulli", "categorical"), "ce_representation",
             "must be 'bernoulli' or 'categorical'")
        need(self.ce_representation == "bernoulli" or self.K <= 20, "ce_representation",
             "categorical needs K <= 20")

    # -- conversions -------------------------------------------------------

    def replace(self, **changes) -> "Config":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: _coerce(k, v) for k, v in changes.items()})

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def capacity(self) -> float:
        return capacity_from_snr(self.snr_secondary_db)

    @property
    def sampling_rate(self) -> float:
        """Samples per second implied by U over the sensing time t_s."""
        return self.U / self.t_s

    def harvest_rates(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.delta, dtype=float), (self.M,)).copy()

    def detector(self) -> DetectorConfig:
        return DetectorConfig(self.P_f_bar, self.U, self.noise_var)

    def timing(self) -> FrameTiming:
        return FrameTiming(self.T_total, self.t_s, self.t_r)

    def throughput_params(self) -> ThroughputParams:
        return ThroughputParams(self.PM_thr, self.kappa, self.phi,
                                None if self.omega < 0 else self.omega)

    def ce_params(self, **changes) -> CeParams:
        base = CeParams(self.Z, self.rho, self.i_max, self.epsilon, self.beta,
                        self.ce_representation)
        return dataclasses.replace(base, **changes) if changes else base

    def channels(self) -> List[PuChannel]:
        c = self.capacity
        return [PuChannel(l0, l1, self.W, c) for l0, l1 in zip(self.lambda0, self.lambda1)]


_INT_KEYS = {"M", "N", "K", "U", "Z", "i_max", "seed"}
_ARRAY_KEYS = {"lambda0", "lambda1"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if key in _ARRAY_KEYS:
            return tuple(float(v) for v in np.atleast_1d(value))
        if key == "ce_representation":
            if not isinstance(value, str):
                raise ValueError
            return value
        if key == "delta":
            if np.isscalar(value):
                return float(value)
            return tuple(float(v) for v in value)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r}") from None


def default_config() -> Config:
    return Config()


def load_config(path, base: Config = None) -> Config:
    """Read a flat TOML file and apply it on top of ``base`` (defaults)."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{', '.join(nested)}: tables are not supported, use flat keys")
    return (base or Config()).replace(**data)


def parse_override(text: str) -> Tuple[str, Any]:
    """Parse ``key=value``; the value uses TOML syntax (``[1, 2]``, ``0.5``)."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = (s.strip() for s in text.split("=", 1))
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        raise ConfigError(f"{key}: cannot parse value {raw!r}") from None
    return key, value


def apply_overrides(cfg: Config, overrides: Mapping[str, Any]) -> Config:
    return cfg.replace(**dict(overrides)) if overrides else cfg


def build_model(cfg: Config, seed: int = None) -> NetworkModel:
    """Sample a deployment for ``seed`` (defaults to ``cfg.seed``) and build the model."""
    seed = cfg.seed if seed is None else seed
    geom = sample_geometry(seed, cfg.M, cfg.K, cfg.radius, cfg.alpha, cfg.pu_power)
    energy = EnergyModel(cfg.e_s, cfg.harvest_rates())
    return NetworkModel.from_geometry(geom, cfg.channels(), cfg.timing(), energy, cfg.detector())
