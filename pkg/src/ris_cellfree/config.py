"""Configuration dataclasses and YAML loading.

All sections share one YAML file with optional ``system``, ``optimizer`` and
``experiment`` mappings; missing keys fall back to the dataclass defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

ALGORITHMS = ("ide", "de", "ga", "random")


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the RIS-aided cell-free uplink.

    Powers are in mW, the noise power in dBm and the bandwidth in MHz, so
    rates come out in Mbps. ``blockage_prob`` is the probability that a
    user's direct links are all blocked.
    """

    num_aps: int = 100
    num_users: int = 10
    num_ris_elements: int = 100
    pilot_len: int = 5
    coherence_len: int = 200
    bandwidth_mhz: float = 20.0
    uplink_power_mw: float = 100.0
    pilot_power_mw: float = 100.0
    noise_power_dbm: float = -92.0
    user_weights: tuple[float, ...] | None = None
    blockage_prob: float = 0.5
    area_side: float = 1000.0
    ris_position: tuple[float, float] = (500.0, 500.0)
    element_spacing: float = 0.25
    shadowing_std_db: float = 8.0
    # direct AP-user links
    pathloss_intercept_db: float = -35.3
    pathloss_exponent: float = 3.76
    # AP-RIS and RIS-user hops
    ris_pathloss_intercept_db: float = -15.0
    ris_pathloss_exponent: float = 2.2
    ris_shadowing_std_db: float = 4.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("num_aps", "num_users", "num_ris_elements", "pilot_len", "coherence_len"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.pilot_len > self.coherence_len:
            raise ConfigError("pilot_len must not exceed coherence_len")
        if self.uplink_power_mw <= 0 or self.pilot_power_mw <= 0:
            raise ConfigError("powers must be positive")
        if self.bandwidth_mhz <= 0:
            raise ConfigError("bandwidth must be positive")
        if not 0.0 <= self.blockage_prob <= 1.0:
            raise ConfigError("blockage_prob must lie in [0, 1]")
        if self.element_spacing <= 0 or self.area_side <= 0:
            raise ConfigError("element_spacing and area_side must be positive")
        if self.user_weights is not None:
            if len(self.user_weights) != self.num_users:
                raise ConfigError("user_weights must have one entry per user")
            if any(w < 0 for w in self.user_weights):
                raise ConfigError("user_weights must be nonnegative")
        if len(self.ris_position) != 2:
            raise ConfigError("ris_position must be a 2-D point")

    @property
    def noise_mw(self) -> float:
        return 10.0 ** (self.noise_power_dbm / 10.0)

    @property
    def rho(self) -> float:
        """Normalized uplink data SNR."""
        return self.uplink_power_mw / self.noise_mw

    @property
    def pilot_snr(self) -> float:
        """Normalized pilot SNR ``p``."""
        return self.pilot_power_mw / self.noise_mw

    @property
    def weights(self) -> tuple[float, ...]:
        if self.user_weights is None:
            return (1.0,) * self.num_users
        return tuple(float(w) for w in self.user_weights)

    @property
    def prelog(self) -> float:
        """``B (1 - tau_p / tau_c)`` in MHz."""
        return self.bandwidth_mhz * (1.0 - self.pilot_len / self.coherence_len)


@dataclass(frozen=True)
class OptimizerConfig:
    pop_size: int = 50
    max_generations: int = 500
    lambda_init: float = 0.5
    lambda_window: int = 20
    pbest_fraction: float = 0.1
    shade_memory_size: int = 10
    algorithm: str = "ide"
    de_fixed_F: float = 0.5
    de_fixed_CR: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.pop_size < 4:
            raise ConfigError("pop_size must be at least 4")
        if self.max_generations < 0:
            raise ConfigError("max_generations must be nonnegative")
        if not 0.0 <= self.lambda_init <= 1.0:
            raise ConfigError("lambda_init must lie in [0, 1]")
        if self.lambda_window < 1 or self.shade_memory_size < 1:
            raise ConfigError("lambda_window and shade_memory_size must be >= 1")
        if not 0.0 < self.pbest_fraction <= 1.0:
            raise ConfigError("pbest_fraction must lie in (0, 1]")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not 0.0 <= self.de_fixed_CR <= 1.0 or self.de_fixed_F <= 0:
            raise ConfigError("de_fixed_F must be positive and de_fixed_CR in [0, 1]")


@dataclass(frozen=True)
class ExperimentSpec:
    system: SystemConfig = field(default_factory=SystemConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    num_topologies: int = 20
    algorithms: tuple[str, ...] = ALGORITHMS
    sweep: tuple[str, tuple[Any, ...]] | None = None
    output_dir: str = "results"
    master_seed: int = 0
    mc_draws: int = 200_000

    def __post_init__(self):
        if self.num_topologies < 1:
            raise ConfigError("num_topologies must be >= 1")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}; expected one of {ALGORITHMS}")
        if self.sweep is not None:
            param, values = self.sweep
            if param not in {f.name for f in fields(SystemConfig)}:
                raise ConfigError(f"sweep parameter {param!r} is not a SystemConfig field")
            if len(values) == 0:
                raise ConfigError("sweep needs at least one value")

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)


def desk_profile() -> ExperimentSpec:
    """Small system used by tests and the shipped ``configs/desk.yaml``."""
    system = SystemConfig(num_aps=20, num_users=5, num_ris_elements=32, pilot_len=3)
    optimizer = OptimizerConfig()
    return ExperimentSpec(system=system, optimizer=optimizer, num_topologies=20)


# --- (de)serialization -------------------------------------------------------

_TUPLE_FIELDS = {"user_weights", "ris_position"}


def _build(cls, data: dict[str, Any] | None):
    data = dict(data or {})
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for key in _TUPLE_FIELDS & set(data):
        if data[key] is not None:
            data[key] = tuple(float(v) for v in data[key])
    return cls(**data)


def spec_from_dict(data: dict[str, Any]) -> ExperimentSpec:
    data = dict(data or {})
    unknown = set(data) - {"system", "optimizer", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level config sections: {sorted(unknown)}")
    system = _build(SystemConfig, data.get("system"))
    optimizer = _build(OptimizerConfig, data.get("optimizer"))
    exp = dict(data.get("experiment") or {})
    if "algorithms" in exp:
        exp["algorithms"] = tuple(exp["algorithms"])
    if exp.get("sweep") is not None:
        sweep = exp["sweep"]
        exp["sweep"] = (sweep["parameter"], tuple(sweep["values"]))
    known = {f.name for f in fields(ExperimentSpec)} - {"system", "optimizer"}
    unknown = set(exp) - known
    if unknown:
        raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
    return ExperimentSpec(system=system, optimizer=optimizer, **exp)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def spec_to_dict(spec: ExperimentSpec) -> dict[str, Any]:
    system = {f.name: _plain(getattr(spec.system, f.name)) for f in fields(SystemConfig)}
    optimizer = {f.name: getattr(spec.optimizer, f.name) for f in fields(OptimizerConfig)}
    exp = {
        "num_topologies": spec.num_topologies,
        "algorithms": list(spec.algorithms),
        "sweep": None
        if spec.sweep is None
        else {"parameter": spec.sweep[0], "values": _plain(spec.sweep[1])},
        "output_dir": spec.output_dir,
        "master_seed": spec.master_seed,
        "mc_draws": spec.mc_draws,
    }
    return {"system": system, "optimizer": optimizer, "experiment": exp}


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return spec_from_dict(yaml.safe_load(text) or {})
