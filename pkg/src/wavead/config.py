"""Run configuration: defaults, JSON round-trip, and validation.

Every knob has a default so a bare ``wavead run`` reproduces the reference
benchmark experiment; the full configuration is echoed into the report so
any run can be reproduced from its outputs alone.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .ingest import WindowConfig
from .qlearning import RLParams
from .synth import InjectorDefaults


@dataclass
class NetworkConfig:
    filters: tuple[int, int] = (16, 8)
    latent_dim: int = 3
    dropout: float = 0.5
    epochs: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-3
    sep_weight: float = 0.1  # weight of the latent-separation term (eta)
    sep_cap: float = 0.5  # saturation of the separation bonus
    latent_scale: float = 0.25  # bound of the squashed latent


@dataclass
class SynthConfig:
    fraction: float = 0.1
    cyclic_amplitude: float = 2.0
    sudden_amplitude: float = 3.0
    gradual_amplitude: float = 3.0
    cyclic_period: int = 5
    sudden_onset: int = 5
    gradual_onset: int = 4

    def injector_defaults(self) -> InjectorDefaults:
        return InjectorDefaults(
            cyclic_amplitude=self.cyclic_amplitude,
            sudden_amplitude=self.sudden_amplitude,
            gradual_amplitude=self.gradual_amplitude,
            cyclic_period=self.cyclic_period,
            sudden_onset=self.sudden_onset,
            gradual_onset=self.gradual_onset,
        )


@dataclass
class BenchmarkConfig:
    length: int = 2000
    features: int = 5
    degradation_onset: int | None = None


@dataclass
class WaveletConfig:
    family: str = "db1"
    levels: int = 3


@dataclass
class SeedConfig:
    data: int = 7
    train: int = 11
    rl: int = 13


@dataclass
class PathConfig:
    input: str | None = None  # series CSV; defaults to the generated benchmark
    labels: str | None = None  # anomaly schedule JSON


@dataclass
class RunConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    rl: RLParams = field(default_factory=RLParams)
    synth: SynthConfig = field(default_factory=SynthConfig)
    benchmark: BenchmarkConfig = field(default_factory=BenchmarkConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    paths: PathConfig = field(default_factory=PathConfig)
    train_fraction: float = 0.7
    mc_samples: int = 30

    def validate(self) -> None:
        try:
            self.rl.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples must be at least 2")
        if self.network.epochs < 0 or self.network.batch_size < 1:
            raise ConfigError("invalid network epochs/batch_size")
        if not 0.0 <= self.network.dropout < 1.0:
            raise ConfigError("network dropout must be in [0, 1)")
        if self.network.sep_weight < 0:
            raise ConfigError("network sep_weight must be nonnegative")
        if not 0.0 <= self.synth.fraction <= 1.0:
            raise ConfigError("synth fraction must be in [0, 1]")
        if self.wavelet.levels < 1:
            raise ConfigError("wavelet levels must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "window": WindowConfig,
    "wavelet": WaveletConfig,
    "network": NetworkConfig,
    "rl": RLParams,
    "synth": SynthConfig,
    "benchmark": BenchmarkConfig,
    "seeds": SeedConfig,
    "paths": PathConfig,
}

_LIST_FIELDS = {("network", "filters")}


def _build_section(name: str, cls, payload: dict):
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in payload.items():
        if key not in known:
            raise ConfigError(f"unknown key '{name}.{key}'")
        if (name, key) in _LIST_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section '{name}': {exc}") from None


def config_from_dict(payload: dict) -> RunConfig:
    """Build a RunConfig from a (possibly partial) nested dict."""
    if not isinstance(payload, dict):
        raise ConfigError("configuration must be a JSON object")
    kwargs: dict = {}
    for key, value in payload.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section '{key}' must be an object")
            kwargs[key] = _build_section(key, _SECTIONS[key], value)
        elif key in ("train_fraction", "mc_samples"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown configuration key '{key}'")
    cfg = RunConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read a JSON config file; None yields the defaults."""
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return config_from_dict(payload)
