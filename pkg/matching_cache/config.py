"""Configuration management module."""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

import yaml

from .exceptions import ConfigError
from .types import Connectivity, FactorReading, PopularityMode, RequestMode

T = TypeVar("T")


@dataclass
class NetworkConfig:
    """Topology and catalog sizes; capacities in Mbit per time slot."""

    num_sps: int = 80
    num_sbs: int = 150
    num_ues: int = 400
    num_videos: int = 100
    num_categories: int = 6
    backhaul_total: float = 80.0
    radio_total: float = 180.0
    video_size: float = 1.0
    connectivity: Connectivity = Connectivity.COMPLETE
    connectivity_probability: float = 1.0

    def validate(self) -> None:
        for name in ("num_sps", "num_sbs", "num_ues", "num_videos", "num_categories"):
            if getattr(self, name) < 1:
                raise ConfigError(f"network.{name} must be at least 1")
        for name in ("backhaul_total", "radio_total", "video_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"network.{name} must be positive")
        if not 0.0 < self.connectivity_probability <= 1.0:
            raise ConfigError("network.connectivity_probability must be in (0, 1]")


@dataclass
class SocialConfig:
    """Generative process of the pseudo-random social world."""

    edge_probability: float = 0.02
    mean_shares: float = 20.0
    mean_views: float = 40.0
    view_probability: float = 0.3
    category_exponent: float = 1.0

    def validate(self) -> None:
        for name in ("edge_probability", "view_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"social.{name} must be in [0, 1]")
        for name in ("mean_shares", "mean_views"):
            if getattr(self, name) < 0:
                raise ConfigError(f"social.{name} must be non-negative")
        if self.category_exponent <= 0:
            raise ConfigError("social.category_exponent must be positive")


@dataclass
class PopularityConfig:
    """Local popularity source and its parameters."""

    mode: PopularityMode = PopularityMode.ZIPF
    gamma: float = 0.5
    zipf_exponent: float = 1.0
    factor_reading: FactorReading = FactorReading.VIEWER

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("popularity.gamma must be in [0, 1]")
        if self.zipf_exponent <= 0:
            raise ConfigError("popularity.zipf_exponent must be positive")


@dataclass
class ExperimentConfig:
    """Storage-ratio and request sweeps."""

    beta_list: List[float] = field(default_factory=lambda: [0.25, 0.75, 1.0])
    request_sweep: List[int] = field(
        default_factory=lambda: [50, 100, 200, 400, 700, 1000, 1500, 2000]
    )
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    request_mode: RequestMode = RequestMode.POPULARITY_WEIGHTED
    video_quota_cap: Optional[int] = None
    workers: int = 1
    verify_matching: bool = True

    def validate(self) -> None:
        for name in ("beta_list", "request_sweep", "seeds"):
            if not getattr(self, name):
                raise ConfigError(f"experiment.{name} must not be empty")
        for beta in self.beta_list:
            if not 0.0 < beta <= 1.0:
                raise ConfigError(f"experiment.beta_list value {beta} is outside (0, 1]")
        for count in self.request_sweep:
            if count < 1:
                raise ConfigError(f"experiment.request_sweep value {count} must be at least 1")
        if any(seed < 0 for seed in self.seeds):
            raise ConfigError("experiment.seeds must be non-negative")
        if self.video_quota_cap is not None and self.video_quota_cap < 1:
            raise ConfigError("experiment.video_quota_cap must be at least 1")
        if self.workers < 1:
            raise ConfigError("experiment.workers must be at least 1")


@dataclass
class ScenarioConfig:
    """Main configuration container."""

    network: NetworkConfig = None
    social: SocialConfig = None
    popularity: PopularityConfig = None
    experiment: ExperimentConfig = None

    def __post_init__(self):
        if self.network is None:
            self.network = NetworkConfig()
        if self.social is None:
            self.social = SocialConfig()
        if self.popularity is None:
            self.popularity = PopularityConfig()
        if self.experiment is None:
            self.experiment = ExperimentConfig()

    def validate(self) -> "ScenarioConfig":
        self.network.validate()
        self.social.validate()
        self.popularity.validate()
        self.experiment.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {name: _section_to_dict(getattr(self, name)) for name in SECTIONS}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ScenarioConfig":
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("Config root must be a mapping")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown config section(s): {', '.join(unknown)}")
        sections = {
            name: _section_from_dict(section_cls, data.get(name) or {}, name)
            for name, section_cls in SECTIONS.items()
        }
        try:
            return cls(**sections).validate()
        except TypeError as e:
            raise ConfigError(f"Config value has the wrong type: {e}") from e


SECTIONS: Dict[str, type] = {
    "network": NetworkConfig,
    "social": SocialConfig,
    "popularity": PopularityConfig,
    "experiment": ExperimentConfig,
}


def _section_to_dict(section: Any) -> Dict[str, Any]:
    return {
        key: value.value if isinstance(value, Enum) else value
        for key, value in asdict(section).items()
    }


def _section_from_dict(section_cls: Type[T], data: Dict[str, Any], name: str) -> T:
    if not isinstance(data, dict):
        raise ConfigError(f"Config section '{name}' must be a mapping")
    known = {f.name: f for f in fields(section_cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{name}': {', '.join(unknown)}")

    values = {}
    for key, value in data.items():
        default = getattr(section_cls(), key)
        if isinstance(default, Enum):
            try:
                value = type(default)(value)
            except ValueError:
                allowed = ", ".join(m.value for m in type(default))
                raise ConfigError(f"{name}.{key} must be one of: {allowed}") from None
        values[key] = value
    return section_cls(**values)


class ConfigManager:
    """Manage configuration loading and saving."""

    def __init__(self, config_path: Optional[Path] = None):
        """
        Initialize config manager.

        Args:
            config_path: Path to configuration file
        """
        self.config_path = config_path
        self.config = ScenarioConfig()

    def load_from_file(self, filepath: Path) -> ScenarioConfig:
        """
        Load configuration from file.

        Args:
            filepath: Path to config file (JSON or YAML)

        Returns:
            Validated ScenarioConfig
        """
        filepath = Path(filepath)

        if not filepath.exists():
            raise FileNotFoundError(f"Config file not found: {filepath}")

        with open(filepath, "r") as f:
            try:
                if filepath.suffix in [".yaml", ".yml"]:
                    data = yaml.safe_load(f)
                elif filepath.suffix == ".json":
                    data = json.load(f)
                else:
                    raise ConfigError(f"Unsupported config format: {filepath.suffix}")
            except (yaml.YAMLError, json.JSONDecodeError) as e:
                raise ConfigError(f"Cannot parse {filepath}: {e}") from e

        self.config = ScenarioConfig.from_dict(data)
        return self.config

    def save_to_file(self, filepath: Path, config: Optional[ScenarioConfig] = None) -> None:
        """
        Save configuration to file.

        Args:
            filepath: Path to save config file
            config: Config object to save (uses self.config if None)
        """
        filepath = Path(filepath)
        config = config or self.config

        data = config.to_dict()

        with open(filepath, "w") as f:
            if filepath.suffix in [".yaml", ".yml"]:
                yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
            elif filepath.suffix == ".json":
                json.dump(data, f, indent=2)
            else:
                raise ConfigError(f"Unsupported config format: {filepath.suffix}")

    def load_from_env(self, config: Optional[ScenarioConfig] = None) -> ScenarioConfig:
        """Apply environment variable overrides on top of a config."""
        config = config or self.config

        if os.getenv("CACHESIM_WORKERS"):
            config.experiment.workers = int(os.getenv("CACHESIM_WORKERS"))
        if os.getenv("CACHESIM_SEEDS"):
            config.experiment.seeds = [
                int(s) for s in os.getenv("CACHESIM_SEEDS").split(",") if s.strip()
            ]
        try:
            if os.getenv("CACHESIM_POPULARITY_MODE"):
                config.popularity.mode = PopularityMode(os.getenv("CACHESIM_POPULARITY_MODE"))
            if os.getenv("CACHESIM_REQUEST_MODE"):
                config.experiment.request_mode = RequestMode(os.getenv("CACHESIM_REQUEST_MODE"))
        except ValueError as e:
            raise ConfigError(f"Invalid environment override: {e}") from e

        self.config = config.validate()
        return self.config


# Default configuration
DEFAULT_CONFIG = ScenarioConfig()
