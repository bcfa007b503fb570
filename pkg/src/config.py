"""Configuration module for the mining-cluster selection experiments."""

import dataclasses
import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.channel import (
    ChannelParams,
    channel_param_problems,
    dbm_per_hz_to_watts_per_hz,
)
from src.errors import ConfigError, ValidationError

logger = logging.getLogger("config")

ALGORITHMS = (
    "auction",
    "nearest",
    "bruteforce",
    "auction-infinite",
    "nearest-infinite",
)
SWEEP_VARIABLES = ("clusters", "delta", "epsilon")


@dataclass(frozen=True)
class ScenarioConfig:
    """Topology and radio settings for one offloading epoch."""

    area_size: float = 1000.0  # side of the square deployment area, m
    num_vehicles: int = 30
    num_clusters: int = 10
    v_slots: int = 5
    capacity_alpha: Optional[int] = None  # None means alpha = v_slots
    path_loss_exp: float = 3.0
    tx_power_dbm: float = 25.0
    n_units: Optional[int] = None  # None means floor(n_max / num_vehicles)
    min_distance: float = 1.0

    @property
    def alpha(self) -> int:
        return self.v_slots if self.capacity_alpha is None else self.capacity_alpha

    def problems(self) -> List[str]:
        found = []
        if not self.area_size > 0:
            found.append(f"scenario.area_size must be > 0, got {self.area_size!r}")
        for name in ("num_vehicles", "num_clusters", "v_slots"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                found.append(f"scenario.{name} must be an integer >= 1, got {value!r}")
        if self.capacity_alpha is not None and (
            not isinstance(self.capacity_alpha, int)
            or not 1 <= self.capacity_alpha <= self.v_slots
        ):
            found.append(
                f"scenario.capacity_alpha must satisfy 1 <= alpha <= v_slots "
                f"({self.v_slots}), got {self.capacity_alpha!r}"
            )
        if self.n_units is not None and (
            not isinstance(self.n_units, int) or self.n_units < 1
        ):
            found.append(f"scenario.n_units must be an integer >= 1, got {self.n_units!r}")
        if not self.min_distance > 0:
            found.append(f"scenario.min_distance must be > 0, got {self.min_distance!r}")
        return found


@dataclass(frozen=True)
class AuctionConfig:
    """Bid increment and utility offset of the auction."""

    delta: float = 1e-4
    c_override: Optional[float] = None

    def problems(self) -> List[str]:
        found = []
        if not isinstance(self.delta, (int, float)) or not self.delta > 0:
            found.append(f"auction.delta must be > 0, got {self.delta!r}")
        return found


@dataclass(frozen=True)
class BaselineConfig:
    """Nearest-cluster baseline options."""

    enforce_capacity: bool = True

    def problems(self) -> List[str]:
        if not isinstance(self.enforce_capacity, bool):
            return [
                f"baseline.enforce_capacity must be a boolean, got {self.enforce_capacity!r}"
            ]
        return []


@dataclass(frozen=True)
class RunConfig:
    """Replication loop, sweep and output settings."""

    seed: int = 0
    replications: int = 10
    algorithms: List[str] = field(default_factory=lambda: ["auction", "nearest"])
    sweep_var: Optional[str] = None
    sweep_grid: List[float] = field(default_factory=list)
    output_dir: str = "output"
    trace: bool = False
    threads: int = 1
    oracle_max_maps: int = 10**7

    def problems(self) -> List[str]:
        found = []
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            found.append(f"run.seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not isinstance(self.replications, int) or self.replications < 1:
            found.append(f"run.replications must be >= 1, got {self.replications!r}")
        if not self.algorithms:
            found.append("run.algorithms must name at least one algorithm")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                found.append(
                    f"run.algorithms has unknown algorithm {name!r}; "
                    f"choose from {', '.join(ALGORITHMS)}"
                )
        if self.sweep_var is not None:
            if self.sweep_var not in SWEEP_VARIABLES:
                found.append(
                    f"run.sweep_var must be one of {', '.join(SWEEP_VARIABLES)}, "
                    f"got {self.sweep_var!r}"
                )
            if not self.sweep_grid:
                found.append("run.sweep_grid must be non-empty when sweep_var is set")
        elif self.sweep_grid:
            found.append("run.sweep_grid is set but run.sweep_var is missing")
        if not isinstance(self.threads, int) or self.threads < 1:
            found.append(f"run.threads must be >= 1, got {self.threads!r}")
        if not isinstance(self.oracle_max_maps, int) or self.oracle_max_maps < 1:
            found.append(f"run.oracle_max_maps must be >= 1, got {self.oracle_max_maps!r}")
        return found


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete experiment description, one field per config section."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    auction: AuctionConfig = field(default_factory=AuctionConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    run: RunConfig = field(default_factory=RunConfig)

    @property
    def output_dir(self) -> Path:
        return Path(self.run.output_dir)

    def validate(self) -> None:
        """Check every section and raise one ConfigError listing all problems."""
        problems = (
            self.scenario.problems()
            + self.auction.problems()
            + self.baseline.problems()
            + self.run.problems()
        )
        problems += self._sweep_problems()
        if problems:
            raise ConfigError("Invalid configuration:", problems)

    def _sweep_problems(self) -> List[str]:
        found = []
        var = self.run.sweep_var
        for value in self.run.sweep_grid:
            if var == "clusters" and (int(value) != value or value < 1):
                found.append(f"run.sweep_grid cluster counts must be integers >= 1, got {value!r}")
            elif var == "delta" and not value > 0:
                found.append(f"run.sweep_grid deltas must be > 0, got {value!r}")
            elif var == "epsilon" and not 0 < value < 1:
                found.append(f"run.sweep_grid epsilons must lie in (0, 1), got {value!r}")
        return found

    def at_sweep_point(self, value: Optional[float]) -> "ExperimentConfig":
        """Return a copy with the sweep variable set to ``value``."""
        var = self.run.sweep_var
        if var is None or value is None:
            return self
        if var == "clusters":
            return dataclasses.replace(
                self, scenario=dataclasses.replace(self.scenario, num_clusters=int(value))
            )
        if var == "delta":
            return dataclasses.replace(
                self, auction=dataclasses.replace(self.auction, delta=float(value))
            )
        return dataclasses.replace(
            self, channel=dataclasses.replace(self.channel, epsilon=float(value))
        )

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready echo of the full configuration."""
        return {
            "scenario": dataclasses.asdict(self.scenario),
            "channel": dataclasses.asdict(self.channel),
            "auction": dataclasses.asdict(self.auction),
            "baseline": dataclasses.asdict(self.baseline),
            "run": dataclasses.asdict(self.run),
        }


_SECTIONS = {
    "scenario": ScenarioConfig,
    "auction": AuctionConfig,
    "baseline": BaselineConfig,
    "run": RunConfig,
}

_CHANNEL_KEYS = {
    "b0",
    "t",
    "n_max",
    "sigma2",
    "sigma2_dbm_per_hz",
    "epsilon",
    "blocklength_mode",
}


def load_config(path) -> ExperimentConfig:
    """Load and validate an experiment config from a TOML file.

    Args:
        path: Path to the TOML file

    Returns:
        Validated ExperimentConfig with defaults applied

    Raises:
        ConfigError: The file is unreadable, malformed, or violates constraints
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file does not exist: {path}") from e
    except tomllib.TOMLDecodeError as e:
        # tomllib reports "(at line L, column C)"
        raise ConfigError(f"Cannot parse {path}: {e}") from e

    logger.debug(f"Loaded config sections from {path}: {sorted(raw)}")
    return config_from_dict(raw)


def config_from_dict(raw: Dict[str, Any]) -> ExperimentConfig:
    """Build a validated ExperimentConfig from parsed TOML tables."""
    problems = []
    for section in raw:
        if section not in _SECTIONS and section != "channel":
            problems.append(f"unknown section [{section}]")

    sections = {}
    for name, cls in _SECTIONS.items():
        table = raw.get(name, {})
        if not isinstance(table, dict):
            problems.append(f"[{name}] must be a table")
            continue
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(table) - known)
        problems.extend(f"unknown key {name}.{key}" for key in unknown)
        sections[name] = {k: v for k, v in table.items() if k in known}

    channel_table = raw.get("channel", {})
    channel_values = _channel_values(channel_table, problems)

    if problems:
        raise ConfigError("Invalid configuration:", problems)

    try:
        config = ExperimentConfig(
            scenario=ScenarioConfig(**sections["scenario"]),
            channel=ChannelParams(**channel_values),
            auction=AuctionConfig(**sections["auction"]),
            baseline=BaselineConfig(**sections["baseline"]),
            run=RunConfig(**sections["run"]),
        )
    except (TypeError, ValidationError) as e:
        raise ConfigError("Invalid configuration:", [str(e)]) from e

    config.validate()
    return config


def _channel_values(table: Dict[str, Any], problems: List[str]) -> Dict[str, Any]:
    unknown = sorted(set(table) - _CHANNEL_KEYS)
    problems.extend(f"unknown key channel.{key}" for key in unknown)
    values = {k: v for k, v in table.items() if k in _CHANNEL_KEYS}

    if "sigma2" in values and "sigma2_dbm_per_hz" in values:
        problems.append("channel.sigma2 and channel.sigma2_dbm_per_hz are mutually exclusive")
    if "sigma2_dbm_per_hz" in values:
        values["sigma2"] = dbm_per_hz_to_watts_per_hz(values.pop("sigma2_dbm_per_hz"))

    defaults = ChannelParams()
    merged = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(ChannelParams)}
    merged.update(values)
    problems.extend(channel_param_problems(**merged))
    return merged
