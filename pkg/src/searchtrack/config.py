"""Configuration dataclasses for worlds, learners, tile coders and experiments."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple


SPAWN_EDGES = ("left", "right", "bottom", "top", "perimeter")


class ConfigError(ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{field}{where}: {message}")


class RewardMode(enum.Enum):
    GLOBAL = "global"
    DIFFERENCE = "difference"

    @property
    def code(self) -> int:
        return 0 if self is RewardMode.GLOBAL else 1


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigError(name, f"must be > 0, got {value}")


@dataclass(frozen=True)
class WorldConfig:
    area_width: float = 50.0
    area_height: float = 50.0
    num_targets: int = 2
    num_agents: int = 2
    detection_radius: float = 5.0
    radial_steps: Tuple[float, ...] = (0.0, 1.0, 3.0)
    num_angles: int = 4
    episode_length: int = 30
    dt: float = 1.0
    target_speed: float = 1.0
    poi_box_side: float = 10.0
    target_spawn_edges: Tuple[str, ...] = ("left", "right")

    def __post_init__(self):
        for name in ("area_width", "area_height", "detection_radius", "dt", "target_speed"):
            _positive(name, getattr(self, name))
        if self.num_targets < 0:
            raise ConfigError("num_targets", "must be >= 0")
        if self.num_agents < 1:
            raise ConfigError("num_agents", "must be >= 1")
        if self.num_angles < 1:
            raise ConfigError("num_angles", "must be >= 1")
        if self.episode_length < 1:
            raise ConfigError("episode_length", "must be >= 1")
        steps = tuple(float(r) for r in self.radial_steps)
        object.__setattr__(self, "radial_steps", steps)
        if not steps:
            raise ConfigError("radial_steps", "must not be empty")
        if any(r < 0 for r in steps):
            raise ConfigError("radial_steps", "steps must be >= 0")
        if list(steps) != sorted(steps):
            raise ConfigError("radial_steps", "must be sorted ascending")
        if steps.count(0.0) > 1:
            raise ConfigError("radial_steps", "may contain 0 at most once")
        if not 0 < self.poi_box_side <= min(self.area_width, self.area_height):
            raise ConfigError("poi_box_side", "POI box must lie inside the area")
        edges = tuple(self.target_spawn_edges)
        object.__setattr__(self, "target_spawn_edges", edges)
        if not edges:
            raise ConfigError("target_spawn_edges", "must not be empty")
        for e in edges:
            if e not in SPAWN_EDGES:
                raise ConfigError("target_spawn_edges", f"unknown edge {e!r}")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.area_width / 2.0, self.area_height / 2.0)

    @property
    def poi_box(self) -> Tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)`` of the square POI box."""
        cx, cy = self.center
        h = self.poi_box_side / 2.0
        return (cx - h, cy - h, cx + h, cy + h)

    def spawn_edge(self, target_index: int) -> str:
        return self.target_spawn_edges[target_index % len(self.target_spawn_edges)]


@dataclass(frozen=True)
class LearnerSchedule:
    alpha: float = 0.2
    epsilon: float = 0.3
    alpha_decay_rate: float = 0.99997
    epsilon_decay_rate: float = 0.99997
    gamma: float = 0.9

    def __post_init__(self):
        # epsilon = 0 is allowed so frozen greedy schedules can be expressed
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha", f"must be in (0, 1], got {self.alpha}")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon", f"must be in [0, 1], got {self.epsilon}")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma", f"must be in [0, 1), got {self.gamma}")
        for name in ("alpha_decay_rate", "epsilon_decay_rate"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(name, f"must be in (0, 1], got {v}")


@dataclass(frozen=True)
class CoderConfig:
    num_tilings: int = 64
    hash_table_size: int = 2**20
    position_width: float = 25.0
    distance_width: float = 25.0
    count_width: float = 1.0

    def __post_init__(self):
        if self.num_tilings < 1:
            raise ConfigError("num_tilings", "must be >= 1")
        if self.hash_table_size < 1:
            raise ConfigError("hash_table_size", "must be >= 1")
        for name in ("position_width", "distance_width", "count_width"):
            _positive(name, getattr(self, name))


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    schedule: LearnerSchedule = field(default_factory=LearnerSchedule)
    coder: CoderConfig = field(default_factory=CoderConfig)
    reward_mode: RewardMode = RewardMode.DIFFERENCE
    num_episodes: int = 100_000
    num_runs: int = 20
    base_seed: int = 0
    eval_episodes: int = 1000
    oracle_mean: Optional[float] = None
    median_window: int = 501

    def __post_init__(self):
        for name in ("num_episodes", "num_runs", "eval_episodes"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed", "must be >= 0")
        if self.oracle_mean is not None and not self.oracle_mean > 0:
            raise ConfigError("oracle_mean", "must be > 0")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError("median_window", "must be a positive odd integer")
