"""World geometry, target/agent dynamics, the action set and the sensing predicate.

Positions are plain ``(2,)`` float arrays. The dataclasses below are the
user-facing view; the ``_nb_*`` functions operate on stacked arrays and are
shared with the compiled episode loop in :mod:`searchtrack.trainer`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from numba import njit

from .config import ConfigError, WorldConfig

BOUNDS_TOL = 1e-9


@dataclass
class TargetState:
    pos: np.ndarray
    vel: np.ndarray
    poi: np.ndarray
    arrived: bool = False

    def copy(self) -> "TargetState":
        return TargetState(self.pos.copy(), self.vel.copy(), self.poi.copy(), self.arrived)


@dataclass
class AgentState:
    pos: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def copy(self) -> "AgentState":
        return AgentState(self.pos.copy())


def enumerate_action_set(radial_steps: Sequence[float], num_angles: int) -> np.ndarray:
    """Distinct displacements ``r * (cos(k*2pi/n), sin(k*2pi/n))``, ``k = 0..n``.

    Returns an ``(A, 2)`` array in first-occurrence order. The wraparound
    angle and every zero-radius entry collapse onto a single element.
    """
    if len(radial_steps) == 0:
        raise ConfigError("radial_steps", "must not be empty")
    if num_angles < 1:
        raise ConfigError("num_angles", "must be >= 1")
    out: List[Tuple[float, float]] = []
    seen = set()
    dtheta = 2.0 * np.pi / num_angles
    for r in radial_steps:
        for k in range(num_angles + 1):
            d = [r * np.cos(k * dtheta), r * np.sin(k * dtheta)]
            for c in range(2):
                nearest = round(d[c])
                if abs(d[c] - nearest) <= 1e-9:
                    d[c] = float(nearest)
                if d[c] == 0.0:
                    d[c] = 0.0  # drop negative zero
            key = (d[0], d[1])
            if key not in seen:
                seen.add(key)
                out.append(key)
    return np.array(out, dtype=np.float64).reshape(-1, 2)


@njit(cache=True)
def _nb_admissible(pos, actions, width, height):
    n = actions.shape[0]
    mask = np.zeros(n, dtype=np.bool_)
    for a in range(n):
        x = pos[0] + actions[a, 0]
        y = pos[1] + actions[a, 1]
        mask[a] = (
            x >= -BOUNDS_TOL and x <= width + BOUNDS_TOL and y >= -BOUNDS_TOL and y <= height + BOUNDS_TOL
        )
    return mask


def admissible_actions(agent: AgentState, actions: np.ndarray, cfg: WorldConfig) -> np.ndarray:
    """Indices into ``actions`` whose displacement keeps the agent inside the area."""
    mask = _nb_admissible(np.asarray(agent.pos, dtype=np.float64), actions, cfg.area_width, cfg.area_height)
    return np.flatnonzero(mask)


def in_bounds(pos: np.ndarray, cfg: WorldConfig) -> bool:
    return bool(
        -BOUNDS_TOL <= pos[0] <= cfg.area_width + BOUNDS_TOL
        and -BOUNDS_TOL <= pos[1] <= cfg.area_height + BOUNDS_TOL
    )


def apply_action(agent: AgentState, displacement: np.ndarray, cfg: WorldConfig = WorldConfig()) -> AgentState:
    new = np.asarray(agent.pos, dtype=np.float64) + np.asarray(displacement, dtype=np.float64)
    if not in_bounds(new, cfg):
        raise ValueError(f"action {tuple(displacement)} moves agent out of bounds to {tuple(new)}")
    return AgentState(new)


def _edge_point(edge: str, u: float, cfg: WorldConfig) -> np.ndarray:
    w, h = cfg.area_width, cfg.area_height
    if edge == "left":
        return np.array([0.0, u * h])
    if edge == "right":
        return np.array([w, u * h])
    if edge == "bottom":
        return np.array([u * w, 0.0])
    if edge == "top":
        return np.array([u * w, h])
    # whole perimeter, parametrised by arc length
    s = u * 2.0 * (w + h)
    if s < w:
        return np.array([s, 0.0])
    s -= w
    if s < h:
        return np.array([w, s])
    s -= h
    if s < w:
        return np.array([w - s, h])
    return np.array([0.0, h - (s - w)])


def make_target(spawn: Sequence[float], poi: Sequence[float], speed: float) -> TargetState:
    spawn = np.asarray(spawn, dtype=np.float64)
    poi = np.asarray(poi, dtype=np.float64)
    d = poi - spawn
    dist = float(np.hypot(d[0], d[1]))
    if dist == 0.0:
        return TargetState(spawn.copy(), np.zeros(2), poi, True)
    return TargetState(spawn.copy(), d / dist * speed, poi)


def spawn_targets(cfg: WorldConfig, rng: np.random.Generator) -> List[TargetState]:
    xmin, ymin, xmax, ymax = cfg.poi_box
    targets = []
    for i in range(cfg.num_targets):
        spawn = _edge_point(cfg.spawn_edge(i), rng.random(), cfg)
        while True:
            poi = np.array([xmin + (xmax - xmin) * rng.random(), ymin + (ymax - ymin) * rng.random()])
            if not np.array_equal(poi, spawn):
                break
        targets.append(make_target(spawn, poi, cfg.target_speed))
    return targets


def spawn_episode(cfg: WorldConfig, rng) -> Tuple[List[AgentState], List[TargetState]]:
    """Agents stacked at the area center, targets on their spawn edges heading to a POI.

    ``rng`` is a seed or a ``numpy.random.Generator``.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    agents = [AgentState(np.array(cfg.center, dtype=np.float64)) for _ in range(cfg.num_agents)]
    return agents, spawn_targets(cfg, rng)


@njit(cache=True)
def _nb_step_targets(pos, vel, poi, arrived, speed, dt):
    """In-place step of stacked targets with the snap-to-POI rule."""
    for i in range(pos.shape[0]):
        if arrived[i]:
            continue
        dx = poi[i, 0] - pos[i, 0]
        dy = poi[i, 1] - pos[i, 1]
        if np.sqrt(dx * dx + dy * dy) <= speed * dt:
            pos[i, 0] = poi[i, 0]
            pos[i, 1] = poi[i, 1]
            vel[i, 0] = 0.0
            vel[i, 1] = 0.0
            arrived[i] = True
        else:
            pos[i, 0] += vel[i, 0] * dt
            pos[i, 1] += vel[i, 1] * dt


def step_target(t: TargetState, dt: float = 1.0) -> TargetState:
    speed = float(np.hypot(t.vel[0], t.vel[1]))
    pos = t.pos.reshape(1, 2).astype(np.float64).copy()
    vel = t.vel.reshape(1, 2).astype(np.float64).copy()
    arrived = np.array([t.arrived])
    _nb_step_targets(pos, vel, t.poi.reshape(1, 2).astype(np.float64), arrived, speed, dt)
    return TargetState(pos[0], vel[0], t.poi.copy(), bool(arrived[0]))


def detect(agent: AgentState, target: TargetState, radius: float) -> bool:
    d = np.asarray(target.pos, dtype=np.float64) - np.asarray(agent.pos, dtype=np.float64)
    return bool(np.sqrt(d[0] * d[0] + d[1] * d[1]) <= radius)


@njit(cache=True)
def _nb_detections(agent_pos, target_pos, radius):
    m = target_pos.shape[0]
    n = agent_pos.shape[0]
    out = np.zeros((m, n), dtype=np.bool_)
    for i in range(m):
        for j in range(n):
            dx = target_pos[i, 0] - agent_pos[j, 0]
            dy = target_pos[i, 1] - agent_pos[j, 1]
            out[i, j] = np.sqrt(dx * dx + dy * dy) <= radius
    return out


def stack_agents(agents: Sequence[AgentState]) -> np.ndarray:
    return np.array([a.pos for a in agents], dtype=np.float64).reshape(-1, 2)


def stack_targets(targets: Sequence[TargetState]):
    """``(pos, vel, poi, arrived)`` arrays for a list of targets."""
    pos = np.array([t.pos for t in targets], dtype=np.float64).reshape(-1, 2)
    vel = np.array([t.vel for t in targets], dtype=np.float64).reshape(-1, 2)
    poi = np.array([t.poi for t in targets], dtype=np.float64).reshape(-1, 2)
    arrived = np.array([t.arrived for t in targets], dtype=np.bool_)
    return pos, vel, poi, arrived


def detection_matrix(agents: Sequence[AgentState], targets: Sequence[TargetState], radius: float) -> np.ndarray:
    """Boolean ``(M, N)`` matrix; entry ``[i, j]`` is true when agent j senses target i."""
    tpos = np.array([t.pos for t in targets], dtype=np.float64).reshape(-1, 2)
    return _nb_detections(stack_agents(agents), tpos, float(radius))
