"""Prior-knowledge baseline: assignment, minimum-time intercept, then tracking.

With target trajectories known in advance, each assigned agent races to the
first timestep at which it can be within the detection radius of its target
(breadth-first search over the reachable position lattice, one layer per
timestep), then greedily keeps the distance to the target's next position
as small as possible. Agents without a target hold position. Every
assignment is simulated exactly and the best joint plan is kept.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .config import ExperimentConfig, WorldConfig
from .environment import TargetState, _nb_admissible, _nb_detections, _nb_step_targets, enumerate_action_set, stack_targets

log = logging.getLogger(__name__)


def precompute_trajectories(targets: Sequence[TargetState], T: int, dt: float = 1.0, speed: Optional[float] = None) -> List[np.ndarray]:
    """Positions ``(T+1, 2)`` per target under the environment dynamics, index 0 = spawn."""
    if not targets:
        return []
    pos, vel, poi, arrived = stack_targets(targets)
    if speed is None:
        speeds = np.hypot(vel[:, 0], vel[:, 1])
        speed = float(speeds.max()) if len(speeds) else 0.0
    out = np.empty((T + 1, len(targets), 2))
    out[0] = pos
    for t in range(1, T + 1):
        _nb_step_targets(pos, vel, poi, arrived, speed, dt)
        out[t] = pos
    return [out[:, i].copy() for i in range(len(targets))]


@dataclass(frozen=True)
class _Lattice:
    res: float
    nx: int
    ny: int
    steps: np.ndarray  # (A, 2) displacement in lattice cells

    def cell(self, p) -> Tuple[int, int]:
        return (int(round(p[0] / self.res)), int(round(p[1] / self.res)))

    def point(self, c) -> np.ndarray:
        return np.array([c[0] * self.res, c[1] * self.res], dtype=np.float64)


def _lattice(actions: np.ndarray, cfg: WorldConfig, start) -> _Lattice:
    vals = np.concatenate([actions.ravel(), np.asarray(start, dtype=np.float64)])
    res = 1.0 if np.allclose(vals, np.round(vals)) else 0.5
    steps = np.round(actions / res).astype(np.int64)
    return _Lattice(res, int(np.floor(cfg.area_width / res + 1e-9)) + 1, int(np.floor(cfg.area_height / res + 1e-9)) + 1, steps)


def _dilate(reach: np.ndarray, steps: np.ndarray) -> np.ndarray:
    r = int(np.abs(steps).max()) if len(steps) else 0
    fp = np.zeros((2 * r + 1, 2 * r + 1), dtype=bool)
    for dx, dy in steps:
        fp[r + dx, r + dy] = True
    return ndimage.binary_dilation(reach, structure=fp) if r else reach.copy()


def _intercept_search(start, traj: np.ndarray, actions: np.ndarray, radius: float, cfg: WorldConfig):
    """Earliest intercept time and the lattice path reaching it (``None`` if never)."""
    lat = _lattice(actions, cfg, start)
    T = traj.shape[0] - 1
    xs = np.arange(lat.nx)[:, None] * lat.res
    ys = np.arange(lat.ny)[None, :] * lat.res
    reach = np.zeros((lat.nx, lat.ny), dtype=bool)
    sc = lat.cell(start)
    reach[sc] = True
    layers = [reach]
    for t in range(T + 1):
        if t > 0:
            reach = _dilate(reach, lat.steps)
            layers.append(reach)
        d2 = (xs - traj[t, 0]) ** 2 + (ys - traj[t, 1]) ** 2
        hit = reach & (d2 <= radius * radius + 1e-9)
        if hit.any():
            flat = np.where(hit, d2, np.inf)
            goal = np.unravel_index(int(np.argmin(flat)), flat.shape)
            return t, _backtrack(layers, goal, lat)
    return T + 1, None


def _backtrack(layers, goal, lat: _Lattice) -> List[np.ndarray]:
    path = [goal]
    cur = goal
    for t in range(len(layers) - 1, 0, -1):
        prev_layer = layers[t - 1]
        for dx, dy in lat.steps:
            p = (cur[0] - dx, cur[1] - dy)
            if 0 <= p[0] < lat.nx and 0 <= p[1] < lat.ny and prev_layer[p]:
                cur = p
                break
        else:  # pragma: no cover - reachable layers always have a predecessor
            raise RuntimeError("broken reachability layers")
        path.append(cur)
    path.reverse()
    return [lat.point(c) for c in path]


def earliest_intercept(agent_start, traj: np.ndarray, actions: np.ndarray, radius: float, cfg: WorldConfig = WorldConfig()) -> int:
    """Smallest ``t`` at which some admissible action sequence puts the agent within ``radius`` of ``traj[t]``.

    Returns ``len(traj)`` (i.e. T+1) when no such timestep exists.
    """
    return _intercept_search(agent_start, traj, actions, radius, cfg)[0]


def _track_step(pos, target_next, actions, cfg: WorldConfig) -> np.ndarray:
    mask = _nb_admissible(pos, actions, cfg.area_width, cfg.area_height)
    cand = pos + actions
    d = np.hypot(cand[:, 0] - target_next[0], cand[:, 1] - target_next[1])
    d[~mask] = np.inf
    return cand[int(np.argmin(d))]


def _agent_plan(start, traj, actions, cfg: WorldConfig) -> np.ndarray:
    """Positions ``(T+1, 2)`` for one agent chasing one known trajectory."""
    T = traj.shape[0] - 1
    t_hit, path = _intercept_search(start, traj, actions, cfg.detection_radius, cfg)
    plan = np.empty((T + 1, 2))
    if path is None:
        # never within range: close in anyway, it cannot hurt F
        plan[0] = start
        for t in range(1, T + 1):
            plan[t] = _track_step(plan[t - 1], traj[t], actions, cfg)
        return plan
    plan[: t_hit + 1] = np.array(path)
    for t in range(t_hit + 1, T + 1):
        plan[t] = _track_step(plan[t - 1], traj[t], actions, cfg)
    return plan


def plan_utility(plan: np.ndarray, trajectories: Sequence[np.ndarray], radius: float) -> int:
    """F of a joint plan ``(T+1, N, 2)``, scored over timesteps 1..T."""
    if not trajectories:
        return 0
    tp = np.stack(trajectories, axis=1)
    F = 0
    for t in range(1, plan.shape[0]):
        F += int(_nb_detections(plan[t], tp[t], radius).any(axis=1).sum())
    return F


def assign_and_plan(agent_starts, trajectories: Sequence[np.ndarray], actions: np.ndarray, cfg: WorldConfig):
    """Best joint plan over all one-target-per-agent assignments.

    Returns ``(plan, F, assignment)`` where ``plan`` is ``(T+1, N, 2)`` and
    ``assignment[i]`` is the agent chasing target ``i`` (or ``None``).
    """
    starts = np.asarray(agent_starts, dtype=np.float64).reshape(-1, 2)
    n, m = starts.shape[0], len(trajectories)
    T = cfg.episode_length
    hold = np.repeat(starts[None], T + 1, axis=0)
    if m == 0:
        return hold, 0, ()
    if n < m:
        log.warning("fewer agents (%d) than targets (%d); some targets stay unassigned", n, m)

    cache: Dict[Tuple[Tuple[float, float], int], np.ndarray] = {}
    seen = set()
    best = (None, -1, None)
    k = min(n, m)
    for tgt_subset in itertools.combinations(range(m), k):
        for agents in itertools.permutations(range(n), k):
            # agents sharing a start position are interchangeable
            key = tuple(sorted((tuple(starts[a]), i) for a, i in zip(agents, tgt_subset)))
            if key in seen:
                continue
            seen.add(key)
            plan = hold.copy()
            for a, i in zip(agents, tgt_subset):
                ck = (tuple(starts[a]), i)
                if ck not in cache:
                    cache[ck] = _agent_plan(starts[a], trajectories[i], actions, cfg)
                plan[:, a] = cache[ck]
            F = plan_utility(plan, trajectories, cfg.detection_radius)
            if F > best[1]:
                assignment = [None] * m
                for a, i in zip(agents, tgt_subset):
                    assignment[i] = a
                best = (plan, F, tuple(assignment))
    return best


def solve_episode(targets: Sequence[TargetState], cfg: WorldConfig, actions: Optional[np.ndarray] = None) -> int:
    if actions is None:
        actions = enumerate_action_set(cfg.radial_steps, cfg.num_angles)
    trajs = precompute_trajectories(targets, cfg.episode_length, cfg.dt, cfg.target_speed)
    starts = np.tile(np.array(cfg.center), (cfg.num_agents, 1))
    return assign_and_plan(starts, trajs, actions, cfg)[1]


def oracle_episode_F(cfg: ExperimentConfig, run: int, n_episodes: int) -> np.ndarray:
    """Oracle F for each evaluation world of ``run``."""
    from .trainer import eval_worlds

    actions = enumerate_action_set(cfg.world.radial_steps, cfg.world.num_angles)
    return np.array([solve_episode(tg, cfg.world, actions) for tg in eval_worlds(cfg, run, n_episodes)], dtype=np.int64)


def oracle_F(cfg: ExperimentConfig, runs: Sequence[int], n_episodes: int) -> Tuple[float, float, np.ndarray]:
    """``(mean, std of per-run means, per-episode F array (runs, episodes))``."""
    per = np.array([oracle_episode_F(cfg, r, n_episodes) for r in runs]).reshape(len(runs), n_episodes)
    means = per.mean(axis=1)
    return float(means.mean()), float(means.std()), per
