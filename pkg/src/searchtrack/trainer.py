"""Episode rollouts, cooperative Q-learning training and greedy evaluation.

Within a timestep every agent observes the pre-move world, all agents pick
and apply their actions simultaneously, targets then advance, detections and
rewards are scored on the post-move world, and (in training) each agent
performs one TD update towards its post-move observation.

Randomness comes from per-``(base_seed, run, purpose)`` streams, so adding
runs never perturbs existing ones and evaluation worlds are shared with the
oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from numba import njit

from .config import ExperimentConfig, RewardMode, WorldConfig
from .environment import (
    TargetState,
    _nb_admissible,
    _nb_detections,
    _nb_step_targets,
    enumerate_action_set,
    spawn_targets,
    stack_targets,
)
from .featurizer import OBS_DIM, TileCoder, _nb_observation, _nb_tiles
from .learner import QFunction, _nb_max_admissible, _nb_q_values, _nb_select, _nb_td_update, decay
from .rewards import _nb_rewards

log = logging.getLogger(__name__)

TRAIN_WORLD, TRAIN_POLICY, EVAL_WORLD, EVAL_POLICY = range(4)


def stream(base_seed: int, run: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(run), int(purpose)]))


class LearnerTeam:
    """Weights for ``N`` independent learners stored as one ``(N, H, A)`` array.

    Agent ``j`` only ever reads and writes ``weights[j]``.
    """

    def __init__(self, coder: TileCoder, actions: np.ndarray, weights: np.ndarray):
        self.coder = coder
        self.actions = np.ascontiguousarray(actions, dtype=np.float64)
        if weights.ndim != 3 or weights.shape[1:] != (coder.hash_table_size, len(self.actions)):
            raise ValueError(f"weights shape {weights.shape} incompatible with coder/action set")
        self.weights = weights

    @classmethod
    def zeros(cls, num_agents: int, coder: TileCoder, actions: np.ndarray) -> "LearnerTeam":
        return cls(coder, actions, np.zeros((num_agents, coder.hash_table_size, len(actions))))

    @property
    def num_agents(self) -> int:
        return self.weights.shape[0]

    def q_function(self, j: int) -> QFunction:
        return QFunction(self.coder, len(self.actions), self.weights[j])


@dataclass
class EpisodeLog:
    agent_pos: np.ndarray  # (T+1, N, 2), index 0 is the initial state
    target_pos: np.ndarray  # (T+1, M, 2)
    detections: np.ndarray  # (T, M, N) bool, scored after each move
    rewards: np.ndarray  # (T, N)
    actions: np.ndarray  # (T, N) action indices
    F: int

    @property
    def length(self) -> int:
        return self.detections.shape[0]


@njit(cache=True)
def _nb_episode(
    weights,
    actions,
    agent_pos0,
    tpos0,
    tvel0,
    tpoi,
    arrived0,
    speed,
    dt,
    width,
    height,
    radius,
    obs_widths,
    num_tilings,
    table_size,
    alpha,
    gamma,
    epsilon,
    mode,
    train,
    uniforms,
):
    T = uniforms.shape[0]
    n = agent_pos0.shape[0]
    m = tpos0.shape[0]
    n_act = actions.shape[0]

    apos = agent_pos0.copy()
    tpos = tpos0.copy()
    tvel = tvel0.copy()
    arrived = arrived0.copy()

    agent_traj = np.empty((T + 1, n, 2))
    target_traj = np.empty((T + 1, m, 2))
    dets = np.zeros((T, m, n), dtype=np.bool_)
    rewards = np.zeros((T, n))
    chosen = np.zeros((T, n), dtype=np.int64)

    obs = np.empty(OBS_DIM)
    tiles = np.empty((n, num_tilings), dtype=np.int64)
    next_tiles = np.empty((n, num_tilings), dtype=np.int64)
    q = np.empty(n_act)
    r = np.empty(n)

    agent_traj[0] = apos
    target_traj[0] = tpos
    det = _nb_detections(apos, tpos, radius)
    for j in range(n):
        _nb_observation(j, apos, tpos, det, obs)
        _nb_tiles(obs, obs_widths, num_tilings, table_size, tiles[j])

    F = 0
    for t in range(T):
        for j in range(n):
            mask = _nb_admissible(apos[j], actions, width, height)
            _nb_q_values(weights[j], tiles[j], q)
            chosen[t, j] = _nb_select(q, mask, epsilon, uniforms[t, j, 0], uniforms[t, j, 1], uniforms[t, j, 2])
        for j in range(n):
            a = chosen[t, j]
            apos[j, 0] += actions[a, 0]
            apos[j, 1] += actions[a, 1]
        _nb_step_targets(tpos, tvel, tpoi, arrived, speed, dt)
        det = _nb_detections(apos, tpos, radius)
        F += _nb_rewards(det, mode, r)

        for j in range(n):
            _nb_observation(j, apos, tpos, det, obs)
            _nb_tiles(obs, obs_widths, num_tilings, table_size, next_tiles[j])
        if train:
            for j in range(n):
                mask = _nb_admissible(apos[j], actions, width, height)
                _nb_q_values(weights[j], next_tiles[j], q)
                next_max = _nb_max_admissible(q, mask)
                _nb_td_update(weights[j], tiles[j], chosen[t, j], r[j], next_max, alpha, gamma)
        tiles[:, :] = next_tiles

        agent_traj[t + 1] = apos
        target_traj[t + 1] = tpos
        dets[t] = det
        rewards[t] = r
    return F, agent_traj, target_traj, dets, rewards, chosen


def run_episode(
    world: WorldConfig,
    team: LearnerTeam,
    targets: Sequence[TargetState],
    mode: str = "eval",
    reward_mode: RewardMode = RewardMode.DIFFERENCE,
    rng: Optional[np.random.Generator] = None,
    epsilon: float = 0.0,
    alpha: float = 0.0,
    gamma: float = 0.9,
    agent_start: Optional[np.ndarray] = None,
) -> EpisodeLog:
    """Roll out one episode of ``world.episode_length`` steps from ``targets``.

    In ``"train"`` mode the team's weights are updated in place with the
    given ``alpha``/``gamma``/``epsilon``; in ``"eval"`` mode nothing is
    written and ``epsilon`` defaults to 0 (pure greedy).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if team.num_agents != world.num_agents:
        raise ValueError(f"team has {team.num_agents} agents, world expects {world.num_agents}")
    if len(targets) != world.num_targets:
        raise ValueError(f"got {len(targets)} targets, world expects {world.num_targets}")
    if rng is None:
        rng = np.random.default_rng(0)
    n, T = world.num_agents, world.episode_length
    if agent_start is None:
        agent_start = np.tile(np.array(world.center, dtype=np.float64), (n, 1))
    tpos, tvel, tpoi, arrived = stack_targets(targets)
    F, apos, ttraj, dets, rew, acts = _nb_episode(
        team.weights,
        team.actions,
        np.asarray(agent_start, dtype=np.float64).reshape(n, 2),
        tpos,
        tvel,
        tpoi,
        arrived,
        world.target_speed,
        world.dt,
        world.area_width,
        world.area_height,
        world.detection_radius,
        team.coder.widths,
        team.coder.num_tilings,
        team.coder.hash_table_size,
        float(alpha),
        float(gamma),
        float(epsilon),
        reward_mode.code,
        mode == "train",
        rng.random((T, n, 3)),
    )
    return EpisodeLog(apos, ttraj, dets, rew, acts, int(F))


def make_team(cfg: ExperimentConfig) -> LearnerTeam:
    coder = TileCoder.for_observations(cfg.coder)
    actions = enumerate_action_set(cfg.world.radial_steps, cfg.world.num_angles)
    return LearnerTeam.zeros(cfg.world.num_agents, coder, actions)


def train_run(
    cfg: ExperimentConfig,
    run: int,
    progress: Optional[Callable[[int, int], None]] = None,
    on_episode: Optional[Callable[[int, EpisodeLog], None]] = None,
):
    """Train one run from zero weights. Returns ``(F per episode, team, final schedule)``.

    ``on_episode(ep, log)`` sees every training episode after its updates.
    """
    team = make_team(cfg)
    world = cfg.world
    world_rng = stream(cfg.base_seed, run, TRAIN_WORLD)
    policy_rng = stream(cfg.base_seed, run, TRAIN_POLICY)
    sched = cfg.schedule
    curve = np.empty(cfg.num_episodes, dtype=np.int64)
    for ep in range(cfg.num_episodes):
        targets = spawn_targets(world, world_rng)
        ep_log = run_episode(
            world,
            team,
            targets,
            mode="train",
            reward_mode=cfg.reward_mode,
            rng=policy_rng,
            epsilon=sched.epsilon,
            alpha=sched.alpha,
            gamma=sched.gamma,
        )
        curve[ep] = ep_log.F
        if on_episode is not None:
            on_episode(ep, ep_log)
        sched = decay(sched)
        if progress is not None:
            progress(run, ep)
    return curve, team, sched


@dataclass
class TrainingResult:
    curves: np.ndarray  # (runs, episodes) of F
    teams: List[LearnerTeam]
    schedules: list


def train(cfg: ExperimentConfig, runs: Optional[Sequence[int]] = None) -> TrainingResult:
    runs = range(cfg.num_runs) if runs is None else runs
    curves, teams, scheds = [], [], []
    for run in runs:
        log.info("training run %d (%d episodes, %s reward)", run, cfg.num_episodes, cfg.reward_mode.value)
        curve, team, sched = train_run(cfg, run)
        curves.append(curve)
        teams.append(team)
        scheds.append(sched)
    return TrainingResult(np.array(curves).reshape(len(curves), cfg.num_episodes), teams, scheds)


def eval_worlds(cfg: ExperimentConfig, run: int, n_episodes: int) -> List[List[TargetState]]:
    """The evaluation target sets for ``run``; shared with the oracle."""
    rng = stream(cfg.base_seed, run, EVAL_WORLD)
    return [spawn_targets(cfg.world, rng) for _ in range(n_episodes)]


def evaluate_run(
    team: LearnerTeam,
    cfg: ExperimentConfig,
    run: int,
    n_episodes: int,
    epsilon: float = 0.0,
    on_episode: Optional[Callable[[int, EpisodeLog], None]] = None,
) -> np.ndarray:
    """Greedy rollouts on the run's evaluation worlds; returns F per episode."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    policy_rng = stream(cfg.base_seed, run, EVAL_POLICY)
    out = np.empty(n_episodes, dtype=np.int64)
    for ep, targets in enumerate(eval_worlds(cfg, run, n_episodes)):
        ep_log = run_episode(cfg.world, team, targets, "eval", cfg.reward_mode, policy_rng, epsilon=epsilon)
        out[ep] = ep_log.F
        if on_episode is not None:
            on_episode(ep, ep_log)
    return out


@dataclass
class EvalSummary:
    mean_F: float
    std_F: float
    run_means: np.ndarray
    oracle_mean: Optional[float] = None

    @property
    def normalized(self) -> Optional[float]:
        if self.oracle_mean is None:
            return None
        return self.mean_F / self.oracle_mean


def evaluate(
    teams: Sequence[LearnerTeam],
    cfg: ExperimentConfig,
    n_episodes: int,
    runs: Optional[Sequence[int]] = None,
    oracle_mean: Optional[float] = None,
    on_episode: Optional[Callable[[int, int, EpisodeLog], None]] = None,
) -> EvalSummary:
    """Mean F over runs and the spread of the per-run means.

    ``teams[k]`` is evaluated on the worlds of run ``runs[k]``. When no
    ``oracle_mean`` is given the oracle is solved on the same worlds.
    """
    runs = list(range(len(teams))) if runs is None else list(runs)
    means = []
    for team, run in zip(teams, runs):
        cb = None if on_episode is None else (lambda ep, lg, run=run: on_episode(run, ep, lg))
        means.append(evaluate_run(team, cfg, run, n_episodes, on_episode=cb).mean())
    means = np.array(means)
    if oracle_mean is None:
        from .oracle import oracle_F

        oracle_mean = oracle_F(cfg, runs, n_episodes)[0]
    return EvalSummary(float(means.mean()), float(means.std()), means, oracle_mean)
