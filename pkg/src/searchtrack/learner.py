"""Independent tile-coded Q-learners."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from numba import njit

from .config import LearnerSchedule
from .featurizer import TileCoder


@njit(cache=True)
def _nb_q_values(weights, tiles, out):
    """``out[a] = sum(weights[tiles, a])`` for every action."""
    n_act = weights.shape[1]
    for a in range(n_act):
        out[a] = 0.0
    for k in range(tiles.shape[0]):
        row = tiles[k]
        for a in range(n_act):
            out[a] += weights[row, a]


@njit(cache=True)
def _nb_q_value(weights, tiles, a):
    s = 0.0
    for k in range(tiles.shape[0]):
        s += weights[tiles[k], a]
    return s


@njit(cache=True)
def _nb_select(q, mask, epsilon, u_explore, u_random, u_tie):
    """Epsilon-greedy choice among ``mask``; three uniforms in [0, 1) drive it.

    Ties in the greedy branch are broken uniformly via ``u_tie``.
    """
    n_adm = 0
    for a in range(mask.shape[0]):
        if mask[a]:
            n_adm += 1
    if n_adm == 0:
        return -1
    if u_explore < epsilon:
        pick = min(int(u_random * n_adm), n_adm - 1)
        for a in range(mask.shape[0]):
            if mask[a]:
                if pick == 0:
                    return a
                pick -= 1
    best = -np.inf
    n_best = 0
    for a in range(mask.shape[0]):
        if mask[a]:
            if q[a] > best:
                best = q[a]
                n_best = 1
            elif q[a] == best:
                n_best += 1
    pick = min(int(u_tie * n_best), n_best - 1)
    for a in range(mask.shape[0]):
        if mask[a] and q[a] == best:
            if pick == 0:
                return a
            pick -= 1
    return -1


@njit(cache=True)
def _nb_max_admissible(q, mask):
    best = -np.inf
    for a in range(mask.shape[0]):
        if mask[a] and q[a] > best:
            best = q[a]
    return best


@njit(cache=True)
def _nb_td_update(weights, tiles, a, reward, next_max, alpha, gamma):
    """Q-learning step spread over the active tiles; returns the TD error."""
    q_sa = _nb_q_value(weights, tiles, a)
    delta = reward + gamma * next_max - q_sa
    step = alpha * delta / tiles.shape[0]
    for k in range(tiles.shape[0]):
        weights[tiles[k], a] += step
    return delta


class QFunction:
    """Linear action-value function over hashed tiles, one weight row per tile index.

    ``weights`` has shape ``(hash_table_size, num_actions)`` and starts at zero.
    """

    def __init__(self, coder: TileCoder, num_actions: int, weights: np.ndarray | None = None):
        self.coder = coder
        self.num_actions = int(num_actions)
        if weights is None:
            weights = np.zeros((coder.hash_table_size, self.num_actions))
        if weights.shape != (coder.hash_table_size, self.num_actions):
            raise ValueError(
                f"weights shape {weights.shape} does not match "
                f"({coder.hash_table_size}, {self.num_actions})"
            )
        self.weights = weights

    def values(self, tiles: np.ndarray) -> np.ndarray:
        out = np.empty(self.num_actions)
        _nb_q_values(self.weights, np.asarray(tiles, dtype=np.int64), out)
        return out


def q_value(qf: QFunction, tiles: np.ndarray, a: int) -> float:
    if not 0 <= a < qf.num_actions:
        raise IndexError(f"unknown action index {a}")
    return float(_nb_q_value(qf.weights, np.asarray(tiles, dtype=np.int64), int(a)))


def _mask(num_actions: int, admissible) -> np.ndarray:
    mask = np.zeros(num_actions, dtype=np.bool_)
    mask[np.asarray(admissible, dtype=np.int64)] = True
    return mask


def select_action(qf: QFunction, tiles: np.ndarray, admissible, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy action index restricted to ``admissible`` indices."""
    if len(admissible) == 0:
        raise ValueError("no admissible actions")
    u = rng.random(3)
    a = _nb_select(qf.values(tiles), _mask(qf.num_actions, admissible), float(epsilon), u[0], u[1], u[2])
    return int(a)


def td_update(
    qf: QFunction,
    tiles_s: np.ndarray,
    a: int,
    r: float,
    tiles_next: np.ndarray,
    admissible_next,
    alpha: float,
    gamma: float,
) -> float:
    """Move Q(s, a) by ``alpha * delta``; returns delta.

    The bootstrap maximum ranges over the admissible actions at ``s'`` only.
    """
    next_q = qf.values(tiles_next)
    next_max = _nb_max_admissible(next_q, _mask(qf.num_actions, admissible_next))
    return float(
        _nb_td_update(qf.weights, np.asarray(tiles_s, dtype=np.int64), int(a), float(r), next_max, alpha, gamma)
    )


def decay(sched: LearnerSchedule) -> LearnerSchedule:
    return replace(
        sched,
        alpha=sched.alpha * sched.alpha_decay_rate,
        epsilon=sched.epsilon * sched.epsilon_decay_rate,
    )

