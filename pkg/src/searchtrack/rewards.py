"""Team utility, global reward and difference reward from detection matrices.

A detection matrix is a boolean ``(M, N)`` array: ``d[i, j]`` is true when
agent ``j`` senses target ``i``.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
from numba import njit

from .config import RewardMode


def target_detected(d: np.ndarray, i: int) -> int:
    return int(np.any(d[i]))


def global_reward(d: np.ndarray) -> int:
    d = np.asarray(d, dtype=bool)
    if d.size == 0:
        return 0
    return int(np.any(d, axis=1).sum())


def counterfactual_reward(d: np.ndarray, j: int) -> int:
    """Global reward with agent ``j``'s column cleared."""
    d = np.array(d, dtype=bool, copy=True)
    if d.size == 0:
        return 0
    d[:, j] = False
    return global_reward(d)


def difference_reward(d: np.ndarray, j: int) -> int:
    return global_reward(d) - counterfactual_reward(d, j)


def episode_utility(history: Iterable[np.ndarray]) -> int:
    return sum(global_reward(d) for d in history)


def agent_rewards(d: np.ndarray, mode: RewardMode) -> np.ndarray:
    """Per-agent reward vector for one timestep."""
    d = np.asarray(d, dtype=np.bool_)
    n = d.shape[1] if d.ndim == 2 else 0
    out = np.empty(n)
    _nb_rewards(d, mode.code, out)
    return out


@njit(cache=True)
def _nb_rewards(det, mode, out):
    """Fill ``out`` with per-agent rewards; returns the global reward.

    ``mode`` 0 gives every agent G; 1 gives each agent the number of
    targets it alone detects, which equals G - G(-j).
    """
    m, n = det.shape
    g = 0
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        count = 0
        last = -1
        for j in range(n):
            if det[i, j]:
                count += 1
                last = j
        if count > 0:
            g += 1
            if mode == 1 and count == 1:
                out[last] += 1.0
    if mode == 0:
        for j in range(n):
            out[j] = g
    return g
