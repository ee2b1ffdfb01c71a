"""Quadrant observations and a hashing tile coder over them.

Observation layout (18 floats)::

    [x, y, m1..m4, p1..p4, n1..n4, q1..q4]

``m``/``p`` are count and mean distance of *detected* targets per quadrant,
``n``/``q`` the same for every other agent. Quadrant ``l`` covers angles
``[(l-1)*90, l*90)`` degrees around the agent; a zero offset goes to quadrant 1.
Empty quadrants carry distance 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .config import CoderConfig
from .environment import AgentState, TargetState, stack_agents

OBS_DIM = 18
POS = slice(0, 2)
TARGET_COUNT = slice(2, 6)
TARGET_DIST = slice(6, 10)
AGENT_COUNT = slice(10, 14)
AGENT_DIST = slice(14, 18)


@njit(cache=True)
def _quadrant(dx, dy):
    if dx > 0.0 and dy >= 0.0:
        return 0
    if dx <= 0.0 and dy > 0.0:
        return 1
    if dx < 0.0 and dy <= 0.0:
        return 2
    if dx >= 0.0 and dy < 0.0:
        return 3
    return 0  # coincident point


@njit(cache=True)
def _nb_observation(j, agent_pos, target_pos, detections, out):
    for k in range(OBS_DIM):
        out[k] = 0.0
    x = agent_pos[j, 0]
    y = agent_pos[j, 1]
    out[0] = x
    out[1] = y
    for i in range(target_pos.shape[0]):
        if not detections[i, j]:
            continue
        dx = target_pos[i, 0] - x
        dy = target_pos[i, 1] - y
        l = _quadrant(dx, dy)
        out[2 + l] += 1.0
        out[6 + l] += np.sqrt(dx * dx + dy * dy)
    for k in range(agent_pos.shape[0]):
        if k == j:
            continue
        dx = agent_pos[k, 0] - x
        dy = agent_pos[k, 1] - y
        l = _quadrant(dx, dy)
        out[10 + l] += 1.0
        out[14 + l] += np.sqrt(dx * dx + dy * dy)
    for l in range(4):
        if out[2 + l] > 0:
            out[6 + l] /= out[2 + l]
        if out[10 + l] > 0:
            out[14 + l] /= out[10 + l]


def build_observation(
    agent_index: int,
    agents: Sequence[AgentState],
    targets: Sequence[TargetState],
    detections: np.ndarray,
    cfg=None,
) -> np.ndarray:
    """18-dim quadrant observation for one agent (``cfg`` is accepted for API symmetry)."""
    apos = stack_agents(agents)
    tpos = np.array([t.pos for t in targets], dtype=np.float64).reshape(-1, 2)
    det = np.asarray(detections, dtype=np.bool_).reshape(tpos.shape[0], apos.shape[0])
    out = np.empty(OBS_DIM)
    _nb_observation(int(agent_index), apos, tpos, det, out)
    return out


_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True)
def _mix(h):
    h ^= h >> np.uint64(30)
    h *= _MIX1
    h ^= h >> np.uint64(27)
    h *= _MIX2
    h ^= h >> np.uint64(31)
    return h


@njit(cache=True)
def _nb_tiles(obs, widths, num_tilings, table_size, out):
    """Active tile index per tiling.

    Tiling ``k`` is displaced by ``k * (2d + 1) / num_tilings`` of a tile along
    dimension ``d``; tile coordinates plus ``k`` are hashed into the table.
    """
    nd = obs.shape[0]
    size = np.uint64(table_size)
    for k in range(num_tilings):
        h = _mix(np.uint64(k) + _GOLDEN)
        for d in range(nd):
            q = np.int64(np.floor(obs[d] / widths[d] * num_tilings))
            c = (q + k * (2 * d + 1)) // num_tilings
            h = _mix(h ^ np.uint64(c + (np.int64(d) << np.int64(56))))
        out[k] = np.int64(h % size)


@njit(cache=True)
def _nb_tile_coords(obs, widths, num_tilings):
    """Un-hashed tile coordinates, shape ``(num_tilings, dim)``; used for probes."""
    nd = obs.shape[0]
    out = np.empty((num_tilings, nd), dtype=np.int64)
    for k in range(num_tilings):
        for d in range(nd):
            q = np.int64(np.floor(obs[d] / widths[d] * num_tilings))
            out[k, d] = (q + k * (2 * d + 1)) // num_tilings
    return out


def observation_widths(coder: CoderConfig) -> np.ndarray:
    w = np.empty(OBS_DIM)
    w[POS] = coder.position_width
    w[TARGET_COUNT] = coder.count_width
    w[TARGET_DIST] = coder.distance_width
    w[AGENT_COUNT] = coder.count_width
    w[AGENT_DIST] = coder.distance_width
    return w


@dataclass(frozen=True)
class TileCoder:
    """Hashing grid tile coder with deterministic asymmetric offsets.

    ``widths`` holds one tile width per input dimension, in the input's units.
    """

    widths: np.ndarray
    num_tilings: int = 64
    hash_table_size: int = 2**20

    def __post_init__(self):
        w = np.asarray(self.widths, dtype=np.float64).copy()
        if w.ndim != 1 or np.any(w <= 0):
            raise ValueError("tile widths must be a 1-D array of positive values")
        w.setflags(write=False)
        object.__setattr__(self, "widths", w)

    @classmethod
    def for_observations(cls, coder: CoderConfig) -> "TileCoder":
        return cls(observation_widths(coder), coder.num_tilings, coder.hash_table_size)

    @property
    def dim(self) -> int:
        return self.widths.shape[0]

    def tiles(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.dim,):
            raise ValueError(f"expected observation of shape ({self.dim},), got {obs.shape}")
        out = np.empty(self.num_tilings, dtype=np.int64)
        _nb_tiles(obs, self.widths, self.num_tilings, self.hash_table_size, out)
        return out

    def tile_coords(self, obs: np.ndarray) -> np.ndarray:
        return _nb_tile_coords(np.asarray(obs, dtype=np.float64), self.widths, self.num_tilings)


def active_tiles(coder: TileCoder, obs: np.ndarray) -> np.ndarray:
    return coder.tiles(obs)
