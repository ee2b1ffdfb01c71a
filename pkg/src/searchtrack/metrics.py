"""Normalised scores, smoothed training curves, visit heatmaps and summary tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import WorldConfig


def normalized_score(F_mean: float, F_oracle_mean: float) -> float:
    if F_oracle_mean == 0:
        raise ZeroDivisionError("oracle mean is zero")
    if F_oracle_mean < 0:
        raise ValueError("oracle mean must be positive")
    return F_mean / F_oracle_mean


def median_filter(series: Sequence[float], window: int) -> np.ndarray:
    """Centered running median; the window is truncated at both ends."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    s = pd.Series(np.asarray(series, dtype=np.float64))
    return s.rolling(window, center=True, min_periods=1).median().to_numpy()


@dataclass
class Heatmap:
    """Visit counts on 1 m tiles; ``grid[y, x]``."""

    grid: np.ndarray

    @classmethod
    def empty(cls, cfg: WorldConfig) -> "Heatmap":
        return cls(np.zeros((int(np.ceil(cfg.area_height)), int(np.ceil(cfg.area_width))), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.grid.sum())

    def add_positions(self, pos: np.ndarray) -> None:
        pos = np.asarray(pos, dtype=np.float64).reshape(-1, 2)
        ny, nx = self.grid.shape
        ix = np.clip(np.floor(pos[:, 0]).astype(np.int64), 0, nx - 1)
        iy = np.clip(np.floor(pos[:, 1]).astype(np.int64), 0, ny - 1)
        np.add.at(self.grid, (iy, ix), 1)

    def add_log(self, log) -> None:
        # index 0 is the spawn state; one visit per agent per scored timestep
        self.add_positions(log.agent_pos[1:])

    def box_mass(self, box: Tuple[float, float, float, float]) -> int:
        """Counts in tiles fully inside ``(xmin, ymin, xmax, ymax)``."""
        xmin, ymin, xmax, ymax = box
        return int(self.grid[int(np.ceil(ymin)) : int(np.floor(ymax)), int(np.ceil(xmin)) : int(np.floor(xmax))].sum())


def accumulate_heatmap(logs: Iterable, cfg: WorldConfig) -> Heatmap:
    hm = Heatmap.empty(cfg)
    for lg in logs:
        hm.add_log(lg)
    return hm


@dataclass(frozen=True)
class SummaryRow:
    agents: int
    reward_mode: str
    mean_F: float
    std_F: float
    normalized: Optional[float]


def summarize(
    results: Mapping[Tuple[int, str], Tuple[float, float]],
    oracle: Optional[Mapping[int, Tuple[float, float]]] = None,
) -> List[SummaryRow]:
    """Rows per ``(agents, reward_mode)``, normalised by the oracle mean for that agent count.

    ``results`` maps ``(agents, mode) -> (mean, std)``; ``oracle`` maps
    ``agents -> (mean, std)`` and contributes rows with mode ``"oracle"``.
    """
    oracle = dict(oracle or {})
    rows = []
    for (agents, mode), (mean, std) in sorted(results.items()):
        o = oracle.get(agents)
        norm = normalized_score(mean, o[0]) if o else None
        rows.append(SummaryRow(agents, mode, float(mean), float(std), norm))
    for agents, (mean, std) in sorted(oracle.items()):
        rows.append(SummaryRow(agents, "oracle", float(mean), float(std), 1.0))
    return rows


def format_table(rows: Sequence[SummaryRow]) -> str:
    """Plain-text table: one line per agent count, one column per method."""
    if not rows:
        return ""
    modes = []
    for r in rows:
        if r.reward_mode not in modes:
            modes.append(r.reward_mode)
    agents = sorted({r.agents for r in rows})
    cell = {(r.agents, r.reward_mode): r for r in rows}
    width = 24
    lines = ["agents".ljust(8) + "".join(m.ljust(width) for m in modes)]
    for a in agents:
        mean_line = f"{a:<2} mean ".ljust(8)
        std_line = "   std ".ljust(8)
        for m in modes:
            r = cell.get((a, m))
            if r is None:
                mean_line += "-".ljust(width)
                std_line += "-".ljust(width)
                continue
            txt = f"{r.mean_F:.2f}"
            if r.normalized is not None and m != "oracle":
                txt += f" ({100 * r.normalized:.2f}%)"
            mean_line += txt.ljust(width)
            std_line += f"{r.std_F:.2f}".ljust(width)
        lines += [mean_line.rstrip(), std_line.rstrip()]
    return "\n".join(lines)
