"""Config files, CSV outputs, weight files, episode traces and run manifests.

Config files are flat ``key = value`` text; ``#`` starts a comment and list
values are comma separated. Every CSV starts with a ``# searchtrack <kind> v1``
comment line that readers check before parsing.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import (
    CoderConfig,
    ConfigError,
    ExperimentConfig,
    LearnerSchedule,
    RewardMode,
    WorldConfig,
)

CSV_VERSION = 1
WEIGHTS_VERSION = 1
TRACE_VERSION = 1

_SECTIONS = {"world": WorldConfig, "schedule": LearnerSchedule, "coder": CoderConfig}
_TOP_LEVEL = ("reward_mode", "num_episodes", "num_runs", "base_seed", "eval_episodes", "oracle_mean", "median_window")


def _key_table() -> Dict[str, Tuple[Optional[str], Any]]:
    """Flat key -> (section or None, field type)."""
    table: Dict[str, Tuple[Optional[str], Any]] = {}
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            table[f.name] = (section, f.type)
    for f in fields(ExperimentConfig):
        if f.name in _TOP_LEVEL:
            table[f.name] = (None, f.type)
    return table


KEYS = _key_table()


def _parse_value(key: str, raw: str, line: Optional[int]):
    section, typ = KEYS[key]
    typ = str(typ)
    try:
        if "Tuple[float" in typ:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if "Tuple[str" in typ:
            return tuple(v.strip() for v in raw.split(",") if v.strip())
        if "RewardMode" in typ:
            return RewardMode(raw.strip().lower())
        if "Optional[float]" in typ:
            return None if raw.strip().lower() in ("", "none") else float(raw)
        if typ == "int":
            return int(raw, 0)
        if typ == "float":
            return float(raw)
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw.strip()!r}: {exc}", line) from None
    raise ConfigError(key, f"unsupported field type {typ}", line)  # pragma: no cover


def build_config(values: Dict[str, Any], lines: Optional[Dict[str, int]] = None) -> ExperimentConfig:
    """Assemble an ``ExperimentConfig`` from flat, already-typed values."""
    lines = lines or {}
    parts: Dict[Optional[str], Dict[str, Any]] = {None: {}, **{s: {} for s in _SECTIONS}}
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(key, "unknown key", lines.get(key))
        parts[KEYS[key][0]][key] = value
    try:
        sections = {s: cls(**parts[s]) for s, cls in _SECTIONS.items()}
        return ExperimentConfig(**sections, **parts[None])
    except ConfigError as exc:
        raise ConfigError(exc.field, str(exc).split(": ", 1)[-1], lines.get(exc.field)) from None


def parse_config(text: str) -> ExperimentConfig:
    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(body, "expected 'key = value'", lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(key, "unknown key", lineno)
        if key in values:
            raise ConfigError(key, "duplicate key", lineno)
        values[key] = _parse_value(key, value, lineno)
        lines[key] = lineno
    return build_config(values, lines)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, RewardMode):
        return v.value
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def config_items(cfg: ExperimentConfig) -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            out[f.name] = getattr(obj, f.name)
    for key in _TOP_LEVEL:
        out[key] = getattr(cfg, key)
    return out


def dump_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in config_items(cfg).items())


def override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Replace flat keys (``None`` values are ignored)."""
    values = {k: v for k, v in config_items(cfg).items()}
    values.update({k: v for k, v in kw.items() if v is not None})
    return build_config(values)


def atomic_write(path, data) -> None:
    """Write ``data`` (str or bytes) to a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class SchemaError(ValueError):
    pass


def csv_text(kind: str, header: Optional[Sequence[str]], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# searchtrack {kind} v{CSV_VERSION}\n")
    if header:
        buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(v) for v in row) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return str(v)


def read_csv(path, kind: str) -> List[List[str]]:
    """Rows of a versioned CSV (header row included, if any)."""
    with open(path) as fh:
        first = fh.readline().strip()
        expected = f"# searchtrack {kind} v{CSV_VERSION}"
        if first != expected:
            raise SchemaError(f"{path}: expected {expected!r}, found {first!r}")
        return [line.rstrip("\n").split(",") for line in fh if line.strip()]


def write_training_curve(path, curves: np.ndarray, oracle_mean: float) -> None:
    def rows():
        for run in range(curves.shape[0]):
            for ep in range(curves.shape[1]):
                F = int(curves[run, ep])
                yield (run, ep, F, F / oracle_mean)

    atomic_write(path, csv_text("training_curve", ("run", "episode", "F", "F_normalized"), rows()))


def read_training_curve(path) -> np.ndarray:
    """``(runs, episodes)`` array of F."""
    rows = read_csv(path, "training_curve")[1:]
    runs = max(int(r[0]) for r in rows) + 1
    out = np.zeros((runs, len(rows) // runs), dtype=np.int64)
    for r in rows:
        out[int(r[0]), int(r[1])] = int(r[2])
    return out


def write_heatmap(path, grid: np.ndarray) -> None:
    atomic_write(path, csv_text("heatmap", None, (list(map(int, row)) for row in grid)))


def read_heatmap(path) -> np.ndarray:
    return np.array([[int(v) for v in row] for row in read_csv(path, "heatmap")], dtype=np.int64)


# -- weights -----------------------------------------------------------------


def save_weights(path, team, cfg: ExperimentConfig, schedule: Optional[LearnerSchedule] = None, run: int = 0) -> None:
    """Sparse ``.npz``: a JSON header plus, per agent, the nonzero tile rows.

    Arrays: ``header`` (JSON string), ``actions`` (A, 2), and for each agent
    ``j``: ``rows_j`` (tile indices, int64) and ``values_j`` (len(rows_j), A).
    """
    schedule = schedule or cfg.schedule
    header = {
        "format": "searchtrack-weights",
        "version": WEIGHTS_VERSION,
        "tool_version": __version__,
        "run": run,
        "num_agents": team.num_agents,
        "num_actions": len(team.actions),
        "reward_mode": cfg.reward_mode.value,
        "coder": {f.name: getattr(cfg.coder, f.name) for f in fields(cfg.coder)},
        "schedule": {f.name: getattr(schedule, f.name) for f in fields(schedule)},
        "config": dump_config(cfg),
    }
    arrays = {"header": np.array(json.dumps(header, sort_keys=True)), "actions": team.actions}
    for j in range(team.num_agents):
        w = team.weights[j]
        rows = np.flatnonzero(np.any(w != 0.0, axis=1))
        arrays[f"rows_{j}"] = rows.astype(np.int64)
        arrays[f"values_{j}"] = w[rows]
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    atomic_write(path, buf.getvalue())


def load_weights(path, cfg: Optional[ExperimentConfig] = None):
    """Returns ``(team, header)``; raises ``ValueError`` when incompatible with ``cfg``."""
    from .featurizer import TileCoder
    from .trainer import LearnerTeam

    with np.load(path) as z:
        header = json.loads(str(z["header"]))
        if header.get("format") != "searchtrack-weights" or header.get("version") != WEIGHTS_VERSION:
            raise SchemaError(f"{path}: not a v{WEIGHTS_VERSION} searchtrack weights file")
        coder_cfg = CoderConfig(**header["coder"])
        actions = z["actions"]
        if cfg is not None:
            problems = []
            if cfg.coder != coder_cfg:
                problems.append(f"coder {coder_cfg} != {cfg.coder}")
            if header["num_agents"] != cfg.world.num_agents:
                problems.append(f"num_agents {header['num_agents']} != {cfg.world.num_agents}")
            from .environment import enumerate_action_set

            expected = enumerate_action_set(cfg.world.radial_steps, cfg.world.num_angles)
            if expected.shape != actions.shape or not np.array_equal(expected, actions):
                problems.append("action set differs")
            if problems:
                raise ValueError(f"{path}: weights incompatible with config: " + "; ".join(problems))
        coder = TileCoder.for_observations(coder_cfg)
        weights = np.zeros((header["num_agents"], coder_cfg.hash_table_size, len(actions)))
        for j in range(header["num_agents"]):
            weights[j, z[f"rows_{j}"]] = z[f"values_{j}"]
    return LearnerTeam(coder, actions, weights), header


def weight_files(path) -> List[Path]:
    """A single weights file, or every ``*.npz`` in a directory sorted by name."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.npz"))
        if not files:
            raise FileNotFoundError(f"no .npz weight files in {path}")
        return files
    return [path]


# -- traces ------------------------------------------------------------------


def trace_records(log, run: int, episode: int, base_seed: int) -> List[Dict[str, Any]]:
    """One JSON-ready record per scored timestep ``t = 1..T``.

    The first record also carries the spawn positions (``start_agents``,
    ``start_targets``) so a trace can be plotted on its own.
    """
    recs = []
    for t in range(log.length):
        rec = {
            "v": TRACE_VERSION,
            "base_seed": base_seed,
            "run": run,
            "episode": episode,
            "t": t + 1,
            "agents": log.agent_pos[t + 1].tolist(),
            "targets": log.target_pos[t + 1].tolist(),
            "detected": log.detections[t].astype(int).tolist(),
            "actions": log.actions[t].tolist(),
            "rewards": log.rewards[t].tolist(),
        }
        if t == 0:
            rec["start_agents"] = log.agent_pos[0].tolist()
            rec["start_targets"] = log.target_pos[0].tolist()
        recs.append(rec)
    return recs


def write_trace(path, log, run: int, episode: int, base_seed: int) -> None:
    lines = [json.dumps(r, sort_keys=True) for r in trace_records(log, run, episode, base_seed)]
    atomic_write(path, "\n".join(lines) + "\n")


def read_trace(path) -> List[Dict[str, Any]]:
    recs = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                if rec.get("v") != TRACE_VERSION:
                    raise SchemaError(f"{path}: unsupported trace version {rec.get('v')}")
                recs.append(rec)
    return recs


def trace_positions(records: Sequence[Dict[str, Any]]) -> np.ndarray:
    """Agent positions ``(T, N, 2)`` from trace records."""
    return np.array([r["agents"] for r in records], dtype=np.float64)


# -- manifest ----------------------------------------------------------------


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg: ExperimentConfig, command: str, artifacts: Sequence[Path], runs: Sequence[int], extra=None) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "tool": "searchtrack",
        "tool_version": __version__,
        "command": command,
        "base_seed": cfg.base_seed,
        "config": dump_config(cfg),
        "runs": [
            {"run": r, "seed_entropy": [cfg.base_seed, r], "streams": {"train_world": 0, "train_policy": 1, "eval_world": 2, "eval_policy": 3}}
            for r in runs
        ],
        "artifacts": {str(Path(p).relative_to(out_dir)): sha256(p) for p in artifacts},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> Dict[str, Any]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return json.loads(path.read_text())
