"""Command line entry point: ``searchtrack {train,eval,oracle,heatmap,trace-replay}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, RewardMode
from .metrics import Heatmap, normalized_score
from .oracle import oracle_F
from .trainer import EVAL_POLICY, eval_worlds, evaluate_run, run_episode, stream, train

log = logging.getLogger("searchtrack")


def _config(args, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    cfg = io.load_config(args.config) if getattr(args, "config", None) else (base or ExperimentConfig())
    return io.override(
        cfg,
        base_seed=getattr(args, "seed", None),
        num_runs=getattr(args, "runs", None),
        num_episodes=getattr(args, "episodes", None) if args.command == "train" else None,
        eval_episodes=getattr(args, "episodes", None) if args.command != "train" else None,
        reward_mode=RewardMode(args.reward) if getattr(args, "reward", None) else None,
        num_agents=getattr(args, "agents", None),
    )


def _oracle_mean(cfg: ExperimentConfig, runs) -> float:
    if cfg.oracle_mean is not None:
        return cfg.oracle_mean
    log.info("solving oracle on %d x %d evaluation worlds for normalisation", len(runs), cfg.eval_episodes)
    return oracle_F(cfg, runs, cfg.eval_episodes)[0]


def cmd_train(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    runs = list(range(cfg.num_runs))
    result = train(cfg)
    oracle_mean = _oracle_mean(cfg, runs)
    artifacts = [out / "training_curve.csv", out / "config.txt"]
    io.write_training_curve(artifacts[0], result.curves, oracle_mean)
    io.atomic_write(artifacts[1], io.dump_config(cfg))
    for run, team, sched in zip(runs, result.teams, result.schedules):
        path = out / "weights" / f"run_{run:02d}.npz"
        io.save_weights(path, team, cfg, sched, run)
        artifacts.append(path)
    io.write_manifest(out, cfg, "train", artifacts, runs, {"oracle_mean": oracle_mean})
    tail = result.curves[:, -min(5000, cfg.num_episodes):].mean() / oracle_mean
    print(f"trained {len(runs)} run(s); final-window normalised F = {tail:.4f}")
    return 0


def _load_teams(args):
    files = io.weight_files(args.weights)
    _, header = io.load_weights(files[0])
    cfg = _config(args, io.parse_config(header["config"]))
    teams, runs = [], []
    for f in files:
        team, h = io.load_weights(f, cfg)
        teams.append(team)
        runs.append(int(h["run"]))
    return cfg, teams, runs


def cmd_eval(args) -> int:
    if args.episodes is not None and args.episodes < 1:
        raise ConfigError("episodes", "must be >= 1")
    cfg, teams, runs = _load_teams(args)
    out = Path(args.out)
    n = cfg.eval_episodes
    artifacts: List[Path] = []
    means = []
    for team, run in zip(teams, runs):

        def on_episode(ep, lg, run=run):
            if ep < args.trace:
                path = out / "traces" / f"run_{run:02d}_ep_{ep:04d}.jsonl"
                io.write_trace(path, lg, run, ep, cfg.base_seed)
                artifacts.append(path)

        means.append(evaluate_run(team, cfg, run, n, on_episode=on_episode).mean())
    means = np.array(means)
    oracle_mean = _oracle_mean(cfg, runs)
    mean, std = float(means.mean()), float(means.std())
    norm = normalized_score(mean, oracle_mean)
    summary = out / "summary.csv"
    io.atomic_write(
        summary,
        io.csv_text(
            "summary",
            ("agents", "reward_mode", "mean_F", "std_F", "normalized"),
            [(cfg.world.num_agents, cfg.reward_mode.value, mean, std, norm)],
        ),
    )
    artifacts.insert(0, summary)
    io.write_manifest(out, cfg, "eval", artifacts, runs, {"oracle_mean": oracle_mean, "weights": str(args.weights)})
    print(f"mean F = {mean:.2f} (std {std:.2f}), normalised {100 * norm:.2f}%")
    return 0


def cmd_oracle(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    runs = list(range(cfg.num_runs))
    mean, std, per = oracle_F(cfg, runs, cfg.eval_episodes)
    files = [out / "oracle.csv", out / "oracle_episodes.csv"]
    io.atomic_write(files[0], io.csv_text("oracle", ("agents", "mean_F", "std_F"), [(cfg.world.num_agents, mean, std)]))
    # episodes are numbered run-major across all runs
    io.atomic_write(files[1], io.csv_text("oracle_episodes", ("episode", "F"), enumerate(per.ravel().tolist())))
    io.write_manifest(out, cfg, "oracle", files, runs)
    print(f"oracle mean F = {mean:.2f} (std {std:.2f})")
    return 0


def cmd_heatmap(args) -> int:
    if args.traces:
        files = sorted(Path(args.traces).glob("*.jsonl"))
        if not files:
            raise FileNotFoundError(f"no trace files in {args.traces}")
        hm = Heatmap.empty(_config(args).world)
        for f in files:
            hm.add_positions(io.trace_positions(io.read_trace(f)))
    elif args.weights:
        cfg, teams, runs = _load_teams(args)
        hm = Heatmap.empty(cfg.world)
        for team, run in zip(teams, runs):
            evaluate_run(team, cfg, run, cfg.eval_episodes, on_episode=lambda ep, lg: hm.add_log(lg))
    else:
        raise SystemExit("heatmap needs --traces or --weights")
    io.write_heatmap(args.out, hm.grid)
    print(f"wrote {args.out} ({hm.total} visits)")
    return 0


def replay_trace(trace_path, team, cfg: ExperimentConfig):
    """Re-simulate the evaluation episode a trace came from; returns ``(log, records)``."""
    recs = io.read_trace(trace_path)
    run, episode = recs[0]["run"], recs[0]["episode"]
    if recs[0]["base_seed"] != cfg.base_seed:
        cfg = io.override(cfg, base_seed=recs[0]["base_seed"])
    worlds = eval_worlds(cfg, run, episode + 1)
    policy_rng = stream(cfg.base_seed, run, EVAL_POLICY)
    for ep in range(episode + 1):
        lg = run_episode(cfg.world, team, worlds[ep], "eval", cfg.reward_mode, policy_rng)
    return lg, recs


def cmd_trace_replay(args) -> int:
    files = io.weight_files(args.weights)
    recs = io.read_trace(args.trace)
    cfg, teams, runs = _load_teams(args)
    team = teams[runs.index(recs[0]["run"])] if recs[0]["run"] in runs else teams[0]
    lg, recs = replay_trace(args.trace, team, cfg)
    expected = io.trace_records(lg, recs[0]["run"], recs[0]["episode"], recs[0]["base_seed"])
    ok = expected == recs
    print("trace replay: " + ("match" if ok else "MISMATCH") + f" ({len(recs)} records, {len(files)} weight file(s))")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="searchtrack", description="Multi-agent search-and-track experiments with tile-coded Q-learners.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, weights=False):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--seed", type=int, help="base seed")
        sp.add_argument("--agents", type=int, help="number of pursuer agents")
        sp.add_argument("--reward", choices=[m.value for m in RewardMode])
        if weights:
            sp.add_argument("--weights", help="weights file or directory of run_*.npz")

    sp = sub.add_parser("train", help="train learners and write curves, weights and a manifest")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--episodes", type=int, help="training episodes per run")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="greedy evaluation of trained weights")
    common(sp, weights=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--episodes", type=int, help="evaluation episodes per run")
    sp.add_argument("--trace", type=int, default=0, metavar="K", help="write traces for the first K episodes of each run")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("oracle", help="prior-knowledge baseline on the evaluation worlds")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--episodes", type=int, help="episodes per run")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("heatmap", help="visit-count grid from traces or from greedy rollouts")
    common(sp, weights=True)
    sp.add_argument("--traces", help="directory of trace .jsonl files")
    sp.add_argument("--episodes", type=int, help="episodes per run when rolling out weights")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.set_defaults(func=cmd_heatmap)

    sp = sub.add_parser("trace-replay", help="re-simulate a trace file and check it matches")
    common(sp, weights=True)
    sp.add_argument("--trace", required=True)
    sp.set_defaults(func=cmd_trace_replay)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "command", None) in ("eval", "trace-replay") and not args.weights:
        print("error: --weights is required", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigError, io.SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
