"""Operator command line: run episodes, train the CEM learner, export graphs.

Exit codes: 0 ok, 2 configuration error, 3 data error. LEM_LOG_LEVEL sets
the logging level (default WARNING).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import artifacts, kpi as kpi_mod
from .config import ConfigError, Scenario, load_config
from .env import LemEnv
from .policies import (CemConfig, GreedyPolicy, LinearPolicy, Policy, ZiPolicy,
                       aversion_from_penalty, cem_train, run_episode)

log = logging.getLogger("lemsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _setup_logging() -> None:
    level = os.environ.get("LEM_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_policies(spec: str, scenario: Scenario, seed: int) -> dict[str, Policy]:
    """Resolve a policy spec (zi | greedy | checkpoint path) into per-agent policies."""
    agent_ids = [a.agent_id for a in scenario.fleet]
    if spec == "zi":
        root = np.random.SeedSequence(seed, spawn_key=(0xA5,))
        streams = root.spawn(len(agent_ids))
        return {aid: ZiPolicy(np.random.Generator(np.random.PCG64(ss)))
                for aid, ss in zip(agent_ids, streams)}
    if spec == "greedy":
        policy = GreedyPolicy(
            dso_aversion=aversion_from_penalty(
                scenario.reward_weights.dso_penalty_coeff),
            price_floor=scenario.episode.price_floor,
            price_ceiling=scenario.episode.price_ceiling,
            max_order_kwh=scenario.episode.max_order_kwh,
        )
        return {aid: policy for aid in agent_ids}
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"policy: not 'zi', 'greedy' or a checkpoint file: {spec}")
    try:
        policy, _ = LinearPolicy.load(path)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ValueError(f"policy checkpoint {path}: {exc}") from exc
    return {aid: policy for aid in agent_ids}


def _write_manifest(out_dir: Path, scenario: Scenario, seed: int,
                    policy_spec: str, artifact_paths: list[str]) -> None:
    manifest = {
        "engine_version": __version__,
        "config_path": str(scenario.source_path),
        "config_hash": scenario.source_hash,
        "seed": seed,
        "policy": policy_spec,
        "artifacts": sorted(artifact_paths),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")


def _run_one_episode(scenario: Scenario, policy_spec: str, seed: int,
                     episode_dir: Path) -> list[kpi_mod.KpiRecord]:
    env = LemEnv(scenario)
    policies = build_policies(policy_spec, scenario, seed)
    result = run_episode(env, policies, seed=seed)

    episode_dir.mkdir(parents=True, exist_ok=True)
    artifacts.write_trades(episode_dir / "trades.jsonl", env.trades)
    artifacts.write_kpis(episode_dir / "kpis.csv", env.kpi_records)
    artifacts.write_rewards(episode_dir / "rewards.jsonl", env.reward_log)
    edges = artifacts.aggregate_network(env.trades)
    (episode_dir / "network.dot").write_text(artifacts.network_to_dot(edges))

    coordination = [r.coordination_score for r in env.kpi_records]
    responsiveness = (
        kpi_mod.agent_responsiveness(coordination, result.action_volume_series)
        if len(coordination) >= 2 else 0.0)
    summary = {
        "seed": seed,
        "total_rewards": result.total_rewards,
        "social_total": result.social_total,
        "agent_responsiveness": responsiveness,
    }
    (episode_dir / "episode.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return list(env.kpi_records)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_config(args.config)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else scenario.episode.seed
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    episode_seeds = [seed + i for i in range(args.episodes)]
    episode_dirs = [out_dir / f"episode_{i:03d}" for i in range(args.episodes)]

    try:
        if args.parallel > 1 and args.episodes > 1:
            with concurrent.futures.ThreadPoolExecutor(args.parallel) as pool:
                all_kpis = list(pool.map(
                    lambda pair: _run_one_episode(scenario, args.policy,
                                                  pair[0], pair[1]),
                    zip(episode_seeds, episode_dirs)))
        else:
            all_kpis = [
                _run_one_episode(scenario, args.policy, s, d)
                for s, d in zip(episode_seeds, episode_dirs)
            ]
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    flat = [record for records in all_kpis for record in records]
    stats = artifacts.summary_stats(flat)
    (out_dir / "summary.csv").write_text(artifacts.summary_to_csv(stats))

    produced = ["summary.csv", "manifest.json"]
    for d in episode_dirs:
        produced += [str(Path(d.name) / n)
                     for n in ("trades.jsonl", "kpis.csv", "rewards.jsonl",
                               "network.dot", "episode.json")]
    _write_manifest(out_dir, scenario, seed, args.policy, produced)
    print(f"wrote {args.episodes} episode(s) to {out_dir}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    try:
        scenario = load_config(args.config)
        cem = CemConfig(
            population_size=args.population,
            elite_frac=args.elite_frac,
            iterations=args.iterations,
            initial_spread=args.spread,
            seed=args.seed if args.seed is not None else scenario.episode.seed,
        )
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    initial_mean = initial_std = None
    start_iteration = 0
    if args.resume:
        try:
            policy, meta = LinearPolicy.load(args.resume)
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            print(f"data error: cannot resume from {args.resume}: {exc}",
                  file=sys.stderr)
            return EXIT_DATA
        initial_mean = policy.flat()
        initial_std = np.full(LinearPolicy.N_PARAMS, float(args.spread))
        start_iteration = int(meta.get("iterations_done", 0))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    best, curve = cem_train(lambda: LemEnv(scenario), cem,
                            initial_mean=initial_mean, initial_std=initial_std)

    checkpoint = out_dir / "checkpoint.json"
    best.save(checkpoint, meta={
        "config_hash": scenario.source_hash,
        "seed": cem.seed,
        "iterations_done": start_iteration + cem.iterations,
    })
    curve_path = out_dir / "learning_curve.csv"
    lines = ["iteration,population_mean,elite_mean,best_fitness"]
    mode = "a" if args.resume and curve_path.exists() else "w"
    if mode == "a":
        lines = []
    for row in curve:
        lines.append(f"{start_iteration + row.iteration},"
                     f"{row.population_mean!r},{row.elite_mean!r},"
                     f"{row.best_fitness!r}")
    with curve_path.open(mode) as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"best fitness {curve[-1].best_fitness:.3f}; checkpoint at {checkpoint}")
    return EXIT_OK


def cmd_network(args: argparse.Namespace) -> int:
    trades_path = Path(args.trades)
    if not trades_path.is_file():
        print(f"data error: no such trade log: {trades_path}", file=sys.stderr)
        return EXIT_DATA
    try:
        trades = artifacts.read_trades(trades_path)
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    edges = artifacts.aggregate_network(trades, p2p_only=args.p2p_only)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(artifacts.network_to_dot(edges))
    json_path = out_path.with_suffix(".json")
    json_path.write_text(artifacts.network_to_json(edges))
    print(f"wrote {out_path} and {json_path}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lemsim",
        description="Deterministic P2P local energy market simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run episodes and write artifacts")
    p_run.add_argument("--config", default=None, help="scenario YAML (default: packaged)")
    p_run.add_argument("--policy", default="zi",
                       help="zi | greedy | path to a policy checkpoint")
    p_run.add_argument("--episodes", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None,
                       help="base seed (default: from config)")
    p_run.add_argument("--out", default="runs/latest")
    p_run.add_argument("--parallel", type=int, default=1,
                       help="episodes evaluated concurrently")
    p_run.set_defaults(func=cmd_run)

    p_train = sub.add_parser("train", help="cross-entropy policy search")
    p_train.add_argument("--config", default=None)
    p_train.add_argument("--population", type=int, default=32)
    p_train.add_argument("--iterations", type=int, default=30)
    p_train.add_argument("--elite-frac", type=float, default=0.2)
    p_train.add_argument("--spread", type=float, default=0.5)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--resume", default=None,
                         help="checkpoint to continue from")
    p_train.add_argument("--out", default="runs/train")
    p_train.set_defaults(func=cmd_train)

    p_net = sub.add_parser("network", help="export the trading graph")
    p_net.add_argument("--trades", required=True, help="trades.jsonl path")
    p_net.add_argument("--out", required=True, help="output .dot path")
    p_net.add_argument("--p2p-only", action="store_true",
                       help="exclude DSO trades")
    p_net.set_defaults(func=cmd_network)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = make_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
