"""Scenario assembly from the YAML config tree and its companion data files.

A config names the episode parameters, reward weights, market parameters
and three relative file paths (fleet, topology, tariff); fleet rows in turn
name per-agent profile files. ConfigError messages carry the offending
field path so the CLI can exit with a useful diagnostic.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .assets import AgentConfig, agent_from_row, load_profile_csv
from .env import EpisodeConfig, MarketParams
from .grid import GridTopology
from .market import DsoTariff
from .reward import RewardWeights

DEFAULT_CONFIG = Path(__file__).parent / "data" / "default.yaml"


class ConfigError(Exception):
    """Malformed configuration; the message names the field path."""


@dataclass(frozen=True)
class Scenario:
    episode: EpisodeConfig
    market: MarketParams
    reward_weights: RewardWeights
    fleet: tuple[AgentConfig, ...]
    topology: GridTopology
    tariff: DsoTariff
    source_path: Path | None = None
    source_hash: str = ""


def _get(tree: dict, path: str, default: Any = None, required: bool = False) -> Any:
    node: Any = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"missing required config field: {path}")
            return default
        node = node[part]
    return node


def _build_episode(tree: dict) -> EpisodeConfig:
    section = _get(tree, "episode", {}) or {}
    try:
        return EpisodeConfig(
            max_steps=int(section.get("max_steps", 24)),
            seed=int(section.get("seed", 42)),
            grid_capacity_kw=float(section.get("grid_capacity_kw", 1800.0)),
            price_floor=float(section.get("price_floor", 20.0)),
            price_ceiling=float(section.get("price_ceiling", 600.0)),
            max_order_kwh=float(section.get("max_order_kwh", 180.0)),
            forecast_max_error=float(section.get("forecast_max_error", 0.3)),
            async_orders=bool(section.get("async_orders", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"episode: {exc}") from exc


def _build_market(tree: dict) -> MarketParams:
    section = _get(tree, "market", {}) or {}
    try:
        return MarketParams(
            kpi_window=int(section.get("kpi_window", 6)),
            reputation_window=int(section.get("reputation_window", 6)),
            loss_fraction=float(section.get("loss_fraction", 0.02)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"market: {exc}") from exc


def _build_weights(tree: dict) -> RewardWeights:
    section = _get(tree, "reward", {}) or {}
    base = section.get("base_weights", {}) or {}
    coop = section.get("cooperation_weights", {}) or {}
    contrib = section.get("contribution_weights", {}) or {}
    defaults = RewardWeights()
    try:
        return RewardWeights(
            economic=float(base.get("economic", defaults.economic)),
            grid_balance=float(base.get("grid_balance", defaults.grid_balance)),
            resource=float(base.get("resource", defaults.resource)),
            trading=float(base.get("trading", defaults.trading)),
            stability=float(base.get("stability", defaults.stability)),
            contrib_imbalance=float(contrib.get("imbalance", defaults.contrib_imbalance)),
            contrib_price=float(contrib.get("price", defaults.contrib_price)),
            contrib_volume=float(contrib.get("volume", defaults.contrib_volume)),
            coop_self_consumption=float(
                coop.get("self_consumption", defaults.coop_self_consumption)),
            coop_coordination=float(
                coop.get("coordination_score", defaults.coop_coordination)),
            coop_convergence=float(coop.get("convergence", defaults.coop_convergence)),
            dso_penalty_coeff=float(
                section.get("dso_penalty_coeff", defaults.dso_penalty_coeff)),
            unmet_penalty_coeff=float(
                section.get("unmet_penalty_coeff", defaults.unmet_penalty_coeff)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"reward: {exc}") from exc


def _load_fleet(fleet_path: Path) -> tuple[AgentConfig, ...]:
    if not fleet_path.is_file():
        raise ConfigError(f"files.fleet: no such file: {fleet_path}")
    agents: list[AgentConfig] = []
    with fleet_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"agent_id", "node_id", "capacity_kw", "battery_ratio", "profile"}
        if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
            raise ConfigError(
                f"files.fleet: expected header with columns {sorted(expected)}")
        for i, row in enumerate(reader):
            profile_path = fleet_path.parent / row["profile"]
            if not profile_path.is_file():
                raise ConfigError(
                    f"files.fleet row {i}: no such profile file: {profile_path}")
            try:
                profiles = load_profile_csv(profile_path)
                agents.append(agent_from_row(
                    agent_id=row["agent_id"].strip(),
                    node_id=row["node_id"].strip(),
                    capacity_kw=float(row["capacity_kw"]),
                    battery_ratio=float(row["battery_ratio"]),
                    profiles=profiles,
                ))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"files.fleet row {i}: {exc}") from exc
    if not agents:
        raise ConfigError("files.fleet: fleet is empty")
    ids = [a.agent_id for a in agents]
    if len(set(ids)) != len(ids):
        raise ConfigError("files.fleet: duplicate agent_id")
    return tuple(agents)


def load_config(path: str | Path | None = None) -> Scenario:
    """Load and validate a scenario; None loads the packaged default."""
    path = Path(path) if path is not None else DEFAULT_CONFIG
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    raw = path.read_bytes()
    try:
        tree = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    episode = _build_episode(tree)
    market = _build_market(tree)
    weights = _build_weights(tree)

    base_dir = path.parent
    fleet_rel = _get(tree, "files.fleet", required=True)
    topology_rel = _get(tree, "files.topology", required=True)
    tariff_rel = _get(tree, "files.tariff", required=True)

    fleet = _load_fleet(base_dir / fleet_rel)

    topology_path = base_dir / topology_rel
    if not topology_path.is_file():
        raise ConfigError(f"files.topology: no such file: {topology_path}")
    try:
        topology = GridTopology.from_csv(topology_path,
                                         grid_capacity_kw=episode.grid_capacity_kw)
    except ValueError as exc:
        raise ConfigError(f"files.topology: {exc}") from exc

    tariff_path = base_dir / tariff_rel
    if not tariff_path.is_file():
        raise ConfigError(f"files.tariff: no such file: {tariff_path}")
    try:
        tariff = DsoTariff.from_csv(tariff_path)
    except ValueError as exc:
        raise ConfigError(f"files.tariff: {exc}") from exc

    known_nodes = set(topology.nodes)
    for agent in fleet:
        if agent.node_id not in known_nodes:
            raise ConfigError(
                f"files.fleet: agent {agent.agent_id} at unknown node {agent.node_id}")

    return Scenario(
        episode=episode,
        market=market,
        reward_weights=weights,
        fleet=fleet,
        topology=topology,
        tariff=tariff,
        source_path=path,
        source_hash=hashlib.sha256(raw).hexdigest(),
    )


def default_scenario() -> Scenario:
    return load_config(DEFAULT_CONFIG)
