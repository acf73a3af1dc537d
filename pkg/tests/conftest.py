"""Shared fixtures: packaged default scenario plus a tiny two-agent one."""

from __future__ import annotations

import numpy as np
import pytest

from lemsim.assets import AgentConfig
from lemsim.config import Scenario, default_scenario
from lemsim.env import EpisodeConfig, MarketParams
from lemsim.grid import GridTopology
from lemsim.market import DsoTariff
from lemsim.reward import RewardWeights


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    return default_scenario()


def flat_profile(value: float) -> tuple[float, ...]:
    return tuple([float(value)] * 24)


def tiny_topology() -> GridTopology:
    edges = [("SRC", "N1"), ("N1", "N2"), ("N1", "N3")]
    return GridTopology(
        nodes=("SRC", "N1", "N2", "N3"),
        edges=tuple(edges),
        edge_capacity={e: 600.0 for e in edges},
        grid_capacity_kw=1800.0,
    )


def make_tiny_scenario(seller_gen: float = 10.0,
                       buyer_dem: float = 10.0,
                       battery_ratio: float = 0.0,
                       forecast_error: float = 0.0,
                       async_orders: bool = False,
                       **weight_overrides) -> Scenario:
    """Two agents, flat profiles, optional batteries; deterministic forecasts."""
    seller = AgentConfig(
        agent_id="seller", node_id="N2", capacity_kw=50.0,
        battery_ratio=battery_ratio,
        generation_profile=flat_profile(seller_gen),
        demand_profile=flat_profile(0.0))
    buyer = AgentConfig(
        agent_id="buyer", node_id="N3", capacity_kw=50.0,
        battery_ratio=battery_ratio,
        generation_profile=flat_profile(0.0),
        demand_profile=flat_profile(buyer_dem))
    tariff = DsoTariff(feed_in=flat_profile(100.0), utility=flat_profile(400.0))
    return Scenario(
        episode=EpisodeConfig(forecast_max_error=forecast_error,
                              async_orders=async_orders),
        market=MarketParams(),
        reward_weights=RewardWeights(**weight_overrides),
        fleet=(seller, buyer),
        topology=tiny_topology(),
        tariff=tariff,
    )


@pytest.fixture
def tiny_scenario() -> Scenario:
    return make_tiny_scenario()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(12345))
