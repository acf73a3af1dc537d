"""Deterministic simulation engine for peer-to-peer local energy markets.

Eight (by default) heterogeneous prosumers trade hourly over a double
auction with a DSO fallback on a radial 34-node feeder; system-level KPIs
are broadcast into every observation and drive a composite cooperative
reward. Scripted baselines and a cross-entropy learner exercise the full
Dec-POMDP loop at desk scale.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .assets import (AgentConfig, BatteryState, ForecastPair, available_flex,
                     battery_charge, battery_discharge, make_forecast,
                     realized_profile)
from .config import ConfigError, Scenario, default_scenario, load_config
from .env import (OBS_SIZE, OBSERVATION_LABELS, Action, EpisodeConfig, LemEnv,
                  MarketParams, StepLedger)
from .grid import FlowResult, GridTopology, congestion, edge_flows, grid_balance
from .kpi import KpiRecord
from .market import (DSO_ID, ClearingResult, DsoTariff, Order, Reputation,
                     Trade, arrival_shuffle, clear_market, settle_dso,
                     update_reputation)
from .policies import (CemConfig, GreedyPolicy, LinearPolicy, ZiPolicy,
                       cem_train, greedy_policy, run_episode, zi_policy)
from .reward import (AgentStepOutcome, MarketContext, RewardBreakdown,
                     RewardWeights, compute_reward)

__version__ = "0.1.0"

__all__ = [
    "Action", "AgentConfig", "AgentStepOutcome", "BatteryState", "CemConfig",
    "ClearingResult", "ConfigError", "DSO_ID", "DsoTariff", "EpisodeConfig",
    "FlowResult", "ForecastPair", "GreedyPolicy", "GridTopology",
    "KERNEL_BACKEND", "KpiRecord", "LemEnv", "LinearPolicy", "MarketContext",
    "MarketParams", "OBS_SIZE", "OBSERVATION_LABELS", "Order", "Reputation",
    "RewardBreakdown", "RewardWeights", "Scenario", "StepLedger", "Trade",
    "ZiPolicy", "arrival_shuffle", "available_flex", "battery_charge",
    "battery_discharge", "cem_train", "clear_market", "compute_reward",
    "congestion", "default_scenario", "edge_flows", "greedy_policy",
    "grid_balance", "load_config", "make_forecast", "realized_profile",
    "run_episode", "settle_dso", "update_reputation", "zi_policy",
]
