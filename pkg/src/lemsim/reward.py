"""Composite cooperative reward with a fully decomposed audit trail.

Per agent and step: a weighted base reward is scaled by the multiplicative
cooperation bonus (system-health factor times the agent's own contribution
factor), then DSO-reliance and unmet-demand penalties are subtracted. Every
term is retained in the breakdown so the total can be recomposed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from .kpi import KpiRecord

# DSO volume earns only a fraction of the P2P credit in the trading term.
DSO_TRADING_DISCOUNT = 0.25

_GROUP_SUM_TOL = 1e-6


@dataclass(frozen=True)
class RewardWeights:
    """Weight configuration; each weight group must sum to 1."""

    # base components: economic, grid balance, resource allocation,
    # trading activity, market stability
    economic: float = 0.2
    grid_balance: float = 0.2
    resource: float = 0.2
    trading: float = 0.2
    stability: float = 0.2
    # contribution factor: imbalance reduction, price efficiency, P2P share
    contrib_imbalance: float = 1.0 / 3.0
    contrib_price: float = 1.0 / 3.0
    contrib_volume: float = 1.0 / 3.0
    # cooperation factor over system KPIs
    coop_self_consumption: float = 1.0 / 3.0
    coop_coordination: float = 1.0 / 3.0
    coop_convergence: float = 1.0 / 3.0
    dso_penalty_coeff: float = 0.001
    unmet_penalty_coeff: float = 0.002

    def __post_init__(self) -> None:
        groups = {
            "base": (self.economic, self.grid_balance, self.resource,
                     self.trading, self.stability),
            "contribution": (self.contrib_imbalance, self.contrib_price,
                             self.contrib_volume),
            "cooperation": (self.coop_self_consumption, self.coop_coordination,
                            self.coop_convergence),
        }
        for name, group in groups.items():
            if any(w < 0 for w in group):
                raise ValueError(f"{name} weights must be >= 0")
            if abs(sum(group) - 1.0) > _GROUP_SUM_TOL:
                raise ValueError(f"{name} weights must sum to 1, got {sum(group)}")
        if self.dso_penalty_coeff < 0 or self.unmet_penalty_coeff < 0:
            raise ValueError("penalty coefficients must be >= 0")


@dataclass(frozen=True)
class AgentStepOutcome:
    """One agent's realized market/physical outcome for a single step."""

    agent_id: str
    capacity_kw: float
    p2p_buy_kwh: float = 0.0
    p2p_sell_kwh: float = 0.0
    dso_buy_kwh: float = 0.0
    dso_sell_kwh: float = 0.0
    profit: float = 0.0
    unmet_demand_kwh: float = 0.0
    flex_kwh: float = 0.0
    # volume-weighted P2P price paid/received; None when the agent had no
    # P2P trades this step
    p2p_price_mean: float | None = None

    @property
    def bought_kwh(self) -> float:
        return self.p2p_buy_kwh + self.dso_buy_kwh

    @property
    def sold_kwh(self) -> float:
        return self.p2p_sell_kwh + self.dso_sell_kwh

    @property
    def p2p_kwh(self) -> float:
        return self.p2p_buy_kwh + self.p2p_sell_kwh

    @property
    def dso_kwh(self) -> float:
        return self.dso_buy_kwh + self.dso_sell_kwh


@dataclass(frozen=True)
class MarketContext:
    """Step-level aggregates shared by every agent's reward evaluation."""

    grid_balance_kwh: float
    grid_capacity_kw: float
    feed_in_price: float
    utility_price: float
    price_floor: float
    price_ceiling: float
    price_volatility: float
    total_p2p_kwh: float
    mean_p2p_price: float | None

    @property
    def tariff_midpoint(self) -> float:
        return 0.5 * (self.feed_in_price + self.utility_price)

    @property
    def price_band(self) -> float:
        return self.price_ceiling - self.price_floor


@dataclass(frozen=True)
class RewardBreakdown:
    economic: float
    grid_balance_term: float
    resource_alloc: float
    trading: float
    stability: float
    base: float
    f_coop: float
    f_contrib: float
    dso_penalty: float
    unmet_penalty: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def recompose(self) -> float:
        """Recompute the total from stored terms (audit path)."""
        return (self.base * (1.0 + self.f_coop * self.f_contrib)
                - self.dso_penalty - self.unmet_penalty)


def _sign(x: float) -> float:
    return math.copysign(1.0, x) if x != 0.0 else 0.0


def base_reward(outcome: AgentStepOutcome,
                ctx: MarketContext,
                weights: RewardWeights) -> tuple[float, float, float, float, float, float]:
    """Weighted individual performance terms, each pre-normalized to O(1).

    Returns (economic, grid_balance_term, resource_alloc, trading,
    stability, base).

    economic compares realized profit to an all-DSO counterfactual at the
    posted tariffs; the grid term pays for trading against the sign of the
    grid balance (buy in surplus, sell in deficit); resource is the agent's
    own flexibility utilization; trading credits volume with P2P counted
    above DSO; stability is the complement of normalized price volatility.
    """
    cap = ctx.grid_capacity_kw
    counterfactual = (outcome.sold_kwh * ctx.feed_in_price
                      - outcome.bought_kwh * ctx.utility_price)
    scale = ctx.tariff_midpoint * outcome.capacity_kw
    economic = (outcome.profit - counterfactual) / scale if scale > 0 else 0.0

    net_buy = outcome.bought_kwh - outcome.sold_kwh
    grid_term = _sign(ctx.grid_balance_kwh) * net_buy / cap

    resource = (min(1.0, outcome.p2p_kwh / outcome.flex_kwh)
                if outcome.flex_kwh > 0 else 0.0)

    trading = (outcome.p2p_kwh + DSO_TRADING_DISCOUNT * outcome.dso_kwh) / cap

    vol_norm = min(1.0, ctx.price_volatility / ctx.price_band) if ctx.price_band > 0 else 0.0
    stability = 1.0 - vol_norm

    base = (weights.economic * economic
            + weights.grid_balance * grid_term
            + weights.resource * resource
            + weights.trading * trading
            + weights.stability * stability)
    return economic, grid_term, resource, trading, stability, base


def cooperation_factor(kpis: KpiRecord, weights: RewardWeights) -> float:
    """System-health multiplier in [0, 1] from the broadcast KPIs."""
    value = (weights.coop_self_consumption * kpis.self_consumption
             + weights.coop_coordination * kpis.coordination_score
             + weights.coop_convergence * kpis.coordination_convergence)
    return min(1.0, max(0.0, value))


def contribution_factor(outcome: AgentStepOutcome,
                        ctx: MarketContext,
                        weights: RewardWeights) -> float:
    """Agent-specific credit in [-1, 1] for the cooperation bonus.

    Three terms: the counterfactual effect of removing the agent's trades on
    |grid balance| (positive when removal makes it worse), relative price
    efficiency of its P2P trades against the market mean's distance to the
    tariff midpoint, and the agent's share of P2P volume.
    """
    b = ctx.grid_balance_kwh
    b_without = b - (outcome.bought_kwh - outcome.sold_kwh)
    term_imbalance = (abs(b_without) - abs(b)) / ctx.grid_capacity_kw

    term_price = 0.0
    if outcome.p2p_price_mean is not None and ctx.mean_p2p_price is not None:
        mid = ctx.tariff_midpoint
        agent_dev = abs(outcome.p2p_price_mean - mid)
        market_dev = abs(ctx.mean_p2p_price - mid)
        if agent_dev + market_dev > 0:
            term_price = (market_dev - agent_dev) / (market_dev + agent_dev)

    term_volume = (outcome.p2p_kwh / ctx.total_p2p_kwh
                   if ctx.total_p2p_kwh > 0 else 0.0)

    value = (weights.contrib_imbalance * term_imbalance
             + weights.contrib_price * term_price
             + weights.contrib_volume * term_volume)
    return min(1.0, max(-1.0, value))


def penalties(outcome: AgentStepOutcome,
              ctx: MarketContext,
              weights: RewardWeights) -> tuple[float, float]:
    """(dso_penalty, unmet_penalty), both >= 0.

    DSO reliance is charged per kWh and amplified by the normalized grid
    imbalance; unmet demand is charged per kWh flat.
    """
    imbalance_scale = 1.0 + abs(ctx.grid_balance_kwh) / ctx.grid_capacity_kw
    dso_pen = weights.dso_penalty_coeff * outcome.dso_kwh * imbalance_scale
    unmet_pen = weights.unmet_penalty_coeff * outcome.unmet_demand_kwh
    return dso_pen, unmet_pen


def compute_reward(outcome: AgentStepOutcome,
                   ctx: MarketContext,
                   kpis: KpiRecord,
                   weights: RewardWeights) -> RewardBreakdown:
    """Assemble the full breakdown; total = base*(1 + f_coop*f_contrib) - penalties."""
    economic, grid_term, resource, trading, stability, base = base_reward(
        outcome, ctx, weights)
    f_coop = cooperation_factor(kpis, weights)
    f_contrib = contribution_factor(outcome, ctx, weights)
    dso_pen, unmet_pen = penalties(outcome, ctx, weights)
    total = base * (1.0 + f_coop * f_contrib) - dso_pen - unmet_pen
    return RewardBreakdown(
        economic=economic,
        grid_balance_term=grid_term,
        resource_alloc=resource,
        trading=trading,
        stability=stability,
        base=base,
        f_coop=f_coop,
        f_contrib=f_contrib,
        dso_penalty=dso_pen,
        unmet_penalty=unmet_pen,
        total=total,
    )
