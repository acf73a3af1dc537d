"""Per-step market cycle: forecasts, actions, clearing, settlement, grid
evaluation, KPI broadcast, observation assembly and reward emission.

One environment instance is strictly sequential; many instances with
independent seeds can run in parallel. All randomness flows through two
numpy Generators (forecast noise, arrival shuffle) seeded at reset, so a
(config, seed, actions) triple reproduces byte-identical logs.

Observation layout (42 scalars, fixed order)
--------------------------------------------
Market signals [0..15]: current step, time of day, clearing price, clearing
volume, grid balance, DSO buy volume, DSO sell volume, DSO total volume,
P2P volume, DSO trade ratio, net grid import, DSO buy price (feed-in), DSO
sell price (utility), mean local price, price spread, local price
advantage.

Agent signals [16..31]: generation forecast, demand forecast, cumulative
demand satisfied, cumulative demand deferred, remaining demand, cumulative
supply satisfied, cumulative supply deferred, remaining supply, mean
profit, reputation, battery energy level, battery SoC, battery available
charge, battery available discharge, battery cumulative charge, battery
cumulative discharge.

Cooperation KPIs [32..41]: social welfare, market liquidity, mean bid-ask
spread, price volatility, supply-demand imbalance, grid congestion,
coordination score, coordination convergence, DER self-consumption,
flexibility utilization.

Normalization: prices map through (p - floor)/(ceiling - floor); per-agent
energies divide by the order-size bound (cumulative counters additionally
by the horizon) so a parameter-shared policy can invert scales with global
constants; system-wide volumes divide by grid capacity; welfare by
(grid capacity x price ceiling). Signed entries are clipped to [-1, 1].
The market block and tariffs describe the just-finished step, while the
tariff prices, forecasts and battery entries describe the upcoming one the
returned actions will be executed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Mapping, Optional

import numpy as np

from . import kpi as kpi_mod
from .assets import (AgentConfig, BatteryState, ForecastPair, available_flex,
                     battery_charge, battery_discharge, make_forecast,
                     realized_profile)
from .grid import FlowResult, GridTopology, edge_flows, grid_balance
from .market import (BUY, DSO_BUY, DSO_SELL, P2P, SELL, ClearingResult,
                     DsoTariff, Order, Reputation, Trade, arrival_shuffle,
                     clear_market, settle_dso, update_reputation)
from .reward import (AgentStepOutcome, MarketContext, RewardBreakdown,
                     RewardWeights, compute_reward)

if TYPE_CHECKING:
    from .config import Scenario

OBS_SIZE = 42
_QTY_EPS = 1e-9


def _clip(v: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, v))

OBSERVATION_LABELS: tuple[str, ...] = (
    # market signals
    "current_step", "time_of_day", "clearing_price", "clearing_volume",
    "grid_balance", "dso_buy_volume", "dso_sell_volume", "dso_total_volume",
    "p2p_volume", "dso_trade_ratio", "net_grid_import", "dso_buy_price",
    "dso_sell_price", "mean_local_price", "price_spread",
    "local_price_advantage",
    # agent-specific signals
    "energy_generation", "energy_demand", "cum_demand_satisfied",
    "cum_demand_deferred", "remaining_demand", "cum_supply_satisfied",
    "cum_supply_deferred", "remaining_supply", "mean_profit", "reputation",
    "battery_energy", "battery_soc", "battery_available_charge",
    "battery_available_discharge", "battery_cum_charge",
    "battery_cum_discharge",
    # implicit cooperation KPIs
    "kpi_social_welfare", "kpi_liquidity", "kpi_bid_ask_spread",
    "kpi_price_volatility", "kpi_imbalance", "kpi_congestion",
    "kpi_coordination_score", "kpi_coordination_convergence",
    "kpi_self_consumption", "kpi_flexibility_utilization",
)


@dataclass(frozen=True)
class Action:
    """Continuous price/quantity signals; clamped to range on intake."""

    price_signal: float
    quantity_signal: float


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 24
    seed: int = 42
    grid_capacity_kw: float = 1800.0
    price_floor: float = 20.0
    price_ceiling: float = 600.0
    max_order_kwh: float = 180.0
    forecast_max_error: float = 0.3
    async_orders: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.max_steps <= 24:
            raise ValueError("max_steps must be in [1, 24] (hourly day cycle)")
        if self.grid_capacity_kw <= 0:
            raise ValueError("grid_capacity_kw must be > 0")
        if self.price_floor < 0 or self.price_ceiling <= self.price_floor:
            raise ValueError("need 0 <= price_floor < price_ceiling")
        if self.max_order_kwh <= 0:
            raise ValueError("max_order_kwh must be > 0")
        if not 0.0 <= self.forecast_max_error < 1.0:
            raise ValueError("forecast_max_error must be in [0, 1)")

    @property
    def price_band(self) -> float:
        return self.price_ceiling - self.price_floor


@dataclass(frozen=True)
class MarketParams:
    kpi_window: int = 6
    reputation_window: int = 6
    loss_fraction: float = 0.02

    def __post_init__(self) -> None:
        if self.kpi_window < 1 or self.reputation_window < 1:
            raise ValueError("windows must be >= 1")
        if not 0.0 <= self.loss_fraction < 1.0:
            raise ValueError("loss_fraction must be in [0, 1)")


@dataclass
class AgentStepLedger:
    """Everything one agent did and experienced during a single step."""

    agent_id: str
    generation_kwh: float
    demand_kwh: float
    forecast_generation_kwh: float
    forecast_demand_kwh: float
    flex_sellable_kwh: float
    flex_buyable_kwh: float
    p2p_buy_kwh: float = 0.0
    p2p_sell_kwh: float = 0.0
    dso_buy_kwh: float = 0.0
    dso_sell_kwh: float = 0.0
    profit: float = 0.0
    p2p_value: float = 0.0
    charge_accepted_kwh: float = 0.0
    discharge_delivered_kwh: float = 0.0
    unmet_demand_kwh: float = 0.0
    deferred_supply_kwh: float = 0.0

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
    def flex_kwh(self) -> float:
        return self.flex_sellable_kwh + self.flex_buyable_kwh


@dataclass
class StepLedger:
    """Frozen record of one executed step, consistent by construction."""

    step: int
    orders: tuple[Order, ...]
    trades: tuple[Trade, ...]
    agents: dict[str, AgentStepLedger]
    clearing_price: Optional[float]
    clearing_volume: float
    buy_order_kwh: float
    sell_order_kwh: float
    p2p_volume_kwh: float
    dso_buy_volume_kwh: float
    dso_sell_volume_kwh: float
    grid_balance_kwh: float
    flows: FlowResult


@dataclass
class _AgentRuntime:
    config: AgentConfig
    battery: BatteryState
    reputation: Reputation
    cum_profit: float = 0.0
    cum_demand_satisfied: float = 0.0
    cum_demand_deferred: float = 0.0
    cum_supply_satisfied: float = 0.0
    cum_supply_deferred: float = 0.0
    pending_gen: Optional[ForecastPair] = None
    pending_dem: Optional[ForecastPair] = None


class LemEnv:
    """Deterministic multi-agent local energy market environment."""

    def __init__(self, scenario: "Scenario") -> None:
        self._scenario = scenario
        self._episode: EpisodeConfig = scenario.episode
        self._market: MarketParams = scenario.market
        self._weights: RewardWeights = scenario.reward_weights
        self._fleet: tuple[AgentConfig, ...] = tuple(scenario.fleet)
        self._topology: GridTopology = scenario.topology
        self._tariff: DsoTariff = scenario.tariff
        if len(self._tariff.feed_in) < self._episode.max_steps:
            raise ValueError("tariff shorter than the episode horizon")
        known_nodes = set(self._topology.nodes)
        for agent in self._fleet:
            if agent.node_id not in known_nodes:
                raise ValueError(
                    f"agent {agent.agent_id} placed at unknown node {agent.node_id}")
        self._agents: dict[str, _AgentRuntime] = {}
        self._started = False
        self._done = False
        self._step_index = 0

    # ------------------------------------------------------------------
    # lifecycle

    @property
    def agent_ids(self) -> tuple[str, ...]:
        return tuple(a.agent_id for a in self._fleet)

    @property
    def step_index(self) -> int:
        return self._step_index

    @property
    def done(self) -> bool:
        return self._done

    @property
    def scenario(self) -> "Scenario":
        return self._scenario

    @property
    def trades(self) -> tuple[Trade, ...]:
        return tuple(self._trade_log)

    @property
    def kpi_records(self) -> tuple[kpi_mod.KpiRecord, ...]:
        return tuple(self._kpi_log)

    @property
    def reward_log(self) -> tuple[tuple[int, str, RewardBreakdown], ...]:
        return tuple(self._reward_log)

    @property
    def ledgers(self) -> tuple[StepLedger, ...]:
        return tuple(self._ledger_log)

    def reset(self, seed: Optional[int] = None) -> dict[str, np.ndarray]:
        """Initialize a fresh episode and return the first observations.

        Batteries start mid-band, histories are cleared, and the forecast
        and shuffle RNG streams are derived from the seed (falling back to
        the configured episode seed).
        """
        actual_seed = self._episode.seed if seed is None else seed
        root = np.random.SeedSequence(actual_seed)
        forecast_ss, shuffle_ss = root.spawn(2)
        self._forecast_rng = np.random.Generator(np.random.PCG64(forecast_ss))
        self._shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))

        self._agents = {
            a.agent_id: _AgentRuntime(
                config=a,
                battery=BatteryState.at_mid_band(a.battery_capacity_kwh),
                reputation=Reputation(agent_id=a.agent_id,
                                      window=self._market.reputation_window),
            )
            for a in self._fleet
        }
        self._step_index = 0
        self._started = True
        self._done = False
        self._price_history: list[Optional[float]] = []
        self._volume_history: list[float] = []
        self._trade_log: list[Trade] = []
        self._kpi_log: list[kpi_mod.KpiRecord] = []
        self._reward_log: list[tuple[int, str, RewardBreakdown]] = []
        self._ledger_log: list[StepLedger] = []
        self._last_ledger: Optional[StepLedger] = None
        self._last_kpis = self._initial_kpis()
        self._last_defined_price: Optional[float] = None
        self._last_mean_local: Optional[float] = None
        self._last_spread = 0.0
        self._draw_forecasts()
        return {aid: self.build_observation(aid) for aid in self.agent_ids}

    def _initial_kpis(self) -> kpi_mod.KpiRecord:
        return kpi_mod.KpiRecord(
            social_welfare=0.0, liquidity=0.0, bid_ask_spread=0.0,
            price_volatility=0.0, imbalance=0.0, congestion=0.0,
            grid_balance=0.0, self_consumption=0.0,
            flexibility_utilization=0.0, coordination_score=1.0,
            coordination_convergence=1.0, p2p_trade_ratio=0.0,
            grid_balance_index=1.0)

    def _draw_forecasts(self) -> None:
        """Draw the upcoming step's forecasts (consumed by the next step())."""
        hour = min(self._step_index, self._episode.max_steps - 1)
        for agent in self._fleet:
            rt = self._agents[agent.agent_id]
            gen, dem = realized_profile(agent, hour)
            rt.pending_gen = make_forecast(gen, self._forecast_rng,
                                           self._episode.forecast_max_error)
            rt.pending_dem = make_forecast(dem, self._forecast_rng,
                                           self._episode.forecast_max_error)

    # ------------------------------------------------------------------
    # action decoding

    def decode_action(self, agent_id: str, action: Action) -> Optional[Order]:
        """Map a continuous action to an order, or None for no-order.

        Price interpolates the allowed band; the quantity signal's sign
        picks the side (positive buys) and its magnitude scales the agent's
        forecast-based flexibility, capped at the per-order bound. Non-finite
        components decode to no-order.
        """
        if not self._started:
            raise RuntimeError("reset() must be called before decode_action()")
        rt = self._agents[agent_id]
        ps = action.price_signal
        qs = action.quantity_signal
        if not (math.isfinite(ps) and math.isfinite(qs)):
            return None
        ps = min(1.0, max(0.0, ps))
        qs = min(1.0, max(-1.0, qs))
        if abs(qs) <= _QTY_EPS:
            return None
        assert rt.pending_gen is not None and rt.pending_dem is not None
        sellable, buyable = available_flex(
            rt.battery, rt.pending_gen.forecast_kw, rt.pending_dem.forecast_kw)
        cap = buyable if qs > 0 else sellable
        cap = min(self._episode.max_order_kwh, cap)
        quantity = abs(qs) * cap
        if quantity <= _QTY_EPS:
            return None
        price = self._episode.price_floor + ps * self._episode.price_band
        side = BUY if qs > 0 else SELL
        return Order(agent_id=agent_id, side=side, price=price,
                     quantity=quantity, step=self._step_index)

    # ------------------------------------------------------------------
    # step pipeline

    def step(self, actions: Mapping[str, Action]
             ) -> tuple[dict[str, np.ndarray], dict[str, float], bool, dict]:
        """Execute one hourly market cycle.

        Pipeline: decode actions against pending forecasts, (optionally)
        shuffle arrivals, clear the P2P book, settle residuals with the DSO,
        reconcile each agent's physical imbalance against its battery, then
        evaluate flows, KPIs, rewards and fresh observations.
        """
        if not self._started:
            raise RuntimeError("reset() must be called before step()")
        if self._done:
            raise RuntimeError("episode finished; call reset()")
        unknown = [aid for aid in actions if aid not in self._agents]
        if unknown:
            raise ValueError(f"actions for unknown agents: {unknown}")

        t = self._step_index
        cfg = self._episode

        # realized profiles and start-of-step flexibility (actuals)
        agent_ledgers: dict[str, AgentStepLedger] = {}
        for agent in self._fleet:
            rt = self._agents[agent.agent_id]
            gen, dem = realized_profile(agent, min(t, 23))
            sellable, buyable = available_flex(rt.battery, gen, dem)
            assert rt.pending_gen is not None and rt.pending_dem is not None
            agent_ledgers[agent.agent_id] = AgentStepLedger(
                agent_id=agent.agent_id,
                generation_kwh=gen,
                demand_kwh=dem,
                forecast_generation_kwh=rt.pending_gen.forecast_kw,
                forecast_demand_kwh=rt.pending_dem.forecast_kw,
                flex_sellable_kwh=sellable,
                flex_buyable_kwh=buyable,
            )

        orders: list[Order] = []
        for agent in self._fleet:
            action = actions.get(agent.agent_id)
            if action is None:
                continue
            order = self.decode_action(agent.agent_id, action)
            if order is not None:
                orders.append(order)

        if cfg.async_orders:
            orders = arrival_shuffle(orders, self._shuffle_rng)
        else:
            orders = [replace(o, arrival_rank=i) for i, o in enumerate(orders)]

        reputations = {aid: rt.reputation.score for aid, rt in self._agents.items()}
        result: ClearingResult = clear_market(orders, reputations=reputations)
        dso_trades = settle_dso(result.residual_buys, result.residual_sells,
                                self._tariff, t)
        trades: list[Trade] = list(result.trades) + dso_trades
        self._trade_log.extend(trades)

        for trade in trades:
            value = trade.price * trade.quantity
            if trade.layer == P2P:
                buyer = agent_ledgers[trade.buyer_id]
                seller = agent_ledgers[trade.seller_id]
                buyer.p2p_buy_kwh += trade.quantity
                buyer.profit -= value
                buyer.p2p_value += value
                seller.p2p_sell_kwh += trade.quantity
                seller.profit += value
                seller.p2p_value += value
            elif trade.layer == DSO_BUY:
                buyer = agent_ledgers[trade.buyer_id]
                buyer.dso_buy_kwh += trade.quantity
                buyer.profit -= value
            else:
                seller = agent_ledgers[trade.seller_id]
                seller.dso_sell_kwh += trade.quantity
                seller.profit += value

        # physical reconciliation: battery absorbs the residual when it can
        for agent in self._fleet:
            led = agent_ledgers[agent.agent_id]
            rt = self._agents[agent.agent_id]
            residual = (led.generation_kwh - led.demand_kwh
                        + led.bought_kwh - led.sold_kwh)
            if residual > 0:
                rt.battery, accepted = battery_charge(rt.battery, residual)
                led.charge_accepted_kwh = accepted
                led.deferred_supply_kwh = residual - accepted
            elif residual < 0:
                rt.battery, delivered = battery_discharge(rt.battery, -residual)
                led.discharge_delivered_kwh = delivered
                led.unmet_demand_kwh = -residual - delivered

            rt.cum_profit += led.profit
            rt.cum_demand_satisfied += led.demand_kwh - led.unmet_demand_kwh
            rt.cum_demand_deferred += led.unmet_demand_kwh
            rt.cum_supply_satisfied += led.generation_kwh - led.deferred_supply_kwh
            rt.cum_supply_deferred += led.deferred_supply_kwh

            cleared = led.sold_kwh
            delivered_kwh = cleared - min(led.unmet_demand_kwh, cleared)
            rt.reputation = update_reputation(rt.reputation, cleared, delivered_kwh)

        # grid evaluation: traded energy is what crosses the meter
        injections: dict[str, float] = {}
        for agent in self._fleet:
            led = agent_ledgers[agent.agent_id]
            node = agent.node_id
            injections[node] = injections.get(node, 0.0) + (led.sold_kwh - led.bought_kwh)
        flows = edge_flows(self._topology, injections)
        balance = grid_balance([
            (led.generation_kwh, led.demand_kwh, led.bought_kwh, led.sold_kwh)
            for led in agent_ledgers.values()])

        # KPI suite for this step
        self._price_history.append(result.clearing_price)
        self._volume_history.append(result.clearing_volume)
        if result.clearing_price is not None:
            self._last_defined_price = result.clearing_price
            self._last_mean_local = result.clearing_price

        buy_order_kwh = sum(o.quantity for o in orders if o.side == BUY)
        sell_order_kwh = sum(o.quantity for o in orders if o.side == SELL)
        bid_prices = [o.price for o in orders if o.side == BUY]
        ask_prices = [o.price for o in orders if o.side == SELL]
        spread, spread_defined = kpi_mod.bid_ask_spread(bid_prices, ask_prices)
        self._last_spread = spread if spread_defined else 0.0

        p2p_volume = result.clearing_volume
        dso_buy_volume = sum(tr.quantity for tr in dso_trades if tr.layer == DSO_BUY)
        dso_sell_volume = sum(tr.quantity for tr in dso_trades if tr.layer == DSO_SELL)
        dso_volume = dso_buy_volume + dso_sell_volume
        flex_total = sum(led.flex_kwh for led in agent_ledgers.values())

        imbalance = kpi_mod.imbalance(buy_order_kwh, sell_order_kwh,
                                      cfg.grid_capacity_kw)
        ratio = kpi_mod.self_consumption(p2p_volume, dso_volume)
        losses = self._market.loss_fraction * p2p_volume
        kpis = kpi_mod.KpiRecord(
            social_welfare=kpi_mod.social_welfare(trades),
            liquidity=kpi_mod.liquidity(trades),
            bid_ask_spread=self._last_spread,
            price_volatility=kpi_mod.price_volatility(
                self._price_history, self._market.kpi_window),
            imbalance=imbalance,
            congestion=flows.congestion_mean,
            grid_balance=balance,
            self_consumption=ratio,
            flexibility_utilization=kpi_mod.flexibility_utilization(
                p2p_volume, flex_total),
            coordination_score=kpi_mod.coordination_score(imbalance),
            coordination_convergence=kpi_mod.coordination_convergence(
                self._volume_history, self._market.kpi_window),
            p2p_trade_ratio=ratio,
            grid_balance_index=kpi_mod.grid_balance_index(
                balance, losses, dso_volume, cfg.grid_capacity_kw),
        )
        self._kpi_log.append(kpis)
        self._last_kpis = kpis

        ledger = StepLedger(
            step=t, orders=tuple(orders), trades=tuple(trades),
            agents=agent_ledgers, clearing_price=result.clearing_price,
            clearing_volume=result.clearing_volume,
            buy_order_kwh=buy_order_kwh, sell_order_kwh=sell_order_kwh,
            p2p_volume_kwh=p2p_volume, dso_buy_volume_kwh=dso_buy_volume,
            dso_sell_volume_kwh=dso_sell_volume, grid_balance_kwh=balance,
            flows=flows)
        self._ledger_log.append(ledger)
        self._last_ledger = ledger

        # rewards
        ctx = MarketContext(
            grid_balance_kwh=balance,
            grid_capacity_kw=cfg.grid_capacity_kw,
            feed_in_price=self._tariff.feed_in[t],
            utility_price=self._tariff.utility[t],
            price_floor=cfg.price_floor,
            price_ceiling=cfg.price_ceiling,
            price_volatility=kpis.price_volatility,
            total_p2p_kwh=p2p_volume,
            mean_p2p_price=result.clearing_price,
        )
        rewards: dict[str, float] = {}
        for agent in self._fleet:
            led = agent_ledgers[agent.agent_id]
            outcome = AgentStepOutcome(
                agent_id=agent.agent_id,
                capacity_kw=agent.capacity_kw,
                p2p_buy_kwh=led.p2p_buy_kwh,
                p2p_sell_kwh=led.p2p_sell_kwh,
                dso_buy_kwh=led.dso_buy_kwh,
                dso_sell_kwh=led.dso_sell_kwh,
                profit=led.profit,
                unmet_demand_kwh=led.unmet_demand_kwh,
                flex_kwh=led.flex_kwh,
                p2p_price_mean=(led.p2p_value / led.p2p_kwh
                                if led.p2p_kwh > 0 else None),
            )
            breakdown = compute_reward(outcome, ctx, kpis, self._weights)
            rewards[agent.agent_id] = breakdown.total
            self._reward_log.append((t, agent.agent_id, breakdown))

        self._step_index += 1
        self._done = self._step_index >= cfg.max_steps
        if not self._done:
            self._draw_forecasts()

        observations = {aid: self.build_observation(aid) for aid in self.agent_ids}
        info = {"kpis": kpis, "ledger": ledger}
        return observations, rewards, self._done, info

    # ------------------------------------------------------------------
    # observations

    def _price_norm(self, price: float) -> float:
        return (price - self._episode.price_floor) / self._episode.price_band

    def build_observation(self, agent_id: str) -> np.ndarray:
        """Assemble the 42-entry vector for one agent.

        The KPI block is identical across agents at a given step (shared
        stigmergic signal); the agent block only ever reads this agent's own
        state.
        """
        if not self._started:
            raise RuntimeError("reset() must be called before build_observation()")
        cfg = self._episode
        rt = self._agents[agent_id]
        led = self._last_ledger
        kpis = self._last_kpis
        C = cfg.grid_capacity_kw
        qmax = cfg.max_order_kwh
        horizon = cfg.max_steps

        upcoming = min(self._step_index, horizon - 1)
        executed = led.step if led is not None else upcoming
        fit_up, util_up = self._tariff.feed_in[upcoming], self._tariff.utility[upcoming]
        fit_ex, util_ex = self._tariff.feed_in[executed], self._tariff.utility[executed]

        mid_fallback = 0.5 * (fit_ex + util_ex)
        price_eff = (self._last_defined_price
                     if self._last_defined_price is not None else mid_fallback)
        mean_local = (self._last_mean_local
                      if self._last_mean_local is not None else mid_fallback)

        if led is not None:
            clearing_volume = led.clearing_volume
            dso_buy = led.dso_buy_volume_kwh
            dso_sell = led.dso_sell_volume_kwh
            p2p = led.p2p_volume_kwh
            balance = led.grid_balance_kwh
        else:
            clearing_volume = dso_buy = dso_sell = p2p = 0.0
            balance = 0.0
        dso_total = dso_buy + dso_sell
        denom = p2p + dso_total
        dso_ratio = dso_total / denom if denom > 0 else 0.0

        clip = _clip
        band = cfg.price_band

        market_block = [
            self._step_index / horizon,
            (self._step_index % 24) / 24.0,
            self._price_norm(price_eff),
            clearing_volume / C,
            clip(balance / C, -1.0, 1.0),
            dso_buy / C,
            dso_sell / C,
            dso_total / C,
            p2p / C,
            dso_ratio,
            clip((dso_buy - dso_sell) / C, -1.0, 1.0),
            self._price_norm(fit_up),
            self._price_norm(util_up),
            self._price_norm(mean_local),
            clip(self._last_spread / band, -1.0, 1.0),
            clip((util_ex - mean_local) / band, -1.0, 1.0),
        ]

        agent = rt.config
        gen_f = rt.pending_gen.forecast_kw if rt.pending_gen is not None else 0.0
        dem_f = rt.pending_dem.forecast_kw if rt.pending_dem is not None else 0.0
        remaining_dem = sum(agent.demand_profile[h]
                            for h in range(upcoming, min(24, horizon)))
        remaining_gen = sum(agent.generation_profile[h]
                            for h in range(upcoming, min(24, horizon)))
        steps_done = self._step_index
        mean_profit = (rt.cum_profit / steps_done) if steps_done > 0 else 0.0
        cum_scale = qmax * horizon
        battery = rt.battery

        agent_block = [
            clip(gen_f / qmax, 0.0, 1.0),
            clip(dem_f / qmax, 0.0, 1.0),
            rt.cum_demand_satisfied / cum_scale,
            rt.cum_demand_deferred / cum_scale,
            remaining_dem / cum_scale,
            rt.cum_supply_satisfied / cum_scale,
            rt.cum_supply_deferred / cum_scale,
            remaining_gen / cum_scale,
            clip(mean_profit / (cfg.price_ceiling * qmax), -1.0, 1.0),
            rt.reputation.score,
            battery.energy_kwh / qmax,
            battery.soc,
            battery.max_charge_kwh / qmax,
            battery.max_discharge_kwh / qmax,
            battery.cumulative_charge_kwh / cum_scale,
            battery.cumulative_discharge_kwh / cum_scale,
        ]

        kpi_block = [
            kpis.social_welfare / (C * cfg.price_ceiling),
            kpis.liquidity / C,
            clip(kpis.bid_ask_spread / band, -1.0, 1.0),
            clip(kpis.price_volatility / band, 0.0, 1.0),
            kpis.imbalance,
            kpis.congestion,
            kpis.coordination_score,
            kpis.coordination_convergence,
            kpis.self_consumption,
            kpis.flexibility_utilization,
        ]

        obs = np.array(market_block + agent_block + kpi_block, dtype=np.float64)
        assert obs.shape == (OBS_SIZE,)
        return obs
