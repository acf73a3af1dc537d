"""System-level KPI suite.

These are the stigmergic signals: computed once per step from the market
and grid outcome, broadcast into every agent's observation and reused by
the cooperative reward. All functions are pure; the windowed ones take the
history explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Optional, Sequence

from .market import Trade

DEFAULT_WINDOW = 6


@dataclass(frozen=True)
class KpiRecord:
    social_welfare: float
    liquidity: float
    bid_ask_spread: float
    price_volatility: float
    imbalance: float
    congestion: float
    grid_balance: float
    self_consumption: float
    flexibility_utilization: float
    coordination_score: float
    coordination_convergence: float
    p2p_trade_ratio: float
    grid_balance_index: float

    FRACTION_FIELDS = ("imbalance", "congestion", "self_consumption",
                       "flexibility_utilization", "coordination_score",
                       "p2p_trade_ratio", "grid_balance_index",
                       "coordination_convergence")

    def __post_init__(self) -> None:
        for name in self.FRACTION_FIELDS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.coordination_score != 1.0 - self.imbalance:
            raise ValueError("coordination_score must equal 1 - imbalance exactly")

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_row(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


def social_welfare(trades: Iterable[Trade]) -> float:
    """Total transacted value, sum of price * quantity over both layers."""
    return sum(t.price * t.quantity for t in trades)


def liquidity(trades: Iterable[Trade]) -> float:
    """Total traded volume in kWh."""
    return sum(t.quantity for t in trades)


def bid_ask_spread(bid_prices: Sequence[float],
                   ask_prices: Sequence[float]) -> tuple[float, bool]:
    """Mean ask price minus mean bid price.

    Returns (spread, defined); an empty side makes the spread undefined and
    reported as 0.0 with defined=False.
    """
    if not bid_prices or not ask_prices:
        return 0.0, False
    return (sum(ask_prices) / len(ask_prices)
            - sum(bid_prices) / len(bid_prices)), True


def _population_std(values: Sequence[float]) -> float:
    n = len(values)
    if n < 2:
        return 0.0
    mean = sum(values) / n
    return math.sqrt(sum((v - mean) ** 2 for v in values) / n)


def price_volatility(price_history: Sequence[Optional[float]],
                     window: int = DEFAULT_WINDOW) -> float:
    """Population std of the last `window` defined clearing prices."""
    if window < 1:
        raise ValueError("window must be >= 1")
    defined = [p for p in price_history if p is not None]
    return _population_std(defined[-window:])


def imbalance(total_buy_kwh: float, total_sell_kwh: float,
              grid_capacity: float) -> float:
    """|buy-side - sell-side| volume, normalized by grid capacity, in [0, 1]."""
    if grid_capacity <= 0:
        raise ValueError("grid_capacity must be > 0")
    return min(1.0, abs(total_buy_kwh - total_sell_kwh) / grid_capacity)


def self_consumption(q_p2p: float, q_dso: float) -> float:
    """Share of transacted energy settled peer-to-peer; 0 when nothing traded."""
    if q_p2p < 0 or q_dso < 0:
        raise ValueError("volumes must be >= 0")
    total = q_p2p + q_dso
    return q_p2p / total if total > 0 else 0.0


def flexibility_utilization(q_p2p: float, q_available: float) -> float:
    """Share of offered flexibility actually used in P2P trades, in [0, 1]."""
    if q_p2p < 0 or q_available < 0:
        raise ValueError("volumes must be >= 0")
    if q_available == 0:
        return 0.0
    return min(1.0, q_p2p / q_available)


def coordination_score(imbalance_value: float) -> float:
    """Complement of the normalized supply-demand imbalance."""
    if not 0.0 <= imbalance_value <= 1.0:
        raise ValueError("imbalance must be in [0, 1]")
    return 1.0 - imbalance_value


def coordination_convergence(volume_history: Sequence[float],
                             window: int = DEFAULT_WINDOW) -> float:
    """Stability of recent clearing volumes, mapped into (0, 1].

    1 / (1 + population std) so a flat recent window scores exactly 1.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    return 1.0 / (1.0 + _population_std(list(volume_history)[-window:]))


def grid_balance_index(grid_balance_kwh: float, losses_kwh: float,
                       dso_volume_kwh: float, grid_capacity: float) -> float:
    """Physical-stability index penalizing imbalance, losses and DSO reliance."""
    if grid_capacity <= 0:
        raise ValueError("grid_capacity must be > 0")
    stress = (abs(grid_balance_kwh) + losses_kwh + dso_volume_kwh) / grid_capacity
    return 1.0 - min(1.0, stress)


def agent_responsiveness(kpi_series: Sequence[float],
                         action_series: Sequence[float]) -> float:
    """Pearson correlation between a system signal and an action series.

    Returns 0.0 when either series is constant; raises on length mismatch.
    """
    if len(kpi_series) != len(action_series):
        raise ValueError("series must have equal length")
    n = len(kpi_series)
    if n < 2:
        raise ValueError("series must have length >= 2")
    mx = sum(kpi_series) / n
    my = sum(action_series) / n
    sxx = sum((x - mx) ** 2 for x in kpi_series)
    syy = sum((y - my) ** 2 for y in action_series)
    if sxx == 0.0 or syy == 0.0:
        return 0.0
    sxy = sum((x - mx) * (y - my) for x, y in zip(kpi_series, action_series))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
