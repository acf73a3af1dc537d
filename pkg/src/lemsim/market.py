"""Double-auction P2P clearing, DSO fallback settlement, reputation tracking.

Clearing is a pure function of (orders, rng state, reputations). The book
walk itself lives in `lemsim._kernels` (compiled when available); this
module owns order priority, the self-trade rule, residual bookkeeping and
the DSO layer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ._kernels import match_orders

BUY = "buy"
SELL = "sell"

P2P = "P2P"
DSO_BUY = "DSO_buy"
DSO_SELL = "DSO_sell"

DSO_ID = "DSO"


@dataclass(frozen=True)
class Order:
    agent_id: str
    side: str
    price: float
    quantity: float
    step: int
    arrival_rank: Optional[int] = None

    def __post_init__(self) -> None:
        if self.side not in (BUY, SELL):
            raise ValueError(f"side must be '{BUY}' or '{SELL}', got {self.side!r}")
        if self.quantity <= 0:
            raise ValueError("order quantity must be > 0")
        if self.price < 0:
            raise ValueError("order price must be >= 0")


@dataclass(frozen=True)
class Trade:
    buyer_id: str
    seller_id: str
    price: float
    quantity: float
    layer: str
    step: int

    def __post_init__(self) -> None:
        if self.quantity <= 0:
            raise ValueError("trade quantity must be > 0")
        if self.layer not in (P2P, DSO_BUY, DSO_SELL):
            raise ValueError(f"unknown trade layer {self.layer!r}")


@dataclass(frozen=True)
class DsoTariff:
    """Hourly feed-in (DSO buys) and utility (DSO sells) price profiles."""

    feed_in: tuple[float, ...]
    utility: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.feed_in) != len(self.utility):
            raise ValueError("feed_in and utility must have equal length")
        for t, (fit, util) in enumerate(zip(self.feed_in, self.utility)):
            if fit >= util:
                raise ValueError(
                    f"hour {t}: feed_in {fit} must stay below utility {util}")

    @classmethod
    def from_csv(cls, path: str | Path) -> "DsoTariff":
        path = Path(path)
        rows: dict[int, tuple[float, float]] = {}
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"hour", "feed_in", "utility"}
            if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
                raise ValueError(f"{path}: expected header hour,feed_in,utility")
            for row in reader:
                rows[int(row["hour"])] = (float(row["feed_in"]), float(row["utility"]))
        hours = sorted(rows)
        if hours != list(range(len(hours))):
            raise ValueError(f"{path}: hours must be contiguous from 0")
        return cls(feed_in=tuple(rows[h][0] for h in hours),
                   utility=tuple(rows[h][1] for h in hours))


@dataclass(frozen=True)
class Reputation:
    """Moving average of per-step delivery ratios over a fixed window."""

    agent_id: str
    score: float = 1.0
    window: int = 6
    ratios: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ValueError("reputation window must be >= 1")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("reputation score must be in [0, 1]")


@dataclass(frozen=True)
class ClearingResult:
    trades: tuple[Trade, ...]
    clearing_price: Optional[float]
    clearing_volume: float
    residual_buys: tuple[Order, ...]
    residual_sells: tuple[Order, ...]


def arrival_shuffle(orders: Sequence[Order], rng: np.random.Generator) -> list[Order]:
    """Assign arrival ranks from one seeded permutation.

    Ranks break priority ties between equal-price (and equal-reputation)
    orders, emulating asynchronous arrival. Input order of the returned list
    is preserved; only arrival_rank is (re)written.
    """
    if not orders:
        return []
    perm = rng.permutation(len(orders))
    ranks = np.empty(len(orders), dtype=np.int64)
    ranks[perm] = np.arange(len(orders))
    return [replace(o, arrival_rank=int(r)) for o, r in zip(orders, ranks)]


def _priority_sorted(orders: list[Order],
                     reputations: Mapping[str, float],
                     descending_price: bool) -> list[Order]:
    # price first, then higher reputation, then earlier arrival
    def key(o: Order):
        price = -o.price if descending_price else o.price
        rank = o.arrival_rank if o.arrival_rank is not None else 0
        return (price, -reputations.get(o.agent_id, 1.0), rank)

    return sorted(orders, key=key)


def clear_market(orders: Sequence[Order],
                 rng: Optional[np.random.Generator] = None,
                 reputations: Optional[Mapping[str, float]] = None,
                 ) -> ClearingResult:
    """Clear one step's book with average pricing.

    Buys are served best-price-first against ascending asks while bids cross;
    each match trades min residual quantity at the bid/ask midpoint. The
    reported clearing price is the volume-weighted mean over matches (None
    when nothing matched). Orders missing an arrival_rank get one from `rng`
    when provided, else from submission order. An agent never trades with
    itself; such asks are skipped and stay available to other bidders.
    """
    orders = list(orders)
    if not orders:
        return ClearingResult((), None, 0.0, (), ())
    steps = {o.step for o in orders}
    if len(steps) > 1:
        raise ValueError(f"orders span multiple steps: {sorted(steps)}")
    step = orders[0].step
    reputations = reputations or {}

    if any(o.arrival_rank is None for o in orders):
        if rng is not None:
            orders = arrival_shuffle(orders, rng)
        else:
            orders = [replace(o, arrival_rank=i) for i, o in enumerate(orders)]

    buys = _priority_sorted([o for o in orders if o.side == BUY], reputations, True)
    sells = _priority_sorted([o for o in orders if o.side == SELL], reputations, False)

    agent_code: dict[str, int] = {}
    for o in buys + sells:
        agent_code.setdefault(o.agent_id, len(agent_code))

    bi, si, prices, qtys, resid_b, resid_s = match_orders(
        np.array([o.price for o in buys], dtype=np.float64),
        np.array([o.quantity for o in buys], dtype=np.float64),
        np.array([agent_code[o.agent_id] for o in buys], dtype=np.int64),
        np.array([o.price for o in sells], dtype=np.float64),
        np.array([o.quantity for o in sells], dtype=np.float64),
        np.array([agent_code[o.agent_id] for o in sells], dtype=np.int64),
    )

    trades = tuple(
        Trade(buyer_id=buys[b].agent_id, seller_id=sells[s].agent_id,
              price=float(p), quantity=float(q), layer=P2P, step=step)
        for b, s, p, q in zip(bi, si, prices, qtys)
    )
    # sequential Python sums keep the reported volume and volume-weighted
    # price bit-reproducible against a plain reference walk
    volume = sum(t.quantity for t in trades)
    price = (sum(t.price * t.quantity for t in trades) / volume
             if volume > 0 else None)

    residual_buys = tuple(
        replace(o, quantity=float(r)) for o, r in zip(buys, resid_b) if r > 0.0)
    residual_sells = tuple(
        replace(o, quantity=float(r)) for o, r in zip(sells, resid_s) if r > 0.0)
    return ClearingResult(trades, price, volume, residual_buys, residual_sells)


def settle_dso(residual_buys: Iterable[Order],
               residual_sells: Iterable[Order],
               tariff: DsoTariff,
               step: int) -> list[Trade]:
    """Settle unmatched remainders against the DSO at posted tariffs.

    Residual buys import at the utility price, residual sells export at the
    feed-in tariff; the DSO has unbounded capacity at both.
    """
    trades: list[Trade] = []
    for o in residual_buys:
        trades.append(Trade(buyer_id=o.agent_id, seller_id=DSO_ID,
                            price=tariff.utility[step], quantity=o.quantity,
                            layer=DSO_BUY, step=step))
    for o in residual_sells:
        trades.append(Trade(buyer_id=DSO_ID, seller_id=o.agent_id,
                            price=tariff.feed_in[step], quantity=o.quantity,
                            layer=DSO_SELL, step=step))
    return trades


def update_reputation(rep: Reputation,
                      cleared_kwh: float,
                      delivered_kwh: float) -> Reputation:
    """Fold one step's delivery ratio into the moving average.

    A step with nothing cleared counts as full compliance (ratio 1).
    """
    if cleared_kwh < 0 or delivered_kwh < 0:
        raise ValueError("cleared and delivered must be >= 0")
    if delivered_kwh > cleared_kwh + 1e-12:
        raise ValueError("delivered cannot exceed cleared")
    ratio = delivered_kwh / cleared_kwh if cleared_kwh > 0 else 1.0
    ratios = (rep.ratios + (ratio,))[-rep.window:]
    score = sum(ratios) / len(ratios)
    score = min(1.0, max(0.0, score))
    return replace(rep, score=score, ratios=ratios)
