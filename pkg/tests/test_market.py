import math

import numpy as np
import pytest

from lemsim.market import (BUY, DSO_BUY, DSO_SELL, DSO_ID, SELL, DsoTariff,
                           Order, Reputation, arrival_shuffle, clear_market,
                           settle_dso, update_reputation)


def order(agent, side, price, qty, step=0, rank=None):
    return Order(agent_id=agent, side=side, price=price, quantity=qty,
                 step=step, arrival_rank=rank)


# ---------------------------------------------------------------------------
# independent reference: plain object walk, no shared code with the kernel

def oracle_clear(orders, reputations=None):
    reputations = reputations or {}

    def buy_key(o):
        return (-o.price, -reputations.get(o.agent_id, 1.0), o.arrival_rank)

    def sell_key(o):
        return (o.price, -reputations.get(o.agent_id, 1.0), o.arrival_rank)

    buys = sorted((o for o in orders if o.side == BUY), key=buy_key)
    sells = sorted((o for o in orders if o.side == SELL), key=sell_key)
    residual = {id(o): o.quantity for o in orders}
    trades = []
    for b in buys:
        for s in sells:
            if residual[id(s)] <= 0.0:
                continue
            if s.price > b.price:
                break
            if s.agent_id == b.agent_id:
                continue
            q = residual[id(b)] if residual[id(b)] < residual[id(s)] else residual[id(s)]
            trades.append((b.agent_id, s.agent_id, (b.price + s.price) / 2.0, q))
            residual[id(b)] -= q
            residual[id(s)] = residual[id(s)] - q
            if residual[id(b)] <= 0.0:
                break
    volume = sum(t[3] for t in trades)
    price = sum(t[2] * t[3] for t in trades) / volume if volume > 0 else None
    return trades, price, volume


def random_book(rng, max_orders=16, n_agents=6, step=0):
    n = int(rng.integers(0, max_orders + 1))
    orders = []
    for _ in range(n):
        orders.append(order(
            agent=f"a{int(rng.integers(0, n_agents))}",
            side=BUY if rng.uniform() < 0.5 else SELL,
            price=float(rng.uniform(20.0, 600.0)),
            qty=float(rng.uniform(0.5, 180.0)),
            step=step))
    ranks = rng.permutation(len(orders))
    orders = [
        Order(o.agent_id, o.side, o.price, o.quantity, o.step, int(r))
        for o, r in zip(orders, ranks)
    ]
    reputations = {f"a{i}": float(rng.uniform(0.0, 1.0)) for i in range(n_agents)}
    return orders, reputations


class TestClearing:
    def test_single_cross_midpoint(self):
        result = clear_market([order("b", BUY, 100.0, 10.0, rank=0),
                               order("s", SELL, 80.0, 10.0, rank=1)])
        assert len(result.trades) == 1
        t = result.trades[0]
        assert (t.price, t.quantity) == (90.0, 10.0)
        assert result.clearing_price == 90.0
        assert result.clearing_volume == 10.0
        assert not result.residual_buys and not result.residual_sells

    def test_no_cross(self):
        result = clear_market([order("b", BUY, 50.0, 10.0, rank=0),
                               order("s", SELL, 80.0, 10.0, rank=1)])
        assert result.trades == ()
        assert result.clearing_price is None
        assert result.clearing_volume == 0.0
        assert len(result.residual_buys) == 1
        assert len(result.residual_sells) == 1

    def test_two_level_book(self):
        # buys (120,5),(90,10) vs sells (70,8),(100,10):
        # (120,5) x (70,8) -> 5 @ 95; (90,10) x (70,3) -> 3 @ 80; 100 > 90 stops
        result = clear_market([
            order("b1", BUY, 120.0, 5.0, rank=0),
            order("b2", BUY, 90.0, 10.0, rank=1),
            order("s1", SELL, 70.0, 8.0, rank=2),
            order("s2", SELL, 100.0, 10.0, rank=3),
        ])
        assert [(t.price, t.quantity) for t in result.trades] == [(95.0, 5.0),
                                                                  (80.0, 3.0)]
        assert result.clearing_volume == 8.0

    def test_mixed_steps_rejected(self):
        with pytest.raises(ValueError):
            clear_market([order("a", BUY, 100.0, 1.0, step=0, rank=0),
                          order("b", SELL, 50.0, 1.0, step=1, rank=1)])

    def test_no_self_trade(self):
        # the agent's own ask is skipped; the other ask matches instead
        result = clear_market([
            order("a", BUY, 100.0, 10.0, rank=0),
            order("a", SELL, 50.0, 10.0, rank=1),
            order("b", SELL, 60.0, 10.0, rank=2),
        ])
        assert all(t.buyer_id != t.seller_id for t in result.trades)
        assert len(result.trades) == 1
        assert result.trades[0].seller_id == "b"

    def test_conservation_and_price_bounds(self, rng):
        for _ in range(200):
            orders, reputations = random_book(rng)
            result = clear_market(orders, reputations=reputations)
            by_buyer = sum(t.quantity for t in result.trades)
            by_seller = sum(t.quantity for t in result.trades)
            assert by_buyer == by_seller
            book = {}
            for o in orders:
                book.setdefault(o.agent_id, {BUY: [], SELL: []})[o.side].append(o)
            for t in result.trades:
                assert 20.0 <= t.price <= 600.0
                assert 0.0 < t.quantity <= 180.0

    def test_trade_price_is_pair_midpoint(self, rng):
        # every trade price lies inside [ask, bid] of a matched crossing pair
        for _ in range(200):
            orders, reputations = random_book(rng)
            result = clear_market(orders, reputations=reputations)
            buys = {o.agent_id: [] for o in orders}
            asks = {o.agent_id: [] for o in orders}
            for o in orders:
                (buys if o.side == BUY else asks)[o.agent_id].append(o.price)
            for t in result.trades:
                found = any(
                    math.isclose(t.price, (pb + ps) / 2.0, rel_tol=0, abs_tol=1e-9)
                    and ps <= t.price <= pb
                    for pb in buys[t.buyer_id] for ps in asks[t.seller_id])
                assert found

    def test_oracle_equivalence_1000_books(self, rng):
        for _ in range(1000):
            orders, reputations = random_book(rng)
            result = clear_market(orders, reputations=reputations)
            expected, price, volume = oracle_clear(orders, reputations)
            got = [(t.buyer_id, t.seller_id, t.price, t.quantity)
                   for t in result.trades]
            assert got == expected
            assert result.clearing_volume == volume
            if volume > 0:
                assert result.clearing_price == price
            else:
                assert result.clearing_price is None


class TestArrivalShuffle:
    def test_determinism(self):
        orders = [order("a", BUY, 100.0, 1.0), order("b", BUY, 90.0, 1.0),
                  order("c", SELL, 50.0, 1.0)]
        r1 = arrival_shuffle(orders, np.random.Generator(np.random.PCG64(3)))
        r2 = arrival_shuffle(orders, np.random.Generator(np.random.PCG64(3)))
        assert [o.arrival_rank for o in r1] == [o.arrival_rank for o in r2]

    def test_single_order(self):
        out = arrival_shuffle([order("a", BUY, 100.0, 1.0)],
                              np.random.Generator(np.random.PCG64(0)))
        assert out[0].arrival_rank == 0

    def test_equal_price_tie_swaps_counterparty(self):
        # two identical asks: whichever drew the earlier rank trades; totals
        # are permutation-invariant
        base = [order("b", BUY, 100.0, 5.0),
                order("s1", SELL, 80.0, 10.0),
                order("s2", SELL, 80.0, 10.0)]
        sellers, volumes = set(), set()
        for seed in range(20):
            rng = np.random.Generator(np.random.PCG64(seed))
            result = clear_market(arrival_shuffle(base, rng))
            assert result.clearing_volume == 5.0
            assert result.clearing_price == 90.0
            sellers.add(result.trades[0].seller_id)
            volumes.add(result.clearing_volume)
        assert sellers == {"s1", "s2"}
        assert volumes == {5.0}

    def test_reputation_breaks_price_ties_before_rank(self):
        orders = [order("b", BUY, 100.0, 5.0, rank=0),
                  order("low", SELL, 80.0, 10.0, rank=1),
                  order("high", SELL, 80.0, 10.0, rank=2)]
        result = clear_market(orders, reputations={"low": 0.2, "high": 0.9})
        assert result.trades[0].seller_id == "high"


class TestDsoSettlement:
    def test_residual_buy_at_utility(self, scenario):
        tariff = scenario.tariff
        step = 17
        assert tariff.utility[step] == 600.0
        trades = settle_dso([order("a", BUY, 500.0, 10.0, step=step, rank=0)],
                            [], tariff, step)
        assert len(trades) == 1
        t = trades[0]
        assert (t.price, t.quantity, t.layer, t.seller_id) == (
            600.0, 10.0, DSO_BUY, DSO_ID)

    def test_no_residuals(self, scenario):
        assert settle_dso([], [], scenario.tariff, 0) == []

    def test_residual_sell_at_feed_in_peak(self, scenario):
        tariff = scenario.tariff
        step = 13
        assert tariff.feed_in[step] == 300.0
        trades = settle_dso([], [order("a", SELL, 310.0, 5.0, step=step, rank=0)],
                            tariff, step)
        t = trades[0]
        assert (t.price, t.quantity, t.layer, t.buyer_id) == (
            300.0, 5.0, DSO_SELL, DSO_ID)

    def test_tariff_margin_invariant(self, scenario):
        fit, util = scenario.tariff.feed_in, scenario.tariff.utility
        assert all(f < u for f, u in zip(fit, util))
        with pytest.raises(ValueError):
            DsoTariff(feed_in=(100.0,), utility=(90.0,))


class TestReputation:
    def test_vacuous_compliance(self):
        rep = update_reputation(Reputation("a"), 0.0, 0.0)
        assert rep.score == 1.0

    def test_single_sample(self):
        rep = update_reputation(Reputation("a", window=1), 10.0, 5.0)
        assert rep.score == 0.5

    def test_moving_average(self):
        rep = Reputation("a", window=4)
        for cleared, delivered in [(10, 10), (10, 10), (10, 5), (10, 5)]:
            rep = update_reputation(rep, cleared, delivered)
        assert rep.score == pytest.approx(0.75)

    def test_scale_invariance(self, rng):
        for _ in range(100):
            cleared = float(rng.uniform(1.0, 100.0))
            delivered = float(rng.uniform(0.0, cleared))
            k = float(rng.uniform(0.1, 50.0))
            a = update_reputation(Reputation("a", window=1), cleared, delivered)
            b = update_reputation(Reputation("a", window=1),
                                  k * cleared, k * delivered)
            assert a.score == pytest.approx(b.score, abs=1e-12)

    def test_negative_inputs(self):
        with pytest.raises(ValueError):
            update_reputation(Reputation("a"), -1.0, 0.0)
        with pytest.raises(ValueError):
            update_reputation(Reputation("a"), 1.0, 2.0)
