import pytest

from lemsim.kpi import (KpiRecord, agent_responsiveness, bid_ask_spread,
                        coordination_convergence, coordination_score,
                        flexibility_utilization, grid_balance_index, imbalance,
                        liquidity, price_volatility, self_consumption,
                        social_welfare)
from lemsim.market import P2P, Trade


def trade(price, qty, step=0):
    return Trade(buyer_id="b", seller_id="s", price=price, quantity=qty,
                 layer=P2P, step=step)


class TestWelfareAndLiquidity:
    def test_empty(self):
        assert social_welfare([]) == 0.0
        assert liquidity([]) == 0.0

    def test_values(self):
        trades = [trade(90.0, 10.0), trade(80.0, 3.0)]
        assert social_welfare(trades) == pytest.approx(1140.0)
        assert liquidity(trades) == pytest.approx(13.0)

    def test_additivity(self, rng):
        a = [trade(float(rng.uniform(20, 600)), float(rng.uniform(0.1, 180)))
             for _ in range(10)]
        b = [trade(float(rng.uniform(20, 600)), float(rng.uniform(0.1, 180)))
             for _ in range(7)]
        assert social_welfare(a + b) == pytest.approx(
            social_welfare(a) + social_welfare(b))
        assert liquidity(a + b) == pytest.approx(liquidity(a) + liquidity(b))

    def test_quantity_scaling(self):
        trades = [trade(90.0, 10.0), trade(80.0, 3.0)]
        scaled = [trade(t.price, 2.0 * t.quantity) for t in trades]
        assert social_welfare(scaled) == pytest.approx(2.0 * social_welfare(trades))


class TestSpread:
    def test_simple(self):
        value, defined = bid_ask_spread([90.0], [100.0])
        assert defined and value == pytest.approx(10.0)

    def test_two_each(self):
        value, _ = bid_ask_spread([80.0, 90.0], [100.0, 120.0])
        assert value == pytest.approx(25.0)

    def test_identical_books(self):
        value, _ = bid_ask_spread([100.0, 50.0], [100.0, 50.0])
        assert value == pytest.approx(0.0)

    def test_one_side_empty(self):
        value, defined = bid_ask_spread([], [100.0])
        assert not defined and value == 0.0


class TestVolatility:
    def test_constant(self):
        assert price_volatility([100.0] * 6) == 0.0

    def test_two_prices(self):
        assert price_volatility([100.0, 110.0]) == pytest.approx(5.0)

    def test_single_sample(self):
        assert price_volatility([100.0]) == 0.0

    def test_none_entries_skipped(self):
        assert price_volatility([None, 100.0, None, 110.0]) == pytest.approx(5.0)

    def test_window_limits(self):
        history = [0.0, 0.0, 100.0, 110.0]
        assert price_volatility(history, window=2) == pytest.approx(5.0)


class TestFractions:
    def test_imbalance(self):
        assert imbalance(280.0, 100.0, 1800.0) == pytest.approx(0.1)
        assert imbalance(5.0, 5.0, 1800.0) == 0.0
        assert imbalance(5000.0, 0.0, 1800.0) == 1.0

    def test_self_consumption(self):
        assert self_consumption(60.0, 40.0) == pytest.approx(0.6)
        assert self_consumption(0.0, 0.0) == 0.0
        assert self_consumption(5.0, 0.0) == 1.0

    def test_flexibility(self):
        assert flexibility_utilization(0.0, 123.0) == 0.0
        assert flexibility_utilization(50.0, 200.0) == pytest.approx(0.25)
        assert flexibility_utilization(7.0, 7.0) == 1.0
        assert flexibility_utilization(1.0, 0.0) == 0.0

    def test_coordination_score(self):
        assert coordination_score(0.0) == 1.0
        assert coordination_score(0.1) == pytest.approx(0.9)
        assert coordination_score(1.0) == 0.0

    def test_convergence(self):
        assert coordination_convergence([50.0, 50.0, 50.0]) == 1.0
        assert coordination_convergence([0.0, 20.0]) == pytest.approx(1.0 / 11.0)
        assert coordination_convergence([42.0]) == 1.0

    def test_grid_balance_index(self):
        assert grid_balance_index(0.0, 0.0, 0.0, 1800.0) == 1.0
        assert grid_balance_index(90.0, 0.0, 90.0, 1800.0) == pytest.approx(0.9)
        assert grid_balance_index(1800.0, 100.0, 100.0, 1800.0) == 0.0

    def test_bounds_under_fuzz(self, rng):
        # 10^4 random inputs never leave [0, 1]
        for _ in range(10_000):
            buy, sell = rng.uniform(0, 5000, size=2)
            cap = rng.uniform(1.0, 5000.0)
            p2p, dso = rng.uniform(0, 3000, size=2)
            avail = rng.uniform(0, 3000)
            b, losses = rng.uniform(-3000, 3000), rng.uniform(0, 100)
            imb = imbalance(buy, sell, cap)
            values = [
                imb,
                coordination_score(imb),
                self_consumption(p2p, dso),
                flexibility_utilization(p2p, avail),
                coordination_convergence([float(v) for v in
                                          rng.uniform(0, 2000, size=4)]),
                grid_balance_index(b, losses, dso, cap),
            ]
            for v in values:
                assert 0.0 <= v <= 1.0


class TestResponsiveness:
    def test_identical(self):
        assert agent_responsiveness([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_negated(self):
        assert agent_responsiveness([1.0, 2.0, 3.0], [-1.0, -2.0, -3.0]) == pytest.approx(-1.0)

    def test_orthogonal(self):
        assert agent_responsiveness([1.0, -1.0, 1.0, -1.0],
                                    [1.0, 1.0, -1.0, -1.0]) == pytest.approx(0.0)

    def test_constant_series(self):
        assert agent_responsiveness([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            agent_responsiveness([1.0, 2.0], [1.0])


class TestKpiRecord:
    def test_complement_enforced(self):
        with pytest.raises(ValueError):
            KpiRecord(social_welfare=0.0, liquidity=0.0, bid_ask_spread=0.0,
                      price_volatility=0.0, imbalance=0.2, congestion=0.0,
                      grid_balance=0.0, self_consumption=0.0,
                      flexibility_utilization=0.0, coordination_score=0.9,
                      coordination_convergence=1.0, p2p_trade_ratio=0.0,
                      grid_balance_index=1.0)

    def test_field_order_for_export(self):
        assert KpiRecord.field_names() == (
            "social_welfare", "liquidity", "bid_ask_spread", "price_volatility",
            "imbalance", "congestion", "grid_balance", "self_consumption",
            "flexibility_utilization", "coordination_score",
            "coordination_convergence", "p2p_trade_ratio", "grid_balance_index")
