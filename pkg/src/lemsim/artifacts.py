"""Episode artifact serialization.

Formats are part of the external contract: trades.jsonl (one object per
trade: step, buyer, seller, price, quantity, layer), kpis.csv (one row per
step in KpiRecord field order), rewards.jsonl (one object per step and
agent with the full breakdown), network.dot/json (directed seller->buyer
graph, weight = total kWh). Floats serialize via repr so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

from .kpi import KpiRecord
from .market import DSO_ID, P2P, Trade
from .reward import RewardBreakdown


def trade_to_dict(trade: Trade) -> dict:
    return {
        "step": trade.step,
        "buyer": trade.buyer_id,
        "seller": trade.seller_id,
        "price": trade.price,
        "quantity": trade.quantity,
        "layer": trade.layer,
    }


def trades_to_jsonl(trades: Iterable[Trade]) -> str:
    return "".join(json.dumps(trade_to_dict(t), sort_keys=True) + "\n"
                   for t in trades)


def write_trades(path: Path, trades: Iterable[Trade]) -> None:
    path.write_text(trades_to_jsonl(trades))


def parse_trade_line(line: str) -> Trade:
    obj = json.loads(line)
    return Trade(buyer_id=obj["buyer"], seller_id=obj["seller"],
                 price=float(obj["price"]), quantity=float(obj["quantity"]),
                 layer=obj["layer"], step=int(obj["step"]))


def read_trades(path: Path) -> list[Trade]:
    """Parse a trade log; raises ValueError naming the offending line."""
    trades: list[Trade] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                trades.append(parse_trade_line(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed trade line: {exc}") from exc
    return trades


def kpis_to_csv(records: Sequence[KpiRecord]) -> str:
    header = "step," + ",".join(KpiRecord.field_names())
    lines = [header]
    for step, record in enumerate(records):
        lines.append(f"{step}," + ",".join(repr(v) for v in record.as_row()))
    return "\n".join(lines) + "\n"


def write_kpis(path: Path, records: Sequence[KpiRecord]) -> None:
    path.write_text(kpis_to_csv(records))


def rewards_to_jsonl(log: Sequence[tuple[int, str, RewardBreakdown]]) -> str:
    lines = []
    for step, agent_id, breakdown in log:
        obj = {"step": step, "agent": agent_id}
        obj.update(breakdown.as_dict())
        lines.append(json.dumps(obj, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def write_rewards(path: Path, log: Sequence[tuple[int, str, RewardBreakdown]]) -> None:
    path.write_text(rewards_to_jsonl(log))


def aggregate_network(trades: Iterable[Trade],
                      p2p_only: bool = False) -> dict[tuple[str, str], float]:
    """Seller -> buyer edge weights (total kWh), optionally dropping the DSO."""
    edges: dict[tuple[str, str], float] = {}
    for t in trades:
        if p2p_only and t.layer != P2P:
            continue
        key = (t.seller_id, t.buyer_id)
        edges[key] = edges.get(key, 0.0) + t.quantity
    return edges


def network_to_dot(edges: dict[tuple[str, str], float]) -> str:
    lines = ["digraph trading {"]
    nodes = sorted({n for e in edges for n in e})
    for n in nodes:
        shape = "box" if n == DSO_ID else "ellipse"
        lines.append(f'  "{n}" [shape={shape}];')
    for (seller, buyer) in sorted(edges):
        w = edges[(seller, buyer)]
        lines.append(f'  "{seller}" -> "{buyer}" [weight={w!r}, label="{w:.1f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def network_to_json(edges: dict[tuple[str, str], float]) -> str:
    payload = {
        "nodes": sorted({n for e in edges for n in e}),
        "edges": [
            {"seller": s, "buyer": b, "kwh": edges[(s, b)]}
            for (s, b) in sorted(edges)
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def summary_stats(records: Sequence[KpiRecord]) -> dict[str, dict[str, float]]:
    """Per-KPI descriptive statistics (min/mean/std/max) over steps."""
    import math

    out: dict[str, dict[str, float]] = {}
    names = KpiRecord.field_names()
    for i, name in enumerate(names):
        values = [r.as_row()[i] for r in records]
        n = len(values)
        mean = sum(values) / n if n else 0.0
        var = sum((v - mean) ** 2 for v in values) / n if n else 0.0
        out[name] = {
            "min": min(values) if values else 0.0,
            "mean": mean,
            "std": math.sqrt(var),
            "max": max(values) if values else 0.0,
        }
    return out


def summary_to_csv(stats: dict[str, dict[str, float]]) -> str:
    lines = ["kpi,min,mean,std,max"]
    for name, row in stats.items():
        lines.append(f"{name},{row['min']!r},{row['mean']!r},"
                     f"{row['std']!r},{row['max']!r}")
    return "\n".join(lines) + "\n"
