"""Radial feeder model: per-edge flow aggregation, congestion, grid balance.

The flow proxy sums net injections over each edge's downstream subtree --
no impedances or losses, which is the minimal physically meaningful model
for a radial feeder. The shipped 34-node topology carries an explicit
substation tie `SRC -> 800` so the root edge is the external interconnection
and carries exactly the community's net export.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

Edge = tuple[str, str]


@dataclass(frozen=True)
class GridTopology:
    """Immutable rooted tree with rated edge capacities."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    edge_capacity: dict[Edge, float]
    grid_capacity_kw: float = 1800.0

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.nodes) - 1:
            raise ValueError(
                f"a tree needs |nodes|-1 edges: {len(self.nodes)} nodes, "
                f"{len(self.edges)} edges")
        if self.grid_capacity_kw <= 0:
            raise ValueError("grid_capacity_kw must be > 0")
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise ValueError("duplicate node identifiers")
        parent: dict[str, str] = {}
        for p, c in self.edges:
            if p not in node_set or c not in node_set:
                raise ValueError(f"edge ({p}, {c}) references unknown node")
            if c in parent:
                raise ValueError(f"node {c} has two parents")
            parent[c] = p
        roots = [n for n in self.nodes if n not in parent]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {roots}")
        # walking to the root must terminate for every node (no cycles,
        # no disconnected components given the edge-count check above)
        root = roots[0]
        for n in self.nodes:
            seen = set()
            cur = n
            while cur != root:
                if cur in seen:
                    raise ValueError(f"cycle detected at node {cur}")
                seen.add(cur)
                cur = parent[cur]
        for e, cap in self.edge_capacity.items():
            if e not in set(self.edges):
                raise ValueError(f"capacity given for unknown edge {e}")
            if cap <= 0:
                raise ValueError(f"edge {e} capacity must be > 0")
        if set(self.edge_capacity) != set(self.edges):
            raise ValueError("every edge needs a capacity")
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_root", root)

    @property
    def root(self) -> str:
        return self._root  # type: ignore[attr-defined]

    @property
    def root_edge(self) -> Edge:
        for e in self.edges:
            if e[0] == self.root:
                return e
        raise ValueError("root has no outgoing edge")

    def parent_of(self, node: str) -> str | None:
        return self._parent.get(node)  # type: ignore[attr-defined]

    @classmethod
    def from_csv(cls, path: str | Path, grid_capacity_kw: float = 1800.0) -> "GridTopology":
        path = Path(path)
        edges: list[Edge] = []
        caps: dict[Edge, float] = {}
        nodes: list[str] = []
        seen: set[str] = set()
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            expected = {"parent", "child", "capacity_kw"}
            if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
                raise ValueError(f"{path}: expected header parent,child,capacity_kw")
            for row in reader:
                p, c = row["parent"].strip(), row["child"].strip()
                edges.append((p, c))
                caps[(p, c)] = float(row["capacity_kw"])
                for n in (p, c):
                    if n not in seen:
                        seen.add(n)
                        nodes.append(n)
        return cls(nodes=tuple(nodes), edges=tuple(edges), edge_capacity=caps,
                   grid_capacity_kw=grid_capacity_kw)


@dataclass(frozen=True)
class FlowResult:
    """Signed edge flows (positive toward the root) plus congestion summary."""

    edge_flow: dict[Edge, float]
    congestion_mean: float
    max_edge_utilization: float


def edge_flows(topology: GridTopology,
               net_injection: Mapping[str, float]) -> FlowResult:
    """Aggregate nodal injections into per-edge flows on the radial tree.

    The flow on edge (p, c) is the sum of net injections over the subtree
    rooted at c; with the shipped substation tie this makes the root edge
    equal the total net injection.
    """
    unknown = [n for n in net_injection if n not in set(topology.nodes)]
    if unknown:
        raise ValueError(f"injections reference unknown nodes: {unknown}")

    subtree: dict[str, float] = {n: 0.0 for n in topology.nodes}
    for n, v in net_injection.items():
        subtree[n] += float(v)
    # children-before-parents: repeatedly fold leaves upward
    children: dict[str, list[str]] = {n: [] for n in topology.nodes}
    for p, c in topology.edges:
        children[p].append(c)
    order: list[str] = []
    stack = [topology.root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(children[node])
    for node in reversed(order):
        parent = topology.parent_of(node)
        if parent is not None:
            subtree[parent] += subtree[node]

    flows = {(p, c): subtree[c] for p, c in topology.edges}
    mean, max_util = congestion_stats(flows, topology)
    return FlowResult(edge_flow=flows, congestion_mean=mean,
                      max_edge_utilization=max_util)


def congestion_stats(flows: Mapping[Edge, float],
                     topology: GridTopology) -> tuple[float, float]:
    utils = [abs(flows[e]) / topology.edge_capacity[e] for e in topology.edges]
    mean = min(1.0, sum(utils) / len(utils)) if utils else 0.0
    return mean, (max(utils) if utils else 0.0)


def congestion(flows: FlowResult, topology: GridTopology) -> float:
    """Mean per-edge |flow|/capacity, clamped to [0, 1]."""
    mean, _ = congestion_stats(flows.edge_flow, topology)
    return mean


def grid_balance(per_agent: Sequence[tuple[float, float, float, float]]) -> float:
    """Signed net energy position: sum of (G - D + bought - sold) per agent."""
    total = 0.0
    for g, d, bought, sold in per_agent:
        if min(g, d, bought, sold) < 0:
            raise ValueError("grid balance components must be >= 0")
        total += g - d + bought - sold
    return total
