"""Path selection for point-to-point flows.

Best worst-case routing (BWR) picks the path whose intersecting flows carry
the least remaining volume: that sum plus the new flow's own volume bounds
its completion time when every intersecting flow is served first.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .netgraph import InfeasibleError, Topology, min_hop_path, shortest_path

DEFAULT_EPSILON = 1e-6
DEFAULT_PATH_CAP = 10**6


class PathLimitExceeded(RuntimeError):
    pass


@dataclass
class FlowState:
    id: int
    path: tuple[int, ...]
    remaining: float
    edge_set: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        self.path = tuple(self.path)
        self.edge_set = frozenset(self.path)


class RoutePolicy(enum.Enum):
    MIN_HOP = "MIN_HOP"
    RANDOM_UNIFORM_SHORTEST = "RANDOM_UNIFORM_SHORTEST"
    MINMAX = "MINMAX"
    MINSUM = "MINSUM"
    BWR_EXACT = "BWR_EXACT"
    BWRH = "BWRH"
    BWRHF = "BWRHF"


class CostMetric(enum.Enum):
    UTILIZATION = "utilization"
    LOAD = "load"
    LOAD_PLUS_DEMAND = "load_plus_demand"


def parse_route_policy(name: str) -> tuple[RoutePolicy, CostMetric | None]:
    """Accepts e.g. ``BWRH``, ``MINSUM(load)`` or ``MINMAX:utilization``."""
    text = name.strip()
    metric = None
    for sep in ("(", ":"):
        if sep in text:
            head, tail = text.split(sep, 1)
            text, metric = head.strip(), tail.strip(" )").lower()
            break
    try:
        policy = RoutePolicy[text.upper()]
    except KeyError:
        valid = ", ".join(p.value for p in RoutePolicy)
        raise ValueError(f"unknown routing policy {name!r}; valid: {valid}") from None
    if policy in (RoutePolicy.MINMAX, RoutePolicy.MINSUM):
        try:
            return policy, CostMetric(metric or "load")
        except ValueError:
            raise ValueError(f"unknown cost metric {metric!r}") from None
    return policy, None


def bwr_path_weight(path: Iterable[int], flows: Iterable[FlowState]) -> float:
    """Remaining volume of the distinct flows sharing at least one edge with ``path``."""
    edges = set(path)
    return float(sum(f.remaining for f in flows if not edges.isdisjoint(f.edge_set)))


def iter_simple_paths(topo: Topology, src: str, dst: str, max_hops: int | None = None) -> Iterator[list[int]]:
    """Depth-first enumeration of simple paths, optionally bounded in hops."""
    s, t = topo.node_id(src), topo.node_id(dst)
    if s == t:
        return
    limit = topo.num_nodes - 1 if max_hops is None else max_hops
    # Prune branches that cannot reach the target within the remaining budget.
    to_target = [math.inf] * topo.num_nodes
    to_target[t] = 0
    frontier = [t]
    while frontier:
        nxt = []
        for v in frontier:
            for e in topo.in_edges[v]:
                u = int(topo.src[e])
                if to_target[u] == math.inf:
                    to_target[u] = to_target[v] + 1
                    nxt.append(u)
        frontier = nxt
    on_path = [False] * topo.num_nodes
    on_path[s] = True
    path: list[int] = []
    stack = [iter(topo.out_edges[s])]
    node_stack = [s]
    while stack:
        advanced = False
        for e in stack[-1]:
            v = int(topo.dst[e])
            if on_path[v] or len(path) + 1 + to_target[v] > limit:
                continue
            if v == t:
                yield path + [e]
                continue
            path.append(e)
            on_path[v] = True
            node_stack.append(v)
            stack.append(iter(topo.out_edges[v]))
            advanced = True
            break
        if not advanced:
            stack.pop()
            on_path[node_stack.pop()] = False
            if path:
                path.pop()


class _FlowIndex:
    """Vectorised weight evaluation for many candidate paths at once."""

    def __init__(self, topo: Topology, flows: Sequence[FlowState]):
        self.volumes = np.array([f.remaining for f in flows], dtype=float)
        self.member = np.zeros((len(flows), topo.num_edges), dtype=bool)
        for i, f in enumerate(flows):
            self.member[i, list(f.path)] = True
        self.num_edges = topo.num_edges

    def weights(self, paths: Sequence[Sequence[int]]) -> np.ndarray:
        if not len(paths):
            return np.zeros(0)
        if not len(self.volumes):
            return np.zeros(len(paths))
        incidence = np.zeros((self.num_edges, len(paths)), dtype=np.int32)
        for j, p in enumerate(paths):
            incidence[list(p), j] = 1
        touched = (self.member.astype(np.int32) @ incidence) > 0
        return self.volumes @ touched


def _pick(paths: Sequence[list[int]], weights: np.ndarray) -> tuple[list[int], float]:
    best = min(range(len(paths)), key=lambda j: (weights[j], len(paths[j]), paths[j]))
    return paths[best], float(weights[best])


def _collect(topo, src, dst, max_hops, cap):
    out = []
    for p in iter_simple_paths(topo, src, dst, max_hops):
        out.append(p)
        if len(out) > cap:
            raise PathLimitExceeded(f"more than {cap} candidate paths")
    return out


def bwr_exact(topo: Topology, src: str, dst: str, flows: Sequence[FlowState],
              path_cap: int = DEFAULT_PATH_CAP) -> list[int]:
    """Exhaustive minimum-weight path; ties go to fewer hops."""
    paths = _collect(topo, src, dst, None, path_cap)
    if not paths:
        raise InfeasibleError(f"{dst} unreachable from {src}")
    return _pick(paths, _FlowIndex(topo, flows).weights(paths))[0]


@dataclass
class BwrhTrace:
    path: list[int]
    weight: float
    weight_by_hops: dict[int, float]
    fell_back: bool = False


def bwrh_trace(topo: Topology, src: str, dst: str, flows: Sequence[FlowState],
               path_cap: int = DEFAULT_PATH_CAP) -> BwrhTrace:
    """Hop-bound escalation with the per-bound best weights recorded."""
    base = topo.hop_distance(src, dst)
    if base == math.inf:
        raise InfeasibleError(f"{dst} unreachable from {src}")
    index = _FlowIndex(topo, flows)
    best_by_hops: dict[int, tuple[list[int], float]] = {}
    k = int(base)
    seen: list[list[int]] = []
    try:
        while True:
            # Paths with exactly k hops extend the candidate set of bound k-1.
            fresh = [p for p in _collect(topo, src, dst, k, path_cap) if len(p) == k]
            seen.extend(fresh)
            if len(seen) > path_cap:
                raise PathLimitExceeded(f"more than {path_cap} candidate paths")
            if fresh:
                cand = _pick(fresh, index.weights(fresh))
                prev = best_by_hops.get(k - 1)
                best_by_hops[k] = cand if prev is None or cand[1] < prev[1] else prev
            else:
                best_by_hops[k] = best_by_hops[k - 1]
            if best_by_hops[k][1] == 0 and k == base:
                break
            if k > base and best_by_hops[k][1] >= best_by_hops[k - 1][1]:
                break
            if k >= topo.num_nodes - 1:
                k += 1
                best_by_hops[k] = best_by_hops[k - 1]
                break
            k += 1
    except PathLimitExceeded:
        path = bwrhf(topo, src, dst, flows)
        return BwrhTrace(path, bwr_path_weight(path, flows), {}, fell_back=True)
    final_bound = k - 1 if k > base else k
    path, weight = best_by_hops[final_bound]
    return BwrhTrace(path, weight, {h: w for h, (_, w) in best_by_hops.items()})


def bwrh(topo: Topology, src: str, dst: str, flows: Sequence[FlowState],
         path_cap: int = DEFAULT_PATH_CAP) -> list[int]:
    return bwrh_trace(topo, src, dst, flows, path_cap).path


def bwrhf_edge_weights(topo: Topology, flows: Iterable[FlowState], epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    w = np.full(topo.num_edges, float(epsilon))
    for f in flows:
        for e in f.edge_set:
            w[e] += f.remaining
    return w


def bwrhf(topo: Topology, src: str, dst: str, flows: Iterable[FlowState],
          epsilon: float = DEFAULT_EPSILON) -> list[int]:
    """Shortest path under per-edge weight (remaining volume on the edge + epsilon)."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return shortest_path(topo, bwrhf_edge_weights(topo, flows, epsilon), src, dst)


@dataclass
class NetworkView:
    """What the baseline cost metrics read at the arrival instant."""

    topo: Topology
    flows: Sequence[FlowState] = ()
    current_rate: np.ndarray | None = None  # traffic per edge in the current slot

    def utilization(self) -> np.ndarray:
        if self.current_rate is None:
            return np.zeros(self.topo.num_edges)
        return np.asarray(self.current_rate) / self.topo.capacity

    def load(self) -> np.ndarray:
        w = np.zeros(self.topo.num_edges)
        for f in self.flows:
            for e in f.edge_set:
                w[e] += f.remaining
        return w


def edge_costs(view: NetworkView, metric: CostMetric, demand: float) -> np.ndarray:
    if metric is CostMetric.UTILIZATION:
        return view.utilization()
    if metric is CostMetric.LOAD:
        return view.load()
    return view.load() + demand


def minmax_path(topo: Topology, costs: np.ndarray, src: str, dst: str) -> list[int]:
    """Path minimising its largest edge cost; fewest hops among those."""
    for threshold in np.unique(costs):
        allowed = costs <= threshold
        try:
            return shortest_path(topo, np.where(allowed, 1.0, math.inf), src, dst)
        except InfeasibleError:
            continue
    raise InfeasibleError(f"{dst} unreachable from {src}")


def select_path(
    policy: RoutePolicy | str,
    topo: Topology,
    src: str,
    dst: str,
    view: NetworkView,
    demand: float,
    metric: CostMetric | None = None,
    rng: random.Random | None = None,
) -> list[int]:
    if isinstance(policy, str):
        policy, parsed = parse_route_policy(policy)
        metric = metric or parsed
    if policy is RoutePolicy.MIN_HOP:
        return min_hop_path(topo, src, dst)
    if policy is RoutePolicy.RANDOM_UNIFORM_SHORTEST:
        base = topo.hop_distance(src, dst)
        if base == math.inf:
            raise InfeasibleError(f"{dst} unreachable from {src}")
        candidates = list(iter_simple_paths(topo, src, dst, int(base) + 1))
        return (rng or random.Random(0)).choice(candidates)
    if policy in (RoutePolicy.MINSUM, RoutePolicy.MINMAX):
        costs = edge_costs(view, metric or CostMetric.LOAD, demand)
        if policy is RoutePolicy.MINSUM:
            return shortest_path(topo, costs, src, dst)
        return minmax_path(topo, costs, src, dst)
    if policy is RoutePolicy.BWR_EXACT:
        return bwr_exact(topo, src, dst, view.flows)
    if policy is RoutePolicy.BWRH:
        return bwrh(topo, src, dst, view.flows)
    return bwrhf(topo, src, dst, view.flows)
