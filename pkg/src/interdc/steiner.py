"""Directed minimum-weight Steiner trees: a greedy heuristic and an exact oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .netgraph import InfeasibleError, Topology, shortest_path_tree, trace_path


@dataclass(frozen=True)
class SteinerTree:
    root: str
    terminals: frozenset
    edges: tuple[int, ...]
    weight: float = field(compare=False, default=0.0)

    def __len__(self):
        return len(self.edges)

    def nodes(self, topo: Topology) -> set[str]:
        out = {self.root}
        for e in self.edges:
            out.update(topo.edges[e])
        return out

    def edge_names(self, topo: Topology) -> list[tuple[str, str]]:
        return [topo.edges[e] for e in self.edges]


def tree_weight(edges: Iterable[int], weights: Sequence[float]) -> float:
    return float(sum(weights[e] for e in edges))


def is_arborescence(topo: Topology, root: str, terminals: Iterable[str], edges: Iterable[int]) -> bool:
    """True when ``edges`` form a tree directed away from ``root`` reaching every terminal."""
    edges = list(edges)
    if len(set(edges)) != len(edges):
        return False
    incoming: dict[str, int] = {}
    children: dict[str, list[str]] = {}
    for e in edges:
        u, v = topo.edges[e]
        if v == root or v in incoming:
            return False
        incoming[v] = e
        children.setdefault(u, []).append(v)
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        for v in children.get(u, ()):
            if v in seen:
                return False
            seen.add(v)
            stack.append(v)
    if len(seen) != len(incoming) + 1:
        return False
    return all(t in seen for t in terminals)


def _prune(topo: Topology, weights, root: int, terminals: set[int], candidate: set[int]) -> list[int]:
    """Shortest-path arborescence inside ``candidate`` with non-terminal leaves removed."""
    _, pred = shortest_path_tree(topo, weights, root, allowed=candidate)
    edges: set[int] = set()
    for t in terminals:
        if t == root:
            continue
        v = t
        while v != root:
            e = pred[v]
            if e < 0:
                raise InfeasibleError(f"{topo.nodes[t]} not reachable inside candidate edges")
            if e in edges:
                break
            edges.add(e)
            v = int(topo.src[e])
    return sorted(edges)


def _better(a: tuple[float, list[int]], b: tuple[float, list[int]] | None, tol: float = 1e-12) -> bool:
    if b is None:
        return True
    wa, ea = a
    wb, eb = b
    slack = tol * max(1.0, abs(wb))
    if wa < wb - slack:
        return True
    if wa > wb + slack:
        return False
    if len(ea) != len(eb):
        return len(ea) < len(eb)
    return ea < eb


class _AllPairs:
    def __init__(self, topo: Topology, weights, excluded):
        self.dist = []
        self.pred = []
        for s in range(topo.num_nodes):
            d, p = shortest_path_tree(topo, weights, s, excluded)
            self.dist.append(d)
            self.pred.append(p)


def _density_greedy(topo, weights, root, terminals, ap: _AllPairs) -> set[int]:
    tree_nodes = {root}
    uncovered = set(terminals) - {root}
    chosen: set[int] = set()
    n = topo.num_nodes
    while uncovered:
        best = None
        for hub in range(n):
            # cheapest attachment of the hub to the current tree
            attach, anchor = math.inf, -1
            for u in sorted(tree_nodes):
                if ap.dist[u][hub] < attach:
                    attach, anchor = ap.dist[u][hub], u
            if attach == math.inf:
                continue
            reach = sorted((ap.dist[hub][t], t) for t in uncovered if ap.dist[hub][t] < math.inf)
            total = attach
            for k, (d, _) in enumerate(reach, start=1):
                total += d
                key = (total / k, -k, hub)
                if best is None or key < best[0]:
                    best = (key, hub, anchor, [t for _, t in reach[:k]])
        if best is None:
            missing = ", ".join(topo.nodes[t] for t in sorted(uncovered))
            raise InfeasibleError(f"terminals unreachable from {topo.nodes[root]}: {missing}")
        _, hub, anchor, targets = best
        pieces = [trace_path(topo, ap.pred[anchor], anchor, hub)]
        pieces += [trace_path(topo, ap.pred[hub], hub, t) for t in targets]
        for path in pieces:
            for e in path:
                chosen.add(e)
                tree_nodes.add(int(topo.src[e]))
                tree_nodes.add(int(topo.dst[e]))
        uncovered -= tree_nodes
    return chosen


def _nearest_terminal(topo, weights, root, terminals, ap: _AllPairs) -> set[int]:
    tree_nodes = {root}
    uncovered = set(terminals) - {root}
    chosen: set[int] = set()
    while uncovered:
        best = None
        for t in sorted(uncovered):
            for u in sorted(tree_nodes):
                d = ap.dist[u][t]
                if d < math.inf and (best is None or d < best[0]):
                    best = (d, u, t)
        if best is None:
            missing = ", ".join(topo.nodes[t] for t in sorted(uncovered))
            raise InfeasibleError(f"terminals unreachable from {topo.nodes[root]}: {missing}")
        _, u, t = best
        for e in trace_path(topo, ap.pred[u], u, t):
            chosen.add(e)
            tree_nodes.add(int(topo.src[e]))
            tree_nodes.add(int(topo.dst[e]))
        uncovered -= tree_nodes
    return chosen


def min_weight_steiner(
    topo: Topology,
    weights: Sequence[float] | np.ndarray,
    root: str,
    terminals: Iterable[str],
    excluded: Iterable[int] = (),
) -> SteinerTree:
    """Heuristic minimum-weight arborescence from ``root`` spanning ``terminals``.

    Two greedy constructions are tried (cheapest cost-per-terminal bundles
    through a hub node, and repeated attachment of the nearest terminal);
    each is cleaned up into a shortest-path arborescence over its own edges
    and the lighter result wins. Edges in ``excluded`` are treated as absent.
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0):
        raise ValueError("edge weights must be non-negative")
    terminals = frozenset(terminals)
    r = topo.node_id(root)
    term_ids = {topo.node_id(t) for t in terminals} - {r}
    if not term_ids:
        return SteinerTree(root, terminals, (), 0.0)
    excluded = set(excluded)
    ap = _AllPairs(topo, weights, excluded)
    unreachable = [topo.nodes[t] for t in sorted(term_ids) if ap.dist[r][t] == math.inf]
    if unreachable:
        raise InfeasibleError(f"terminals unreachable from {root}: {', '.join(unreachable)}")
    best = None
    for build in (_density_greedy, _nearest_terminal):
        edges = _prune(topo, weights, r, term_ids, build(topo, weights, r, term_ids, ap))
        cand = (tree_weight(edges, weights), edges)
        if _better(cand, best):
            best = cand
    w, edges = best
    return SteinerTree(root, terminals, tuple(edges), w)


def _dreyfus_wagner(topo, weights, root, terms, ap):
    k = len(terms)
    n = topo.num_nodes
    full = (1 << k) - 1
    cost = [[math.inf] * n for _ in range(full + 1)]
    # choice[mask][v]: ("path", t) | ("split", u, sub)
    choice: list[list[tuple | None]] = [[None] * n for _ in range(full + 1)]
    for i, t in enumerate(terms):
        for v in range(n):
            cost[1 << i][v] = ap.dist[v][t]
            choice[1 << i][v] = ("leaf", t)
    for mask in range(1, full + 1):
        if mask & (mask - 1) == 0:
            continue
        merged = [math.inf] * n
        split = [None] * n
        for u in range(n):
            sub = (mask - 1) & mask
            while sub:
                if sub < (mask ^ sub):
                    c = cost[sub][u] + cost[mask ^ sub][u]
                    if c < merged[u]:
                        merged[u], split[u] = c, sub
                sub = (sub - 1) & mask
        for v in range(n):
            for u in range(n):
                c = ap.dist[v][u] + merged[u]
                if c < cost[mask][v]:
                    cost[mask][v] = c
                    choice[mask][v] = ("split", u, split[u])
    edges: set[int] = set()

    def expand(mask, v):
        how = choice[mask][v]
        if how[0] == "leaf":
            edges.update(trace_path(topo, ap.pred[v], v, how[1]))
            return
        _, u, sub = how
        edges.update(trace_path(topo, ap.pred[v], v, u))
        expand(sub, u)
        expand(mask ^ sub, u)

    expand(full, root)
    return cost[full][root], edges


def exact_steiner_oracle(
    topo: Topology,
    weights: Sequence[float] | np.ndarray,
    root: str,
    terminals: Iterable[str],
    excluded: Iterable[int] = (),
    max_nodes: int = 12,
    max_terminals: int = 5,
) -> SteinerTree:
    """Optimal arborescence by dynamic programming over terminal subsets.

    Guarded to small instances; it is meant as a reference for tests.
    """
    weights = np.asarray(weights, dtype=float)
    terminals = frozenset(terminals)
    if topo.num_nodes > max_nodes or len(terminals) > max_terminals:
        raise ValueError(
            f"instance too large for the exact oracle ({topo.num_nodes} nodes, {len(terminals)} terminals)")
    r = topo.node_id(root)
    terms = sorted({topo.node_id(t) for t in terminals} - {r})
    if not terms:
        return SteinerTree(root, terminals, (), 0.0)
    ap = _AllPairs(topo, weights, set(excluded))
    if any(ap.dist[r][t] == math.inf for t in terms):
        raise InfeasibleError(f"some terminal is unreachable from {root}")
    _, union = _dreyfus_wagner(topo, weights, r, terms, ap)
    edges = _prune(topo, weights, r, set(terms), union)
    return SteinerTree(root, terminals, tuple(edges), tree_weight(edges, weights))


def brute_force_steiner(
    topo: Topology,
    weights: Sequence[float] | np.ndarray,
    root: str,
    terminals: Iterable[str],
    max_edges: int = 18,
) -> SteinerTree:
    """Exhaustive search over edge subsets; only for tiny graphs."""
    if topo.num_edges > max_edges:
        raise ValueError("too many edges for subset enumeration")
    weights = np.asarray(weights, dtype=float)
    terminals = frozenset(terminals)
    best = None
    for size in range(topo.num_edges + 1):
        for subset in itertools.combinations(range(topo.num_edges), size):
            if is_arborescence(topo, root, terminals, subset):
                cand = (tree_weight(subset, weights), list(subset))
                if best is None or cand[0] < best[0] - 1e-12:
                    best = cand
    if best is None:
        raise InfeasibleError("no arborescence spans the terminals")
    return SteinerTree(root, terminals, tuple(best[1]), best[0])
