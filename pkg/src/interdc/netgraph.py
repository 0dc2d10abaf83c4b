"""Capacitated directed network model and the per-slot allocation state."""

from __future__ import annotations

import heapq
import math
from collections import deque
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

TOL = 1e-9


class TopologyError(ValueError):
    pass


class InfeasibleError(Exception):
    """Raised when no route reaches a requested node."""


class Topology:
    """Immutable directed graph with a capacity on every edge.

    Edges are numbered by sorted (src, dst) order so every algorithm walks
    them in the same sequence and runs stay reproducible.
    """

    def __init__(
        self,
        edges: Iterable[tuple[str, str, float]],
        nodes: Iterable[str] | None = None,
        bidirectional: bool = False,
        name: str = "",
    ):
        caps: dict[tuple[str, str], float] = {}
        node_set = set(nodes or ())
        for src, dst, cap in edges:
            src, dst, cap = str(src), str(dst), float(cap)
            if src == dst:
                raise TopologyError(f"self-loop on {src}")
            if not math.isfinite(cap) or cap <= 0:
                raise TopologyError(f"capacity of {src}->{dst} must be positive and finite, got {cap}")
            pairs = [(src, dst), (dst, src)] if bidirectional else [(src, dst)]
            for pair in pairs:
                if pair in caps and caps[pair] != cap:
                    raise TopologyError(f"duplicate edge {pair[0]}->{pair[1]} with different capacity")
                if pair in caps and not bidirectional:
                    raise TopologyError(f"duplicate edge {pair[0]}->{pair[1]}")
                caps[pair] = cap
            node_set.update((src, dst))

        self.name = name
        self.nodes: tuple[str, ...] = tuple(sorted(node_set))
        self.node_index = {n: i for i, n in enumerate(self.nodes)}
        self.edges: tuple[tuple[str, str], ...] = tuple(sorted(caps))
        self.edge_index = {e: i for i, e in enumerate(self.edges)}
        self.capacity = np.array([caps[e] for e in self.edges], dtype=float)
        self.capacity.setflags(write=False)
        self.src = np.array([self.node_index[u] for u, _ in self.edges], dtype=np.int64)
        self.dst = np.array([self.node_index[v] for _, v in self.edges], dtype=np.int64)
        self.out_edges: list[list[int]] = [[] for _ in self.nodes]
        self.in_edges: list[list[int]] = [[] for _ in self.nodes]
        for eid, (u, v) in enumerate(self.edges):
            self.out_edges[self.node_index[u]].append(eid)
            self.in_edges[self.node_index[v]].append(eid)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<Topology{label} nodes={self.num_nodes} edges={self.num_edges}>"

    def edge_id(self, src: str, dst: str) -> int:
        try:
            return self.edge_index[(src, dst)]
        except KeyError:
            raise KeyError(f"no edge {src}->{dst}") from None

    def node_id(self, node: str) -> int:
        try:
            return self.node_index[node]
        except KeyError:
            raise KeyError(f"unknown node {node!r}") from None

    def edge_capacity(self, eid: int) -> float:
        return float(self.capacity[eid])

    def is_bidirectional(self) -> bool:
        for (u, v), c in zip(self.edges, self.capacity):
            back = self.edge_index.get((v, u))
            if back is None or self.capacity[back] != c:
                return False
        return True

    def path_nodes(self, path: Sequence[int]) -> list[str]:
        if not path:
            return []
        out = [self.edges[path[0]][0]]
        out.extend(self.edges[e][1] for e in path)
        return out

    def hop_distance(self, a: str, b: str, undirected: bool = False) -> float:
        """Minimum hop count from a to b; inf when b is unreachable."""
        return self.hop_distances_from(a, undirected)[self.node_id(b)]

    def hop_distances_from(self, a: str, undirected: bool = False) -> list[float]:
        start = self.node_id(a)
        dist = [math.inf] * self.num_nodes
        dist[start] = 0
        queue = deque([start])
        while queue:
            u = queue.popleft()
            nbrs = [int(self.dst[e]) for e in self.out_edges[u]]
            if undirected:
                nbrs += [int(self.src[e]) for e in self.in_edges[u]]
            for v in nbrs:
                if dist[v] == math.inf:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def normalized(self) -> "Topology":
        """Copy with capacities divided by the largest one."""
        top = float(self.capacity.max())
        return Topology(
            ((u, v, c / top) for (u, v), c in zip(self.edges, self.capacity)),
            nodes=self.nodes,
            name=self.name,
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bidirectional": False,
            "edges": [[u, v, float(c)] for (u, v), c in zip(self.edges, self.capacity)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Topology":
        if "edges" not in data:
            raise TopologyError("topology needs an 'edges' list")
        edges = []
        for rec in data["edges"]:
            if isinstance(rec, dict):
                edges.append((rec["src"], rec["dst"], rec.get("capacity", 1.0)))
            elif len(rec) == 2:
                edges.append((rec[0], rec[1], 1.0))
            else:
                edges.append((rec[0], rec[1], rec[2]))
        topo = cls(
            edges,
            nodes=data.get("nodes"),
            bidirectional=bool(data.get("bidirectional", False)),
            name=str(data.get("name", "")),
        )
        return topo.normalized() if data.get("normalize", False) else topo

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise TopologyError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


def bundled_topology(name: str) -> Topology:
    """Load one of the stand-in topologies shipped with the package."""
    here = Path(__file__).parent / "data" / f"{name}.yaml"
    if not here.exists():
        raise KeyError(f"no bundled topology {name!r}; have {bundled_topology_names()}")
    return Topology.load(here)


def bundled_topology_names() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "data").glob("*.yaml"))


def line_topology(nodes: Sequence[str], capacity: float = 1.0, bidirectional: bool = False) -> Topology:
    return Topology(
        ((a, b, capacity) for a, b in zip(nodes, nodes[1:])),
        bidirectional=bidirectional,
        name="line",
    )


def shortest_path_tree(
    topo: Topology,
    weights: Sequence[float] | np.ndarray,
    source: int,
    excluded: Iterable[int] = (),
    allowed: Iterable[int] | None = None,
) -> tuple[list[float], list[int]]:
    """Dijkstra from node index ``source``.

    Returns (distance, predecessor edge) per node index. Equal distances are
    broken by fewer hops, then by lower node index of the predecessor.
    """
    skip = set(excluded)
    only = None if allowed is None else set(allowed)
    n = topo.num_nodes
    dist = [math.inf] * n
    hops = [math.inf] * n
    pred = [-1] * n
    dist[source] = 0.0
    hops[source] = 0
    heap = [(0.0, 0, source)]
    done = [False] * n
    while heap:
        d, h, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for e in topo.out_edges[u]:
            if e in skip or (only is not None and e not in only):
                continue
            w = weights[e]
            if w == math.inf:
                continue
            v = int(topo.dst[e])
            if done[v]:
                continue
            nd, nh = d + w, h + 1
            if nd < dist[v] or (nd == dist[v] and (nh < hops[v] or (nh == hops[v] and u < topo.src[pred[v]]))):
                dist[v], hops[v], pred[v] = nd, nh, e
                heapq.heappush(heap, (nd, nh, v))
    return dist, pred


def trace_path(topo: Topology, pred: Sequence[int], source: int, target: int) -> list[int]:
    path = []
    v = target
    while v != source:
        e = pred[v]
        if e < 0:
            raise InfeasibleError(f"{topo.nodes[target]} unreachable from {topo.nodes[source]}")
        path.append(e)
        v = int(topo.src[e])
    path.reverse()
    return path


def shortest_path(
    topo: Topology,
    weights: Sequence[float] | np.ndarray,
    src: str,
    dst: str,
    excluded: Iterable[int] = (),
) -> list[int]:
    """Minimum-weight path as a list of edge ids, fewest hops on ties."""
    s, t = topo.node_id(src), topo.node_id(dst)
    _, pred = shortest_path_tree(topo, weights, s, excluded)
    return trace_path(topo, pred, s, t)


def min_hop_path(topo: Topology, src: str, dst: str, excluded: Iterable[int] = ()) -> list[int]:
    return shortest_path(topo, np.ones(topo.num_edges), src, dst, excluded)


class BackgroundTraffic:
    """Periodic high-priority traffic that is subtracted from every link.

    Each edge swings between 5% of capacity and a peak fraction drawn from
    [0.05, 0.30], with a period drawn from [10, 100] slots.
    """

    def __init__(self, topo: Topology, seed: int, low: float = 0.05, high: float = 0.30,
                 period_range: tuple[int, int] = (10, 100)):
        rng = np.random.default_rng(seed)
        m = topo.num_edges
        self.capacity = np.asarray(topo.capacity, dtype=float)
        self.low = np.full(m, low)
        self.peak = rng.uniform(low, high, size=m)
        self.period = rng.integers(period_range[0], period_range[1] + 1, size=m)
        self.phase = rng.integers(0, period_range[1], size=m)

    def block(self, start: int, stop: int) -> np.ndarray:
        """Reserved rate per edge for slots start..stop inclusive, shape (E, n)."""
        slots = np.arange(start, stop + 1)
        angle = 2 * np.pi * ((slots[None, :] + self.phase[:, None]) % self.period[:, None]) / self.period[:, None]
        frac = self.low[:, None] + (self.peak - self.low)[:, None] * (1 - np.cos(angle)) / 2
        return frac * self.capacity[:, None]


class Timeline:
    """Per-edge, per-slot reservations from ``t_now + 1`` onward.

    Slots are stored at absolute indices in a dense array that grows on
    demand. Slot ``t`` covers the interval (t-1, t] in units of the slot width.
    """

    def __init__(self, topo: Topology, slot_width: float = 1.0, t_now: int = 0,
                 background: BackgroundTraffic | None = None):
        self.topo = topo
        self.slot_width = float(slot_width)
        self.t_now = int(t_now)
        self.background = background
        self._alloc = np.zeros((topo.num_edges, max(64, t_now + 64)))
        self._reserved_bg = self._bg_block(0, self._alloc.shape[1] - 1)
        self.t_end = self.t_now

    def _bg_block(self, start: int, stop: int) -> np.ndarray:
        if self.background is None:
            return np.zeros((self.topo.num_edges, stop - start + 1))
        return self.background.block(start, stop)

    def _grow(self, slot: int) -> None:
        size = self._alloc.shape[1]
        if slot < size:
            return
        new = max(slot + 1, 2 * size)
        extra = np.zeros((self.topo.num_edges, new - size))
        self._alloc = np.hstack([self._alloc, extra])
        self._reserved_bg = np.hstack([self._reserved_bg, self._bg_block(size, new - 1)])

    def _check_edge(self, eid: int) -> None:
        if not 0 <= eid < self.topo.num_edges:
            raise KeyError(f"unknown edge id {eid}")

    def alloc(self, eid: int, slot: int) -> float:
        self._check_edge(eid)
        if slot >= self._alloc.shape[1]:
            return 0.0
        return float(self._alloc[eid, slot])

    def background_rate(self, eid: int, slot: int) -> float:
        self._check_edge(eid)
        self._grow(slot)
        return float(self._reserved_bg[eid, slot])

    def available_bandwidth(self, eid: int, slot: int) -> float:
        if slot <= self.t_now:
            raise ValueError(f"slot {slot} is not after t_now={self.t_now}")
        self._check_edge(eid)
        self._grow(slot)
        free = self.topo.capacity[eid] - self._alloc[eid, slot] - self._reserved_bg[eid, slot]
        return max(0.0, float(free))

    def available_block(self, edges: Sequence[int], start: int, stop: int) -> np.ndarray:
        """Available rate for each edge in ``edges`` over slots start..stop."""
        self._grow(stop)
        idx = np.asarray(edges, dtype=np.int64)
        cap = self.topo.capacity[idx][:, None]
        free = cap - self._alloc[idx, start:stop + 1] - self._reserved_bg[idx, start:stop + 1]
        return np.maximum(free, 0.0)

    def bottleneck(self, edges: Sequence[int], start: int, stop: int) -> np.ndarray:
        """Route-wide available rate per slot (min over its edges)."""
        if stop < start:
            return np.zeros(0)
        return self.available_block(edges, start, stop).min(axis=0)

    def available_now(self) -> np.ndarray:
        """Available rate on every edge in the next slot."""
        return self.available_block(range(self.topo.num_edges), self.t_now + 1, self.t_now + 1)[:, 0]

    def reserve(self, edges: Sequence[int], slot: int, rate: float) -> None:
        if rate == 0:
            return
        if slot <= self.t_now:
            raise ValueError(f"cannot reserve slot {slot} at t_now={self.t_now}")
        self._grow(slot)
        idx = np.asarray(edges, dtype=np.int64)
        after = self._alloc[idx, slot] + rate
        limit = self.topo.capacity[idx] - self._reserved_bg[idx, slot]
        if np.any(after > limit + TOL) or np.any(after < -TOL):
            raise ValueError(f"reservation of {rate} at slot {slot} breaks capacity")
        self._alloc[idx, slot] = np.clip(after, 0.0, None)
        if rate > 0:
            self.t_end = max(self.t_end, slot)

    def release(self, edges: Sequence[int], slot: int, rate: float) -> None:
        self.reserve(edges, slot, -rate)

    def edge_load_until(self, eid: int, slot: int) -> float:
        """Reserved units on an edge over slots t_now+1..slot."""
        if slot < self.t_now:
            raise ValueError(f"slot {slot} precedes t_now={self.t_now}")
        self._check_edge(eid)
        stop = min(slot, self._alloc.shape[1] - 1)
        return float(self._alloc[eid, self.t_now + 1:stop + 1].sum()) * self.slot_width

    def loads_until(self, slot: int) -> np.ndarray:
        """edge_load_until for every edge at once."""
        stop = min(slot, self._alloc.shape[1] - 1)
        return self._alloc[:, self.t_now + 1:stop + 1].sum(axis=1) * self.slot_width

    def edge_load(self, eid: int) -> float:
        return self.edge_load_until(eid, max(self.t_end, self.t_now))

    def advance(self) -> None:
        self.t_now += 1
        self.t_end = max(self.t_end, self.t_now)

    def advance_to(self, slot: int) -> None:
        """Jump over idle slots; everything before ``slot`` must already be walked."""
        if slot < self.t_now:
            raise ValueError(f"cannot move back from {self.t_now} to {slot}")
        if np.any(self._alloc[:, self.t_now + 1:slot + 1] > TOL):
            raise ValueError("skipped slots still hold reservations")
        self.t_now = int(slot)
        self.t_end = max(self.t_end, self.t_now)

    def snapshot(self) -> tuple:
        return self.t_now, self.t_end, self._alloc.copy()

    def check_capacity(self) -> None:
        limit = self.topo.capacity[:, None] - self._reserved_bg
        if np.any(self._alloc > limit + TOL) or np.any(self._alloc < -TOL):
            raise AssertionError("timeline exceeds capacity")


class EdgeLoad:
    """Outstanding volume per edge, kept as raw data units.

    The capacity-scaled view divides by each edge's capacity.
    """

    def __init__(self, topo: Topology):
        self.topo = topo
        self.raw = np.zeros(topo.num_edges)

    def add(self, edges: Sequence[int], amount: float) -> None:
        idx = np.asarray(list(edges), dtype=np.int64)
        self.raw[idx] += amount
        # Drift from many small decrements should not leave negative load.
        np.maximum(self.raw, 0.0, out=self.raw)

    def scaled(self) -> np.ndarray:
        return self.raw / self.topo.capacity

    def copy(self) -> "EdgeLoad":
        other = EdgeLoad(self.topo)
        other.raw = self.raw.copy()
        return other
