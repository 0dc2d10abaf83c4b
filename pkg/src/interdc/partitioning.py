"""Receiver-set partitioning for multicast transfers.

Two pipelines live here. One clusters receivers by hop distance and accepts
the finest clustering whose trees stay within a bandwidth budget. The other
ranks receivers by estimated completion time, seeds partitions from a
per-rank objective vector, and picks the layer of a merge hierarchy with the
lowest receiver-weighted completion time. Also here: the analytic
partitioner for a star with one sender uplink, and the completion-time
lower bound built on it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .multicast import capacity_aware_weights
from .netgraph import TOL, BackgroundTraffic, EdgeLoad, Topology
from .scheduling import maxmin_rates
from .steiner import SteinerTree, min_weight_steiner


@dataclass(frozen=True)
class Partition:
    receivers: tuple[str, ...]
    tree: SteinerTree


def check_partitioning(parts: Sequence[Partition], receivers: Iterable[str]) -> None:
    seen: list[str] = []
    for p in parts:
        if not p.receivers:
            raise AssertionError("empty partition")
        seen.extend(p.receivers)
    if len(seen) != len(set(seen)) or set(seen) != set(receivers):
        raise AssertionError("partitions must be disjoint and cover all receivers")


def objective_star(pi: Sequence[int]) -> list[int]:
    """Replace the last zero of each run of zeros by the run's length."""
    out = []
    run = 0
    for i, bit in enumerate(pi):
        if bit not in (0, 1):
            raise ValueError("objective vector must be binary")
        if bit == 1:
            out.append(1)
            run = 0
            continue
        run += 1
        last_of_run = i + 1 == len(pi) or pi[i + 1] == 1
        out.append(run if last_of_run else 0)
    return out


def parse_objective(bits: str | Sequence[int] | None, n: int) -> list[int]:
    if bits is None or bits == "":
        return [1] * n
    vec = [int(c) for c in bits] if isinstance(bits, str) else [int(b) for b in bits]
    if len(vec) != n:
        raise ValueError(f"objective vector has {len(vec)} entries for {n} receivers")
    if any(b not in (0, 1) for b in vec):
        raise ValueError("objective vector must be binary")
    return vec


# ---------------------------------------------------------------- clustering

def average_linkage_layers(dist: Sequence[Sequence[float]]) -> dict[int, list[tuple[int, ...]]]:
    """Average-linkage agglomeration; returns the clusters at every count n..1.

    Ties merge the lexicographically smallest pair of clusters.
    """
    n = len(dist)
    clusters: list[tuple[int, ...]] = [(i,) for i in range(n)]
    layers = {n: list(clusters)}

    def linkage(a, b):
        return sum(dist[i][j] for i in a for j in b) / (len(a) * len(b))

    while len(clusters) > 1:
        best = None
        for x, y in itertools.combinations(sorted(clusters), 2):
            key = (linkage(x, y), x, y)
            if best is None or key < best:
                best = key
        _, x, y = best
        clusters = [c for c in clusters if c not in (x, y)]
        clusters.append(tuple(sorted(x + y)))
        clusters.sort()
        layers[len(clusters)] = list(clusters)
    return layers


def receiver_hop_matrix(topo: Topology, receivers: Sequence[str]) -> list[list[float]]:
    rows = []
    for a in receivers:
        d = topo.hop_distances_from(a, undirected=True)
        rows.append([d[topo.node_id(b)] for b in receivers])
    return rows


def quickcast_partition(topo: Topology, load: EdgeLoad, src: str, receivers: Sequence[str], volume: float,
                        p_f: float = 1.1, n_max: int | None = None, update: bool = True) -> list[Partition]:
    """Finest clustering whose trees fit in ``p_f`` times the single-tree weight."""
    if p_f <= 0:
        raise ValueError("partitioning factor must be positive")
    receivers = sorted(receivers)
    n_max = len(receivers) if n_max is None else n_max
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    weights = capacity_aware_weights(load, volume)
    single = min_weight_steiner(topo, weights, src, receivers)
    if n_max >= 2 and len(receivers) >= 2:
        layers = average_linkage_layers(receiver_hop_matrix(topo, receivers))
        for count in range(min(n_max, len(receivers)), 1, -1):
            groups = [tuple(receivers[i] for i in c) for c in layers[count]]
            trial = sum(min_weight_steiner(topo, weights, src, g).weight for g in groups)
            if trial <= p_f * single.weight + TOL:
                parts = []
                for g in groups:
                    w = capacity_aware_weights(load, volume)
                    tree = min_weight_steiner(topo, w, src, g)
                    if update:
                        load.add(tree.edges, volume)
                    parts.append(Partition(g, tree))
                return parts
    if update:
        load.add(single.edges, volume)
    return [Partition(tuple(receivers), single)]


# ----------------------------------------------------- completion estimation

class BandwidthEstimate:
    """Available rate per edge after high-priority traffic is removed."""

    def __init__(self, topo: Topology, background: BackgroundTraffic | None = None):
        self.topo = topo
        self.background = background
        cap = np.asarray(topo.capacity, dtype=float)
        if background is None:
            self.average = cap.copy()
        else:
            self.average = cap - background.block(0, int(background.period.max()) - 1).mean(axis=1)

    @property
    def static(self) -> bool:
        return self.background is None

    def at(self, slot: int) -> np.ndarray:
        if self.background is None:
            return np.asarray(self.topo.capacity, dtype=float)
        return np.maximum(self.topo.capacity - self.background.block(slot, slot)[:, 0], 0.0)


def iris_weights(load: EdgeLoad, bandwidth: BandwidthEstimate, volume: float) -> np.ndarray:
    return (load.raw + volume) / bandwidth.average


def min_completion_times(trees: Sequence[Sequence[int]], volume: float, bandwidth: BandwidthEstimate,
                         t_now: int, slot_width: float = 1.0, horizon: int | None = None) -> list[float]:
    """Slot at which each tree would finish if the transfer had the network to itself.

    Trees of the same transfer share edges under max-min fairness. Runs past
    the horizon are extrapolated at the last rate (inf if that rate is zero).
    """
    n = len(trees)
    if n == 0:
        return []
    if horizon is None:
        floor = min(float(bandwidth.average[list(t)].min()) if len(t) else math.inf for t in trees)
        horizon = int(math.ceil(10 * volume / max(floor * slot_width, 1e-12))) + 1
    residual = np.full(n, float(volume))
    done = [math.inf] * n
    for i, t in enumerate(trees):
        if not len(t):
            done[i] = t_now
            residual[i] = 0.0
    live = [i for i in range(n) if done[i] == math.inf]
    slot = t_now + 1
    rates = np.zeros(n)
    while live and slot <= t_now + horizon:
        avail = bandwidth.at(slot)
        sub = maxmin_rates([trees[i] for i in live], avail, residual[live] / slot_width)
        rates[:] = 0.0
        rates[live] = sub
        if bandwidth.static:
            # Rates hold until the next tree finishes, so jump straight there.
            steps = [math.ceil(residual[i] / (sub[k] * slot_width) - 1e-9) for k, i in enumerate(live) if sub[k] > TOL]
            if not steps:
                break
            jump = max(1, min(steps))
            residual[live] -= sub * slot_width * jump
            slot += jump - 1
        else:
            residual[live] -= sub * slot_width
        for i in live:
            if residual[i] <= TOL * max(1.0, volume):
                residual[i] = 0.0
                done[i] = slot
        live = [i for i in live if done[i] == math.inf]
        slot += 1
    for i in live:
        done[i] = (slot - 1 + residual[i] / (rates[i] * slot_width)) if rates[i] > TOL else math.inf
    return done


def iris_rank_receivers(topo: Topology, load: EdgeLoad, bandwidth: BandwidthEstimate, src: str,
                        receivers: Sequence[str], volume: float, t_now: int,
                        slot_width: float = 1.0) -> dict[str, int]:
    """Rank 1 is the receiver that could finish first on its own tree."""
    receivers = sorted(receivers)
    weights = iris_weights(load, bandwidth, volume)
    trees = [min_weight_steiner(topo, weights, src, [r]).edges for r in receivers]
    kappa = min_completion_times(trees, volume, bandwidth, t_now, slot_width)
    order = sorted(range(len(receivers)), key=lambda i: (kappa[i], receivers[i]))
    return {receivers[i]: rank for rank, i in enumerate(order, start=1)}


@dataclass
class IrisLayer:
    groups: list[tuple[str, ...]]
    trees: list[SteinerTree]
    kappa: list[float]
    score: float
    weight: float


def iris_hierarchy(topo: Topology, load: EdgeLoad, bandwidth: BandwidthEstimate, src: str,
                   receivers: Sequence[str], volume: float, pi: Sequence[int] | None, t_now: int,
                   slot_width: float = 1.0) -> list[IrisLayer]:
    """All layers from the objective-vector base up to a single partition."""
    ranks = iris_rank_receivers(topo, load, bandwidth, src, receivers, volume, t_now, slot_width)
    ordered = sorted(receivers, key=lambda r: ranks[r])
    pi = parse_objective(pi, len(ordered))
    base: list[tuple[str, ...]] = []
    run: list[str] = []
    for r, bit in zip(ordered, pi):
        if bit == 1:
            if run:
                base.append(tuple(run))
                run = []
            base.append((r,))
        else:
            run.append(r)
    if run:
        base.append(tuple(run))

    weights = iris_weights(load, bandwidth, volume)
    layers = []
    groups = base
    while True:
        trees = [min_weight_steiner(topo, weights, src, g) for g in groups]
        kappa = min_completion_times([t.edges for t in trees], volume, bandwidth, t_now, slot_width)
        score = sum(len(g) * (k - t_now) for g, k in zip(groups, kappa))
        layers.append(IrisLayer(list(groups), trees, kappa, score, sum(t.weight for t in trees)))
        if len(groups) == 1:
            break
        groups = [groups[0] + groups[1]] + groups[2:]
    return layers


def choose_layer(layers: Sequence[IrisLayer]) -> IrisLayer:
    best = min(layer.score for layer in layers)
    tied = [layer for layer in layers if layer.score <= best + TOL * max(1.0, abs(best))]
    return min(tied, key=lambda layer: (layer.weight, -len(layer.groups)))


def iris_partition(topo: Topology, load: EdgeLoad, bandwidth: BandwidthEstimate, src: str,
                   receivers: Sequence[str], volume: float, pi: Sequence[int] | str | None = None,
                   t_now: int = 0, slot_width: float = 1.0, update: bool = True) -> list[Partition]:
    layer = choose_layer(iris_hierarchy(topo, load, bandwidth, src, receivers, volume, pi, t_now, slot_width))
    parts = []
    for group in layer.groups:
        tree = min_weight_steiner(topo, iris_weights(load, bandwidth, volume), src, group)
        if update:
            load.add(tree.edges, volume)
        parts.append(Partition(tuple(group), tree))
    return parts


# ------------------------------------------------------------ relaxed model

def uplink_maxmin(uplink: float, caps: Sequence[float]) -> np.ndarray:
    """Max-min shares of one sender uplink among flows with individual caps."""
    routes = [[0]] * len(caps)
    return maxmin_rates(routes, np.array([float(uplink)]), caps)


def partition_average_rate(uplink: float, downlinks: Sequence[float], groups: Sequence[Sequence[int]]) -> float:
    """Mean receiver rate when every group runs one flow capped by its slowest member."""
    caps = [min(downlinks[i] for i in g) for g in groups]
    rates = uplink_maxmin(uplink, caps)
    return float(sum(len(g) * r for g, r in zip(groups, rates)) / len(downlinks))


@dataclass
class RelaxedPartition:
    partitions: int
    groups: list[tuple[int, ...]]
    receiver_rates: list[float]
    average_rate: float


def relaxed_partition(uplink: float, downlinks: Sequence[float]) -> RelaxedPartition:
    """Best split of the form {fastest n-M+1 together} + {M-1 slow singletons}.

    ``downlinks`` must be sorted fastest first. Ties go to fewer partitions.
    """
    n = len(downlinks)
    if n == 0:
        raise ValueError("need at least one receiver")
    if any(d <= 0 for d in downlinks) or uplink <= 0:
        raise ValueError("rates must be positive")
    if any(a < b for a, b in zip(downlinks, downlinks[1:])):
        raise ValueError("downlinks must be sorted in descending order")
    best = None
    for m in range(1, n + 1):
        head = n - m + 1
        groups = [tuple(range(head))] + [(i,) for i in range(head, n)]
        caps = [min(downlinks[i] for i in g) for g in groups]
        rates = uplink_maxmin(uplink, caps)
        per_receiver = [0.0] * n
        for g, r in zip(groups, rates):
            for i in g:
                per_receiver[i] = float(r)
        avg = sum(per_receiver) / n
        if best is None or avg > best.average_rate + 1e-12:
            best = RelaxedPartition(m, groups, per_receiver, avg)
    return best


def aggregate_rates(topo: Topology) -> tuple[dict[str, float], dict[str, float]]:
    """Per node: total outgoing capacity (uplink) and total incoming capacity (downlink)."""
    up = {n: 0.0 for n in topo.nodes}
    down = {n: 0.0 for n in topo.nodes}
    for (u, v), c in zip(topo.edges, topo.capacity):
        up[u] += float(c)
        down[v] += float(c)
    return up, down


def aggregate_lower_bound(topo: Topology, transfers: Iterable, slot_width: float = 1.0) -> list[float]:
    """Per-receiver completion times on the star relaxation of ``topo``.

    Each transfer is treated alone: the sender's summed uplink feeds receivers
    whose downlinks are their summed incoming capacity, with no core limits.
    """
    up, down = aggregate_rates(topo)
    out = []
    for tr in transfers:
        recv = sorted(tr.receivers, key=lambda r: (-down[r], r))
        plan = relaxed_partition(up[tr.source], [down[r] for r in recv])
        out.extend(tr.volume / (rate * slot_width) for rate in plan.receiver_rates)
    return out


# ------------------------------------------------------------------ oracle

def set_partitions(items: Sequence[int]):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]
        yield [[head]] + part


def consecutive_partitions(n: int, k: int):
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = (0,) + cuts + (n,)
        yield [list(range(bounds[i], bounds[i + 1])) for i in range(k)]


def consecutive_optimality_counterexamples(max_receivers: int = 6, rates: Sequence[int] = range(1, 6)):
    """Relaxed instances where no consecutive grouping matches the best grouping
    with the same number of partitions. Returns (checked, counterexamples)."""
    bad = []
    checked = 0
    rates = sorted(rates, reverse=True)
    for n in range(1, max_receivers + 1):
        by_k: dict[int, list[list[list[int]]]] = {}
        for part in set_partitions(list(range(n))):
            by_k.setdefault(len(part), []).append(part)
        for downs in itertools.combinations_with_replacement(rates, n):
            for uplink in rates:
                for k, parts in by_k.items():
                    checked += 1
                    best_any = max(partition_average_rate(uplink, downs, p) for p in parts)
                    best_cons = max(partition_average_rate(uplink, downs, p) for p in consecutive_partitions(n, k))
                    if best_cons < best_any - 1e-9:
                        bad.append((uplink, downs, k, best_any, best_cons))
    return checked, bad
