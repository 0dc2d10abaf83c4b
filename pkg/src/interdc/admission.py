"""Deadline admission: route selection followed by as-late-as-possible placement.

Admitted requests are never evicted; a rejection leaves the timeline exactly
as it was.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .netgraph import TOL, InfeasibleError, Timeline, Topology, shortest_path
from .scheduling import RouteAllocation, alap_allocate, alap_allocate_multipath, alap_plan, _write
from .steiner import SteinerTree, min_weight_steiner


@dataclass
class Admission:
    request_id: int
    admitted: bool
    allocations: list[RouteAllocation] = field(default_factory=list)
    tree: SteinerTree | None = None

    @property
    def routes(self) -> list[tuple[int, ...]]:
        return [a.edges for a in self.allocations]


def _check_deadline(timeline: Timeline, deadline: int | None) -> None:
    if deadline is None or deadline <= timeline.t_now:
        raise ValueError(f"deadline {deadline} is not after t_now={timeline.t_now}")


def load_cost(timeline: Timeline, deadline: int, volume: float) -> np.ndarray:
    """Per-edge cost: load scheduled up to the deadline plus the new volume."""
    return timeline.loads_until(deadline) + volume


def dcroute_admit(timeline: Timeline, request_id: int, src: str, dst: str, volume: float,
                  deadline: int, order: int = 0) -> Admission:
    _check_deadline(timeline, deadline)
    path = shortest_path(timeline.topo, load_cost(timeline, deadline, volume), src, dst)
    alloc = alap_allocate(timeline, path, volume, deadline, request_id, order)
    if alloc is None:
        return Admission(request_id, False)
    return Admission(request_id, True, [alloc])


def disjoint_min_cost_paths(topo: Topology, costs: np.ndarray, src: str, dst: str, k: int) -> list[list[int]]:
    """Up to ``k`` paths, each the cheapest once earlier paths' edges are removed."""
    if k < 1:
        raise ValueError("k must be at least 1")
    removed: set[int] = set()
    paths = []
    for _ in range(k):
        try:
            path = shortest_path(topo, costs, src, dst, excluded=removed)
        except InfeasibleError:
            if not paths:
                raise
            break
        paths.append(path)
        removed.update(path)
    return paths


def mp_dcroute_admit(timeline: Timeline, request_id: int, src: str, dst: str, volume: float,
                     deadline: int, k: int = 2, order: int = 0) -> Admission:
    _check_deadline(timeline, deadline)
    paths = disjoint_min_cost_paths(timeline.topo, load_cost(timeline, deadline, volume), src, dst, k)
    allocs = alap_allocate_multipath(timeline, paths, volume, deadline, request_id, order)
    if allocs is None:
        return Admission(request_id, False)
    return Admission(request_id, True, [a for a in allocs if a.rates])


def ddccast_admit(timeline: Timeline, request_id: int, src: str, receivers: Sequence[str], volume: float,
                  deadline: int, order: int = 0) -> Admission:
    """Tree under weight (load up to deadline + volume); admit if the tree's
    free rate summed over the remaining slots covers the volume."""
    _check_deadline(timeline, deadline)
    weights = load_cost(timeline, deadline, volume)
    tree = min_weight_steiner(timeline.topo, weights, src, receivers)
    edges = list(tree.edges)
    free = timeline.bottleneck(edges, timeline.t_now + 1, deadline)
    if free.sum() * timeline.slot_width < volume - TOL * max(1.0, volume):
        return Admission(request_id, False, tree=tree)
    plan = alap_plan(timeline, edges, volume, deadline)
    if plan is None:  # cannot happen when the sum test passed
        return Admission(request_id, False, tree=tree)
    alloc = RouteAllocation(request_id, tuple(edges), volume, deadline, order=order)
    _write(timeline, alloc, plan)
    return Admission(request_id, True, [alloc], tree=tree)
