"""Per-slot rate allocation over fixed routes.

A route is any set of edges (a path or a tree) that carries one uniform rate
per slot. Rates are in data units per unit time; a slot moves
``slot_width * rate`` units.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .kernels import waterfill
from .netgraph import TOL, Timeline


class SchedulingPolicy(enum.Enum):
    ALAP = "ALAP"
    FCFS = "FCFS"
    SRPT = "SRPT"
    MAXMIN_FAIR = "MAXMIN_FAIR"

    @classmethod
    def parse(cls, name: str) -> "SchedulingPolicy":
        key = name.strip().upper().replace("-", "_")
        aliases = {"MAXMIN": "MAXMIN_FAIR", "FAIR": "MAXMIN_FAIR", "MMF": "MAXMIN_FAIR"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown scheduling policy {name!r}; valid: {valid}") from None


@dataclass
class RouteAllocation:
    request_id: int
    edges: tuple[int, ...]
    volume: float
    deadline: int | None = None
    rates: dict[int, float] = field(default_factory=dict)
    residual: float = 0.0
    order: int = 0
    completed_at: int | None = None

    def __post_init__(self):
        self.edges = tuple(self.edges)
        if not self.residual:
            self.residual = self.volume

    def scheduled_volume(self, slot_width: float = 1.0) -> float:
        return slot_width * sum(self.rates.values())

    def last_slot(self) -> int | None:
        live = [t for t, r in self.rates.items() if r > TOL]
        return max(live) if live else None


def _write(timeline: Timeline, alloc: RouteAllocation, schedule: dict[int, float]) -> None:
    for slot, rate in schedule.items():
        if rate > 0:
            timeline.reserve(alloc.edges, slot, rate)
            alloc.rates[slot] = alloc.rates.get(slot, 0.0) + rate


def alap_plan(timeline: Timeline, edges: Sequence[int], volume: float, deadline: int) -> dict[int, float] | None:
    """Backward fill from the deadline without touching the timeline."""
    if deadline <= timeline.t_now:
        return None
    width = timeline.slot_width
    avail = timeline.bottleneck(edges, timeline.t_now + 1, deadline)
    plan: dict[int, float] = {}
    remaining = volume
    for slot in range(deadline, timeline.t_now, -1):
        if remaining <= TOL:
            break
        rate = float(min(avail[slot - timeline.t_now - 1], remaining / width))
        if rate > TOL:
            plan[slot] = rate
            remaining -= rate * width
    return plan if remaining <= TOL * max(1.0, volume) else None


def alap_allocate(timeline: Timeline, edges: Sequence[int], volume: float, deadline: int,
                  request_id: int = 0, order: int = 0) -> RouteAllocation | None:
    """Place ``volume`` as late as possible before ``deadline``; None when it cannot fit."""
    plan = alap_plan(timeline, edges, volume, deadline)
    if plan is None:
        return None
    alloc = RouteAllocation(request_id, tuple(edges), volume, deadline, order=order)
    _write(timeline, alloc, plan)
    return alloc


def alap_allocate_multipath(timeline: Timeline, paths: Sequence[Sequence[int]], volume: float,
                            deadline: int, request_id: int = 0, order: int = 0) -> list[RouteAllocation] | None:
    """Backward fill over edge-disjoint paths in parallel, slot by slot."""
    seen: set[int] = set()
    for p in paths:
        if seen & set(p):
            raise ValueError("paths must be edge-disjoint")
        seen |= set(p)
    if deadline <= timeline.t_now or not paths:
        return None
    width = timeline.slot_width
    avail = [timeline.bottleneck(p, timeline.t_now + 1, deadline) for p in paths]
    plans: list[dict[int, float]] = [{} for _ in paths]
    remaining = volume
    for slot in range(deadline, timeline.t_now, -1):
        for i in range(len(paths)):
            if remaining <= TOL:
                break
            rate = float(min(avail[i][slot - timeline.t_now - 1], remaining / width))
            if rate > TOL:
                plans[i][slot] = rate
                remaining -= rate * width
        if remaining <= TOL:
            break
    if remaining > TOL * max(1.0, volume):
        return None
    out = []
    for path, plan in zip(paths, plans):
        share = width * sum(plan.values())
        alloc = RouteAllocation(request_id, tuple(path), share, deadline, order=order)
        _write(timeline, alloc, plan)
        out.append(alloc)
    return out


def _move(timeline: Timeline, alloc: RouteAllocation, src_slot: int, dst_slot: int, amount: float) -> None:
    timeline.release(alloc.edges, src_slot, amount)
    timeline.reserve(alloc.edges, dst_slot, amount)
    left = alloc.rates[src_slot] - amount
    if left <= 0:
        del alloc.rates[src_slot]
    else:
        alloc.rates[src_slot] = left
    alloc.rates[dst_slot] = alloc.rates.get(dst_slot, 0.0) + amount


def pull_back(timeline: Timeline, allocations: Sequence[RouteAllocation]) -> None:
    """Fill the next slot with traffic taken from the earliest later slots."""
    nxt = timeline.t_now + 1
    active = sorted((a for a in allocations if a.completed_at is None), key=lambda a: a.order)
    if not active:
        return
    horizon = max((max(a.rates) for a in active if a.rates), default=nxt)
    for slot in range(nxt + 1, horizon + 1):
        for alloc in active:
            rate = alloc.rates.get(slot, 0.0)
            if rate <= TOL:
                continue
            room = float(timeline.bottleneck(alloc.edges, nxt, nxt)[0])
            if room > TOL:
                _move(timeline, alloc, slot, nxt, min(rate, room))


def push_forward(timeline: Timeline, allocations: Sequence[RouteAllocation]) -> None:
    """Move traffic later toward each deadline until no single later move fits.

    Slots from ``t_now + 2`` onward are visited latest first; each allocation,
    in arrival order, moves what it can from that slot into the latest slots
    before its deadline with headroom. Moving traffic only frees capacity at
    earlier slots, which are visited afterwards, so one sweep reaches the
    fixpoint.
    """
    first = timeline.t_now + 2
    active = sorted((a for a in allocations if a.completed_at is None and a.deadline is not None),
                    key=lambda a: a.order)
    if not active:
        return
    horizon = max((max(a.rates) for a in active if a.rates), default=first)
    for slot in range(horizon, first - 1, -1):
        for alloc in active:
            rate = alloc.rates.get(slot, 0.0)
            if rate <= TOL or alloc.deadline <= slot:
                continue
            room = timeline.bottleneck(alloc.edges, slot + 1, alloc.deadline)
            for later in range(alloc.deadline, slot, -1):
                free = float(room[later - slot - 1])
                if free <= TOL:
                    continue
                amount = min(rate, free)
                _move(timeline, alloc, slot, later, amount)
                rate = alloc.rates.get(slot, 0.0)
                if rate <= TOL:
                    break


def walk(timeline: Timeline, allocations: Sequence[RouteAllocation]) -> dict[int, float]:
    """Finalise the next slot: emit rates, charge residuals, advance the clock."""
    slot = timeline.t_now + 1
    width = timeline.slot_width
    emitted: dict[int, float] = {}
    for alloc in allocations:
        if alloc.completed_at is not None:
            continue
        rate = alloc.rates.get(slot, 0.0)
        if rate > 0:
            emitted[alloc.request_id] = emitted.get(alloc.request_id, 0.0) + rate
            alloc.residual -= rate * width
        if alloc.residual <= TOL * max(1.0, alloc.volume):
            alloc.residual = 0.0
            alloc.completed_at = slot
    timeline.advance()
    return emitted


def fcfs_forward_fill(timeline: Timeline, edges: Sequence[int], volume: float,
                      request_id: int = 0, order: int = 0, chunk: int = 64) -> RouteAllocation:
    """Reserve the route's free rate from the next slot onward until ``volume`` fits."""
    width = timeline.slot_width
    alloc = RouteAllocation(request_id, tuple(edges), volume, order=order)
    plan: dict[int, float] = {}
    remaining = volume
    start = timeline.t_now + 1
    idle = 0
    while remaining > TOL * max(1.0, volume):
        avail = timeline.bottleneck(edges, start, start + chunk - 1)
        progressed = False
        for i, free in enumerate(avail):
            if remaining <= TOL * max(1.0, volume):
                break
            rate = min(float(free), remaining / width)
            if rate > TOL:
                plan[start + i] = rate
                remaining -= rate * width
                progressed = True
        idle = 0 if progressed else idle + 1
        if idle > 1000:
            raise RuntimeError("route has no free capacity in the foreseeable horizon")
        start += chunk
    _write(timeline, alloc, plan)
    return alloc


def _csr(routes: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(routes) + 1, dtype=np.int64)
    for i, r in enumerate(routes):
        ptr[i + 1] = ptr[i] + len(r)
    flat = np.fromiter((e for r in routes for e in r), dtype=np.int64, count=int(ptr[-1]))
    return ptr, flat


def maxmin_rates(routes: Sequence[Sequence[int]], available: np.ndarray,
                 caps: Sequence[float] | None = None) -> np.ndarray:
    """Max-min fair rates for routes competing for per-edge available rate."""
    if not routes:
        return np.zeros(0)
    caps_arr = np.full(len(routes), np.inf) if caps is None else np.asarray(caps, dtype=float)
    ptr, flat = _csr(routes)
    return np.asarray(waterfill(ptr, flat, np.asarray(available, dtype=float), caps_arr))


def srpt_slot_rates(routes: Sequence[Sequence[int]], residuals: Sequence[float], arrivals: Sequence[int],
                    available: np.ndarray, slot_width: float = 1.0) -> np.ndarray:
    """Strict priority to the smallest residual; earlier arrival breaks ties."""
    order = sorted(range(len(routes)), key=lambda i: (residuals[i], arrivals[i], i))
    return _greedy(routes, order, residuals, available, slot_width)


def fcfs_slot_rates(routes: Sequence[Sequence[int]], residuals: Sequence[float], arrivals: Sequence[int],
                    available: np.ndarray, slot_width: float = 1.0) -> np.ndarray:
    order = sorted(range(len(routes)), key=lambda i: (arrivals[i], i))
    return _greedy(routes, order, residuals, available, slot_width)


def _greedy(routes, order, residuals, available, slot_width):
    free = np.array(available, dtype=float)
    rates = np.zeros(len(routes))
    for i in order:
        edges = list(routes[i])
        if not edges:
            continue
        rate = min(float(free[edges].min()), residuals[i] / slot_width)
        if rate > TOL:
            rates[i] = rate
            free[edges] -= rate
    return rates
