"""Slot-by-slot simulation binding routing, admission and rate allocation."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..admission import dcroute_admit, ddccast_admit, mp_dcroute_admit
from ..multicast import (assert_edge_disjoint, capacity_aware_select_tree, dccast_select_tree,
                         parallel_load_update, parallel_trees_select)
from ..netgraph import TOL, BackgroundTraffic, EdgeLoad, Timeline, Topology
from ..partitioning import BandwidthEstimate, check_partitioning, iris_partition, quickcast_partition
from ..routing_bwr import FlowState, NetworkView, RoutePolicy, bwrh_trace, parse_route_policy, select_path
from ..scheduling import SchedulingPolicy, fcfs_slot_rates, pull_back, push_forward, srpt_slot_rates, walk
from ..kernels import waterfill
from ..steiner import min_weight_steiner
from .trace import TransferRequest

MULTICAST_SCHEMES = ("DCCAST", "QUICKCAST", "SINGLE_TREE", "MIN_EDGE_TREE", "IRIS", "PARALLEL_TREES")
DEADLINE_SCHEMES = ("DCROUTE", "MP_DCROUTE", "DDCCAST")
UNICAST_SCHEMES = tuple(p.value for p in RoutePolicy) + ("P2P_SHORTEST",)
ALL_SCHEMES = UNICAST_SCHEMES + MULTICAST_SCHEMES + DEADLINE_SCHEMES

DEFAULT_POLICY = {
    "DCCAST": SchedulingPolicy.FCFS,
    "P2P_SHORTEST": SchedulingPolicy.FCFS,
    **{s: SchedulingPolicy.ALAP for s in DEADLINE_SCHEMES},
}


class SchemeError(ValueError):
    pass


def resolve_scheme(name: str) -> tuple[str, RoutePolicy | None, object]:
    """Normalise a scheme name; unicast schemes also return their routing policy and metric."""
    raw = name.strip()
    key = raw.upper().replace("-", "_")
    if key in MULTICAST_SCHEMES or key in DEADLINE_SCHEMES:
        return key, None, None
    if key == "P2P_SHORTEST":
        return key, RoutePolicy.MIN_HOP, None
    try:
        policy, metric = parse_route_policy(raw)
    except ValueError:
        raise SchemeError(f"unknown scheme {name!r}; valid: {', '.join(ALL_SCHEMES)}") from None
    label = policy.value if metric is None else f"{policy.value}({metric.value})"
    return label, policy, metric


@dataclass
class SchemeOptions:
    p_f: float = 1.1
    n_max: int | None = None
    k_paths: int = 2
    k_trees: int = 2


@dataclass
class Flow:
    """One group of receivers fed over one or more trees with a shared residual."""

    request: TransferRequest
    receivers: tuple[str, ...]
    routes: list[tuple[int, ...]]
    residual: float
    delivered: list[float] = field(default_factory=list)
    completed_at: int | None = None
    parallel: bool = False

    def __post_init__(self):
        if not self.delivered:
            self.delivered = [0.0] * len(self.routes)


@dataclass
class RequestRecord:
    request: TransferRequest
    admitted: bool = True
    routes: list[tuple[int, ...]] = field(default_factory=list)
    partitions: list[tuple[str, ...]] = field(default_factory=list)
    delivered: list[float] = field(default_factory=list)
    completion: dict[str, int] = field(default_factory=dict)
    fell_back: bool = False
    gap: float | None = None


@dataclass
class RunResult:
    scheme: str
    policy: str
    records: list[RequestRecord]
    bandwidth: float
    slots: int
    runtime: float
    max_overload: float = 0.0


class _RouteTable:
    """Flat view of all active routes, rebuilt only when the flow set changes."""

    def __init__(self, flows: Sequence[Flow], num_edges: int):
        self.flows = list(flows)
        self.routes = [r for f in self.flows for r in f.routes]
        self.owner = np.array([i for i, f in enumerate(self.flows) for _ in f.routes], dtype=np.int64)
        self.lens = np.array([len(r) for r in self.routes], dtype=np.int64)
        self.ptr = np.concatenate(([0], np.cumsum(self.lens))).astype(np.int64)
        self.flat = np.fromiter((e for r in self.routes for e in r), dtype=np.int64, count=int(self.ptr[-1]))
        self.flat_route = np.repeat(np.arange(len(self.routes)), self.lens)
        self.parallel = np.array([f.parallel for f in self.flows for _ in f.routes], dtype=bool)
        self.fanout = np.array([len(f.routes) for f in self.flows for _ in f.routes], dtype=float)
        self.residual = np.array([f.residual for f in self.flows], dtype=float)
        self.delivered = np.array([d for f in self.flows for d in f.delivered], dtype=float)
        self.arrivals = [(f.request.arrival, f.request.id) for f in self.flows]
        self.num_edges = num_edges

    def per_edge(self, per_route: np.ndarray) -> np.ndarray:
        return np.bincount(self.flat, weights=per_route[self.flat_route], minlength=self.num_edges)

    def sync(self) -> None:
        """Copy residuals and deliveries back onto the flow objects."""
        k = 0
        for i, f in enumerate(self.flows):
            f.residual = float(self.residual[i])
            n = len(f.routes)
            f.delivered = [float(x) for x in self.delivered[k:k + n]]
            k += n

    def rates(self, policy: SchedulingPolicy, avail: np.ndarray, width: float) -> np.ndarray:
        caps = self.residual[self.owner] / width
        if policy is SchedulingPolicy.MAXMIN_FAIR:
            rates = np.asarray(waterfill(self.ptr, self.flat, avail, caps), dtype=float)
        else:
            residuals = self.residual[self.owner].tolist()
            arrivals = [self.arrivals[o] for o in self.owner]
            fn = srpt_slot_rates if policy is SchedulingPolicy.SRPT else fcfs_slot_rates
            rates = np.asarray(fn(self.routes, residuals, arrivals, avail, width), dtype=float)
        # A flow split over several trees may not move more than its residual.
        per_flow = np.bincount(self.owner, weights=rates, minlength=len(self.flows))
        limit = self.residual / width
        over = per_flow > limit + TOL
        if over.any():
            scale = np.where(over, limit / np.where(over, per_flow, 1.0), 1.0)
            rates = rates * scale[self.owner]
        return rates


class DynamicSimulator:
    """Non-deadline schemes: routes are fixed at arrival, rates recomputed every slot."""

    def __init__(self, topo: Topology, scheme: str, policy: SchedulingPolicy | None = None,
                 options: SchemeOptions | None = None, background: BackgroundTraffic | None = None,
                 slot_width: float = 1.0, seed: int = 0):
        self.topo = topo
        self.scheme, self.route_policy, self.metric = resolve_scheme(scheme)
        if self.scheme in DEADLINE_SCHEMES:
            raise SchemeError(f"{self.scheme} needs the deadline simulator")
        base = self.scheme.split("(")[0]
        self.policy = policy or DEFAULT_POLICY.get(base, SchedulingPolicy.MAXMIN_FAIR)
        if self.policy is SchedulingPolicy.ALAP:
            raise SchemeError("ALAP placement applies to deadline schemes only")
        self.options = options or SchemeOptions()
        self.background = background
        self.bandwidth_estimate = BandwidthEstimate(topo, background)
        self.width = slot_width
        self.rng = random.Random(seed)
        self.load = EdgeLoad(topo)
        self.flows: list[Flow] = []
        self.t_now = 0
        self.last_rate = np.zeros(topo.num_edges)

    # ---- placement
    def _unicast_state(self) -> list[FlowState]:
        states = []
        for f in self.flows:
            for r in f.routes:
                states.append(FlowState(f.request.id, r, f.residual))
        return states

    def place(self, req: TransferRequest, record: RequestRecord) -> list[Flow]:
        s = self.scheme
        opts = self.options
        if self.route_policy is not None:
            out = []
            for rcv in req.receivers:
                view = NetworkView(self.topo, self._unicast_state(), self.last_rate)
                if self.route_policy is RoutePolicy.BWRH:
                    trace = bwrh_trace(self.topo, req.source, rcv, view.flows)
                    path, record.fell_back = trace.path, record.fell_back or trace.fell_back
                else:
                    path = select_path(self.route_policy, self.topo, req.source, rcv, view, req.volume,
                                       metric=self.metric, rng=self.rng)
                flow = Flow(req, (rcv,), [tuple(path)], req.volume)
                self.load.add(path, req.volume)
                self.flows.append(flow)
                out.append(flow)
            return out
        if s == "DCCAST":
            tree = dccast_select_tree(self.topo, self.load, req.source, req.receivers, req.volume)
            self.load.add(tree.edges, req.volume)
            groups = [(req.receivers, [tree.edges])]
        elif s == "MIN_EDGE_TREE":
            tree = min_weight_steiner(self.topo, np.ones(self.topo.num_edges), req.source, req.receivers)
            self.load.add(tree.edges, req.volume)
            groups = [(req.receivers, [tree.edges])]
        elif s == "SINGLE_TREE":
            tree = capacity_aware_select_tree(self.topo, self.load, req.source, req.receivers, req.volume)
            groups = [(req.receivers, [tree.edges])]
        elif s == "QUICKCAST":
            parts = quickcast_partition(self.topo, self.load, req.source, req.receivers, req.volume,
                                        opts.p_f, opts.n_max)
            check_partitioning(parts, req.receivers)
            groups = [(p.receivers, [p.tree.edges]) for p in parts]
        elif s == "IRIS":
            parts = iris_partition(self.topo, self.load, self.bandwidth_estimate, req.source, req.receivers,
                                   req.volume, req.objective, self.t_now, self.width)
            check_partitioning(parts, req.receivers)
            groups = [(p.receivers, [p.tree.edges]) for p in parts]
        elif s == "PARALLEL_TREES":
            trees = parallel_trees_select(self.topo, self.load, req.source, req.receivers, req.volume,
                                          opts.k_trees)
            assert_edge_disjoint(trees)
            parallel_load_update(self.load, trees, added=req.volume)
            flow = Flow(req, tuple(req.receivers), [t.edges for t in trees], req.volume, parallel=True)
            self.flows.append(flow)
            return [flow]
        else:
            raise SchemeError(f"scheme {s} is not a dynamic scheme")
        out = []
        for receivers, routes in groups:
            flow = Flow(req, tuple(receivers), [tuple(r) for r in routes], req.volume)
            self.flows.append(flow)
            out.append(flow)
        return out

    # ---- main loop
    def run(self, trace: Sequence[TransferRequest], gap_probe: Callable | None = None,
            max_slots: int = 10**7) -> RunResult:
        start = time.perf_counter()
        pending = sorted(trace, key=lambda r: (r.arrival, r.id))
        records = {r.id: RequestRecord(r) for r in pending}
        placed: dict[int, list[Flow]] = {}
        cursor = 0
        bandwidth = 0.0
        overload = 0.0
        slots = 0
        cap = np.asarray(self.topo.capacity, dtype=float)
        table = _RouteTable([], self.topo.num_edges)
        while cursor < len(pending) or self.flows:
            if not self.flows and pending[cursor].arrival > self.t_now:
                self.t_now = pending[cursor].arrival
            if cursor < len(pending) and pending[cursor].arrival <= self.t_now:
                table.sync()
                while cursor < len(pending) and pending[cursor].arrival <= self.t_now:
                    req = pending[cursor]
                    cursor += 1
                    if gap_probe is not None:
                        gap_probe(self, req, records[req.id])
                    placed[req.id] = self.place(req, records[req.id])
                table = _RouteTable(self.flows, self.topo.num_edges)
            slot = self.t_now + 1
            avail = cap if self.background is None else np.maximum(
                cap - self.background.block(slot, slot)[:, 0], 0.0)
            rates = table.rates(self.policy, avail, self.width)
            used = table.per_edge(rates)
            overload = max(overload, float((used - avail).max(initial=0.0)))
            self.last_rate = used
            moved = rates * self.width
            table.delivered += moved
            bandwidth += float(moved @ table.lens)
            per_flow = np.bincount(table.owner, weights=moved, minlength=len(table.flows))
            table.residual -= per_flow
            # parallel trees shed what the whole group delivered evenly across its trees
            shed = np.where(table.parallel, per_flow[table.owner] / table.fanout, moved)
            self.load.raw -= table.per_edge(shed)
            np.maximum(self.load.raw, 0.0, out=self.load.raw)
            volumes = np.array([f.request.volume for f in table.flows])
            done = table.residual <= TOL * np.maximum(1.0, volumes)
            if done.any():
                table.residual[done] = 0.0
                table.sync()
                for fi in np.flatnonzero(done):
                    flow = table.flows[fi]
                    flow.completed_at = slot
                    rec = records[flow.request.id]
                    for rcv in flow.receivers:
                        rec.completion[rcv] = slot
                self.flows = [f for f, d in zip(table.flows, done) if not d]
                table = _RouteTable(self.flows, self.topo.num_edges)
            self.t_now = slot
            slots += 1
            if slots > max_slots:
                raise RuntimeError("simulation did not drain within the slot budget")
        table.sync()
        for rid, flows in placed.items():
            rec = records[rid]
            for f in flows:
                rec.routes.extend(f.routes)
                rec.delivered.extend(f.delivered)
                rec.partitions.append(f.receivers)
        return RunResult(self.scheme, self.policy.value, [records[r.id] for r in sorted(trace, key=lambda r: r.id)],
                         bandwidth, slots, time.perf_counter() - start, overload)


class DeadlineSimulator:
    """Deadline schemes: admission with as-late-as-possible reservations."""

    def __init__(self, topo: Topology, scheme: str, options: SchemeOptions | None = None,
                 background: BackgroundTraffic | None = None, slot_width: float = 1.0):
        self.topo = topo
        self.scheme = scheme.strip().upper().replace("-", "_")
        if self.scheme not in DEADLINE_SCHEMES:
            raise SchemeError(f"{scheme} is not a deadline scheme; valid: {', '.join(DEADLINE_SCHEMES)}")
        self.options = options or SchemeOptions()
        self.timeline = Timeline(topo, slot_width, background=background)

    def admit(self, req: TransferRequest):
        tl = self.timeline
        if self.scheme == "DDCCAST":
            return ddccast_admit(tl, req.id, req.source, req.receivers, req.volume, req.deadline, order=req.id)
        if len(req.receivers) != 1:
            raise SchemeError(f"{self.scheme} handles single-receiver requests only")
        dst = req.receivers[0]
        if self.scheme == "DCROUTE":
            return dcroute_admit(tl, req.id, req.source, dst, req.volume, req.deadline, order=req.id)
        return mp_dcroute_admit(tl, req.id, req.source, dst, req.volume, req.deadline,
                                k=self.options.k_paths, order=req.id)

    def run(self, trace: Sequence[TransferRequest], max_slots: int = 10**7) -> RunResult:
        start = time.perf_counter()
        if any(r.deadline is None for r in trace):
            raise SchemeError(f"{self.scheme} needs a deadline on every request")
        tl = self.timeline
        pending = sorted(trace, key=lambda r: (r.arrival, r.id))
        records = {r.id: RequestRecord(r) for r in pending}
        active = []
        by_request: dict[int, list] = {}
        cursor = 0
        bandwidth = 0.0
        slots = 0
        while cursor < len(pending) or active:
            if not active and pending[cursor].arrival > tl.t_now:
                tl.advance_to(pending[cursor].arrival)
            while cursor < len(pending) and pending[cursor].arrival <= tl.t_now:
                req = pending[cursor]
                cursor += 1
                if req.deadline <= tl.t_now:
                    records[req.id].admitted = False
                    continue
                outcome = self.admit(req)
                rec = records[req.id]
                rec.admitted = outcome.admitted
                if outcome.admitted:
                    active.extend(outcome.allocations)
                    by_request[req.id] = outcome.allocations
                    rec.routes = [a.edges for a in outcome.allocations]
                    rec.partitions = [tuple(req.receivers)]
            pull_back(tl, active)
            push_forward(tl, active)
            slot = tl.t_now + 1
            for a in active:
                bandwidth += a.rates.get(slot, 0.0) * tl.slot_width * len(a.edges)
            walk(tl, active)
            active = [a for a in active if a.completed_at is None]
            slots += 1
            if slots > max_slots:
                raise RuntimeError("simulation did not drain within the slot budget")
        for rid, allocs in by_request.items():
            rec = records[rid]
            done = max(a.completed_at for a in allocs)
            rec.delivered = [a.volume - a.residual for a in allocs]
            for rcv in rec.request.receivers:
                rec.completion[rcv] = done
        tl.check_capacity()
        return RunResult(self.scheme, SchedulingPolicy.ALAP.value,
                         [records[r.id] for r in sorted(trace, key=lambda r: r.id)],
                         bandwidth, slots, time.perf_counter() - start)


def run_scenario(topo: Topology, trace: Sequence[TransferRequest], scheme: str,
                 policy: str | SchedulingPolicy | None = None, options: SchemeOptions | None = None,
                 background: BackgroundTraffic | None = None, slot_width: float = 1.0,
                 seed: int = 0) -> RunResult:
    key = scheme.strip().upper().replace("-", "_")
    if isinstance(policy, str):
        policy = SchedulingPolicy.parse(policy)
    if key in DEADLINE_SCHEMES:
        if policy not in (None, SchedulingPolicy.ALAP):
            raise SchemeError(f"{key} schedules with ALAP only")
        return DeadlineSimulator(topo, key, options, background, slot_width).run(trace)
    return DynamicSimulator(topo, scheme, policy, options, background, slot_width, seed).run(trace)
