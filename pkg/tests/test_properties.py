"""Randomised invariants across the simulator and the schedulers."""

import random

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from interdc.netgraph import Timeline, Topology, bundled_topology
from interdc.scheduling import alap_allocate, maxmin_rates
from interdc.simkit import SchemeOptions, TransferRequest, compute_metrics, run_scenario
from interdc.simkit.metrics import expected_bandwidth

from .instances import busy_path_timeline, random_route_set, residual_before
from .oracles import is_maxmin, progressive_filling

SEEDS = st.integers(0, 2**32 - 1)
SLOW = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@settings(max_examples=300, deadline=None)
@given(SEEDS)
def test_alap_admits_exactly_when_residual_suffices(seed):
    rng = random.Random(seed)
    tl, path = busy_path_timeline(rng)
    deadline = rng.randint(1, 14)
    room = residual_before(tl, path, deadline)
    volume = rng.choice([room, room * rng.uniform(0.2, 0.99), room * rng.uniform(1.01, 2.0) + 1e-3])
    if volume <= 0:
        volume = 0.5
    before = tl.snapshot()[2].copy()
    alloc = alap_allocate(tl, path, volume, deadline)
    assert (alloc is not None) == (volume <= room + 1e-9)
    if alloc is None:
        assert np.array_equal(tl.snapshot()[2], before)
    else:
        assert sum(alloc.rates.values()) * tl.slot_width == pytest.approx(volume)
        assert max(alloc.rates) <= deadline
        tl.check_capacity()


@settings(max_examples=300, deadline=None)
@given(SEEDS)
def test_maxmin_matches_progressive_filling(seed):
    routes, available, caps = random_route_set(random.Random(seed))
    got = maxmin_rates(routes, np.array(available), caps)
    assert got == pytest.approx(progressive_filling(routes, available, caps), abs=1e-6)
    assert is_maxmin(routes, available, caps, got)


def random_trace(rng, topo, count, receivers, deadlines=False):
    nodes = list(topo.nodes)
    out = []
    arrival = 0
    for i in range(count):
        arrival += rng.randint(0, 3)
        src = rng.choice(nodes)
        dst = tuple(sorted(rng.sample([n for n in nodes if n != src], receivers)))
        deadline = arrival + rng.randint(1, 12) if deadlines else None
        out.append(TransferRequest(i, src, dst, round(rng.uniform(0.2, 6.0), 3), arrival, deadline))
    return out


def diamond():
    return Topology([("a", "b", 1.0), ("b", "d", 0.5), ("a", "c", 0.5), ("c", "d", 1.0), ("b", "c", 1.0),
                     ("d", "a", 1.0), ("c", "a", 1.0)])


def inflow(topo):
    cap = {n: 0.0 for n in topo.nodes}
    for (_, v), c in zip(topo.edges, topo.capacity):
        cap[v] += float(c)
    return cap


@SLOW
@given(SEEDS, st.sampled_from(["MIN_HOP", "BWRH", "MINMAX", "MINSUM", "RANDOM_UNIFORM_SHORTEST"]),
       st.sampled_from(["FCFS", "SRPT", "MAXMIN_FAIR"]))
def test_unicast_runs_complete_within_capacity(seed, scheme, policy):
    rng = random.Random(seed)
    topo = bundled_topology("gscale_standin")
    trace = random_trace(rng, topo, rng.randint(1, 15), 1)
    result = run_scenario(topo, trace, scheme, policy, seed=seed)
    check_dynamic_result(topo, trace, result)


@SLOW
@given(SEEDS, st.sampled_from(["DCCAST", "QUICKCAST", "SINGLE_TREE", "MIN_EDGE_TREE", "IRIS", "PARALLEL_TREES"]),
       st.sampled_from(["FCFS", "SRPT", "MAXMIN_FAIR"]))
def test_multicast_runs_complete_within_capacity(seed, scheme, policy):
    rng = random.Random(seed)
    topo = rng.choice([diamond(), bundled_topology("geant_standin")])
    receivers = rng.randint(1, min(3, topo.num_nodes - 1))
    trace = random_trace(rng, topo, rng.randint(1, 10), receivers)
    result = run_scenario(topo, trace, scheme, policy, SchemeOptions(k_trees=rng.randint(1, 3)), seed=seed)
    check_dynamic_result(topo, trace, result)
    for rec in result.records:
        if rec.partitions:
            flat = [r for p in rec.partitions for r in p]
            assert sorted(flat) == sorted(rec.request.receivers)


def check_dynamic_result(topo, trace, result):
    assert result.max_overload <= 1e-9
    assert result.bandwidth == pytest.approx(expected_bandwidth(result.records), rel=1e-6, abs=1e-9)
    into = inflow(topo)
    for rec in result.records:
        req = rec.request
        assert set(rec.completion) == set(req.receivers)
        for r, done in rec.completion.items():
            # no receiver can take data faster than its links bring it in
            assert done - req.arrival >= req.volume / into[r] - 1e-9
    report = compute_metrics(result)
    report.check()
    assert report.bandwidth >= sum(r.volume for r in trace) - 1e-6


@SLOW
@given(SEEDS, st.sampled_from(["DCROUTE", "MP_DCROUTE", "DDCCAST"]))
def test_deadline_runs_meet_deadlines(seed, scheme):
    rng = random.Random(seed)
    topo = rng.choice([diamond(), bundled_topology("gscale_standin")])
    receivers = rng.randint(1, 3) if scheme == "DDCCAST" else 1
    trace = random_trace(rng, topo, rng.randint(1, 20), receivers, deadlines=True)
    result = run_scenario(topo, trace, scheme, options=SchemeOptions(k_paths=rng.randint(1, 3)))
    report = compute_metrics(result)
    assert report.deadline_misses == 0
    for rec in result.records:
        if rec.admitted:
            assert all(t <= rec.request.deadline for t in rec.completion.values())
            assert sum(rec.delivered) == pytest.approx(rec.request.volume)
        else:
            assert rec.completion == {}
    assert result.bandwidth == pytest.approx(expected_bandwidth(result.records), rel=1e-6, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(SEEDS)
def test_timeline_refuses_overbooking(seed):
    rng = random.Random(seed)
    tl, path = busy_path_timeline(rng)
    slot = rng.randint(1, 12)
    free = min(tl.available_bandwidth(e, slot) for e in path)
    tl.reserve(path, slot, free)
    with pytest.raises(ValueError):
        tl.reserve(path, slot, 1e-3)
    tl.release(path, slot, free)
    assert min(tl.available_bandwidth(e, slot) for e in path) == pytest.approx(free)
    tl.check_capacity()


def test_advance_to_refuses_to_skip_reservations():
    tl = Timeline(Topology([("a", "b", 1.0)]))
    tl.reserve([0], 3, 0.5)
    tl.advance_to(2)
    with pytest.raises(ValueError):
        tl.advance_to(3)
    with pytest.raises(ValueError):
        tl.advance_to(1)
