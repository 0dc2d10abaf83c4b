"""Heuristic-versus-exhaustive comparisons at sizes where exhaustive search is affordable."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .netgraph import Topology, bundled_topology
from .partitioning import consecutive_optimality_counterexamples
from .routing_bwr import bwr_exact, bwr_path_weight, bwrh_trace, bwrhf
from .simkit.engine import DynamicSimulator
from .simkit.trace import generate_trace, preset
from .steiner import exact_steiner_oracle, min_weight_steiner

BWRH_GAP_LIMIT = 0.01
BWRHF_GAP_LIMIT = 0.10


@dataclass
class GapStats:
    """Relative excess (heuristic - optimum) / optimum over arrivals with a non-zero optimum."""

    gaps: list[float] = field(default_factory=list)
    zero_optimum: int = 0
    zero_optimum_missed: int = 0

    def add(self, heuristic: float, optimum: float) -> None:
        if heuristic < optimum - 1e-9:
            raise AssertionError(f"heuristic weight {heuristic} beats the exhaustive optimum {optimum}")
        if optimum <= 0:
            self.zero_optimum += 1
            if heuristic > 0:
                self.zero_optimum_missed += 1
            return
        self.gaps.append((heuristic - optimum) / optimum)

    @property
    def mean(self) -> float:
        return float(np.mean(self.gaps)) if self.gaps else 0.0

    @property
    def max(self) -> float:
        return float(np.max(self.gaps)) if self.gaps else 0.0

    def as_dict(self) -> dict:
        return {"mean": self.mean, "max": self.max, "samples": len(self.gaps),
                "zero_optimum": self.zero_optimum, "zero_optimum_missed": self.zero_optimum_missed}


def bwrh_gap(topo: Topology | None = None, arrivals: int = 1000, rate: float = 10.0, mean_size: float = 50.0,
             seed: int = 0) -> tuple[GapStats, GapStats]:
    """Route unicast flows with the hop-bounded heuristic under max-min sharing and,
    at every arrival, compare it and the Dijkstra fallback with the exhaustive choice."""
    topo = topo or bundled_topology("gscale_standin")
    trace = generate_trace(topo, preset("unicast_flows", arrivals=arrivals, rate=rate, size_mean=mean_size), seed)
    bounded, fallback = GapStats(), GapStats()

    def probe(sim, req, _record):
        flows = sim._unicast_state()
        for rcv in req.receivers:
            optimum = bwr_path_weight(bwr_exact(topo, req.source, rcv, flows), flows)
            bounded.add(bwrh_trace(topo, req.source, rcv, flows).weight, optimum)
            fallback.add(bwr_path_weight(bwrhf(topo, req.source, rcv, flows), flows), optimum)

    DynamicSimulator(topo, "BWRH", seed=seed).run(trace, gap_probe=probe)
    return bounded, fallback


def _random_instance(rng: random.Random, nodes: int, extra_edges: int, terminals: int):
    names = [f"n{i}" for i in range(nodes)]
    edges = set()
    for i in range(1, nodes):
        j = rng.randrange(i)
        edges.add((names[j], names[i]))
        if rng.random() < 0.5:
            edges.add((names[i], names[j]))
    while len(edges) < nodes - 1 + extra_edges:
        a, b = rng.sample(names, 2)
        edges.add((a, b))
    topo = Topology([(a, b, 1.0) for a, b in sorted(edges)])
    weights = np.array([rng.randint(1, 10) for _ in topo.edges], dtype=float)
    root = names[0]
    picks = tuple(rng.sample(names[1:], terminals))
    return topo, weights, root, picks


def steiner_ratio(instances: int = 200, nodes: int = 9, seed: int = 0) -> dict:
    """Heuristic tree weight over the exact optimum on small random digraphs."""
    rng = random.Random(seed)
    ratios = []
    for _ in range(instances):
        topo, weights, root, terms = _random_instance(rng, nodes, nodes, rng.randint(2, 4))
        heur = min_weight_steiner(topo, weights, root, terms).weight
        opt = exact_steiner_oracle(topo, weights, root, terms).weight
        ratios.append(heur / opt if opt > 0 else 1.0)
    arr = np.array(ratios)
    return {"instances": instances, "mean": float(arr.mean()), "min": float(arr.min()), "max": float(arr.max()),
            "optimal_fraction": float(np.mean(arr <= 1 + 1e-9))}


def consecutive_partition_check(max_receivers: int = 6, rates=range(1, 6)) -> dict:
    checked, bad = consecutive_optimality_counterexamples(max_receivers, rates)
    return {"checked": checked, "counterexamples": len(bad), "examples": bad[:5]}


CHECKS = ("bwrh-gap", "steiner-ratio", "iris-theorem1")


def run_check(name: str, **kw) -> tuple[dict, bool]:
    """Returns (statistics, passed)."""
    if name == "bwrh-gap":
        bounded, fallback = bwrh_gap(**kw)
        stats = {"bwrh": bounded.as_dict(), "bwrhf": fallback.as_dict()}
        ok = bounded.mean <= BWRH_GAP_LIMIT and fallback.mean <= BWRHF_GAP_LIMIT
        return stats, ok
    if name == "steiner-ratio":
        stats = steiner_ratio(**kw)
        # the heuristic can never undercut the optimum; anything below 1 is a bug
        return stats, math.isfinite(stats["max"]) and stats["min"] >= 1 - 1e-9
    if name == "iris-theorem1":
        stats = consecutive_partition_check(**kw)
        return stats, stats["counterexamples"] == 0
    raise ValueError(f"unknown check {name!r}; valid: {', '.join(CHECKS)}")
