"""Transfer requests, synthetic trace generation, and the trace file format."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from ..netgraph import Topology, min_hop_path


@dataclass(frozen=True)
class TransferRequest:
    id: int
    source: str
    receivers: tuple[str, ...]
    volume: float
    arrival: int
    deadline: int | None = None
    objective: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.volume <= 0:
            raise ValueError(f"request {self.id}: volume must be positive")
        if not self.receivers:
            raise ValueError(f"request {self.id}: needs at least one receiver")
        if self.source in self.receivers:
            raise ValueError(f"request {self.id}: source cannot also receive")
        if self.deadline is not None and self.deadline <= self.arrival:
            raise ValueError(f"request {self.id}: deadline must come after arrival")
        if self.objective is not None and len(self.objective) != len(self.receivers):
            raise ValueError(f"request {self.id}: objective vector length differs from receiver count")

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "arrival": self.arrival,
            "src": self.source,
            "receivers": list(self.receivers),
            "volume": self.volume,
        }
        if self.deadline is not None:
            rec["deadline"] = self.deadline
        if self.objective is not None:
            rec["objective_vector"] = "".join(str(b) for b in self.objective)
        return rec

    @classmethod
    def from_record(cls, rec: dict, default_id: int = 0) -> "TransferRequest":
        receivers = rec.get("receivers", rec.get("dst"))
        if isinstance(receivers, str):
            receivers = [receivers]
        obj = rec.get("objective_vector")
        return cls(
            id=int(rec.get("id", default_id)),
            source=str(rec["src"]),
            receivers=tuple(str(r) for r in receivers),
            volume=float(rec["volume"]),
            arrival=int(rec["arrival"]),
            deadline=None if rec.get("deadline") is None else int(rec["deadline"]),
            objective=None if not obj else tuple(int(c) for c in str(obj)),
        )


def write_trace(path: str | Path, trace: Iterable[TransferRequest]) -> None:
    with open(path, "w") as fh:
        for req in trace:
            fh.write(json.dumps(req.to_record(), sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[TransferRequest]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                out.append(TransferRequest.from_record(json.loads(line), default_id=len(out)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad trace record ({exc})") from None
    return out


@dataclass(frozen=True)
class TraceConfig:
    """Parameters of the synthetic workload.

    ``demand`` picks how volumes are drawn: ``size`` uses the size
    distribution; ``window`` draws an exponential with mean equal to a fixed
    fraction of the slots before the deadline; ``capacity_window`` scales that
    by the bottleneck capacity of the min-hop path.
    """

    arrivals: int = 100
    rate: float = 1.0
    receivers: int = 1
    size_dist: str = "exponential"
    size_mean: float = 20.0
    size_min: float = 2.0
    size_cap: float = 2000.0
    size_offset: float = 0.0
    cdf_file: str | None = None
    deadlines: bool = False
    deadline_mean: float = 10.0
    demand: str = "size"
    demand_fraction: float = 1 / 8
    objective: str | None = None

    def validate(self) -> None:
        if self.rate < 0 or not math.isfinite(self.rate):
            raise ValueError("arrival rate must be a non-negative finite number")
        if self.arrivals < 0:
            raise ValueError("number of arrivals must be non-negative")
        if self.receivers < 1:
            raise ValueError("need at least one receiver per transfer")
        if self.size_dist not in ("exponential", "pareto", "empirical", "fixed"):
            raise ValueError(f"unknown size distribution {self.size_dist!r}")
        if self.size_dist == "pareto" and not self.size_mean > self.size_min > 0:
            raise ValueError("pareto needs mean > min > 0")
        if self.size_dist == "empirical" and not self.cdf_file:
            raise ValueError("empirical sizes need a cdf_file; no built-in substitute is used")
        if self.demand not in ("size", "window", "capacity_window"):
            raise ValueError(f"unknown demand model {self.demand!r}")
        if self.demand != "size" and not self.deadlines:
            raise ValueError("deadline-based demand needs deadlines enabled")


PRESETS: dict[str, TraceConfig] = {
    # unicast flows for routing comparisons
    "unicast_flows": TraceConfig(rate=10.0, size_mean=50.0, size_cap=500.0, receivers=1),
    # single-receiver deadline transfers sized against the min-hop capacity
    "deadline_unicast": TraceConfig(receivers=1, deadlines=True, deadline_mean=10.0,
                                    demand="capacity_window", demand_fraction=1 / 8),
    # multicast transfers; deadlines optional, sized against the window when on
    "p2mp": TraceConfig(rate=1.0, receivers=3, size_mean=20.0, size_offset=10.0),
    "p2mp_deadline": TraceConfig(rate=1.0, receivers=3, deadlines=True, deadline_mean=10.0,
                                 demand="window", demand_fraction=1 / 8),
    # multicast transfers for partitioning experiments
    "p2mp_partitioned": TraceConfig(rate=1.0, receivers=4, size_mean=20.0),
}


def preset(name: str, **overrides) -> TraceConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; valid: {', '.join(sorted(PRESETS))}") from None
    known = {f.name for f in fields(TraceConfig)}
    bad = set(overrides) - known
    if bad:
        raise ValueError(f"unknown trace settings: {', '.join(sorted(bad))}")
    return replace(base, **overrides)


def pareto_shape(mean: float, minimum: float) -> float:
    """Shape giving the requested mean for a Pareto with the given minimum."""
    return mean / (mean - minimum)


def load_cdf(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    values, probs = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            v, p = line.replace(",", " ").split()[:2]
            values.append(float(v))
            probs.append(float(p))
    values_arr, probs_arr = np.array(values), np.array(probs)
    if len(values_arr) < 2 or np.any(np.diff(probs_arr) < 0) or not math.isclose(probs_arr[-1], 1.0):
        raise ValueError(f"{path}: CDF must be non-decreasing and end at 1")
    return values_arr, probs_arr


def draw_sizes(cfg: TraceConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if cfg.size_dist == "exponential":
        return rng.exponential(cfg.size_mean, size=n) + cfg.size_offset
    if cfg.size_dist == "fixed":
        return np.full(n, cfg.size_mean)
    if cfg.size_dist == "pareto":
        alpha = pareto_shape(cfg.size_mean, cfg.size_min)
        return np.minimum(cfg.size_min * (1 + rng.pareto(alpha, size=n)), cfg.size_cap) + cfg.size_offset
    values, probs = load_cdf(cfg.cdf_file)
    return np.interp(rng.uniform(size=n), probs, values) + cfg.size_offset


def _min_hop_bottleneck(topo: Topology, src: str, dst: str) -> float:
    path = min_hop_path(topo, src, dst)
    return float(topo.capacity[path].min())


def generate_trace(topo: Topology, cfg: TraceConfig, seed: int) -> list[TransferRequest]:
    """Poisson arrivals, uniform endpoints, and volumes per the configuration."""
    cfg.validate()
    if cfg.rate == 0 or cfg.arrivals == 0:
        return []
    if cfg.receivers >= topo.num_nodes:
        raise ValueError(f"{cfg.receivers} receivers need more than {topo.num_nodes} nodes")
    rng = np.random.default_rng(seed)
    n = cfg.arrivals
    times = np.cumsum(rng.exponential(1 / cfg.rate, size=n))
    sizes = draw_sizes(cfg, rng, n)
    nodes = list(topo.nodes)
    objective = None if cfg.objective is None else tuple(int(c) for c in cfg.objective)
    out = []
    for i in range(n):
        src = nodes[int(rng.integers(len(nodes)))]
        others = [x for x in nodes if x != src]
        picks = rng.choice(len(others), size=cfg.receivers, replace=False)
        receivers = tuple(sorted(others[int(j)] for j in picks))
        arrival = int(math.floor(times[i]))
        deadline = None
        volume = float(sizes[i])
        if cfg.deadlines:
            deadline = arrival + max(1, int(math.ceil(rng.exponential(cfg.deadline_mean))))
            window = deadline - arrival
            if cfg.demand == "window":
                volume = float(rng.exponential(cfg.demand_fraction * window))
            elif cfg.demand == "capacity_window":
                cap = min(_min_hop_bottleneck(topo, src, r) for r in receivers)
                volume = float(rng.exponential(cfg.demand_fraction * cap * window))
            volume = max(volume, 1e-3)
        out.append(TransferRequest(i, src, receivers, volume, arrival, deadline, objective))
    return out


def trace_config_dict(cfg: TraceConfig) -> dict:
    return asdict(cfg)
