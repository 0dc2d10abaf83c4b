"""Completion-time and bandwidth statistics over a finished run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

DEFAULT_PERCENTILE = 99.9


@dataclass
class MetricsReport:
    scheme: str
    policy: str
    requests: int
    admitted: int
    admitted_ratio: float
    admitted_traffic_ratio: float
    receivers: int
    mean: float
    median: float
    tail: float
    percentile: float
    bandwidth: float
    deadline_misses: int
    slots: int
    bwrh_fallbacks: int = 0
    runtime: float = 0.0
    completion_times: list[float] = field(default_factory=list, repr=False)

    def summary(self, include_runtime: bool = True) -> dict:
        out = asdict(self)
        out.pop("completion_times")
        if not include_runtime:
            out.pop("runtime")
        return out

    def check(self) -> None:
        """Internal consistency checks that every report must pass."""
        if self.receivers and not (self.tail >= self.median - 1e-12 and self.median >= 0):
            raise AssertionError("expected tail >= median >= 0")


def percentile(values, q: float) -> float:
    if len(values) == 0:
        return math.nan
    # nearest-rank upper interpolation keeps the tail an observed value
    return float(np.percentile(np.asarray(values, dtype=float), q, method="higher"))


def completion_times(records) -> list[float]:
    """Per-receiver completion minus arrival, for admitted requests, in id order."""
    out = []
    for rec in records:
        if not rec.admitted:
            continue
        for rcv in rec.request.receivers:
            done = rec.completion.get(rcv)
            if done is not None:
                out.append(float(done - rec.request.arrival))
    return out


def compute_metrics(result, percentile_q: float = DEFAULT_PERCENTILE) -> MetricsReport:
    if not 0 < percentile_q <= 100:
        raise ValueError("percentile must lie in (0, 100]")
    records = result.records
    times = completion_times(records)
    admitted = [r for r in records if r.admitted]
    total_volume = sum(r.request.volume for r in records)
    admitted_volume = sum(r.request.volume for r in admitted)
    misses = 0
    for r in admitted:
        if r.request.deadline is None:
            continue
        if any(r.completion.get(x) is None or r.completion[x] > r.request.deadline for x in r.request.receivers):
            misses += 1
    return MetricsReport(
        scheme=result.scheme,
        policy=result.policy,
        requests=len(records),
        admitted=len(admitted),
        admitted_ratio=len(admitted) / len(records) if records else math.nan,
        admitted_traffic_ratio=admitted_volume / total_volume if total_volume else math.nan,
        receivers=len(times),
        mean=float(np.mean(times)) if times else math.nan,
        median=percentile(times, 50),
        tail=percentile(times, percentile_q),
        percentile=percentile_q,
        bandwidth=float(result.bandwidth),
        deadline_misses=misses,
        slots=result.slots,
        bwrh_fallbacks=sum(1 for r in records if r.fell_back),
        runtime=result.runtime,
        completion_times=times,
    )


def expected_bandwidth(records) -> float:
    """Volume times edge count over every route, from the per-route delivery log."""
    total = 0.0
    for rec in records:
        for route, amount in zip(rec.routes, rec.delivered):
            total += amount * len(route)
    return total

