from .config import ConfigError, ScenarioConfig
from .engine import (ALL_SCHEMES, DEADLINE_SCHEMES, MULTICAST_SCHEMES, UNICAST_SCHEMES, DeadlineSimulator,
                     DynamicSimulator, RequestRecord, RunResult, SchemeError, SchemeOptions, resolve_scheme,
                     run_scenario)
from .metrics import DEFAULT_PERCENTILE, MetricsReport, compute_metrics, completion_times, expected_bandwidth
from .trace import PRESETS, TraceConfig, TransferRequest, generate_trace, preset, read_trace, write_trace

__all__ = [
    "ALL_SCHEMES", "DEADLINE_SCHEMES", "MULTICAST_SCHEMES", "UNICAST_SCHEMES", "ConfigError",
    "DEFAULT_PERCENTILE", "DeadlineSimulator", "DynamicSimulator", "MetricsReport", "PRESETS",
    "RequestRecord", "RunResult", "ScenarioConfig", "SchemeError", "SchemeOptions", "TraceConfig",
    "TransferRequest", "completion_times", "compute_metrics", "expected_bandwidth", "generate_trace",
    "preset", "read_trace", "resolve_scheme", "run_scenario", "write_trace",
]
