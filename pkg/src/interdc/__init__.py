"""Simulator for bulk transfers over inter-datacenter networks.

Subpackages and modules: ``netgraph`` (topologies, timelines), ``steiner``,
``routing_bwr``, ``scheduling``, ``admission``, ``multicast``,
``partitioning``, ``simkit`` (traces, engine, metrics, configs) and ``cli``.
"""

from .kernels import BACKEND
from .netgraph import Timeline, Topology, bundled_topology, bundled_topology_names
from .simkit import ScenarioConfig, compute_metrics, generate_trace, run_scenario

__version__ = "0.1.0"

__all__ = ["BACKEND", "ScenarioConfig", "Timeline", "Topology", "bundled_topology", "bundled_topology_names",
           "compute_metrics", "generate_trace", "run_scenario", "__version__"]
