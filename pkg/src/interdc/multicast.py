"""Forwarding-tree selection for point-to-multipoint transfers without deadlines."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .netgraph import EdgeLoad, InfeasibleError, Topology
from .steiner import SteinerTree, min_weight_steiner


def dccast_weights(load: EdgeLoad, volume: float) -> np.ndarray:
    """Outstanding volume on the edge plus the new transfer's volume."""
    return load.raw + volume


def capacity_aware_weights(load: EdgeLoad, volume: float) -> np.ndarray:
    """Capacity-scaled load plus the new volume scaled the same way."""
    return (load.raw + volume) / load.topo.capacity


def dccast_select_tree(topo: Topology, load: EdgeLoad, src: str, receivers: Sequence[str],
                       volume: float) -> SteinerTree:
    """Tree whose weight is the total load over it if the transfer were added."""
    return min_weight_steiner(topo, dccast_weights(load, volume), src, receivers)


def capacity_aware_select_tree(topo: Topology, load: EdgeLoad, src: str, receivers: Sequence[str],
                               volume: float, update: bool = True) -> SteinerTree:
    tree = min_weight_steiner(topo, capacity_aware_weights(load, volume), src, receivers)
    if update:
        load.add(tree.edges, volume)
    return tree


def parallel_trees_select(topo: Topology, load: EdgeLoad, src: str, receivers: Sequence[str],
                          volume: float, k: int) -> list[SteinerTree]:
    """Up to ``k`` edge-disjoint trees, each found after deleting earlier trees' edges."""
    if k < 1:
        raise ValueError("k must be at least 1")
    weights = capacity_aware_weights(load, volume)
    removed: set[int] = set()
    trees: list[SteinerTree] = []
    for _ in range(k):
        try:
            tree = min_weight_steiner(topo, weights, src, receivers, excluded=removed)
        except InfeasibleError:
            if not trees:
                raise
            break
        trees.append(tree)
        removed.update(tree.edges)
    return trees


def parallel_load_update(load: EdgeLoad, trees: Sequence[SteinerTree], added: float = 0.0,
                         delivered_by_tree: Sequence[float] = ()) -> None:
    """Account a transfer's remaining volume as split evenly over its trees.

    ``added`` is new volume (the full transfer on assignment). Whatever the
    trees delivered, in any proportion, is deducted evenly from all of them.
    """
    if not trees:
        return
    share = (added - float(sum(delivered_by_tree))) / len(trees)
    if share == 0:
        return
    for tree in trees:
        load.add(tree.edges, share)


def assert_edge_disjoint(trees: Sequence[SteinerTree]) -> None:
    seen: set[int] = set()
    for t in trees:
        if seen & set(t.edges):
            raise AssertionError("trees share an edge")
        seen |= set(t.edges)
