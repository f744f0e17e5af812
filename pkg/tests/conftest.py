"""Shared fixtures and hand-built graph helpers."""

import numpy as np
import pytest

from skelgrow.edge_scoring import ConfidenceMap
from skelgrow.superpoints import Superpoint, SuperpointGraph


def make_graph(positions, edges):
    """SuperpointGraph over explicit node positions and an explicit
    undirected edge list (pairs of node ids)."""
    positions = np.asarray(positions, dtype=np.float64)
    nodes = [
        Superpoint(id=k, position=positions[k],
                   member_indices=np.asarray([k]), seed_index=k)
        for k in range(len(positions))
    ]
    norm = sorted((min(i, j), max(i, j)) for i, j in edges)
    arr = np.asarray(norm, dtype=np.int64).reshape(-1, 2)
    lengths = (np.linalg.norm(positions[arr[:, 0]] - positions[arr[:, 1]],
                              axis=1)
               if len(arr) else np.zeros(0))
    return SuperpointGraph(nodes=nodes, edges=arr, lengths=lengths)


def uniform_conf(graph, value=1.0):
    return ConfidenceMap(
        values=np.full(graph.num_edges, float(value)), provenance="override")


def conf_from_dict(graph, table, default=0.0):
    """Confidences from {(i, j): score} with unordered pair keys."""
    values = np.full(graph.num_edges, float(default))
    for (i, j), c in table.items():
        values[graph.edge_id(i, j)] = c
    return ConfidenceMap(values=values, provenance="override")


@pytest.fixture
def chain_graph():
    """Vertical 5-node chain, 0 at the bottom, consecutive edges only."""
    positions = [(0.0, 0.0, 0.15 * k) for k in range(5)]
    edges = [(k, k + 1) for k in range(4)]
    return make_graph(positions, edges)
