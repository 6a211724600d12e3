"""Synthetic tree+motif dataset generator.

Each graph is a uniform random tree joined to one motif (house, cycle or
crane) by a single attachment edge. The motif type is the class label and
the motif edges are the ground-truth explanation.

Motif templates (node indices local to the motif):

* house - the widely used 5-node shape: square 0-1-2-3-0 with a roof node 4
  on corners 0 and 1. 6 edges.
* cycle - a hexagon ring over 6 nodes. 6 edges.
* crane - a stylized 8-node bird: triangle body 0-1-2, neck 2-3-4, tail
  0-5-6 and leg 1-7. 8 edges, connected, one cycle.

Node features are [1, ..., 1, degree]: a constant block plus the node degree
in the last column, so class information lives in the structure rather than
the features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .graphcore import Edge, Graph, GraphError
from .seeds import derive_rng

MOTIF_KINDS = ("house", "cycle", "crane")

_MOTIF_EDGES: dict[str, tuple[Edge, ...]] = {
    "house": ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)),
    "cycle": ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5)),
    "crane": ((0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (0, 5), (5, 6), (1, 7)),
}

_MOTIF_NODES = {"house": 5, "cycle": 6, "crane": 8}


@dataclass(frozen=True)
class Tr3Config:
    num_graphs: int = 3000
    base_nodes_min: int = 8
    base_nodes_max: int = 15
    motif_set: tuple[str, ...] = MOTIF_KINDS
    seed: int = 17
    feature_dim: int = 2

    def __post_init__(self):
        if self.num_graphs <= 0 or self.num_graphs % len(self.motif_set) != 0:
            raise GraphError(
                f"num_graphs must be a positive multiple of {len(self.motif_set)}"
            )
        if self.base_nodes_min < 3 or self.base_nodes_max < self.base_nodes_min:
            raise GraphError("need base_nodes_max >= base_nodes_min >= 3")
        if self.feature_dim < 2:
            raise GraphError("feature_dim must be >= 2 (constant block + degree)")
        if tuple(self.motif_set) != MOTIF_KINDS:
            raise GraphError(f"motif_set is fixed to {MOTIF_KINDS}")


def node_features_from_degrees(edges, node_count: int, feature_dim: int) -> np.ndarray:
    degree = np.zeros(node_count, dtype=np.float64)
    for u, v in edges:
        degree[u] += 1.0
        degree[v] += 1.0
    feats = np.ones((node_count, feature_dim), dtype=np.float64)
    feats[:, -1] = degree
    return feats


def motif_template(kind: str, feature_dim: int = 2) -> Graph:
    """The fixed motif fragment for one class, as a standalone graph."""
    if kind not in _MOTIF_EDGES:
        raise GraphError(f"unknown motif kind {kind!r}; expected one of {MOTIF_KINDS}")
    edges = _MOTIF_EDGES[kind]
    n = _MOTIF_NODES[kind]
    return Graph(
        graph_id=f"motif-{kind}",
        node_count=n,
        edges=edges,
        node_features=node_features_from_degrees(edges, n, feature_dim),
        label=MOTIF_KINDS.index(kind),
        ground_truth_edges=frozenset(edges),
    )


def _random_tree_edges(n: int, rng: np.random.Generator) -> list[Edge]:
    """Uniform random labeled tree via a uniform Pruefer sequence."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    seq = [int(x) for x in rng.integers(0, n, size=n - 2)]
    tree = nx.from_prufer_sequence(seq)
    return [tuple(sorted(e)) for e in tree.edges()]


def generate_graph(cfg: Tr3Config, index: int) -> Graph:
    """Generate graph ``index`` of the dataset (pure in (cfg, index))."""
    label = index % len(cfg.motif_set)
    kind = cfg.motif_set[label]
    rng = derive_rng(cfg.seed, "tr3", index)

    base_n = int(rng.integers(cfg.base_nodes_min, cfg.base_nodes_max + 1))
    tree_edges = _random_tree_edges(base_n, rng)
    motif_edges = [(u + base_n, v + base_n) for u, v in _MOTIF_EDGES[kind]]
    tree_anchor = int(rng.integers(0, base_n))
    motif_anchor = base_n + int(rng.integers(0, _MOTIF_NODES[kind]))
    bridge = (tree_anchor, motif_anchor)

    edges = tree_edges + motif_edges + [bridge]
    n = base_n + _MOTIF_NODES[kind]
    return Graph(
        graph_id=f"tr3-{index:05d}",
        node_count=n,
        edges=tuple(edges),
        node_features=node_features_from_degrees(edges, n, cfg.feature_dim),
        label=label,
        ground_truth_edges=frozenset(motif_edges),
    )


def generate_dataset(cfg: Tr3Config) -> list[Graph]:
    return [generate_graph(cfg, i) for i in range(cfg.num_graphs)]
