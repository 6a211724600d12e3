"""Canonical graph representation shared by the whole pipeline.

Graphs are small, undirected, attributed, and immutable. Edges are unordered
node-index pairs stored in normalized (min, max) form and sorted
lexicographically, which fixes the tie-breaking order used everywhere
downstream (top-k selection, greedy explainers, edge-weight vectors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

Edge = tuple[int, int]


class GraphError(ValueError):
    """Base error for invalid graph data."""


class IdentityError(GraphError):
    """A mask or sample was applied to a graph it does not belong to."""


class EmptyInputError(GraphError):
    """An operation that needs at least one edge/score received none."""


class ParseError(GraphError):
    """Malformed serialized graph data."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte {byte_offset})")
        self.byte_offset = byte_offset


def normalize_edge(u: int, v: int) -> Edge:
    if u == v:
        raise GraphError(f"self-loop ({u},{v}) is not allowed")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph with a class label.

    ``ground_truth_edges`` marks the edges of the known explanation (the
    planted motif) when the dataset provides one.
    """

    graph_id: str
    node_count: int
    edges: tuple[Edge, ...]
    node_features: np.ndarray
    label: int
    ground_truth_edges: Optional[frozenset[Edge]] = None

    def __post_init__(self):
        if not self.graph_id or any(c.isspace() for c in self.graph_id):
            raise GraphError(f"graph_id must be non-empty and whitespace-free: {self.graph_id!r}")
        if self.node_count <= 0:
            raise GraphError(f"node_count must be positive, got {self.node_count}")
        norm = sorted(normalize_edge(u, v) for u, v in self.edges)
        for u, v in norm:
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise GraphError(f"edge ({u},{v}) out of range for {self.node_count} nodes")
        if len(set(norm)) != len(norm):
            raise GraphError("duplicate edges")
        object.__setattr__(self, "edges", tuple(norm))
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.node_count:
            raise GraphError(
                f"node_features must be ({self.node_count}, F), got {feats.shape}"
            )
        feats = feats.copy()
        feats.setflags(write=False)
        object.__setattr__(self, "node_features", feats)
        if self.label < 0:
            raise GraphError(f"label must be a class index, got {self.label}")
        if self.ground_truth_edges is not None:
            gt = frozenset(normalize_edge(u, v) for u, v in self.ground_truth_edges)
            if not gt <= self.edge_set:
                raise GraphError("ground_truth_edges must be a subset of edges")
            object.__setattr__(self, "ground_truth_edges", gt)

    @property
    def edge_set(self) -> frozenset[Edge]:
        return frozenset(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.graph_id == other.graph_id
            and self.node_count == other.node_count
            and self.edges == other.edges
            and self.label == other.label
            and self.ground_truth_edges == other.ground_truth_edges
            and np.array_equal(self.node_features, other.node_features)
        )


@dataclass(frozen=True)
class EdgeMask:
    """Per-edge scores over a parent graph plus the selected top subset."""

    parent_id: str
    scores: Mapping[Edge, float]
    selected: tuple[Edge, ...]

    def __post_init__(self):
        sel = tuple(sorted(normalize_edge(u, v) for u, v in self.selected))
        if not set(sel) <= set(self.scores):
            raise GraphError("selected edges must be scored edges")
        object.__setattr__(self, "selected", sel)

    @property
    def selected_set(self) -> frozenset[Edge]:
        return frozenset(self.selected)


@dataclass(frozen=True)
class SurrogateSample:
    """One generated in-distribution completion of a conditioning subgraph."""

    parent_id: str
    edges: tuple[Edge, ...]
    log_likelihood: float
    contains_subgraph: bool

    def __post_init__(self):
        object.__setattr__(
            self, "edges", tuple(sorted(normalize_edge(u, v) for u, v in self.edges))
        )
        if not self.contains_subgraph:
            raise GraphError("surrogate must contain its conditioning subgraph")
        if self.log_likelihood > 0.0:
            raise GraphError(f"log_likelihood must be <= 0, got {self.log_likelihood}")


def induce_subgraph(g: Graph, mask: EdgeMask) -> Graph:
    """Keep only the mask's selected edges; nodes and features stay put.

    Isolated nodes are retained (degree 0, features unchanged) so the
    predictor's input shape is stable under edge removal. Re-applying a
    mask to its own induced graph is a no-op (idempotence), so the checks
    require containment rather than exact edge-set equality.
    """
    if mask.parent_id != g.graph_id:
        raise IdentityError(
            f"mask belongs to {mask.parent_id!r}, not {g.graph_id!r}"
        )
    if not g.edge_set <= set(mask.scores):
        raise GraphError("mask scores must cover the parent graph's edges")
    if not mask.selected_set <= g.edge_set:
        raise GraphError("mask selects edges the graph does not have")
    gt = None
    if g.ground_truth_edges is not None:
        gt = g.ground_truth_edges & mask.selected_set
    return Graph(
        graph_id=g.graph_id,
        node_count=g.node_count,
        edges=mask.selected,
        node_features=g.node_features,
        label=g.label,
        ground_truth_edges=gt,
    )


def top_fraction_mask(
    scores: Mapping[Edge, float], ratio: float, parent_id: str
) -> EdgeMask:
    """Select the ceil(ratio * |edges|) highest-scoring edges.

    Ties are broken by lexicographic (min, max) edge order so the selection
    is deterministic for any score vector.
    """
    if not scores:
        raise EmptyInputError("cannot select from an empty score map")
    if not (0.0 < ratio <= 1.0):
        raise GraphError(f"ratio must be in (0, 1], got {ratio}")
    norm_scores = {normalize_edge(u, v): float(s) for (u, v), s in scores.items()}
    k = math.ceil(ratio * len(norm_scores))
    ranked = sorted(norm_scores.items(), key=lambda kv: (-kv[1], kv[0]))
    selected = tuple(e for e, _ in ranked[:k])
    return EdgeMask(parent_id=parent_id, scores=norm_scores, selected=selected)


def mask_from_selection(
    parent_id: str, edges: Iterable[Edge], selected: Iterable[Edge]
) -> EdgeMask:
    """Build an indicator mask (score 1 on selected edges, 0 elsewhere)."""
    all_edges = {normalize_edge(u, v) for u, v in edges}
    sel = {normalize_edge(u, v) for u, v in selected}
    if not sel <= all_edges:
        raise GraphError("selection must be a subset of the given edges")
    scores = {e: (1.0 if e in sel else 0.0) for e in sorted(all_edges)}
    return EdgeMask(parent_id=parent_id, scores=scores, selected=tuple(sorted(sel)))


def complement_mask(g: Graph, mask: EdgeMask) -> EdgeMask:
    """Mask selecting every parent edge the given mask did not select."""
    if mask.parent_id != g.graph_id:
        raise IdentityError(
            f"mask belongs to {mask.parent_id!r}, not {g.graph_id!r}"
        )
    rest = g.edge_set - mask.selected_set
    return mask_from_selection(g.graph_id, g.edges, rest)


# ---------------------------------------------------------------------------
# Serialization: line-oriented text format.
#
#   graph <id> <node_count> <label>
#   feat <i> <v1> <v2> ...        (one per node, in node order)
#   edge <u> <v>                  (one per edge)
#   gt <u> <v>                    (optional ground-truth edges)
#
# A dataset file is the blank-line separated concatenation of graphs.
# ---------------------------------------------------------------------------


def serialize_graph(g: Graph) -> bytes:
    lines = [f"graph {g.graph_id} {g.node_count} {g.label}"]
    for i in range(g.node_count):
        vals = " ".join(repr(float(v)) for v in g.node_features[i])
        lines.append(f"feat {i} {vals}")
    for u, v in g.edges:
        lines.append(f"edge {u} {v}")
    if g.ground_truth_edges is not None:
        for u, v in sorted(g.ground_truth_edges):
            lines.append(f"gt {u} {v}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _split_lines_with_offsets(data: bytes) -> list[tuple[int, str]]:
    out = []
    offset = 0
    for raw in data.split(b"\n"):
        try:
            out.append((offset, raw.decode("utf-8")))
        except UnicodeDecodeError as exc:
            raise ParseError("invalid utf-8", offset + exc.start) from exc
        offset += len(raw) + 1
    return out


def _parse_one(lines: list[tuple[int, str]], start: int) -> tuple[Graph, int]:
    offset, header = lines[start]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "graph":
        raise ParseError(f"expected 'graph <id> <nodes> <label>', got {header!r}", offset)
    try:
        graph_id, node_count, label = parts[1], int(parts[2]), int(parts[3])
    except ValueError:
        raise ParseError(f"bad graph header {header!r}", offset) from None

    feats: dict[int, list[float]] = {}
    edges: list[Edge] = []
    gt: list[Edge] = []
    has_gt = False
    idx = start + 1
    while idx < len(lines) and lines[idx][1].strip():
        off, line = lines[idx]
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "feat":
                feats[int(parts[1])] = [float(x) for x in parts[2:]]
            elif kind == "edge":
                edges.append((int(parts[1]), int(parts[2])))
            elif kind == "gt":
                has_gt = True
                gt.append((int(parts[1]), int(parts[2])))
            else:
                raise ParseError(f"unknown record {kind!r}", off)
        except ParseError:
            raise
        except (ValueError, IndexError):
            raise ParseError(f"malformed line {line!r}", off) from None
        idx += 1

    if sorted(feats) != list(range(node_count)):
        raise ParseError(
            f"graph {graph_id!r} needs feat lines 0..{node_count - 1}", offset
        )
    dims = {len(v) for v in feats.values()}
    if len(dims) != 1 or 0 in dims:
        raise ParseError(f"graph {graph_id!r} has inconsistent feature rows", offset)
    matrix = np.array([feats[i] for i in range(node_count)], dtype=np.float64)
    try:
        g = Graph(
            graph_id=graph_id,
            node_count=node_count,
            edges=tuple(edges),
            node_features=matrix,
            label=label,
            ground_truth_edges=frozenset(gt) if has_gt else None,
        )
    except GraphError as exc:
        raise ParseError(f"graph {graph_id!r}: {exc}", offset) from None
    return g, idx


def parse_graph(data: bytes) -> Graph:
    lines = _split_lines_with_offsets(data)
    start = 0
    while start < len(lines) and not lines[start][1].strip():
        start += 1
    if start == len(lines):
        raise ParseError("empty input", 0)
    g, idx = _parse_one(lines, start)
    for off, line in lines[idx:]:
        if line.strip():
            raise ParseError(f"trailing data {line!r}", off)
    return g


def serialize_dataset(graphs: Iterable[Graph]) -> bytes:
    return b"\n".join(serialize_graph(g) for g in graphs)


def parse_dataset(data: bytes) -> list[Graph]:
    lines = _split_lines_with_offsets(data)
    graphs = []
    idx = 0
    while idx < len(lines):
        if not lines[idx][1].strip():
            idx += 1
            continue
        g, idx = _parse_one(lines, idx)
        graphs.append(g)
    return graphs


def save_dataset(graphs: Iterable[Graph], path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_dataset(graphs))


def load_dataset(path) -> list[Graph]:
    with open(path, "rb") as fh:
        return parse_dataset(fh.read())
