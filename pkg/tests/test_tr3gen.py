from collections import Counter

import networkx as nx
import numpy as np
import pytest

from dseval.graphcore import GraphError, mask_from_selection
from dseval.evalharness import precision
from dseval.tr3gen import (
    MOTIF_KINDS,
    Tr3Config,
    generate_dataset,
    generate_graph,
    motif_template,
)


def as_nx(g):
    G = nx.Graph()
    G.add_nodes_from(range(g.node_count))
    G.add_edges_from(g.edges)
    return G


class TestMotifTemplates:
    def test_house_edge_count(self):
        assert len(motif_template("house").edges) == 6

    def test_house_node_count(self):
        assert motif_template("house").node_count == 5

    def test_cycle_every_degree_two(self):
        g = motif_template("cycle")
        deg = Counter()
        for u, v in g.edges:
            deg[u] += 1
            deg[v] += 1
        assert all(deg[i] == 2 for i in range(g.node_count))

    def test_crane_shape(self):
        g = motif_template("crane")
        assert g.node_count == 8
        assert len(g.edges) == 8
        assert nx.is_connected(as_nx(g))

    def test_unknown_kind_rejected(self):
        with pytest.raises(GraphError):
            motif_template("star")

    def test_labels_match_kind_order(self):
        for idx, kind in enumerate(MOTIF_KINDS):
            assert motif_template(kind).label == idx


class TestConfigValidation:
    def test_num_graphs_must_balance(self):
        with pytest.raises(GraphError):
            Tr3Config(num_graphs=100)

    def test_base_range_checked(self):
        with pytest.raises(GraphError):
            Tr3Config(num_graphs=3, base_nodes_min=2)
        with pytest.raises(GraphError):
            Tr3Config(num_graphs=3, base_nodes_min=9, base_nodes_max=8)


class TestGenerateDataset:
    def test_class_balance(self):
        ds = generate_dataset(Tr3Config(num_graphs=30, seed=5))
        counts = Counter(g.label for g in ds)
        assert counts == {0: 10, 1: 10, 2: 10}

    def test_deterministic_given_seed(self):
        a = generate_dataset(Tr3Config(num_graphs=12, seed=9))
        b = generate_dataset(Tr3Config(num_graphs=12, seed=9))
        assert all(x == y for x, y in zip(a, b))

    def test_different_seed_differs(self):
        a = generate_dataset(Tr3Config(num_graphs=12, seed=9))
        b = generate_dataset(Tr3Config(num_graphs=12, seed=10))
        assert any(x != y for x, y in zip(a, b))

    def test_ground_truth_matches_motif_template(self):
        ds = generate_dataset(Tr3Config(num_graphs=30, seed=3))
        for g in ds:
            kind = MOTIF_KINDS[g.label]
            template = motif_template(kind)
            assert len(g.ground_truth_edges) == len(template.edges)
            assert g.ground_truth_edges <= g.edge_set

    def test_connected_tree_plus_motif_plus_bridge(self):
        ds = generate_dataset(Tr3Config(num_graphs=30, seed=3))
        for g in ds:
            G = as_nx(g)
            assert nx.is_connected(G)
            # tree edges + motif edges + exactly one bridge
            motif_edges = len(g.ground_truth_edges)
            motif_nodes = motif_template(MOTIF_KINDS[g.label]).node_count
            tree_nodes = g.node_count - motif_nodes
            assert len(g.edges) == (tree_nodes - 1) + motif_edges + 1

    def test_feature_matrix_is_ones_plus_degree(self):
        ds = generate_dataset(Tr3Config(num_graphs=6, seed=2, feature_dim=3))
        for g in ds:
            assert g.node_features.shape == (g.node_count, 3)
            deg = np.zeros(g.node_count)
            for u, v in g.edges:
                deg[u] += 1
                deg[v] += 1
            assert np.array_equal(g.node_features[:, -1], deg)
            assert np.all(g.node_features[:, :-1] == 1.0)

    def test_ground_truth_precision_is_one(self):
        ds = generate_dataset(Tr3Config(num_graphs=9, seed=11))
        for g in ds:
            mask = mask_from_selection(g.graph_id, g.edges, g.ground_truth_edges)
            assert precision(mask, g) == 1.0

    def test_base_size_range_respected(self):
        cfg = Tr3Config(num_graphs=60, seed=1, base_nodes_min=5, base_nodes_max=7)
        for i in range(60):
            g = generate_graph(cfg, i)
            motif_nodes = motif_template(MOTIF_KINDS[g.label]).node_count
            assert 5 <= g.node_count - motif_nodes <= 7
