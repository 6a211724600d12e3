"""Shared message-passing backbone and dense batching helpers.

All models run on dense padded tensors: node features ``(B, N, F)``, a
weighted symmetric adjacency ``(B, N, N)`` and a node validity mask
``(B, N)``. Graphs here are tiny (tens of nodes), so dense batching beats
sparse scatter by a wide margin on CPU and keeps everything differentiable
with respect to edge weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .graphcore import Graph


class MessagePassing(nn.Module):
    """One round of h' = act(h W_self + (A h) W_nbr + b)."""

    def __init__(self, in_dim: int, out_dim: int, activation: bool = True):
        super().__init__()
        self.self_lin = nn.Linear(in_dim, out_dim, bias=True)
        self.nbr_lin = nn.Linear(in_dim, out_dim, bias=False)
        self.activation = activation

    def forward(self, h: torch.Tensor, adj: torch.Tensor) -> torch.Tensor:
        out = self.self_lin(h) + self.nbr_lin(torch.bmm(adj, h))
        return torch.relu(out) if self.activation else out


class GraphEncoder(nn.Module):
    """Stack of message-passing layers producing node embeddings.

    ``final_activation=False`` leaves the last layer linear, which is what
    the variational heads need (log-sigma must be able to go negative).
    """

    def __init__(self, in_dim: int, hidden_dim: int, num_layers: int,
                 final_activation: bool = True):
        super().__init__()
        dims = [in_dim] + [hidden_dim] * num_layers
        self.layers = nn.ModuleList(
            MessagePassing(dims[i], dims[i + 1],
                           activation=final_activation or i < num_layers - 1)
            for i in range(num_layers)
        )

    def forward(
        self, x: torch.Tensor, adj: torch.Tensor, node_mask: torch.Tensor
    ) -> torch.Tensor:
        h = x
        keep = node_mask.unsqueeze(-1)
        for layer in self.layers:
            h = layer(h, adj) * keep
        return h


def masked_mean(h: torch.Tensor, node_mask: torch.Tensor) -> torch.Tensor:
    """Mean over valid node rows: (B, N, D), (B, N) -> (B, D)."""
    total = (h * node_mask.unsqueeze(-1)).sum(dim=1)
    return total / node_mask.sum(dim=1, keepdim=True)


def row_normalize_adj(adj: torch.Tensor) -> torch.Tensor:
    """D^-1 A: neighbor sums become neighbor means.

    Keeps multi-hop activations at feature scale; the variational heads need
    this, while the classifier and critic work fine on raw sums.
    """
    deg = adj.sum(dim=-1, keepdim=True)
    return adj / torch.clamp(deg, min=1.0)


@dataclass
class GraphBatch:
    x: torch.Tensor          # (B, N, F)
    adj: torch.Tensor        # (B, N, N)
    node_mask: torch.Tensor  # (B, N)
    sizes: torch.Tensor      # (B,)
    labels: torch.Tensor     # (B,)


def build_batch(
    graphs: Sequence[Graph],
    max_nodes: Optional[int] = None,
    edge_weights: Optional[Sequence[torch.Tensor]] = None,
    extra_node_features: Optional[torch.Tensor] = None,
    dtype: torch.dtype = torch.float32,
) -> GraphBatch:
    """Pad a list of graphs into dense tensors.

    ``edge_weights[b]`` is a 1-D tensor aligned with ``graphs[b].edges``
    (the canonical sorted order); it may require grad, in which case the
    batch adjacency is differentiable with respect to it. Default weight
    is 1.0 per edge. ``extra_node_features`` of shape (B, E) is broadcast
    to every node of the respective graph (used for label conditioning).
    """
    n_max = max_nodes if max_nodes is not None else max(g.node_count for g in graphs)
    bsz = len(graphs)
    feat_dim = graphs[0].feature_dim
    x = torch.zeros(bsz, n_max, feat_dim, dtype=dtype)
    node_mask = torch.zeros(bsz, n_max, dtype=dtype)
    sizes = torch.zeros(bsz, dtype=torch.long)
    labels = torch.zeros(bsz, dtype=torch.long)
    for b, g in enumerate(graphs):
        n = g.node_count
        x[b, :n] = torch.from_numpy(g.node_features.copy()).to(dtype)
        node_mask[b, :n] = 1.0
        sizes[b] = n
        labels[b] = g.label

    if edge_weights is None:
        adj = torch.zeros(bsz, n_max, n_max, dtype=dtype)
        for b, g in enumerate(graphs):
            for u, v in g.edges:
                adj[b, u, v] = 1.0
                adj[b, v, u] = 1.0
    else:
        bs, us, vs, ws = [], [], [], []
        for b, g in enumerate(graphs):
            w = edge_weights[b]
            if w.shape[0] != len(g.edges):
                raise ValueError(
                    f"edge weight vector of length {w.shape[0]} for {len(g.edges)} edges"
                )
            for k, (u, v) in enumerate(g.edges):
                bs.append(b)
                us.append(u)
                vs.append(v)
                ws.append(w[k])
        adj = torch.zeros(bsz, n_max, n_max, dtype=dtype)
        if ws:
            wcat = torch.stack(ws)
            bi = torch.tensor(bs, dtype=torch.long)
            ui = torch.tensor(us, dtype=torch.long)
            vi = torch.tensor(vs, dtype=torch.long)
            adj = adj.index_put((bi, ui, vi), wcat)
            adj = adj.index_put((bi, vi, ui), wcat)

    if extra_node_features is not None:
        extra = extra_node_features.to(dtype).unsqueeze(1).expand(-1, n_max, -1)
        x = torch.cat([x, extra * node_mask.unsqueeze(-1)], dim=-1)

    return GraphBatch(x=x, adj=adj, node_mask=node_mask, sizes=sizes, labels=labels)


def pair_index(n_max: int) -> torch.Tensor:
    """All unordered node pairs (i < j) over n_max padded slots: (P, 2)."""
    pairs = [(i, j) for i in range(n_max) for j in range(i + 1, n_max)]
    return torch.tensor(pairs, dtype=torch.long)


def pair_validity(sizes: torch.Tensor, pairs: torch.Tensor) -> torch.Tensor:
    """(B, P) mask of pairs whose both endpoints are real nodes."""
    n = sizes.unsqueeze(1)
    return ((pairs[:, 0].unsqueeze(0) < n) & (pairs[:, 1].unsqueeze(0) < n)).to(
        torch.float32
    )


def pairs_from_adj(adj: torch.Tensor, pairs: torch.Tensor) -> torch.Tensor:
    """Read the upper-triangle pair weights out of an adjacency: (B, P)."""
    return adj[:, pairs[:, 0], pairs[:, 1]]


def adj_from_pairs(weights: torch.Tensor, pairs: torch.Tensor, n_max: int) -> torch.Tensor:
    """Symmetric adjacency from pair weights (B, P) -> (B, N, N)."""
    bsz = weights.shape[0]
    adj = torch.zeros(bsz, n_max, n_max, dtype=weights.dtype)
    adj[:, pairs[:, 0], pairs[:, 1]] = weights
    adj[:, pairs[:, 1], pairs[:, 0]] = weights
    return adj
