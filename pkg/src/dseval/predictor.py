"""Message-passing graph classifier and its training loop.

The architecture is deliberately generic: sum-aggregation message passing
with a self-loop term, mean global pooling and a linear readout. The readout
is zero-initialized, so an untrained model outputs the uniform distribution
on every input. Message passing accepts per-edge weights (default 1.0),
which is what lets saliency- and mask-style explainers differentiate the
output with respect to individual edges.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoint import ModelCheckpoint
from .graphcore import EdgeMask, Graph, induce_subgraph
from .layers import GraphBatch, GraphEncoder, build_batch, masked_mean
from .seeds import derive_rng


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, step: int):
        super().__init__(f"loss became NaN at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step


@dataclass(frozen=True)
class PredictorConfig:
    hidden_dim: int = 64
    num_layers: int = 3
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    max_epochs: int = 100
    seed: int = 0
    batch_size: int = 64
    test_fraction: float = 0.2

    def __post_init__(self):
        if min(self.hidden_dim, self.num_layers, self.max_epochs, self.batch_size) <= 0:
            raise ValueError("dims, layers, epochs and batch size must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("bad optimizer settings")
        if not (0.0 < self.test_fraction < 1.0):
            raise ValueError("test_fraction must be in (0, 1)")


class GraphClassifier(nn.Module):
    def __init__(self, feature_dim: int, num_classes: int, hidden_dim: int = 64,
                 num_layers: int = 3):
        super().__init__()
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.encoder = GraphEncoder(feature_dim, hidden_dim, num_layers)
        self.readout = nn.Linear(hidden_dim, num_classes)
        nn.init.zeros_(self.readout.weight)
        nn.init.zeros_(self.readout.bias)

    def node_embeddings(self, x, adj, node_mask):
        return self.encoder(x, adj, node_mask)

    def logits(self, x, adj, node_mask):
        pooled = masked_mean(self.node_embeddings(x, adj, node_mask), node_mask)
        return self.readout(pooled)

    def logits_for_batch(self, batch: GraphBatch):
        return self.logits(batch.x, batch.adj, batch.node_mask)

    def forward_graphs(
        self,
        graphs: Sequence[Graph],
        edge_weights: Optional[Sequence[torch.Tensor]] = None,
        max_nodes: Optional[int] = None,
    ) -> torch.Tensor:
        """Class-probability rows for a list of graphs: (B, K)."""
        for g in graphs:
            if g.feature_dim != self.feature_dim:
                raise ValueError(
                    f"graph {g.graph_id} has feature dim {g.feature_dim}, "
                    f"model expects {self.feature_dim}"
                )
        dtype = next(self.parameters()).dtype
        batch = build_batch(graphs, max_nodes=max_nodes, edge_weights=edge_weights,
                            dtype=dtype)
        return torch.softmax(self.logits_for_batch(batch), dim=-1)


def forward(model: GraphClassifier, g: Graph) -> np.ndarray:
    """Class-probability vector for one graph."""
    model.eval()
    with torch.no_grad():
        probs = model.forward_graphs([g])[0]
    return probs.detach().cpu().numpy().astype(np.float64)


def forward_many(model: GraphClassifier, graphs: Sequence[Graph]) -> np.ndarray:
    model.eval()
    with torch.no_grad():
        probs = model.forward_graphs(list(graphs))
    return probs.detach().cpu().numpy().astype(np.float64)


def importance_removal(
    model: GraphClassifier, mask: EdgeMask, g: Graph, target_class: int
) -> float:
    """Removal-based importance: target probability on the induced subgraph."""
    return float(forward(model, induce_subgraph(g, mask))[target_class])


def split_dataset(dataset: Sequence[Graph], test_fraction: float, seed: int):
    rng = derive_rng(seed, "train-test-split")
    order = rng.permutation(len(dataset))
    n_test = max(1, int(round(test_fraction * len(dataset))))
    test_idx = set(order[:n_test].tolist())
    train = [dataset[i] for i in range(len(dataset)) if i not in test_idx]
    test = [dataset[i] for i in sorted(test_idx)]
    return train, test


def _accuracy(model: GraphClassifier, graphs: Sequence[Graph], batch_size=256) -> float:
    hits = 0
    for lo in range(0, len(graphs), batch_size):
        chunk = graphs[lo:lo + batch_size]
        preds = forward_many(model, chunk).argmax(axis=1)
        hits += int(sum(int(p == g.label) for p, g in zip(preds, chunk)))
    return hits / len(graphs)


def train(dataset: Sequence[Graph], cfg: PredictorConfig = PredictorConfig()):
    """Train a classifier; returns (model, checkpoint).

    The 80/20 split is seeded and echoed in the checkpoint so evaluation
    stages can reuse the exact same held-out graphs.
    """
    if not dataset:
        raise ValueError("empty dataset")
    labels = [g.label for g in dataset]
    num_classes = max(labels) + 1
    if min(labels) < 0:
        raise ValueError("labels must be non-negative class indices")

    torch.manual_seed(cfg.seed)
    model = GraphClassifier(dataset[0].feature_dim, num_classes,
                            cfg.hidden_dim, cfg.num_layers)
    train_set, test_set = split_dataset(dataset, cfg.test_fraction, cfg.seed)
    if len(dataset) == 1:
        train_set, test_set = list(dataset), list(dataset)

    max_nodes = max(g.node_count for g in dataset)
    full = build_batch(train_set, max_nodes=max_nodes)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 weight_decay=cfg.weight_decay)
    loss_fn = nn.CrossEntropyLoss()
    shuffle_rng = derive_rng(cfg.seed, "epoch-shuffle")

    model.train()
    for epoch in range(cfg.max_epochs):
        order = shuffle_rng.permutation(len(train_set))
        for step, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = torch.from_numpy(order[lo:lo + cfg.batch_size].copy())
            logits = model.logits(full.x[idx], full.adj[idx], full.node_mask[idx])
            loss = loss_fn(logits, full.labels[idx])
            if torch.isnan(loss):
                raise TrainingDivergedError(epoch=epoch, step=step)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

    model.eval()
    metrics = {
        "train_accuracy": _accuracy(model, train_set),
        "test_accuracy": _accuracy(model, test_set),
        "num_train": len(train_set),
        "num_test": len(test_set),
        "split_seed": cfg.seed,
    }
    config = dict(asdict(cfg), feature_dim=dataset[0].feature_dim,
                  num_classes=num_classes, kind="predictor")
    ckpt = ModelCheckpoint.from_module(model, config=config, metrics=metrics)
    return model, ckpt


def predictor_from_checkpoint(ckpt: ModelCheckpoint) -> GraphClassifier:
    cfg = ckpt.config
    model = GraphClassifier(cfg["feature_dim"], cfg["num_classes"],
                            cfg["hidden_dim"], cfg["num_layers"])
    model.load_state_dict(ckpt.state_dict())
    model.eval()
    return model
