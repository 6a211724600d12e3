"""Edge-attribution explainers for a trained graph classifier.

Six explainers spanning the gradient, perturbation, optimization and random
families. All of them emit one score per parent edge and an EdgeMask whose
selected set is the top fraction of edges by score (deterministic
lexicographic tie-breaking via graphcore.top_fraction_mask).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch

from .graphcore import Edge, EdgeMask, Graph, induce_subgraph, mask_from_selection, top_fraction_mask
from .layers import build_batch, masked_mean
from .predictor import GraphClassifier, forward, forward_many
from .seeds import derive_rng

EXPLAINER_KINDS = ("sa", "gradcam", "maskopt", "occlusion", "screener", "random")


class MaskOptimizationError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"mask optimization loss became NaN at step {step}")
        self.step = step


@dataclass(frozen=True)
class ExplainerConfig:
    kind: str = "sa"
    mask_ratio: float = 0.15
    maskopt_steps: int = 200
    maskopt_lr: float = 0.01
    maskopt_sparsity_coeff: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if self.kind not in EXPLAINER_KINDS:
            raise ValueError(f"unknown explainer {self.kind!r}")
        if not (0.0 < self.mask_ratio <= 1.0):
            raise ValueError("mask_ratio must be in (0, 1]")


def _score_mask(g: Graph, scores: dict[Edge, float], ratio: float) -> EdgeMask:
    return top_fraction_mask(scores, ratio, g.graph_id)


def sa_scores(model: GraphClassifier, g: Graph, target_class: int) -> dict[Edge, float]:
    """|d logit_target / d edge_weight| at all edge weights = 1."""
    model.eval()
    weights = torch.ones(len(g.edges), requires_grad=True)
    batch = build_batch([g], edge_weights=[weights])
    logits = model.logits_for_batch(batch)
    logits[0, target_class].backward()
    grad = weights.grad.detach().abs().numpy()
    return {e: float(grad[k]) for k, e in enumerate(g.edges)}


def explain_sa(model, g, target_class, cfg: ExplainerConfig = ExplainerConfig()) -> EdgeMask:
    return _score_mask(g, sa_scores(model, g, target_class), cfg.mask_ratio)


def gradcam_node_scores(model: GraphClassifier, g: Graph, target_class: int) -> np.ndarray:
    """Node score = ReLU(<channel-averaged logit gradient, node embedding>)."""
    model.eval()
    batch = build_batch([g])
    h = model.node_embeddings(batch.x, batch.adj, batch.node_mask)
    pooled = masked_mean(h, batch.node_mask)
    logit = model.readout(pooled)[0, target_class]
    (grad,) = torch.autograd.grad(logit, h)
    n = g.node_count
    alpha = grad[0, :n].mean(dim=0)
    return torch.relu(h[0, :n].detach() @ alpha).numpy()


def gradcam_scores(model: GraphClassifier, g: Graph, target_class: int) -> dict[Edge, float]:
    """Edge score = mean of its endpoint node scores."""
    node_scores = gradcam_node_scores(model, g, target_class)
    return {
        (u, v): float(0.5 * (node_scores[u] + node_scores[v])) for u, v in g.edges
    }


def explain_gradcam(model, g, target_class, cfg: ExplainerConfig = ExplainerConfig()) -> EdgeMask:
    return _score_mask(g, gradcam_scores(model, g, target_class), cfg.mask_ratio)


def maskopt_scores(
    model: GraphClassifier, g: Graph, target_class: int, cfg: ExplainerConfig
) -> dict[Edge, float]:
    """Optimize a sigmoid-parameterized soft edge mask.

    Objective: -log p_target(g under mask) + sparsity_coeff * sum(mask).
    The logits start at 0 (mask 0.5 per edge) and the converged sigmoid
    values are the scores. Fully deterministic: fixed init, full-batch Adam.
    """
    model.eval()
    theta = torch.zeros(len(g.edges), requires_grad=True)
    optimizer = torch.optim.Adam([theta], lr=cfg.maskopt_lr)
    for step in range(cfg.maskopt_steps):
        mask = torch.sigmoid(theta)
        batch = build_batch([g], edge_weights=[mask])
        logits = model.logits_for_batch(batch)
        loss = -torch.log_softmax(logits, dim=-1)[0, target_class]
        loss = loss + cfg.maskopt_sparsity_coeff * mask.sum()
        if torch.isnan(loss):
            raise MaskOptimizationError(step)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
    final = torch.sigmoid(theta).detach().numpy()
    return {e: float(final[k]) for k, e in enumerate(g.edges)}


def explain_maskopt(model, g, target_class, cfg: ExplainerConfig = ExplainerConfig()) -> EdgeMask:
    return _score_mask(g, maskopt_scores(model, g, target_class, cfg), cfg.mask_ratio)


def occlusion_scores(model: GraphClassifier, g: Graph, target_class: int) -> dict[Edge, float]:
    """score(e) = p_target(g) - p_target(g minus e). Negative scores kept."""
    p_full = forward(model, g)[target_class]
    scores: dict[Edge, float] = {}
    for e in g.edges:
        mask = mask_from_selection(g.graph_id, g.edges, [x for x in g.edges if x != e])
        p = forward(model, induce_subgraph(g, mask))[target_class]
        scores[e] = float(p_full - p)
    return scores


def explain_occlusion(model, g, target_class, cfg: ExplainerConfig = ExplainerConfig()) -> EdgeMask:
    return _score_mask(g, occlusion_scores(model, g, target_class), cfg.mask_ratio)


def explain_screener(
    model: GraphClassifier,
    g: Graph,
    target_class: int,
    cfg: ExplainerConfig = ExplainerConfig(),
    budget: Optional[int] = None,
) -> EdgeMask:
    """Greedy conditional growth: repeatedly add the edge that maximizes the
    target probability of the induced subgraph given the edges picked so far.
    Scores encode the selection rank (earlier pick = higher score)."""
    model.eval()
    if budget is None:
        budget = math.ceil(cfg.mask_ratio * len(g.edges))
    budget = min(budget, len(g.edges))
    chosen: list[Edge] = []
    remaining = list(g.edges)
    for _ in range(budget):
        candidates = [
            induce_subgraph(g, mask_from_selection(g.graph_id, g.edges, chosen + [e]))
            for e in remaining
        ]
        probs = forward_many(model, candidates)[:, target_class]
        # ties resolved toward the lexicographically smallest edge
        best_p = probs.max()
        ties = [i for i in range(len(remaining)) if probs[i] == best_p]
        best = min(ties, key=lambda i: remaining[i])
        chosen.append(remaining.pop(best))
    scores = {e: 0.0 for e in g.edges}
    for rank, e in enumerate(chosen):
        scores[e] = float(budget - rank)
    return EdgeMask(parent_id=g.graph_id, scores=scores, selected=tuple(sorted(chosen)))


def random_scores(g: Graph, seed: int) -> dict[Edge, float]:
    rng = derive_rng(seed, "random-explainer", g.graph_id)
    vals = rng.random(len(g.edges))
    return {e: float(vals[k]) for k, e in enumerate(g.edges)}


def explain_random(model, g, target_class=None, cfg: ExplainerConfig = ExplainerConfig()) -> EdgeMask:
    return _score_mask(g, random_scores(g, cfg.seed), cfg.mask_ratio)


_DISPATCH = {
    "sa": explain_sa,
    "gradcam": explain_gradcam,
    "maskopt": explain_maskopt,
    "occlusion": explain_occlusion,
    "screener": explain_screener,
    "random": explain_random,
}


def explain(model: GraphClassifier, g: Graph, target_class: int,
            cfg: ExplainerConfig) -> EdgeMask:
    return _DISPATCH[cfg.kind](model, g, target_class, cfg)
