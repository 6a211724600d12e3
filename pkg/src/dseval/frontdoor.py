"""Front-door importance estimation over generated surrogates.

Importance of an explanatory subgraph is the Monte-Carlo average of the
predictor's target-class probability on surrogate completions of that
subgraph. Two estimator variants are provided. The reduced variant averages
the predictor over surrogates directly. The weighted variant additionally
adjusts over a finite pool of random subgraphs with importance weights
(uniform prior over the pool divided by the generator's normalized decoder
likelihood of each pool member given the surrogate); because the predictor
reads only the surrogate, the weights are normalized per surrogate and the
two variants agree numerically, but the weighting machinery is exercised in
full. A deletion-style contrast (full graph versus the explanation's
complement) is also provided.

Any object with a ``sample_surrogates(g, mask, rngs)`` method can serve as
the generator; besides the trained CVGAE this module ships identity and
density-matched random baselines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import torch

from .cvgae import CvgaeModel, encode_tensors_for, random_subset_mask
from .graphcore import (
    Edge,
    EdgeMask,
    Graph,
    SurrogateSample,
    complement_mask,
    mask_from_selection,
)
from .predictor import GraphClassifier, forward, forward_many, importance_removal
from .seeds import derive_rng


class DegenerateWeightsError(RuntimeError):
    """Every adjustment-pool member got zero posterior probability."""


@dataclass(frozen=True)
class DseConfig:
    num_surrogates: int = 50
    estimator: str = "reduced"
    adjustment_pool_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.num_surrogates < 1 or self.adjustment_pool_size < 1:
            raise ValueError("num_surrogates and adjustment_pool_size must be >= 1")
        if self.estimator not in ("reduced", "weighted"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class ImportanceRecord:
    graph_id: str
    explainer: str
    imp_re: float
    imp_dse: float
    imp_dse_deletion: float
    estimator: str
    surrogate_probs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if not (0.0 <= self.imp_re <= 1.0 and 0.0 <= self.imp_dse <= 1.0):
            raise ValueError("imp_re and imp_dse must lie in [0, 1]")
        if not (-1.0 <= self.imp_dse_deletion <= 1.0):
            raise ValueError("imp_dse_deletion must lie in [-1, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "graph_id": self.graph_id,
                "explainer": self.explainer,
                "imp_re": self.imp_re,
                "imp_dse": self.imp_dse,
                "imp_dse_deletion": self.imp_dse_deletion,
                "estimator": self.estimator,
                "surrogate_probs": [list(row) for row in self.surrogate_probs],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "ImportanceRecord":
        d = json.loads(line)
        return cls(
            graph_id=d["graph_id"],
            explainer=d["explainer"],
            imp_re=d["imp_re"],
            imp_dse=d["imp_dse"],
            imp_dse_deletion=d["imp_dse_deletion"],
            estimator=d["estimator"],
            surrogate_probs=tuple(tuple(row) for row in d["surrogate_probs"]),
        )


# ---------------------------------------------------------------------------
# Baseline generators
# ---------------------------------------------------------------------------


def _all_pairs(n: int) -> list[Edge]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


class IdentityGenerator:
    """Degenerate generator: every free pair has probability zero, so the
    surrogate is exactly the conditioning subgraph."""

    def sample_surrogates(self, g: Graph, mask: EdgeMask, rngs) -> list[SurrogateSample]:
        return [
            SurrogateSample(parent_id=g.graph_id, edges=mask.selected,
                            log_likelihood=0.0, contains_subgraph=True)
            for _ in rngs
        ]

    def conditional_edge_log_likelihood(self, g_star, g_cond, edges) -> float:
        return 0.0 if not edges else float("-inf")


class RandomGenerator:
    """Density-matched null generator: free pairs are i.i.d. Bernoulli with
    the parent graph's edge density (or a fixed probability)."""

    def __init__(self, edge_prob: float | None = None):
        self.edge_prob = edge_prob

    def _prob(self, g: Graph) -> float:
        if self.edge_prob is not None:
            return self.edge_prob
        pairs = g.node_count * (g.node_count - 1) // 2
        return len(g.edges) / pairs if pairs else 0.0

    def sample_surrogates(self, g: Graph, mask: EdgeMask, rngs) -> list[SurrogateSample]:
        p = self._prob(g)
        forced = mask.selected_set
        free = [e for e in _all_pairs(g.node_count) if e not in forced]
        out = []
        for rng in rngs:
            draws = rng.random(len(free)) < p
            edges = list(forced) + [free[k] for k in np.nonzero(draws)[0]]
            log_lik = float(
                np.log(np.where(draws, p, 1.0 - p)).sum()) if free else 0.0
            out.append(SurrogateSample(parent_id=g.graph_id, edges=tuple(edges),
                                       log_likelihood=log_lik,
                                       contains_subgraph=True))
        return out

    def conditional_edge_log_likelihood(self, g_star, g_cond, edges) -> float:
        if not edges:
            return 0.0
        p = self._prob(g_star)
        return float(len(edges)) * math.log(p) if p > 0 else float("-inf")


def surrogate_to_graph(g: Graph, sample: SurrogateSample) -> Graph:
    """Materialize a surrogate as a predictor-ready graph over g's nodes."""
    return Graph(
        graph_id=f"{g.graph_id}.sur",
        node_count=g.node_count,
        edges=sample.edges,
        node_features=g.node_features,
        label=g.label,
        ground_truth_edges=None,
    )


def _surrogate_rngs(cfg: DseConfig, stream: tuple, count: int):
    return [derive_rng(cfg.seed, "surrogate", *stream, j) for j in range(count)]


def surrogate_class_probs(
    predictor: GraphClassifier,
    generator,
    g: Graph,
    mask: EdgeMask,
    cfg: DseConfig,
    stream: tuple = ("adhoc",),
) -> np.ndarray:
    """Predictor class probabilities on num_surrogates draws: (n, K)."""
    rngs = _surrogate_rngs(cfg, stream, cfg.num_surrogates)
    samples = generator.sample_surrogates(g, mask, rngs)
    graphs = [surrogate_to_graph(g, s) for s in samples]
    return forward_many(predictor, graphs)


def imp_dse_reduced(
    predictor: GraphClassifier,
    generator,
    g: Graph,
    mask: EdgeMask,
    target_class: int,
    cfg: DseConfig,
    stream: tuple = ("adhoc",),
) -> float:
    probs = surrogate_class_probs(predictor, generator, g, mask, cfg, stream)
    return float(probs[:, target_class].mean())


def _decoder_log_likelihood(generator, g_star: Graph, g_cond: Graph,
                            edges: Sequence[Edge]) -> float:
    """Sum of decoder edge log-probabilities, evaluated at the mean latent."""
    if isinstance(generator, CvgaeModel):
        if not edges:
            return 0.0
        mu, _ = encode_tensors_for(generator, g_star, g_cond)
        z = torch.from_numpy(mu).to(torch.float32).unsqueeze(0)
        pairs = torch.tensor(list(edges), dtype=torch.long)
        with torch.no_grad():
            logits = generator.pair_logits(z, pairs)[0].to(torch.float64)
        return float(torch.nn.functional.logsigmoid(logits).sum())
    return generator.conditional_edge_log_likelihood(g_star, g_cond, edges)


def imp_dse_weighted(
    predictor: GraphClassifier,
    generator,
    g: Graph,
    mask: EdgeMask,
    target_class: int,
    cfg: DseConfig,
    stream: tuple = ("adhoc",),
) -> float:
    """Importance-weighted front-door estimate over an adjustment pool.

    The pool holds adjustment_pool_size random subgraphs of g at the mask's
    ratio, with uniform prior 1/K. Each surrogate's contribution is the
    target probability times pool weights P(G'_k)/P_hat(G'_k | G*),
    normalized to sum to one per surrogate.
    """
    rngs = _surrogate_rngs(cfg, stream, cfg.num_surrogates)
    samples = generator.sample_surrogates(g, mask, rngs)
    graphs = [surrogate_to_graph(g, s) for s in samples]
    f_target = forward_many(predictor, graphs)[:, target_class]

    pool_rng = derive_rng(cfg.seed, "adjustment-pool", *stream)
    pool_size = cfg.adjustment_pool_size
    pool_masks = [
        random_subset_mask(g, len(mask.selected), pool_rng) for _ in range(pool_size)
    ]
    pool_graphs = [
        Graph(graph_id=g.graph_id, node_count=g.node_count, edges=m.selected,
              node_features=g.node_features, label=g.label)
        for m in pool_masks
    ]

    estimates = np.zeros(len(samples))
    log_prior = -math.log(pool_size)
    for j, g_star in enumerate(graphs):
        logliks = np.array([
            _decoder_log_likelihood(generator, g_star, pool_graphs[k],
                                    pool_masks[k].selected)
            for k in range(pool_size)
        ])
        if np.all(np.isinf(logliks) & (logliks < 0)):
            raise DegenerateWeightsError(
                f"all {pool_size} pool members have zero posterior for "
                f"surrogate {j} of {g.graph_id}"
            )
        log_posterior = logliks - _logsumexp(logliks)
        log_w = log_prior - log_posterior
        weights = np.exp(log_w - _logsumexp(log_w))
        estimates[j] = float((weights * f_target[j]).sum())
    return float(estimates.mean())


def _logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    if np.isinf(m) and m < 0:
        return float("-inf")
    return float(m + np.log(np.exp(x - m).sum()))


def imp_dse_deletion(
    predictor: GraphClassifier,
    generator,
    g: Graph,
    mask: EdgeMask,
    target_class: int,
    cfg: DseConfig,
    stream: tuple = ("adhoc",),
) -> float:
    """Deletion-style causal contrast: P(Y | do(G_s = G)) minus the
    front-door importance of the explanation's complement."""
    full_term = float(forward(predictor, g)[target_class])
    rest = complement_mask(g, mask)
    deleted_term = imp_dse_reduced(predictor, generator, g, rest, target_class,
                                   cfg, stream + ("deletion",))
    return full_term - deleted_term


def estimate_importance(
    predictor, generator, g, mask, target_class, cfg: DseConfig, stream: tuple
) -> float:
    if cfg.estimator == "weighted":
        return imp_dse_weighted(predictor, generator, g, mask, target_class,
                                cfg, stream)
    return imp_dse_reduced(predictor, generator, g, mask, target_class, cfg, stream)


def evaluate_all(
    dataset: Sequence[Graph],
    masks: Mapping[str, Mapping[str, EdgeMask]],
    predictor: GraphClassifier,
    generator,
    cfg: DseConfig,
) -> list[ImportanceRecord]:
    """One record per (graph, explainer), sorted by (graph_id, explainer).

    The target class is the graph's label. Surrogate RNG streams derive from
    (seed, graph_id, explainer, sample index), so records are independent of
    evaluation order and bit-identical across reruns.
    """
    by_id = {g.graph_id: g for g in dataset}
    records = []
    for graph_id in sorted(masks):
        g = by_id[graph_id]
        for kind in sorted(masks[graph_id]):
            mask = masks[graph_id][kind]
            stream = (graph_id, kind)
            probs = surrogate_class_probs(predictor, generator, g, mask, cfg, stream)
            if cfg.estimator == "weighted":
                imp_dse = imp_dse_weighted(predictor, generator, g, mask,
                                           g.label, cfg, stream)
            else:
                imp_dse = float(probs[:, g.label].mean())
            records.append(
                ImportanceRecord(
                    graph_id=graph_id,
                    explainer=kind,
                    imp_re=importance_removal(predictor, mask, g, g.label),
                    imp_dse=imp_dse,
                    imp_dse_deletion=imp_dse_deletion(
                        predictor, generator, g, mask, g.label, cfg, stream),
                    estimator=cfg.estimator,
                    surrogate_probs=tuple(tuple(float(x) for x in row)
                                          for row in probs),
                )
            )
    return records


def save_records(records: Sequence[ImportanceRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def load_records(path) -> list[ImportanceRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        return [ImportanceRecord.from_json(line) for line in fh if line.strip()]
