"""Conditional variational graph auto-encoder with adversarial training.

The generator encodes a (full graph, subgraph) pair into per-node Gaussian
latents, decodes pairwise edge probabilities with a symmetrized MLP, and is
trained against a class-conditional Wasserstein critic with gradient
penalty, plus a supervised-contrastive term that separates latent graph
embeddings by class. Sampling a surrogate forces the conditioning
subgraph's edges in and draws every remaining node pair independently from
the decoded Bernoulli probabilities.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .checkpoint import ModelCheckpoint
from .graphcore import (
    Edge,
    EdgeMask,
    Graph,
    GraphError,
    SurrogateSample,
    induce_subgraph,
    mask_from_selection,
)
from .layers import (
    GraphEncoder,
    adj_from_pairs,
    build_batch,
    masked_mean,
    pair_index,
    pair_validity,
    pairs_from_adj,
    row_normalize_adj,
)
from .seeds import derive_rng


class GeneratorTrainingError(RuntimeError):
    def __init__(self, epoch: int, step: int, term: str):
        super().__init__(f"{term} became NaN at epoch {epoch}, step {step}")
        self.epoch = epoch
        self.step = step
        self.term = term


@dataclass(frozen=True)
class GeneratorConfig:
    encode_dim: int = 256
    batch_size: int = 256
    learning_rate: float = 2e-4
    kl_weight: float = 1e-4          # beta
    contrastive_weight: float = 3.0  # gamma
    adversarial_weight: float = 5.0  # omega
    penalty_weight: float = 5.0      # lambda
    temperature: float = 0.1         # tau
    masking_ratio: float = 0.3       # fraction of edges removed per broken graph
    max_epochs: int = 100
    seed: int = 0
    num_layers: int = 3
    disc_hidden: int = 64
    conditional: bool = True         # False trains the plain-VGAE baseline encoder
    weight_decay: float = 1e-5
    convergence_tol: float = 1e-4
    convergence_patience: int = 3
    max_nodes: int = 64              # node-id embedding table size
    node_id_dim: int = 16
    disc_learning_rate: Optional[float] = None  # defaults to learning_rate

    def __post_init__(self):
        if min(self.encode_dim, self.batch_size, self.max_epochs,
               self.num_layers, self.disc_hidden) <= 0:
            raise ValueError("dims, batch size, epochs and layers must be positive")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not (0.0 < self.masking_ratio < 1.0):
            raise ValueError("masking_ratio must be in (0, 1)")
        if min(self.learning_rate, self.kl_weight) <= 0:
            raise ValueError("learning rate and kl weight must be positive")
        if min(self.contrastive_weight, self.adversarial_weight,
               self.penalty_weight, self.weight_decay) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class LatentCode:
    """Per-node Gaussian latents: mean, log standard deviation and one
    reparameterized draw, each of shape (node_count, latent_dim)."""

    mu: np.ndarray
    log_sigma: np.ndarray
    z: np.ndarray


@dataclass(frozen=True)
class EdgeProbMatrix:
    """Decoded edge probabilities over all unordered node pairs."""

    node_count: int
    probs: dict[Edge, float]

    def prob(self, u: int, v: int) -> float:
        return self.probs[(u, v) if u < v else (v, u)]


class CvgaeModel(nn.Module):
    # smooth bound on the log-sigma head; sum aggregation over several hops
    # otherwise lets exp(2 log_sigma) overflow at initialization
    log_sigma_bound = 4.0

    def __init__(self, feature_dim: int, encode_dim: int, num_layers: int = 3,
                 conditional: bool = True, max_nodes: int = 64,
                 node_id_dim: int = 16):
        super().__init__()
        self.feature_dim = feature_dim
        self.encode_dim = encode_dim
        self.conditional = conditional
        self.max_nodes = max_nodes
        self.latent_dim = 2 * encode_dim if conditional else encode_dim
        # learned node-identity features: [1, degree] alone cannot tell
        # symmetric nodes apart, which makes pairwise reconstruction
        # irreducibly ambiguous
        self.node_embedding = nn.Embedding(max_nodes, node_id_dim)
        in_dim = feature_dim + node_id_dim
        self.f_mu = GraphEncoder(in_dim, encode_dim, num_layers,
                                 final_activation=False)
        self.f_sigma = GraphEncoder(in_dim, encode_dim, num_layers,
                                    final_activation=False)
        self.f_a = nn.Sequential(
            nn.Linear(2 * self.latent_dim, encode_dim),
            nn.ReLU(),
            nn.Linear(encode_dim, 1),
        )
        with torch.no_grad():
            # start with sub-unit posterior spread; reconstruction then only
            # has to sharpen, not first recover from sigma >> mu
            self.f_sigma.layers[-1].self_lin.bias.fill_(-1.0)

    def _augment(self, x, node_mask):
        n = x.shape[1]
        if n > self.max_nodes:
            raise GraphError(
                f"graph has {n} nodes but the generator was built for at "
                f"most {self.max_nodes}"
            )
        ids = self.node_embedding.weight[:n].unsqueeze(0).expand(x.shape[0], -1, -1)
        return torch.cat([x, ids * node_mask.unsqueeze(-1)], dim=-1)

    def encode_tensors(self, x, adj_full, adj_sub, node_mask):
        """(mu, log_sigma), each (B, N, latent_dim).

        The heads see degree-normalized adjacencies so activations stay at
        feature scale across hops.
        """
        x = self._augment(x, node_mask)
        adj_full = row_normalize_adj(adj_full)
        adj_sub = row_normalize_adj(adj_sub)
        if self.conditional:
            x2 = torch.cat([x, x], dim=0)
            adj2 = torch.cat([adj_full, adj_sub], dim=0)
            mask2 = torch.cat([node_mask, node_mask], dim=0)
            mu2 = self.f_mu(x2, adj2, mask2)
            ls2 = self.f_sigma(x2, adj2, mask2)
            b = x.shape[0]
            mu = torch.cat([mu2[:b], mu2[b:]], dim=-1)
            log_sigma = torch.cat([ls2[:b], ls2[b:]], dim=-1)
        else:
            mu = self.f_mu(x, adj_full, node_mask)
            log_sigma = self.f_sigma(x, adj_full, node_mask)
        bound = self.log_sigma_bound
        log_sigma = bound * torch.tanh(log_sigma / bound)
        return mu, log_sigma

    def pair_logits(self, z: torch.Tensor, pairs: torch.Tensor) -> torch.Tensor:
        """Symmetrized pre-sigmoid edge scores: (B, |z|, D) -> (B, P)."""
        zi = z[:, pairs[:, 0]]
        zj = z[:, pairs[:, 1]]
        logit_ij = self.f_a(torch.cat([zi, zj], dim=-1)).squeeze(-1)
        logit_ji = self.f_a(torch.cat([zj, zi], dim=-1)).squeeze(-1)
        return 0.5 * (logit_ij + logit_ji)

    def sample_surrogates(self, g: Graph, mask: EdgeMask,
                          rngs: Sequence[np.random.Generator]) -> list[SurrogateSample]:
        return sample_surrogates(self, g, mask, rngs)


class Discriminator(nn.Module):
    """Class-conditional critic: the label enters as a one-hot block
    appended to every node's features."""

    def __init__(self, feature_dim: int, num_classes: int, hidden_dim: int = 64,
                 num_layers: int = 3):
        super().__init__()
        self.num_classes = num_classes
        self.encoder = GraphEncoder(feature_dim + num_classes, hidden_dim, num_layers)
        self.score = nn.Linear(hidden_dim, 1)

    def forward(self, x_cond, adj, node_mask) -> torch.Tensor:
        h = self.encoder(x_cond, adj, node_mask)
        return self.score(masked_mean(h, node_mask)).squeeze(-1)


# ---------------------------------------------------------------------------
# Loss pieces (pure tensor functions, used by training and by tests)
# ---------------------------------------------------------------------------


def gaussian_kl(mu: torch.Tensor, log_sigma: torch.Tensor,
                node_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Closed-form KL(N(mu, sigma^2) || N(0, I)) summed per graph: (B,)."""
    terms = 0.5 * (mu.pow(2) + torch.exp(2.0 * log_sigma) - 1.0 - 2.0 * log_sigma)
    if node_mask is not None:
        terms = terms * node_mask.unsqueeze(-1)
    return terms.sum(dim=(1, 2))


def reconstruction_bce(pair_logits: torch.Tensor, pair_targets: torch.Tensor,
                       pair_mask: torch.Tensor) -> torch.Tensor:
    """Per-graph negative Bernoulli log-likelihood of the adjacency: (B,)."""
    bce = nn.functional.binary_cross_entropy_with_logits(
        pair_logits, pair_targets, reduction="none"
    )
    return (bce * pair_mask).sum(dim=1)


def contrastive_loss(embeddings: torch.Tensor, labels: torch.Tensor,
                     temperature: float) -> torch.Tensor:
    """-E[log(sum_same exp(s/tau) / sum_others exp(s/tau))] over the batch.

    Similarity is the raw inner product; each row is excluded from its own
    positive and negative sets; rows with no same-class partner drop out of
    the expectation.
    """
    sims = embeddings @ embeddings.T / temperature
    eye = torch.eye(len(labels), dtype=torch.bool)
    same = labels.unsqueeze(0) == labels.unsqueeze(1)
    pos_mask = same & ~eye
    all_mask = ~eye
    valid = pos_mask.any(dim=1)
    if not bool(valid.any()):
        return sims.sum() * 0.0
    neg_inf = torch.tensor(float("-inf"), dtype=sims.dtype)
    pos_lse = torch.logsumexp(torch.where(pos_mask, sims, neg_inf), dim=1)
    all_lse = torch.logsumexp(torch.where(all_mask, sims, neg_inf), dim=1)
    return -(pos_lse[valid] - all_lse[valid]).mean()


def gradient_penalty(critic_fn: Callable[[torch.Tensor], torch.Tensor],
                     w_real: torch.Tensor, w_fake: torch.Tensor,
                     pair_mask: torch.Tensor,
                     interp: torch.Tensor) -> torch.Tensor:
    """WGAN-GP penalty on pair-weight interpolations: (B,).

    ``interp`` holds one uniform coefficient per graph, shape (B, 1). The
    critic gradient is taken with respect to the interpolated edge-weight
    vector and its norm is driven toward 1.
    """
    w_hat = (interp * w_real + (1.0 - interp) * w_fake).detach().requires_grad_(True)
    scores = critic_fn(w_hat)
    (grads,) = torch.autograd.grad(scores.sum(), w_hat, create_graph=True)
    norms = ((grads * pair_mask) ** 2).sum(dim=1).sqrt()
    return (norms - 1.0) ** 2


def discriminator_objective(d_real: torch.Tensor, d_fake: torch.Tensor,
                            penalties: torch.Tensor,
                            penalty_weight: float) -> torch.Tensor:
    """E[d(G, y) - d(G*, y) - lambda (||grad d||_2 - 1)^2]; the critic
    ascends this, the generator descends it."""
    return (d_real - d_fake - penalty_weight * penalties).mean()


# ---------------------------------------------------------------------------
# Graph-level operations
# ---------------------------------------------------------------------------


def _single_graph_tensors(model: CvgaeModel, g: Graph, g_s: Graph):
    if g_s.node_count != g.node_count:
        raise GraphError(
            f"subgraph node set ({g_s.node_count}) does not match graph "
            f"({g.node_count})"
        )
    full = build_batch([g])
    sub = build_batch([g_s], max_nodes=g.node_count)
    return full.x, full.adj, sub.adj, full.node_mask


def encode_tensors_for(model: CvgaeModel, g: Graph, g_s: Graph):
    x, adj_full, adj_sub, node_mask = _single_graph_tensors(model, g, g_s)
    with torch.no_grad():
        mu, log_sigma = model.encode_tensors(x, adj_full, adj_sub, node_mask)
    return mu[0].numpy().astype(np.float64), log_sigma[0].numpy().astype(np.float64)


def encode(model: CvgaeModel, g: Graph, g_s: Graph,
           rng: np.random.Generator) -> LatentCode:
    """Encode a (graph, subgraph) pair and draw one reparameterized sample."""
    mu, log_sigma = encode_tensors_for(model, g, g_s)
    eps = rng.standard_normal(mu.shape)
    z = mu + np.exp(log_sigma) * eps
    return LatentCode(mu=mu, log_sigma=log_sigma, z=z)


def decode(model: CvgaeModel, latent: LatentCode) -> EdgeProbMatrix:
    """Decoded edge probabilities over all node pairs of the latent code."""
    n = latent.z.shape[0]
    pairs = pair_index(n)
    z = torch.from_numpy(latent.z).to(torch.float32).unsqueeze(0)
    with torch.no_grad():
        logits = model.pair_logits(z, pairs)[0].to(torch.float64)
    probs = torch.sigmoid(logits).numpy()
    return EdgeProbMatrix(
        node_count=n,
        probs={(int(i), int(j)): float(p)
               for (i, j), p in zip(pairs.tolist(), probs)},
    )


def sample_surrogates(model: CvgaeModel, g: Graph, mask: EdgeMask,
                      rngs: Sequence[np.random.Generator]) -> list[SurrogateSample]:
    """Draw one surrogate per rng; the mask's selected edges are forced in
    and every other node pair is an independent Bernoulli draw."""
    g_s = induce_subgraph(g, mask)
    mu, log_sigma = encode_tensors_for(model, g, g_s)
    sigma = np.exp(log_sigma)
    n = g.node_count
    pairs = pair_index(n)
    pair_list = [tuple(p) for p in pairs.tolist()]
    forced = mask.selected_set
    free_idx = [k for k, p in enumerate(pair_list) if p not in forced]

    zs = []
    for rng in rngs:
        eps = rng.standard_normal(mu.shape)
        zs.append(mu + sigma * eps)
    z = torch.from_numpy(np.stack(zs)).to(torch.float32)
    with torch.no_grad():
        probs = torch.sigmoid(model.pair_logits(z, pairs).to(torch.float64)).numpy()

    samples = []
    for s, rng in enumerate(rngs):
        p_free = probs[s, free_idx]
        draws = rng.random(len(free_idx)) < p_free
        edges = list(forced) + [pair_list[free_idx[k]] for k in np.nonzero(draws)[0]]
        log_lik = float(np.log(np.where(draws, p_free, 1.0 - p_free)).sum())
        samples.append(
            SurrogateSample(parent_id=g.graph_id, edges=tuple(edges),
                            log_likelihood=log_lik, contains_subgraph=True)
        )
    return samples


def sample_surrogate(model: CvgaeModel, g: Graph, mask: EdgeMask,
                     rng: np.random.Generator) -> SurrogateSample:
    return sample_surrogates(model, g, mask, [rng])[0]


def vae_terms_from_latent(model: CvgaeModel, mu, log_sigma, eps, pair_targets,
                          pair_mask, pairs, node_mask=None):
    """Reconstruction and KL terms as differentiable functions of the latent
    parameters (used directly by the finite-difference gradient checks)."""
    z = mu + torch.exp(log_sigma) * eps
    logits = model.pair_logits(z, pairs)
    recon = reconstruction_bce(logits, pair_targets, pair_mask)
    kl = gaussian_kl(mu, log_sigma, node_mask)
    return recon, kl


def loss_vae(model: CvgaeModel, batch: Sequence[tuple[Graph, Graph]],
             kl_weight: float, rng: np.random.Generator) -> float:
    """beta-VAE loss of a batch of (full graph, conditioning subgraph) pairs."""
    full = build_batch([g for g, _ in batch])
    n_max = full.x.shape[1]
    sub = build_batch([gs for _, gs in batch], max_nodes=n_max)
    pairs = pair_index(n_max)
    pair_mask = pair_validity(full.sizes, pairs)
    targets = pairs_from_adj(full.adj, pairs)
    with torch.no_grad():
        mu, log_sigma = model.encode_tensors(full.x, full.adj, sub.adj, full.node_mask)
        eps = torch.from_numpy(rng.standard_normal(tuple(mu.shape))).to(mu.dtype)
        recon, kl = vae_terms_from_latent(model, mu, log_sigma, eps, targets,
                                          pair_mask, pairs, full.node_mask)
    return float((recon + kl_weight * kl).mean())


def loss_contrastive(model: CvgaeModel, batch: Sequence[tuple[Graph, Graph]],
                     temperature: float, rng: np.random.Generator) -> float:
    """Contrastive loss of a batch, computed on sampled latent graph means."""
    full = build_batch([g for g, _ in batch])
    sub = build_batch([gs for _, gs in batch], max_nodes=full.x.shape[1])
    with torch.no_grad():
        mu, log_sigma = model.encode_tensors(full.x, full.adj, sub.adj, full.node_mask)
        eps = torch.from_numpy(rng.standard_normal(tuple(mu.shape))).to(mu.dtype)
        z = mu + torch.exp(log_sigma) * eps
        emb = masked_mean(z, full.node_mask)
        value = contrastive_loss(emb, full.labels, temperature)
    return float(value)


def loss_discriminator(disc: Discriminator, real_graphs: Sequence[Graph],
                       fake_pair_weights: torch.Tensor, penalty_weight: float,
                       rng: np.random.Generator,
                       max_nodes: Optional[int] = None) -> float:
    """Full critic objective (Wasserstein difference minus gradient penalty)
    for real graphs against fake pair-weight vectors."""
    n_max = max_nodes or max(g.node_count for g in real_graphs)
    onehot = torch.eye(disc.num_classes)[[g.label for g in real_graphs]]
    batch = build_batch(real_graphs, max_nodes=n_max, extra_node_features=onehot)
    pairs = pair_index(n_max)
    pair_mask = pair_validity(batch.sizes, pairs)
    w_real = pairs_from_adj(batch.adj, pairs)

    def critic_fn(w):
        return disc(batch.x, adj_from_pairs(w * pair_mask, pairs, n_max),
                    batch.node_mask)

    d_real = critic_fn(w_real)
    d_fake = critic_fn(fake_pair_weights)
    interp = torch.from_numpy(rng.random((len(real_graphs), 1))).to(torch.float32)
    pen = gradient_penalty(critic_fn, w_real, fake_pair_weights, pair_mask, interp)
    return float(discriminator_objective(d_real, d_fake, pen, penalty_weight)
                 .detach())


# ---------------------------------------------------------------------------
# Training (Wasserstein min-max with alternating steps)
# ---------------------------------------------------------------------------


def random_edge_mask(g: Graph, ratio: float, rng: np.random.Generator) -> EdgeMask:
    """Broken-graph mask: remove round(ratio * |edges|) random edges."""
    removed = int(round(ratio * len(g.edges)))
    removed = min(removed, len(g.edges) - 1)
    order = rng.permutation(len(g.edges))
    kept = [g.edges[i] for i in sorted(order[removed:].tolist())]
    return mask_from_selection(g.graph_id, g.edges, kept)


def random_subset_mask(g: Graph, num_edges: int, rng: np.random.Generator) -> EdgeMask:
    """Mask keeping a uniform random subset of exactly num_edges edges."""
    num_edges = max(0, min(num_edges, len(g.edges)))
    order = rng.permutation(len(g.edges))
    kept = [g.edges[i] for i in sorted(order[:num_edges].tolist())]
    return mask_from_selection(g.graph_id, g.edges, kept)


def _epoch_mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def train_generator(dataset: Sequence[Graph],
                    cfg: GeneratorConfig = GeneratorConfig()):
    """Alternating critic/generator training; returns (gen_ckpt, disc_ckpt).

    Per-epoch means of every loss term are stored in the generator
    checkpoint metrics under ``history``.
    """
    if not dataset:
        raise ValueError("empty dataset")
    feature_dim = dataset[0].feature_dim
    num_classes = max(g.label for g in dataset) + 1

    torch.manual_seed(cfg.seed)
    gen = CvgaeModel(feature_dim, cfg.encode_dim, cfg.num_layers, cfg.conditional,
                     max_nodes=cfg.max_nodes, node_id_dim=cfg.node_id_dim)
    disc = Discriminator(feature_dim, num_classes, cfg.disc_hidden, cfg.num_layers)
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.learning_rate,
                             weight_decay=cfg.weight_decay)
    opt_d = torch.optim.Adam(disc.parameters(),
                             lr=cfg.disc_learning_rate or cfg.learning_rate,
                             weight_decay=cfg.weight_decay)

    n_max = max(g.node_count for g in dataset)
    pairs = pair_index(n_max)
    pair_pos = {tuple(p): k for k, p in enumerate(pairs.tolist())}
    base = build_batch(list(dataset), max_nodes=n_max)
    onehot_all = torch.eye(num_classes)[base.labels]
    cond_x_all = torch.cat(
        [base.x, onehot_all.unsqueeze(1).expand(-1, n_max, -1)
         * base.node_mask.unsqueeze(-1)], dim=-1)
    targets_all = pairs_from_adj(base.adj, pairs)
    pair_valid_all = pair_validity(base.sizes, pairs)

    mask_rng = derive_rng(cfg.seed, "edge-masking")
    shuffle_rng = derive_rng(cfg.seed, "epoch-shuffle")
    noise_rng = derive_rng(cfg.seed, "reparam")

    def broken_tensors(idx: np.ndarray):
        """Subgraph adjacency and forced-pair indicator for a batch."""
        sub_adj = torch.zeros(len(idx), n_max, n_max)
        forced = torch.zeros(len(idx), pairs.shape[0])
        for row, gi in enumerate(idx.tolist()):
            g = dataset[gi]
            m = random_edge_mask(g, cfg.masking_ratio, mask_rng)
            for u, v in m.selected:
                sub_adj[row, u, v] = 1.0
                sub_adj[row, v, u] = 1.0
                forced[row, pair_pos[(u, v)]] = 1.0
        return sub_adj, forced

    def generator_pair_weights(idx_t, sub_adj, forced, with_grad: bool):
        ctx = torch.enable_grad() if with_grad else torch.no_grad()
        with ctx:
            mu, log_sigma = gen.encode_tensors(
                base.x[idx_t], base.adj[idx_t], sub_adj, base.node_mask[idx_t])
            eps = torch.from_numpy(
                noise_rng.standard_normal(tuple(mu.shape))).to(mu.dtype)
            z = mu + torch.exp(log_sigma) * eps
            logits = gen.pair_logits(z, pairs)
            probs = torch.sigmoid(logits)
            valid = pair_valid_all[idx_t]
            weights = (probs * (1.0 - forced) + forced) * valid
        return mu, log_sigma, z, logits, weights

    history: list[dict] = []
    flat = 0
    for epoch in range(cfg.max_epochs):
        order = shuffle_rng.permutation(len(dataset))
        ep = {"loss_vae": [], "loss_contrastive": [], "loss_disc": [], "total": []}
        for step, lo in enumerate(range(0, len(order), cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            idx_t = torch.from_numpy(idx.copy())
            valid = pair_valid_all[idx_t]
            w_real = targets_all[idx_t]
            x_cond = cond_x_all[idx_t]
            node_mask = base.node_mask[idx_t]

            def critic_fn(w):
                return disc(x_cond, adj_from_pairs(w * valid, pairs, n_max), node_mask)

            # critic step (skipped entirely for the non-adversarial baseline)
            ld_val = 0.0
            if cfg.adversarial_weight > 0:
                sub_adj, forced = broken_tensors(idx)
                *_, w_fake = generator_pair_weights(idx_t, sub_adj, forced, False)
                d_real = critic_fn(w_real)
                d_fake = critic_fn(w_fake)
                interp = torch.from_numpy(
                    mask_rng.random((len(idx), 1))).to(torch.float32)
                pen = gradient_penalty(critic_fn, w_real, w_fake, valid, interp)
                ld = discriminator_objective(d_real, d_fake, pen, cfg.penalty_weight)
                if torch.isnan(ld):
                    raise GeneratorTrainingError(epoch, step, "discriminator loss")
                opt_d.zero_grad()
                (-ld).backward()
                opt_d.step()
                ld_val = float(ld.detach())

            # generator step on fresh broken graphs
            sub_adj, forced = broken_tensors(idx)
            mu, log_sigma, z, logits, w_fake = generator_pair_weights(
                idx_t, sub_adj, forced, True)
            recon = reconstruction_bce(logits, w_real, valid)
            kl = gaussian_kl(mu, log_sigma, node_mask)
            lvae = (recon + cfg.kl_weight * kl).mean()
            if cfg.contrastive_weight > 0:
                lc = contrastive_loss(masked_mean(z, node_mask), base.labels[idx_t],
                                      cfg.temperature)
            else:
                lc = torch.zeros(())
            if cfg.adversarial_weight > 0:
                adv = critic_fn(w_real).mean().detach() - critic_fn(w_fake).mean()
            else:
                adv = torch.zeros(())
            total = (lvae + cfg.contrastive_weight * lc
                     + cfg.adversarial_weight * adv)
            for name, term in (("vae loss", lvae), ("contrastive loss", lc),
                               ("total loss", total)):
                if torch.isnan(term):
                    raise GeneratorTrainingError(epoch, step, name)
            opt_g.zero_grad()
            total.backward()
            opt_g.step()

            ep["loss_vae"].append(float(lvae.detach()))
            ep["loss_contrastive"].append(float(lc.detach()))
            ep["loss_disc"].append(ld_val)
            ep["total"].append(float(total.detach()))

        history.append({
            "epoch": epoch,
            "loss_vae": _epoch_mean(ep["loss_vae"]),
            "loss_contrastive": _epoch_mean(ep["loss_contrastive"]),
            "loss_disc": _epoch_mean(ep["loss_disc"]),
            "total": _epoch_mean(ep["total"]),
        })
        if len(history) >= 2 and cfg.convergence_tol > 0:
            prev, cur = history[-2]["total"], history[-1]["total"]
            rel = abs(cur - prev) / max(1.0, abs(prev))
            flat = flat + 1 if rel < cfg.convergence_tol else 0
            if flat >= cfg.convergence_patience:
                break

    config = dict(asdict(cfg), feature_dim=feature_dim, num_classes=num_classes)
    gen_ckpt = ModelCheckpoint.from_module(
        gen, config=dict(config, kind="generator"),
        metrics={"history": history, "epochs_run": len(history)})
    disc_ckpt = ModelCheckpoint.from_module(
        disc, config=dict(config, kind="discriminator"), metrics={})
    return gen_ckpt, disc_ckpt


def generator_from_checkpoint(ckpt: ModelCheckpoint) -> CvgaeModel:
    cfg = ckpt.config
    model = CvgaeModel(cfg["feature_dim"], cfg["encode_dim"], cfg["num_layers"],
                       cfg["conditional"], max_nodes=cfg["max_nodes"],
                       node_id_dim=cfg["node_id_dim"])
    model.load_state_dict(ckpt.state_dict())
    model.eval()
    return model


def discriminator_from_checkpoint(ckpt: ModelCheckpoint) -> Discriminator:
    cfg = ckpt.config
    model = Discriminator(cfg["feature_dim"], cfg["num_classes"],
                          cfg["disc_hidden"], cfg["num_layers"])
    model.load_state_dict(ckpt.state_dict())
    model.eval()
    return model
