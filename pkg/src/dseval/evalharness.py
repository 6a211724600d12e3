"""Metrics, experiment orchestration and report emission.

Reproduces the evaluation story at desk scale: per-explainer precision
against the planted motif, removal-based versus front-door importance,
their correlations with precision, explainer rankings under each framework,
and generator validity/fidelity metrics with random and plain-VGAE
baselines. ``run_experiment`` drives the full pipeline from a sectioned
config file, caches stage artifacts in a run directory, and writes a
byte-stable report.json plus CSV tables and an SVG chart.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from . import cvgae, explainers, frontdoor, predictor, tr3gen
from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .graphcore import EdgeMask, Graph, load_dataset, mask_from_selection, save_dataset
from .seeds import derive_rng


class UndefinedCorrelationError(ValueError):
    """Correlation of a constant (zero-variance) list is undefined."""


class MissingArtifactError(FileNotFoundError):
    pass


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def precision(mask: EdgeMask, g: Graph) -> float:
    """Fraction of selected edges inside the ground-truth explanation."""
    if g.ground_truth_edges is None:
        raise ValueError(f"graph {g.graph_id} has no ground-truth explanation")
    if not mask.selected:
        return 0.0
    hit = len(mask.selected_set & g.ground_truth_edges)
    return hit / len(mask.selected)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys) or len(xs) < 2:
        raise UndefinedCorrelationError("need two equally long lists of length >= 2")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.max() == x.min() or y.max() == y.min():
        raise UndefinedCorrelationError("zero variance in at least one list")
    xd = x - x.mean()
    yd = y - y.mean()
    denom = math.sqrt(float((xd * xd).sum()) * float((yd * yd).sum()))
    if denom == 0.0:
        raise UndefinedCorrelationError("zero variance in at least one list")
    return float((xd * yd).sum() / denom)


def rank_with_ties(values: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their ranks."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=np.float64)
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation of average ranks."""
    return pearson(rank_with_ties(xs), rank_with_ties(ys))


def rho_comparison(
    precisions: Mapping[str, Sequence[float]],
    imp_re: Mapping[str, Sequence[float]],
    imp_dse: Mapping[str, Sequence[float]],
) -> dict[str, dict]:
    """Per explainer: correlation of each importance list with precision.

    Undefined correlations (constant lists) are reported as None with a
    reason instead of raising.
    """
    out: dict[str, dict] = {}
    for kind in sorted(precisions):
        row: dict = {"rho_re": None, "rho_dse": None,
                     "rho_re_reason": None, "rho_dse_reason": None}
        for key, imps in (("rho_re", imp_re[kind]), ("rho_dse", imp_dse[kind])):
            try:
                row[key] = pearson(precisions[kind], imps)
            except UndefinedCorrelationError as exc:
                row[f"{key}_reason"] = str(exc)
        out[kind] = row
    return out


def ground_truth_mask(g: Graph) -> EdgeMask:
    if g.ground_truth_edges is None:
        raise ValueError(f"graph {g.graph_id} has no ground-truth explanation")
    return mask_from_selection(g.graph_id, g.edges, g.ground_truth_edges)


def val_metric(
    dataset: Sequence[Graph],
    generator,
    model: predictor.GraphClassifier,
    num_surrogates: int = 50,
    seed: int = 0,
) -> float:
    """Mean front-door minus removal importance of the ground-truth masks."""
    cfg = frontdoor.DseConfig(num_surrogates=num_surrogates, seed=seed)
    gaps = []
    for g in dataset:
        mask = ground_truth_mask(g)
        imp_dse = frontdoor.imp_dse_reduced(
            model, generator, g, mask, g.label, cfg, ("val", g.graph_id))
        imp_re = predictor.importance_removal(model, mask, g, g.label)
        gaps.append(imp_dse - imp_re)
    return float(np.mean(gaps))


def mean_surrogate_importance(
    dataset: Sequence[Graph],
    generator,
    model: predictor.GraphClassifier,
    num_surrogates: int = 50,
    seed: int = 0,
) -> float:
    """Mean front-door importance of the ground-truth masks."""
    cfg = frontdoor.DseConfig(num_surrogates=num_surrogates, seed=seed)
    vals = [
        frontdoor.imp_dse_reduced(model, generator, g, ground_truth_mask(g),
                                  g.label, cfg, ("val", g.graph_id))
        for g in dataset
    ]
    return float(np.mean(vals))


def fid_metric(
    dataset: Sequence[Graph],
    generator,
    model: predictor.GraphClassifier,
    num_random_masks: int = 4,
    num_surrogates: int = 50,
    mask_ratio: float = 0.15,
    seed: int = 0,
) -> float:
    """Mean squared gap between full-graph class probabilities and
    surrogate-averaged probabilities over random subgraphs, averaged over
    all classes."""
    cfg = frontdoor.DseConfig(num_surrogates=num_surrogates, seed=seed)
    gaps = []
    for g in dataset:
        f_full = predictor.forward(model, g)
        keep = math.ceil(mask_ratio * len(g.edges))
        mask_rng = derive_rng(seed, "fid-masks", g.graph_id)
        for m_idx in range(num_random_masks):
            mask = cvgae.random_subset_mask(g, keep, mask_rng)
            probs = frontdoor.surrogate_class_probs(
                model, generator, g, mask, cfg, ("fid", g.graph_id, m_idx))
            gaps.append(float(((f_full - probs.mean(axis=0)) ** 2).mean()))
    return float(np.mean(gaps))


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

_NOTES = {
    "isolated_nodes": "subgraph induction keeps isolated nodes (features and "
                      "input shape stable under edge removal)",
    "rho": "rho is Pearson correlation; the rank comparison uses Spearman "
           "with average ranks",
    "ranking_aggregation": "explainer rankings use the mean statistic over "
                           "the evaluation graphs",
    "target_class": "importance is always read at the graph's label class",
}


@dataclass
class ExperimentConfig:
    raw: dict

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise MissingArtifactError(f"config file not found: {path}")
        raw: dict = {s: dict(parser[s]) for s in parser.sections()}
        return cls(raw=raw)

    def get(self, section: str, key: str, default, cast=None):
        val = self.raw.get(section, {}).get(key)
        if val is None:
            return default
        if cast is bool:
            return val.strip().lower() in ("1", "true", "yes", "on")
        return (cast or type(default))(val)

    def get_list(self, section: str, key: str, default, cast=float):
        val = self.raw.get(section, {}).get(key)
        if val is None:
            return default
        return [cast(tok.strip()) for tok in val.split(",") if tok.strip()]

    def has_section(self, section: str) -> bool:
        return section in self.raw


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def _stage_data(cfg: ExperimentConfig, run_dir: Path) -> list[Graph]:
    explicit = cfg.get("data", "path", "", str)
    if explicit:
        path = Path(explicit)
        if not path.exists():
            raise MissingArtifactError(f"dataset file not found: {path}")
        return load_dataset(path)
    path = run_dir / "dataset.txt"
    if path.exists():
        return load_dataset(path)
    tcfg = tr3gen.Tr3Config(
        num_graphs=cfg.get("data", "num_graphs", 3000, int),
        base_nodes_min=cfg.get("data", "base_nodes_min", 8, int),
        base_nodes_max=cfg.get("data", "base_nodes_max", 15, int),
        seed=cfg.get("data", "seed", 17, int),
        feature_dim=cfg.get("data", "feature_dim", 2, int),
    )
    dataset = tr3gen.generate_dataset(tcfg)
    save_dataset(dataset, path)
    counts: dict[str, int] = {}
    for g in dataset:
        counts[str(g.label)] = counts.get(str(g.label), 0) + 1
    _write_json(run_dir / "dataset-manifest.json",
                {"config": tcfg.__dict__ | {"motif_set": list(tcfg.motif_set)},
                 "class_counts": counts})
    return dataset


def _stage_predictor(cfg: ExperimentConfig, run_dir: Path,
                     dataset: list[Graph]):
    explicit = cfg.get("predictor", "path", "", str)
    path = Path(explicit) if explicit else run_dir / "predictor.npz"
    if explicit and not path.exists():
        raise MissingArtifactError(f"predictor checkpoint not found: {path}")
    if path.exists():
        ckpt = load_checkpoint(path)
    else:
        pcfg = predictor.PredictorConfig(
            hidden_dim=cfg.get("predictor", "hidden_dim", 64, int),
            num_layers=cfg.get("predictor", "num_layers", 3, int),
            learning_rate=cfg.get("predictor", "learning_rate", 1e-3, float),
            weight_decay=cfg.get("predictor", "weight_decay", 1e-5, float),
            max_epochs=cfg.get("predictor", "epochs", 100, int),
            seed=cfg.get("predictor", "seed", 0, int),
            batch_size=cfg.get("predictor", "batch_size", 64, int),
        )
        _, ckpt = predictor.train(dataset, pcfg)
        save_checkpoint(ckpt, path)
    return predictor.predictor_from_checkpoint(ckpt), ckpt


def _generator_config(cfg: ExperimentConfig, variant: str,
                      overrides: Optional[dict] = None) -> cvgae.GeneratorConfig:
    # harness defaults are a CPU desk-scale recipe; the GeneratorConfig
    # class defaults keep the published hyper-parameters
    params = dict(
        encode_dim=cfg.get("generator", "encode_dim", 64, int),
        batch_size=cfg.get("generator", "batch_size", 256, int),
        learning_rate=cfg.get("generator", "learning_rate", 3e-3, float),
        kl_weight=cfg.get("generator", "beta", 1e-4, float),
        contrastive_weight=cfg.get("generator", "gamma", 3.0, float),
        adversarial_weight=cfg.get("generator", "omega", 5.0, float),
        penalty_weight=cfg.get("generator", "lambda", 5.0, float),
        temperature=cfg.get("generator", "tau", 0.1, float),
        masking_ratio=cfg.get("generator", "masking_ratio", 0.3, float),
        max_epochs=cfg.get("generator", "epochs", 50, int),
        seed=cfg.get("generator", "seed", 0, int),
        disc_hidden=cfg.get("generator", "disc_hidden", 64, int),
        disc_learning_rate=cfg.get("generator", "disc_learning_rate", None,
                                   float),
    )
    if variant == "vgae":
        params.update(conditional=False, contrastive_weight=0.0,
                      adversarial_weight=0.0)
    elif variant == "cvgae_no_contrastive":
        params.update(contrastive_weight=0.0)
    elif variant == "cvgae_no_penalty":
        params.update(penalty_weight=0.0)
    elif variant != "cvgae":
        raise ValueError(f"unknown generator variant {variant!r}")
    params.update(overrides or {})
    return cvgae.GeneratorConfig(**params)


def _write_losses_csv(path: Path, history: Sequence[dict]) -> None:
    _write_csv(path, ["epoch", "loss_vae", "loss_contrastive", "loss_disc", "total"],
               [[h["epoch"], repr(h["loss_vae"]), repr(h["loss_contrastive"]),
                 repr(h["loss_disc"]), repr(h["total"])] for h in history])


def _stage_generator(cfg: ExperimentConfig, run_dir: Path,
                     dataset: list[Graph], variant: str,
                     overrides: Optional[dict] = None,
                     tag: Optional[str] = None):
    tag = tag or variant
    path = run_dir / f"generator-{tag}.npz"
    if path.exists():
        ckpt = load_checkpoint(path)
    else:
        gcfg = _generator_config(cfg, variant, overrides)
        train_count = cfg.get("generator", "train_graphs", len(dataset), int)
        ckpt, _ = cvgae.train_generator(dataset[:train_count], gcfg)
        save_checkpoint(ckpt, path)
        _write_losses_csv(run_dir / f"losses-{tag}.csv", ckpt.metrics["history"])
        if tag == "cvgae":
            _write_losses_csv(run_dir / "losses.csv", ckpt.metrics["history"])
    return cvgae.generator_from_checkpoint(ckpt), ckpt


def _evaluation_graphs(cfg: ExperimentConfig, dataset: list[Graph],
                       pred_ckpt: ModelCheckpoint) -> list[Graph]:
    """Evaluation split: held-out graphs from the predictor's recorded split."""
    split_seed = pred_ckpt.metrics.get("split_seed", pred_ckpt.config["seed"])
    test_fraction = pred_ckpt.config.get("test_fraction", 0.2)
    _, test = predictor.split_dataset(dataset, test_fraction, split_seed)
    count = cfg.get("dse", "eval_graphs", 200, int)
    return sorted(test, key=lambda g: g.graph_id)[:count]


def _stage_masks(cfg: ExperimentConfig, run_dir: Path, model,
                 eval_graphs: list[Graph]):
    path = run_dir / "masks.jsonl"
    kinds = cfg.get_list("explainers", "kinds", list(explainers.EXPLAINER_KINDS),
                         cast=str)
    ratio = cfg.get("explainers", "mask_ratio", 0.15, float)
    if path.exists():
        return load_masks(path), kinds, ratio
    masks: dict[str, dict[str, EdgeMask]] = {}
    records = []
    for g in eval_graphs:
        masks[g.graph_id] = {}
        for kind in kinds:
            ecfg = explainers.ExplainerConfig(
                kind=kind,
                mask_ratio=ratio,
                maskopt_steps=cfg.get("explainers", "maskopt_steps", 200, int),
                maskopt_lr=cfg.get("explainers", "maskopt_lr", 0.01, float),
                maskopt_sparsity_coeff=cfg.get(
                    "explainers", "maskopt_sparsity_coeff", 0.005, float),
                seed=cfg.get("explainers", "seed", 0, int),
            )
            mask = explainers.explain(model, g, g.label, ecfg)
            masks[g.graph_id][kind] = mask
            records.append(mask_record(mask, kind, ratio))
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return masks, kinds, ratio


def mask_record(mask: EdgeMask, kind: str, ratio: float) -> dict:
    return {
        "graph_id": mask.parent_id,
        "explainer": kind,
        "mask_ratio": ratio,
        "scores": [[u, v, float(s)] for (u, v), s in sorted(mask.scores.items())],
        "selected": [[u, v] for u, v in mask.selected],
    }


def load_masks(path) -> dict[str, dict[str, EdgeMask]]:
    masks: dict[str, dict[str, EdgeMask]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            mask = EdgeMask(
                parent_id=rec["graph_id"],
                scores={(u, v): s for u, v, s in rec["scores"]},
                selected=tuple((u, v) for u, v in rec["selected"]),
            )
            masks.setdefault(rec["graph_id"], {})[rec["explainer"]] = mask
    return masks


def _stage_records(cfg: ExperimentConfig, run_dir: Path, eval_graphs, masks,
                   model, generator):
    path = run_dir / "records.jsonl"
    if path.exists():
        return frontdoor.load_records(path)
    dcfg = frontdoor.DseConfig(
        num_surrogates=cfg.get("dse", "num_surrogates", 50, int),
        estimator=cfg.get("dse", "estimator", "reduced", str),
        adjustment_pool_size=cfg.get("dse", "adjustment_pool_size", 32, int),
        seed=cfg.get("dse", "seed", 0, int),
    )
    records = frontdoor.evaluate_all(eval_graphs, masks, model, generator, dcfg)
    frontdoor.save_records(records, path)
    return records


# ---------------------------------------------------------------------------
# Report assembly
# ---------------------------------------------------------------------------


def _explainer_tables(eval_graphs, masks, records, kinds):
    by_id = {g.graph_id: g for g in eval_graphs}
    prec: dict[str, list[float]] = {k: [] for k in kinds}
    imp_re: dict[str, list[float]] = {k: [] for k in kinds}
    imp_dse: dict[str, list[float]] = {k: [] for k in kinds}
    imp_del: dict[str, list[float]] = {k: [] for k in kinds}
    for rec in records:
        g = by_id[rec.graph_id]
        prec[rec.explainer].append(precision(masks[rec.graph_id][rec.explainer], g))
        imp_re[rec.explainer].append(rec.imp_re)
        imp_dse[rec.explainer].append(rec.imp_dse)
        imp_del[rec.explainer].append(rec.imp_dse_deletion)
    return prec, imp_re, imp_dse, imp_del


def _ranking(means: Mapping[str, float]) -> list[str]:
    return sorted(means, key=lambda k: (-means[k], k))


def build_report(cfg: ExperimentConfig, eval_graphs, masks, records, kinds,
                 generator_metrics: Mapping[str, dict],
                 sweep_rows: Optional[list[dict]] = None) -> dict:
    prec, imp_re, imp_dse, imp_del = _explainer_tables(
        eval_graphs, masks, records, kinds)
    rho = rho_comparison(prec, imp_re, imp_dse)
    mean_prec = {k: float(np.mean(prec[k])) for k in kinds}
    mean_re = {k: float(np.mean(imp_re[k])) for k in kinds}
    mean_dse = {k: float(np.mean(imp_dse[k])) for k in kinds}
    mean_del = {k: float(np.mean(imp_del[k])) for k in kinds}

    explainer_block = {
        k: {
            "mean_precision": mean_prec[k],
            "mean_imp_re": mean_re[k],
            "mean_imp_dse": mean_dse[k],
            "mean_imp_dse_deletion": mean_del[k],
            **rho[k],
        }
        for k in sorted(kinds)
    }
    rankings = {
        "by_precision": _ranking(mean_prec),
        "by_imp_re": _ranking(mean_re),
        "by_imp_dse": _ranking(mean_dse),
    }
    order = sorted(kinds)
    spearman_block = {
        "re_vs_precision": spearman([mean_re[k] for k in order],
                                    [mean_prec[k] for k in order]),
        "dse_vs_precision": spearman([mean_dse[k] for k in order],
                                     [mean_prec[k] for k in order]),
    }
    report = {
        "config": cfg.raw,
        "notes": _NOTES,
        "num_eval_graphs": len(eval_graphs),
        "explainers": explainer_block,
        "rankings": rankings,
        "spearman": spearman_block,
        "generators": {k: dict(v) for k, v in sorted(generator_metrics.items())},
    }
    if sweep_rows is not None:
        report["sweep"] = sweep_rows
    return report


def _bar(x, y, w, h, color) -> str:
    return (f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{color}"/>')


def write_rho_chart(path: Path, explainer_block: Mapping[str, Mapping]) -> None:
    """Grouped bar chart of rho_re vs rho_dse per explainer, as plain SVG."""
    kinds = sorted(explainer_block)
    width, height, base, top = 640, 320, 260, 30
    scale = (base - top) / 2.0  # rho in [-1, 1]
    group_w = (width - 80) / max(1, len(kinds))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<style>text{font-family:sans-serif;font-size:11px}</style>',
        f'<line x1="40" y1="{base - scale}" x2="{width - 20}" '
        f'y2="{base - scale}" stroke="#888"/>',
        f'<text x="4" y="{base - 2 * scale + 4}">1.0</text>',
        f'<text x="4" y="{base - scale + 4}">0.0</text>',
        f'<text x="4" y="{base + 4}">-1.0</text>',
    ]
    for i, kind in enumerate(kinds):
        x0 = 50 + i * group_w
        for j, (key, color) in enumerate((("rho_re", "#d62728"),
                                          ("rho_dse", "#1f77b4"))):
            val = explainer_block[kind].get(key)
            if val is None:
                continue
            h = abs(val) * scale
            y = base - scale - (h if val > 0 else 0)
            parts.append(_bar(x0 + j * group_w * 0.35, y, group_w * 0.3, h, color))
        parts.append(f'<text x="{x0:.2f}" y="{base + 24}">{kind}</text>')
    parts.append(f'<rect x="50" y="{height - 18}" width="10" height="10" fill="#d62728"/>')
    parts.append(f'<text x="64" y="{height - 9}">rho_re</text>')
    parts.append(f'<rect x="130" y="{height - 18}" width="10" height="10" fill="#1f77b4"/>')
    parts.append(f'<text x="144" y="{height - 9}">rho_dse</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def _write_tables(run_dir: Path, report: dict) -> None:
    kinds = sorted(report["explainers"])
    rank_of = {
        key: {k: i + 1 for i, k in enumerate(report["rankings"][key])}
        for key in ("by_imp_re", "by_imp_dse", "by_precision")
    }
    _write_csv(
        run_dir / "table2.csv",
        ["explainer", "mean_imp_re", "mean_imp_dse", "mean_precision",
         "rank_re", "rank_dse", "rank_precision"],
        [[k,
          repr(report["explainers"][k]["mean_imp_re"]),
          repr(report["explainers"][k]["mean_imp_dse"]),
          repr(report["explainers"][k]["mean_precision"]),
          rank_of["by_imp_re"][k], rank_of["by_imp_dse"][k],
          rank_of["by_precision"][k]] for k in kinds],
    )
    _write_csv(
        run_dir / "table4.csv",
        ["generator", "mean_imp_dse_gt", "val", "fid"],
        [[name,
          repr(metrics["mean_imp_dse_gt"]), repr(metrics["val"]),
          repr(metrics["fid"])]
         for name, metrics in sorted(report["generators"].items())],
    )


def _generator_metric_row(cfg: ExperimentConfig, dataset_for_metrics, generator,
                          model, seed: int) -> dict:
    n = cfg.get("dse", "num_surrogates", 50, int)
    return {
        "val": val_metric(dataset_for_metrics, generator, model,
                          num_surrogates=n, seed=seed),
        "fid": fid_metric(
            dataset_for_metrics, generator, model,
            num_random_masks=cfg.get("dse", "fid_masks_per_graph", 4, int),
            num_surrogates=n,
            mask_ratio=cfg.get("explainers", "mask_ratio", 0.15, float),
            seed=seed),
        "mean_imp_dse_gt": mean_surrogate_importance(
            dataset_for_metrics, generator, model, num_surrogates=n, seed=seed),
    }


def run_experiment(config_path, run_dir) -> dict:
    """Execute (or resume) the full pipeline and write all artifacts."""
    cfg = ExperimentConfig.load(config_path)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    dataset = _stage_data(cfg, run_dir)
    model, pred_ckpt = _stage_predictor(cfg, run_dir, dataset)
    eval_graphs = _evaluation_graphs(cfg, dataset, pred_ckpt)
    metric_count = cfg.get("dse", "metric_graphs", len(eval_graphs), int)
    metric_graphs = eval_graphs[:metric_count]
    metric_seed = cfg.get("dse", "seed", 0, int)

    variants = cfg.get_list("generator", "variants", ["cvgae", "random", "vgae"],
                            cast=str)
    if cfg.get("generator", "ablations", False, bool):
        variants += ["cvgae_no_contrastive", "cvgae_no_penalty"]

    generator_metrics: dict[str, dict] = {}
    cvgae_model = None
    for variant in variants:
        if variant == "random":
            generator = frontdoor.RandomGenerator()
        else:
            generator, _ = _stage_generator(cfg, run_dir, dataset, variant)
        if variant == "cvgae":
            cvgae_model = generator
        generator_metrics[variant] = _generator_metric_row(
            cfg, metric_graphs, generator, model, metric_seed)
    if cvgae_model is None:
        cvgae_model, _ = _stage_generator(cfg, run_dir, dataset, "cvgae")

    masks, kinds, _ = _stage_masks(cfg, run_dir, model, eval_graphs)
    records = _stage_records(cfg, run_dir, eval_graphs, masks, model, cvgae_model)

    sweep_rows = None
    if cfg.has_section("sweep"):
        sweep_rows = run_sweep(cfg, run_dir, dataset, model, metric_graphs,
                               metric_seed)

    report = build_report(cfg, eval_graphs, masks, records, kinds,
                          generator_metrics, sweep_rows)
    report["predictor"] = {
        "train_accuracy": pred_ckpt.metrics["train_accuracy"],
        "test_accuracy": pred_ckpt.metrics["test_accuracy"],
    }
    _write_json(run_dir / "report.json", report)
    _write_tables(run_dir, report)
    write_rho_chart(run_dir / "fig2.svg", report["explainers"])
    if sweep_rows is not None:
        _write_csv(run_dir / "sweep.csv",
                   ["lambda", "gamma", "val", "fid"],
                   [[repr(r["lambda"]), repr(r["gamma"]), repr(r["val"]),
                     repr(r["fid"])] for r in sweep_rows])

    artifacts = sorted(p.name for p in run_dir.iterdir()
                       if p.is_file() and p.name != "manifest.json")
    _write_json(run_dir / "manifest.json",
                {"artifacts": {name: _sha256_file(run_dir / name)
                               for name in artifacts}})
    return report


def run_sweep(cfg: ExperimentConfig, run_dir: Path, dataset, model,
              metric_graphs, metric_seed: int) -> list[dict]:
    """VAL/FID grid over penalty and contrastive weights (one row per cell)."""
    lambdas = cfg.get_list("sweep", "lambdas", [0.1, 1.0, 5.0, 10.0])
    gammas = cfg.get_list("sweep", "gammas", [0.1, 1.0, 3.0, 10.0])
    epochs = cfg.get("sweep", "epochs", cfg.get("generator", "epochs", 100, int), int)
    train_count = cfg.get("sweep", "train_graphs",
                          cfg.get("generator", "train_graphs", len(dataset), int),
                          int)
    rows = []
    for lam in lambdas:
        for gam in gammas:
            tag = f"sweep-l{lam}-g{gam}"
            generator, _ = _stage_generator(
                cfg, run_dir, dataset[:train_count], "cvgae",
                overrides={"penalty_weight": lam, "contrastive_weight": gam,
                           "max_epochs": epochs},
                tag=tag)
            row = _generator_metric_row(cfg, metric_graphs, generator, model,
                                        metric_seed)
            rows.append({"lambda": lam, "gamma": gam,
                         "val": row["val"], "fid": row["fid"]})
    return rows
