"""Command-line entry points for every pipeline stage.

    dse gen-data         --out data.txt --num 3000 --seed 17
    dse train-predictor  --data data.txt --out predictor.npz
    dse explain          --data data.txt --ckpt predictor.npz --explainer sa,random
    dse train-generator  --data data.txt --out runs/gen
    dse evaluate         --data data.txt --masks masks.jsonl --predictor ... --generator ...
    dse report           --config experiment.ini --run-dir runs/exp1
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import cvgae, evalharness, explainers, frontdoor, predictor, tr3gen
from .checkpoint import load_checkpoint, save_checkpoint
from .graphcore import load_dataset, save_dataset


@click.group()
def main():
    """Deconfounded evaluation of graph-classifier explanations."""


@main.command("gen-data")
@click.option("--out", type=click.Path(), required=True)
@click.option("--num", default=3000, show_default=True)
@click.option("--seed", default=17, show_default=True)
@click.option("--base-min", default=8, show_default=True)
@click.option("--base-max", default=15, show_default=True)
@click.option("--feature-dim", default=2, show_default=True)
def gen_data(out, num, seed, base_min, base_max, feature_dim):
    """Generate the tree+motif dataset and a manifest next to it."""
    cfg = tr3gen.Tr3Config(num_graphs=num, seed=seed, base_nodes_min=base_min,
                           base_nodes_max=base_max, feature_dim=feature_dim)
    dataset = tr3gen.generate_dataset(cfg)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, out)
    counts: dict[str, int] = {}
    for g in dataset:
        counts[tr3gen.MOTIF_KINDS[g.label]] = counts.get(
            tr3gen.MOTIF_KINDS[g.label], 0) + 1
    manifest = {
        "config": dict(cfg.__dict__, motif_set=list(cfg.motif_set)),
        "class_counts": counts,
        "num_graphs": len(dataset),
    }
    out.with_name(out.stem + "-manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {len(dataset)} graphs to {out}")


@main.command("train-predictor")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--epochs", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--hidden-dim", default=64, show_default=True)
@click.option("--num-layers", default=3, show_default=True)
@click.option("--learning-rate", default=1e-3, show_default=True)
@click.option("--weight-decay", default=1e-5, show_default=True)
def train_predictor(data, out, epochs, seed, hidden_dim, num_layers,
                    learning_rate, weight_decay):
    """Train the graph classifier and save its checkpoint."""
    dataset = load_dataset(data)
    cfg = predictor.PredictorConfig(
        hidden_dim=hidden_dim, num_layers=num_layers, learning_rate=learning_rate,
        weight_decay=weight_decay, max_epochs=epochs, seed=seed)
    _, ckpt = predictor.train(dataset, cfg)
    save_checkpoint(ckpt, out)
    click.echo(f"train accuracy {ckpt.metrics['train_accuracy']:.4f}, "
               f"test accuracy {ckpt.metrics['test_accuracy']:.4f} -> {out}")


@main.command("explain")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--ckpt", type=click.Path(exists=True), required=True)
@click.option("--explainer", default=",".join(explainers.EXPLAINER_KINDS),
              show_default=True, help="comma-separated explainer kinds")
@click.option("--ratio", default=0.15, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--limit", default=0, show_default=True,
              help="explain only the first N graphs (0 = all)")
@click.option("--seed", default=0, show_default=True)
def explain_cmd(data, ckpt, explainer, ratio, out, limit, seed):
    """Write one JSON mask record per (graph, explainer) to a .jsonl file."""
    dataset = load_dataset(data)
    if limit:
        dataset = dataset[:limit]
    model = predictor.predictor_from_checkpoint(load_checkpoint(ckpt))
    kinds = [k.strip() for k in explainer.split(",") if k.strip()]
    with open(out, "w", encoding="utf-8") as fh:
        for g in dataset:
            for kind in kinds:
                cfg = explainers.ExplainerConfig(kind=kind, mask_ratio=ratio,
                                                 seed=seed)
                mask = explainers.explain(model, g, g.label, cfg)
                fh.write(json.dumps(evalharness.mask_record(mask, kind, ratio),
                                    sort_keys=True) + "\n")
    click.echo(f"wrote {len(dataset) * len(kinds)} masks to {out}")


@main.command("train-generator")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True,
              help="checkpoint prefix; writes <out>.gen.npz, <out>.disc.npz, <out>.losses.csv")
@click.option("--encode-dim", default=256, show_default=True)
@click.option("--batch-size", default=256, show_default=True)
@click.option("--learning-rate", default=2e-4, show_default=True)
@click.option("--beta", default=1e-4, show_default=True)
@click.option("--gamma", default=3.0, show_default=True)
@click.option("--omega", default=5.0, show_default=True)
@click.option("--lambda", "lambda_", default=5.0, show_default=True)
@click.option("--tau", default=0.1, show_default=True)
@click.option("--ratio", default=0.3, show_default=True)
@click.option("--epochs", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--variant", type=click.Choice(["cvgae", "vgae"]), default="cvgae",
              show_default=True)
def train_generator(data, out, encode_dim, batch_size, learning_rate, beta,
                    gamma, omega, lambda_, tau, ratio, epochs, seed, variant):
    """Adversarially train the surrogate generator."""
    dataset = load_dataset(data)
    cfg = cvgae.GeneratorConfig(
        encode_dim=encode_dim, batch_size=batch_size, learning_rate=learning_rate,
        kl_weight=beta,
        contrastive_weight=0.0 if variant == "vgae" else gamma,
        adversarial_weight=0.0 if variant == "vgae" else omega,
        penalty_weight=lambda_, temperature=tau, masking_ratio=ratio,
        max_epochs=epochs, seed=seed, conditional=variant == "cvgae")
    gen_ckpt, disc_ckpt = cvgae.train_generator(dataset, cfg)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(gen_ckpt, out.with_suffix(".gen.npz"))
    save_checkpoint(disc_ckpt, out.with_suffix(".disc.npz"))
    evalharness._write_losses_csv(out.with_suffix(".losses.csv"),
                                  gen_ckpt.metrics["history"])
    last = gen_ckpt.metrics["history"][-1]
    click.echo(f"trained {len(gen_ckpt.metrics['history'])} epochs; "
               f"final losses vae={last['loss_vae']:.3f} "
               f"contrastive={last['loss_contrastive']:.3f} "
               f"disc={last['loss_disc']:.3f}")


@main.command("evaluate")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--masks", type=click.Path(exists=True), required=True)
@click.option("--predictor", "predictor_path", type=click.Path(exists=True),
              required=True)
@click.option("--generator", "generator_path", type=click.Path(exists=True),
              required=True)
@click.option("--n", default=50, show_default=True, help="surrogates per estimate")
@click.option("--estimator", type=click.Choice(["reduced", "weighted"]),
              default="reduced", show_default=True)
@click.option("--pool-size", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def evaluate_cmd(data, masks, predictor_path, generator_path, n, estimator,
                 pool_size, seed, out):
    """Estimate removal and front-door importance for every mask record."""
    dataset = load_dataset(data)
    model = predictor.predictor_from_checkpoint(load_checkpoint(predictor_path))
    generator = cvgae.generator_from_checkpoint(load_checkpoint(generator_path))
    mask_map = evalharness.load_masks(masks)
    cfg = frontdoor.DseConfig(num_surrogates=n, estimator=estimator,
                              adjustment_pool_size=pool_size, seed=seed)
    wanted = {gid: g for gid, g in ((g.graph_id, g) for g in dataset)
              if gid in mask_map}
    records = frontdoor.evaluate_all(list(wanted.values()), mask_map, model,
                                     generator, cfg)
    frontdoor.save_records(records, out)
    click.echo(f"wrote {len(records)} importance records to {out}")


@main.command("report")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--run-dir", type=click.Path(), required=True)
def report_cmd(config_path, run_dir):
    """Run (or resume) the full experiment pipeline."""
    report = evalharness.run_experiment(config_path, run_dir)
    spearman = report["spearman"]
    click.echo(f"report written to {run_dir}/report.json")
    click.echo(f"spearman(re vs precision) = {spearman['re_vs_precision']:.3f}, "
               f"spearman(dse vs precision) = {spearman['dse_vs_precision']:.3f}")


if __name__ == "__main__":
    main()
