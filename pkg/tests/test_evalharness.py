import json
from pathlib import Path

import numpy as np
import pytest

from dseval.evalharness import (
    ExperimentConfig,
    MissingArtifactError,
    UndefinedCorrelationError,
    fid_metric,
    ground_truth_mask,
    load_masks,
    mask_record,
    pearson,
    precision,
    rank_with_ties,
    rho_comparison,
    run_experiment,
    spearman,
    val_metric,
    write_rho_chart,
)
from dseval.frontdoor import IdentityGenerator, RandomGenerator
from dseval.graphcore import Graph, SurrogateSample, mask_from_selection
from dseval.tr3gen import Tr3Config, generate_dataset

DATA_DIR = Path(__file__).parent / "data"


class FullGraphGenerator:
    """Test double: every surrogate is the parent graph itself."""

    def sample_surrogates(self, g, mask, rngs):
        return [SurrogateSample(parent_id=g.graph_id, edges=g.edges,
                                log_likelihood=0.0, contains_subgraph=True)
                for _ in rngs]


class TestPrecision:
    def test_exact_match_is_one(self, tr3_small):
        g = tr3_small[0]
        mask = mask_from_selection(g.graph_id, g.edges, g.ground_truth_edges)
        assert precision(mask, g) == 1.0

    def test_disjoint_is_zero(self, tr3_small):
        g = tr3_small[0]
        rest = g.edge_set - g.ground_truth_edges
        mask = mask_from_selection(g.graph_id, g.edges, rest)
        assert precision(mask, g) == 0.0

    def test_three_of_four_hand_count(self, tr3_small):
        g = tr3_small[0]
        inside = sorted(g.ground_truth_edges)[:3]
        outside = sorted(g.edge_set - g.ground_truth_edges)[:1]
        mask = mask_from_selection(g.graph_id, g.edges, inside + outside)
        assert precision(mask, g) == 0.75

    def test_empty_selection_is_zero(self, tr3_small):
        g = tr3_small[0]
        mask = mask_from_selection(g.graph_id, g.edges, [])
        assert precision(mask, g) == 0.0

    def test_missing_ground_truth_rejected(self):
        g = Graph(graph_id="nogt", node_count=2, edges=((0, 1),),
                  node_features=np.ones((2, 2)), label=0)
        mask = mask_from_selection(g.graph_id, g.edges, g.edges)
        with pytest.raises(ValueError):
            precision(mask, g)


class TestCorrelations:
    def test_perfect_linear_pearson(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)

    def test_identical_ranking_spearman(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            perm = rng.permutation(8).astype(float)
            assert spearman(perm, perm) == pytest.approx(1.0)
            assert spearman(perm, -perm) == pytest.approx(-1.0)

    def test_reversed_ranking(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_zero_variance_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0, 1.0, 1.0], [1, 2, 3])

    def test_length_mismatch_raises(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1.0], [1.0])

    def test_tied_ranks_are_averaged(self):
        assert rank_with_ties([5.0, 5.0, 1.0]).tolist() == [2.5, 2.5, 1.0]

    def test_spearman_with_ties_matches_manual(self):
        # ranks x: [2.5, 2.5, 1, 4], y: [1, 2, 3, 4]
        xs = [1.0, 1.0, 0.0, 2.0]
        ys = [1.0, 2.0, 3.0, 4.0]
        assert spearman(xs, ys) == pytest.approx(
            pearson([2.5, 2.5, 1.0, 4.0], [1, 2, 3, 4]))


class TestRhoComparison:
    def test_identity_importance_gives_one(self):
        prec = {"sa": [0.1, 0.5, 0.9, 0.3]}
        out = rho_comparison(prec, {"sa": prec["sa"]}, {"sa": prec["sa"]})
        assert out["sa"]["rho_re"] == pytest.approx(1.0)
        assert out["sa"]["rho_dse"] == pytest.approx(1.0)

    def test_constant_list_reported_not_raised(self):
        prec = {"sa": [0.1, 0.5, 0.9]}
        out = rho_comparison(prec, {"sa": [0.4, 0.4, 0.4]},
                             {"sa": [0.1, 0.2, 0.3]})
        assert out["sa"]["rho_re"] is None
        assert "variance" in out["sa"]["rho_re_reason"]
        assert out["sa"]["rho_dse"] is not None


class TestGeneratorMetrics:
    def test_val_of_identity_generator_is_zero(self, trained_small, tr3_small):
        model, _ = trained_small
        val = val_metric(tr3_small[:30], IdentityGenerator(), model,
                         num_surrogates=200, seed=3)
        assert abs(val) <= 0.02
        assert val == pytest.approx(0.0, abs=1e-6)

    def test_fid_of_full_graph_generator_is_zero(self, trained_small, tr3_small):
        model, _ = trained_small
        fid = fid_metric(tr3_small[:10], FullGraphGenerator(), model,
                         num_random_masks=2, num_surrogates=4, seed=1)
        assert fid == pytest.approx(0.0, abs=1e-10)

    def test_fid_nonnegative(self, trained_small, tr3_small):
        model, _ = trained_small
        fid = fid_metric(tr3_small[:5], RandomGenerator(), model,
                         num_random_masks=2, num_surrogates=4, seed=2)
        assert fid >= 0.0


class TestMaskRecords:
    def test_round_trip(self, tr3_small, tmp_path):
        g = tr3_small[0]
        mask = mask_from_selection(g.graph_id, g.edges, g.ground_truth_edges)
        rec = mask_record(mask, "gt", 0.15)
        path = tmp_path / "masks.jsonl"
        path.write_text(json.dumps(rec) + "\n", encoding="utf-8")
        loaded = load_masks(path)
        assert loaded[g.graph_id]["gt"] == mask


TINY_CONFIG = """
[data]
num_graphs = 45
base_nodes_min = 4
base_nodes_max = 6
seed = 21

[predictor]
epochs = 8
seed = 2

[generator]
variants = cvgae,random
encode_dim = 8
batch_size = 16
epochs = 2
learning_rate = 1e-3
disc_hidden = 8
seed = 4

[explainers]
kinds = sa,random
mask_ratio = 0.2

[dse]
num_surrogates = 4
eval_graphs = 6
metric_graphs = 4
fid_masks_per_graph = 1
seed = 5
"""


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    config = root / "tiny.ini"
    config.write_text(TINY_CONFIG, encoding="utf-8")
    run_dir = root / "run"
    report = run_experiment(config, run_dir)
    return config, run_dir, report


class TestRunExperiment:
    def test_artifacts_written(self, tiny_run):
        _, run_dir, _ = tiny_run
        for name in ("report.json", "table2.csv", "table4.csv", "fig2.svg",
                     "losses.csv", "manifest.json", "dataset.txt",
                     "predictor.npz", "generator-cvgae.npz", "masks.jsonl",
                     "records.jsonl"):
            assert (run_dir / name).exists(), name

    def test_report_structure(self, tiny_run):
        _, _, report = tiny_run
        assert set(report["explainers"]) == {"sa", "random"}
        for ranking in report["rankings"].values():
            assert sorted(ranking) == ["random", "sa"]
        assert set(report["generators"]) == {"cvgae", "random"}
        for row in report["generators"].values():
            assert set(row) == {"val", "fid", "mean_imp_dse_gt"}

    def test_rerun_is_byte_identical(self, tiny_run, tmp_path):
        config, run_dir, _ = tiny_run
        other = tmp_path / "run2"
        run_experiment(config, other)
        a = (run_dir / "report.json").read_bytes()
        b = (other / "report.json").read_bytes()
        assert a == b

    def test_resume_from_artifacts_is_identical(self, tiny_run):
        config, run_dir, report = tiny_run
        resumed = run_experiment(config, run_dir)
        assert resumed == report

    def test_report_schema_golden(self, tiny_run):
        _, _, report = tiny_run

        def key_paths(node, prefix=""):
            out = []
            if isinstance(node, dict):
                for k in sorted(node):
                    out.extend(key_paths(node[k], f"{prefix}/{k}"))
            else:
                out.append(f"{prefix}:{type(node).__name__}")
            return out

        golden = json.loads((DATA_DIR / "report_schema.json").read_text())
        assert key_paths(report) == golden

    def test_missing_dataset_artifact_error(self, tmp_path):
        config = tmp_path / "bad.ini"
        config.write_text("[data]\npath = /nonexistent/data.txt\n",
                          encoding="utf-8")
        with pytest.raises(MissingArtifactError) as err:
            run_experiment(config, tmp_path / "run")
        assert "/nonexistent/data.txt" in str(err.value)

    def test_chart_is_deterministic(self, tmp_path):
        block = {"sa": {"rho_re": -0.4, "rho_dse": 0.6},
                 "random": {"rho_re": None, "rho_dse": 0.1}}
        write_rho_chart(tmp_path / "a.svg", block)
        write_rho_chart(tmp_path / "b.svg", block)
        a = (tmp_path / "a.svg").read_bytes()
        assert a == (tmp_path / "b.svg").read_bytes()
        assert b"<svg" in a


class TestSweep:
    def test_sweep_grid_rows(self, tmp_path):
        config = tmp_path / "sweep.ini"
        config.write_text(TINY_CONFIG + """
[sweep]
lambdas = 0.5,5
gammas = 1,3
epochs = 1
""", encoding="utf-8")
        run_dir = tmp_path / "run"
        report = run_experiment(config, run_dir)
        assert len(report["sweep"]) == 4
        cells = {(r["lambda"], r["gamma"]) for r in report["sweep"]}
        assert cells == {(0.5, 1.0), (0.5, 3.0), (5.0, 1.0), (5.0, 3.0)}
        assert (run_dir / "sweep.csv").exists()


class TestExperimentConfig:
    def test_defaults_and_casts(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[data]\nnum_graphs = 99\n", encoding="utf-8")
        cfg = ExperimentConfig.load(path)
        assert cfg.get("data", "num_graphs", 3000, int) == 99
        assert cfg.get("data", "seed", 17, int) == 17
        assert cfg.get_list("generator", "variants", ["cvgae"], str) == ["cvgae"]

    def test_missing_config_raises(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            ExperimentConfig.load(tmp_path / "absent.ini")
