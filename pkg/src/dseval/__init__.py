"""Deconfounded evaluation of graph-classifier explanations.

Pipeline: generate motif-labeled synthetic graphs, train a message-passing
classifier, produce explanatory edge masks with several explainers, train a
conditional variational graph auto-encoder adversarially to complete
subgraphs into in-distribution surrogates, and score explanations by the
front-door importance estimate instead of bare feature removal.
"""

from .graphcore import (
    EdgeMask,
    Graph,
    SurrogateSample,
    induce_subgraph,
    load_dataset,
    mask_from_selection,
    parse_graph,
    save_dataset,
    serialize_graph,
    top_fraction_mask,
)
from .tr3gen import Tr3Config, generate_dataset, motif_template
from .predictor import GraphClassifier, PredictorConfig, importance_removal
from .explainers import EXPLAINER_KINDS, ExplainerConfig, explain
from .cvgae import CvgaeModel, GeneratorConfig, sample_surrogate, train_generator
from .frontdoor import (
    DseConfig,
    IdentityGenerator,
    ImportanceRecord,
    RandomGenerator,
    evaluate_all,
    imp_dse_deletion,
    imp_dse_reduced,
    imp_dse_weighted,
)
from .evalharness import (
    fid_metric,
    pearson,
    precision,
    rho_comparison,
    run_experiment,
    spearman,
    val_metric,
)

__all__ = [name for name in dir() if not name.startswith("_")]
