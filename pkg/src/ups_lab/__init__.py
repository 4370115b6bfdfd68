"""Desk-scale semi-supervised learning laboratory.

Uncertainty-aware pseudo-label selection with negative learning, an iterative
self-training pipeline, and calibration-analysis tooling, built on a small
self-contained differentiable classifier.
"""

__version__ = "0.1.0"

from .model import (
    ForwardMode,
    Gradients,
    ModelState,
    OptimizerState,
    TemperatureConfig,
    backward,
    forward,
    init_model,
    learning_rate,
    load_model,
    save_model,
    sgd_step,
)
from .losses import (
    LossSpec,
    masked_bce,
    negative_cross_entropy,
    positive_cross_entropy,
)
from .uncertainty import EstimatorConfig, UncertaintyEstimate, combine_confidence, estimate
from .selection import (
    PseudoLabelSet,
    SelectionConfig,
    SelectionReport,
    balance_classes,
    generate_labels,
    select_confidence,
    select_ups,
    selection_stats,
)
from .calibration import (
    EceReport,
    PredictionDump,
    compute_ece,
    ece_vs_uncertainty_sweep,
    multilabel_macro_ece,
    synthetic_overconfident_dump,
)
from .data import (
    SslDataset,
    load_csv,
    make_blobs_multilabel,
    make_two_moons,
    save_csv,
    split_labeled,
)
from .pipeline import (
    IterationRecord,
    PipelineConfig,
    SslRunResult,
    evaluate,
    mean_average_precision,
    run_ssl,
    run_supervised,
)
