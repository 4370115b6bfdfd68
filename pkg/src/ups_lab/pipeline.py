"""The iterative self-training loop: train, pseudo-label, select, reinitialize.

Iteration 0 trains only on the labeled set. Every later iteration generates
fresh pseudo-labels for the whole unlabeled pool with the previous model,
selects a subset under the configured regime, then trains a freshly
reinitialized network (new seed, new parameters) on the labeled set plus the
selection. Nothing carries over between iterations except the selected labels
themselves, which keeps earlier mistakes from compounding.

The loop stops at ``max_iterations`` (which counts the initial supervised
round) or once the total selected-label count stabilizes: relative change
below ``convergence_delta`` between consecutive iterations.

Seeds: iteration k initializes its model from hash(master_seed, k) and its
estimator from hash(master_seed, k, "mc"); shuffling and per-step dropout draw
further child seeds from the model seed. Two runs with the same master seed
and config are bit-identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses as losses_mod
from .calibration import PredictionDump, compute_ece, dump_from_probs, multilabel_macro_ece
from .data import MULTI_LABEL, SINGLE_LABEL, SslDataset, TrainView
from .errors import EmptyInputError, InvalidDatasetError, InvalidParameterError
from .model import (
    SIGMOID,
    SOFTMAX,
    ForwardMode,
    Gradients,
    ModelState,
    OptimizerState,
    TemperatureConfig,
    backward,
    init_model,
    sgd_step,
)
from .seeding import derive_seed
from .selection import (
    PseudoLabelSet,
    SelectionConfig,
    SelectionReport,
    balance_classes,
    generate_labels,
    select,
    selection_stats,
)
from .uncertainty import EstimatorConfig, combine_confidence, estimate


@dataclass(frozen=True)
class OptimizerConfig:
    base_lr: float = 0.03
    min_lr: float = 0.0


@dataclass(frozen=True)
class PipelineConfig:
    hidden_dims: tuple[int, ...] = (32, 32)
    dropout_rate: float = 0.3
    max_iterations: int = 20
    epochs_per_iteration: int = 50
    batch_size: int = 64
    convergence_delta: float = 0.01
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    temperature: TemperatureConfig = field(default_factory=lambda: TemperatureConfig(T=2.0))
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    master_seed: int = 0
    use_negative_learning: bool = True
    negatives_with_positive: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if self.epochs_per_iteration < 1:
            raise InvalidParameterError("epochs_per_iteration must be >= 1")
        if self.batch_size < 1:
            raise InvalidParameterError("batch_size must be >= 1")
        if not 0.0 <= self.convergence_delta <= 1.0:
            raise InvalidParameterError("convergence_delta must lie in [0, 1]")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    pos_selected: int
    neg_selected: int
    sel_accuracy: float | None
    test_metric: float
    ece: float
    wall_clock: float


RECORD_CSV_HEADER = ["iteration", "pos_selected", "neg_selected",
                     "sel_accuracy", "test_metric", "ece"]


@dataclass
class SslRunResult:
    model: ModelState
    records: list[IterationRecord]
    selection_reports: list[SelectionReport | None]
    warnings: list[str]
    converged: bool


# --- training-set assembly -------------------------------------------------

_KIND_POS = 0
_KIND_NEG = 1
_KIND_BCE = 2


@dataclass
class _TrainingSet:
    features: np.ndarray
    targets: np.ndarray
    masks: np.ndarray
    kinds: np.ndarray

    @property
    def n(self) -> int:
        return len(self.features)


def _assemble_single(view: TrainView, pseudo: PseudoLabelSet | None,
                     cfg: PipelineConfig) -> _TrainingSet:
    """Mix labeled and selected pseudo-labeled samples for single-label training.

    A sample with a selected positive label trains with cross-entropy on that
    class; a sample with only selected negatives trains with negative
    cross-entropy (when negative learning is on). With
    ``negatives_with_positive`` a positive sample additionally contributes its
    selected negatives as a second training row.
    """
    feats = [view.labeled_features]
    targets = [view.labeled_labels.astype(np.float64)]
    n_classes = view.labeled_labels.shape[1]
    masks = [np.ones((len(view.labeled_features), n_classes))]
    kinds = [np.full(len(view.labeled_features), _KIND_POS)]

    if pseudo is not None:
        pos_rows = pseudo.positive_masks.sum(axis=1) > 0
        neg_masks = pseudo.negative_masks
        neg_rows = neg_masks.sum(axis=1) > 0

        if pos_rows.any():
            feats.append(view.unlabeled_features[pos_rows])
            targets.append((pseudo.positive_masks[pos_rows]).astype(np.float64))
            masks.append(np.ones((int(pos_rows.sum()), n_classes)))
            kinds.append(np.full(int(pos_rows.sum()), _KIND_POS))

        if cfg.use_negative_learning:
            if cfg.negatives_with_positive:
                nl_rows = neg_rows
            else:
                nl_rows = neg_rows & ~pos_rows
            if nl_rows.any():
                feats.append(view.unlabeled_features[nl_rows])
                targets.append(pseudo.labels[nl_rows].astype(np.float64))
                masks.append(neg_masks[nl_rows].astype(np.float64))
                kinds.append(np.full(int(nl_rows.sum()), _KIND_NEG))

    return _TrainingSet(
        features=np.vstack(feats),
        targets=np.vstack(targets),
        masks=np.vstack(masks),
        kinds=np.concatenate(kinds),
    )


def _assemble_multi(view: TrainView, pseudo: PseudoLabelSet | None,
                    cfg: PipelineConfig) -> _TrainingSet:
    """Everything trains with mask-aware BCE; labeled rows use full masks."""
    feats = [view.labeled_features]
    targets = [view.labeled_labels.astype(np.float64)]
    n_classes = view.labeled_labels.shape[1]
    masks = [np.ones((len(view.labeled_features), n_classes))]

    if pseudo is not None:
        sel_masks = pseudo.masks.astype(np.float64)
        if not cfg.use_negative_learning:
            sel_masks = pseudo.positive_masks.astype(np.float64)
        rows = sel_masks.sum(axis=1) > 0
        if rows.any():
            feats.append(view.unlabeled_features[rows])
            targets.append(pseudo.labels[rows].astype(np.float64))
            masks.append(sel_masks[rows])

    features = np.vstack(feats)
    return _TrainingSet(
        features=features,
        targets=np.vstack(targets),
        masks=np.vstack(masks),
        kinds=np.full(len(features), _KIND_BCE),
    )


_KIND_TO_LOSS = {
    _KIND_POS: losses_mod.POSITIVE_CE,
    _KIND_NEG: losses_mod.NEGATIVE_CE,
    _KIND_BCE: losses_mod.MASKED_BCE,
}


def _fit(train_set: _TrainingSet, cfg: PipelineConfig, head: str,
         input_dim: int, n_classes: int, model_seed: int) -> ModelState:
    """Train a freshly initialized network on the assembled set.

    The training loss always sees raw (T=1) probabilities; the configured
    temperature is a calibration-time transform applied when probabilities are
    produced for selection and evaluation, not a training-time change.
    """
    model = init_model([input_dim, *cfg.hidden_dims, n_classes],
                       cfg.dropout_rate, head, model_seed)
    train_temp = TemperatureConfig(T=1.0)
    steps_per_epoch = math.ceil(train_set.n / cfg.batch_size)
    opt = OptimizerState(
        base_lr=cfg.optimizer.base_lr,
        current_step=0,
        total_steps=cfg.epochs_per_iteration * steps_per_epoch,
        min_lr=cfg.optimizer.min_lr,
    )
    step = 0
    for epoch in range(cfg.epochs_per_iteration):
        rng = np.random.default_rng(derive_seed(model_seed, "shuffle", epoch))
        order = rng.permutation(train_set.n)
        for start in range(0, train_set.n, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            mode = ForwardMode.stochastic(derive_seed(model_seed, "step", step))
            grad_w = [np.zeros_like(w) for w in model.weights]
            grad_b = [np.zeros_like(b) for b in model.biases]
            contributing = 0
            for kind in (_KIND_POS, _KIND_NEG, _KIND_BCE):
                rows = batch[train_set.kinds[batch] == kind]
                if len(rows) == 0:
                    continue
                spec = losses_mod.LossSpec(
                    kind=_KIND_TO_LOSS[kind],
                    targets=train_set.targets[rows],
                    masks=None if kind == _KIND_POS else train_set.masks[rows],
                )
                grads, _, n = backward(model, train_set.features[rows], spec,
                                       mode=mode, temp=train_temp)
                for gw, w in zip(grad_w, grads.weights):
                    gw += n * w
                for gb, b in zip(grad_b, grads.biases):
                    gb += n * b
                contributing += n
            if contributing == 0:
                continue
            combined = Gradients(
                tuple(g / contributing for g in grad_w),
                tuple(g / contributing for g in grad_b),
            )
            model, opt = sgd_step(model, combined, opt)
            step += 1
    return model


# --- evaluation -------------------------------------------------------------

def average_precision(scores: np.ndarray, positives: np.ndarray) -> float:
    """AP for one class: mean precision at each positive, ranked by score.

    Ranking is by descending score with ties resolved toward the lower sample
    index. This is the interpolation-free definition: for the k-th positive at
    rank r_k, precision is k / r_k, and AP averages these over all positives.
    """
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    ranked = np.asarray(positives)[order].astype(bool)
    n_pos = int(ranked.sum())
    if n_pos == 0:
        raise EmptyInputError("average precision needs at least one positive")
    hits = np.cumsum(ranked)
    ranks = np.arange(1, len(ranked) + 1)
    return float((hits[ranked] / ranks[ranked]).sum() / n_pos)


def mean_average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """Macro mAP over classes; classes without test positives are skipped."""
    labels = np.asarray(labels)
    aps = []
    for c in range(labels.shape[1]):
        if labels[:, c].sum() == 0:
            continue
        aps.append(average_precision(scores[:, c], labels[:, c]))
    if not aps:
        raise EmptyInputError("no class has a positive test label")
    return float(np.mean(aps))


def _eval_from_estimate(mean_probs: np.ndarray, std_probs: np.ndarray,
                        labels: np.ndarray, mode: str) -> tuple[float, PredictionDump]:
    labels = np.asarray(labels)
    if mode == SINGLE_LABEL:
        metric = float((mean_probs.argmax(axis=1) == labels.argmax(axis=1)).mean())
        dump = dump_from_probs(mean_probs, std_probs, labels.argmax(axis=1))
        return metric, dump
    metric = mean_average_precision(mean_probs, labels)
    pred = mean_probs.argmax(axis=1)
    rows = np.arange(len(mean_probs))
    correct = labels[rows, pred] == 1
    # the dump is argmax-shaped: when the top class is absent, report the
    # lowest-index present class as the reference so pred != true marks a miss
    first_positive = labels.argmax(axis=1)
    true_class = np.where(correct, pred, first_positive)
    dump = PredictionDump(
        sample_id=rows,
        confidence=mean_probs[rows, pred],
        pred_class=pred,
        true_class=true_class,
        uncertainty=std_probs[rows, pred],
    )
    return metric, dump


def evaluate(model: ModelState, features, labels, mode: str,
             est_cfg: EstimatorConfig,
             temp: TemperatureConfig | None = None) -> tuple[float, PredictionDump]:
    """Score a model on a test split.

    Single-label: top-1 accuracy. Multi-label: macro mean average precision.
    Predictions come from the estimator's across-pass mean, matching what the
    selection step consumes, and the dump carries the predicted class's
    uncertainty for calibration analysis.
    """
    features = np.asarray(features, dtype=np.float64)
    if len(features) == 0:
        raise EmptyInputError("cannot evaluate on an empty split")
    est = estimate(model, features, est_cfg, temp)
    return _eval_from_estimate(est.mean_probs, est.std_probs, labels, mode)


# --- the loop ---------------------------------------------------------------

def run_ssl(dataset: SslDataset, cfg: PipelineConfig) -> SslRunResult:
    """Run the full iterative loop; returns the final model and per-iteration records."""
    if dataset.n_labeled == 0:
        raise InvalidDatasetError("cannot train with an empty labeled set")
    head = SOFTMAX if dataset.mode == SINGLE_LABEL else SIGMOID
    view = dataset.train_view()

    warnings = []
    class_counts = view.labeled_labels.sum(axis=0)
    for c in np.nonzero(class_counts == 0)[0]:
        warnings.append(f"class {int(c)} has no labeled sample; training proceeds")

    assemble = _assemble_single if dataset.mode == SINGLE_LABEL else _assemble_multi

    def run_iteration(k: int, pseudo: PseudoLabelSet | None):
        train_set = assemble(view, pseudo, cfg)
        model = _fit(train_set, cfg, head, dataset.n_features,
                     dataset.n_classes, derive_seed(cfg.master_seed, k))
        eval_est = estimate(
            model, dataset.test_features,
            replace(cfg.estimator, base_seed=derive_seed(cfg.master_seed, k, "eval")),
            cfg.temperature,
        )
        metric, dump = _eval_from_estimate(eval_est.mean_probs, eval_est.std_probs,
                                           dataset.test_labels, dataset.mode)
        if dataset.mode == SINGLE_LABEL:
            ece = compute_ece(dump).ece
        else:
            ece = multilabel_macro_ece(eval_est.mean_probs, eval_est.std_probs,
                                       dataset.test_labels)
        return model, metric, ece

    records: list[IterationRecord] = []
    reports: list[SelectionReport | None] = []
    converged = False

    started = time.perf_counter()
    model, metric, ece = run_iteration(0, None)
    records.append(IterationRecord(
        iteration=0, pos_selected=0, neg_selected=0, sel_accuracy=None,
        test_metric=metric, ece=ece, wall_clock=time.perf_counter() - started,
    ))
    reports.append(None)

    prev_total = None
    if dataset.n_unlabeled > 0:
        for k in range(1, cfg.max_iterations):
            started = time.perf_counter()
            sel_est = estimate(
                model, view.unlabeled_features,
                replace(cfg.estimator, base_seed=derive_seed(cfg.master_seed, k, "mc")),
                cfg.temperature,
            )
            probs = combine_confidence(sel_est)
            labels = generate_labels(probs, cfg.selection.gamma_mode)
            masks = select(probs, sel_est.std_probs, labels, cfg.selection, dataset.mode)
            pseudo = PseudoLabelSet(labels=labels, masks=masks,
                                    mode=dataset.mode, iteration=k)
            if k <= cfg.selection.balance_iters:
                pseudo = balance_classes(pseudo, probs)
            report = selection_stats(pseudo, dataset.unlabeled_ground_truth())
            total = report.total_pos + report.total_neg

            model, metric, ece = run_iteration(k, pseudo)
            records.append(IterationRecord(
                iteration=k,
                pos_selected=report.total_pos,
                neg_selected=report.total_neg,
                sel_accuracy=report.accuracy,
                test_metric=metric,
                ece=ece,
                wall_clock=time.perf_counter() - started,
            ))
            reports.append(report)

            if prev_total is not None:
                relative = abs(total - prev_total) / max(prev_total, 1)
                if relative < cfg.convergence_delta:
                    converged = True
                    break
            prev_total = total

    return SslRunResult(model=model, records=records, selection_reports=reports,
                        warnings=warnings, converged=converged)


def run_supervised(dataset: SslDataset, cfg: PipelineConfig) -> SslRunResult:
    """Train on the labeled set only (the loop's degenerate single iteration)."""
    return run_ssl(dataset, replace(cfg, max_iterations=1))


def write_records_csv(records: list[IterationRecord], path) -> None:
    """Iteration records as CSV. Wall-clock time is deliberately omitted so
    identical runs produce identical bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(RECORD_CSV_HEADER) + "\n")
        for r in records:
            acc = "" if r.sel_accuracy is None else repr(r.sel_accuracy)
            fh.write(f"{r.iteration},{r.pos_selected},{r.neg_selected},"
                     f"{acc},{repr(r.test_metric)},{repr(r.ece)}\n")
