"""Pseudo-label generation, the three selection regimes, and class balancing.

Selection works entirely on per-class probabilities ``p`` and uncertainties
``u``; ground-truth labels never influence a mask. A mask entry ``g[i, c] = 1``
means class c of sample i participates in training: as a positive label when
the pseudo-label is 1, as a negative label when it is 0.

Regimes:

* ``vanilla`` — every generated pseudo-label is used (single-label: the argmax
  class of each sample; multi-label: every class).
* ``confidence`` — threshold gates: positives need p >= tau_p, negatives need
  p <= tau_n.
* ``ups`` — the confidence gates conjoined with uncertainty gates: positives
  additionally need u <= kappa_p, negatives u <= kappa_n. A UPS mask is
  therefore always a subset of the confidence mask at equal taus.

Boundary comparisons are inclusive exactly as written above. Argmax
pseudo-labels break ties toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidParameterError, ShapeError

VANILLA = "vanilla"
CONFIDENCE = "confidence"
UPS = "ups"
REGIMES = (VANILLA, CONFIDENCE, UPS)

ARGMAX = "argmax"
FIXED = "fixed"
GAMMA_MODES = (ARGMAX, FIXED)
FIXED_GAMMA = 0.5

SINGLE_LABEL = "single_label"
MULTI_LABEL = "multi_label"


@dataclass(frozen=True)
class SelectionConfig:
    tau_p: float = 0.7
    tau_n: float = 0.05
    kappa_p: float = 0.05
    kappa_n: float = 0.005
    gamma_mode: str = ARGMAX
    regime: str = UPS
    balance_iters: int = 10

    def __post_init__(self):
        if not (0.0 < self.tau_p < 1.0 and 0.0 < self.tau_n < 1.0):
            raise InvalidParameterError("confidence thresholds must lie in (0, 1)")
        if self.tau_p < self.tau_n:
            raise InvalidParameterError(
                f"tau_p ({self.tau_p}) must be >= tau_n ({self.tau_n})"
            )
        if self.kappa_p < 0 or self.kappa_n < 0:
            raise InvalidParameterError("uncertainty thresholds must be >= 0")
        if self.gamma_mode not in GAMMA_MODES:
            raise InvalidParameterError(f"gamma_mode must be one of {GAMMA_MODES}")
        if self.regime not in REGIMES:
            raise InvalidParameterError(f"regime must be one of {REGIMES}")
        if self.balance_iters < 0:
            raise InvalidParameterError("balance_iters must be >= 0")


@dataclass(frozen=True)
class PseudoLabelSet:
    """Hard pseudo-labels plus the per-class selection mask for each sample."""

    labels: np.ndarray  # (N, C) in {0, 1}
    masks: np.ndarray   # (N, C) in {0, 1}
    mode: str
    iteration: int = 0

    def __post_init__(self):
        if self.labels.shape != self.masks.shape:
            raise ShapeError(
                f"labels {self.labels.shape} and masks {self.masks.shape} differ"
            )
        if self.mode == SINGLE_LABEL:
            if ((self.masks * self.labels).sum(axis=1) > 1).any():
                raise InvalidParameterError(
                    "single-label selection marked more than one positive for a sample"
                )

    @property
    def positive_masks(self) -> np.ndarray:
        return self.masks * self.labels

    @property
    def negative_masks(self) -> np.ndarray:
        return self.masks * (1 - self.labels)


def generate_labels(probs: np.ndarray, gamma_mode: str = ARGMAX) -> np.ndarray:
    """Hard labels from probabilities: 1 where p >= gamma.

    ``argmax`` uses the row maximum as gamma and resolves ties to the lowest
    class index, yielding one-hot rows. ``fixed`` uses gamma = 0.5, allowing
    any number of positives per row.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if gamma_mode == ARGMAX:
        labels = np.zeros(probs.shape, dtype=np.int8)
        labels[np.arange(len(probs)), probs.argmax(axis=1)] = 1
        return labels
    if gamma_mode == FIXED:
        return (probs >= FIXED_GAMMA).astype(np.int8)
    raise InvalidParameterError(f"gamma_mode must be one of {GAMMA_MODES}")


def vanilla_masks(labels: np.ndarray, mode: str) -> np.ndarray:
    """Masks for unselective pseudo-labeling.

    Single-label training targets are the argmax classes, so only those
    entries carry a label; multi-label treats every class as labeled.
    """
    if mode == SINGLE_LABEL:
        return np.asarray(labels, dtype=np.int8).copy()
    return np.ones_like(labels, dtype=np.int8)


def select_confidence(probs: np.ndarray, labels: np.ndarray,
                      cfg: SelectionConfig) -> np.ndarray:
    """Confidence-gated masks: positives at p >= tau_p, negatives at p <= tau_n."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != labels.shape:
        raise ShapeError(f"probs {probs.shape} and labels {labels.shape} differ")
    return ((probs >= cfg.tau_p) | (probs <= cfg.tau_n)).astype(np.int8)


def select_ups(probs: np.ndarray, stds: np.ndarray, labels: np.ndarray,
               cfg: SelectionConfig) -> np.ndarray:
    """Uncertainty-aware masks: confidence gates conjoined with u-thresholds."""
    probs = np.asarray(probs, dtype=np.float64)
    stds = np.asarray(stds, dtype=np.float64)
    if probs.shape != stds.shape:
        raise ShapeError(f"probs {probs.shape} and stds {stds.shape} differ")
    if probs.shape != labels.shape:
        raise ShapeError(f"probs {probs.shape} and labels {labels.shape} differ")
    positive = (stds <= cfg.kappa_p) & (probs >= cfg.tau_p)
    negative = (stds <= cfg.kappa_n) & (probs <= cfg.tau_n)
    return (positive | negative).astype(np.int8)


def select(probs: np.ndarray, stds: np.ndarray | None, labels: np.ndarray,
           cfg: SelectionConfig, mode: str) -> np.ndarray:
    """Dispatch to the configured regime."""
    if cfg.regime == VANILLA:
        return vanilla_masks(labels, mode)
    if cfg.regime == CONFIDENCE:
        return select_confidence(probs, labels, cfg)
    if stds is None:
        raise InvalidParameterError("ups regime needs per-class uncertainties")
    return select_ups(probs, stds, labels, cfg)


def balance_classes(pseudo: PseudoLabelSet, probs: np.ndarray) -> PseudoLabelSet:
    """Equalize per-class positive selections.

    Every class keeps only its n_min highest-confidence positive selections,
    where n_min is the smallest per-class positive count (possibly zero).
    Ties in confidence keep the lower sample index. Negative selections are
    left untouched.
    """
    probs = np.asarray(probs, dtype=np.float64)
    pos = pseudo.positive_masks.astype(bool)
    counts = pos.sum(axis=0)
    n_min = int(counts.min())
    masks = pseudo.masks.copy()
    for c in np.nonzero(counts > n_min)[0]:
        rows = np.nonzero(pos[:, c])[0]
        order = rows[np.argsort(-probs[rows, c], kind="stable")]
        masks[order[n_min:], c] = 0
    return replace(pseudo, masks=masks)


@dataclass(frozen=True)
class SelectionReport:
    """Aggregated view of one selection round."""

    n_samples: int
    n_classes: int
    pos_per_class: np.ndarray
    neg_per_class: np.ndarray
    pos_per_sample: np.ndarray
    neg_per_sample: np.ndarray
    total_pos: int
    total_neg: int
    samples_with_pos: int
    samples_neg_only: int
    samples_selected: int
    accuracy: float | None
    pos_accuracy: float | None
    neg_accuracy: float | None
    per_class_accuracy: np.ndarray | None


def selection_stats(pseudo: PseudoLabelSet,
                    ground_truth: np.ndarray | None = None) -> SelectionReport:
    """Count selections and, when ground truth is supplied, score them.

    Accuracy is the fraction of selected entries whose pseudo-label matches
    the true class indicator; it is absent (None) when nothing is selected or
    no ground truth is given.
    """
    pos = pseudo.positive_masks.astype(bool)
    neg = pseudo.negative_masks.astype(bool)
    selected = pos | neg
    pos_per_sample = pos.sum(axis=1)
    neg_per_sample = neg.sum(axis=1)

    accuracy = pos_accuracy = neg_accuracy = None
    per_class_accuracy = None
    if ground_truth is not None:
        truth = np.asarray(ground_truth)
        if truth.shape != pseudo.labels.shape:
            raise ShapeError(
                f"ground truth {truth.shape} and labels {pseudo.labels.shape} differ"
            )
        match = pseudo.labels == truth

        def _score(mask: np.ndarray) -> float | None:
            total = int(mask.sum())
            if total == 0:
                return None
            return float(match[mask].sum() / total)

        accuracy = _score(selected)
        pos_accuracy = _score(pos)
        neg_accuracy = _score(neg)
        per_class_accuracy = np.full(pseudo.labels.shape[1], np.nan)
        for c in range(pseudo.labels.shape[1]):
            score = _score(selected[:, c])
            if score is not None:
                per_class_accuracy[c] = score

    return SelectionReport(
        n_samples=pseudo.labels.shape[0],
        n_classes=pseudo.labels.shape[1],
        pos_per_class=pos.sum(axis=0),
        neg_per_class=neg.sum(axis=0),
        pos_per_sample=pos_per_sample,
        neg_per_sample=neg_per_sample,
        total_pos=int(pos.sum()),
        total_neg=int(neg.sum()),
        samples_with_pos=int((pos_per_sample > 0).sum()),
        samples_neg_only=int(((pos_per_sample == 0) & (neg_per_sample > 0)).sum()),
        samples_selected=int((pos_per_sample + neg_per_sample > 0).sum()),
        accuracy=accuracy,
        pos_accuracy=pos_accuracy,
        neg_accuracy=neg_accuracy,
        per_class_accuracy=per_class_accuracy,
    )


def report_rows(report: SelectionReport, iteration: int) -> list[dict]:
    """CSV-ready rows: one per class plus an ``all`` summary row."""
    rows = []
    for c in range(report.n_classes):
        acc = None
        if report.per_class_accuracy is not None:
            value = report.per_class_accuracy[c]
            acc = None if np.isnan(value) else float(value)
        rows.append({
            "iteration": iteration,
            "class": str(c),
            "pos_selected": int(report.pos_per_class[c]),
            "neg_selected": int(report.neg_per_class[c]),
            "accuracy": acc,
        })
    rows.append({
        "iteration": iteration,
        "class": "all",
        "pos_selected": report.total_pos,
        "neg_selected": report.total_neg,
        "accuracy": report.accuracy,
    })
    return rows
