"""Training objectives: positive cross-entropy, negative cross-entropy, and
mask-aware binary cross-entropy.

Conventions shared by all three losses:

* ``pred`` rows are probabilities (already through the model head).
* ``pseudo`` / ``target`` rows are hard {0,1} label vectors.
* ``mask`` rows mark which classes participate; ``s = mask.sum()`` normalizes
  the per-sample loss, so the value is the arithmetic mean over selected
  entries.
* Probabilities are clipped to [1e-7, 1 - 1e-7] inside the loss only, never
  upstream, so reported probabilities stay untouched. Gradients treat the clip
  as a hard gate (zero outside the clip range).

Batch helpers return per-sample values plus a validity mask; samples with an
empty selection mask are skipped by callers rather than erroring, matching the
per-row operations which do raise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatchError, EmptyMaskError, InvalidTargetError

CLIP_MIN = 1e-7
CLIP_MAX = 1.0 - 1e-7

POSITIVE_CE = "positive_ce"
NEGATIVE_CE = "negative_ce"
MASKED_BCE = "masked_bce"
LOSS_KINDS = (POSITIVE_CE, NEGATIVE_CE, MASKED_BCE)


def _clip(p: np.ndarray) -> np.ndarray:
    return np.clip(p, CLIP_MIN, CLIP_MAX)


def _clip_gate(p: np.ndarray) -> np.ndarray:
    # derivative of the clip: 1 strictly inside the clip range, 0 outside
    return ((p > CLIP_MIN) & (p < CLIP_MAX)).astype(np.float64)


def _check_binary(name: str, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if not np.isin(values, (0, 1)).all():
        raise InvalidTargetError(f"{name} must contain only 0/1 entries")
    return values.astype(np.float64)


def positive_cross_entropy(pred, target) -> float:
    """-log(p) at the single positive class of ``target``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = _check_binary("target", target)
    if target.sum() != 1:
        raise InvalidTargetError("positive cross-entropy needs exactly one positive class")
    c = int(np.argmax(target))
    return float(-np.log(_clip(pred[c])))


def negative_cross_entropy(pseudo, pred, mask) -> float:
    """Mean of -log(1 - p) over the selected (all-negative) classes."""
    pred = np.asarray(pred, dtype=np.float64)
    pseudo = _check_binary("pseudo", pseudo)
    mask = _check_binary("mask", mask)
    s = mask.sum()
    if s == 0:
        raise EmptyMaskError("negative cross-entropy with empty selection mask")
    if (mask * pseudo).any():
        raise InvalidTargetError("negative cross-entropy mask selects a positive label")
    terms = mask * (1.0 - pseudo) * np.log(1.0 - _clip(pred))
    return float(-terms.sum() / s)


def masked_bce(pseudo, pred, mask) -> float:
    """Binary cross-entropy averaged over the selected classes only."""
    pred = np.asarray(pred, dtype=np.float64)
    pseudo = _check_binary("pseudo", pseudo)
    mask = _check_binary("mask", mask)
    s = mask.sum()
    if s == 0:
        raise EmptyMaskError("masked BCE with empty selection mask")
    p = _clip(pred)
    terms = mask * (pseudo * np.log(p) + (1.0 - pseudo) * np.log(1.0 - p))
    return float(-terms.sum() / s)


@dataclass(frozen=True)
class LossSpec:
    """A batch loss: which objective, plus its targets and selection masks.

    ``targets`` is (N, C). ``masks`` is (N, C) and may be None for
    positive cross-entropy, where the target itself identifies the class.
    """

    kind: str
    targets: np.ndarray
    masks: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidTargetError(f"unknown loss kind {self.kind!r}")


def per_sample_losses(spec: LossSpec, probs: np.ndarray):
    """Per-sample loss values and which samples contribute.

    Returns ``(losses, valid)`` where ``losses`` is zero on invalid rows and
    ``valid`` marks rows with a defined loss (non-empty mask).
    """
    losses, _, valid = loss_and_grad_wrt_probs(spec, probs)
    return losses, valid


def batch_loss(spec: LossSpec, probs: np.ndarray) -> tuple[float, int]:
    """Mean loss over contributing samples; raises if none contribute."""
    losses, valid = per_sample_losses(spec, probs)
    n = int(valid.sum())
    if n == 0:
        raise EmptyBatchError("all selection masks in the batch are empty")
    return float(losses.sum() / n), n


def loss_and_grad_wrt_probs(spec: LossSpec, probs: np.ndarray):
    """Per-sample losses, d(loss_i)/d(probs), and the validity mask.

    The gradient rows of invalid samples are zero. Batch reduction (mean over
    valid samples) is the caller's job, so both value and gradient stay per
    sample here.
    """
    probs = np.asarray(probs, dtype=np.float64)
    targets = _check_binary("targets", spec.targets)
    if targets.shape != probs.shape:
        raise InvalidTargetError(
            f"targets shape {targets.shape} does not match predictions {probs.shape}"
        )
    p = _clip(probs)
    gate = _clip_gate(probs)
    grad = np.zeros_like(probs)

    if spec.kind == POSITIVE_CE:
        if not (targets.sum(axis=1) == 1).all():
            raise InvalidTargetError("positive cross-entropy needs one positive class per row")
        losses = -(targets * np.log(p)).sum(axis=1)
        grad = -targets * gate / p
        valid = np.ones(len(probs), dtype=bool)
        return losses, grad, valid

    masks = _check_binary("masks", spec.masks)
    if masks.shape != probs.shape:
        raise InvalidTargetError(
            f"masks shape {masks.shape} does not match predictions {probs.shape}"
        )
    s = masks.sum(axis=1)
    valid = s >= 1
    safe_s = np.where(valid, s, 1.0)

    if spec.kind == NEGATIVE_CE:
        if (masks * targets).any():
            raise InvalidTargetError("negative cross-entropy mask selects a positive label")
        terms = masks * (1.0 - targets) * np.log(1.0 - p)
        losses = -terms.sum(axis=1) / safe_s
        grad = masks * (1.0 - targets) * gate / (1.0 - p) / safe_s[:, None]
    else:  # MASKED_BCE
        terms = masks * (targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))
        losses = -terms.sum(axis=1) / safe_s
        grad = -masks * (targets / p - (1.0 - targets) / (1.0 - p)) * gate / safe_s[:, None]

    losses = np.where(valid, losses, 0.0)
    grad = grad * valid[:, None]
    return losses, grad, valid
