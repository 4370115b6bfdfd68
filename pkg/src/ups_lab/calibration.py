"""Expected calibration error, reliability binning, and the uncertainty sweep.

Binning convention: L equal-width bins over (0, 1], left-open and
right-closed, so a confidence exactly on a boundary belongs to the lower bin
and 1.0 belongs to the top bin. ECE is the bin-size-weighted mean absolute gap
between mean confidence and accuracy; empty bins contribute nothing.

The prediction dump is the unit of exchange: one row per sample with its
max-class confidence, predicted and true class, and the uncertainty of the
predicted class. Dumps serialize to CSV with the header
``sample_id,confidence,pred_class,true_class,uncertainty`` (format version 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, CsvSchemaError, EmptyInputError, InvalidParameterError

DUMP_HEADER = ["sample_id", "confidence", "pred_class", "true_class", "uncertainty"]
SWEEP_HEADER = ["kappa", "subset_size", "ece"]
DEFAULT_BINS = 15


@dataclass(frozen=True)
class PredictionDump:
    sample_id: np.ndarray
    confidence: np.ndarray
    pred_class: np.ndarray
    true_class: np.ndarray
    uncertainty: np.ndarray

    def __post_init__(self):
        n = len(self.sample_id)
        for name in ("confidence", "pred_class", "true_class", "uncertainty"):
            if len(getattr(self, name)) != n:
                raise InvalidParameterError(f"dump column {name} has mismatched length")

    @property
    def n(self) -> int:
        return len(self.sample_id)

    def subset(self, keep: np.ndarray) -> "PredictionDump":
        return PredictionDump(
            sample_id=self.sample_id[keep],
            confidence=self.confidence[keep],
            pred_class=self.pred_class[keep],
            true_class=self.true_class[keep],
            uncertainty=self.uncertainty[keep],
        )


def dump_from_probs(mean_probs: np.ndarray, std_probs: np.ndarray,
                    true_class: np.ndarray,
                    sample_id: np.ndarray | None = None) -> PredictionDump:
    """Build a dump from probability summaries and true class indices."""
    mean_probs = np.asarray(mean_probs, dtype=np.float64)
    pred = mean_probs.argmax(axis=1)
    rows = np.arange(len(mean_probs))
    return PredictionDump(
        sample_id=rows if sample_id is None else np.asarray(sample_id),
        confidence=mean_probs[rows, pred],
        pred_class=pred,
        true_class=np.asarray(true_class),
        uncertainty=np.asarray(std_probs, dtype=np.float64)[rows, pred],
    )


@dataclass(frozen=True)
class EceReport:
    n_bins: int
    n_samples: int
    counts: np.ndarray
    mean_confidence: np.ndarray  # nan on empty bins
    accuracy: np.ndarray         # nan on empty bins
    ece: float

    def bin_edges(self, index: int) -> tuple[float, float]:
        return index / self.n_bins, (index + 1) / self.n_bins


def bin_index(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin assignment over (0, 1]: ceil(c * L) - 1, clipped into range."""
    idx = np.ceil(np.asarray(confidence, dtype=np.float64) * n_bins).astype(int) - 1
    return np.clip(idx, 0, n_bins - 1)


def compute_ece(dump: PredictionDump, n_bins: int = DEFAULT_BINS) -> EceReport:
    """Expected calibration error with per-bin reliability statistics."""
    if n_bins < 1:
        raise InvalidParameterError("need at least one bin")
    if dump.n == 0:
        raise EmptyInputError("cannot compute calibration of an empty dump")
    idx = bin_index(dump.confidence, n_bins)
    correct = (dump.pred_class == dump.true_class).astype(np.float64)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    conf_sums = np.bincount(idx, weights=dump.confidence, minlength=n_bins)
    correct_sums = np.bincount(idx, weights=correct, minlength=n_bins)

    occupied = counts > 0
    mean_conf = np.full(n_bins, np.nan)
    acc = np.full(n_bins, np.nan)
    mean_conf[occupied] = conf_sums[occupied] / counts[occupied]
    acc[occupied] = correct_sums[occupied] / counts[occupied]
    gaps = np.abs(mean_conf[occupied] - acc[occupied])
    ece = float((counts[occupied] / dump.n * gaps).sum())
    return EceReport(
        n_bins=n_bins,
        n_samples=dump.n,
        counts=counts,
        mean_confidence=mean_conf,
        accuracy=acc,
        ece=ece,
    )


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    subset_size: int
    ece: float | None


def ece_vs_uncertainty_sweep(dump: PredictionDump, thresholds,
                             n_bins: int = DEFAULT_BINS) -> list[SweepRow]:
    """ECE of the subset with uncertainty <= kappa, for each threshold.

    Thresholds must be sorted ascending. An empty subset yields a row with
    size 0 and no ECE value.
    """
    thresholds = [float(k) for k in thresholds]
    if any(a > b for a, b in zip(thresholds, thresholds[1:])):
        raise InvalidParameterError("sweep thresholds must be sorted ascending")
    rows = []
    for kappa in thresholds:
        keep = dump.uncertainty <= kappa
        if not keep.any():
            rows.append(SweepRow(kappa=kappa, subset_size=0, ece=None))
            continue
        sub = dump.subset(keep)
        rows.append(SweepRow(kappa=kappa, subset_size=sub.n, ece=compute_ece(sub, n_bins).ece))
    return rows


def multilabel_macro_ece(mean_probs: np.ndarray, std_probs: np.ndarray,
                         labels: np.ndarray, n_bins: int = DEFAULT_BINS) -> float:
    """Macro-averaged per-class binary ECE for multi-label predictions.

    Each class becomes a two-class problem: the prediction is presence when
    p >= 0.5, the confidence is max(p, 1 - p), and the uncertainty is that
    class's std. The per-class ECEs are averaged uniformly.
    """
    mean_probs = np.asarray(mean_probs, dtype=np.float64)
    labels = np.asarray(labels)
    std_probs = np.asarray(std_probs, dtype=np.float64)
    scores = []
    for c in range(mean_probs.shape[1]):
        p = mean_probs[:, c]
        pred = (p >= 0.5).astype(int)
        dump = PredictionDump(
            sample_id=np.arange(len(p)),
            confidence=np.where(pred == 1, p, 1.0 - p),
            pred_class=pred,
            true_class=labels[:, c].astype(int),
            uncertainty=std_probs[:, c],
        )
        scores.append(compute_ece(dump, n_bins).ece)
    return float(np.mean(scores))


def synthetic_overconfident_dump(n: int, seed: int, slope: float = 2.0,
                                 max_uncertainty: float = 0.25) -> PredictionDump:
    """A seeded two-class dump whose miscalibration lives in its uncertain tail.

    Confidences are uniform on [0.55, 0.95]; a sample with uncertainty u is
    correct with probability confidence - slope * u, so predictions are
    calibrated at u = 0 and increasingly overconfident as u grows. Filtering
    to low-uncertainty subsets therefore drives the ECE toward zero, which is
    the behavior the sweep is meant to expose.
    """
    if n < 1:
        raise InvalidParameterError("need at least one sample")
    rng = np.random.default_rng(seed)
    confidence = rng.uniform(0.55, 0.95, size=n)
    uncertainty = rng.uniform(0.0, max_uncertainty, size=n)
    p_correct = np.clip(confidence - slope * uncertainty, 0.0, 1.0)
    correct = rng.random(n) < p_correct
    return PredictionDump(
        sample_id=np.arange(n),
        confidence=confidence,
        pred_class=np.zeros(n, dtype=int),
        true_class=np.where(correct, 0, 1),
        uncertainty=uncertainty,
    )


def write_dump_csv(dump: PredictionDump, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(DUMP_HEADER) + "\n")
        for i in range(dump.n):
            fh.write(
                f"{int(dump.sample_id[i])},{_fmt(dump.confidence[i])},"
                f"{int(dump.pred_class[i])},{int(dump.true_class[i])},"
                f"{_fmt(dump.uncertainty[i])}\n"
            )


def read_dump_csv(path) -> PredictionDump:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvParseError("empty dump file", line_number=1)
    if lines[0].split(",") != DUMP_HEADER:
        raise CsvSchemaError(
            f"expected header {','.join(DUMP_HEADER)!r}, got {lines[0]!r}"
        )
    ids, confs, preds, trues, uncs = [], [], [], [], []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(DUMP_HEADER):
            raise CsvParseError(f"expected {len(DUMP_HEADER)} cells, got {len(cells)}",
                                line_number=number)
        try:
            ids.append(int(cells[0]))
            confs.append(float(cells[1]))
            preds.append(int(cells[2]))
            trues.append(int(cells[3]))
            uncs.append(float(cells[4]))
        except ValueError as exc:
            raise CsvParseError(str(exc), line_number=number)
    if not ids:
        raise CsvParseError("dump contains no data rows", line_number=2)
    return PredictionDump(
        sample_id=np.array(ids),
        confidence=np.array(confs),
        pred_class=np.array(preds),
        true_class=np.array(trues),
        uncertainty=np.array(uncs),
    )


def write_ece_report_csv(report: EceReport, path) -> None:
    """Per-bin reliability rows plus a trailing ``all`` row carrying the ECE."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin,lower,upper,count,mean_confidence,accuracy,ece\n")
        for b in range(report.n_bins):
            lower, upper = report.bin_edges(b)
            conf = report.mean_confidence[b]
            acc = report.accuracy[b]
            fh.write(
                f"{b},{_fmt(lower)},{_fmt(upper)},{report.counts[b]},"
                f"{_fmt_opt(conf)},{_fmt_opt(acc)},\n"
            )
        fh.write(f"all,0,1,{report.n_samples},,,{_fmt(report.ece)}\n")


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(SWEEP_HEADER) + "\n")
        for row in rows:
            ece = "" if row.ece is None else _fmt(row.ece)
            fh.write(f"{_fmt(row.kappa)},{row.subset_size},{ece}\n")


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def _fmt_opt(x: float) -> str:
    return "" if np.isnan(x) else _fmt(x)
