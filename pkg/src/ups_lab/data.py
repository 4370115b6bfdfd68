"""Datasets for the lab: seeded synthetic generators, labeled/unlabeled
splits, and CSV ingestion.

A dataset bundles a training split (partitioned into labeled and unlabeled
index sets) with a held-out test split. Ground-truth labels for unlabeled
samples stay in the dataset for scoring, but the training path only ever sees
a :class:`TrainView`, which simply has no unlabeled labels to read.

CSV schema (one file per dataset)::

    feature_0,...,feature_{d-1},label_0,...,label_{C-1},split

with ``split`` one of ``labeled``, ``unlabeled``, ``test``. Features are
written with 17 significant digits so a load/save round trip is exact.
Generator provenance (parameters, seed, timestamp) goes into a JSON sidecar
next to the CSV, never into the CSV itself.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import CsvParseError, CsvSchemaError, InvalidDatasetError, InvalidParameterError

SINGLE_LABEL = "single_label"
MULTI_LABEL = "multi_label"
MODES = (SINGLE_LABEL, MULTI_LABEL)

SPLIT_LABELED = "labeled"
SPLIT_UNLABELED = "unlabeled"
SPLIT_TEST = "test"


@dataclass(frozen=True)
class TrainView:
    """What the training path is allowed to see: no unlabeled labels."""

    labeled_features: np.ndarray
    labeled_labels: np.ndarray
    unlabeled_features: np.ndarray


@dataclass(frozen=True)
class SslDataset:
    features: np.ndarray       # (N, d) training features
    labels: np.ndarray         # (N, C) ground truth, 0/1
    labeled_idx: np.ndarray    # sorted indices into the training split
    unlabeled_idx: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    mode: str

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidDatasetError(f"mode must be one of {MODES}, got {self.mode!r}")
        n = len(self.features)
        if len(self.labels) != n:
            raise InvalidDatasetError("features and labels disagree on sample count")
        both = np.concatenate([self.labeled_idx, self.unlabeled_idx])
        if len(np.intersect1d(self.labeled_idx, self.unlabeled_idx)) > 0:
            raise InvalidDatasetError("labeled and unlabeled index sets overlap")
        if len(both) != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise InvalidDatasetError("labeled and unlabeled sets must partition the training split")
        if not np.isin(self.labels, (0, 1)).all() or not np.isin(self.test_labels, (0, 1)).all():
            raise InvalidDatasetError("labels must be 0/1 indicator vectors")
        if self.mode == SINGLE_LABEL:
            if not (self.labels.sum(axis=1) == 1).all() or not (self.test_labels.sum(axis=1) == 1).all():
                raise InvalidDatasetError("single-label rows need exactly one positive class")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return self.labels.shape[1]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_labeled(self) -> int:
        return len(self.labeled_idx)

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled_idx)

    def train_view(self) -> TrainView:
        return TrainView(
            labeled_features=self.features[self.labeled_idx],
            labeled_labels=self.labels[self.labeled_idx],
            unlabeled_features=self.features[self.unlabeled_idx],
        )

    def unlabeled_ground_truth(self) -> np.ndarray:
        """Ground truth of unlabeled samples, for scoring only."""
        return self.labels[self.unlabeled_idx]


def _one_hot(classes: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(classes), n_classes), dtype=np.int8)
    out[np.arange(len(classes)), classes] = 1
    return out


def make_two_moons(n: int, noise_sigma: float, seed: int,
                   n_test: int | None = None) -> SslDataset:
    """Two interleaving half-circles, one per class, with Gaussian noise.

    Generates ``n`` training samples split exactly n/2 per class (points are
    evenly spaced along each arc before noise) plus ``n_test`` test samples
    (default n // 2). The fresh dataset is fully labeled; use
    :func:`split_labeled` to carve out the unlabeled pool.
    """
    if n < 4 or n % 2 != 0:
        raise InvalidParameterError(f"n must be even and >= 4, got {n}")
    if noise_sigma < 0:
        raise InvalidParameterError("noise_sigma must be >= 0")
    if n_test is None:
        n_test = n // 2
    if n_test < 2:
        raise InvalidParameterError("need at least 2 test samples")

    rng = np.random.default_rng(seed)

    def arcs(count: int) -> tuple[np.ndarray, np.ndarray]:
        half = count // 2
        t0 = np.linspace(0.0, math.pi, half)
        t1 = np.linspace(0.0, math.pi, count - half)
        upper = np.column_stack([np.cos(t0), np.sin(t0)])
        lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
        points = np.vstack([upper, lower])
        classes = np.concatenate([np.zeros(half, dtype=int), np.ones(count - half, dtype=int)])
        return points + rng.normal(0.0, noise_sigma, size=points.shape), classes

    train_x, train_c = arcs(n)
    test_x, test_c = arcs(n_test)
    return SslDataset(
        features=train_x,
        labels=_one_hot(train_c, 2),
        labeled_idx=np.arange(n),
        unlabeled_idx=np.arange(0),
        test_features=test_x,
        test_labels=_one_hot(test_c, 2),
        mode=SINGLE_LABEL,
    )


def blob_geometry(n_classes: int, overlap: float) -> tuple[np.ndarray, float, float]:
    """Centers, core (sampling) radius, and label radius of the blob generator.

    Centers sit on a circle of radius 2. Samples land within ``core_radius``
    of their home center; a class is labeled present when its center is within
    ``label_radius = core_radius + overlap`` of the point. With overlap 0 the
    radii coincide and exactly the home class is present.
    """
    if n_classes < 2:
        raise InvalidParameterError(f"need at least 2 classes, got {n_classes}")
    if overlap < 0:
        raise InvalidParameterError("overlap must be >= 0")
    angles = 2.0 * math.pi * np.arange(n_classes) / n_classes
    centers = 2.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    spacing = 4.0 * math.sin(math.pi / n_classes)
    core_radius = 0.3 * spacing
    return centers, core_radius, core_radius + overlap


def make_blobs_multilabel(n: int, n_classes: int, overlap: float, seed: int,
                          n_test: int | None = None) -> SslDataset:
    """Multi-label blobs: every class center within reach marks a positive.

    Each sample is drawn uniformly from a disk around its home center (home
    classes cycle 0..C-1), so the home class is always positive; larger
    ``overlap`` widens the label radius and raises label cardinality.
    """
    centers, core_radius, label_radius = blob_geometry(n_classes, overlap)
    if n < n_classes:
        raise InvalidParameterError(f"need at least one sample per class, got n={n}")
    if n_test is None:
        n_test = n // 2
    if n_test < 1:
        raise InvalidParameterError("need at least 1 test sample")

    rng = np.random.default_rng(seed)

    def draw(count: int) -> tuple[np.ndarray, np.ndarray]:
        home = np.arange(count) % n_classes
        radius = core_radius * np.sqrt(rng.random(count))
        angle = rng.uniform(0.0, 2.0 * math.pi, size=count)
        points = centers[home] + np.column_stack([radius * np.cos(angle),
                                                  radius * np.sin(angle)])
        dists = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        return points, (dists <= label_radius).astype(np.int8)

    train_x, train_y = draw(n)
    test_x, test_y = draw(n_test)
    return SslDataset(
        features=train_x,
        labels=train_y,
        labeled_idx=np.arange(n),
        unlabeled_idx=np.arange(0),
        test_features=test_x,
        test_labels=test_y,
        mode=MULTI_LABEL,
    )


def split_labeled(dataset: SslDataset, n_labeled: int, seed: int,
                  stratified: bool = True) -> SslDataset:
    """Re-partition the training split into labeled and unlabeled sets.

    Stratified draws floor(n_labeled / C) samples per class first (multi-label
    samples stratify by their lowest-index positive class), then fills the
    remainder uniformly from the untaken pool. Deterministic under ``seed``.
    """
    n = dataset.n
    if not 1 <= n_labeled <= n:
        raise InvalidParameterError(f"n_labeled must be in [1, {n}], got {n_labeled}")
    rng = np.random.default_rng(seed)
    if stratified:
        n_classes = dataset.n_classes
        if n_labeled < n_classes:
            raise InvalidParameterError(
                f"stratified split needs n_labeled >= {n_classes} classes, got {n_labeled}"
            )
        strata = dataset.labels.argmax(axis=1)  # lowest-index positive
        quota = n_labeled // n_classes
        chosen: list[np.ndarray] = []
        for c in range(n_classes):
            members = np.nonzero(strata == c)[0]
            take = min(quota, len(members))
            chosen.append(rng.permutation(members)[:take])
        picked = np.concatenate(chosen) if chosen else np.arange(0)
        remainder = n_labeled - len(picked)
        if remainder > 0:
            pool = np.setdiff1d(np.arange(n), picked)
            picked = np.concatenate([picked, rng.permutation(pool)[:remainder]])
    else:
        picked = rng.permutation(n)[:n_labeled]
    labeled_idx = np.sort(picked)
    unlabeled_idx = np.setdiff1d(np.arange(n), labeled_idx)
    return replace(dataset, labeled_idx=labeled_idx, unlabeled_idx=unlabeled_idx)


_FEATURE_RE = re.compile(r"^feature_(\d+)$")
_LABEL_RE = re.compile(r"^label_(\d+)$")


def save_csv(dataset: SslDataset, path) -> None:
    """Write the documented CSV; training rows first, then test rows."""
    d = dataset.n_features
    c = dataset.n_classes
    header = [f"feature_{j}" for j in range(d)] + [f"label_{j}" for j in range(c)] + ["split"]
    split_of = np.full(dataset.n, SPLIT_UNLABELED, dtype=object)
    split_of[dataset.labeled_idx] = SPLIT_LABELED
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")

        def write_rows(features, labels, splits):
            for x, y, s in zip(features, labels, splits):
                cells = [f"{v:.17g}" for v in x] + [str(int(v)) for v in y] + [s]
                fh.write(",".join(cells) + "\n")

        write_rows(dataset.features, dataset.labels, split_of)
        write_rows(dataset.test_features, dataset.test_labels,
                   [SPLIT_TEST] * len(dataset.test_features))


def load_csv(path, mode: str) -> SslDataset:
    """Load a dataset CSV written by :func:`save_csv`.

    The header must match ``feature_0..feature_{d-1},label_0..label_{C-1},split``
    exactly; every data row must have the same width and numeric cells.
    """
    if mode not in MODES:
        raise InvalidParameterError(f"mode must be one of {MODES}, got {mode!r}")
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CsvParseError("empty dataset file", line_number=1)

    header = lines[0].split(",")
    d = 0
    while d < len(header) and _FEATURE_RE.match(header[d]):
        d += 1
    c = 0
    while d + c < len(header) and _LABEL_RE.match(header[d + c]):
        c += 1
    expected = [f"feature_{j}" for j in range(d)] + [f"label_{j}" for j in range(c)] + ["split"]
    if d == 0 or c == 0 or header != expected:
        raise CsvSchemaError(
            "header must be feature_0..feature_{d-1},label_0..label_{C-1},split; "
            f"got {lines[0]!r}"
        )

    train_x, train_y, test_x, test_y = [], [], [], []
    labeled_rows = []
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvParseError(f"expected {len(header)} cells, got {len(cells)}",
                                line_number=number)
        try:
            x = [float(v) for v in cells[:d]]
            y = [int(v) for v in cells[d:d + c]]
        except ValueError as exc:
            raise CsvParseError(str(exc), line_number=number)
        split = cells[-1]
        if split == SPLIT_TEST:
            test_x.append(x)
            test_y.append(y)
        elif split in (SPLIT_LABELED, SPLIT_UNLABELED):
            if split == SPLIT_LABELED:
                labeled_rows.append(len(train_x))
            train_x.append(x)
            train_y.append(y)
        else:
            raise CsvParseError(f"unknown split value {split!r}", line_number=number)

    if not train_x:
        raise CsvParseError("dataset has no training rows", line_number=len(lines))
    labeled_idx = np.array(sorted(labeled_rows), dtype=int)
    n = len(train_x)
    return SslDataset(
        features=np.array(train_x),
        labels=np.array(train_y, dtype=np.int8),
        labeled_idx=labeled_idx,
        unlabeled_idx=np.setdiff1d(np.arange(n), labeled_idx),
        test_features=np.array(test_x) if test_x else np.zeros((0, d)),
        test_labels=np.array(test_y, dtype=np.int8) if test_y else np.zeros((0, c), dtype=np.int8),
        mode=mode,
    )


def write_provenance(path, params: dict) -> None:
    """JSON sidecar with generator parameters and a creation timestamp."""
    record = dict(params)
    record["created_unix_time"] = time.time()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
