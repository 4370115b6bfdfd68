"""Label generation, the selection regimes, balancing, and reporting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ups_lab.errors import InvalidParameterError, ShapeError
from ups_lab.selection import (
    MULTI_LABEL,
    SINGLE_LABEL,
    PseudoLabelSet,
    SelectionConfig,
    balance_classes,
    generate_labels,
    select_confidence,
    select_ups,
    selection_stats,
    vanilla_masks,
)

CFG = SelectionConfig()  # tau_p=0.7 tau_n=0.05 kappa_p=0.05 kappa_n=0.005


class TestGenerateLabels:
    def test_argmax_marks_single_winner(self):
        labels = generate_labels(np.array([[0.7, 0.2, 0.1]]), "argmax")
        np.testing.assert_array_equal(labels, [[1, 0, 0]])

    def test_fixed_gamma_marks_every_class_past_half(self):
        labels = generate_labels(np.array([[0.6, 0.4, 0.55]]), "fixed")
        np.testing.assert_array_equal(labels, [[1, 0, 1]])

    def test_argmax_tie_breaks_to_lowest_index(self):
        labels = generate_labels(np.array([[0.25, 0.25, 0.25, 0.25]]), "argmax")
        np.testing.assert_array_equal(labels, [[1, 0, 0, 0]])

    def test_unknown_mode_rejected(self):
        with pytest.raises(InvalidParameterError):
            generate_labels(np.array([[0.5, 0.5]]), "soft")


class TestConfidenceSelection:
    def test_high_probability_selects_positive(self):
        probs = np.array([[0.9, 0.1]])
        labels = generate_labels(probs)
        np.testing.assert_array_equal(select_confidence(probs, labels, CFG), [[1, 0]])

    def test_low_probability_selects_negative(self):
        probs = np.array([[0.97, 0.03]])
        labels = generate_labels(probs)
        np.testing.assert_array_equal(select_confidence(probs, labels, CFG), [[1, 1]])

    def test_dead_zone_selects_nothing(self):
        probs = np.array([[0.5, 0.5]])
        labels = generate_labels(probs)
        np.testing.assert_array_equal(select_confidence(probs, labels, CFG), [[0, 0]])

    def test_thresholds_must_be_ordered(self):
        with pytest.raises(InvalidParameterError):
            SelectionConfig(tau_p=0.3, tau_n=0.5)


class TestUpsSelection:
    def test_certain_confident_positive_selected(self):
        probs = np.array([[0.9, 0.1]])
        stds = np.array([[0.02, 0.02]])
        masks = select_ups(probs, stds, generate_labels(probs), CFG)
        assert masks[0, 0] == 1

    def test_uncertain_confident_positive_rejected(self):
        probs = np.array([[0.9, 0.1]])
        stds = np.array([[0.2, 0.2]])
        masks = select_ups(probs, stds, generate_labels(probs), CFG)
        np.testing.assert_array_equal(masks, [[0, 0]])

    def test_shape_mismatch_raises(self):
        probs = np.array([[0.9, 0.1]])
        with pytest.raises(ShapeError):
            select_ups(probs, np.array([[0.1, 0.1, 0.1]]), generate_labels(probs), CFG)

    def test_matches_elementwise_brute_force(self):
        """Gate-by-gate re-evaluation over random five-class vectors."""
        rng = np.random.default_rng(99)
        for _ in range(1000):
            p = rng.random(5)
            p = p / p.sum()
            u = rng.random(5) * 0.1
            probs = p[None, :]
            stds = u[None, :]
            labels = generate_labels(probs)
            got = select_ups(probs, stds, labels, CFG)
            for c in range(5):
                pos = (1 if u[c] <= CFG.kappa_p else 0) * (1 if p[c] >= CFG.tau_p else 0)
                neg = (1 if u[c] <= CFG.kappa_n else 0) * (1 if p[c] <= CFG.tau_n else 0)
                assert got[0, c] == min(pos + neg, 1)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=300, deadline=None)
def test_ups_mask_is_subset_of_confidence_mask(seed):
    rng = np.random.default_rng(seed)
    n, c = 6, 4
    probs = rng.random((n, c))
    stds = rng.random((n, c)) * 0.3
    tau_n = rng.uniform(0.01, 0.5)
    tau_p = rng.uniform(tau_n, 0.99)
    cfg = SelectionConfig(tau_p=tau_p, tau_n=tau_n,
                          kappa_p=rng.uniform(0, 0.2), kappa_n=rng.uniform(0, 0.2))
    labels = generate_labels(probs)
    ups = select_ups(probs, stds, labels, cfg)
    conf = select_confidence(probs, labels, cfg)
    assert np.all(ups <= conf)


def test_raising_kappa_p_never_drops_a_positive():
    rng = np.random.default_rng(7)
    probs = rng.random((50, 4))
    stds = rng.random((50, 4)) * 0.2
    labels = generate_labels(probs)
    previous = None
    for kappa_p in (0.01, 0.05, 0.1, 0.2):
        cfg = SelectionConfig(kappa_p=kappa_p)
        positives = select_ups(probs, stds, labels, cfg) * (probs >= cfg.tau_p)
        if previous is not None:
            assert np.all(positives >= previous)
        previous = positives


def test_no_entry_is_both_positive_and_negative():
    rng = np.random.default_rng(8)
    probs = rng.random((200, 5))
    both = (probs >= CFG.tau_p) & (probs <= CFG.tau_n)
    assert not both.any()


class TestVanillaMasks:
    def test_single_label_keeps_argmax_entries_only(self):
        labels = np.array([[1, 0], [0, 1]], dtype=np.int8)
        np.testing.assert_array_equal(vanilla_masks(labels, SINGLE_LABEL), labels)

    def test_multi_label_keeps_everything(self):
        labels = np.array([[1, 0, 1]], dtype=np.int8)
        np.testing.assert_array_equal(vanilla_masks(labels, MULTI_LABEL), [[1, 1, 1]])


class TestBalancing:
    @staticmethod
    def build(counts, n_classes, rng):
        """A pseudo-label set with the requested per-class positive counts."""
        n = sum(counts)
        labels = np.zeros((n, n_classes), dtype=np.int8)
        probs = rng.uniform(0.7, 1.0, size=(n, n_classes))
        row = 0
        for c, k in enumerate(counts):
            for _ in range(k):
                labels[row, c] = 1
                row += 1
        masks = labels.copy()
        return PseudoLabelSet(labels=labels, masks=masks, mode=SINGLE_LABEL), probs

    def test_balanced_input_is_a_fixed_point(self):
        pseudo, probs = self.build([5, 5], 2, np.random.default_rng(0))
        out = balance_classes(pseudo, probs)
        np.testing.assert_array_equal(out.masks, pseudo.masks)

    def test_every_class_capped_at_the_minimum_count(self):
        # per-class selections mirroring a published first-iteration tally
        counts = [2707, 3734, 1929, 1065, 2145, 1924, 3224, 3266, 3083, 3214]
        pseudo, probs = self.build(counts, 10, np.random.default_rng(1))
        out = balance_classes(pseudo, probs)
        per_class = (out.masks * out.labels).sum(axis=0)
        np.testing.assert_array_equal(per_class, np.full(10, 1065))

    def test_keeps_the_highest_confidence_samples(self):
        labels = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], dtype=np.int8)
        masks = labels.copy()
        probs = np.array([[0.8, 0.2], [0.95, 0.05], [0.9, 0.1], [0.1, 0.9]])
        pseudo = PseudoLabelSet(labels=labels, masks=masks, mode=SINGLE_LABEL)
        out = balance_classes(pseudo, probs)
        # class 0 keeps only its top-confidence sample (row 1), as a full sort shows
        order = np.argsort(-probs[:3, 0])
        assert list(order) == [1, 2, 0]
        np.testing.assert_array_equal(out.masks, [[0, 0], [1, 0], [0, 0], [0, 1]])

    def test_confidence_ties_keep_the_lower_sample_index(self):
        labels = np.array([[1, 0], [1, 0], [0, 1]], dtype=np.int8)
        probs = np.array([[0.9, 0.1], [0.9, 0.1], [0.1, 0.9]])
        pseudo = PseudoLabelSet(labels=labels, masks=labels.copy(), mode=SINGLE_LABEL)
        out = balance_classes(pseudo, probs)
        np.testing.assert_array_equal(out.masks, [[1, 0], [0, 0], [0, 1]])

    def test_zero_count_class_empties_all_positives(self):
        pseudo, probs = self.build([4, 0], 2, np.random.default_rng(2))
        out = balance_classes(pseudo, probs)
        assert (out.masks * out.labels).sum() == 0

    def test_negative_selections_untouched(self):
        labels = np.array([[1, 0], [1, 0], [0, 0]], dtype=np.int8)
        masks = np.array([[1, 1], [1, 0], [0, 1]], dtype=np.int8)
        probs = np.array([[0.9, 0.02], [0.8, 0.3], [0.4, 0.01]])
        pseudo = PseudoLabelSet(labels=labels, masks=masks, mode=SINGLE_LABEL)
        out = balance_classes(pseudo, probs)
        negatives = out.masks * (1 - out.labels)
        np.testing.assert_array_equal(negatives, masks * (1 - labels))


class TestStats:
    def test_empty_masks_report_zero_counts_and_no_accuracy(self):
        pseudo = PseudoLabelSet(labels=np.zeros((3, 2), dtype=np.int8),
                                masks=np.zeros((3, 2), dtype=np.int8),
                                mode=SINGLE_LABEL)
        report = selection_stats(pseudo, ground_truth=np.eye(2, dtype=np.int8)[[0, 1, 0]])
        assert report.total_pos == 0 and report.total_neg == 0
        assert report.accuracy is None

    def test_all_correct_selections_score_one(self):
        truth = np.eye(2, dtype=np.int8)[[0, 1, 0]]
        pseudo = PseudoLabelSet(labels=truth.copy(), masks=truth.copy(),
                                mode=SINGLE_LABEL)
        report = selection_stats(pseudo, ground_truth=truth)
        assert report.accuracy == 1.0

    def test_three_sample_hand_tally(self):
        labels = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int8)
        masks = np.array([[1, 1, 0], [0, 1, 0], [0, 0, 1]], dtype=np.int8)
        truth = np.array([[1, 0, 0], [0, 0, 1], [0, 0, 1]], dtype=np.int8)
        pseudo = PseudoLabelSet(labels=labels, masks=masks, mode=SINGLE_LABEL)
        report = selection_stats(pseudo, ground_truth=truth)
        # selected entries: (0,0)+ ok, (0,1)- ok, (1,1)+ wrong, (2,2)+ ok
        assert report.total_pos == 3 and report.total_neg == 1
        assert report.accuracy == pytest.approx(3 / 4)
        assert report.pos_accuracy == pytest.approx(2 / 3)
        assert report.neg_accuracy == 1.0
        np.testing.assert_array_equal(report.pos_per_class, [1, 1, 1])
        np.testing.assert_array_equal(report.neg_per_class, [0, 1, 0])
        assert report.samples_with_pos == 3
        assert report.samples_neg_only == 0

    def test_single_label_set_rejects_multiple_selected_positives(self):
        labels = np.array([[1, 1]], dtype=np.int8)
        with pytest.raises(InvalidParameterError):
            PseudoLabelSet(labels=labels, masks=labels.copy(), mode=SINGLE_LABEL)
