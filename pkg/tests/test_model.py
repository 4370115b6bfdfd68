"""Classifier engine: initialization, forward passes, gradients, SGD, checkpoints."""

import math
from dataclasses import replace

import numpy as np
import pytest

import ups_lab as ul
from ups_lab.errors import (
    EmptyBatchError,
    InvalidArchitectureError,
    InvalidParameterError,
    ScheduleExhaustedError,
    ShapeError,
)
from ups_lab.losses import MASKED_BCE, NEGATIVE_CE, POSITIVE_CE, LossSpec, batch_loss
from ups_lab.model import (
    ForwardMode,
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
from ups_lab.seeding import derive_seed


def params_bytes(model: ModelState) -> bytes:
    return b"".join(a.tobytes() for a in (*model.weights, *model.biases))


def hand_model(weights, biases, head="softmax", dropout=0.0) -> ModelState:
    weights = tuple(np.asarray(w, dtype=np.float64) for w in weights)
    biases = tuple(np.asarray(b, dtype=np.float64) for b in biases)
    dims = (weights[0].shape[0],) + tuple(w.shape[1] for w in weights)
    return ModelState(layer_dims=dims, weights=weights, biases=biases,
                      dropout_rate=dropout, activation="relu", head=head, init_seed=0)


class TestInit:
    def test_same_arguments_give_identical_bytes(self):
        a = init_model([2, 8, 2], 0.3, "softmax", seed=7)
        b = init_model([2, 8, 2], 0.3, "softmax", seed=7)
        assert params_bytes(a) == params_bytes(b)

    def test_different_seeds_differ(self):
        a = init_model([4, 16, 3], 0.0, "softmax", seed=1)
        b = init_model([4, 16, 3], 0.0, "softmax", seed=2)
        assert any(
            not np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights)
        )

    def test_degenerate_architectures_rejected(self):
        with pytest.raises(InvalidArchitectureError):
            init_model([2], 0.0, "softmax", seed=0)
        with pytest.raises(InvalidArchitectureError):
            init_model([], 0.0, "softmax", seed=0)
        with pytest.raises(InvalidArchitectureError):
            init_model([2, 0, 2], 0.0, "softmax", seed=0)

    def test_weights_within_fan_in_bound_and_biases_zero(self):
        m = init_model([3, 7, 4], 0.0, "softmax", seed=9)
        for dims_in, w in zip(m.layer_dims, m.weights):
            limit = math.sqrt(6.0 / dims_in)
            assert np.all(np.abs(w) <= limit)
        for b in m.biases:
            assert np.all(b == 0.0)

    def test_bad_dropout_and_head_rejected(self):
        with pytest.raises(InvalidParameterError):
            init_model([2, 2], 1.0, "softmax", seed=0)
        with pytest.raises(InvalidParameterError):
            init_model([2, 2], 0.1, "argmax", seed=0)


class TestForward:
    def test_zero_logits_give_uniform_probabilities(self):
        m = hand_model([np.zeros((3, 4))], [np.zeros(4)])
        p = forward(m, np.array([[1.0, -2.0, 0.5]]))
        np.testing.assert_allclose(p, 0.25, atol=1e-12)

    def test_extreme_temperature_flattens_softmax(self):
        m = hand_model([np.array([[5.0, -1.0, 2.0]])], [np.zeros(3)])
        p = forward(m, np.array([[1.0]]), temp=TemperatureConfig(T=1e6))
        np.testing.assert_allclose(p, 1.0 / 3.0, atol=1e-4)

    def test_hand_evaluated_hidden_layer(self):
        # x=[1,0] -> z=[1.5,-1.75] -> relu -> [1.5,0] -> identity head layer
        m = hand_model(
            [np.array([[1.0, -2.0], [3.0, 4.0]]), np.eye(2)],
            [np.array([0.5, 0.25]), np.zeros(2)],
        )
        p = forward(m, np.array([[1.0, 0.0]]))
        e = math.exp(1.5)
        np.testing.assert_allclose(p, [[e / (e + 1.0), 1.0 / (e + 1.0)]], atol=1e-12)
        p2 = forward(m, np.array([[1.0, 0.0]]), temp=TemperatureConfig(T=2.0))
        e2 = math.exp(0.75)
        np.testing.assert_allclose(p2, [[e2 / (e2 + 1.0), 1.0 / (e2 + 1.0)]], atol=1e-12)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        m = init_model([5, 11, 7], 0.0, "softmax", seed=4)
        p = forward(m, rng.normal(size=(40, 5)))
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(p > 0) and np.all(p < 1)

    def test_sigmoid_head_entries_independent(self):
        m = init_model([3, 6, 4], 0.0, "sigmoid", seed=5)
        p = forward(m, np.random.default_rng(0).normal(size=(10, 3)))
        assert np.all((p > 0) & (p < 1))

    def test_dimension_mismatch_raises(self):
        m = init_model([3, 4, 2], 0.0, "softmax", seed=0)
        with pytest.raises(ShapeError):
            forward(m, np.zeros((5, 2)))

    def test_temperature_monotonicity_of_max_class(self):
        rng = np.random.default_rng(12)
        m = init_model([4, 9, 5], 0.0, "softmax", seed=8)
        x = rng.normal(size=(30, 4))
        temps = [1.0, 1.5, 2.0, 4.0, 10.0]
        maxima = [forward(m, x, temp=TemperatureConfig(T=t)).max(axis=1) for t in temps]
        for lower, higher in zip(maxima, maxima[1:]):
            assert np.all(higher <= lower + 1e-12)


class TestDropout:
    def test_same_pass_seed_is_bit_identical(self):
        m = init_model([3, 16, 16, 2], 0.4, "softmax", seed=6)
        x = np.random.default_rng(1).normal(size=(8, 3))
        a = forward(m, x, ForwardMode.stochastic(123))
        b = forward(m, x, ForwardMode.stochastic(123))
        assert a.tobytes() == b.tobytes()

    def test_distinct_seeds_produce_distinct_outputs(self):
        m = init_model([3, 16, 2], 0.4, "softmax", seed=6)
        x = np.random.default_rng(2).normal(size=(4, 3))
        base = forward(m, x, ForwardMode.stochastic(0))
        differing = sum(
            not np.array_equal(base, forward(m, x, ForwardMode.stochastic(k)))
            for k in range(1, 101)
        )
        assert differing >= 99  # collisions are overwhelmingly unlikely

    def test_zero_rate_stochastic_equals_deterministic(self):
        m = init_model([3, 8, 2], 0.0, "softmax", seed=6)
        x = np.random.default_rng(3).normal(size=(5, 3))
        a = forward(m, x, ForwardMode.stochastic(77))
        b = forward(m, x)
        assert a.tobytes() == b.tobytes()

    def test_deterministic_pass_matches_stochastic_mean(self):
        # small weights keep the head near-linear so the inverted-dropout
        # identity (exact on logits) carries to probabilities within noise
        m = init_model([2, 16, 3], 0.3, "softmax", seed=6)
        m = replace(m, weights=tuple(w * 0.25 for w in m.weights))
        x = np.array([[0.5, -0.25], [1.0, 1.0]])
        temp = TemperatureConfig(T=2.0)
        det = forward(m, x, temp=temp)
        passes = np.stack([
            forward(m, x, ForwardMode.stochastic(derive_seed(99, k)), temp)
            for k in range(1000)
        ])
        se = passes.std(axis=0, ddof=1) / math.sqrt(1000)
        assert np.all(np.abs(det - passes.mean(axis=0)) <= 3.0 * se)


def random_loss_spec(rng, kind, n, c):
    targets = np.zeros((n, c), dtype=int)
    targets[np.arange(n), rng.integers(0, c, size=n)] = 1
    if kind == POSITIVE_CE:
        return LossSpec(kind, targets)
    if kind == NEGATIVE_CE:
        masks = (rng.random((n, c)) < 0.6).astype(int) * (1 - targets)
    else:
        masks = (rng.random((n, c)) < 0.6).astype(int)
    if masks.sum() == 0:
        masks[0, 0] = 1 - targets[0, 0] if kind == NEGATIVE_CE else 1
    return LossSpec(kind, targets, masks)


class TestBackward:
    @pytest.mark.parametrize("kind,head", [
        (POSITIVE_CE, "softmax"),
        (NEGATIVE_CE, "softmax"),
        (MASKED_BCE, "sigmoid"),
    ])
    @pytest.mark.parametrize("mode", [
        ForwardMode.deterministic(),
        ForwardMode.stochastic(321),
    ])
    def test_gradients_match_central_differences(self, kind, head, mode):
        rng = np.random.default_rng(17)
        model = init_model([3, 6, 4], 0.25, head, seed=13)
        x = rng.normal(size=(5, 3))
        spec = random_loss_spec(rng, kind, 5, 4)
        temp = TemperatureConfig(T=2.0)
        grads, _, _ = backward(model, x, spec, mode=mode, temp=temp)

        eps = 1e-4

        def loss_with(params_w, params_b):
            m = replace(model, weights=tuple(params_w), biases=tuple(params_b))
            value, _ = batch_loss(spec, forward(m, x, mode, temp))
            return value

        for li in range(model.n_layers):
            for arrays, grad_arrays, which in [
                (model.weights, grads.weights, "w"),
                (model.biases, grads.biases, "b"),
            ]:
                flat = arrays[li]
                for idx in np.ndindex(flat.shape):
                    w_up = [w.copy() for w in model.weights]
                    b_up = [b.copy() for b in model.biases]
                    w_dn = [w.copy() for w in model.weights]
                    b_dn = [b.copy() for b in model.biases]
                    (w_up if which == "w" else b_up)[li][idx] += eps
                    (w_dn if which == "w" else b_dn)[li][idx] -= eps
                    fd = (loss_with(w_up, b_up) - loss_with(w_dn, b_dn)) / (2 * eps)
                    analytic = grad_arrays[li][idx]
                    assert abs(analytic - fd) <= 1e-3 * max(abs(analytic), abs(fd), 1e-6)

    def test_saturated_correct_prediction_has_vanishing_gradient(self):
        m = hand_model([np.array([[40.0, -40.0], [-40.0, 40.0]])], [np.zeros(2)])
        x = np.array([[1.0, 0.0]])
        spec = LossSpec(POSITIVE_CE, np.array([[1, 0]]))
        grads, loss, _ = backward(m, x, spec)
        assert loss <= 1e-6
        assert grads.norm() <= 1e-6

    def test_duplicated_sample_follows_weighted_mean_identity(self):
        rng = np.random.default_rng(23)
        m = init_model([3, 5, 3], 0.0, "softmax", seed=2)
        x = rng.normal(size=(4, 3))
        spec = random_loss_spec(rng, POSITIVE_CE, 4, 3)
        g_batch, _, _ = backward(m, x, spec)
        g_single, _, _ = backward(m, x[:1], LossSpec(POSITIVE_CE, spec.targets[:1]))
        extended = np.vstack([x, x[:1]])
        spec_ext = LossSpec(POSITIVE_CE, np.vstack([spec.targets, spec.targets[:1]]))
        g_ext, _, _ = backward(m, extended, spec_ext)
        for ge, gb, gs in zip(g_ext.weights, g_batch.weights, g_single.weights):
            np.testing.assert_allclose(ge, (4 * gb + gs) / 5, atol=1e-12)

    def test_all_masks_empty_raises(self):
        m = init_model([2, 3, 2], 0.0, "sigmoid", seed=0)
        spec = LossSpec(MASKED_BCE, np.array([[1, 0]]), np.array([[0, 0]]))
        with pytest.raises(EmptyBatchError):
            backward(m, np.zeros((1, 2)), spec)


class TestSgd:
    def test_schedule_endpoints_and_midpoint(self):
        assert learning_rate(OptimizerState(0.03, 0, 100, 0.0)) == pytest.approx(0.03)
        assert learning_rate(OptimizerState(0.03, 100, 100, 0.0)) == pytest.approx(0.0, abs=1e-18)
        assert learning_rate(OptimizerState(0.03, 50, 100, 0.0)) == pytest.approx(0.015)
        assert learning_rate(OptimizerState(0.03, 100, 100, 0.001)) == pytest.approx(0.001)

    def test_step_applies_scheduled_rate_and_increments(self):
        m = init_model([2, 3, 2], 0.0, "softmax", seed=1)
        grads, _, _ = backward(
            m, np.array([[1.0, 2.0]]), LossSpec(POSITIVE_CE, np.array([[1, 0]]))
        )
        opt = OptimizerState(base_lr=0.1, current_step=0, total_steps=4, min_lr=0.0)
        new_m, new_opt = sgd_step(m, grads, opt)
        assert new_opt.current_step == 1
        np.testing.assert_allclose(
            new_m.weights[0], m.weights[0] - 0.1 * grads.weights[0], atol=1e-15
        )

    def test_exhausted_schedule_raises(self):
        m = init_model([2, 2], 0.0, "softmax", seed=1)
        grads = ul.Gradients((np.zeros((2, 2)),), (np.zeros(2),))
        opt = OptimizerState(base_lr=0.1, current_step=3, total_steps=3)
        with pytest.raises(ScheduleExhaustedError):
            sgd_step(m, grads, opt)

    def test_invalid_optimizer_states_rejected(self):
        with pytest.raises(InvalidParameterError):
            OptimizerState(base_lr=0.0, current_step=0, total_steps=10)
        with pytest.raises(InvalidParameterError):
            OptimizerState(base_lr=0.1, current_step=11, total_steps=10)
        with pytest.raises(InvalidParameterError):
            OptimizerState(base_lr=0.1, current_step=0, total_steps=10, min_lr=0.2)


class TestCheckpoints:
    def test_round_trip_is_bit_exact(self, tmp_path):
        m = init_model([4, 10, 5, 3], 0.3, "sigmoid", seed=listed_seed())
        path = tmp_path / "model.npz"
        save_model(m, path)
        back = load_model(path)
        assert back.layer_dims == m.layer_dims
        assert back.head == m.head
        assert back.activation == m.activation
        assert back.dropout_rate == m.dropout_rate
        assert back.init_seed == m.init_seed
        assert params_bytes(back) == params_bytes(m)


def listed_seed() -> int:
    return 2**63 + 11  # exercise the full unsigned range
