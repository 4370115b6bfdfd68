"""Estimator contracts: determinism, seed schedules, spread bounds."""

import numpy as np
import pytest

from ups_lab.errors import DegenerateEstimatorError, InvalidParameterError
from ups_lab.model import ForwardMode, TemperatureConfig, forward, init_model
from ups_lab.seeding import derive_seed
from ups_lab.uncertainty import (
    THREADS_ENV_VAR,
    EstimatorConfig,
    combine_confidence,
    estimate,
)


@pytest.fixture
def model():
    return init_model([3, 12, 4], 0.3, "softmax", seed=21)


@pytest.fixture
def inputs():
    return np.random.default_rng(2).normal(size=(15, 3))


class TestEstimate:
    def test_jitter_with_zero_sigma_has_zero_spread(self, model, inputs):
        cfg = EstimatorConfig(estimator="input_jitter", passes=10,
                              jitter_sigma=0.0, base_seed=5)
        est = estimate(model, inputs, cfg)
        assert np.all(est.std_probs == 0.0)

    def test_same_config_twice_is_identical(self, model, inputs):
        cfg = EstimatorConfig(passes=10, base_seed=17)
        a = estimate(model, inputs, cfg)
        b = estimate(model, inputs, cfg)
        assert a.mean_probs.tobytes() == b.mean_probs.tobytes()
        assert a.std_probs.tobytes() == b.std_probs.tobytes()

    def test_matches_independent_reexecution_of_the_seed_schedule(self, model, inputs):
        """Re-run the documented per-pass seeds by hand and recompute the stats."""
        cfg = EstimatorConfig(passes=10, base_seed=31)
        est = estimate(model, inputs, cfg, TemperatureConfig(T=2.0))
        stack = np.stack([
            forward(model, inputs, ForwardMode.stochastic(derive_seed(31, k)),
                    TemperatureConfig(T=2.0))
            for k in range(10)
        ])
        np.testing.assert_array_equal(est.mean_probs, stack.mean(axis=0))
        np.testing.assert_array_equal(est.std_probs, stack.std(axis=0, ddof=1))

    def test_mc_dropout_without_dropout_is_degenerate(self, inputs):
        flat = init_model([3, 8, 2], 0.0, "softmax", seed=1)
        with pytest.raises(DegenerateEstimatorError):
            estimate(flat, inputs, EstimatorConfig(passes=5))

    def test_needs_two_passes(self):
        with pytest.raises(InvalidParameterError):
            EstimatorConfig(passes=1)

    def test_std_entries_within_bernoulli_bound(self, model, inputs):
        for seed in range(5):
            est = estimate(model, inputs, EstimatorConfig(passes=10, base_seed=seed))
            assert np.all(est.std_probs >= 0.0)
            assert np.all(est.std_probs <= 0.5)

    def test_mean_rows_stay_on_the_simplex(self, model, inputs):
        est = estimate(model, inputs, EstimatorConfig(passes=10, base_seed=3))
        np.testing.assert_allclose(est.mean_probs.sum(axis=1), 1.0, atol=1e-6)

    def test_spread_grows_with_jitter_sigma(self, inputs):
        noiseless = init_model([3, 12, 4], 0.0, "softmax", seed=21)
        means = []
        for sigma in (0.0, 0.01, 0.1):
            cfg = EstimatorConfig(estimator="input_jitter", passes=10,
                                  jitter_sigma=sigma, base_seed=9)
            means.append(estimate(noiseless, inputs, cfg).std_probs.mean())
        assert means[0] <= means[1] <= means[2]

    def test_thread_pool_matches_serial_exactly(self, model, inputs, monkeypatch):
        cfg = EstimatorConfig(passes=8, base_seed=41)
        serial = estimate(model, inputs, cfg)
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        pooled = estimate(model, inputs, cfg)
        assert serial.mean_probs.tobytes() == pooled.mean_probs.tobytes()
        assert serial.std_probs.tobytes() == pooled.std_probs.tobytes()

    def test_bad_thread_env_value_rejected(self, model, inputs, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "zero")
        with pytest.raises(InvalidParameterError):
            estimate(model, inputs, EstimatorConfig(passes=2))
        monkeypatch.setenv(THREADS_ENV_VAR, "0")
        with pytest.raises(InvalidParameterError):
            estimate(model, inputs, EstimatorConfig(passes=2))


class TestCombine:
    def test_two_identical_passes_combine_to_either(self, inputs):
        noiseless = init_model([3, 8, 3], 0.0, "softmax", seed=2)
        cfg = EstimatorConfig(estimator="input_jitter", passes=2,
                              jitter_sigma=0.0, base_seed=0)
        est = estimate(noiseless, inputs, cfg)
        single = forward(noiseless, inputs)
        np.testing.assert_allclose(combine_confidence(est), single, atol=1e-15)

    def test_combine_is_the_elementwise_mean(self, model, inputs):
        cfg = EstimatorConfig(passes=6, base_seed=13)
        est = estimate(model, inputs, cfg, TemperatureConfig(T=2.0))
        stack = np.stack([
            forward(model, inputs, ForwardMode.stochastic(derive_seed(13, k)),
                    TemperatureConfig(T=2.0))
            for k in range(6)
        ])
        manual = np.zeros_like(stack[0])
        for k in range(6):
            manual += stack[k]
        manual /= 6
        np.testing.assert_allclose(combine_confidence(est), manual, atol=1e-15)
