"""Per-class confidence and uncertainty from repeated model evaluations.

Two interchangeable estimators:

* ``mc_dropout`` — stochastic forward passes with dropout active; spread comes
  from the dropout masks.
* ``input_jitter`` — deterministic forward passes on inputs perturbed with
  Gaussian feature noise; spread comes from the input neighborhood.

Both report the per-class mean probability and the per-class sample standard
deviation (divisor ``passes - 1``) across passes. Pass k draws its own seed
from ``(base_seed, k)``, so passes are independent and the estimate does not
depend on execution order; running passes on a thread pool (capped by the
``UPS_LAB_THREADS`` environment variable) gives bit-identical results to a
serial run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEstimatorError, InvalidParameterError
from .model import ForwardMode, ModelState, TemperatureConfig, forward
from .seeding import derive_seed

MC_DROPOUT = "mc_dropout"
INPUT_JITTER = "input_jitter"
ESTIMATORS = (MC_DROPOUT, INPUT_JITTER)

THREADS_ENV_VAR = "UPS_LAB_THREADS"


@dataclass(frozen=True)
class EstimatorConfig:
    estimator: str = MC_DROPOUT
    passes: int = 10
    jitter_sigma: float = 0.0
    base_seed: int = 0

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise InvalidParameterError(
                f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}"
            )
        if self.passes < 2:
            raise InvalidParameterError("need at least 2 passes for a standard deviation")
        if self.jitter_sigma < 0:
            raise InvalidParameterError("jitter_sigma must be >= 0")


@dataclass(frozen=True)
class UncertaintyEstimate:
    mean_probs: np.ndarray
    std_probs: np.ndarray
    passes: int
    estimator: str


def max_workers() -> int:
    """Thread cap for pass execution, from ``UPS_LAB_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidParameterError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if value < 1:
        raise InvalidParameterError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


def estimate(model: ModelState, inputs, cfg: EstimatorConfig,
             temp: TemperatureConfig | None = None) -> UncertaintyEstimate:
    """Run the configured number of passes and summarize them.

    ``mc_dropout`` requires a model with a positive dropout rate; otherwise
    every pass would be identical and the estimator degenerate.
    """
    temp = temp or TemperatureConfig()
    inputs = np.asarray(inputs, dtype=np.float64)
    if cfg.estimator == MC_DROPOUT and model.dropout_rate == 0.0:
        raise DegenerateEstimatorError(
            "mc_dropout needs dropout_rate > 0; every pass would be identical"
        )

    def run_pass(k: int) -> np.ndarray:
        pass_seed = derive_seed(cfg.base_seed, k)
        if cfg.estimator == MC_DROPOUT:
            return forward(model, inputs, ForwardMode.stochastic(pass_seed), temp)
        rng = np.random.default_rng(pass_seed)
        noisy = inputs + rng.normal(0.0, cfg.jitter_sigma, size=inputs.shape)
        return forward(model, noisy, ForwardMode.deterministic(), temp)

    workers = max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run_pass, range(cfg.passes)))
    else:
        outputs = [run_pass(k) for k in range(cfg.passes)]

    stacked = np.stack(outputs)
    std = stacked.std(axis=0, ddof=1)
    # identical passes mean exactly zero spread; mask the float residue the
    # mean subtraction leaves behind
    std[np.ptp(stacked, axis=0) == 0.0] = 0.0
    return UncertaintyEstimate(
        mean_probs=stacked.mean(axis=0),
        std_probs=std,
        passes=cfg.passes,
        estimator=cfg.estimator,
    )


def combine_confidence(est: UncertaintyEstimate) -> np.ndarray:
    """The probability matrix selection consumes: the across-pass mean."""
    return est.mean_probs
