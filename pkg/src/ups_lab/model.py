"""A small fully-connected classifier with exact reverse-mode gradients.

The network is a plain MLP: ReLU hidden layers with inverted dropout after
each hidden activation, then a linear output layer whose logits are divided by
a temperature before the head nonlinearity (row softmax for single-label,
per-class sigmoid for multi-label).

Design notes:

* ``ModelState`` is an immutable snapshot; ``sgd_step`` returns a new one.
* Dropout is inverted: a stochastic pass scales kept activations by
  1/(1 - rate), so a deterministic pass applies no rescaling and equals the
  expectation of the stochastic pass at the pre-head level.
* A stochastic pass is a pure function of ``pass_seed``: the same seed gives
  bit-identical outputs, which is what makes Monte Carlo estimates and
  training runs reproducible.
* Weights initialize from U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    EmptyBatchError,
    InvalidArchitectureError,
    InvalidParameterError,
    ScheduleExhaustedError,
    ShapeError,
)
from .losses import LossSpec, loss_and_grad_wrt_probs

SOFTMAX = "softmax"
SIGMOID = "sigmoid"
HEADS = (SOFTMAX, SIGMOID)

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class TemperatureConfig:
    """Logit temperature; T=1 leaves logits unchanged, T>1 softens them."""

    T: float = 1.0

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidParameterError(f"temperature must be positive, got {self.T}")


@dataclass(frozen=True)
class ForwardMode:
    """Deterministic evaluation or a seeded stochastic (dropout-active) pass."""

    tag: str = DETERMINISTIC
    pass_seed: int = 0

    def __post_init__(self):
        if self.tag not in (DETERMINISTIC, STOCHASTIC):
            raise InvalidParameterError(f"unknown forward mode {self.tag!r}")

    @classmethod
    def deterministic(cls) -> "ForwardMode":
        return cls(DETERMINISTIC, 0)

    @classmethod
    def stochastic(cls, pass_seed: int) -> "ForwardMode":
        return cls(STOCHASTIC, pass_seed)


@dataclass(frozen=True)
class ModelState:
    """All parameters and hyperparameters of the classifier."""

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    dropout_rate: float
    activation: str
    head: str
    init_seed: int

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class Gradients:
    """Per-parameter gradients, shaped exactly like the model parameters."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def norm(self) -> float:
        total = 0.0
        for g in (*self.weights, *self.biases):
            total += float((g * g).sum())
        return math.sqrt(total)


@dataclass(frozen=True)
class OptimizerState:
    """Cosine-annealed SGD schedule position."""

    base_lr: float
    current_step: int
    total_steps: int
    min_lr: float = 0.0

    def __post_init__(self):
        if self.base_lr <= 0:
            raise InvalidParameterError("base_lr must be positive")
        if self.total_steps < 1:
            raise InvalidParameterError("total_steps must be >= 1")
        if not 0 <= self.current_step <= self.total_steps:
            raise InvalidParameterError("current_step must lie in [0, total_steps]")
        if not 0 <= self.min_lr <= self.base_lr:
            raise InvalidParameterError("min_lr must lie in [0, base_lr]")


def init_model(layer_dims, dropout_rate: float, head: str, seed: int) -> ModelState:
    """Create a freshly initialized model.

    Weights for each layer are drawn i.i.d. from a fan-in-scaled uniform
    distribution U(-sqrt(6/fan_in), +sqrt(6/fan_in)) using a generator seeded
    with ``seed``; biases start at zero. Identical arguments give bit-identical
    parameters.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise InvalidArchitectureError(f"need input and output dims, got {list(dims)}")
    if any(d <= 0 for d in dims):
        raise InvalidArchitectureError(f"layer dims must be positive, got {list(dims)}")
    if not 0.0 <= dropout_rate < 1.0:
        raise InvalidParameterError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
    if head not in HEADS:
        raise InvalidParameterError(f"head must be one of {HEADS}, got {head!r}")

    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelState(
        layer_dims=dims,
        weights=tuple(weights),
        biases=tuple(biases),
        dropout_rate=float(dropout_rate),
        activation="relu",
        head=head,
        init_seed=int(seed),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(logits: np.ndarray) -> np.ndarray:
    out = np.empty_like(logits)
    pos = logits >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-logits[pos]))
    ez = np.exp(logits[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cache(model: ModelState, inputs: np.ndarray, mode: ForwardMode,
                   temp: TemperatureConfig):
    """Forward pass keeping the intermediates needed for backprop."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(
            f"inputs must be (N, {model.input_dim}), got {x.shape}"
        )
    rng = None
    if mode.tag == STOCHASTIC:
        rng = np.random.default_rng(mode.pass_seed)

    activations = [x]  # a_0 .. a_{L-1}: layer inputs
    pre_relu = []      # z_l for hidden layers
    masks = []         # dropout multiplier per hidden layer
    a = x
    n_hidden = model.n_layers - 1
    for l in range(n_hidden):
        z = a @ model.weights[l] + model.biases[l]
        r = np.maximum(z, 0.0)
        if rng is not None and model.dropout_rate > 0.0:
            keep = rng.random(r.shape) >= model.dropout_rate
            m = keep.astype(np.float64) / (1.0 - model.dropout_rate)
        else:
            m = np.ones_like(r)
        a = r * m
        pre_relu.append(z)
        masks.append(m)
        activations.append(a)
    logits = a @ model.weights[-1] + model.biases[-1]
    scaled = logits / temp.T
    probs = _softmax(scaled) if model.head == SOFTMAX else _sigmoid(scaled)
    return probs, (activations, pre_relu, masks)


def forward(model: ModelState, inputs, mode: ForwardMode | None = None,
            temp: TemperatureConfig | None = None) -> np.ndarray:
    """Evaluate the model, returning an (N, C) probability matrix.

    Softmax rows sum to one; sigmoid entries are independent per class.
    Deterministic mode needs no dropout rescaling (inverted dropout).
    """
    mode = mode or ForwardMode.deterministic()
    temp = temp or TemperatureConfig()
    probs, _ = _forward_cache(model, inputs, mode, temp)
    return probs


def backward(model: ModelState, inputs, spec: LossSpec,
             mode: ForwardMode | None = None,
             temp: TemperatureConfig | None = None):
    """Exact gradients of the mean batch loss with respect to every parameter.

    Returns ``(grads, loss, n_contributing)`` where the loss is averaged over
    samples with a defined loss (non-empty masks). Raises ``EmptyBatchError``
    when no sample contributes. Gradients are taken through the same forward
    pass (including any fixed dropout masks from a stochastic mode).
    """
    mode = mode or ForwardMode.deterministic()
    temp = temp or TemperatureConfig()
    probs, (activations, pre_relu, masks) = _forward_cache(model, inputs, mode, temp)
    losses, dprobs, valid = loss_and_grad_wrt_probs(spec, probs)
    n = int(valid.sum())
    if n == 0:
        raise EmptyBatchError("no sample in the batch has a defined loss")
    loss = float(losses.sum() / n)
    dp = dprobs / n

    if model.head == SOFTMAX:
        inner = (dp * probs).sum(axis=1, keepdims=True)
        dscaled = probs * (dp - inner)
    else:
        dscaled = dp * probs * (1.0 - probs)
    dz = dscaled / temp.T

    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    grad_w[-1] = activations[-1].T @ dz
    grad_b[-1] = dz.sum(axis=0)
    da = dz @ model.weights[-1].T
    for l in range(model.n_layers - 2, -1, -1):
        dr = da * masks[l]
        dz_hidden = dr * (pre_relu[l] > 0)
        grad_w[l] = activations[l].T @ dz_hidden
        grad_b[l] = dz_hidden.sum(axis=0)
        da = dz_hidden @ model.weights[l].T
    return Gradients(tuple(grad_w), tuple(grad_b)), loss, n


def learning_rate(opt: OptimizerState) -> float:
    """Cosine-annealed rate at the optimizer's current step."""
    t = opt.current_step
    cos_term = 1.0 + math.cos(math.pi * t / opt.total_steps)
    return opt.min_lr + 0.5 * (opt.base_lr - opt.min_lr) * cos_term


def sgd_step(model: ModelState, grads: Gradients, opt: OptimizerState):
    """One SGD update at the scheduled rate; returns new model and optimizer."""
    if opt.current_step >= opt.total_steps:
        raise ScheduleExhaustedError(
            f"schedule of {opt.total_steps} steps is exhausted"
        )
    lr = learning_rate(opt)
    new_w = tuple(w - lr * g for w, g in zip(model.weights, grads.weights))
    new_b = tuple(b - lr * g for b, g in zip(model.biases, grads.biases))
    new_model = replace(model, weights=new_w, biases=new_b)
    new_opt = replace(opt, current_step=opt.current_step + 1)
    return new_model, new_opt


def save_model(model: ModelState, path) -> None:
    """Serialize a checkpoint to ``.npz``; round-trips bit-exactly.

    The archive stores layer dims, head/activation tags, dropout rate, init
    seed, and every parameter array at full float64 precision.
    """
    arrays = {
        "layer_dims": np.asarray(model.layer_dims, dtype=np.int64),
        "dropout_rate": np.float64(model.dropout_rate),
        "activation": np.str_(model.activation),
        "head": np.str_(model.head),
        "init_seed": np.uint64(model.init_seed),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path) -> ModelState:
    """Load a checkpoint written by :func:`save_model`."""
    with np.load(path) as data:
        dims = tuple(int(d) for d in data["layer_dims"])
        weights = tuple(data[f"W{i}"] for i in range(len(dims) - 1))
        biases = tuple(data[f"b{i}"] for i in range(len(dims) - 1))
        return ModelState(
            layer_dims=dims,
            weights=weights,
            biases=biases,
            dropout_rate=float(data["dropout_rate"]),
            activation=str(data["activation"]),
            head=str(data["head"]),
            init_seed=int(data["init_seed"]),
        )
