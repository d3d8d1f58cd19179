"""Feed-forward network trained by minibatch gradient descent with Adam.

Hidden layers apply an affine map followed by the activation; the output
layer is a 2-way (or wider) softmax trained on mean cross-entropy. All
randomness (weight init, epoch shuffles) flows from one seeded generator,
so a config seed fixes the whole trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import LabeledDataset
from .errors import ConfigError, NumericalError, ShapeMismatchError

ACTIVATIONS = ("logistic", "relu")

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_sizes: tuple[int, ...] = (128,)
    output_dim: int = 2
    epochs: int = 100
    learning_rate: float = 0.001
    batch_size: int = 256
    seed: int = 42
    hidden_activation: str = "logistic"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ConfigError("all layer dimensions must be >= 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.hidden_activation!r}")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_sizes, self.output_dim)


@dataclass
class MlpModel:
    weights: list[np.ndarray]  # W_l with shape (fan_in, fan_out)
    biases: list[np.ndarray]
    config: MlpConfig
    loss_history: list[float] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(mlp_forward(self, x), axis=1)


def _logistic(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "logistic":
        return _logistic(z)
    return np.maximum(z, 0.0)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward_activations(model: MlpModel, x: np.ndarray) -> list[np.ndarray]:
    """All layer activations; last entry is the softmax output."""
    a = x
    acts = [a]
    last = len(model.weights) - 1
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        a = _softmax(z) if layer == last else _activate(z, model.config.hidden_activation)
        acts.append(a)
    return acts


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Per-class probability matrix; each row sums to 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.config.input_dim:
        raise ShapeMismatchError(f"expected {model.config.input_dim} inputs, got {x.shape[1]}")
    return _forward_activations(model, x)[-1]


def cross_entropy(probs: np.ndarray, y: Sequence[int]) -> float:
    """Mean negative log-probability of the true class, floored at 1e-12."""
    p = np.asarray(probs, dtype=np.float64)
    yv = np.asarray(y, dtype=np.int64)
    if p.ndim != 2 or p.shape[0] != yv.shape[0]:
        raise ShapeMismatchError(f"probs {p.shape} vs labels {yv.shape}")
    picked = p[np.arange(p.shape[0]), yv]
    return float(-np.log(np.maximum(picked, LOG_FLOOR)).mean())


def _gradients_from_activations(
    model: MlpModel, acts: list[np.ndarray], yv: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    probs = acts[-1]
    n = probs.shape[0]
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), yv] = 1.0
    delta = (probs - onehot) / n  # softmax + cross-entropy shortcut

    grad_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        a_prev = acts[layer]
        grad_w[layer] = a_prev.T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            upstream = delta @ model.weights[layer].T
            a = acts[layer]
            if model.config.hidden_activation == "logistic":
                delta = upstream * a * (1.0 - a)
            else:
                delta = upstream * (a > 0.0)
    return grad_w, grad_b


def mlp_backward(
    model: MlpModel, x: np.ndarray, y: Sequence[int]
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of mean cross-entropy for every weight and bias."""
    x = np.asarray(x, dtype=np.float64)
    yv = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ShapeMismatchError("empty batch")
    if x.shape[0] != yv.shape[0]:
        raise ShapeMismatchError(f"batch {x.shape[0]} vs labels {yv.shape[0]}")
    return _gradients_from_activations(model, _forward_activations(model, x), yv)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
    t: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update with bias correction; t is the 1-based step index."""
    if t < 1:
        raise ConfigError("adam step index t must be >= 1")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatchError("params, grads, and state must align")
    new_params: list[np.ndarray] = []
    new_m: list[np.ndarray] = []
    new_v: list[np.ndarray] = []
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"gradient {g.shape} vs parameter {p.shape}")
        m2 = beta1 * m + (1.0 - beta1) * g
        v2 = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m2 / c1
        v_hat = v2 / c2
        new_params.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m2)
        new_v.append(v2)
    return new_params, AdamState(m=new_m, v=new_v)


def init_params(config: MlpConfig) -> tuple[list[np.ndarray], list[np.ndarray], np.random.Generator]:
    """Glorot-uniform weights, zero biases, from the config seed."""
    rng = np.random.default_rng(config.seed)
    dims = config.layer_dims
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases, rng


def mlp_train(config: MlpConfig, train: "LabeledDataset | tuple[np.ndarray, np.ndarray]") -> MlpModel:
    """Seeded minibatch training; bitwise deterministic for a fixed seed."""
    if isinstance(train, LabeledDataset):
        x, y = train.x, train.y
    else:
        x, y = train
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] == 0:
        raise ConfigError("training set is empty")
    if x.shape[1] != config.input_dim:
        raise ConfigError(f"config.input_dim={config.input_dim} but data has {x.shape[1]} columns")
    if np.isnan(x).any():
        raise ConfigError("training matrix contains absent values; impute first")
    if y.max(initial=0) >= config.output_dim:
        raise ConfigError("label outside output_dim classes")

    weights, biases, rng = init_params(config)
    model = MlpModel(weights=weights, biases=biases, config=config)
    n_params = len(weights)
    state = AdamState.zeros_like(weights + biases)
    n = x.shape[0]
    t = 0
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            acts = _forward_activations(model, xb)
            loss_sum += cross_entropy(acts[-1], yb) * idx.shape[0]
            gw, gb = _gradients_from_activations(model, acts, yb)
            t += 1
            updated, state = adam_step(
                model.weights + model.biases, gw + gb, state, t, config.learning_rate
            )
            model.weights = updated[:n_params]
            model.biases = updated[n_params:]
        model.loss_history.append(loss_sum / n)
        for p in model.weights + model.biases:
            if not np.isfinite(p).all():
                raise NumericalError("non-finite parameter during training")
    for p in model.weights + model.biases:
        p.setflags(write=False)  # trained model is immutable and shareable
    return model
