"""Minimal dense feed-forward network with hand-rolled backprop.

The architecture family is fixed: affine layers with leaky-ReLU
activations and a single linear output neuron.  Everything is float64;
gradient-check fidelity matters more than speed at this scale.  Weight
matrices are (fan_out, fan_in); a batch of inputs is a (B, fan_in)
array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLossError
from .seeding import as_seed_sequence


@dataclass
class MlpParams:
    """Trainable weights and biases, one (W, b) per layer."""

    weights: list  # of (out, in) float64 arrays
    biases: list  # of (out,) float64 arrays

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class GradientBundle:
    """Per-parameter gradients, shape-identical to the MlpParams they mirror."""

    weights: list
    biases: list


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for minibatch SGD with early stopping.

    ``l1_lambda`` penalizes the weights (never the biases) of the first
    trainable layer only, nudging the network to drop uninformative
    input features.  ``patience`` may be ``math.inf`` to disable early
    stopping.

    The defaults are calibrated for the shipped architecture on
    standardized features at the default campaign scale (2.5k training
    pairs): plain SGD at this width wants a large step size, and
    validation accuracy typically saturates within ~20 epochs.
    """

    learning_rate: float = 0.15
    batch_size: int = 128
    max_epochs: int = 25
    patience: float = 6
    l1_lambda: float = 1e-4
    negative_slope: float = 0.01
    hidden_sizes: tuple[int, ...] = (512, 512, 512)
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        if self.l1_lambda < 0:
            raise ValueError(f"l1_lambda must be >= 0, got {self.l1_lambda}")
        if self.negative_slope < 0:
            raise ValueError(f"negative_slope must be >= 0, got {self.negative_slope}")
        if self.init_scale <= 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")


@dataclass
class TrainHistory:
    """Per-epoch record: mean training loss and validation accuracy."""

    train_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)

    @property
    def n_epochs(self) -> int:
        return len(self.train_loss)

    def best_epoch(self) -> int:
        """Index of the maximum validation accuracy (earliest on ties)."""
        return int(np.argmax(self.val_accuracy))


def init_params(layer_sizes, seed: int, scale: float = 1.0) -> MlpParams:
    """Fan-in-scaled uniform init: W ~ U(-c, c) with c = scale/sqrt(fan_in).

    Biases start at zero.  Deterministic given seed.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("layer_sizes must name at least input and output widths")
    rng = np.random.default_rng(as_seed_sequence(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        c = scale / math.sqrt(fan_in)
        weights.append(rng.uniform(-c, c, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights=weights, biases=biases)


def _leaky(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def _leaky_grad(z: np.ndarray, slope: float) -> np.ndarray:
    # subgradient at exactly 0 takes the negative slope
    return np.where(z > 0, 1.0, slope)


def forward(params: MlpParams, x: np.ndarray, negative_slope: float = 0.01):
    """Evaluate the network.

    A 1-D input of length fan_in yields a float; a (B, fan_in) batch
    yields a (B,) array.  Hidden layers are affine + leaky ReLU; the
    output layer is affine with a single linear neuron.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != params.weights[0].shape[1]:
        raise ValueError(
            f"input width {a.shape[1]} does not match network input {params.weights[0].shape[1]}"
        )
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = _leaky(a @ w.T + b, negative_slope)
    out = (a @ params.weights[-1].T + params.biases[-1])[:, 0]
    return float(out[0]) if single else out


def forward_cached(params: MlpParams, x: np.ndarray, negative_slope: float = 0.01):
    """Batch forward that also returns the state the backward pass needs.

    Returns (outputs (B,), cache); feed the cache to
    :func:`backward_from_cache` to get gradients without recomputing the
    forward pass.  Training hot loops use this pair; everything else can
    stay on the plain :func:`forward`/:func:`backward` wrappers.
    """
    a = np.asarray(x, dtype=np.float64)
    pre = []
    acts = [a]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = a @ w.T + b
        pre.append(z)
        a = _leaky(z, negative_slope)
        acts.append(a)
    out = (a @ params.weights[-1].T + params.biases[-1])[:, 0]
    return out, (pre, acts)


def backward_from_cache(
    params: MlpParams, cache, upstream: np.ndarray, negative_slope: float = 0.01
) -> GradientBundle:
    """Gradients of sum_i upstream_i * output_i given a forward cache."""
    pre, acts = cache
    n = params.n_layers
    g_w = [None] * n
    g_b = [None] * n
    delta = np.asarray(upstream, dtype=np.float64)[:, None]  # output layer is linear
    g_w[n - 1] = delta.T @ acts[-1]
    g_b[n - 1] = delta.sum(axis=0)
    for layer in range(n - 2, -1, -1):
        delta = (delta @ params.weights[layer + 1]) * _leaky_grad(pre[layer], negative_slope)
        g_w[layer] = delta.T @ acts[layer]
        g_b[layer] = delta.sum(axis=0)
    return GradientBundle(weights=g_w, biases=g_b)


def backward(
    params: MlpParams, x: np.ndarray, upstream, negative_slope: float = 0.01
) -> GradientBundle:
    """Exact gradients of sum_i upstream_i * output_i w.r.t. every parameter.

    ``x`` may be a single input vector with scalar upstream, or a
    (B, fan_in) batch with a (B,) upstream; batch gradients are summed.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
        upstream = np.array([float(upstream)])
    else:
        upstream = np.asarray(upstream, dtype=np.float64)
    _, cache = forward_cached(params, x, negative_slope)
    return backward_from_cache(params, cache, upstream, negative_slope)


def sgd_step(
    params: MlpParams,
    grads: GradientBundle,
    learning_rate: float,
    l1_lambda: float = 0.0,
    l1_layer: int = 0,
) -> MlpParams:
    """One SGD update, in place; returns the updated params.

    The l1 subgradient lambda*sign(w) (sign(0) = 0) applies to the
    weights of ``l1_layer`` only; biases are never penalized.
    """
    for layer, (w, gw) in enumerate(zip(params.weights, grads.weights)):
        if l1_lambda > 0.0 and layer == l1_layer:
            w -= learning_rate * (gw + l1_lambda * np.sign(w))
        else:
            w -= learning_rate * gw
    for b, gb in zip(params.biases, grads.biases):
        b -= learning_rate * gb
    return params


def train_loop(
    params: MlpParams,
    n_examples: int,
    batch_grad_fn,
    val_accuracy_fn,
    cfg: TrainConfig,
) -> tuple[MlpParams, TrainHistory]:
    """Minibatch SGD with validation-accuracy early stopping.

    Each epoch shuffles example indices (seeded), walks consecutive
    minibatches through ``batch_grad_fn(params, indices) -> (loss,
    GradientBundle)`` (both averaged over the batch), then evaluates
    ``val_accuracy_fn(params)``.  The snapshot with the best validation
    accuracy is kept (strict improvement, so ties keep the earliest);
    training stops after ``patience`` epochs without improvement or at
    ``max_epochs``.
    """
    rng = np.random.default_rng(as_seed_sequence(cfg.seed))
    history = TrainHistory()
    best = params.copy()
    best_acc = -math.inf
    epochs_since_best = 0

    for _ in range(cfg.max_epochs):
        order = rng.permutation(n_examples)
        loss_sum = 0.0
        for start in range(0, n_examples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = batch_grad_fn(params, idx)
            if not math.isfinite(loss):
                raise NonFiniteLossError(
                    f"training loss became {loss}; try a smaller learning rate "
                    f"(currently {cfg.learning_rate})"
                )
            sgd_step(params, grads, cfg.learning_rate, cfg.l1_lambda, l1_layer=0)
            loss_sum += loss * idx.size
        history.train_loss.append(loss_sum / n_examples)

        acc = float(val_accuracy_fn(params))
        history.val_accuracy.append(acc)
        if acc > best_acc:
            best_acc = acc
            best = params.copy()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break
    return best, history
