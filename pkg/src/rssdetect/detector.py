"""Commutative neural detector for the same-location hypothesis test.

Given two RSS vector estimates f and f', the detector evaluates a scalar
statistic approximating the log posterior odds of H1 (different
locations) versus H0 (same location) and decides H1 iff the statistic
exceeds 0.  The network itself is asymmetric in its two inputs, so the
statistic is symmetrized by averaging the network over both argument
orders, which makes the decision exactly invariant to swapping f and f'.

A non-trainable first stage maps (f, f') to [f, f', f - f']; the
difference block gives the trainable layers a head start.  Features are
standardized with statistics frozen from the training pairs; that
transform is affine and invertible, so it changes nothing about the
hypothesis test, only the conditioning of SGD.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from . import neural
from .dataset import MeasurementSet, LocationSplit, PairSet, build_pair_set
from .neural import GradientBundle, MlpParams, TrainConfig, TrainHistory

# Standardization clamp for features that are constant over the training
# pairs; keeps std strictly positive.
STD_EPSILON = 1e-8


class Hypothesis(enum.Enum):
    H0 = "H0"  # same location
    H1 = "H1"  # different locations


@dataclass(frozen=True)
class Decision:
    hypothesis: Hypothesis
    statistic: float
    posterior: float  # P[H1 | f, f'] under the sigmoid link

    def __post_init__(self):
        wants_h1 = self.statistic > 0.0
        if wants_h1 != (self.hypothesis is Hypothesis.H1):
            raise ValueError("hypothesis must be H1 exactly when the statistic is > 0")


@dataclass(frozen=True)
class DetectorModel:
    """Trained detector: network weights plus frozen feature statistics."""

    params: MlpParams
    feature_mean: np.ndarray  # (M,)
    feature_std: np.ndarray  # (M,), entries >= STD_EPSILON
    negative_slope: float = 0.01

    def __post_init__(self):
        m = self.feature_mean.shape[0]
        if self.feature_std.shape != (m,):
            raise ValueError("feature_mean and feature_std must have equal length")
        if np.any(self.feature_std <= 0):
            raise ValueError("feature_std entries must be > 0")
        if self.params.weights[0].shape[1] != 3 * m:
            raise ValueError(
                f"network input width {self.params.weights[0].shape[1]} "
                f"must be 3*M = {3 * m}"
            )

    @property
    def n_features(self) -> int:
        return self.feature_mean.shape[0]


def sigmoid(x):
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out) if out.ndim == 0 else out


def softplus(x):
    """log(1 + exp(x)) without overflow; equals -log(sigmoid(-x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


def fixed_first_layer(f: np.ndarray, f_prime: np.ndarray) -> np.ndarray:
    """Non-trainable input stage: (f, f') -> [f, f', f - f'].

    Equivalent to multiplying the M x 2 matrix [f, f'] by the constant
    2 x 3 matrix [[1, 0, 1], [0, 1, -1]] and flattening column-wise.
    Accepts single vectors or (B, M) batches.
    """
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    if f.shape != f_prime.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_prime.shape}")
    return np.concatenate([f, f_prime, f - f_prime], axis=-1)


def _standardize(model: DetectorModel, f: np.ndarray) -> np.ndarray:
    return (f - model.feature_mean) / model.feature_std


def statistic_batch(model: DetectorModel, f: np.ndarray, f_prime: np.ndarray) -> np.ndarray:
    """Symmetrized statistic for (B, M) batches of pairs."""
    zf = _standardize(model, np.asarray(f, dtype=np.float64))
    zp = _standardize(model, np.asarray(f_prime, dtype=np.float64))
    g_fwd = neural.forward(model.params, fixed_first_layer(zf, zp), model.negative_slope)
    g_rev = neural.forward(model.params, fixed_first_layer(zp, zf), model.negative_slope)
    return (g_fwd + g_rev) / 2.0


def statistic(model: DetectorModel, f: np.ndarray, f_prime: np.ndarray) -> float:
    """Symmetrized detection statistic g(f, f') = (g~(f,f') + g~(f',f)) / 2."""
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(f_prime))):
        raise ValueError("feature vectors must be finite")
    return float(statistic_batch(model, f[None, :], f_prime[None, :])[0])


def decide(model: DetectorModel, f: np.ndarray, f_prime: np.ndarray) -> Decision:
    """Threshold-0 decision; an exact tie goes to H0."""
    g = statistic(model, f, f_prime)
    return Decision(
        hypothesis=Hypothesis.H1 if g > 0.0 else Hypothesis.H0,
        statistic=g,
        posterior=sigmoid(g),
    )


def pair_loss(model: DetectorModel, pair_set: PairSet) -> float:
    """Negative log-likelihood of the pair labels, averaged over pairs.

    SAME pairs contribute -log(1 - sigma(g)), DIFF pairs -log(sigma(g)),
    both computed in the log domain.
    """
    if len(pair_set) == 0:
        raise ValueError("pair set is empty")
    g = statistic_batch(model, pair_set.first, pair_set.second)
    y = pair_set.labels  # True for DIFF
    losses = np.where(y, softplus(-g), softplus(g))
    return float(np.mean(losses))


def _loss_from_stacked(
    params: MlpParams, stacked: np.ndarray, labels_h1: np.ndarray, slope: float
) -> tuple[float, GradientBundle]:
    """Loss/gradient given the pre-built [forward-order; swapped-order] batch.

    The symmetrized statistic routes the per-pair upstream gradient
    through both argument orders with weight 1/2 each; stacking the two
    orders into one batch keeps it a single forward and backward pass.
    """
    n = labels_h1.shape[0]
    out, cache = neural.forward_cached(params, stacked, slope)
    g = (out[:n] + out[n:]) / 2.0
    loss = float(np.mean(np.where(labels_h1, softplus(-g), softplus(g))))
    dg = (sigmoid(g) - labels_h1.astype(np.float64)) / n
    upstream = np.concatenate([dg, dg]) / 2.0
    grads = neural.backward_from_cache(params, cache, upstream, slope)
    return loss, grads


def _stack_both_orders(model: DetectorModel, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    zf = _standardize(model, first)
    zp = _standardize(model, second)
    return np.concatenate([fixed_first_layer(zf, zp), fixed_first_layer(zp, zf)], axis=0)


def _loss_terms(
    model: DetectorModel, first: np.ndarray, second: np.ndarray, labels_h1: np.ndarray
) -> tuple[float, GradientBundle]:
    """Mean pair loss and its exact gradient w.r.t. the network parameters."""
    stacked = _stack_both_orders(model, first, second)
    return _loss_from_stacked(model.params, stacked, labels_h1, model.negative_slope)


def pair_loss_grad(model: DetectorModel, pair_set: PairSet) -> tuple[float, GradientBundle]:
    """Loss and gradient over a whole pair set (used by tests and training)."""
    return _loss_terms(model, pair_set.first, pair_set.second, pair_set.labels)


def accuracy(model: DetectorModel, pair_set: PairSet) -> float:
    """Fraction of pairs whose threshold-0 decision matches the label."""
    g = statistic_batch(model, pair_set.first, pair_set.second)
    return float(np.count_nonzero((g > 0.0) == pair_set.labels) / len(pair_set))


def freeze_standardization(pair_set: PairSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean/std over all vectors of a pair set (both slots).

    Uses the population std (ddof=0); degenerate features are clamped to
    STD_EPSILON.
    """
    stacked = np.concatenate([pair_set.first, pair_set.second], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_EPSILON)
    return mean, std


def train_detector(
    ms: MeasurementSet,
    split: LocationSplit,
    k_train: int,
    k_val: int,
    cfg: TrainConfig,
    seed: int,
) -> tuple[DetectorModel, TrainHistory]:
    """Build pairs, freeze standardization, and fit the network.

    Training pairs come from the split's train locations, validation
    pairs from its validation locations.  Early stopping tracks the
    fraction of validation pairs whose decision matches the label.  Four
    independent substreams are derived from ``seed``: train pairs,
    validation pairs, weight init, and epoch shuffling.
    """
    ss = np.random.SeedSequence(seed)
    s_train, s_val, s_init, s_shuffle = ss.spawn(4)

    train_pairs = build_pair_set(ms, split.train_ids, k_train, seed=s_train)
    val_pairs = build_pair_set(ms, split.val_ids, k_val, seed=s_val)

    mean, std = freeze_standardization(train_pairs)
    m = ms.n_features
    sizes = [3 * m, *cfg.hidden_sizes, 1]
    params = neural.init_params(sizes, seed=s_init, scale=cfg.init_scale)
    model = DetectorModel(
        params=params, feature_mean=mean, feature_std=std, negative_slope=cfg.negative_slope
    )

    # the standardized fixed-layer inputs never change during training, so
    # build them once: rows [0, 2K) are (f, f'), rows [2K, 4K) the swap
    n_train = len(train_pairs)
    train_stack = _stack_both_orders(model, train_pairs.first, train_pairs.second)
    labels = train_pairs.labels
    val_stack = _stack_both_orders(model, val_pairs.first, val_pairs.second)
    val_labels = val_pairs.labels
    n_val = len(val_pairs)

    def batch_grad(p: MlpParams, idx: np.ndarray):
        stacked = np.concatenate([train_stack[idx], train_stack[idx + n_train]], axis=0)
        return _loss_from_stacked(p, stacked, labels[idx], cfg.negative_slope)

    def val_acc(p: MlpParams) -> float:
        out = neural.forward(p, val_stack, cfg.negative_slope)
        g = (out[:n_val] + out[n_val:]) / 2.0
        return float(np.count_nonzero((g > 0.0) == val_labels) / n_val)

    loop_cfg = replace(cfg, seed=int(s_shuffle.generate_state(1)[0]))
    best, history = neural.train_loop(params, len(train_pairs), batch_grad, val_acc, loop_cfg)
    return (
        DetectorModel(
            params=best, feature_mean=mean, feature_std=std, negative_slope=cfg.negative_slope
        ),
        history,
    )
