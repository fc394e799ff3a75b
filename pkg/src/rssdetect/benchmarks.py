"""Baseline detectors: distance thresholding and K-means centroid distances.

DBC(l1) and DBC(l2) decide "different locations" iff the l1/l2 distance
between the two feature vectors exceeds a threshold tuned to maximize
accuracy over the training pairs.  KMC first clusters the training
vectors with Lloyd's algorithm, re-represents each vector by its
Euclidean distances to the centroids, and applies the DBC(l2) rule in
that distance space.

All decision functions return the same :class:`~rssdetect.detector.Decision`
shape as the neural detector, with the margin (distance - threshold) as
the statistic so that H1 <=> statistic > 0 holds uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import PairSet
from .detector import Decision, Hypothesis, sigmoid
from .seeding import as_seed_sequence


class ThresholdFit(NamedTuple):
    threshold: float
    accuracy: float  # training accuracy at the returned threshold


@dataclass(frozen=True)
class DbcModel:
    norm_order: int  # 1 or 2
    threshold: float

    def __post_init__(self):
        if self.norm_order not in (1, 2):
            raise ValueError(f"norm_order must be 1 or 2, got {self.norm_order}")


@dataclass(frozen=True)
class KmcModel:
    centroids: np.ndarray  # (kappa, M)
    threshold: float

    @property
    def kappa(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray  # (k, M)
    labels: np.ndarray  # (n,) assignment of each input row
    wcss_history: np.ndarray  # within-cluster sum of squares per iteration
    converged: bool  # terminal assignment is a fixpoint


def tune_threshold(distances, labels_h1) -> ThresholdFit:
    """Exact accuracy-maximizing threshold for the rule "H1 iff d > eta".

    Candidates are midpoints between consecutive distinct sorted
    distances plus -inf/+inf sentinels, which cover every achievable
    confusion split; ties break toward the smallest threshold.
    ``labels_h1`` is truthy for DIFF (H1) samples.
    """
    d = np.asarray(distances, dtype=np.float64)
    y = np.asarray(labels_h1, dtype=bool)
    if d.size == 0:
        raise ValueError("no labeled distances to tune on")

    order = np.argsort(d, kind="stable")
    d_sorted = d[order]
    y_sorted = y[order]

    uniq = np.unique(d_sorted)
    candidates = np.concatenate([[-np.inf], (uniq[:-1] + uniq[1:]) / 2.0, [np.inf]])

    # With threshold t: correct = (# SAME with d <= t) + (# DIFF with d > t).
    cum_same = np.concatenate([[0], np.cumsum(~y_sorted)])
    n_diff = int(np.count_nonzero(y))
    below = np.searchsorted(d_sorted, candidates, side="right")
    correct = cum_same[below] + (n_diff - (below - cum_same[below]))
    best = int(np.argmax(correct))  # first max -> smallest threshold
    return ThresholdFit(
        threshold=float(candidates[best]), accuracy=float(correct[best] / d.size)
    )


def pair_distances(pair_set: PairSet, norm_order: int) -> np.ndarray:
    diff = pair_set.first - pair_set.second
    if norm_order == 1:
        return np.abs(diff).sum(axis=1)
    return np.sqrt((diff**2).sum(axis=1))


def train_dbc(pair_set: PairSet, norm_order: int) -> DbcModel:
    """Fit the distance-based classifier on labeled training pairs."""
    fit = tune_threshold(pair_distances(pair_set, norm_order), pair_set.labels)
    return DbcModel(norm_order=norm_order, threshold=fit.threshold)


def _assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ties go to the lowest centroid index (argmin convention)
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _wcss(x: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((x - centroids[labels]) ** 2).sum())


def lloyd_kmeans(x: np.ndarray, k: int, seed, max_iter: int = 300) -> KMeansResult:
    """Lloyd's algorithm with seeded distinct-point init.

    Initial centroids are k distinct data vectors chosen uniformly at
    random.  An update that empties a cluster reseeds its centroid to
    the point currently farthest from its own centroid.  Iterates to an
    assignment fixpoint or ``max_iter`` iterations.
    """
    x = np.asarray(x, dtype=np.float64)
    uniq = np.unique(x, axis=0)
    if uniq.shape[0] < k:
        raise ValueError(
            f"k-means needs at least {k} distinct vectors, found {uniq.shape[0]}"
        )
    rng = np.random.default_rng(as_seed_sequence(seed))
    centroids = uniq[rng.choice(uniq.shape[0], size=k, replace=False)].copy()

    labels = _assign(x, centroids)
    history = [_wcss(x, centroids, labels)]
    converged = False
    for _ in range(max_iter):
        for c in range(k):
            members = x[labels == c]
            if members.shape[0] > 0:
                centroids[c] = members.mean(axis=0)
            else:
                # reseed: steal the globally worst-fit point
                dist2 = ((x - centroids[labels]) ** 2).sum(axis=1)
                centroids[c] = x[int(np.argmax(dist2))]
        new_labels = _assign(x, centroids)
        history.append(_wcss(x, centroids, new_labels))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    return KMeansResult(
        centroids=centroids,
        labels=labels,
        wcss_history=np.asarray(history),
        converged=converged,
    )


def centroid_distances(centroids: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Map vectors to their Euclidean distances from each centroid."""
    f = np.asarray(f, dtype=np.float64)
    single = f.ndim == 1
    v = f[None, :] if single else f
    d = np.sqrt(((v[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2))
    return d[0] if single else d


def train_kmc(
    ms, train_location_ids, pair_set: PairSet, kappa: int, seed, max_iter: int = 300
) -> KmcModel:
    """Cluster all training vectors, then tune the distance-space threshold.

    Every estimate f^(j)(x_n) of every training location is clustered
    (not per-location means).  The threshold applies the DBC(l2) rule to
    ||d(f) - d(f')||_2 where d(.) is the centroid-distance map.
    """
    rows = [ms.index_of(int(i)) for i in np.asarray(train_location_ids)]
    x = ms.values[rows].reshape(-1, ms.n_features)
    km = lloyd_kmeans(x, kappa, seed, max_iter=max_iter)

    rep_a = centroid_distances(km.centroids, pair_set.first)
    rep_b = centroid_distances(km.centroids, pair_set.second)
    d = np.sqrt(((rep_a - rep_b) ** 2).sum(axis=1))
    fit = tune_threshold(d, pair_set.labels)
    return KmcModel(centroids=km.centroids, threshold=fit.threshold)


def _margin_decision(margin: float) -> Decision:
    return Decision(
        hypothesis=Hypothesis.H1 if margin > 0.0 else Hypothesis.H0,
        statistic=margin,
        posterior=sigmoid(margin),
    )


def dbc_statistic_batch(model: DbcModel, f: np.ndarray, f_prime: np.ndarray) -> np.ndarray:
    diff = np.asarray(f, dtype=np.float64) - np.asarray(f_prime, dtype=np.float64)
    if model.norm_order == 1:
        d = np.abs(diff).sum(axis=-1)
    else:
        d = np.sqrt((diff**2).sum(axis=-1))
    return d - model.threshold


def decide_dbc(model: DbcModel, f: np.ndarray, f_prime: np.ndarray) -> Decision:
    """H1 iff ||f - f'||_q exceeds the tuned threshold; ties go to H0."""
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    if f.shape != f_prime.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_prime.shape}")
    return _margin_decision(float(dbc_statistic_batch(model, f, f_prime)))


def kmc_statistic_batch(model: KmcModel, f: np.ndarray, f_prime: np.ndarray) -> np.ndarray:
    rep_a = centroid_distances(model.centroids, f)
    rep_b = centroid_distances(model.centroids, f_prime)
    d = np.sqrt(((rep_a - rep_b) ** 2).sum(axis=-1))
    return d - model.threshold


def decide_kmc(model: KmcModel, f: np.ndarray, f_prime: np.ndarray) -> Decision:
    """DBC(l2) rule in centroid-distance space; ties go to H0."""
    f = np.asarray(f, dtype=np.float64)
    f_prime = np.asarray(f_prime, dtype=np.float64)
    if f.shape != f_prime.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs {f_prime.shape}")
    if f.shape[-1] != model.centroids.shape[1]:
        raise ValueError(
            f"feature length {f.shape[-1]} does not match centroids "
            f"({model.centroids.shape[1]})"
        )
    return _margin_decision(float(kmc_statistic_batch(model, f, f_prime)))
