"""Inference and evaluation: k-means over latents, accuracy, and NMI.

Cluster ids carry no meaning on their own, so both metrics are invariant
to relabeling either argument: accuracy maximizes over injective cluster
to class mappings, and NMI only looks at the induced partitions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._kmeans import kmeans
from ._validation import as_float_matrix, as_int_vector, check_same_length
from .exceptions import ConfigError, LengthMismatchError, TooFewSamplesError


@dataclass(frozen=True)
class ClusteringReport:
    """Predicted clusters vs ground truth, with both summary metrics."""

    predicted: np.ndarray
    truth: np.ndarray
    ca: float
    nmi: float
    k: int
    seed: int

    def __post_init__(self):
        predicted = as_int_vector(self.predicted, "predicted")
        truth = as_int_vector(self.truth, "truth")
        check_same_length(predicted, truth, "predicted", "truth")
        if not 0.0 <= self.ca <= 1.0 or not 0.0 <= self.nmi <= 1.0:
            raise ConfigError("ca and nmi must lie in [0, 1]")
        object.__setattr__(self, "predicted", predicted)
        object.__setattr__(self, "truth", truth)

    @property
    def n(self) -> int:
        return self.predicted.shape[0]


def kmeans_infer(latents, k: int, seed: int, return_history: bool = False):
    """Cluster latents into k groups and return one cluster id per row.

    With return_history=True also returns the per-iteration inertia trace,
    which is non-increasing; useful when diagnosing a bad clustering.
    """
    pts = as_float_matrix(latents, "latents")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if pts.shape[0] < k:
        raise TooFewSamplesError(f"{pts.shape[0]} latents cannot form {k} clusters")
    result = kmeans(pts, k, seed, track_inertia=return_history)
    if return_history:
        return result.labels, result.inertia_history
    return result.labels


def _contingency(predicted: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Count matrix over (predicted cluster, true class) pairs."""
    _, pred_idx = np.unique(predicted, return_inverse=True)
    _, true_idx = np.unique(truth, return_inverse=True)
    counts = np.zeros((pred_idx.max() + 1, true_idx.max() + 1), dtype=np.int64)
    np.add.at(counts, (pred_idx, true_idx), 1)
    return counts


def clustering_accuracy(predicted, truth) -> float:
    """Fraction of samples explained by the best injective mapping of
    predicted clusters onto true classes.

    The count matrix is zero-padded to square so cluster and class counts
    may differ; optimal assignment on it equals the brute-force maximum
    over all mappings.
    """
    pred = as_int_vector(predicted, "predicted")
    true = as_int_vector(truth, "truth")
    if pred.shape[0] != true.shape[0]:
        raise LengthMismatchError(
            f"predicted has {pred.shape[0]} entries, truth has {true.shape[0]}"
        )
    if pred.shape[0] == 0:
        raise LengthMismatchError("need at least one sample")
    counts = _contingency(pred, true)
    size = max(counts.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(-padded)
    return float(padded[rows, cols].sum() / pred.shape[0])


def nmi(predicted, truth) -> float:
    """Mutual information normalized by the geometric mean of the two
    partition entropies, from empirical counts with natural logs.

    Zero-entropy corners: if both partitions are a single cluster they are
    identical, which scores 1; if only one of them is degenerate there is
    nothing shared to measure, which scores 0.
    """
    pred = as_int_vector(predicted, "predicted")
    true = as_int_vector(truth, "truth")
    if pred.shape[0] != true.shape[0]:
        raise LengthMismatchError(
            f"predicted has {pred.shape[0]} entries, truth has {true.shape[0]}"
        )
    n = pred.shape[0]
    if n == 0:
        raise LengthMismatchError("need at least one sample")
    counts = _contingency(pred, true)
    joint = counts / n
    # Marginals divide integer row/column sums so a one-cluster partition
    # gets probability exactly 1.0 and entropy exactly 0.0; summing the
    # float joint instead can drift past 1 and turn the entropy negative.
    p_pred = counts.sum(axis=1) / n
    p_true = counts.sum(axis=0) / n
    h_pred = float(-np.sum(p_pred[p_pred > 0] * np.log(p_pred[p_pred > 0])))
    h_true = float(-np.sum(p_true[p_true > 0] * np.log(p_true[p_true > 0])))
    if h_pred == 0.0 and h_true == 0.0:
        return 1.0
    if h_pred == 0.0 or h_true == 0.0:
        return 0.0
    nz = joint > 0
    outer = np.outer(p_pred, p_true)
    info = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return float(np.clip(info / np.sqrt(h_pred * h_true), 0.0, 1.0))


def evaluate_clustering(latents, truth, k: int, seed: int) -> ClusteringReport:
    """Run k-means inference on latents and score it against the truth."""
    predicted = kmeans_infer(latents, k, seed)
    true = as_int_vector(truth, "truth")
    if true.shape[0] != np.asarray(latents).shape[0]:
        raise LengthMismatchError("latents and truth must have matching lengths")
    return ClusteringReport(
        predicted=predicted,
        truth=true,
        ca=clustering_accuracy(predicted, true),
        nmi=nmi(predicted, true),
        k=k,
        seed=seed,
    )


def report_to_json(report: ClusteringReport) -> str:
    """Stable JSON summary; identical runs serialize byte-for-byte alike."""
    return json.dumps(
        {
            "ca": report.ca,
            "nmi": report.nmi,
            "k": report.k,
            "seed": report.seed,
            "n": report.n,
        },
        sort_keys=True,
    )
