"""Training losses, each returning its value and an exact input gradient.

Every loss is a mean, so values are comparable across batch sizes. The
gradient in a LossValue is taken with respect to one specific input,
documented per loss; anything else in the signature is treated as a
constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import (
    as_float_matrix,
    as_int_vector,
    check_labels_in_range,
    check_same_length,
)
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    NonFiniteLossError,
    ZeroLatentError,
)

DEFAULT_COSINE_THRESHOLD = 0.9
PROBABILITY_CLAMP = 1e-7


@dataclass(frozen=True)
class LossValue:
    """A scalar loss plus the gradient at its differentiated input."""

    value: float
    input_gradient: np.ndarray


def _finished(value: float, gradient: np.ndarray, name: str) -> LossValue:
    if not np.isfinite(value) or not np.all(np.isfinite(gradient)):
        raise NonFiniteLossError(f"{name} produced a non-finite value or gradient")
    return LossValue(value=float(value), input_gradient=gradient)


def spacing_mse(latents, assignment, prototypes) -> LossValue:
    """Mean squared distance from each latent to its assigned prototype.

    Gradient is with respect to the latents; prototypes are constants here
    (they move through their own transport rule, not through this loss).
    """
    z = as_float_matrix(latents, "latents")
    protos = as_float_matrix(prototypes, "prototypes")
    idx = as_int_vector(assignment, "assignment")
    check_same_length(z, idx, "latents", "assignment")
    if z.shape[1] != protos.shape[1]:
        raise DimensionMismatchError(
            f"latents have {z.shape[1]} columns, prototypes {protos.shape[1]}"
        )
    check_labels_in_range(idx, protos.shape[0], "assignment")
    n = z.shape[0]
    if n == 0:
        raise DimensionMismatchError("latents must contain at least one row")
    residual = z - protos[idx]
    value = float(np.sum(residual * residual) / n)
    return _finished(value, (2.0 / n) * residual, "spacing_mse")


def cross_entropy(probabilities, labels) -> LossValue:
    """Mean negative log-probability of the true class.

    The gradient is with respect to the pre-softmax logits, which for a
    softmax head is (probabilities - onehot) / n; feeding probabilities
    through a log at near-zero is avoided by clamping inside the log only.
    """
    p = as_float_matrix(probabilities, "probabilities")
    y = as_int_vector(labels, "labels")
    check_same_length(p, y, "probabilities", "labels")
    n, m = p.shape
    if n == 0:
        raise DimensionMismatchError("probabilities must contain at least one row")
    check_labels_in_range(y, m, "labels")
    picked = np.clip(p[np.arange(n), y], PROBABILITY_CLAMP, 1.0)
    value = float(-np.mean(np.log(picked)))
    onehot = np.zeros((n, m))
    onehot[np.arange(n), y] = 1.0
    return _finished(value, (p - onehot) / n, "cross_entropy")


def pairwise_pseudo(
    latents, head_probs, threshold: float = DEFAULT_COSINE_THRESHOLD
) -> LossValue:
    """Binary cross-entropy between pairwise pseudo-labels and pair scores.

    For every unordered sample pair, the pseudo-label says "same class" when
    the latents' cosine similarity reaches the threshold, and the pair score
    is the inner product of the two head probability rows. Pseudo-labels are
    constants: no gradient flows through the thresholding or the latents.
    The gradient is with respect to head_probs, and is zero wherever the
    pair score sat outside the clamp range [1e-7, 1 - 1e-7].
    """
    z = as_float_matrix(latents, "latents")
    p = as_float_matrix(head_probs, "head_probs")
    check_same_length(z, p, "latents", "head_probs")
    n = z.shape[0]
    if n < 2:
        raise DimensionMismatchError("need at least 2 samples to form pairs")
    if not -1.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (-1, 1), got {threshold}")
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise ZeroLatentError("latent rows must have non-zero norm")
    unit = z / norms[:, None]
    cosine = np.clip(unit @ unit.T, -1.0, 1.0)
    same = (cosine >= threshold).astype(np.float64)
    raw = p @ p.T
    score = np.clip(raw, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
    inside = (raw >= PROBABILITY_CLAMP) & (raw <= 1.0 - PROBABILITY_CLAMP)
    iu = np.triu_indices(n, k=1)
    n_pairs = iu[0].size
    bce = -(same * np.log(score) + (1.0 - same) * np.log(1.0 - score))
    value = float(bce[iu].mean())
    # d(bce)/d(score), masked where the clamp cut the dependence on raw.
    d_score = np.where(inside, (-same / score + (1.0 - same) / (1.0 - score)), 0.0)
    d_score /= n_pairs
    np.fill_diagonal(d_score, 0.0)
    grad = d_score @ p
    return _finished(value, grad, "pairwise_pseudo")


def consistency(probs, probs_augmented) -> LossValue:
    """Mean squared row difference between two prediction matrices.

    The gradient is with respect to the first argument; the gradient with
    respect to the second is exactly its negation.
    """
    a = as_float_matrix(probs, "probs")
    b = as_float_matrix(probs_augmented, "probs_augmented")
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"probs {a.shape} and probs_augmented {b.shape} differ"
        )
    n = a.shape[0]
    if n == 0:
        raise DimensionMismatchError("probs must contain at least one row")
    residual = a - b
    value = float(np.sum(residual * residual) / n)
    return _finished(value, (2.0 / n) * residual, "consistency")
