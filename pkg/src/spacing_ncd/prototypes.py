"""Class prototypes: initialization, nearest assignment, and transport.

Prototypes are per-class centroids in latent space. During training each
batch pulls its assigned prototype toward the sum of the instance latent
and that class's equidistant anchor, with a per-class step size that decays
as 1 / (instances seen so far), so early instances move the prototype a lot
and later ones refine it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kmeans import kmeans
from ._validation import as_float_matrix, as_int_vector, check_labels_in_range
from .exceptions import ConfigError, DimensionMismatchError, TooFewSamplesError

TRANSPORT_MODES = ("verbatim", "convex")
DEFAULT_CONVEX_LAMBDA = 0.5


@dataclass(frozen=True)
class PrototypeState:
    """Prototypes, their anchors, and per-class instance counts.

    frequency[j] counts how many instances have ever been assigned to class
    j by update_prototypes; it only grows, so per-class step sizes only
    shrink. States are immutable; updates return a new state.
    """

    prototypes: np.ndarray
    anchors: np.ndarray
    frequency: np.ndarray

    def __post_init__(self):
        protos = as_float_matrix(self.prototypes, "prototypes")
        anchors = as_float_matrix(self.anchors, "anchors")
        freq = as_int_vector(self.frequency, "frequency")
        if protos.shape != anchors.shape:
            raise DimensionMismatchError(
                f"prototypes {protos.shape} and anchors {anchors.shape} differ"
            )
        if freq.shape[0] != protos.shape[0]:
            raise DimensionMismatchError(
                f"frequency has {freq.shape[0]} entries for {protos.shape[0]} classes"
            )
        if np.any(freq < 0):
            raise ConfigError("frequency counts must be non-negative")
        object.__setattr__(self, "prototypes", protos)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "frequency", freq)

    @property
    def n_classes(self) -> int:
        return self.prototypes.shape[0]


def fresh_state(prototypes, anchors) -> PrototypeState:
    """A state with zero instance counts for every class."""
    protos = as_float_matrix(prototypes, "prototypes")
    return PrototypeState(
        prototypes=protos,
        anchors=anchors,
        frequency=np.zeros(protos.shape[0], dtype=np.int64),
    )


def init_prototypes(latents, c: int, seed_or_rng) -> np.ndarray:
    """Initial prototypes: centroids of a seeded k-means over the latents."""
    pts = as_float_matrix(latents, "latents")
    if c < 2:
        raise ConfigError(f"need at least 2 classes, got {c}")
    if pts.shape[0] < c:
        raise TooFewSamplesError(
            f"{pts.shape[0]} latents cannot seed {c} prototypes"
        )
    return kmeans(pts, c, seed_or_rng).centers


def assign_nearest(latents, prototypes) -> np.ndarray:
    """Index of the closest prototype for each latent row; ties go to the
    lowest index.
    """
    pts = as_float_matrix(latents, "latents")
    protos = as_float_matrix(prototypes, "prototypes")
    if pts.shape[1] != protos.shape[1]:
        raise DimensionMismatchError(
            f"latents have {pts.shape[1]} columns, prototypes {protos.shape[1]}"
        )
    diffs = pts[:, None, :] - protos[None, :, :]
    sq = np.sum(diffs * diffs, axis=-1)
    return np.argmin(sq, axis=1).astype(np.int64)


def update_prototypes(
    state: PrototypeState,
    latents,
    assignment,
    transport_mode: str = "verbatim",
    convex_lambda: float = DEFAULT_CONVEX_LAMBDA,
) -> PrototypeState:
    """Transport prototypes toward their anchors, one instance at a time.

    For each latent z with assigned class j, the class count v[j] grows by
    one and the prototype moves by step size eta = 1 / v[j]:

        verbatim:  p_j <- (1 - eta) * p_j + eta * (z + anchor_j)
        convex:    p_j <- (1 - eta) * p_j + eta * (lam * z + (1 - lam) * anchor_j)

    The verbatim rule targets the vector sum of latent and anchor; the
    convex rule targets a point between them. Instances are applied in row
    order, so the result is reproducible and depends on that order.
    """
    pts = as_float_matrix(latents, "latents")
    idx = as_int_vector(assignment, "assignment")
    if pts.shape[0] != idx.shape[0]:
        raise DimensionMismatchError(
            f"{pts.shape[0]} latents but {idx.shape[0]} assignments"
        )
    if pts.shape[1] != state.prototypes.shape[1]:
        raise DimensionMismatchError(
            f"latents have {pts.shape[1]} columns, prototypes "
            f"{state.prototypes.shape[1]}"
        )
    check_labels_in_range(idx, state.n_classes, "assignment")
    if transport_mode not in TRANSPORT_MODES:
        raise ConfigError(
            f"transport_mode must be one of {TRANSPORT_MODES}, got {transport_mode!r}"
        )
    if not 0.0 <= convex_lambda <= 1.0:
        raise ConfigError(f"convex_lambda must lie in [0, 1], got {convex_lambda}")
    protos = state.prototypes.copy()
    freq = state.frequency.copy()
    anchors = state.anchors
    for i in range(pts.shape[0]):
        j = idx[i]
        freq[j] += 1
        eta = 1.0 / freq[j]
        if transport_mode == "verbatim":
            target = pts[i] + anchors[j]
        else:
            target = convex_lambda * pts[i] + (1.0 - convex_lambda) * anchors[j]
        protos[j] = (1.0 - eta) * protos[j] + eta * target
    return PrototypeState(prototypes=protos, anchors=anchors, frequency=freq)
