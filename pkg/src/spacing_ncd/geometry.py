"""Placement of mutually equidistant anchor points by stress majorization.

Given c class prototypes in R^z, the goal is a configuration of c points
whose pairwise Euclidean distances all equal a common target delta, where
delta is the largest pairwise prototype distance scaled by alpha > 1.
The configuration is found by iterating a closed-form update that never
increases the stress objective

    sigma(X) = sum_{i<j} w_ij * (d_ij(X) - delta_ij)^2

with unit weights. Point configurations are plain (c, z) float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix
from .exceptions import (
    DegeneratePrototypesError,
    DimensionMismatchError,
    InvalidAlphaError,
    UnsupportedWeightsError,
)

DEFAULT_ALPHA = 1.5
DEFAULT_EPSILON = 1e-8
DEFAULT_MAX_ITERATIONS = 10_000


@dataclass(frozen=True)
class DissimilarityMatrix:
    """Target pairwise distances: alpha * p_dist off the diagonal, 0 on it.

    delta is the full (c, c) matrix; alpha and p_dist record how its common
    off-diagonal value was derived (p_dist is the largest pairwise distance
    of the source prototypes).
    """

    delta: np.ndarray
    alpha: float
    p_dist: float

    @property
    def n_points(self) -> int:
        return self.delta.shape[0]

    @property
    def target(self) -> float:
        """The common off-diagonal target distance."""
        return float(self.delta[0, 1])


@dataclass(frozen=True)
class SolverSettings:
    """Convergence controls for the equidistant-point solver.

    epsilon is relative to the target distance: iteration stops once the
    largest coordinate displacement falls below epsilon * target. An
    absolute threshold would stop too early for small targets and too late
    for large ones, breaking scale equivariance.
    """

    epsilon: float = DEFAULT_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ValueError(
                f"max_iterations must be >= 1, got {self.max_iterations}"
            )


@dataclass(frozen=True)
class SolverResult:
    """Solver output plus convergence diagnostics.

    converged is False when the iteration budget ran out while the latest
    coordinate displacement still exceeded the threshold; points then holds
    the last iterate rather than a converged configuration.
    """

    points: np.ndarray
    iterations: int
    final_stress: float
    converged: bool
    displacement: float


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """All pairwise Euclidean distances between rows, as a (c, c) matrix."""
    diffs = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diffs * diffs, axis=-1))


def unit_weights(n_points: int) -> np.ndarray:
    """The default weight matrix: ones off the diagonal, zeros on it."""
    w = np.ones((n_points, n_points))
    np.fill_diagonal(w, 0.0)
    return w


def build_dissimilarity(prototypes, alpha: float = DEFAULT_ALPHA) -> DissimilarityMatrix:
    """Derive target distances from prototypes: alpha times their largest
    pairwise distance, identical for every pair.

    Raises DegeneratePrototypesError when all prototypes coincide (no scale
    to work from) and InvalidAlphaError when alpha <= 1 (the anchors must
    sit strictly farther apart than the prototypes do).
    """
    protos = as_float_matrix(prototypes, "prototypes")
    c = protos.shape[0]
    if c < 2:
        raise DimensionMismatchError(f"need at least 2 prototypes, got {c}")
    if not alpha > 1.0:
        raise InvalidAlphaError(f"alpha must be > 1, got {alpha}")
    p_dist = float(pairwise_distances(protos).max())
    if p_dist == 0.0:
        raise DegeneratePrototypesError("all prototypes coincide")
    target = alpha * p_dist
    delta = np.full((c, c), target)
    np.fill_diagonal(delta, 0.0)
    return DissimilarityMatrix(delta=delta, alpha=float(alpha), p_dist=p_dist)


def _delta_array(delta, c: int) -> np.ndarray:
    """Accept a DissimilarityMatrix or a raw (c, c) target-distance array."""
    if isinstance(delta, DissimilarityMatrix):
        mat = delta.delta
    else:
        mat = as_float_matrix(delta, "delta")
        if not np.array_equal(mat, mat.T):
            raise DimensionMismatchError("delta must be symmetric")
        if np.any(np.diag(mat) != 0) or np.any(mat < 0):
            raise DimensionMismatchError("delta must be hollow and non-negative")
    if mat.shape != (c, c):
        raise DimensionMismatchError(
            f"delta has shape {mat.shape}, expected ({c}, {c})"
        )
    return mat


def _weight_array(weights, c: int) -> np.ndarray:
    if weights is None:
        return unit_weights(c)
    w = as_float_matrix(weights, "weights")
    if w.shape != (c, c):
        raise DimensionMismatchError(
            f"weights has shape {w.shape}, expected ({c}, {c})"
        )
    if np.any(w < 0):
        raise UnsupportedWeightsError("weights must be non-negative")
    return w


def stress(config, delta, weights=None) -> float:
    """Weighted sum of squared gaps between realized and target distances,
    over unordered pairs. Zero exactly when every pair hits its target.
    """
    points = as_float_matrix(config, "config")
    c = points.shape[0]
    delta_mat = _delta_array(delta, c)
    w = _weight_array(weights, c)
    dist = pairwise_distances(points)
    iu = np.triu_indices(c, k=1)
    gaps = dist[iu] - delta_mat[iu]
    return float(np.sum(w[iu] * gaps * gaps))


def b_matrix(support, delta) -> np.ndarray:
    """The ratio matrix driving the closed-form update: entry (i, j) is
    delta_ij / d_ij(support) for distinct points, 0 where the support
    points coincide, and the diagonal is the negated off-diagonal row sum,
    so every row sums to zero.
    """
    points = as_float_matrix(support, "support")
    c = points.shape[0]
    delta_mat = _delta_array(delta, c)
    dist = pairwise_distances(points)
    safe = np.where(dist > 0, dist, 1.0)
    b = np.where(dist > 0, delta_mat / safe, 0.0)
    np.fill_diagonal(b, 0.0)
    np.fill_diagonal(b, -b.sum(axis=1))
    return b


def majorization_step(support, delta, weights=None) -> np.ndarray:
    """One closed-form update of the support configuration: (1/c) * B * Y.

    This minimizes the quadratic surrogate that touches the stress at the
    support, so the result's stress never exceeds the support's. The result
    is origin-centered (B has zero row sums). Distances are preserved under
    point reflection, so a configuration already meeting every target maps
    to its own negation, again with stress zero.

    Only uniform off-diagonal weights are supported; the update has no
    closed form this simple otherwise.
    """
    points = as_float_matrix(support, "support")
    c = points.shape[0]
    delta_mat = _delta_array(delta, c)
    w = _weight_array(weights, c)
    off_diag = w[~np.eye(c, dtype=bool)]
    if off_diag.size and (off_diag.max() != off_diag.min() or off_diag.max() <= 0):
        raise UnsupportedWeightsError(
            "off-diagonal weights must all be equal and positive"
        )
    return b_matrix(points, delta_mat) @ points / c


def get_equidistant_points(
    prototypes,
    alpha: float = DEFAULT_ALPHA,
    settings: SolverSettings | None = None,
) -> SolverResult:
    """Place one anchor per prototype so that all anchors are pairwise
    equidistant at alpha times the largest prototype distance.

    Starts from a seeded random configuration with coordinates uniform in
    [-target, +target] and repeats the closed-form update until the largest
    coordinate displacement drops below epsilon * target or the iteration
    budget runs out. Each raw update maps a near-converged configuration to
    its point reflection (same distances, same stress), which would keep the
    displacement large forever; of the update and its negation, the solver
    keeps whichever lies closer to the previous iterate, which is a pure
    relabeling of the same geometry and turns converged configurations into
    fixed points.

    When z >= c - 1 the target geometry is realizable and the result's
    pairwise distances match the target to well under 0.1% relative. For
    z < c - 1 no such configuration exists; the solver then reports either
    converged=False or a converged local minimum with strictly positive
    stress, and the caller decides what to do with it.

    Deterministic: identical inputs and seed give bitwise-identical output.
    """
    if settings is None:
        settings = SolverSettings()
    dissim = build_dissimilarity(prototypes, alpha)
    protos = as_float_matrix(prototypes, "prototypes")
    c, z = protos.shape
    target = dissim.target
    rng = np.random.default_rng(settings.seed)
    current = target * rng.uniform(-1.0, 1.0, size=(c, z))
    threshold = settings.epsilon * target
    converged = False
    displacement = np.inf
    iterations = 0
    for iterations in range(1, settings.max_iterations + 1):
        candidate = majorization_step(current, dissim)
        flipped = -candidate
        if np.max(np.abs(flipped - current)) < np.max(np.abs(candidate - current)):
            candidate = flipped
        displacement = float(np.max(np.abs(candidate - current)))
        current = candidate
        if displacement <= threshold:
            converged = True
            break
    return SolverResult(
        points=current,
        iterations=iterations,
        final_stress=stress(current, dissim),
        converged=converged,
        displacement=displacement,
    )
