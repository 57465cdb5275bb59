"""Deterministic Lloyd's k-means with seeded k-means++ initialization.

Kept internal: callers go through init_prototypes or the inference helpers.
A single seeded run replaces the usual multi-restart scheme so results are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_float_matrix, check_rng
from .exceptions import TooFewSamplesError

MAX_ITERATIONS = 300
RELATIVE_TOLERANCE = 1e-6


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    iterations: int
    inertia_history: tuple[float, ...] | None = None


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, k), clipped at 0 against rounding."""
    sq = (
        np.sum(points * points, axis=1)[:, None]
        + np.sum(centers * centers, axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(sq, 0.0)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each new center is drawn with probability
    proportional to its squared distance from the nearest chosen center.
    """
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    closest = _squared_distances(points, points[chosen[:1]])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            chosen[j] = rng.choice(n, p=closest / total)
        else:
            chosen[j] = rng.integers(n)
        newest = _squared_distances(points, points[chosen[j : j + 1]])[:, 0]
        closest = np.minimum(closest, newest)
    return points[chosen].copy()


def kmeans(
    points,
    k: int,
    seed_or_rng,
    max_iterations: int = MAX_ITERATIONS,
    tol: float = RELATIVE_TOLERANCE,
    track_inertia: bool = False,
) -> KMeansResult:
    """Cluster rows of `points` into k groups.

    Stops when the relative inertia improvement drops below `tol` or after
    `max_iterations` Lloyd iterations. Empty clusters are re-seeded with the
    points currently worst represented (farthest from their center).
    """
    pts = as_float_matrix(points, "points")
    n = pts.shape[0]
    if n < k:
        raise TooFewSamplesError(f"{n} samples cannot form {k} clusters")
    rng = check_rng(seed_or_rng)
    centers = _plus_plus_init(pts, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    inertia = np.inf
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        sq = _squared_distances(pts, centers)
        labels = np.argmin(sq, axis=1)
        row_cost = sq[np.arange(n), labels]
        empty = [j for j in range(k) if not np.any(labels == j)]
        if empty:
            # Re-seed each empty cluster with a distinct worst-fitting point.
            worst = np.argsort(-row_cost)
            for taken, j in enumerate(empty):
                idx = worst[taken]
                centers[j] = pts[idx]
                labels[idx] = j
        for j in range(k):
            members = labels == j
            if np.any(members):
                centers[j] = pts[members].mean(axis=0)
        sq = _squared_distances(pts, centers)
        labels = np.argmin(sq, axis=1)
        new_inertia = float(sq[np.arange(n), labels].sum())
        if track_inertia:
            history.append(new_inertia)
        if np.isfinite(inertia) and inertia - new_inertia <= tol * max(inertia, 1e-300):
            inertia = new_inertia
            break
        inertia = new_inertia
    return KMeansResult(
        centers=centers,
        labels=labels,
        inertia=inertia,
        iterations=iterations,
        inertia_history=tuple(history) if track_inertia else None,
    )
