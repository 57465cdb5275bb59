"""scikit-learn adapters over the solver and the training loops.

EquidistantAnchors wraps the anchor solver as a fittable estimator;
SpacingDiscoverer wraps end-to-end training as a semi-supervised
clusterer where y uses -1 to mark unlabeled rows. Both follow estimator
conventions: constructors only store parameters, fitted state lives in
trailing-underscore attributes, and get_params/set_params/clone work.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._kmeans import kmeans
from ._validation import as_float_matrix, as_int_vector, check_same_length
from .exceptions import DimensionMismatchError, InvalidLabelError
from .geometry import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERATIONS,
    SolverSettings,
    build_dissimilarity,
    get_equidistant_points,
)
from .model import embed
from .prototypes import assign_nearest
from .training import TrainingConfig, train_single_stage, train_two_stage
from .data import LabeledView, UnlabeledView


def _check_width(X: np.ndarray, expected: int, name: str) -> None:
    if X.shape[1] != expected:
        raise DimensionMismatchError(
            f"{name} has {X.shape[1]} columns, the estimator was fitted with {expected}"
        )


class EquidistantAnchors(BaseEstimator):
    """Fit a set of mutually equidistant anchor points from a reference
    configuration, one anchor per reference row.

    The common anchor distance is alpha times the largest pairwise
    distance of the reference rows. After fitting, transform reports each
    sample's distance to every anchor and predict returns the index of
    the nearest one.
    """

    def __init__(
        self,
        alpha: float = DEFAULT_ALPHA,
        epsilon: float = DEFAULT_EPSILON,
        max_iterations: int = DEFAULT_MAX_ITERATIONS,
        random_state: int = 0,
    ):
        self.alpha = alpha
        self.epsilon = epsilon
        self.max_iterations = max_iterations
        self.random_state = random_state

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        dissim = build_dissimilarity(X, alpha=self.alpha)
        result = get_equidistant_points(
            X,
            alpha=self.alpha,
            settings=SolverSettings(
                epsilon=self.epsilon,
                max_iterations=self.max_iterations,
                seed=self.random_state,
            ),
        )
        self.anchors_ = result.points
        self.n_iter_ = result.iterations
        self.stress_ = result.final_stress
        self.converged_ = result.converged
        self.target_distance_ = dissim.target
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        """Distance from each row of X to each fitted anchor, (n, c)."""
        check_is_fitted(self, "anchors_")
        X = as_float_matrix(X, "X")
        _check_width(X, self.n_features_in_, "X")
        diffs = X[:, None, :] - self.anchors_[None, :, :]
        return np.sqrt(np.sum(diffs * diffs, axis=-1))

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).transform(X)

    def predict(self, X) -> np.ndarray:
        """Index of the nearest anchor for each row of X."""
        check_is_fitted(self, "anchors_")
        X = as_float_matrix(X, "X")
        _check_width(X, self.n_features_in_, "X")
        return assign_nearest(X, self.anchors_)


class SpacingDiscoverer(ClusterMixin, BaseEstimator):
    """Semi-supervised class discovery as a clusterer.

    fit(X, y) takes every row in X and a label vector y where known
    classes keep their ids and -1 marks the rows whose classes are to be
    discovered (y=None treats all rows as unlabeled, which only the
    single-stage regime accepts). Training follows the configured regime,
    then k-means over the fitted latents of the unlabeled rows produces
    novel_classes cluster centers. labels_ assigns every row of X to its
    nearest center; predict does the same for new data and transform
    exposes the latent embedding itself.
    """

    def __init__(
        self,
        novel_classes: int = 2,
        epochs: int = 30,
        phase1_epochs: int | None = None,
        batch_size: int = 64,
        learning_rate: float = 1e-2,
        alpha: float = DEFAULT_ALPHA,
        epsilon: float = DEFAULT_EPSILON,
        max_solver_iterations: int = DEFAULT_MAX_ITERATIONS,
        latent_dim: int = 16,
        hidden_dims: tuple[int, ...] = (64, 64),
        spacing_weight: float = 1.0,
        cross_entropy_weight: float = 1.0,
        pairwise_weight: float = 1.0,
        consistency_weight: float = 1.0,
        regime: str = "two_stage",
        prototype_class_count_policy: str = "novel_only",
        transport_mode: str = "verbatim",
        convex_lambda: float = 0.5,
        rho: float = 0.9,
        augment_noise_sigma: float | None = None,
        consistency_on: str = "unlabeled",
        recompute_anchors_each_epoch: bool = False,
        random_state: int = 0,
    ):
        self.novel_classes = novel_classes
        self.epochs = epochs
        self.phase1_epochs = phase1_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.epsilon = epsilon
        self.max_solver_iterations = max_solver_iterations
        self.latent_dim = latent_dim
        self.hidden_dims = hidden_dims
        self.spacing_weight = spacing_weight
        self.cross_entropy_weight = cross_entropy_weight
        self.pairwise_weight = pairwise_weight
        self.consistency_weight = consistency_weight
        self.regime = regime
        self.prototype_class_count_policy = prototype_class_count_policy
        self.transport_mode = transport_mode
        self.convex_lambda = convex_lambda
        self.rho = rho
        self.augment_noise_sigma = augment_noise_sigma
        self.consistency_on = consistency_on
        self.recompute_anchors_each_epoch = recompute_anchors_each_epoch
        self.random_state = random_state

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            novel_classes=self.novel_classes,
            epochs=self.epochs,
            phase1_epochs=self.phase1_epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            alpha=self.alpha,
            epsilon=self.epsilon,
            max_solver_iterations=self.max_solver_iterations,
            seed=self.random_state,
            latent_dim=self.latent_dim,
            hidden_dims=tuple(self.hidden_dims),
            spacing_weight=self.spacing_weight,
            cross_entropy_weight=self.cross_entropy_weight,
            pairwise_weight=self.pairwise_weight,
            consistency_weight=self.consistency_weight,
            regime=self.regime,
            prototype_class_count_policy=self.prototype_class_count_policy,
            transport_mode=self.transport_mode,
            convex_lambda=self.convex_lambda,
            rho=self.rho,
            augment_noise_sigma=self.augment_noise_sigma,
            consistency_on=self.consistency_on,
            recompute_anchors_each_epoch=self.recompute_anchors_each_epoch,
        )

    def fit(self, X, y=None):
        X = as_float_matrix(X, "X")
        if y is None:
            labels = np.full(X.shape[0], -1, dtype=np.int64)
        else:
            labels = as_int_vector(y, "y")
            check_same_length(X, labels, "X", "y")
        if labels.size and labels.min() < -1:
            raise InvalidLabelError("labels must be >= -1 (-1 marks unlabeled rows)")
        config = self._config()
        mask = labels == -1
        labeled = LabeledView(
            ids=np.flatnonzero(~mask), features=X[~mask], labels=labels[~mask]
        )
        unlabeled = UnlabeledView(ids=np.flatnonzero(mask), features=X[mask])
        train = train_two_stage if config.regime == "two_stage" else train_single_stage
        self.bundle_, self.trace_ = train(labeled, unlabeled, config)
        fitted_latents = embed(self.bundle_.extractor, unlabeled.features)
        result = kmeans(fitted_latents, self.novel_classes, self.random_state)
        self.cluster_centers_ = result.centers
        self.labels_ = assign_nearest(
            embed(self.bundle_.extractor, X), self.cluster_centers_
        )
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = len(self.trace_.records)
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).labels_

    def predict(self, X) -> np.ndarray:
        """Nearest discovered cluster for each row of X."""
        check_is_fitted(self, "cluster_centers_")
        X = as_float_matrix(X, "X")
        _check_width(X, self.n_features_in_, "X")
        return assign_nearest(
            embed(self.bundle_.extractor, X), self.cluster_centers_
        )

    def transform(self, X) -> np.ndarray:
        """The fitted latent embedding of X, (n, latent_dim)."""
        check_is_fitted(self, "cluster_centers_")
        X = as_float_matrix(X, "X")
        _check_width(X, self.n_features_in_, "X")
        return embed(self.bundle_.extractor, X)
