"""Datasets: synthetic mixtures, CSV I/O, class splits, and augmentation.

A dataset is a feature matrix with one integer label per row, where -1
marks a row as unlabeled. Ground-truth classes of unlabeled rows never
live in the dataset; they go to a separate evaluation sidecar keyed by row
id, so training code cannot reach them even by accident.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_float_matrix, as_int_vector, check_rng
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    InvalidLabelError,
    MissingSidecarError,
    ParseError,
    SchemaError,
    SeparationInfeasibleError,
)

UNLABELED = -1
MEAN_SAMPLING_ATTEMPTS = 1000


@dataclass(frozen=True)
class Dataset:
    """Features with per-row labels; label -1 means unlabeled."""

    features: np.ndarray
    labels: np.ndarray
    ids: np.ndarray | None = None
    class_names: dict[int, str] | None = None

    def __post_init__(self):
        features = as_float_matrix(self.features, "features")
        labels = as_int_vector(self.labels, "labels")
        if labels.shape[0] != features.shape[0]:
            raise DimensionMismatchError(
                f"{features.shape[0]} rows but {labels.shape[0]} labels"
            )
        if labels.size and labels.min() < UNLABELED:
            raise InvalidLabelError("labels must be >= -1")
        ids = self.ids
        if ids is None:
            ids = np.arange(features.shape[0], dtype=np.int64)
        else:
            ids = as_int_vector(ids, "ids")
            if ids.shape[0] != features.shape[0]:
                raise DimensionMismatchError(
                    f"{features.shape[0]} rows but {ids.shape[0]} ids"
                )
            if np.unique(ids).shape[0] != ids.shape[0]:
                raise InvalidLabelError("ids must be unique")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class LabeledView:
    """The labeled partition of a dataset, in original row order."""

    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class UnlabeledView:
    """The unlabeled partition. Deliberately label-free: code holding this
    view has no path to ground truth.
    """

    ids: np.ndarray
    features: np.ndarray


@dataclass(frozen=True)
class EvaluationSidecar:
    """Ground truth for unlabeled rows, keyed by row id. Evaluation only."""

    ids: np.ndarray
    true_labels: np.ndarray

    def labels_for(self, ids) -> np.ndarray:
        """True labels for the requested ids, in the requested order."""
        wanted = as_int_vector(ids, "ids")
        lookup = {int(i): int(t) for i, t in zip(self.ids, self.true_labels)}
        try:
            return np.array([lookup[int(i)] for i in wanted], dtype=np.int64)
        except KeyError as exc:
            raise MissingSidecarError(f"no ground truth for id {exc}") from exc


@dataclass(frozen=True)
class SplitSpec:
    """Recipe for a synthetic mixture: how many classes, how many of them
    keep labels, and the geometry of each class cloud.
    """

    total_classes: int
    labeled_classes: int
    samples_per_class: int = 500
    dimensionality: int = 32
    cluster_std: float = 1.0
    mean_separation: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.total_classes < 1:
            raise ConfigError("total_classes must be >= 1")
        if not 0 <= self.labeled_classes <= self.total_classes:
            raise ConfigError(
                "labeled_classes must lie in [0, total_classes]"
            )
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be >= 1")
        if self.dimensionality < 1:
            raise ConfigError("dimensionality must be >= 1")
        if self.cluster_std < 0:
            raise ConfigError("cluster_std must be >= 0")
        if not self.mean_separation > 0:
            raise ConfigError("mean_separation must be > 0")


def _sample_means(spec: SplitSpec, rng: np.random.Generator) -> np.ndarray:
    """Class means with every pairwise distance >= mean_separation,
    rejection-sampled from an isotropic Gaussian wide enough that
    rejections are rare.
    """
    means: list[np.ndarray] = []
    for _ in range(spec.total_classes):
        for attempt in range(MEAN_SAMPLING_ATTEMPTS):
            candidate = rng.normal(
                0.0, spec.mean_separation, size=spec.dimensionality
            )
            if all(
                np.linalg.norm(candidate - m) >= spec.mean_separation
                for m in means
            ):
                means.append(candidate)
                break
        else:
            raise SeparationInfeasibleError(
                f"could not place class mean {len(means)} at separation "
                f"{spec.mean_separation} in {MEAN_SAMPLING_ATTEMPTS} attempts"
            )
    return np.stack(means)


def generate_mixture(spec: SplitSpec) -> tuple[Dataset, EvaluationSidecar]:
    """A Gaussian mixture with the first labeled_classes classes labeled.

    Rows come out class by class. The dataset carries -1 for every row of
    an unlabeled class; those rows' true ids go only to the returned
    sidecar.
    """
    rng = np.random.default_rng(spec.seed)
    means = _sample_means(spec, rng)
    blocks = [
        rng.normal(means[cls], spec.cluster_std, size=(spec.samples_per_class, spec.dimensionality))
        for cls in range(spec.total_classes)
    ]
    features = np.vstack(blocks)
    true_labels = np.repeat(np.arange(spec.total_classes), spec.samples_per_class)
    labels = np.where(true_labels < spec.labeled_classes, true_labels, UNLABELED)
    ids = np.arange(features.shape[0], dtype=np.int64)
    unlabeled_mask = labels == UNLABELED
    sidecar = EvaluationSidecar(
        ids=ids[unlabeled_mask],
        true_labels=true_labels[unlabeled_mask].astype(np.int64),
    )
    return Dataset(features=features, labels=labels.astype(np.int64), ids=ids), sidecar


def split(dataset: Dataset) -> tuple[LabeledView, UnlabeledView]:
    """Partition rows into labeled and unlabeled views, keeping order."""
    labeled_mask = dataset.labels != UNLABELED
    return (
        LabeledView(
            ids=dataset.ids[labeled_mask],
            features=dataset.features[labeled_mask],
            labels=dataset.labels[labeled_mask],
        ),
        UnlabeledView(
            ids=dataset.ids[~labeled_mask],
            features=dataset.features[~labeled_mask],
        ),
    )


def augment(features, sigma: float, seed_or_rng) -> np.ndarray:
    """Features plus seeded isotropic Gaussian noise of scale sigma."""
    if sigma < 0:
        raise ConfigError(f"sigma must be >= 0, got {sigma}")
    arr = np.asarray(features, dtype=np.float64)
    rng = check_rng(seed_or_rng)
    if sigma == 0:
        return arr.copy()
    return arr + rng.normal(0.0, sigma, size=arr.shape)


def _feature_header(d: int) -> list[str]:
    return [f"f{i}" for i in range(d)]


def save_csv(path, dataset: Dataset) -> None:
    """Write `id,label,f0,...`; floats keep full round-trip precision."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "label"] + _feature_header(dataset.n_features))
        for i in range(dataset.n_samples):
            writer.writerow(
                [int(dataset.ids[i]), int(dataset.labels[i])]
                + [repr(float(v)) for v in dataset.features[i]]
            )


def load_csv(path) -> Dataset:
    """Read a feature file written by save_csv (or by hand to its schema)."""
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty, expected a header row") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise SchemaError(
                f"{path} header must start with id,label,f0,..., got {header[:3]}"
            )
        d = len(header) - 2
        if header[2:] != _feature_header(d):
            raise SchemaError(
                f"{path} feature columns must be f0..f{d - 1} in order"
            )
        ids, labels, rows = [], [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ParseError(
                    f"expected {d + 2} columns, got {len(row)}", line=line_no
                )
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
                rows.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from exc
    return Dataset(
        features=np.array(rows, dtype=np.float64).reshape(len(rows), d),
        labels=np.array(labels, dtype=np.int64),
        ids=np.array(ids, dtype=np.int64),
    )


def save_sidecar(path, sidecar: EvaluationSidecar) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "true_label"])
        for i, t in zip(sidecar.ids, sidecar.true_labels):
            writer.writerow([int(i), int(t)])


def load_sidecar(path) -> EvaluationSidecar:
    path = Path(path)
    if not path.exists():
        raise MissingSidecarError(f"evaluation sidecar {path} does not exist")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty, expected a header row") from None
        if header != ["id", "true_label"]:
            raise SchemaError(f"{path} header must be id,true_label, got {header}")
        ids, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 columns, got {len(row)}", line=line_no)
            try:
                ids.append(int(row[0]))
                labels.append(int(row[1]))
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from exc
    return EvaluationSidecar(
        ids=np.array(ids, dtype=np.int64),
        true_labels=np.array(labels, dtype=np.int64),
    )


def save_points_csv(path, points) -> None:
    """Write a bare point configuration (prototypes, anchors) as
    `id,f0,...` rows.
    """
    pts = as_float_matrix(points, "points")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id"] + _feature_header(pts.shape[1]))
        for i, row in enumerate(pts):
            writer.writerow([i] + [repr(float(v)) for v in row])


def load_points_csv(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty, expected a header row") from None
        if len(header) < 2 or header[0] != "id":
            raise SchemaError(f"{path} header must be id,f0,..., got {header[:2]}")
        d = len(header) - 1
        if header[1:] != _feature_header(d):
            if header[1] == "label":
                raise SchemaError(
                    f"{path} has a label column; expected a bare point file "
                    "with columns id,f0,... (dataset files belong to train/eval)"
                )
            raise SchemaError(f"{path} feature columns must be f0..f{d - 1} in order")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ParseError(
                    f"expected {d + 1} columns, got {len(row)}", line=line_no
                )
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(str(exc), line=line_no) from exc
    return np.array(rows, dtype=np.float64).reshape(len(rows), d)
