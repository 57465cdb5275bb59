"""Training loops: spacing-driven discovery and the two split regimes.

The core loop pulls latents toward per-class prototypes while the
prototypes themselves ride toward mutually equidistant anchors, so classes
end up both tight and far apart. Two-stage training first fits a labeled
head with cross-entropy, checkpoints, then discovers structure in the
unlabeled pool; single-stage training interleaves labeled and unlabeled
batches over one shared backbone.

Determinism: every source of randomness (parameter init, k-means seeding,
anchor solver, batch order, augmentation noise) draws from its own child
stream of the config seed, spawned in a fixed order. Identical inputs give
bitwise-identical parameters and traces, and inert branches (zero loss
weights, empty pools) leave active streams untouched.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .data import augment
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    NonFiniteLossError,
    TooFewSamplesError,
)
from .geometry import SolverSettings, get_equidistant_points
from .losses import consistency, cross_entropy, pairwise_pseudo, spacing_mse
from .model import (
    ClassifierHead,
    FeatureExtractor,
    GradientSet,
    HeadGradients,
    ModelBundle,
    backward,
    embed,
    forward,
    head_backward,
    head_forward,
    head_sgd_step,
    init_extractor,
    init_head,
    save_checkpoint,
    sgd_step,
)
from .prototypes import (
    PrototypeState,
    assign_nearest,
    fresh_state,
    init_prototypes,
    update_prototypes,
)

REGIMES = ("two_stage", "single_stage")
CLASS_COUNT_POLICIES = ("novel_only", "all_classes")
CONSISTENCY_TARGETS = ("unlabeled", "both")


@dataclass(frozen=True)
class TrainingConfig:
    """Every knob of a training run; validated on construction."""

    novel_classes: int
    epochs: int = 30
    phase1_epochs: int | None = None
    batch_size: int = 64
    learning_rate: float = 1e-2
    alpha: float = 1.5
    epsilon: float = 1e-8
    max_solver_iterations: int = 10_000
    seed: int = 0
    latent_dim: int = 16
    hidden_dims: tuple[int, ...] = (64, 64)
    spacing_weight: float = 1.0
    cross_entropy_weight: float = 1.0
    pairwise_weight: float = 1.0
    consistency_weight: float = 1.0
    regime: str = "two_stage"
    prototype_class_count_policy: str = "novel_only"
    transport_mode: str = "verbatim"
    convex_lambda: float = 0.5
    rho: float = 0.9
    augment_noise_sigma: float | None = None
    consistency_on: str = "unlabeled"
    recompute_anchors_each_epoch: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        if self.novel_classes < 2:
            raise ConfigError("novel_classes must be >= 2")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.phase1_epochs is not None and self.phase1_epochs < 1:
            raise ConfigError("phase1_epochs must be >= 1 when given")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not self.alpha > 1:
            raise ConfigError("alpha must be > 1")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")
        if self.max_solver_iterations < 1:
            raise ConfigError("max_solver_iterations must be >= 1")
        if self.latent_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("latent_dim and hidden widths must be >= 1")
        for name in (
            "spacing_weight",
            "cross_entropy_weight",
            "pairwise_weight",
            "consistency_weight",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}")
        if self.prototype_class_count_policy not in CLASS_COUNT_POLICIES:
            raise ConfigError(
                f"prototype_class_count_policy must be one of {CLASS_COUNT_POLICIES}"
            )
        if self.consistency_on not in CONSISTENCY_TARGETS:
            raise ConfigError(f"consistency_on must be one of {CONSISTENCY_TARGETS}")
        if not -1.0 < self.rho < 1.0:
            raise ConfigError("rho must lie in (-1, 1)")
        if self.augment_noise_sigma is not None and self.augment_noise_sigma < 0:
            raise ConfigError("augment_noise_sigma must be >= 0")
        if not 0.0 <= self.convex_lambda <= 1.0:
            raise ConfigError("convex_lambda must lie in [0, 1]")

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["hidden_dims"] = list(self.hidden_dims)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainingConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)


@dataclass(frozen=True)
class EpochRecord:
    """Loss means plus prototype and assignment movement for one epoch."""

    phase: str
    epoch: int
    spacing_loss: float
    cross_entropy_loss: float
    pairwise_loss: float
    consistency_loss: float
    prototype_displacement: tuple[float, ...]
    assignment_changes: tuple[int, ...]

    def __post_init__(self):
        values = [
            self.spacing_loss,
            self.cross_entropy_loss,
            self.pairwise_loss,
            self.consistency_loss,
            *self.prototype_displacement,
        ]
        if not all(np.isfinite(v) for v in values):
            raise NonFiniteLossError(
                f"non-finite value in epoch record {self.phase}/{self.epoch}"
            )


@dataclass(frozen=True)
class TrainingTrace:
    records: tuple[EpochRecord, ...]


def trace_to_jsonl(trace: TrainingTrace) -> str:
    """One JSON object per epoch record, newline separated."""
    return "\n".join(
        json.dumps(asdict(record), sort_keys=True) for record in trace.records
    )


def _streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent child generators, spawned in a fixed order so adding or
    skipping work in one stream never shifts another.
    """
    names = (
        "extractor_init",
        "labeled_head_init",
        "unlabeled_head_init",
        "prototype_init",
        "anchor_solver",
        "labeled_batches",
        "unlabeled_batches",
        "augment",
    )
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def _solver_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63))


def _batches(rng: np.random.Generator, n: int, batch_size: int) -> list[np.ndarray]:
    """Shuffled partition into chunks; indices ascend inside each chunk so
    the sequential prototype transport always sees dataset order.
    """
    order = rng.permutation(n)
    return [
        np.sort(order[start : start + batch_size])
        for start in range(0, n, batch_size)
    ]


def _add_gradients(a: GradientSet, b: GradientSet) -> GradientSet:
    return GradientSet(
        weights=tuple(x + y for x, y in zip(a.weights, b.weights)),
        biases=tuple(x + y for x, y in zip(a.biases, b.biases)),
    )


def _add_head_gradients(a: HeadGradients | None, b: HeadGradients) -> HeadGradients:
    if a is None:
        return b
    return HeadGradients(weight=a.weight + b.weight, bias=a.bias + b.bias)


def _mean(values: list[float]) -> float:
    return float(np.mean(values)) if values else 0.0


def _displacements(before: np.ndarray, after: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in np.linalg.norm(after - before, axis=1))


def _solve_anchors(prototypes: np.ndarray, config: TrainingConfig, rng) -> np.ndarray:
    result = get_equidistant_points(
        prototypes,
        alpha=config.alpha,
        settings=SolverSettings(
            epsilon=config.epsilon,
            max_iterations=config.max_solver_iterations,
            seed=_solver_seed(rng),
        ),
    )
    return result.points


def _default_sigma(features: np.ndarray) -> float:
    """Noise scale for augmented views: a tenth of the mean per-feature
    spread, so augmentation perturbs without relabeling.
    """
    if features.shape[0] < 2:
        return 0.0
    return 0.1 * float(np.mean(features.std(axis=0)))


class _EpochStats:
    """Accumulates per-batch values within one epoch."""

    def __init__(self):
        self.spacing: list[float] = []
        self.cross_entropy: list[float] = []
        self.pairwise: list[float] = []
        self.consistency: list[float] = []
        self.changes: list[int] = []

    def record(self, phase: str, epoch: int, displacement) -> EpochRecord:
        return EpochRecord(
            phase=phase,
            epoch=epoch,
            spacing_loss=_mean(self.spacing),
            cross_entropy_loss=_mean(self.cross_entropy),
            pairwise_loss=_mean(self.pairwise),
            consistency_loss=_mean(self.consistency),
            prototype_displacement=displacement,
            assignment_changes=tuple(self.changes),
        )


def _abort(phase: str, epoch: int, batch_idx: int, exc: Exception):
    """Diverged parameters show up either as a non-finite loss or as a
    non-finite array hitting a validator; both abort with the offending
    epoch and batch named. Genuine shape mismatches pass through.
    """
    if isinstance(exc, DimensionMismatchError) and "non-finite" not in str(exc):
        raise exc
    raise NonFiniteLossError(
        f"{phase} epoch {epoch}, batch {batch_idx}: {exc}"
    ) from exc


def learning_with_spacing(
    extractor: FeatureExtractor,
    data,
    config: TrainingConfig,
) -> tuple[FeatureExtractor, PrototypeState, TrainingTrace]:
    """The core discovery loop over a pool of unlabeled inputs.

    Once per run: k-means prototypes over the initial latents, then one
    anchor solve. Per batch: embed, assign nearest prototypes, update the
    extractor with the spacing loss, re-embed with the updated parameters,
    re-assign, and transport prototypes toward (latent + anchor) with the
    per-class shrinking step size.
    """
    feats = np.asarray(data, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise TooFewSamplesError("data must be a non-empty matrix")
    streams = _streams(config.seed)
    latents = embed(extractor, feats)
    protos = init_prototypes(latents, config.novel_classes, streams["prototype_init"])
    anchors = _solve_anchors(protos, config, streams["anchor_solver"])
    state = fresh_state(protos, anchors)
    records = []
    for epoch in range(1, config.epochs + 1):
        if config.recompute_anchors_each_epoch and epoch > 1:
            anchors = _solve_anchors(state.prototypes, config, streams["anchor_solver"])
            state = PrototypeState(state.prototypes, anchors, state.frequency)
        stats = _EpochStats()
        epoch_start = state.prototypes.copy()
        for batch_idx, batch in enumerate(
            _batches(streams["unlabeled_batches"], feats.shape[0], config.batch_size)
        ):
            x = feats[batch]
            try:
                z, cache = forward(extractor, x)
                before = assign_nearest(z, state.prototypes)
                loss = spacing_mse(z, before, state.prototypes)
                grads = backward(
                    extractor, cache, config.spacing_weight * loss.input_gradient
                )
                extractor = sgd_step(extractor, grads, config.learning_rate)
                z_new = embed(extractor, x)
                after = assign_nearest(z_new, state.prototypes)
                state = update_prototypes(
                    state,
                    z_new,
                    after,
                    transport_mode=config.transport_mode,
                    convex_lambda=config.convex_lambda,
                )
            except (NonFiniteLossError, DimensionMismatchError) as exc:
                _abort("discovery", epoch, batch_idx, exc)
            stats.spacing.append(loss.value)
            stats.changes.append(int(np.sum(before != after)))
        records.append(
            stats.record(
                "discovery", epoch, _displacements(epoch_start, state.prototypes)
            )
        )
    return extractor, state, TrainingTrace(records=tuple(records))


def _encode_labels(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map raw labeled-class ids to head indices 0..m-1 by sorted order."""
    classes = np.unique(labels)
    return classes, np.searchsorted(classes, labels)


def _supervised_batch(extractor, head, x, y, config):
    """One cross-entropy update of the extractor and labeled head."""
    z, cache = forward(extractor, x)
    probs, hcache = head_forward(head, z)
    loss = cross_entropy(probs, y)
    hgrads, d_latents = head_backward(
        head, hcache, d_logits=config.cross_entropy_weight * loss.input_gradient
    )
    egrads = backward(extractor, cache, d_latents)
    extractor = sgd_step(extractor, egrads, config.learning_rate)
    head = head_sgd_step(head, hgrads, config.learning_rate)
    return extractor, head, loss.value


def _discovery_batch(
    extractor,
    unlabeled_head,
    labeled_head,
    state,
    x,
    config,
    sigma,
    augment_rng,
    stats,
):
    """One joint update on an unlabeled batch: spacing pulls latents to
    prototypes, the pairwise loss shapes the unlabeled head, consistency
    ties each sample to its augmented view, then prototypes are
    transported using the freshly updated extractor.
    """
    z, cache = forward(extractor, x)
    before = assign_nearest(z, state.prototypes)
    upstream_z = np.zeros_like(z)
    unlabeled_hgrads: HeadGradients | None = None
    labeled_hgrads: HeadGradients | None = None
    extra_egrads: GradientSet | None = None

    loss = spacing_mse(z, before, state.prototypes)
    upstream_z = upstream_z + config.spacing_weight * loss.input_gradient
    stats.spacing.append(loss.value)

    probs = hcache = None
    if (config.pairwise_weight > 0 or config.consistency_weight > 0) and \
            unlabeled_head is not None:
        probs, hcache = head_forward(unlabeled_head, z)

    if config.pairwise_weight > 0 and x.shape[0] >= 2 and probs is not None:
        pw = pairwise_pseudo(z, probs, threshold=config.rho)
        hg, dz = head_backward(
            unlabeled_head, hcache, d_probs=config.pairwise_weight * pw.input_gradient
        )
        unlabeled_hgrads = _add_head_gradients(unlabeled_hgrads, hg)
        upstream_z = upstream_z + dz
        stats.pairwise.append(pw.value)

    if config.consistency_weight > 0 and probs is not None:
        x_aug = augment(x, sigma, augment_rng)
        z_aug, cache_aug = forward(extractor, x_aug)
        probs_aug, hcache_aug = head_forward(unlabeled_head, z_aug)
        cons = consistency(probs, probs_aug)
        stats.consistency.append(cons.value)
        hg_plain, dz_plain = head_backward(
            unlabeled_head,
            hcache,
            d_probs=config.consistency_weight * cons.input_gradient,
        )
        hg_aug, dz_aug = head_backward(
            unlabeled_head,
            hcache_aug,
            d_probs=-config.consistency_weight * cons.input_gradient,
        )
        unlabeled_hgrads = _add_head_gradients(unlabeled_hgrads, hg_plain)
        unlabeled_hgrads = _add_head_gradients(unlabeled_hgrads, hg_aug)
        upstream_z = upstream_z + dz_plain
        aug_grads = backward(extractor, cache_aug, dz_aug)
        extra_egrads = aug_grads if extra_egrads is None else _add_gradients(
            extra_egrads, aug_grads
        )
        if config.consistency_on == "both" and labeled_head is not None:
            lprobs, lcache = head_forward(labeled_head, z)
            lprobs_aug, lcache_aug = head_forward(labeled_head, z_aug)
            lcons = consistency(lprobs, lprobs_aug)
            lg_plain, ldz_plain = head_backward(
                labeled_head,
                lcache,
                d_probs=config.consistency_weight * lcons.input_gradient,
            )
            lg_aug, ldz_aug = head_backward(
                labeled_head,
                lcache_aug,
                d_probs=-config.consistency_weight * lcons.input_gradient,
            )
            labeled_hgrads = _add_head_gradients(labeled_hgrads, lg_plain)
            labeled_hgrads = _add_head_gradients(labeled_hgrads, lg_aug)
            upstream_z = upstream_z + ldz_plain
            extra_egrads = _add_gradients(
                extra_egrads, backward(extractor, cache_aug, ldz_aug)
            )

    egrads = backward(extractor, cache, upstream_z)
    if extra_egrads is not None:
        egrads = _add_gradients(egrads, extra_egrads)
    extractor = sgd_step(extractor, egrads, config.learning_rate)
    if unlabeled_hgrads is not None:
        unlabeled_head = head_sgd_step(
            unlabeled_head, unlabeled_hgrads, config.learning_rate
        )
    if labeled_hgrads is not None:
        labeled_head = head_sgd_step(labeled_head, labeled_hgrads, config.learning_rate)

    z_new = embed(extractor, x)
    after = assign_nearest(z_new, state.prototypes)
    state = update_prototypes(
        state,
        z_new,
        after,
        transport_mode=config.transport_mode,
        convex_lambda=config.convex_lambda,
    )
    stats.changes.append(int(np.sum(before != after)))
    return extractor, unlabeled_head, labeled_head, state


def _init_discovery(extractor, feats, n_labeled_classes, config, streams):
    """Prototypes, anchors, and the unlabeled head for a discovery phase."""
    if config.prototype_class_count_policy == "novel_only":
        c = config.novel_classes
    else:
        c = config.novel_classes + n_labeled_classes
    latents = embed(extractor, feats)
    protos = init_prototypes(latents, c, streams["prototype_init"])
    anchors = _solve_anchors(protos, config, streams["anchor_solver"])
    state = fresh_state(protos, anchors)
    unlabeled_head = init_head(
        config.latent_dim, config.novel_classes, streams["unlabeled_head_init"]
    )
    return state, unlabeled_head


def train_two_stage(
    labeled_data,
    unlabeled_data,
    config: TrainingConfig,
    checkpoint_path=None,
) -> tuple[ModelBundle, TrainingTrace]:
    """Supervised phase on labeled rows only, checkpoint, then discovery on
    unlabeled rows only.

    Phase 1 never touches unlabeled_data (not even to validate it), and
    phase 2 uses only its features. When checkpoint_path is given, the
    phase-1 model is saved there before any unlabeled access.
    """
    streams = _streams(config.seed)
    labeled_feats = np.asarray(labeled_data.features, dtype=np.float64)
    labeled_raw = np.asarray(labeled_data.labels)
    if labeled_feats.shape[0] == 0:
        raise TooFewSamplesError("two-stage training needs labeled rows")
    classes, encoded = _encode_labels(labeled_raw)
    if classes.shape[0] < 2:
        raise ConfigError("phase 1 needs at least 2 labeled classes")
    extractor = init_extractor(
        labeled_feats.shape[1],
        latent_dim=config.latent_dim,
        hidden=config.hidden_dims,
        seed_or_rng=streams["extractor_init"],
    )
    labeled_head = init_head(
        config.latent_dim, classes.shape[0], streams["labeled_head_init"]
    )
    records = []
    p1_epochs = config.phase1_epochs or config.epochs
    for epoch in range(1, p1_epochs + 1):
        stats = _EpochStats()
        for batch_idx, batch in enumerate(
            _batches(streams["labeled_batches"], labeled_feats.shape[0], config.batch_size)
        ):
            try:
                extractor, labeled_head, value = _supervised_batch(
                    extractor, labeled_head, labeled_feats[batch], encoded[batch], config
                )
            except (NonFiniteLossError, DimensionMismatchError) as exc:
                _abort("supervised", epoch, batch_idx, exc)
            stats.cross_entropy.append(value)
        records.append(stats.record("supervised", epoch, ()))

    if checkpoint_path is not None:
        save_checkpoint(
            checkpoint_path, ModelBundle(extractor=extractor, labeled_head=labeled_head)
        )

    feats = np.asarray(unlabeled_data.features, dtype=np.float64)
    if feats.shape[0] == 0:
        raise TooFewSamplesError("two-stage training needs unlabeled rows")
    sigma = (
        config.augment_noise_sigma
        if config.augment_noise_sigma is not None
        else _default_sigma(feats)
    )
    state, unlabeled_head = _init_discovery(
        extractor, feats, classes.shape[0], config, streams
    )
    for epoch in range(1, config.epochs + 1):
        if config.recompute_anchors_each_epoch and epoch > 1:
            anchors = _solve_anchors(state.prototypes, config, streams["anchor_solver"])
            state = PrototypeState(state.prototypes, anchors, state.frequency)
        stats = _EpochStats()
        epoch_start = state.prototypes.copy()
        for batch_idx, batch in enumerate(
            _batches(streams["unlabeled_batches"], feats.shape[0], config.batch_size)
        ):
            try:
                extractor, unlabeled_head, labeled_head, state = _discovery_batch(
                    extractor,
                    unlabeled_head,
                    labeled_head,
                    state,
                    feats[batch],
                    config,
                    sigma,
                    streams["augment"],
                    stats,
                )
            except (NonFiniteLossError, DimensionMismatchError) as exc:
                _abort("discovery", epoch, batch_idx, exc)
        records.append(
            stats.record(
                "discovery", epoch, _displacements(epoch_start, state.prototypes)
            )
        )
    bundle = ModelBundle(
        extractor=extractor,
        labeled_head=labeled_head,
        unlabeled_head=unlabeled_head,
    )
    return bundle, TrainingTrace(records=tuple(records))


def train_single_stage(
    labeled_data,
    unlabeled_data,
    config: TrainingConfig,
) -> tuple[ModelBundle, TrainingTrace]:
    """Interleaved training: labeled batches carry cross-entropy, unlabeled
    batches carry spacing, pairwise, and consistency, all over one shared
    extractor. Batches alternate labeled/unlabeled; whichever pool has
    more batches drains its leftovers at the end of the epoch.
    """
    streams = _streams(config.seed)
    labeled_feats = np.asarray(labeled_data.features, dtype=np.float64)
    labeled_raw = np.asarray(labeled_data.labels)
    feats = np.asarray(unlabeled_data.features, dtype=np.float64)
    if feats.shape[0] == 0:
        raise TooFewSamplesError("single-stage training needs unlabeled rows")
    has_labeled = labeled_feats.shape[0] > 0
    if has_labeled:
        classes, encoded = _encode_labels(labeled_raw)
        if classes.shape[0] < 2:
            raise ConfigError("labeled pool needs at least 2 classes when non-empty")
        input_dim = labeled_feats.shape[1]
    else:
        classes = np.empty(0, dtype=np.int64)
        encoded = np.empty(0, dtype=np.int64)
        input_dim = feats.shape[1]
    extractor = init_extractor(
        input_dim,
        latent_dim=config.latent_dim,
        hidden=config.hidden_dims,
        seed_or_rng=streams["extractor_init"],
    )
    labeled_head = (
        init_head(config.latent_dim, classes.shape[0], streams["labeled_head_init"])
        if has_labeled
        else None
    )
    sigma = (
        config.augment_noise_sigma
        if config.augment_noise_sigma is not None
        else _default_sigma(feats)
    )
    if config.prototype_class_count_policy == "all_classes" and has_labeled:
        pool = np.vstack([labeled_feats, feats])
    else:
        pool = feats
    latents = embed(extractor, pool)
    c = config.novel_classes + (
        classes.shape[0] if config.prototype_class_count_policy == "all_classes" else 0
    )
    protos = init_prototypes(latents, c, streams["prototype_init"])
    anchors = _solve_anchors(protos, config, streams["anchor_solver"])
    state = fresh_state(protos, anchors)
    unlabeled_head = init_head(
        config.latent_dim, config.novel_classes, streams["unlabeled_head_init"]
    )
    records = []
    for epoch in range(1, config.epochs + 1):
        if config.recompute_anchors_each_epoch and epoch > 1:
            anchors = _solve_anchors(state.prototypes, config, streams["anchor_solver"])
            state = PrototypeState(state.prototypes, anchors, state.frequency)
        stats = _EpochStats()
        epoch_start = state.prototypes.copy()
        labeled_batches = (
            _batches(streams["labeled_batches"], labeled_feats.shape[0], config.batch_size)
            if has_labeled
            else []
        )
        unlabeled_batches = _batches(
            streams["unlabeled_batches"], feats.shape[0], config.batch_size
        )
        schedule = []
        for i in range(max(len(labeled_batches), len(unlabeled_batches))):
            if i < len(labeled_batches):
                schedule.append(("labeled", labeled_batches[i]))
            if i < len(unlabeled_batches):
                schedule.append(("unlabeled", unlabeled_batches[i]))
        for batch_idx, (kind, batch) in enumerate(schedule):
            try:
                if kind == "labeled":
                    extractor, labeled_head, value = _supervised_batch(
                        extractor,
                        labeled_head,
                        labeled_feats[batch],
                        encoded[batch],
                        config,
                    )
                    stats.cross_entropy.append(value)
                else:
                    extractor, unlabeled_head, labeled_head, state = _discovery_batch(
                        extractor,
                        unlabeled_head,
                        labeled_head,
                        state,
                        feats[batch],
                        config,
                        sigma,
                        streams["augment"],
                        stats,
                    )
            except (NonFiniteLossError, DimensionMismatchError) as exc:
                _abort("interleaved", epoch, batch_idx, exc)
        records.append(
            stats.record(
                "interleaved", epoch, _displacements(epoch_start, state.prototypes)
            )
        )
    bundle = ModelBundle(
        extractor=extractor,
        labeled_head=labeled_head,
        unlabeled_head=unlabeled_head,
    )
    return bundle, TrainingTrace(records=tuple(records))
