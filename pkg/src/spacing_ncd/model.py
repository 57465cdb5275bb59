"""A small differentiable feature extractor with classifier heads.

The extractor is a fully connected net mapping R^d inputs to R^z latents:
tanh after every layer except the last, which stays linear so latents are
unbounded. Heads are single affine maps followed by a row-wise softmax.
All gradients are exact reverse-mode; parameters live in immutable
dataclasses and updates return new instances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import as_float_matrix, check_rng
from .exceptions import ConfigError, DimensionMismatchError, SchemaError, StaleCacheError

DEFAULT_HIDDEN = (64, 64)
DEFAULT_LATENT_DIM = 16
DEFAULT_LEARNING_RATE = 1e-2
CHECKPOINT_FORMAT = "spacing-ncd-checkpoint-v1"


@dataclass(frozen=True)
class FeatureExtractor:
    """Affine layers with tanh between them and a linear final layer."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def latent_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(w.shape[1] for w in self.weights)


@dataclass(frozen=True)
class GradientSet:
    """One gradient array per extractor parameter array, same shapes."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class ForwardCache:
    """Per-layer inputs kept from a forward pass for the backward pass."""

    activations: tuple[np.ndarray, ...]
    layer_dims: tuple[int, ...]


@dataclass(frozen=True)
class ClassifierHead:
    """A linear map from latents to class logits; softmax happens in
    head_forward.
    """

    weight: np.ndarray
    bias: np.ndarray

    @property
    def latent_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weight.shape[1]


@dataclass(frozen=True)
class HeadGradients:
    weight: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class HeadCache:
    latents: np.ndarray
    probs: np.ndarray


def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_extractor(
    input_dim: int,
    latent_dim: int = DEFAULT_LATENT_DIM,
    hidden: tuple[int, ...] = DEFAULT_HIDDEN,
    seed_or_rng=0,
) -> FeatureExtractor:
    """Seeded extractor: weights uniform in +-sqrt(6/(fan_in+fan_out)),
    biases zero.
    """
    if input_dim < 1 or latent_dim < 1 or any(h < 1 for h in hidden):
        raise ConfigError("all layer widths must be positive")
    rng = check_rng(seed_or_rng)
    dims = (input_dim,) + tuple(hidden) + (latent_dim,)
    weights = tuple(
        _glorot_uniform(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)
    )
    biases = tuple(np.zeros(dims[i + 1]) for i in range(len(dims) - 1))
    return FeatureExtractor(weights=weights, biases=biases)


def forward(extractor: FeatureExtractor, inputs) -> tuple[np.ndarray, ForwardCache]:
    """Latents for each input row, plus the cache backward needs."""
    x = as_float_matrix(inputs, "inputs")
    if x.shape[1] != extractor.input_dim:
        raise DimensionMismatchError(
            f"inputs have {x.shape[1]} columns, extractor expects "
            f"{extractor.input_dim}"
        )
    activations = [x]
    n_layers = len(extractor.weights)
    for i, (w, b) in enumerate(zip(extractor.weights, extractor.biases)):
        pre = activations[-1] @ w + b
        activations.append(np.tanh(pre) if i < n_layers - 1 else pre)
    return activations[-1], ForwardCache(
        activations=tuple(activations), layer_dims=extractor.layer_dims
    )


def embed(extractor: FeatureExtractor, inputs) -> np.ndarray:
    """Latents only, for inference paths that never backpropagate."""
    return forward(extractor, inputs)[0]


def backward(extractor: FeatureExtractor, cache: ForwardCache, upstream) -> GradientSet:
    """Gradients of sum_i <upstream_i, latents_i> with respect to every
    extractor parameter. upstream is therefore the loss gradient at the
    latents, and the returned set is the loss gradient at the parameters.
    """
    g = as_float_matrix(upstream, "upstream")
    if cache.layer_dims != extractor.layer_dims:
        raise StaleCacheError(
            f"cache built for layers {cache.layer_dims}, extractor has "
            f"{extractor.layer_dims}"
        )
    n_layers = len(extractor.weights)
    if len(cache.activations) != n_layers + 1:
        raise StaleCacheError("cache does not match extractor depth")
    if g.shape != cache.activations[-1].shape:
        raise StaleCacheError(
            f"upstream shape {g.shape} does not match cached latents "
            f"{cache.activations[-1].shape}"
        )
    d_weights: list[np.ndarray] = [None] * n_layers
    d_biases: list[np.ndarray] = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        layer_input = cache.activations[layer]
        d_weights[layer] = layer_input.T @ g
        d_biases[layer] = g.sum(axis=0)
        if layer > 0:
            g = g @ extractor.weights[layer].T
            g = g * (1.0 - layer_input * layer_input)
    return GradientSet(weights=tuple(d_weights), biases=tuple(d_biases))


def sgd_step(
    extractor: FeatureExtractor, grads: GradientSet, learning_rate: float
) -> FeatureExtractor:
    """One plain gradient-descent update of every parameter."""
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    weights = tuple(
        w - learning_rate * g for w, g in zip(extractor.weights, grads.weights)
    )
    biases = tuple(
        b - learning_rate * g for b, g in zip(extractor.biases, grads.biases)
    )
    return FeatureExtractor(weights=weights, biases=biases)


def init_head(latent_dim: int, n_classes: int, seed_or_rng=0) -> ClassifierHead:
    if latent_dim < 1 or n_classes < 2:
        raise ConfigError("head needs latent_dim >= 1 and n_classes >= 2")
    rng = check_rng(seed_or_rng)
    return ClassifierHead(
        weight=_glorot_uniform(rng, latent_dim, n_classes),
        bias=np.zeros(n_classes),
    )


def head_forward(head: ClassifierHead, latents) -> tuple[np.ndarray, HeadCache]:
    """Class probabilities per latent row: softmax of the affine output."""
    z = as_float_matrix(latents, "latents")
    if z.shape[1] != head.latent_dim:
        raise DimensionMismatchError(
            f"latents have {z.shape[1]} columns, head expects {head.latent_dim}"
        )
    logits = z @ head.weight + head.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return probs, HeadCache(latents=z, probs=probs)


def head_probabilities(head: ClassifierHead, latents) -> np.ndarray:
    return head_forward(head, latents)[0]


def head_backward(
    head: ClassifierHead,
    cache: HeadCache,
    d_probs=None,
    d_logits=None,
) -> tuple[HeadGradients, np.ndarray]:
    """Backpropagate through the head.

    d_probs is a gradient at the softmax output and goes through the
    softmax Jacobian; d_logits is a gradient already at the affine output
    and skips it. At least one must be given; both are summed. Returns the
    parameter gradients and the gradient at the latents.
    """
    if d_probs is None and d_logits is None:
        raise ConfigError("head_backward needs d_probs and/or d_logits")
    n, m = cache.probs.shape
    g = np.zeros((n, m))
    if d_logits is not None:
        d_logits = as_float_matrix(d_logits, "d_logits")
        if d_logits.shape != (n, m):
            raise StaleCacheError(
                f"d_logits shape {d_logits.shape} does not match cache ({n}, {m})"
            )
        g = g + d_logits
    if d_probs is not None:
        d_probs = as_float_matrix(d_probs, "d_probs")
        if d_probs.shape != (n, m):
            raise StaleCacheError(
                f"d_probs shape {d_probs.shape} does not match cache ({n}, {m})"
            )
        p = cache.probs
        g = g + p * (d_probs - np.sum(d_probs * p, axis=1, keepdims=True))
    if cache.latents.shape[1] != head.latent_dim:
        raise StaleCacheError("cache does not match head width")
    return (
        HeadGradients(weight=cache.latents.T @ g, bias=g.sum(axis=0)),
        g @ head.weight.T,
    )


def head_sgd_step(
    head: ClassifierHead, grads: HeadGradients, learning_rate: float
) -> ClassifierHead:
    if not learning_rate > 0:
        raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
    return ClassifierHead(
        weight=head.weight - learning_rate * grads.weight,
        bias=head.bias - learning_rate * grads.bias,
    )


@dataclass(frozen=True)
class ModelBundle:
    """Extractor plus optional per-regime heads, as saved to checkpoints."""

    extractor: FeatureExtractor
    labeled_head: ClassifierHead | None = None
    unlabeled_head: ClassifierHead | None = None


def _head_to_lists(head: ClassifierHead | None):
    if head is None:
        return None
    return {"weight": head.weight.tolist(), "bias": head.bias.tolist()}


def _head_from_lists(payload) -> ClassifierHead | None:
    if payload is None:
        return None
    return ClassifierHead(
        weight=np.asarray(payload["weight"], dtype=np.float64),
        bias=np.asarray(payload["bias"], dtype=np.float64),
    )


def save_checkpoint(path, bundle: ModelBundle) -> None:
    """Write all parameter tensors as JSON; floats round-trip exactly."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "extractor": {
            "weights": [w.tolist() for w in bundle.extractor.weights],
            "biases": [b.tolist() for b in bundle.extractor.biases],
        },
        "labeled_head": _head_to_lists(bundle.labeled_head),
        "unlabeled_head": _head_to_lists(bundle.unlabeled_head),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True))


def load_checkpoint(path) -> ModelBundle:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(
            f"checkpoint {path} has format {payload.get('format')!r}, "
            f"expected {CHECKPOINT_FORMAT!r}"
        )
    extractor = FeatureExtractor(
        weights=tuple(
            np.asarray(w, dtype=np.float64) for w in payload["extractor"]["weights"]
        ),
        biases=tuple(
            np.asarray(b, dtype=np.float64) for b in payload["extractor"]["biases"]
        ),
    )
    return ModelBundle(
        extractor=extractor,
        labeled_head=_head_from_lists(payload.get("labeled_head")),
        unlabeled_head=_head_from_lists(payload.get("unlabeled_head")),
    )
