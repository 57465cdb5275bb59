"""Tests for the feature extractor, classifier heads, and checkpoints."""

import numpy as np
import pytest
from fdcheck import central_difference, max_relative_error

from spacing_ncd.exceptions import (
    ConfigError,
    DimensionMismatchError,
    SchemaError,
    StaleCacheError,
)
from spacing_ncd.model import (
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
    head_probabilities,
    head_sgd_step,
    init_extractor,
    init_head,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
)


def _zeroed(extractor):
    return FeatureExtractor(
        weights=tuple(np.zeros_like(w) for w in extractor.weights),
        biases=tuple(np.zeros_like(b) for b in extractor.biases),
    )


class TestForward:
    def test_zero_parameters_give_zero_latents(self):
        net = _zeroed(init_extractor(3, latent_dim=2, hidden=(4,), seed_or_rng=0))
        latents, _ = forward(net, np.random.default_rng(0).normal(size=(5, 3)))
        np.testing.assert_array_equal(latents, np.zeros((5, 2)))

    def test_single_identity_layer_passes_inputs_through(self):
        net = FeatureExtractor(weights=(np.eye(3),), biases=(np.zeros(3),))
        x = np.random.default_rng(1).normal(size=(4, 3))
        latents, _ = forward(net, x)
        np.testing.assert_allclose(latents, x)

    def test_deterministic(self):
        net = init_extractor(5, latent_dim=3, hidden=(8, 8), seed_or_rng=2)
        x = np.random.default_rng(3).normal(size=(6, 5))
        a, _ = forward(net, x)
        b, _ = forward(net, x)
        assert np.array_equal(a, b)

    def test_latent_width(self):
        net = init_extractor(7, latent_dim=4, hidden=(6,), seed_or_rng=4)
        latents, _ = forward(net, np.zeros((2, 7)))
        assert latents.shape == (2, 4)

    def test_input_width_checked(self):
        net = init_extractor(3, latent_dim=2, seed_or_rng=0)
        with pytest.raises(DimensionMismatchError):
            forward(net, np.zeros((2, 4)))

    def test_embed_matches_forward(self):
        net = init_extractor(4, latent_dim=2, hidden=(5,), seed_or_rng=6)
        x = np.random.default_rng(7).normal(size=(3, 4))
        assert np.array_equal(embed(net, x), forward(net, x)[0])


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        net = init_extractor(3, latent_dim=2, hidden=(4,), seed_or_rng=1)
        x = np.random.default_rng(2).normal(size=(5, 3))
        _, cache = forward(net, x)
        grads = backward(net, cache, np.zeros((5, 2)))
        for g in grads.weights + grads.biases:
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_single_linear_layer_weight_gradient_is_outer_product(self):
        net = FeatureExtractor(
            weights=(np.random.default_rng(3).normal(size=(3, 2)),),
            biases=(np.zeros(2),),
        )
        x = np.array([[1.0, 2.0, 3.0]])
        upstream = np.array([[5.0, -1.0]])
        _, cache = forward(net, x)
        grads = backward(net, cache, upstream)
        np.testing.assert_allclose(grads.weights[0], np.outer(x[0], upstream[0]))
        np.testing.assert_allclose(grads.biases[0], upstream[0])

    def test_matches_finite_differences_across_random_nets(self):
        """Exact reverse-mode gradients agree with a central finite
        difference oracle on every parameter tensor, for 10 random nets.
        """
        rng = np.random.default_rng(42)
        for trial in range(10):
            d = int(rng.integers(2, 6))
            z = int(rng.integers(1, 4))
            h = int(rng.integers(2, 7))
            net = init_extractor(d, latent_dim=z, hidden=(h,), seed_or_rng=rng)
            x = rng.normal(size=(4, d))
            upstream = rng.normal(size=(4, z))

            _, cache = forward(net, x)
            grads = backward(net, cache, upstream)

            for layer in range(len(net.weights)):
                for attr, grad in (
                    ("weights", grads.weights[layer]),
                    ("biases", grads.biases[layer]),
                ):
                    def objective(param):
                        tensors = list(getattr(net, attr))
                        tensors[layer] = param
                        trial_net = FeatureExtractor(
                            weights=tuple(tensors) if attr == "weights" else net.weights,
                            biases=tuple(tensors) if attr == "biases" else net.biases,
                        )
                        latents, _ = forward(trial_net, x)
                        return float(np.sum(upstream * latents))

                    numeric = central_difference(
                        objective, getattr(net, attr)[layer]
                    )
                    assert max_relative_error(grad, numeric) < 1e-4

    def test_stale_cache_rejected(self):
        net = init_extractor(3, latent_dim=2, hidden=(4,), seed_or_rng=5)
        other = init_extractor(3, latent_dim=2, hidden=(5,), seed_or_rng=5)
        x = np.zeros((2, 3))
        _, cache = forward(net, x)
        with pytest.raises(StaleCacheError):
            backward(other, cache, np.zeros((2, 2)))
        with pytest.raises(StaleCacheError):
            backward(net, cache, np.zeros((3, 2)))


class TestSgdStep:
    def test_zero_gradients_leave_parameters_unchanged(self):
        net = init_extractor(3, latent_dim=2, hidden=(4,), seed_or_rng=8)
        grads = GradientSet(
            weights=tuple(np.zeros_like(w) for w in net.weights),
            biases=tuple(np.zeros_like(b) for b in net.biases),
        )
        updated = sgd_step(net, grads, 0.1)
        for a, b in zip(updated.weights, net.weights):
            np.testing.assert_array_equal(a, b)

    def test_unit_rate_with_gradient_equal_to_parameters_zeroes_them(self):
        net = init_extractor(3, latent_dim=2, hidden=(4,), seed_or_rng=9)
        grads = GradientSet(weights=net.weights, biases=net.biases)
        updated = sgd_step(net, grads, 1.0)
        for w in updated.weights + updated.biases:
            np.testing.assert_allclose(w, np.zeros_like(w))

    def test_two_steps_accumulate_linearly(self):
        net = init_extractor(2, latent_dim=2, hidden=(3,), seed_or_rng=10)
        rng = np.random.default_rng(11)
        grads = GradientSet(
            weights=tuple(rng.normal(size=w.shape) for w in net.weights),
            biases=tuple(rng.normal(size=b.shape) for b in net.biases),
        )
        once = sgd_step(net, grads, 0.05)
        twice = sgd_step(once, grads, 0.05)
        for before, after, g in zip(net.weights, twice.weights, grads.weights):
            np.testing.assert_allclose(after, before - 0.1 * g)

    def test_nonpositive_rate_rejected(self):
        net = init_extractor(2, latent_dim=2, seed_or_rng=0)
        grads = GradientSet(weights=net.weights, biases=net.biases)
        with pytest.raises(ConfigError):
            sgd_step(net, grads, 0.0)


class TestHead:
    def test_zero_head_gives_uniform_rows(self):
        head = ClassifierHead(weight=np.zeros((3, 4)), bias=np.zeros(4))
        probs, _ = head_forward(head, np.random.default_rng(0).normal(size=(5, 3)))
        np.testing.assert_allclose(probs, np.full((5, 4), 0.25))

    def test_rows_are_probabilities(self):
        head = init_head(4, 5, seed_or_rng=1)
        latents = 3.0 * np.random.default_rng(2).normal(size=(20, 4))
        probs, _ = head_forward(head, latents)
        assert np.all(probs > 0)
        assert np.all(probs < 1)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_logit_shift_invariance(self):
        head = init_head(3, 4, seed_or_rng=3)
        latents = np.random.default_rng(4).normal(size=(6, 3))
        shifted = ClassifierHead(weight=head.weight, bias=head.bias + 7.5)
        a, _ = head_forward(head, latents)
        b, _ = head_forward(shifted, latents)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_head_probabilities_matches_forward(self):
        head = init_head(3, 4, seed_or_rng=5)
        latents = np.random.default_rng(6).normal(size=(4, 3))
        assert np.array_equal(
            head_probabilities(head, latents), head_forward(head, latents)[0]
        )

    def test_backward_matches_finite_differences_through_softmax(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            head = init_head(4, 3, seed_or_rng=rng)
            latents = rng.normal(size=(6, 4))
            upstream = rng.normal(size=(6, 3))

            def objective_parts(weight, bias, lat):
                trial = ClassifierHead(weight=weight, bias=bias)
                probs, _ = head_forward(trial, lat)
                return float(np.sum(upstream * probs))

            probs, cache = head_forward(head, latents)
            grads, d_latents = head_backward(head, cache, d_probs=upstream)

            numeric_w = central_difference(
                lambda w: objective_parts(w, head.bias, latents), head.weight
            )
            numeric_b = central_difference(
                lambda b: objective_parts(head.weight, b, latents), head.bias
            )
            numeric_z = central_difference(
                lambda lat: objective_parts(head.weight, head.bias, lat), latents
            )
            assert max_relative_error(grads.weight, numeric_w) < 1e-4
            assert max_relative_error(grads.bias, numeric_b) < 1e-4
            assert max_relative_error(d_latents, numeric_z) < 1e-4

    def test_backward_accepts_logit_gradients(self):
        head = init_head(3, 2, seed_or_rng=7)
        latents = np.random.default_rng(8).normal(size=(4, 3))
        _, cache = head_forward(head, latents)
        d_logits = np.random.default_rng(9).normal(size=(4, 2))
        grads, d_latents = head_backward(head, cache, d_logits=d_logits)
        np.testing.assert_allclose(grads.weight, latents.T @ d_logits)
        np.testing.assert_allclose(grads.bias, d_logits.sum(axis=0))
        np.testing.assert_allclose(d_latents, d_logits @ head.weight.T)

    def test_backward_requires_some_gradient(self):
        head = init_head(3, 2, seed_or_rng=10)
        _, cache = head_forward(head, np.zeros((2, 3)))
        with pytest.raises(ConfigError):
            head_backward(head, cache)

    def test_head_sgd_step(self):
        head = init_head(2, 3, seed_or_rng=11)
        grads = HeadGradients(weight=np.ones_like(head.weight), bias=np.ones(3))
        updated = head_sgd_step(head, grads, 0.5)
        np.testing.assert_allclose(updated.weight, head.weight - 0.5)
        np.testing.assert_allclose(updated.bias, head.bias - 0.5)


class TestCheckpoint:
    def test_round_trip_is_exact(self, tmp_path):
        bundle = ModelBundle(
            extractor=init_extractor(6, latent_dim=3, hidden=(5,), seed_or_rng=13),
            labeled_head=init_head(3, 4, seed_or_rng=14),
            unlabeled_head=init_head(3, 2, seed_or_rng=15),
        )
        path = tmp_path / "model.json"
        save_checkpoint(path, bundle)
        loaded = load_checkpoint(path)
        for a, b in zip(loaded.extractor.weights, bundle.extractor.weights):
            assert np.array_equal(a, b)
        for a, b in zip(loaded.extractor.biases, bundle.extractor.biases):
            assert np.array_equal(a, b)
        assert np.array_equal(loaded.labeled_head.weight, bundle.labeled_head.weight)
        assert np.array_equal(loaded.unlabeled_head.bias, bundle.unlabeled_head.bias)

    def test_missing_heads_round_trip_as_none(self, tmp_path):
        bundle = ModelBundle(extractor=init_extractor(2, latent_dim=2, seed_or_rng=0))
        path = tmp_path / "model.json"
        save_checkpoint(path, bundle)
        loaded = load_checkpoint(path)
        assert loaded.labeled_head is None
        assert loaded.unlabeled_head is None

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(SchemaError):
            load_checkpoint(path)
        path.write_text("not json")
        with pytest.raises(SchemaError):
            load_checkpoint(path)
