"""Tests for equidistant-anchor placement by stress majorization."""

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings
from hypothesis import strategies as st

from spacing_ncd.exceptions import (
    DegeneratePrototypesError,
    DimensionMismatchError,
    InvalidAlphaError,
    UnsupportedWeightsError,
)
from spacing_ncd.geometry import (
    DissimilarityMatrix,
    SolverSettings,
    b_matrix,
    build_dissimilarity,
    get_equidistant_points,
    majorization_step,
    pairwise_distances,
    stress,
    unit_weights,
)


def _random_instance(rng, c_max=10, z_max=16):
    """A random support configuration plus matching target distances."""
    c = int(rng.integers(2, c_max + 1))
    z = int(rng.integers(1, z_max + 1))
    protos = rng.normal(size=(c, z))
    dissim = build_dissimilarity(protos, alpha=1.5)
    support = dissim.target * rng.uniform(-1.0, 1.0, size=(c, z))
    return support, dissim


def _centered_equilateral(target):
    """Three points at mutual distance `target`, centroid at the origin."""
    radius = target / np.sqrt(3.0)
    angles = np.array([0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0])
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


class TestBuildDissimilarity:
    def test_single_pair_distance_scaled(self):
        dissim = build_dissimilarity([[0.0, 0.0], [3.0, 4.0]], alpha=1.5)
        assert dissim.p_dist == 5.0
        np.testing.assert_allclose(dissim.delta, [[0.0, 7.5], [7.5, 0.0]])
        assert dissim.target == 7.5

    def test_max_over_all_pairs(self):
        dissim = build_dissimilarity([[0.0], [1.0], [2.0]], alpha=2.0)
        off = dissim.delta[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, 4.0)
        np.testing.assert_allclose(np.diag(dissim.delta), 0.0)

    def test_coincident_prototypes_rejected(self):
        with pytest.raises(DegeneratePrototypesError):
            build_dissimilarity([[1.0, 1.0], [1.0, 1.0]], alpha=1.5)

    def test_alpha_at_most_one_rejected(self):
        with pytest.raises(InvalidAlphaError):
            build_dissimilarity([[0.0], [1.0]], alpha=1.0)
        with pytest.raises(InvalidAlphaError):
            build_dissimilarity([[0.0], [1.0]], alpha=0.5)

    def test_single_prototype_rejected(self):
        with pytest.raises(DimensionMismatchError):
            build_dissimilarity([[0.0, 1.0]], alpha=1.5)


class TestStress:
    def test_zero_when_distances_match(self):
        config = np.array([[0.0], [2.0]])
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert stress(config, delta) == 0.0

    def test_unit_gap_squared(self):
        config = np.array([[0.0], [1.0]])
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert stress(config, delta) == pytest.approx(1.0)

    def test_equilateral_triangle_is_exact(self):
        side = 3.7
        config = _centered_equilateral(side)
        delta = np.full((3, 3), side)
        np.fill_diagonal(delta, 0.0)
        assert stress(config, delta) == pytest.approx(0.0, abs=1e-24)

    def test_weights_scale_terms(self):
        config = np.array([[0.0], [1.0]])
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        w = np.array([[0.0, 3.0], [3.0, 0.0]])
        assert stress(config, delta, w) == pytest.approx(3.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            stress(np.zeros((3, 2)), np.zeros((2, 2)))


class TestBMatrix:
    def test_hand_checked_two_point_case(self):
        """Points at distance 1 with target 2 give ratio 2 off the diagonal
        and -2 on it.
        """
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        b = b_matrix(np.array([[0.0], [1.0]]), delta)
        np.testing.assert_allclose(b, [[-2.0, 2.0], [2.0, -2.0]])

    def test_coincident_points_zero_out(self):
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        b = b_matrix(np.array([[0.0, 0.0], [0.0, 0.0]]), delta)
        np.testing.assert_allclose(b, np.zeros((2, 2)))

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @hyp_settings(max_examples=50, deadline=None)
    def test_symmetric_with_zero_row_sums(self, seed):
        rng = np.random.default_rng(seed)
        support, dissim = _random_instance(rng, c_max=8, z_max=8)
        b = b_matrix(support, dissim)
        np.testing.assert_allclose(b, b.T, atol=1e-12)
        np.testing.assert_allclose(b.sum(axis=1), 0.0, atol=1e-12)


class TestMajorizationStep:
    def test_hand_checked_two_point_case(self):
        """From {(0),(1)} with target 2 the update lands on {(1),(-1)}:
        distance 2, stress 0.
        """
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        result = majorization_step(np.array([[0.0], [1.0]]), delta)
        np.testing.assert_allclose(result, [[1.0], [-1.0]])
        assert stress(result, delta) == pytest.approx(0.0, abs=1e-24)

    def test_met_targets_map_to_reflection(self):
        """A centered configuration that already meets every target maps to
        its own negation: the same geometry relabeled, still at stress 0.
        """
        side = 2.5
        config = _centered_equilateral(side)
        delta = np.full((3, 3), side)
        np.fill_diagonal(delta, 0.0)
        result = majorization_step(config, delta)
        np.testing.assert_allclose(result, -config, atol=1e-12)
        assert stress(result, delta) == pytest.approx(0.0, abs=1e-20)

    def test_stress_never_increases_over_random_instances(self):
        """One update from 100 random supports never raises the stress."""
        rng = np.random.default_rng(20240817)
        for _ in range(100):
            support, dissim = _random_instance(rng)
            before = stress(support, dissim)
            after = stress(majorization_step(support, dissim), dissim)
            assert after <= before + 1e-12

    def test_stress_never_increases_along_trajectories(self):
        """Stress is monotone along whole update trajectories, not just for
        a single step.
        """
        rng = np.random.default_rng(7)
        for _ in range(10):
            support, dissim = _random_instance(rng, c_max=6, z_max=8)
            previous = stress(support, dissim)
            for _ in range(50):
                support = majorization_step(support, dissim)
                current = stress(support, dissim)
                assert current <= previous + 1e-12
                previous = current

    @given(st.integers(min_value=0, max_value=2**32 - 1))
    @hyp_settings(max_examples=50, deadline=None)
    def test_output_is_origin_centered(self, seed):
        rng = np.random.default_rng(seed)
        support, dissim = _random_instance(rng, c_max=8, z_max=8)
        result = majorization_step(support, dissim)
        np.testing.assert_allclose(result.mean(axis=0), 0.0, atol=1e-12)

    def test_uniform_non_unit_weights_accepted(self):
        """Any single positive off-diagonal weight scales the surrogate
        uniformly, so the minimizer is unchanged.
        """
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        support = np.array([[0.0], [1.0]])
        w = 3.0 * unit_weights(2)
        np.testing.assert_allclose(
            majorization_step(support, delta, w),
            majorization_step(support, delta),
        )

    def test_nonuniform_weights_rejected(self):
        delta = np.full((3, 3), 2.0)
        np.fill_diagonal(delta, 0.0)
        w = unit_weights(3)
        w[0, 1] = w[1, 0] = 2.0
        with pytest.raises(UnsupportedWeightsError):
            majorization_step(np.zeros((3, 2)), delta, w)

    def test_zero_weights_rejected(self):
        delta = np.array([[0.0, 2.0], [2.0, 0.0]])
        with pytest.raises(UnsupportedWeightsError):
            majorization_step(np.array([[0.0], [1.0]]), delta, np.zeros((2, 2)))


class TestGetEquidistantPoints:
    def test_two_points_reach_target(self):
        protos = np.array([[0.0, 0.0], [1.0, 1.0]])
        result = get_equidistant_points(protos, alpha=1.5, settings=SolverSettings(seed=3))
        assert result.converged
        target = 1.5 * np.sqrt(2.0)
        dist = pairwise_distances(result.points)[0, 1]
        assert dist == pytest.approx(target, rel=1e-6)

    def test_three_points_form_equilateral_triangle(self):
        rng = np.random.default_rng(11)
        protos = rng.normal(size=(3, 2))
        dissim = build_dissimilarity(protos, alpha=1.5)
        result = get_equidistant_points(protos, alpha=1.5)
        assert result.converged
        dist = pairwise_distances(result.points)
        off = dist[np.triu_indices(3, k=1)]
        np.testing.assert_allclose(off, dissim.target, rtol=1e-3)

    def test_feasible_dimensions_hit_target_tightly(self):
        """Whenever z >= c - 1 the target geometry exists and every pairwise
        distance lands within 0.1% relative of it, even at z = c - 1 exactly.
        """
        rng = np.random.default_rng(19)
        for c in range(2, 11):
            z = c - 1
            protos = rng.normal(size=(c, max(z, 1)))
            dissim = build_dissimilarity(protos, alpha=1.5)
            result = get_equidistant_points(protos, alpha=1.5, settings=SolverSettings(seed=c))
            dist = pairwise_distances(result.points)
            off = dist[np.triu_indices(c, k=1)]
            rel = np.abs(off - dissim.target) / dissim.target
            assert rel.max() < 1e-3

    def test_infeasible_dimension_keeps_positive_stress(self):
        """Five mutually equidistant points need four dimensions; in three,
        the solver must end with stress bounded away from zero (whether or
        not the iteration settles).
        """
        rng = np.random.default_rng(5)
        protos = rng.normal(size=(5, 3))
        dissim = build_dissimilarity(protos, alpha=1.5)
        result = get_equidistant_points(protos, alpha=1.5)
        assert result.final_stress / dissim.target**2 > 1e-3

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(23)
        protos = rng.normal(size=(4, 3))
        a = get_equidistant_points(protos, alpha=1.5, settings=SolverSettings(seed=9))
        b = get_equidistant_points(protos, alpha=1.5, settings=SolverSettings(seed=9))
        assert np.array_equal(a.points, b.points)
        assert a.iterations == b.iterations
        assert a.final_stress == b.final_stress

    def test_scale_equivariance_power_of_two(self):
        """Doubling the prototypes doubles the targets and the seeded start,
        so the whole trajectory doubles: the output is bitwise 2x.
        """
        rng = np.random.default_rng(31)
        protos = rng.normal(size=(4, 4))
        base = get_equidistant_points(protos, alpha=1.5, settings=SolverSettings(seed=2))
        for s in (2.0, 0.5, 8.0):
            scaled = get_equidistant_points(
                s * protos, alpha=1.5, settings=SolverSettings(seed=2)
            )
            assert np.array_equal(scaled.points, s * base.points)

    def test_scale_equivariance_general_factor(self):
        rng = np.random.default_rng(37)
        protos = rng.normal(size=(5, 6))
        settings = SolverSettings(epsilon=1e-12, seed=4)
        base = get_equidistant_points(protos, alpha=1.5, settings=settings)
        base_dist = pairwise_distances(base.points)
        for s in (3.0, 0.1, 7.3):
            scaled = get_equidistant_points(s * protos, alpha=1.5, settings=settings)
            np.testing.assert_allclose(
                pairwise_distances(scaled.points), s * base_dist, rtol=1e-9
            )

    def test_iteration_budget_reported(self):
        rng = np.random.default_rng(41)
        protos = rng.normal(size=(6, 8))
        result = get_equidistant_points(
            protos, alpha=1.5, settings=SolverSettings(max_iterations=2)
        )
        assert not result.converged
        assert result.iterations == 2
        assert np.isfinite(result.final_stress)

    def test_errors_propagate(self):
        with pytest.raises(DegeneratePrototypesError):
            get_equidistant_points(np.ones((3, 2)), alpha=1.5)
        with pytest.raises(InvalidAlphaError):
            get_equidistant_points(np.array([[0.0], [1.0]]), alpha=1.0)

    def test_settings_validated(self):
        with pytest.raises(ValueError):
            SolverSettings(epsilon=0.0)
        with pytest.raises(ValueError):
            SolverSettings(max_iterations=0)


class TestDissimilarityType:
    def test_plain_matrix_and_wrapper_agree(self):
        protos = np.array([[0.0, 0.0], [3.0, 4.0]])
        dissim = build_dissimilarity(protos, alpha=1.5)
        support = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert stress(support, dissim) == stress(support, dissim.delta)
        np.testing.assert_allclose(
            b_matrix(support, dissim), b_matrix(support, dissim.delta)
        )

    def test_asymmetric_plain_matrix_rejected(self):
        bad = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(DimensionMismatchError):
            stress(np.zeros((2, 1)), bad)
