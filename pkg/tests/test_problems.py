"""Problem families: derivative correctness, validation, serialization."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import fd_gradients, fd_hessians, fixture_problems, random_quadratic
from pareto_atlas import (
    DistanceSquared,
    Example31,
    Example31Perturbed,
    GenericQuadratic,
    ObjectiveProblem,
    Phenotypic,
    ProblemFormatError,
    RidgePair,
    Weight,
    build_problem,
    builtin_problem,
    check_strong_convexity,
    parse_problem,
    restrict,
    serialize_problem,
)

FIXTURES = fixture_problems()
IDS = [name for name, _ in FIXTURES]
PROBLEMS = [p for _, p in FIXTURES]


class TestDerivatives:
    @pytest.mark.parametrize("problem", PROBLEMS, ids=IDS)
    def test_gradients_match_finite_differences(self, problem, rng):
        for _ in range(5):
            x = rng.normal(size=problem.n)
            assert_allclose(problem.gradients(x), fd_gradients(problem, x),
                            rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("problem", PROBLEMS, ids=IDS)
    def test_hessians_match_finite_differences(self, problem, rng):
        for _ in range(3):
            x = rng.normal(size=problem.n)
            assert_allclose(problem.hessians(x), fd_hessians(problem, x),
                            rtol=1e-6, atol=1e-6)

    @pytest.mark.parametrize("problem", PROBLEMS, ids=IDS)
    def test_hessians_symmetric(self, problem, rng):
        x = rng.normal(size=problem.n)
        h = problem.hessians(x)
        scale = max(1.0, np.abs(h).max())
        assert_allclose(h, np.transpose(h, (0, 2, 1)), rtol=0, atol=1e-12 * scale)

    @pytest.mark.parametrize("problem", PROBLEMS, ids=IDS)
    def test_evaluate_bundles_all_three(self, problem, rng):
        x = rng.normal(size=problem.n)
        f, g, h = problem.evaluate(x)
        assert_allclose(f, problem.values(x))
        assert_allclose(g, problem.gradients(x))
        assert_allclose(h, problem.hessians(x))


class TestFrozenValues:
    """Hand-computed values at specific points."""

    def test_example31(self, example31):
        x = np.array([0.3, -0.2, 0.5])
        assert_allclose(example31.values(x), [0.38, 0.48, 0.32], rtol=1e-15)
        assert_allclose(
            example31.gradients(x),
            [[0.6, -0.4, 1.0], [1.6, 0.6, 1.0], [-0.4, -1.8, 1.0]],
            rtol=1e-15,
        )
        assert_allclose(example31.hessians(x)[2], np.diag([2.0, 4.0, 2.0]))

    def test_example31_perturbed_shifts_first_objective_only(self, example31):
        pert = builtin_problem("example31_perturbed", epsilon=0.25)
        x = np.array([0.3, -0.2, 0.5])
        base_f, base_g = example31.values(x), example31.gradients(x)
        f, g = pert.values(x), pert.gradients(x)
        assert_allclose(f - base_f, [0.25 * 0.5, 0.0, 0.0], atol=1e-15)
        diff = g - base_g
        assert diff[0, 2] == 0.25
        diff[0, 2] = 0.0
        assert_allclose(diff, 0.0, atol=0.0)

    def test_example32(self, example32):
        x = np.array([0.5, 0.5, 1.0])
        assert_allclose(example32.values(x), [1.25, 2.5, 4.25], rtol=1e-15)
        assert_allclose(
            example32.gradients(x),
            [[1.0, 0.0, 2.0], [-4.0, 2.0, 2.0], [-5.0, -2.0, 2.0]],
            rtol=1e-15,
        )

    def test_remark_g(self, remark_g):
        zero = np.zeros(4)
        assert_allclose(remark_g.values(zero), 0.0, atol=0.0)
        assert_allclose(
            remark_g.gradients(zero),
            [[0, 0, -1, 0], [0, 0, 0, -1], [0, 0, 1, 0], [0, 0, 0, 1]],
            atol=0.0,
        )
        ones = np.ones(4)
        assert_allclose(remark_g.values(ones), [4.0, 4.0, 6.0, 6.0], rtol=1e-15)
        assert_allclose(
            remark_g.gradients(ones),
            [
                [2.5, 2.0, 2.0, 2.5],
                [2.0, 2.5, 2.5, 2.0],
                [2.5, 2.0, 4.0, 2.5],
                [2.0, 2.5, 2.5, 4.0],
            ],
            rtol=1e-15,
        )

    def test_distance_squared_at_demand_point(self):
        p = build_problem(DistanceSquared(np.array([[0.0, 0.0], [1.0, 2.0]])))
        f = p.values(np.zeros(2))
        assert_allclose(f, [0.0, 5.0])
        assert_allclose(p.gradients(np.zeros(2))[0], 0.0, atol=0.0)
        assert_allclose(p.hessians(np.zeros(2))[0], 2.0 * np.eye(2))


class TestWeight:
    def test_of_builds_support_face(self):
        w = Weight.of([0.5, 0.0, 0.5])
        assert w.face == (0, 2)
        assert w.m == 3

    def test_rejects_negative(self):
        with pytest.raises(ValueError, match="nonnegative"):
            Weight.of([1.2, -0.2, 0.0])

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError, match="sum to 1"):
            Weight.of([0.5, 0.4])

    def test_rejects_mass_off_face(self):
        with pytest.raises(ValueError, match="outside the face"):
            Weight(np.array([0.5, 0.5, 0.0]), (0,))

    def test_rejects_face_out_of_range(self):
        with pytest.raises(ValueError, match="out of range"):
            Weight(np.array([1.0, 0.0]), (0, 5))

    def test_accepts_rounded_grid_sum(self):
        coords = np.array([1, 7, 2], dtype=float) / 10.0
        Weight.of(coords)  # no raise


class TestValidation:
    def test_rejects_asymmetric_quadratic(self):
        q = np.array([[[1.0, 0.5], [0.0, 1.0]]])
        with pytest.raises(ProblemFormatError, match="symmetric"):
            build_problem(GenericQuadratic(q, np.zeros((1, 2)), np.zeros(1)))

    def test_rejects_indefinite_quadratic(self):
        q = np.array([np.diag([1.0, -1.0])])
        with pytest.raises(ProblemFormatError, match="positive definite"):
            build_problem(GenericQuadratic(q, np.zeros((1, 2)), np.zeros(1)))

    def test_rejects_shape_mismatch(self):
        q = np.array([np.eye(2), np.eye(2)])
        with pytest.raises(ProblemFormatError, match="dimension mismatch"):
            build_problem(GenericQuadratic(q, np.zeros((3, 2)), np.zeros(2)))

    def test_rejects_nonpositive_ridge_penalty(self):
        with pytest.raises(ProblemFormatError, match="must be positive"):
            build_problem(RidgePair(np.ones((3, 2)), np.ones(3), mu=0.0))

    def test_rejects_ridge_length_mismatch(self):
        with pytest.raises(ProblemFormatError, match="dimension mismatch"):
            build_problem(RidgePair(np.ones((3, 2)), np.ones(4), mu=0.1))

    def test_rejects_zero_epsilon(self):
        with pytest.raises(ProblemFormatError, match="nonzero"):
            build_problem(Example31Perturbed(0.0))

    def test_rejects_phenotypic_point_mismatch(self):
        mats = np.array([np.eye(2), np.eye(2)])
        with pytest.raises(ProblemFormatError, match="dimension mismatch"):
            build_problem(Phenotypic(mats, np.zeros((3, 2))))

    def test_point_shape_checked_on_evaluation(self, example31):
        with pytest.raises(ValueError, match="shape"):
            example31.values(np.zeros(4))


class TestSerialization:
    @pytest.mark.parametrize("problem", PROBLEMS, ids=IDS)
    def test_round_trip_preserves_evaluation(self, problem, rng):
        text = serialize_problem(problem)
        clone = build_problem(parse_problem(text))
        assert clone.n == problem.n and clone.m == problem.m
        for _ in range(3):
            x = rng.normal(size=problem.n)
            assert_allclose(clone.values(x), problem.values(x), rtol=1e-15)
            assert_allclose(clone.gradients(x), problem.gradients(x), rtol=1e-15)

    def test_invalid_json_reports_position(self):
        with pytest.raises(ProblemFormatError, match="line 1"):
            parse_problem("{not json")

    def test_unknown_family_lists_known_ones(self):
        with pytest.raises(ProblemFormatError, match="unknown family"):
            parse_problem('{"family": "mystery"}')

    def test_document_dimensions_must_agree(self):
        with pytest.raises(ProblemFormatError, match="dimension mismatch"):
            parse_problem('{"family": "example31", "n": 5}')

    def test_missing_field_names_the_field(self):
        with pytest.raises(ProblemFormatError, match="'points'"):
            parse_problem('{"family": "distance_squared"}')

    def test_non_object_document_rejected(self):
        with pytest.raises(ProblemFormatError, match="JSON object"):
            parse_problem("[1, 2, 3]")

    def test_parse_validates_payload(self):
        doc = '{"family": "ridge_pair", "X": [[1, 0]], "y": [1], "mu": -1.0}'
        with pytest.raises(ProblemFormatError, match="must be positive"):
            parse_problem(doc)


class TestStrongConvexity:
    def test_example31_beta_is_two(self, example31):
        cert = check_strong_convexity(example31, count=50, seed=0)
        assert cert.ok
        assert_allclose(cert.beta_min, 2.0, rtol=1e-12)

    def test_example32_beta(self, example32):
        cert = check_strong_convexity(example32, count=50, seed=0)
        assert_allclose(cert.beta_min, 3.0 - np.sqrt(5.0), rtol=1e-12)

    def test_remark_g_beta(self, remark_g):
        cert = check_strong_convexity(remark_g, count=50, seed=0)
        assert_allclose(cert.beta_min, (3.0 - np.sqrt(5.0)) / 2.0, rtol=1e-12)

    def test_double_identity_quadratic(self):
        q = np.array([2.0 * np.eye(3), 2.0 * np.eye(3)])
        p = build_problem(GenericQuadratic(q, np.zeros((2, 3)), np.zeros(2)))
        cert = check_strong_convexity(p, count=20, seed=1)
        assert_allclose(cert.beta_min, 2.0, rtol=1e-12)

    def test_flags_nonconvex_sample(self):
        q = np.array([np.diag([1.0, -1.0])])
        p = ObjectiveProblem(GenericQuadratic(q, np.zeros((1, 2)), np.zeros(1)))
        cert = check_strong_convexity(p, count=10, seed=0)
        assert not cert.ok
        assert cert.beta_min < 0.0
        assert cert.witness_objective == 0

    def test_custom_sampler(self, example31):
        cert = check_strong_convexity(example31, count=4,
                                      sampler=lambda k: np.zeros((k, 3)))
        assert cert.count == 4
        assert_allclose(cert.beta_min, 2.0)

    def test_rejects_empty_sample(self, example31):
        with pytest.raises(ValueError, match="count"):
            check_strong_convexity(example31, count=0)


class TestRestrict:
    def test_selects_objectives(self, example32, rng):
        sub = restrict(example32, (2, 0))
        assert sub.m == 2 and sub.indices == (0, 2)
        x = rng.normal(size=3)
        assert_allclose(sub.values(x), example32.values(x)[[0, 2]])
        assert_allclose(sub.gradients(x), example32.gradients(x)[[0, 2]])
        assert_allclose(sub.hessians(x), example32.hessians(x)[[0, 2]])
        f, g, h = sub.evaluate(x)
        assert f.shape == (2,) and g.shape == (2, 3) and h.shape == (2, 3, 3)

    def test_rejects_bad_indices(self, example32):
        with pytest.raises(ValueError, match="out of range"):
            restrict(example32, (0, 3))
        with pytest.raises(ValueError, match="nonempty"):
            restrict(example32, ())

    def test_restriction_of_quadratic_matches_manual(self, rng):
        p = random_quadratic(11, n=4, m=4)
        sub = restrict(p, (1, 3))
        x = rng.normal(size=4)
        manual = build_problem(
            GenericQuadratic(p.family.qs[[1, 3]], p.family.bs[[1, 3]], p.family.cs[[1, 3]])
        )
        assert_allclose(sub.values(x), manual.values(x))
