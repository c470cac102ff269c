import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_center_form, random_spd
from ddstab.ellipsoid import (
    CenterFormEllipsoid,
    DegenerateEllipsoid,
    MatrixShape,
    QuadraticFormEllipsoid,
    center_to_quadratic,
    member_at,
    membership,
    membership_many,
    monte_carlo_volume_ratio,
    quadratic_to_center,
    quadric_values,
    sample_member,
    sample_members,
    size,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


def example1_aggregate(T: int) -> QuadraticFormEllipsoid:
    # closed-form aggregate quadrics of the scalar reference data
    shape = MatrixShape(2, 1)
    if T == 1:
        return QuadraticFormEllipsoid(shape, A=[[1.0, 1.0], [1.0, 1.0]],
                                      B=[[-1.0], [-1.0]], C=[[0.0]])
    if T == 2:
        return QuadraticFormEllipsoid(shape, A=2.0 * np.eye(2),
                                      B=[[-1.0], [-1.0]], C=[[-1.0]])
    return QuadraticFormEllipsoid(shape, A=2.0 * np.eye(2),
                                  B=[[-1.0], [-1.0]], C=[[-2.0]])


class TestShapes:
    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ValueError):
            MatrixShape(0, 1)
        with pytest.raises(ValueError):
            MatrixShape(2, -1)

    def test_rejects_asymmetric_input(self):
        with pytest.raises(ValueError, match="symmetric"):
            CenterFormEllipsoid(MatrixShape(2, 1), Zc=np.zeros((2, 1)),
                                P=[[1.0, 0.5], [0.0, 1.0]], Q=[[1.0]])

    def test_rejects_indefinite_center_form(self):
        with pytest.raises(DegenerateEllipsoid):
            CenterFormEllipsoid(MatrixShape(2, 1), Zc=np.zeros((2, 1)),
                                P=np.diag([1.0, -1.0]), Q=[[1.0]])


class TestConversion:
    def test_identity_case(self):
        e = QuadraticFormEllipsoid(MatrixShape(2, 1), A=np.eye(2),
                                   B=np.zeros((2, 1)), C=-np.eye(1))
        c = quadratic_to_center(e)
        assert np.allclose(c.Zc, 0.0)
        assert np.allclose(c.P, np.eye(2))
        assert np.allclose(c.Q, np.eye(1))

    def test_example1_T2_center_form(self):
        c = quadratic_to_center(example1_aggregate(2))
        assert np.allclose(c.Zc, [[0.5], [0.5]], atol=1e-12)
        assert np.allclose(c.P, INV_SQRT2 * np.eye(2), atol=1e-12)
        assert np.allclose(c.Q, [[2.0]], atol=1e-12)

    def test_degenerate_raises(self):
        # rank-one A, as for any single-sample quadric
        e = QuadraticFormEllipsoid(MatrixShape(2, 1), A=[[1.0, 1.0], [1.0, 1.0]],
                                   B=[[-1.0], [-1.0]], C=[[0.0]])
        assert e.definiteness_flag == "degenerate"
        with pytest.raises(DegenerateEllipsoid):
            quadratic_to_center(e)

    def test_center_to_quadratic_identity(self):
        c = CenterFormEllipsoid(MatrixShape(2, 1), Zc=np.zeros((2, 1)),
                                P=np.eye(2), Q=np.eye(1))
        e = center_to_quadratic(c)
        assert np.allclose(e.A, np.eye(2))
        assert np.allclose(e.B, 0.0)
        assert np.allclose(e.C, -np.eye(1))
        assert e.definiteness_flag == "strictly-bounded"

    def test_center_to_quadratic_example1(self):
        c = CenterFormEllipsoid(MatrixShape(2, 1), Zc=[[0.5], [0.5]],
                                P=INV_SQRT2 * np.eye(2), Q=[[2.0]])
        e = center_to_quadratic(c)
        assert np.allclose(e.A, 2.0 * np.eye(2), atol=1e-12)
        assert np.allclose(e.B, [[-1.0], [-1.0]], atol=1e-12)
        assert np.allclose(e.C, [[-1.0]], atol=1e-12)

    def test_center_to_quadratic_scalar(self):
        c = CenterFormEllipsoid(MatrixShape(1, 1), Zc=[[3.0]], P=[[2.0]], Q=[[1.0]])
        e = center_to_quadratic(c)
        assert np.allclose(e.A, [[0.25]])
        assert np.allclose(e.B, [[-0.75]])
        assert np.allclose(e.C, [[1.25]])

    @pytest.mark.parametrize("trial", range(20))
    def test_round_trip_random(self, trial):
        rng = np.random.default_rng(trial)
        p, q = rng.integers(1, 5), rng.integers(1, 5)
        c = random_center_form(rng, int(p), int(q))
        e = center_to_quadratic(c)
        back = quadratic_to_center(e)
        assert np.allclose(back.Zc, c.Zc, rtol=1e-9, atol=1e-9)
        assert np.allclose(back.P, c.P, rtol=1e-9, atol=1e-9)
        assert np.allclose(back.Q, c.Q, rtol=1e-9, atol=1e-9)
        again = center_to_quadratic(back)
        assert np.allclose(again.A, e.A, rtol=1e-9, atol=1e-9)
        assert np.allclose(again.B, e.B, rtol=1e-9, atol=1e-9)
        assert np.allclose(again.C, e.C, rtol=1e-9, atol=1e-9)

    def test_round_trip_many_random(self):
        # bulk version of the round-trip identity
        rng = np.random.default_rng(99)
        for _ in range(1000):
            p, q = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            c = random_center_form(rng, p, q)
            e = center_to_quadratic(c)
            back = quadratic_to_center(e)
            assert np.allclose(back.Zc, c.Zc, rtol=1e-9, atol=1e-9)
            assert np.allclose(back.Q, c.Q, rtol=1e-9, atol=1e-9)


class TestMembership:
    def test_example1_truth_inside_T1(self):
        e = example1_aggregate(1)
        assert membership(e, np.array([[0.5], [0.5]])) == pytest.approx(1.0, abs=1e-12)

    def test_example1_boundary_T2(self):
        e = example1_aggregate(2)
        assert membership(e, np.array([[1.5], [0.5]])) == pytest.approx(0.0, abs=1e-12)

    def test_unit_ball_nonmember(self):
        e = QuadraticFormEllipsoid(MatrixShape(2, 1), A=np.eye(2),
                                   B=np.zeros((2, 1)), C=-np.eye(1))
        Z = np.array([[2.0], [0.0]])
        assert membership(e, Z) == pytest.approx(-3.0, abs=1e-12)

    def test_shape_mismatch(self):
        e = example1_aggregate(2)
        with pytest.raises(ValueError):
            membership(e, np.zeros((3, 1)))

    def test_completed_square_identity(self, rng):
        # Z'AZ + Z'B + B'Z + C == (Z + A^-1 B)' A (Z + A^-1 B) - (B'A^-1 B - C)
        for _ in range(50):
            p, q = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            c = random_center_form(rng, p, q)
            e = center_to_quadratic(c)
            Z = rng.uniform(-2, 2, size=(7, p, q))
            lhs = quadric_values(e, Z)
            AinvB = np.linalg.solve(e.A, e.B)
            shifted = Z + AinvB
            rhs = (np.einsum("npq,pr,nrs->nqs", shifted, e.A, shifted)
                   - (e.B.T @ AinvB - e.C))
            assert np.allclose(lhs, (rhs + rhs.transpose(0, 2, 1)) / 2, atol=1e-10)


class TestSize:
    def test_scalar_interval(self):
        for r in (0.5, 1.0, 2.5):
            c = CenterFormEllipsoid(MatrixShape(1, 1), Zc=[[0.0]],
                                    P=[[1.0]], Q=[[r * r]])
            assert size(c) == pytest.approx(r, rel=1e-12)

    def test_example1_T2_size_is_one(self):
        assert size(example1_aggregate(2)) == pytest.approx(1.0, rel=1e-12)
        assert size(quadratic_to_center(example1_aggregate(2))) == pytest.approx(1.0, rel=1e-12)

    def test_dilation_scaling(self, rng):
        for _ in range(10):
            p, q = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            c = random_center_form(rng, p, q)
            centered = CenterFormEllipsoid(c.shape, Zc=np.zeros((p, q)), P=c.P, Q=c.Q)
            dilated = CenterFormEllipsoid(c.shape, Zc=np.zeros((p, q)),
                                          P=2.0 * np.asarray(c.P), Q=c.Q)
            assert size(dilated) / size(centered) == pytest.approx(2.0 ** (p * q), rel=1e-9)

    def test_representation_invariance(self, rng):
        for _ in range(50):
            p, q = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            c = random_center_form(rng, p, q)
            assert size(c) == pytest.approx(size(center_to_quadratic(c)), rel=1e-9)

    def test_degenerate_raises(self):
        with pytest.raises(DegenerateEllipsoid):
            size(example1_aggregate(1))


class TestSampling:
    def test_center_factor(self):
        c = quadratic_to_center(example1_aggregate(2))
        Z = member_at(c, np.zeros((2, 1)))
        assert np.allclose(Z, c.Zc)
        e = center_to_quadratic(c)
        assert membership(e, Z) > 0

    def test_boundary_factor(self):
        c = quadratic_to_center(example1_aggregate(2))
        e = center_to_quadratic(c)
        for Y in (np.array([[1.0], [0.0]]), np.array([[0.6], [0.8]])):
            Z = member_at(c, Y)
            assert membership(e, Z) == pytest.approx(0.0, abs=1e-9)

    def test_all_draws_are_members(self, rng):
        c = quadratic_to_center(example1_aggregate(2))
        e = center_to_quadratic(c)
        Z = sample_members(c, 10_000, rng)
        slacks = membership_many(e, Z)
        assert slacks.min() >= -1e-9

    def test_random_shapes_membership(self, rng):
        for _ in range(10):
            p, q = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            c = random_center_form(rng, p, q)
            e = center_to_quadratic(c)
            Z = sample_members(c, 500, rng)
            assert membership_many(e, Z).min() >= -1e-9

    def test_single_draw(self, rng):
        c = quadratic_to_center(example1_aggregate(2))
        Z = sample_member(c, rng)
        assert Z.shape == (2, 1)


class TestMonteCarloVolume:
    def test_same_ellipsoid_ratio_one(self, rng):
        c = random_center_form(rng, 2, 1)
        est = monte_carlo_volume_ratio(c, c, draws=100_000, rng=rng)
        assert abs(est.ratio - 1.0) <= max(3.0 * est.stderr, 0.02)

    def test_dilation_ratio(self, rng):
        p, q = 2, 1
        base = random_center_form(rng, p, q)
        dilated = CenterFormEllipsoid(base.shape, Zc=base.Zc,
                                      P=2.0 * np.asarray(base.P), Q=base.Q)
        est = monte_carlo_volume_ratio(base, dilated, draws=200_000, rng=rng)
        assert abs(est.ratio - 0.25) <= 3.0 * est.stderr

    def test_example1_c2_vs_c3(self, rng):
        c2 = quadratic_to_center(example1_aggregate(2))
        c3 = quadratic_to_center(example1_aggregate(3))
        est = monte_carlo_volume_ratio(c2, c3, draws=200_000, rng=rng)
        assert abs(est.ratio - 2.0 / 3.0) <= 3.0 * est.stderr
        assert size(example1_aggregate(2)) / size(example1_aggregate(3)) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_shape_mismatch(self, rng):
        e1 = random_center_form(rng, 2, 1)
        e2 = random_center_form(rng, 1, 2)
        with pytest.raises(ValueError):
            monte_carlo_volume_ratio(e1, e2, draws=100, rng=rng)

    def test_ratio_matches_size_random_pair(self, rng):
        e1 = random_center_form(rng, 2, 2)
        e2 = random_center_form(rng, 2, 2)
        est = monte_carlo_volume_ratio(e1, e2, draws=200_000, rng=rng)
        expected = size(e1) / size(e2)
        assert abs(est.ratio - expected) <= 3.0 * est.stderr


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_round_trip_property(p, q, seed):
    rng = np.random.default_rng(seed)
    c = random_center_form(rng, p, q)
    back = quadratic_to_center(center_to_quadratic(c))
    assert np.allclose(back.Zc, c.Zc, rtol=1e-9, atol=1e-9)
    assert np.allclose(back.P, c.P, rtol=1e-9, atol=1e-9)
    assert np.allclose(back.Q, c.Q, rtol=1e-9, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10_000))
def test_sampled_members_property(p, q, seed):
    rng = np.random.default_rng(seed)
    c = random_center_form(rng, p, q)
    e = center_to_quadratic(c)
    Z = sample_members(c, 200, rng)
    assert membership_many(e, Z).min() >= -1e-9
