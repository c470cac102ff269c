import numpy as np
import pytest

from ddstab import consistency, datagen
from ddstab.consistency import (
    aggregate_boundary,
    build,
    is_bounded,
    member_C,
    member_C_many,
    member_I,
    member_I_many,
    membership_grid,
    pairs_to_Z,
)
from ddstab.datagen import DataSet, example1_dataset, third_order_dataset

SQ6 = np.sqrt(0.6)


def random_dataset(rng, n=None, m=None, T=None, eps=None) -> DataSet:
    n = n or int(rng.integers(1, 5))
    m = m or int(rng.integers(1, 5))
    T = T or int(rng.integers(1, 51))
    eps = eps if eps is not None else float(rng.uniform(0.05, 0.5))
    sys = datagen.LtiSystem(n, m, rng.uniform(-0.6, 0.6, (n, n)),
                            rng.uniform(-1, 1, (n, m)))
    ds, _ = datagen.simulate(sys, rng.standard_normal(n),
                             datagen.InputModel.gaussian(),
                             datagen.DisturbanceModel.uniform_ball(eps), T, rng)
    return ds


class TestBuild:
    def test_example1_T1(self):
        cs = build(example1_dataset(1))
        assert np.array_equal(cs.aggregate.AI, [[1.0, 1.0], [1.0, 1.0]])
        assert np.array_equal(cs.aggregate.BI, [[-1.0], [-1.0]])
        assert np.array_equal(cs.aggregate.CI, [[0.0]])

    def test_example1_T2(self):
        cs = build(example1_dataset(2))
        assert np.array_equal(cs.aggregate.AI, 2.0 * np.eye(2))
        assert np.array_equal(cs.aggregate.BI, [[-1.0], [-1.0]])
        assert np.array_equal(cs.aggregate.CI, [[-1.0]])

    def test_zero_dataset(self):
        ds = DataSet(n=2, m=1, T=2, X0=np.zeros((2, 2)), X1=np.zeros((2, 2)),
                     U0=np.zeros((1, 2)), epsilon=1.0)
        cs = build(ds)
        assert not cs.aggregate.AI.any()
        assert not cs.aggregate.BI.any()
        assert np.array_equal(cs.aggregate.CI, -2.0 * np.eye(2))

    def test_sample_quadric_structure(self, rng):
        ds = random_dataset(rng, n=2, m=2, T=8)
        cs = build(ds)
        for i, s in enumerate(cs.samples):
            w = np.concatenate([ds.X0[:, i], ds.U0[:, i]])
            assert np.array_equal(s.Ai, np.outer(w, w))
            assert np.linalg.matrix_rank(s.Ai) <= 1
            assert np.array_equal(s.Ci, -ds.epsilon * np.eye(2)
                                  + np.outer(ds.X1[:, i], ds.X1[:, i]))

    @pytest.mark.parametrize("seed", range(10))
    def test_decomposition_identity(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_dataset(rng)
        cs = build(ds)
        sumA = sum(s.Ai for s in cs.samples)
        sumB = sum(s.Bi for s in cs.samples)
        sumC = sum(s.Ci for s in cs.samples)
        for total, agg in ((sumA, cs.aggregate.AI), (sumB, cs.aggregate.BI),
                           (sumC, cs.aggregate.CI)):
            scale = max(1.0, np.abs(agg).max())
            assert np.abs(total - agg).max() <= 1e-12 * scale


class TestMembership:
    def test_truth_slack_T2(self):
        cs = build(example1_dataset(2))
        assert member_C(cs, [[0.5]], [[0.5]]) == pytest.approx(2.0, abs=1e-12)

    def test_non_monotonicity_witness(self):
        w = 0.5 + SQ6
        inside = member_C(build(example1_dataset(3)), [[w]], [[w]])
        outside = member_C(build(example1_dataset(2)), [[w]], [[w]])
        assert inside == pytest.approx(0.6, abs=1e-9)
        assert outside == pytest.approx(-0.4, abs=1e-9)

    def test_member_I_corner(self):
        cs = build(example1_dataset(2))
        assert member_I(cs, [[1.5]], [[0.5]]) == pytest.approx(0.0, abs=1e-12)

    def test_member_I_interior_and_exterior(self):
        cs = build(example1_dataset(2))
        assert member_I(cs, [[0.5]], [[0.5]]) > 0
        assert member_I(cs, [[1.8]], [[0.5]]) < 0

    def test_truth_in_I_random(self, rng):
        sys = datagen.third_order_system()
        ds = third_order_dataset(30, 0.2, rng)
        cs = build(ds)
        assert member_I(cs, sys.Astar, sys.Bstar) >= -1e-9
        assert member_C(cs, sys.Astar, sys.Bstar) >= -1e-9

    def test_batched_matches_scalar(self, rng):
        ds = random_dataset(rng, n=2, m=1, T=6)
        cs = build(ds)
        A = rng.uniform(-1, 1, (5, 2, 2))
        B = rng.uniform(-1, 1, (5, 2, 1))
        Z = pairs_to_Z(A, B)
        sc = member_C_many(cs, Z)
        si = member_I_many(cs, Z)
        for k in range(5):
            assert sc[k] == pytest.approx(member_C(cs, A[k], B[k]), abs=1e-12)
            assert si[k] == pytest.approx(member_I(cs, A[k], B[k]), abs=1e-12)

    def test_intersection_implies_aggregate(self, rng):
        # random pairs near and inside the sets
        for seed in range(5):
            g = np.random.default_rng(seed)
            ds = random_dataset(g, T=20)
            cs = build(ds)
            n, m = ds.n, ds.m
            sys_A = np.broadcast_to(np.zeros((n, n)), (2000, n, n))
            A = g.uniform(-1.5, 1.5, (2000, n, n))
            B = g.uniform(-1.5, 1.5, (2000, n, m))
            Z = pairs_to_Z(A, B)
            si = member_I_many(cs, Z)
            sc = member_C_many(cs, Z)
            assert not ((si >= 0) & (sc < -1e-9)).any()

    def test_monotone_intersection_prefix(self, rng):
        ds = random_dataset(rng, n=2, m=2, T=25)
        full = build(ds)
        prefix = build(ds.prefix(12))
        A = rng.uniform(-1, 1, (500, 2, 2))
        B = rng.uniform(-1, 1, (500, 2, 2))
        Z = pairs_to_Z(A, B)
        s_full = member_I_many(full, Z)
        s_prefix = member_I_many(prefix, Z)
        assert (s_prefix >= s_full - 1e-12).all()


class TestBoundedness:
    def test_example1(self):
        assert not is_bounded(build(example1_dataset(1)))
        assert is_bounded(build(example1_dataset(2)))

    def test_zero_dataset(self):
        ds = DataSet(n=1, m=1, T=3, X0=np.zeros((1, 3)), X1=np.zeros((1, 3)),
                     U0=np.zeros((1, 3)), epsilon=1.0)
        assert not is_bounded(build(ds))

    def test_rich_data(self, rng):
        assert is_bounded(build(third_order_dataset(50, 0.1, rng)))


class TestExports:
    def test_boundary_ellipse(self):
        cs = build(example1_dataset(2))
        lines = aggregate_boundary(cs, num_points=64)
        assert len(lines) == 1
        pts = lines[0]
        # every boundary point has zero aggregate slack
        for a, b in pts[::8]:
            assert member_C(cs, [[a]], [[b]]) == pytest.approx(0.0, abs=1e-9)

    def test_boundary_strip(self):
        cs = build(example1_dataset(1))
        lines = aggregate_boundary(cs, num_points=16, window=(-2, 3, -2, 3))
        assert len(lines) == 2
        for line in lines:
            for a, b in line[::5]:
                assert member_C(cs, [[a]], [[b]]) == pytest.approx(0.0, abs=1e-9)

    def test_membership_grid(self):
        cs = build(example1_dataset(2))
        a_vals = np.linspace(-1.0, 2.0, 21)
        b_vals = np.linspace(-1.0, 2.0, 21)
        grid = membership_grid(cs, a_vals, b_vals)
        assert grid.shape == (21, 21)
        ia = np.argmin(np.abs(a_vals - 0.5))
        assert grid[ia, ia] > 0

    def test_exports_require_scalar_system(self, rng):
        cs = build(third_order_dataset(10, 0.1, rng))
        with pytest.raises(ValueError):
            aggregate_boundary(cs)
        with pytest.raises(ValueError):
            membership_grid(cs, np.zeros(2), np.zeros(2))
