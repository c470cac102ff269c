"""Sets of system matrices consistent with measured data.

Each sample i contributes the quadric

    Ai = [x(i); u(i)] [x(i); u(i)]',   Bi = -[x(i); u(i)] x(i+1)',
    Ci = -eps I + x(i+1) x(i+1)',

and a pair (A, B) is consistent with sample i when, for Z' = [A B],
Z'AiZ + Z'Bi + Bi'Z + Ci <= 0.  Summing the per-sample quadrics gives the
aggregate quadric of the energy-bound set (with the derived bound eps * T),
so the aggregate set always contains the intersection of the per-sample
sets.  The aggregate set is bounded exactly when [X0; U0] has full row rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ddstab.datagen import DataSet
from ddstab.ellipsoid import MatrixShape, QuadraticFormEllipsoid, membership_many

RANK_RTOL = 1e-8


@dataclass(frozen=True)
class SampleQuadric:
    index: int
    Ai: np.ndarray
    Bi: np.ndarray
    Ci: np.ndarray


@dataclass(frozen=True)
class AggregateQuadric:
    AI: np.ndarray
    BI: np.ndarray
    CI: np.ndarray


@dataclass(frozen=True)
class ConsistencySets:
    dataset: DataSet
    samples: tuple[SampleQuadric, ...]
    aggregate: AggregateQuadric

    @property
    def shape(self) -> MatrixShape:
        return MatrixShape(p=self.dataset.n + self.dataset.m, q=self.dataset.n)

    def aggregate_ellipsoid(self) -> QuadraticFormEllipsoid:
        a = self.aggregate
        return QuadraticFormEllipsoid(shape=self.shape, A=a.AI, B=a.BI, C=a.CI)

    def sample_ellipsoid(self, i: int) -> QuadraticFormEllipsoid:
        s = self.samples[i]
        return QuadraticFormEllipsoid(shape=self.shape, A=s.Ai, B=s.Bi, C=s.Ci)


def build(ds: DataSet) -> ConsistencySets:
    """Exact arithmetic construction of the per-sample and aggregate quadrics."""
    n, T, eps = ds.n, ds.T, ds.epsilon
    W = np.vstack([ds.X0, ds.U0])
    samples = []
    for i in range(T):
        w = W[:, i]
        xp = ds.X1[:, i]
        samples.append(SampleQuadric(
            index=i,
            Ai=np.outer(w, w),
            Bi=-np.outer(w, xp),
            Ci=-eps * np.eye(n) + np.outer(xp, xp),
        ))
    aggregate = AggregateQuadric(
        AI=W @ W.T,
        BI=-W @ ds.X1.T,
        CI=-T * eps * np.eye(n) + ds.X1 @ ds.X1.T,
    )
    return ConsistencySets(dataset=ds, samples=tuple(samples), aggregate=aggregate)


def _as_Z(A, B, n: int, m: int) -> np.ndarray:
    A = np.asarray(A, dtype=float).reshape(n, n)
    B = np.asarray(B, dtype=float).reshape(n, m)
    return np.hstack([A, B]).T  # Z' = [A B]


def member_C(cs: ConsistencySets, A, B) -> float:
    """Signed slack of (A, B) in the aggregate (energy-bound) set."""
    from ddstab.ellipsoid import membership

    Z = _as_Z(A, B, cs.dataset.n, cs.dataset.m)
    return membership(cs.aggregate_ellipsoid(), Z)


def member_I(cs: ConsistencySets, A, B) -> float:
    """Signed slack of (A, B) in the intersection of per-sample sets: the
    minimum per-sample slack."""
    Z = _as_Z(A, B, cs.dataset.n, cs.dataset.m)
    return float(min(membership_many(cs.sample_ellipsoid(i), Z[None])[0]
                     for i in range(cs.dataset.T)))


def member_C_many(cs: ConsistencySets, Z: np.ndarray) -> np.ndarray:
    """Aggregate-set slacks for a batch Z of shape (N, n+m, n)."""
    return membership_many(cs.aggregate_ellipsoid(), Z)


def member_I_many(cs: ConsistencySets, Z: np.ndarray) -> np.ndarray:
    """Intersection-set slacks for a batch Z of shape (N, n+m, n)."""
    out = np.full(Z.shape[0], np.inf)
    for i in range(cs.dataset.T):
        out = np.minimum(out, membership_many(cs.sample_ellipsoid(i), Z))
    return out


def intersection_mask(cs: ConsistencySets, Z: np.ndarray) -> np.ndarray:
    """Boolean membership in the intersection set for a batch Z.

    Equivalent to member_I_many(cs, Z) >= 0 but filters progressively, so
    points rejected by an early sample skip the remaining quadrics."""
    alive = np.arange(Z.shape[0])
    for i in range(cs.dataset.T):
        if alive.size == 0:
            break
        slacks = membership_many(cs.sample_ellipsoid(i), Z[alive])
        alive = alive[slacks >= 0.0]
    mask = np.zeros(Z.shape[0], dtype=bool)
    mask[alive] = True
    return mask


def pairs_to_Z(A_batch: np.ndarray, B_batch: np.ndarray) -> np.ndarray:
    """Stack batched (A, B) pairs into the (N, n+m, n) layout with Z' = [A B]."""
    return np.concatenate([A_batch, B_batch], axis=2).transpose(0, 2, 1)


def Z_to_pairs(Z: np.ndarray, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Split batched Z of shape (N, n+m, n) back into (A, B) matrices."""
    Zt = Z.transpose(0, 2, 1)
    return Zt[:, :, :n], Zt[:, :, n:]


def is_bounded(cs: ConsistencySets, tol: float = RANK_RTOL) -> bool:
    """True when [X0; U0] has full row rank, which bounds the aggregate set."""
    w = np.linalg.eigvalsh(cs.aggregate.AI)
    return bool(w[0] > tol * max(w[-1], 0.0) and w[-1] > 0.0)


def aggregate_boundary(cs: ConsistencySets, num_points: int = 256,
                       window: tuple[float, float, float, float] | None = None):
    """Boundary polylines of the aggregate set for scalar systems (n = m = 1)."""
    from ddstab.ellipsoid import quadric_boundary_2d

    if cs.dataset.n != 1 or cs.dataset.m != 1:
        raise ValueError("boundary export is defined for n = m = 1 only")
    a = cs.aggregate
    return quadric_boundary_2d(a.AI, a.BI, float(a.CI[0, 0]), num_points, window)


def membership_grid(cs: ConsistencySets, a_values: np.ndarray, b_values: np.ndarray):
    """Intersection-set slacks over a rectangular (A, B) grid, scalar systems only.

    Returns an array of shape (len(a_values), len(b_values)).
    """
    if cs.dataset.n != 1 or cs.dataset.m != 1:
        raise ValueError("membership grids are defined for n = m = 1 only")
    Ag, Bg = np.meshgrid(a_values, b_values, indexing="ij")
    Z = np.stack([Ag.ravel(), Bg.ravel()], axis=1)[:, :, None]
    return member_I_many(cs, Z).reshape(Ag.shape)
