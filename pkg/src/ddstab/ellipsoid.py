"""Matrix ellipsoids: two equivalent representations, membership, size, sampling.

A matrix ellipsoid is a set of p-by-q real matrices given either in center
form, ``{Zc + P Y Q^(1/2) : |Y| <= 1}`` with P, Q positive definite, or in
quadratic form, ``{Z : Z'AZ + Z'B + B'Z + C <= 0}``.  The two coincide under
``A = P^-2, B = -A Zc, C = Zc'A Zc - Q``.  The module also provides the
volume-proxy size ``det(Q)^(p/2) det(P)^q`` (the shape-dependent constant of
the true Lebesgue volume is dropped, so only same-shape sizes compare) and a
hit-and-miss Monte-Carlo volume oracle over the vectorized sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SYM_RTOL = 1e-12
EIG_RTOL = 1e-10


class DegenerateEllipsoid(ValueError):
    """The operation needs a strictly bounded ellipsoid, but a shape matrix is
    numerically singular or indefinite."""


@dataclass(frozen=True)
class MatrixShape:
    """Row/column dimensions of the member matrices."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1:
            raise ValueError(f"dimensions must be positive, got ({self.p}, {self.q})")


def _as_symmetric(M, name: str) -> np.ndarray:
    """Validate symmetry to relative Frobenius tolerance and symmetrize."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    skew = np.linalg.norm(M - M.T)
    if skew > SYM_RTOL * max(np.linalg.norm(M), 1.0):
        raise ValueError(f"{name} is not symmetric (|M - M'|_F = {skew:.3g})")
    S = (M + M.T) / 2.0
    S.flags.writeable = False
    return S


def _frozen(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.flags.writeable = False
    return M


def _is_pd(M: np.ndarray) -> bool:
    w = np.linalg.eigvalsh(M)
    return w[0] > EIG_RTOL * max(w[-1], 0.0) and w[-1] > 0.0


def _sym_power(M: np.ndarray, exponent: float, name: str) -> np.ndarray:
    """M^exponent through an eigendecomposition; M must be PD within tolerance."""
    w, V = np.linalg.eigh(M)
    if w[0] <= EIG_RTOL * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise DegenerateEllipsoid(
            f"{name} has eigenvalue {w[0]:.3g} below tolerance (largest {w[-1]:.3g})"
        )
    return (V * w**exponent) @ V.T


@dataclass(frozen=True)
class CenterFormEllipsoid:
    """Center form: (Z - Zc)' P^-2 (Z - Zc) <= Q with P > 0, Q > 0."""

    shape: MatrixShape
    Zc: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        p, q = self.shape.p, self.shape.q
        Zc = np.asarray(self.Zc, dtype=float).reshape(p, q)
        object.__setattr__(self, "Zc", _frozen(Zc))
        object.__setattr__(self, "P", _as_symmetric(self.P, "P"))
        object.__setattr__(self, "Q", _as_symmetric(self.Q, "Q"))
        if self.P.shape != (p, p) or self.Q.shape != (q, q):
            raise ValueError("P/Q dimensions do not match the declared shape")
        if not _is_pd(self.P):
            raise DegenerateEllipsoid("P must be positive definite")
        if not _is_pd(self.Q):
            raise DegenerateEllipsoid("Q must be positive definite")


@dataclass(frozen=True)
class QuadraticFormEllipsoid:
    """Quadratic form: Z'AZ + Z'B + B'Z + C <= 0.

    Degenerate instances (singular A, e.g. single-sample data quadrics) are
    representable; ``strictly_bounded`` is False for them and the conversion
    and size operations refuse to run.
    """

    shape: MatrixShape
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        p, q = self.shape.p, self.shape.q
        B = np.asarray(self.B, dtype=float).reshape(p, q)
        object.__setattr__(self, "A", _as_symmetric(self.A, "A"))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _as_symmetric(self.C, "C"))
        if self.A.shape != (p, p) or self.C.shape != (q, q):
            raise ValueError("A/C dimensions do not match the declared shape")

    @property
    def strictly_bounded(self) -> bool:
        if not _is_pd(self.A):
            return False
        Qpart = self.B.T @ np.linalg.solve(self.A, self.B) - self.C
        return _is_pd((Qpart + Qpart.T) / 2.0)

    @property
    def definiteness_flag(self) -> str:
        return "strictly-bounded" if self.strictly_bounded else "degenerate"


def quadratic_to_center(e: QuadraticFormEllipsoid) -> CenterFormEllipsoid:
    """Convert to center form; raises DegenerateEllipsoid when not strictly bounded."""
    AinvB = np.linalg.solve(e.A, e.B) if _is_pd(e.A) else None
    if AinvB is None:
        raise DegenerateEllipsoid("A has an eigenvalue at or below tolerance")
    P = _sym_power(e.A, -0.5, "A")
    Qpart = e.B.T @ AinvB - e.C
    Qpart = (Qpart + Qpart.T) / 2.0
    if not _is_pd(Qpart):
        raise DegenerateEllipsoid("B'A^-1 B - C has an eigenvalue at or below tolerance")
    return CenterFormEllipsoid(shape=e.shape, Zc=-AinvB, P=P, Q=Qpart)


def center_to_quadratic(e: CenterFormEllipsoid) -> QuadraticFormEllipsoid:
    """Convert to quadratic form (always strictly bounded)."""
    A = _sym_power(e.P, -2.0, "P")
    B = -A @ e.Zc
    C = e.Zc.T @ A @ e.Zc - e.Q
    return QuadraticFormEllipsoid(shape=e.shape, A=A, B=B, C=(C + C.T) / 2.0)


def quadric_values(e: QuadraticFormEllipsoid, Z: np.ndarray) -> np.ndarray:
    """Evaluate Z'AZ + Z'B + B'Z + C for a batch Z of shape (N, p, q)."""
    Z = np.asarray(Z, dtype=float)
    ZtAZ = np.einsum("npq,pr,nrs->nqs", Z, e.A, Z)
    ZtB = np.einsum("npq,pr->nqr", Z, e.B)
    M = ZtAZ + ZtB + ZtB.transpose(0, 2, 1) + e.C
    return (M + M.transpose(0, 2, 1)) / 2.0


def membership_many(e: QuadraticFormEllipsoid, Z: np.ndarray) -> np.ndarray:
    """Signed slacks for a batch Z of shape (N, p, q); slack >= 0 means member."""
    M = quadric_values(e, Z)
    if e.shape.q == 1:
        lam = M[:, 0, 0]
    else:
        lam = np.linalg.eigvalsh(M)[:, -1]
    return -lam


def membership(e: QuadraticFormEllipsoid, Z: np.ndarray) -> float:
    """Signed slack of one candidate member: the negated largest eigenvalue of
    the quadric evaluation.  Nonnegative slack means Z belongs to the set;
    zero (within tolerance) means Z sits on the boundary."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (e.shape.p, e.shape.q):
        raise ValueError(f"Z has shape {Z.shape}, expected {(e.shape.p, e.shape.q)}")
    return float(membership_many(e, Z[None])[0])


def size(e) -> float:
    """Volume proxy det(Q)^(p/2) det(P)^q, representation independent.

    Computed through log-determinants so that very small or large sets do not
    underflow at intermediate steps.
    """
    if isinstance(e, CenterFormEllipsoid):
        p, q = e.shape.p, e.shape.q
        sq, ldq = np.linalg.slogdet(e.Q)
        sp, ldp = np.linalg.slogdet(e.P)
        if sq <= 0 or sp <= 0:
            raise DegenerateEllipsoid("P and Q must have positive determinants")
        return math.exp(0.5 * p * ldq + q * ldp)
    if isinstance(e, QuadraticFormEllipsoid):
        if not e.strictly_bounded:
            raise DegenerateEllipsoid("size is defined for strictly bounded ellipsoids only")
        p, q = e.shape.p, e.shape.q
        Qpart = e.B.T @ np.linalg.solve(e.A, e.B) - e.C
        sq, ldq = np.linalg.slogdet((Qpart + Qpart.T) / 2.0)
        sa, lda = np.linalg.slogdet(e.A)
        if sq <= 0 or sa <= 0:
            raise DegenerateEllipsoid("shape matrices must have positive determinants")
        return math.exp(0.5 * p * ldq - 0.5 * q * lda)
    raise TypeError(f"unsupported ellipsoid type {type(e)!r}")


def member_at(e: CenterFormEllipsoid, Y: np.ndarray) -> np.ndarray:
    """The member Zc + P Y Q^(1/2) for a factor Y with |Y| <= 1."""
    Y = np.asarray(Y, dtype=float).reshape(e.shape.p, e.shape.q)
    return e.Zc + e.P @ Y @ _sym_power(e.Q, 0.5, "Q")


def sample_members(e: CenterFormEllipsoid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` members as an array of shape (count, p, q).

    Factors Y are Gaussian directions normalized to unit induced 2-norm and
    scaled radially by u^(1/(pq)), so |Y| <= 1 holds for every draw and both
    the interior and the boundary are covered.
    """
    p, q = e.shape.p, e.shape.q
    G = rng.standard_normal((count, p, q))
    smax = np.linalg.svd(G, compute_uv=False)[:, 0]
    smax = np.maximum(smax, np.finfo(float).tiny)
    radial = rng.uniform(size=count) ** (1.0 / (p * q))
    Y = G * (radial / smax)[:, None, None]
    Qh = _sym_power(e.Q, 0.5, "Q")
    return e.Zc + np.einsum("ij,njk,kl->nil", e.P, Y, Qh)


def sample_member(e: CenterFormEllipsoid, rng: np.random.Generator) -> np.ndarray:
    """Draw one member of the ellipsoid."""
    return sample_members(e, 1, rng)[0]


@dataclass(frozen=True)
class VolumeRatioEstimate:
    ratio: float
    stderr: float
    hits1: int
    hits2: int
    draws: int


def _vectorized_box(e: CenterFormEllipsoid):
    """Axis-aligned box enclosing the vectorized set: center +- per-coordinate radii.

    |Y| <= 1 implies |vec(Y)| <= sqrt(min(p, q)), which gives a valid (not
    tight) enclosure through the row norms of Q^(1/2) kron P.
    """
    p, q = e.shape.p, e.shape.q
    M = np.kron(_sym_power(e.Q, 0.5, "Q"), e.P)
    radii = np.sqrt(min(p, q)) * np.linalg.norm(M, axis=1)
    center = e.Zc.ravel(order="F")
    return center, radii


def _hit_and_miss_volume(e: CenterFormEllipsoid, draws: int, rng: np.random.Generator,
                         chunk: int = 200_000):
    p, q = e.shape.p, e.shape.q
    eq = center_to_quadratic(e)
    center, radii = _vectorized_box(e)
    box_volume = float(np.prod(2.0 * radii))
    hits = 0
    remaining = draws
    while remaining > 0:
        k = min(chunk, remaining)
        z = center + radii * rng.uniform(-1.0, 1.0, size=(k, p * q))
        Z = z.reshape(k, q, p).swapaxes(1, 2)  # undo column-stacked vec
        hits += int(np.count_nonzero(membership_many(eq, Z) >= 0.0))
        remaining -= k
    rate = hits / draws
    volume = box_volume * rate
    stderr = box_volume * math.sqrt(max(rate * (1.0 - rate), 0.0) / draws)
    return volume, stderr, hits


def monte_carlo_volume_ratio(e1: CenterFormEllipsoid, e2: CenterFormEllipsoid,
                             draws: int, rng: np.random.Generator) -> VolumeRatioEstimate:
    """Hit-and-miss estimate of vol(e1)/vol(e2) over the vectorized sets.

    Requires matching shapes so the shape-only constant of the true volume
    cancels and the ratio is comparable with the size ratio.
    """
    if e1.shape != e2.shape:
        raise ValueError(f"shape mismatch: {e1.shape} vs {e2.shape}")
    v1, s1, h1 = _hit_and_miss_volume(e1, draws, rng)
    v2, s2, h2 = _hit_and_miss_volume(e2, draws, rng)
    if h1 == 0 or h2 == 0:
        raise RuntimeError("no hits recorded; increase the draw count")
    ratio = v1 / v2
    stderr = ratio * math.sqrt((s1 / v1) ** 2 + (s2 / v2) ** 2)
    return VolumeRatioEstimate(ratio=ratio, stderr=stderr, hits1=h1, hits2=h2, draws=draws)


def quadric_boundary_2d(A: np.ndarray, B: np.ndarray, C: float | np.ndarray,
                        num_points: int = 256,
                        window: tuple[float, float, float, float] | None = None):
    """Boundary polylines of a planar quadric {z : z'Az + 2 B'z + c <= 0}.

    Returns a list of (k, 2) arrays.  Positive definite A gives one closed
    ellipse; a rank-one A gives the two boundary lines of a strip, clipped to
    ``window`` (xmin, xmax, ymin, ymax).
    """
    A = np.asarray(A, dtype=float).reshape(2, 2)
    b = np.asarray(B, dtype=float).reshape(2)
    c = float(np.asarray(C).reshape(()))
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    if w[0] > EIG_RTOL * max(w[-1], 1.0):
        zc = -np.linalg.solve(A, b)
        r2 = float(b @ np.linalg.solve(A, b)) - c
        if r2 <= 0:
            return []
        theta = np.linspace(0.0, 2.0 * np.pi, num_points)
        circle = np.stack([np.cos(theta), np.sin(theta)])
        pts = zc[:, None] + (V * (np.sqrt(r2 / w))) @ circle
        return [pts.T]
    if w[-1] <= EIG_RTOL:
        return []
    # strip: quadratic in the s1 = v1'z coordinate only
    v1 = V[:, -1]
    lam = w[-1]
    b1 = float(b @ v1)
    disc = b1 * b1 - lam * c
    if disc < 0:
        return []
    roots = np.array([(-b1 - math.sqrt(disc)) / lam, (-b1 + math.sqrt(disc)) / lam])
    if window is None:
        window = (-3.0, 3.0, -3.0, 3.0)
    xmin, xmax, ymin, ymax = window
    half = max(xmax - xmin, ymax - ymin)
    mid = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
    v2 = V[:, 0]
    t0 = float((mid - 0.0) @ v2)
    lines = []
    for s1 in roots:
        ts = np.linspace(t0 - half, t0 + half, num_points)
        lines.append(np.outer(np.ones_like(ts), s1 * v1) + np.outer(ts, v2))
    return lines
