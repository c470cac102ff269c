"""Minimum-size matrix-ellipsoid cover of the intersection set.

The cover is parametrized in quadratic form (Abar, Bbar, Cbar) with the
normalization Cbar = Bbar' Abar^-1 Bbar - I, which removes the scale freedom
of the representation and makes the size equal to det(Abar)^(-n/2).  The
containment of every per-sample quadric is imposed through nonnegative
multipliers and rewritten by Schur complement into one linear matrix
inequality, and the size is minimized through a determinant-maximization
program on Abar.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from ddstab.consistency import ConsistencySets, intersection_mask, is_bounded
from ddstab.ellipsoid import (
    MatrixShape,
    QuadraticFormEllipsoid,
    membership_many,
    quadratic_to_center,
    sample_members,
    size,
)
from ddstab.sdp import (
    DEFAULT_FEAS_TOL,
    BlockBuilder,
    ConicProblem,
    DecisionVector,
    SolverFailure,
    solve_maxdet,
)


class InfeasibleContainment(RuntimeError):
    """No bounded ellipsoidal cover exists under the multiplier relaxation,
    or the data are not rich enough to bound the intersection set."""


@dataclass(frozen=True)
class OverapproxSettings:
    feas_tol: float = DEFAULT_FEAS_TOL
    max_iter: int = 200
    delta_scale: float = 1e-8  # margin on Abar relative to the data trace scale


@dataclass
class OverapproxResult:
    Abar: np.ndarray
    Bbar: np.ndarray
    tau: np.ndarray
    n: int
    m: int
    status: str
    seconds: float
    worst_residual: float
    delta: float

    @property
    def Cbar(self) -> np.ndarray:
        C = self.Bbar.T @ np.linalg.solve(self.Abar, self.Bbar) - np.eye(self.n)
        return (C + C.T) / 2.0

    @property
    def size(self) -> float:
        sign, logdet = np.linalg.slogdet(self.Abar)
        if sign <= 0:
            raise ValueError("Abar must be positive definite")
        return float(np.exp(-0.5 * self.n * logdet))

    def to_ellipsoid(self) -> QuadraticFormEllipsoid:
        shape = MatrixShape(p=self.n + self.m, q=self.n)
        return QuadraticFormEllipsoid(shape=shape, A=self.Abar, B=self.Bbar, C=self.Cbar)

    def to_json(self) -> str:
        return json.dumps({
            "Abar": self.Abar.tolist(),
            "Bbar": self.Bbar.tolist(),
            "tau": self.tau.tolist(),
            "n": self.n, "m": self.m,
            "status": self.status,
            "size": self.size,
            "seconds": self.seconds,
            "worst_residual": self.worst_residual,
            "delta": self.delta,
        })


def _assemble(cs: ConsistencySets, delta: float) -> tuple[ConicProblem, np.ndarray]:
    """Containment program; per-sample quadrics are rescaled to unit Frobenius
    norm (the scale moves into the multipliers) to keep the blocks balanced."""
    n, m, T = cs.dataset.n, cs.dataset.m, cs.dataset.T
    p = n + m
    dec = DecisionVector()
    dec.add_symmetric("Abar", p)
    dec.add_matrix("Bbar", p, n)
    taus = [dec.add_scalar(f"tau{i}") for i in range(T)]

    bb = BlockBuilder(dec, "containment", [n, p, p], sense="<=")
    bb.add_const(0, 0, -np.eye(n))
    bb.add_matrix_var(0, 1, "Bbar", transpose=True)
    bb.add_matrix_var(0, 2, "Bbar", transpose=True)
    bb.add_matrix_var(1, 1, "Abar")
    bb.add_matrix_var(2, 2, "Abar", coef=-1.0)
    scales = np.ones(T)
    for i, s in enumerate(cs.samples):
        M = np.zeros((n + 2 * p, n + 2 * p))
        M[:n, :n] = s.Ci
        M[n:n + p, :n] = s.Bi
        M[:n, n:n + p] = s.Bi.T
        M[n:n + p, n:n + p] = s.Ai
        scales[i] = max(1.0, np.linalg.norm(M, "fro"))
        bb.add_scalar_term(f"tau{i}", -M / scales[i])

    margin = BlockBuilder(dec, "Abar-margin", [p])
    margin.add_matrix_var(0, 0, "Abar")
    margin.add_const(0, 0, -delta * np.eye(p))

    problem = ConicProblem(decision=dec, blocks=[bb.build(), margin.build()],
                           nonneg=[t.offset for t in taus],
                           objective=("maximize-logdet", "Abar"))
    return problem, scales


def compute_overapprox(cs: ConsistencySets,
                       settings: OverapproxSettings = OverapproxSettings()) -> OverapproxResult:
    """Solve the minimum-size cover program for the intersection set.

    Refuses to run when the aggregate set is unbounded (the intersection has
    no bounded ellipsoidal cover certifiable from such data)."""
    if not is_bounded(cs):
        raise InfeasibleContainment(
            "data are not persistently exciting; the consistency set is unbounded")
    n, m = cs.dataset.n, cs.dataset.m
    trace_scale = max(1.0, float(np.trace(cs.aggregate.AI)) / (n + m))
    delta = settings.delta_scale * trace_scale
    problem, scales = _assemble(cs, delta)
    t0 = time.perf_counter()
    report = solve_maxdet(problem, feas_tol=settings.feas_tol, max_iter=settings.max_iter)
    seconds = time.perf_counter() - t0
    if report.status == "infeasible":
        raise InfeasibleContainment("the containment program is infeasible")
    if report.status != "solved":
        raise SolverFailure(f"over-approximation solve failed: {report.message}")
    dec = problem.decision
    Abar = dec.value("Abar", report.x)
    Bbar = dec.value("Bbar", report.x)
    tau = np.array([dec.value(f"tau{i}", report.x) for i in range(cs.dataset.T)]) / scales
    return OverapproxResult(Abar=Abar, Bbar=Bbar, tau=np.maximum(tau, 0.0),
                            n=n, m=m, status="solved", seconds=seconds,
                            worst_residual=report.worst_residual, delta=delta)


def containment_check(result: OverapproxResult, cs: ConsistencySets, n_samples: int,
                      rng: np.random.Generator, slack_tol: float = 1e-7) -> int:
    """Count sampled members of the intersection set that fall outside the cover.

    Candidates are drawn from the aggregate set's center form and filtered by
    the per-sample slacks; every survivor must belong to the cover within
    slack_tol.  Returns the number of violations (expected zero)."""
    if n_samples <= 0:
        return 0
    center = quadratic_to_center(cs.aggregate_ellipsoid())
    cover = result.to_ellipsoid()
    violations = 0
    remaining = n_samples
    while remaining > 0:
        k = min(remaining, 100_000)
        Z = sample_members(center, k, rng)
        inter = Z[intersection_mask(cs, Z)]
        if inter.shape[0]:
            slacks = membership_many(cover, inter)
            violations += int(np.count_nonzero(slacks < -slack_tol))
        remaining -= k
    return violations


def size_ratio(cs: ConsistencySets, result: OverapproxResult) -> float:
    """size(aggregate set) / size(cover); both sets share the same shape, so
    the ratio equals the true volume ratio."""
    return size(cs.aggregate_ellipsoid()) / result.size
