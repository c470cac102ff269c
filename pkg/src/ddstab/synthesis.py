"""State-feedback synthesis over the data-consistency sets.

Two programs share one outer linear matrix inequality in (P, Y, beta), the
Schur-complement form of the robust decay condition
(A + BK) P (A + BK)' - P <= -beta I with Y = K P.  The energy-bound program
subtracts a single multiplier alpha times the aggregate data quadric; the
instantaneous-bound program subtracts one multiplier tau_i per sample.  A
feasible point yields the gain K = Y P^-1.  Because the per-sample quadrics
sum to the aggregate one, any energy-feasible point transfers to the
instantaneous program with tau_i = alpha for every i.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from ddstab.consistency import (
    ConsistencySets,
    Z_to_pairs,
    build,
    intersection_mask,
    is_bounded,
)
from ddstab.datagen import DataSet
from ddstab.ellipsoid import quadratic_to_center, sample_members
from ddstab.sdp import (
    DEFAULT_FEAS_TOL,
    BlockBuilder,
    ConicProblem,
    DecisionVector,
    SolveReport,
    solve_feasibility,
)


class UnboundedSet(ValueError):
    """Validation over the consistency set needs the set to be bounded."""


@dataclass(frozen=True)
class DesignSettings:
    delta: float | None = None          # strictness margin; None derives from data
    feas_tol: float = DEFAULT_FEAS_TOL  # relative residual acceptance
    max_iter: int = 200


def default_delta(ds: DataSet) -> float:
    return 1e-6 * max(1.0, float(np.linalg.norm(ds.X1, 2)))


@dataclass
class SynthesisResult:
    approach: str                     # energy | instantaneous
    status: str                       # solved | infeasible | numerical-failure
    P: np.ndarray | None
    Y: np.ndarray | None
    beta: float | None
    multipliers: np.ndarray | None    # [alpha] or [tau_0 .. tau_{T-1}]
    K: np.ndarray | None
    delta: float
    feas_tol: float
    seconds: float
    worst_residual: float | None

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def to_json(self) -> str:
        return json.dumps({
            "approach": self.approach,
            "status": self.status,
            "K": None if self.K is None else self.K.tolist(),
            "P": None if self.P is None else self.P.tolist(),
            "Y": None if self.Y is None else self.Y.tolist(),
            "beta": self.beta,
            "multipliers": None if self.multipliers is None else self.multipliers.tolist(),
            "delta": self.delta,
            "feas_tol": self.feas_tol,
            "seconds": self.seconds,
            "worst_residual": self.worst_residual,
        })


def _quadric_embedding(Cq: np.ndarray, Bq: np.ndarray, Aq: np.ndarray,
                       n: int, m: int) -> np.ndarray:
    """Coefficient matrix of one multiplier inside the outer LMI.

    Subtracting the data term N diag(eps I, -I) N' equals adding the quadric
    (C, B, A) embedded on the first n + (n+m) rows of the block.
    """
    d = 3 * n + m
    p = n + m
    E = np.zeros((d, d))
    E[:n, :n] = Cq
    E[n:n + p, :n] = Bq
    E[:n, n:n + p] = Bq.T
    E[n:n + p, n:n + p] = Aq
    return E


def _build_main_block(dec: DecisionVector, n: int, m: int) -> BlockBuilder:
    bb = BlockBuilder(dec, "main", [n, n, m, n], sense=">=")
    bb.add_matrix_var(0, 0, "P")
    bb.add_scalar_var(0, 0, "beta", -np.eye(n))
    bb.add_matrix_var(1, 1, "P", coef=-1.0)
    bb.add_matrix_var(1, 2, "Y", coef=-1.0, transpose=True)
    bb.add_matrix_var(2, 3, "Y")
    bb.add_matrix_var(3, 3, "P")
    return bb


def _margin_blocks(dec: DecisionVector, n: int, delta: float) -> list:
    pb = BlockBuilder(dec, "P-margin", [n])
    pb.add_matrix_var(0, 0, "P")
    pb.add_const(0, 0, -delta * np.eye(n))
    betab = BlockBuilder(dec, "beta-margin", [1])
    betab.add_scalar_var(0, 0, "beta", np.eye(1))
    betab.add_const(0, 0, -delta * np.eye(1))
    return [pb.build(), betab.build()]


def assemble_energy(ds: DataSet, delta: float | None = None) -> ConicProblem:
    """Energy-bound design LMI: one multiplier alpha on the aggregate quadric."""
    if delta is None:
        delta = default_delta(ds)
    n, m = ds.n, ds.m
    cs = build(ds)
    dec = DecisionVector()
    dec.add_symmetric("P", n)
    dec.add_matrix("Y", m, n)
    dec.add_scalar("beta")
    alpha = dec.add_scalar("alpha")
    bb = _build_main_block(dec, n, m)
    agg = cs.aggregate
    bb.add_scalar_term("alpha", _quadric_embedding(agg.CI, agg.BI, agg.AI, n, m))
    blocks = [bb.build()] + _margin_blocks(dec, n, delta)
    return ConicProblem(decision=dec, blocks=blocks, nonneg=[alpha.offset])


def assemble_instantaneous(ds: DataSet, delta: float | None = None) -> ConicProblem:
    """Instantaneous-bound design LMI: one multiplier per sample quadric."""
    if delta is None:
        delta = default_delta(ds)
    n, m = ds.n, ds.m
    cs = build(ds)
    dec = DecisionVector()
    dec.add_symmetric("P", n)
    dec.add_matrix("Y", m, n)
    dec.add_scalar("beta")
    taus = [dec.add_scalar(f"tau{i}") for i in range(ds.T)]
    bb = _build_main_block(dec, n, m)
    for i, s in enumerate(cs.samples):
        bb.add_scalar_term(f"tau{i}", _quadric_embedding(s.Ci, s.Bi, s.Ai, n, m))
    blocks = [bb.build()] + _margin_blocks(dec, n, delta)
    return ConicProblem(decision=dec, blocks=blocks, nonneg=[t.offset for t in taus])


def _extract(ds: DataSet, approach: str, problem: ConicProblem, report: SolveReport,
             delta: float, feas_tol: float, seconds: float) -> SynthesisResult:
    if report.status != "solved":
        return SynthesisResult(approach=approach, status=report.status, P=None, Y=None,
                               beta=None, multipliers=None, K=None, delta=delta,
                               feas_tol=feas_tol, seconds=seconds,
                               worst_residual=report.worst_residual)
    dec = problem.decision
    P = dec.value("P", report.x)
    Y = dec.value("Y", report.x)
    beta = dec.value("beta", report.x)
    if approach == "energy":
        mult = np.array([dec.value("alpha", report.x)])
    else:
        mult = np.array([dec.value(f"tau{i}", report.x) for i in range(ds.T)])
    K = Y @ np.linalg.inv(P)
    return SynthesisResult(approach=approach, status="solved", P=P, Y=Y, beta=beta,
                           multipliers=mult, K=K, delta=delta, feas_tol=feas_tol,
                           seconds=seconds, worst_residual=report.worst_residual)


def design(ds: DataSet, approach: str,
           settings: DesignSettings = DesignSettings()) -> SynthesisResult:
    """Assemble and solve one design program; K = Y P^-1 on success."""
    if approach not in ("energy", "instantaneous"):
        raise ValueError(f"unknown approach {approach!r}")
    delta = settings.delta if settings.delta is not None else default_delta(ds)
    t0 = time.perf_counter()
    if approach == "energy":
        problem = assemble_energy(ds, delta)
    else:
        problem = assemble_instantaneous(ds, delta)
    report = solve_feasibility(problem, feas_tol=settings.feas_tol,
                               max_iter=settings.max_iter)
    seconds = time.perf_counter() - t0
    return _extract(ds, approach, problem, report, delta, settings.feas_tol, seconds)


@dataclass(frozen=True)
class TransferReport:
    residual: float          # relative residual of the instantaneous block
    feas_tol: float

    @property
    def passed(self) -> bool:
        return self.residual >= -10.0 * self.feas_tol


def certificate_transfer(result: SynthesisResult, ds: DataSet) -> TransferReport:
    """Evaluate the instantaneous program at the energy solution with every
    tau_i set to alpha; the decomposition identity makes the point feasible."""
    if result.approach != "energy" or not result.solved:
        raise ValueError("certificate transfer needs a solved energy result")
    problem = assemble_instantaneous(ds, result.delta)
    x = np.zeros(problem.decision.num_coords)
    problem.decision.set_value("P", x, result.P)
    problem.decision.set_value("Y", x, result.Y)
    problem.decision.set_value("beta", x, result.beta)
    alpha = float(result.multipliers[0])
    for i in range(ds.T):
        problem.decision.set_value(f"tau{i}", x, alpha)
    worst_rel = min(blk.residual(x)[1] for blk in problem.blocks)
    if alpha < 0:
        worst_rel = min(worst_rel, alpha)
    return TransferReport(residual=worst_rel, feas_tol=result.feas_tol)


@dataclass
class GainValidation:
    max_rho_aggregate: float
    n_aggregate: int
    max_rho_intersection: float | None
    n_intersection: int
    proposals: int


def validate_gain(K: np.ndarray, cs: ConsistencySets, n_samples: int,
                  rng: np.random.Generator, max_proposals: int = 1_000_000) -> GainValidation:
    """Sampled verification of the closed loop over the consistency sets.

    Members of the aggregate set come from its center form; members of the
    intersection set come from rejection against the per-sample slacks.  When
    fewer than n_samples intersection members turn up within max_proposals
    proposals, the achieved count is reported rather than treated as failure.
    """
    if not is_bounded(cs):
        raise UnboundedSet("the aggregate consistency set is unbounded")
    K = np.asarray(K, dtype=float)
    n, m = cs.dataset.n, cs.dataset.m
    center = quadratic_to_center(cs.aggregate_ellipsoid())

    def rho_batch(Z: np.ndarray) -> np.ndarray:
        A_b, B_b = Z_to_pairs(Z, n, m)
        cl = A_b + B_b @ K
        return np.abs(np.linalg.eigvals(cl)).max(axis=1)

    max_rho_c = 0.0
    max_rho_i = None
    n_c = 0
    n_i = 0
    proposals = 0
    batch = max(1000, min(n_samples, 100_000))
    while proposals < max_proposals and (n_c < n_samples or n_i < n_samples):
        Z = sample_members(center, batch, rng)
        proposals += batch
        if n_c < n_samples:
            take = min(batch, n_samples - n_c)
            max_rho_c = max(max_rho_c, float(rho_batch(Z[:take]).max()))
            n_c += take
        inter = Z[intersection_mask(cs, Z)]
        if inter.shape[0]:
            take = inter[:max(0, n_samples - n_i)]
            if take.shape[0]:
                r = float(rho_batch(take).max())
                max_rho_i = r if max_rho_i is None else max(max_rho_i, r)
                n_i += take.shape[0]
    return GainValidation(max_rho_aggregate=max_rho_c, n_aggregate=n_c,
                          max_rho_intersection=max_rho_i, n_intersection=n_i,
                          proposals=proposals)
