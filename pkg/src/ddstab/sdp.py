"""Affine LMI feasibility and determinant-maximization problems.

Problems are stored solver-independently: a flat coordinate vector holds
scalar, rectangular and symmetric-matrix variables (symmetric ones in scaled
upper-triangular coordinates), and each LMI block is an affine map
F0 + sum_k x_k Fk with a definiteness sense.  Solving goes through cvxpy
with CLARABEL; determinant maximization uses the triangular-factorization
bound with a geometric-mean objective, so only semidefinite and second-order
cones are needed.  Every claimed solution is re-verified outside the solver
by direct eigenvalue computation, with residuals reported relative to each
block's magnitude.
"""

from __future__ import annotations

import io
import math
import time
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from cvxpy.atoms.affine.upper_tri import vec_to_upper_tri

DEFAULT_FEAS_TOL = 1e-7
DEFAULT_MAX_ITER = 200

_SQRT2 = math.sqrt(2.0)


class SolverFailure(RuntimeError):
    """The conic engine stopped without a usable certificate."""


@dataclass(frozen=True)
class _Var:
    name: str
    kind: str           # scalar | matrix | symmetric
    shape: tuple[int, int]
    offset: int
    size: int


class DecisionVector:
    """Layout of named variables inside one flat coordinate vector."""

    def __init__(self):
        self._vars: dict[str, _Var] = {}
        self._num = 0

    def _add(self, name: str, kind: str, shape: tuple[int, int], size: int) -> _Var:
        if name in self._vars:
            raise ValueError(f"variable {name!r} already declared")
        v = _Var(name=name, kind=kind, shape=shape, offset=self._num, size=size)
        self._vars[name] = v
        self._num += size
        return v

    def add_scalar(self, name: str) -> _Var:
        return self._add(name, "scalar", (1, 1), 1)

    def add_matrix(self, name: str, rows: int, cols: int) -> _Var:
        return self._add(name, "matrix", (rows, cols), rows * cols)

    def add_symmetric(self, name: str, dim: int) -> _Var:
        return self._add(name, "symmetric", (dim, dim), dim * (dim + 1) // 2)

    @property
    def num_coords(self) -> int:
        return self._num

    def __contains__(self, name: str) -> bool:
        return name in self._vars

    def info(self, name: str) -> _Var:
        return self._vars[name]

    def names(self):
        return list(self._vars)

    def basis(self, name: str) -> np.ndarray:
        """Per-coordinate coefficient matrices: stacking shape (size, rows, cols).

        The variable value is sum_k x_{offset+k} basis[k]; symmetric variables
        reproduce exact symmetry because each off-diagonal basis matrix carries
        both mirrored entries scaled by 1/sqrt(2).
        """
        v = self._vars[name]
        rows, cols = v.shape
        out = np.zeros((v.size, rows, cols))
        if v.kind == "scalar":
            out[0, 0, 0] = 1.0
        elif v.kind == "matrix":
            k = 0
            for i in range(rows):
                for j in range(cols):
                    out[k, i, j] = 1.0
                    k += 1
        else:
            k = 0
            for j in range(rows):
                for i in range(j + 1):
                    if i == j:
                        out[k, i, i] = 1.0
                    else:
                        out[k, i, j] = 1.0 / _SQRT2
                        out[k, j, i] = 1.0 / _SQRT2
                    k += 1
        return out

    def value(self, name: str, x: np.ndarray):
        """Extract a variable's value from the flat coordinate vector."""
        v = self._vars[name]
        seg = np.asarray(x)[v.offset:v.offset + v.size]
        if v.kind == "scalar":
            return float(seg[0])
        if v.kind == "matrix":
            return seg.reshape(v.shape)
        M = np.zeros(v.shape)
        k = 0
        for j in range(v.shape[0]):
            for i in range(j + 1):
                if i == j:
                    M[i, i] = seg[k]
                else:
                    M[i, j] = seg[k] / _SQRT2
                    M[j, i] = seg[k] / _SQRT2
                k += 1
        return M

    def set_value(self, name: str, x: np.ndarray, value) -> None:
        """Write a variable's value into the flat coordinate vector in place."""
        v = self._vars[name]
        if v.kind == "scalar":
            x[v.offset] = float(value)
            return
        value = np.asarray(value, dtype=float).reshape(v.shape)
        if v.kind == "matrix":
            x[v.offset:v.offset + v.size] = value.ravel()
            return
        k = v.offset
        for j in range(v.shape[0]):
            for i in range(j + 1):
                x[k] = value[i, i] if i == j else _SQRT2 * (value[i, j] + value[j, i]) / 2.0
                k += 1


@dataclass
class LmiBlock:
    """One affine matrix inequality F0 + sum_k x_k Fk (sense ``>=`` or ``<=`` 0)."""

    name: str
    dim: int
    F0: np.ndarray
    coeffs: np.ndarray  # (num_coords, dim, dim)
    sense: str = ">="

    def __post_init__(self):
        if self.sense not in (">=", "<="):
            raise ValueError("sense must be '>=' or '<='")
        if self.F0.shape != (self.dim, self.dim):
            raise ValueError("F0 dimension mismatch")
        if self.coeffs.shape[1:] != (self.dim, self.dim):
            raise ValueError("coefficient dimension mismatch")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        M = self.F0 + np.tensordot(np.asarray(x, dtype=float), self.coeffs, axes=1)
        return (M + M.T) / 2.0

    def oriented(self, x: np.ndarray) -> np.ndarray:
        """Block value flipped so that feasibility always means PSD."""
        M = self.evaluate(x)
        return M if self.sense == ">=" else -M

    def residual(self, x: np.ndarray) -> tuple[float, float]:
        """(absolute, relative) residual: the smallest eigenvalue of the
        oriented block, and the same divided by the block magnitude."""
        M = self.oriented(x)
        lam = float(np.linalg.eigvalsh(M)[0])
        scale = max(1.0, float(np.abs(M).max()))
        return lam, lam / scale


class BlockBuilder:
    """Assembles one LmiBlock over a row/column partition.

    Off-diagonal placements are mirrored automatically, so each block position
    is specified once (upper triangle).
    """

    def __init__(self, decision: DecisionVector, name: str, row_sizes: list[int],
                 sense: str = ">="):
        self.decision = decision
        self.name = name
        self.sense = sense
        self.offsets = np.concatenate([[0], np.cumsum(row_sizes)]).astype(int)
        self.dim = int(self.offsets[-1])
        self.F0 = np.zeros((self.dim, self.dim))
        self.coeffs = np.zeros((decision.num_coords, self.dim, self.dim))

    def _span(self, block: int, rows: int) -> slice:
        start = self.offsets[block]
        if self.offsets[block + 1] - start != rows:
            raise ValueError(f"block {block} has size {self.offsets[block+1]-start}, "
                             f"placed matrix has {rows} rows")
        return slice(start, start + rows)

    def add_const(self, r: int, c: int, M: np.ndarray) -> None:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        rs, cs = self._span(r, M.shape[0]), self._span(c, M.shape[1])
        self.F0[rs, cs] += M
        if r != c:
            self.F0[cs, rs] += M.T

    def add_matrix_var(self, r: int, c: int, name: str, coef: float = 1.0,
                       transpose: bool = False) -> None:
        v = self.decision.info(name)
        basis = self.decision.basis(name)
        if transpose:
            basis = basis.transpose(0, 2, 1)
        rs = self._span(r, basis.shape[1])
        cs = self._span(c, basis.shape[2])
        sl = slice(v.offset, v.offset + v.size)
        self.coeffs[sl, rs, cs] += coef * basis
        if r != c:
            self.coeffs[sl, cs, rs] += coef * basis.transpose(0, 2, 1)

    def add_scalar_var(self, r: int, c: int, name: str, M: np.ndarray) -> None:
        """Places M * x_name at block (r, c)."""
        v = self.decision.info(name)
        if v.kind != "scalar":
            raise ValueError(f"{name!r} is not a scalar variable")
        M = np.atleast_2d(np.asarray(M, dtype=float))
        rs, cs = self._span(r, M.shape[0]), self._span(c, M.shape[1])
        self.coeffs[v.offset, rs, cs] += M
        if r != c:
            self.coeffs[v.offset, cs, rs] += M.T

    def add_scalar_term(self, name: str, M: np.ndarray) -> None:
        """Places the full-dimension symmetric matrix M * x_name."""
        v = self.decision.info(name)
        if v.kind != "scalar":
            raise ValueError(f"{name!r} is not a scalar variable")
        self.coeffs[v.offset] += M

    def build(self) -> LmiBlock:
        return LmiBlock(name=self.name, dim=self.dim, F0=self.F0,
                        coeffs=self.coeffs, sense=self.sense)


@dataclass
class ConicProblem:
    decision: DecisionVector
    blocks: list[LmiBlock]
    nonneg: list[int] = field(default_factory=list)
    objective: tuple[str, str] | None = None  # ("maximize-logdet", varname)

    def validate(self) -> None:
        nc = self.decision.num_coords
        for blk in self.blocks:
            if blk.coeffs.shape[0] != nc:
                raise ValueError(f"block {blk.name!r} sized for a different decision vector")
        for idx in self.nonneg:
            if not 0 <= idx < nc:
                raise ValueError(f"nonnegativity index {idx} out of range")
        if self.objective is not None:
            kind, name = self.objective
            if kind != "maximize-logdet":
                raise ValueError(f"unknown objective kind {kind!r}")
            if name not in self.decision or self.decision.info(name).kind != "symmetric":
                raise ValueError(f"objective target {name!r} must be a symmetric variable")


@dataclass
class SolveReport:
    status: str                      # solved | infeasible | numerical-failure
    x: np.ndarray | None
    worst_residual: float | None     # relative to block magnitude
    worst_residual_abs: float | None
    objective_value: float | None
    iterations: int | None
    seconds: float
    feas_tol: float
    message: str = ""

    def value(self, problem: ConicProblem, name: str):
        if self.x is None:
            raise ValueError("no solution point available")
        return problem.decision.value(name, self.x)


def check_residuals(problem: ConicProblem, x: np.ndarray) -> tuple[float, float]:
    """(relative, absolute) worst residual over all blocks and sign constraints."""
    worst_rel = np.inf
    worst_abs = np.inf
    for blk in problem.blocks:
        lam, rel = blk.residual(x)
        worst_rel = min(worst_rel, rel)
        worst_abs = min(worst_abs, lam)
    if problem.nonneg:
        v = float(np.min(np.asarray(x)[problem.nonneg]))
        worst_rel = min(worst_rel, v)
        worst_abs = min(worst_abs, v)
    return worst_rel, worst_abs


def _cvxpy_constraints(problem: ConicProblem, x: cp.Variable) -> list:
    cons = []
    for blk in problem.blocks:
        F = blk.coeffs.reshape(blk.coeffs.shape[0], -1).T  # (dim^2, ncoords)
        expr = cp.reshape(F @ x + blk.F0.ravel(), (blk.dim, blk.dim), order="C")
        sym = (expr + expr.T) / 2.0
        cons.append(sym >> 0 if blk.sense == ">=" else sym << 0)
    if problem.nonneg:
        cons.append(x[np.asarray(problem.nonneg, dtype=int)] >= 0)
    return cons


_CANDIDATE = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}
_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE}


def _solve_quietly(cvx_problem: cp.Problem, max_iter: int) -> None:
    # low-accuracy solver terminations are re-judged by the external
    # eigenvalue re-check, so the advisory warning is noise here
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="Solution may be inaccurate")
        cvx_problem.solve(solver=cp.CLARABEL, max_iter=max_iter)


def _finish(problem: ConicProblem, cvx_problem: cp.Problem, x, t0: float,
            feas_tol: float, objective_of=None) -> SolveReport:
    seconds = time.perf_counter() - t0
    stats = cvx_problem.solver_stats
    iters = getattr(stats, "num_iters", None) if stats is not None else None
    status = cvx_problem.status
    if status in _INFEASIBLE:
        return SolveReport(status="infeasible", x=None, worst_residual=None,
                           worst_residual_abs=None, objective_value=None,
                           iterations=iters, seconds=seconds, feas_tol=feas_tol,
                           message=f"solver status {status}")
    if status in _CANDIDATE and x.value is not None:
        xv = np.asarray(x.value, dtype=float)
        rel, absr = check_residuals(problem, xv)
        if rel >= -feas_tol:
            obj = objective_of(xv) if objective_of is not None else None
            return SolveReport(status="solved", x=xv, worst_residual=rel,
                               worst_residual_abs=absr, objective_value=obj,
                               iterations=iters, seconds=seconds, feas_tol=feas_tol,
                               message=f"solver status {status}")
        return SolveReport(status="numerical-failure", x=xv, worst_residual=rel,
                           worst_residual_abs=absr, objective_value=None,
                           iterations=iters, seconds=seconds, feas_tol=feas_tol,
                           message=f"solver status {status}, residual {rel:.3g} "
                                   f"below -feas_tol")
    return SolveReport(status="numerical-failure", x=None, worst_residual=None,
                       worst_residual_abs=None, objective_value=None,
                       iterations=iters, seconds=seconds, feas_tol=feas_tol,
                       message=f"solver status {status}")


def solve_feasibility(problem: ConicProblem, feas_tol: float = DEFAULT_FEAS_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Find any point satisfying all blocks, or report infeasibility.

    Infeasibility comes from the interior-point dual certificate; a claimed
    solution is accepted only if the external eigenvalue re-check passes
    within feas_tol (relative to the block magnitudes).
    """
    problem.validate()
    x = cp.Variable(problem.decision.num_coords)
    cons = _cvxpy_constraints(problem, x)
    cvx_problem = cp.Problem(cp.Minimize(0), cons)
    t0 = time.perf_counter()
    try:
        _solve_quietly(cvx_problem, max_iter)
    except cp.error.SolverError as exc:
        return SolveReport(status="numerical-failure", x=None, worst_residual=None,
                           worst_residual_abs=None, objective_value=None,
                           iterations=None, seconds=time.perf_counter() - t0,
                           feas_tol=feas_tol, message=f"solver error: {exc}")
    return _finish(problem, cvx_problem, x, t0, feas_tol)


def solve_maxdet(problem: ConicProblem, feas_tol: float = DEFAULT_FEAS_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Maximize log det of the target symmetric variable subject to the blocks.

    The determinant is maximized through the triangular-factorization bound:
    det(M) >= prod(diag(D)) whenever [[diag(D), Z], [Z', M]] is positive
    semidefinite with Z upper triangular, so a geometric-mean objective over
    diag(D) needs no exponential cones.  The reported objective value is the
    log-determinant of the target at the returned point.
    """
    problem.validate()
    if problem.objective is None:
        raise ValueError("problem has no objective; use solve_feasibility")
    _, target = problem.objective
    v = problem.decision.info(target)
    d = v.shape[0]
    x = cp.Variable(problem.decision.num_coords)
    cons = _cvxpy_constraints(problem, x)
    basis = problem.decision.basis(target)
    Bmat = basis.reshape(v.size, -1).T  # (d^2, size)
    Mexpr = cp.reshape(Bmat @ x[v.offset:v.offset + v.size], (d, d), order="C")
    Msym = (Mexpr + Mexpr.T) / 2.0
    z = cp.Variable(d * (d + 1) // 2)
    Zt = vec_to_upper_tri(z, strict=False)
    diag = cp.diag(Zt)
    cons.append(cp.bmat([[cp.diag(diag), Zt], [Zt.T, Msym]]) >> 0)
    cvx_problem = cp.Problem(cp.Maximize(cp.geo_mean(diag)), cons)

    def objective_of(xv: np.ndarray) -> float:
        Mv = problem.decision.value(target, xv)
        sign, logdet = np.linalg.slogdet(Mv)
        return float(logdet) if sign > 0 else -np.inf

    t0 = time.perf_counter()
    try:
        _solve_quietly(cvx_problem, max_iter)
    except cp.error.SolverError as exc:
        return SolveReport(status="numerical-failure", x=None, worst_residual=None,
                           worst_residual_abs=None, objective_value=None,
                           iterations=None, seconds=time.perf_counter() - t0,
                           feas_tol=feas_tol, message=f"solver error: {exc}")
    if cvx_problem.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        return SolveReport(status="numerical-failure", x=None, worst_residual=None,
                           worst_residual_abs=None, objective_value=None,
                           iterations=None, seconds=time.perf_counter() - t0,
                           feas_tol=feas_tol, message="objective unbounded above")
    return _finish(problem, cvx_problem, x, t0, feas_tol, objective_of=objective_of)


def dump_problem(problem: ConicProblem, precision: int = 12) -> str:
    """Plain-text dump (dimension headers plus dense rows) for offline checks."""
    problem.validate()
    buf = io.StringIO()
    dec = problem.decision
    buf.write(f"conic-problem coords={dec.num_coords} blocks={len(problem.blocks)} "
              f"nonneg={len(problem.nonneg)}\n")
    for name in dec.names():
        v = dec.info(name)
        buf.write(f"var {v.name} {v.kind} shape={v.shape[0]}x{v.shape[1]} "
                  f"offset={v.offset} size={v.size}\n")
    if problem.objective is not None:
        buf.write(f"objective {problem.objective[0]} {problem.objective[1]}\n")
    else:
        buf.write("objective feasibility\n")
    if problem.nonneg:
        buf.write("nonneg " + " ".join(str(i) for i in problem.nonneg) + "\n")

    def write_matrix(tag: str, M: np.ndarray) -> None:
        buf.write(tag + "\n")
        for row in np.atleast_2d(M):
            buf.write(" ".join(format(v, f".{precision}g") for v in row) + "\n")

    for blk in problem.blocks:
        buf.write(f"block {blk.name} dim={blk.dim} sense={blk.sense}\n")
        write_matrix("F0", blk.F0)
        nz = np.flatnonzero(np.abs(blk.coeffs).reshape(blk.coeffs.shape[0], -1).max(axis=1))
        for k in nz:
            write_matrix(f"F[{k}]", blk.coeffs[k])
    return buf.getvalue()
