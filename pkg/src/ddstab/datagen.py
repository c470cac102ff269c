"""Simulation of noisy discrete-time linear systems and data packaging.

State evolution is x(i+1) = A* x(i) + B* u(i) + d(i).  A trajectory of T
steps is packaged into the data matrices X0 (states 0..T-1), X1 (states
1..T) and U0 (inputs 0..T-1) together with the instantaneous disturbance
bound epsilon assumed at design time.  Every generated disturbance is
checked against |d|^2 <= epsilon at generation time.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

DATASET_SCHEMA = "dataset-v1"


@dataclass(frozen=True)
class LtiSystem:
    n: int
    m: int
    Astar: np.ndarray
    Bstar: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.Astar, dtype=float).reshape(self.n, self.n)
        B = np.asarray(self.Bstar, dtype=float).reshape(self.n, self.m)
        A.flags.writeable = False
        B.flags.writeable = False
        object.__setattr__(self, "Astar", A)
        object.__setattr__(self, "Bstar", B)


@dataclass(frozen=True)
class DisturbanceModel:
    """Bounded disturbance generator; kinds: zero, uniform-interval, uniform-ball.

    The interval kind draws uniformly on [-sqrt(eps), sqrt(eps)] and is only
    meaningful for scalar states; the ball kind draws uniformly on the
    Euclidean ball of radius sqrt(eps).
    """

    kind: str
    epsilon: float

    _KINDS = ("zero", "uniform-interval", "uniform-ball")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    @classmethod
    def zero(cls, epsilon: float = 0.0) -> "DisturbanceModel":
        return cls("zero", epsilon)

    @classmethod
    def uniform_interval(cls, epsilon: float) -> "DisturbanceModel":
        return cls("uniform-interval", epsilon)

    @classmethod
    def uniform_ball(cls, epsilon: float) -> "DisturbanceModel":
        return cls("uniform-ball", epsilon)

    def draw(self, dim: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "zero":
            d = np.zeros(dim)
        elif self.kind == "uniform-interval":
            if dim != 1:
                raise ValueError("uniform-interval disturbances require a scalar state")
            d = rng.uniform(-np.sqrt(self.epsilon), np.sqrt(self.epsilon), size=1)
        else:
            d = sample_uniform_ball(dim, self.epsilon, rng)
        if d @ d > self.epsilon + 1e-12:
            raise AssertionError("generated disturbance violates the instantaneous bound")
        return d


@dataclass(frozen=True)
class InputModel:
    """Input-sequence generator; kinds: explicit, uniform(a, b), gaussian."""

    kind: str
    sequence: np.ndarray | None = None
    low: float = 0.0
    high: float = 0.0

    @classmethod
    def explicit(cls, sequence) -> "InputModel":
        seq = np.atleast_2d(np.asarray(sequence, dtype=float))
        return cls("explicit", sequence=seq)

    @classmethod
    def uniform(cls, low: float, high: float) -> "InputModel":
        return cls("uniform", low=low, high=high)

    @classmethod
    def gaussian(cls) -> "InputModel":
        return cls("gaussian")

    def draw(self, i: int, dim: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "explicit":
            if self.sequence.shape[0] != dim:
                raise ValueError("explicit input sequence has the wrong row dimension")
            return self.sequence[:, i]
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=dim)
        if self.kind == "gaussian":
            return rng.standard_normal(dim)
        raise ValueError(f"unknown input kind {self.kind!r}")


@dataclass(frozen=True)
class DataSet:
    """Measured data matrices plus the instantaneous bound assumed at design time.

    Column i of X1 is the measured successor of column i of X0.  The energy
    bound is always derived as epsilon * T and never stored separately.
    """

    n: int
    m: int
    T: int
    X0: np.ndarray
    X1: np.ndarray
    U0: np.ndarray
    epsilon: float

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        for name, rows in (("X0", self.n), ("X1", self.n), ("U0", self.m)):
            M = np.asarray(getattr(self, name), dtype=float).reshape(rows, self.T)
            M.flags.writeable = False
            object.__setattr__(self, name, M)

    def prefix(self, T: int) -> "DataSet":
        """The dataset restricted to the first T samples."""
        if not 1 <= T <= self.T:
            raise ValueError(f"prefix length {T} out of range 1..{self.T}")
        return DataSet(self.n, self.m, T, self.X0[:, :T], self.X1[:, :T],
                       self.U0[:, :T], self.epsilon)

    def to_json(self) -> str:
        return json.dumps({
            "schema": DATASET_SCHEMA,
            "n": self.n, "m": self.m, "T": self.T, "epsilon": self.epsilon,
            "X0": self.X0.tolist(), "X1": self.X1.tolist(), "U0": self.U0.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "DataSet":
        obj = json.loads(text)
        if obj.get("schema") != DATASET_SCHEMA:
            raise ValueError(f"unexpected dataset schema {obj.get('schema')!r}")
        return cls(n=int(obj["n"]), m=int(obj["m"]), T=int(obj["T"]),
                   X0=np.array(obj["X0"]), X1=np.array(obj["X1"]),
                   U0=np.array(obj["U0"]), epsilon=float(obj["epsilon"]))

    def to_csv(self) -> str:
        """One row per time step: x(i), u(i), x(i+1)."""
        buf = io.StringIO()
        buf.write(f"# schema={DATASET_SCHEMA} n={self.n} m={self.m} T={self.T} "
                  f"epsilon={self.epsilon!r}\n")
        cols = ([f"x_{k}" for k in range(self.n)] + [f"u_{k}" for k in range(self.m)]
                + [f"xnext_{k}" for k in range(self.n)])
        buf.write(",".join(cols) + "\n")
        for i in range(self.T):
            row = np.concatenate([self.X0[:, i], self.U0[:, i], self.X1[:, i]])
            buf.write(",".join(format(v, ".17g") for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DataSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("# schema="):
            raise ValueError("missing dataset header line")
        meta = dict(tok.split("=", 1) for tok in lines[0][2:].split())
        if meta["schema"] != DATASET_SCHEMA:
            raise ValueError(f"unexpected dataset schema {meta['schema']!r}")
        n, m, T = int(meta["n"]), int(meta["m"]), int(meta["T"])
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]])
        if data.shape != (T, 2 * n + m):
            raise ValueError("dataset body does not match the declared dimensions")
        return cls(n=n, m=m, T=T, X0=data[:, :n].T, U0=data[:, n:n + m].T,
                   X1=data[:, n + m:].T, epsilon=float(meta["epsilon"]))


class SimulationTrace(NamedTuple):
    states: np.ndarray        # (n, T+1)
    inputs: np.ndarray        # (m, T)
    disturbances: np.ndarray  # (n, T)


def sample_uniform_ball(dim: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from {d : |d|^2 <= epsilon}: Gaussian direction times
    radius sqrt(epsilon) u^(1/dim), exact and rejection free."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    if epsilon == 0.0:
        return np.zeros(dim)
    g = rng.standard_normal(dim)
    nrm = np.linalg.norm(g)
    while nrm == 0.0:  # probability zero, but keep the draw well defined
        g = rng.standard_normal(dim)
        nrm = np.linalg.norm(g)
    radius = np.sqrt(epsilon) * rng.uniform() ** (1.0 / dim)
    return g * (radius / nrm)


def simulate(sys: LtiSystem, x0: np.ndarray, inputs: InputModel,
             disturbances: DisturbanceModel, T: int,
             rng: np.random.Generator) -> tuple[DataSet, SimulationTrace]:
    """Run the system forward for T steps and package the data matrices."""
    if T < 1:
        raise ValueError("T must be at least 1")
    x = np.asarray(x0, dtype=float).reshape(sys.n)
    states = np.zeros((sys.n, T + 1))
    us = np.zeros((sys.m, T))
    ds = np.zeros((sys.n, T))
    states[:, 0] = x
    for i in range(T):
        u = inputs.draw(i, sys.m, rng)
        d = disturbances.draw(sys.n, rng)
        x = sys.Astar @ x + sys.Bstar @ u + d
        us[:, i] = u
        ds[:, i] = d
        states[:, i + 1] = x
    ds_out = DataSet(n=sys.n, m=sys.m, T=T, X0=states[:, :T], X1=states[:, 1:],
                     U0=us, epsilon=disturbances.epsilon)
    return ds_out, SimulationTrace(states=states, inputs=us, disturbances=ds)


# reference systems for the numerical studies

_EXAMPLE1_INPUTS = (1.0, -1.0, 0.0)

_THIRD_ORDER_A = (
    (0.1274, 0.1431, 0.1974),
    (0.3619, 0.6292, 0.4153),
    (0.6972, 0.1574, 0.4111),
)
_THIRD_ORDER_B = (
    (0.6901, 0.9047),
    (0.4809, 0.6030),
    (0.8913, 0.1478),
)


def example1_system() -> LtiSystem:
    """Scalar reference system with A* = B* = 1/2."""
    return LtiSystem(n=1, m=1, Astar=[[0.5]], Bstar=[[0.5]])


def third_order_system() -> LtiSystem:
    """Three-state, two-input reference system (marginally unstable open loop)."""
    return LtiSystem(n=3, m=2, Astar=_THIRD_ORDER_A, Bstar=_THIRD_ORDER_B)


def example1_dataset(T: int) -> DataSet:
    """The exact noiseless scalar reference data for T in {1, 2, 3}, epsilon = 1."""
    if T not in (1, 2, 3):
        raise ValueError(f"T must be 1, 2 or 3, got {T}")
    sys = example1_system()
    ds, _ = simulate(sys, x0=[1.0], inputs=InputModel.explicit([_EXAMPLE1_INPUTS[:T]]),
                     disturbances=DisturbanceModel.zero(epsilon=1.0), T=T,
                     rng=np.random.default_rng(0))
    return ds


def scalar_study_dataset(T: int, rng: np.random.Generator) -> DataSet:
    """Scalar study data: the exact 3-sample prefix of the reference sequence,
    prolonged with inputs uniform on [-2, 2] and disturbances uniform on
    [-1, 1] (epsilon = 1)."""
    if T <= 3:
        return example1_dataset(T)
    sys = example1_system()
    head = example1_dataset(3)
    tail, _ = simulate(sys, x0=head.X1[:, -1], inputs=InputModel.uniform(-2.0, 2.0),
                       disturbances=DisturbanceModel.uniform_interval(1.0),
                       T=T - 3, rng=rng)
    return DataSet(n=1, m=1, T=T,
                   X0=np.hstack([head.X0, tail.X0]),
                   X1=np.hstack([head.X1, tail.X1]),
                   U0=np.hstack([head.U0, tail.U0]),
                   epsilon=1.0)


def third_order_dataset(T: int, epsilon: float, rng: np.random.Generator) -> DataSet:
    """Third-order study data: x(0) = 0, standard-normal inputs, disturbances
    uniform in the ball of squared radius epsilon."""
    sys = third_order_system()
    ds, _ = simulate(sys, x0=np.zeros(3), inputs=InputModel.gaussian(),
                     disturbances=DisturbanceModel.uniform_ball(epsilon), T=T, rng=rng)
    return ds
