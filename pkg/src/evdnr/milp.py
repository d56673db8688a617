"""Problem containers shared by the model builder and the solvers."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    LIMIT = "Limit"  # node/time limit hit; incumbent (if any) has an open gap


class SolverLimitError(RuntimeError):
    """Raised when an iteration limit stops the LP core before a verdict."""


@dataclass(frozen=True)
class VariableDef:
    kind: str
    index: tuple
    lower: float
    upper: float
    binary: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"{self.name}: lower {self.lower} > upper {self.upper}")
        if self.binary and (self.lower < 0 or self.upper > 1):
            raise ValueError(f"{self.name}: binary bounds must lie in [0, 1]")

    @property
    def name(self) -> str:
        return var_name(self.kind, self.index)


def var_name(kind: str, index: tuple) -> str:
    return f"{kind}({','.join(str(i) for i in index)})"


def parse_var_name(name: str) -> tuple[str, tuple]:
    kind, _, rest = name.partition("(")
    rest = rest.rstrip(")")
    index = tuple(int(p) for p in rest.split(",")) if rest else ()
    return kind, index


@dataclass(frozen=True)
class LinearConstraint:
    coeffs: tuple  # ((var position, value), ...)
    relation: Relation
    rhs: float
    tag: str

    def __post_init__(self):
        if not any(v != 0.0 for _, v in self.coeffs):
            raise ValueError(f"constraint {self.tag} has no nonzero coefficient")


@dataclass
class LpArrays:
    """Column/row arrays of a problem; ``A`` is CSR with one row per constraint."""
    c: np.ndarray
    A: sparse.csr_matrix
    sense: np.ndarray  # int8: -1 for <=, 0 for =, +1 for >=
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    integer: np.ndarray  # bool
    obj_offset: float = 0.0

    @property
    def shape(self):
        return self.A.shape

    def copy(self) -> "LpArrays":
        return LpArrays(self.c.copy(), self.A.copy(), self.sense.copy(), self.rhs.copy(),
                        self.lo.copy(), self.hi.copy(), self.integer.copy(), self.obj_offset)

    def residuals(self, x: np.ndarray) -> tuple[float, float]:
        """Worst constraint violation and worst bound violation of ``x``."""
        ax = self.A @ x if self.A.shape[0] else np.zeros(0)
        viol = np.zeros_like(ax)
        le = self.sense <= 0
        ge = self.sense >= 0
        viol[le] = np.maximum(viol[le], ax[le] - self.rhs[le])
        viol[ge] = np.maximum(viol[ge], self.rhs[ge] - ax[ge])
        row = float(viol.max()) if viol.size else 0.0
        col = float(max(np.max(self.lo - x, initial=0.0), np.max(x - self.hi, initial=0.0)))
        return row, col


@dataclass
class MilpProblem:
    variables: list
    constraints: list
    objective: list  # [(var position, coefficient)]
    big_m: dict = field(default_factory=dict)  # line id -> M
    name: str = "evdnr"

    def __post_init__(self):
        self._index = {(v.kind, tuple(v.index)): i for i, v in enumerate(self.variables)}

    def var(self, kind: str, *index) -> int:
        return self._index[(kind, tuple(index))]

    def has_var(self, kind: str, *index) -> bool:
        return (kind, tuple(index)) in self._index

    def positions(self, kind: str) -> list:
        return [i for i, v in enumerate(self.variables) if v.kind == kind]

    @property
    def n_binary(self) -> int:
        return sum(1 for v in self.variables if v.binary)

    @cached_property
    def arrays(self) -> LpArrays:
        n = len(self.variables)
        rows, cols, vals = [], [], []
        sense = np.empty(len(self.constraints), dtype=np.int8)
        rhs = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for j, a in con.coeffs:
                rows.append(r)
                cols.append(j)
                vals.append(a)
            sense[r] = {Relation.LE: -1, Relation.EQ: 0, Relation.GE: 1}[Relation(con.relation)]
            rhs[r] = con.rhs
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        A.sum_duplicates()
        c = np.zeros(n)
        for j, a in self.objective:
            c[j] += a
        lo = np.array([v.lower for v in self.variables], dtype=float)
        hi = np.array([v.upper for v in self.variables], dtype=float)
        integer = np.array([v.binary for v in self.variables], dtype=bool)
        return LpArrays(c, A, sense, rhs, lo, hi, integer)

    def relaxed(self) -> "MilpProblem":
        vs = [VariableDef(v.kind, v.index, v.lower, v.upper, False) for v in self.variables]
        return MilpProblem(vs, list(self.constraints), list(self.objective), dict(self.big_m), self.name)

    def objective_value(self, x) -> float:
        return float(sum(a * x[j] for j, a in self.objective))


@dataclass
class LpSolution:
    status: Status
    x: Optional[np.ndarray] = None
    objective: float = math.nan
    iterations: int = 0
    nodes: int = 0
    gap_open: bool = False
    bound: float = math.nan
    basis: Optional[tuple] = None  # warm-start payload (basic columns, at-upper flags)

    @property
    def optimal(self) -> bool:
        return self.status == Status.OPTIMAL

    def value(self, problem: MilpProblem, kind: str, *index) -> float:
        return float(self.x[problem.var(kind, *index)])


@dataclass(frozen=True)
class SolverConfig:
    big_m: Optional[float] = None  # None: per-line M = rating + angle spread / x
    feas_tol: float = 1e-7
    int_tol: float = 1e-6
    bess_binaries: str = "exact"  # exact | relaxed
    node_limit: int = 200_000
    branching: str = "hour-topology"  # hour-topology (falls back to most-fractional) | most-fractional
    time_limit: float = 3600.0
    lp_backend: str = "simplex"  # simplex | highs
    max_lp_iter: int = 200_000
    radiality: str = "loops"  # loops | count

    def __post_init__(self):
        if self.feas_tol <= 0 or self.int_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.bess_binaries not in ("exact", "relaxed"):
            raise ValueError("bess_binaries must be 'exact' or 'relaxed'")
        if self.big_m is not None and self.big_m <= 0:
            raise ValueError("big_m must be positive")
        if self.radiality not in ("loops", "count"):
            raise ValueError("radiality must be 'loops' or 'count'")
        if self.branching not in ("most-fractional", "hour-topology"):
            raise ValueError("branching must be 'most-fractional' or 'hour-topology'")
        if self.lp_backend not in ("simplex", "highs"):
            raise ValueError("lp_backend must be 'simplex' or 'highs'")
