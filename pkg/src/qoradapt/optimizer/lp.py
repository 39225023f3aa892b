"""Sparse linear program container shared by the LP and MILP engines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<", "=", ">"


@dataclass
class LinearProgram:
    """``min c @ x + offset`` s.t. ``A x (sense) rhs``, ``lb <= x <= ub``.

    ``integer`` flags integral columns. ``names`` maps columns to readable
    labels, ``row_kinds`` tags every row (e.g. ``"balance"``). ``meta`` carries
    problem-specific data used to decode solutions. ``start_at_upper`` marks
    columns the simplex should start at their upper bound; a good choice
    makes the slack basis primal feasible and skips phase 1.
    """

    c: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    names: list = field(default_factory=list)
    row_kinds: list = field(default_factory=list)
    offset: float = 0.0
    meta: Any = None
    start_at_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.senses = np.asarray(self.senses, dtype="<U1")
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        self.integer = np.asarray(self.integer, dtype=bool)
        if self.start_at_upper is not None:
            self.start_at_upper = np.asarray(self.start_at_upper, dtype=bool)
        self.validate()

    @property
    def num_cols(self) -> int:
        return len(self.c)

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def validate(self):
        n, m = self.num_cols, self.num_rows
        if self.A.shape[1] != n:
            raise ValueError(f"matrix has {self.A.shape[1]} columns, objective has {n}")
        for name, arr, size in (
            ("senses", self.senses, m),
            ("rhs", self.rhs, m),
            ("lb", self.lb, n),
            ("ub", self.ub, n),
            ("integer", self.integer, n),
        ):
            if len(arr) != size:
                raise ValueError(f"{name} has length {len(arr)}, expected {size}")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("variable bounds with lb > ub")
        if not np.all(np.isin(self.senses, (LE, EQ, GE))):
            raise ValueError("row senses must be one of '<', '=', '>'")

    def row_bounds(self):
        lo = np.where(self.senses == LE, -np.inf, self.rhs)
        hi = np.where(self.senses == GE, np.inf, self.rhs)
        return lo, hi

    def objective(self, x) -> float:
        return float(self.c @ x + self.offset)

    def violation(self, x, lb=None, ub=None) -> float:
        """Largest relative bound or row violation of ``x``."""
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        x = np.asarray(x, dtype=float)
        worst = 0.0
        bnd = np.maximum(1.0, np.abs(x))
        worst = max(worst, float(np.max(np.maximum(lb - x, 0) / bnd, initial=0.0)))
        worst = max(worst, float(np.max(np.maximum(x - ub, 0) / bnd, initial=0.0)))
        if self.num_rows:
            act = self.A @ x
            lo, hi = self.row_bounds()
            scale = np.maximum(1.0, abs(self.A) @ np.abs(x))
            worst = max(worst, float(np.max(np.maximum(lo - act, 0) / scale)))
            worst = max(worst, float(np.max(np.maximum(act - hi, 0) / scale)))
        return worst

    def relaxed(self) -> "LinearProgram":
        import dataclasses

        return dataclasses.replace(self, integer=np.zeros(self.num_cols, dtype=bool))


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | iteration_limit | failed
    x: Optional[np.ndarray]
    objective: float
    iterations: int = 0
    basis: Any = None
    reduced_costs: Optional[np.ndarray] = None  # per structural column, original units

    @property
    def ok(self) -> bool:
        return self.status == "optimal"
