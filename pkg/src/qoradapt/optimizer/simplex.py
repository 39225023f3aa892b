"""Bounded-variable revised primal simplex.

Rows ``lo <= A x <= hi`` are turned into equalities with one logical per
row, ``A x - s = 0``, so every variable carries a box (possibly infinite).
Phase 1 minimises the sum of bound infeasibilities of the basic variables
and phase 2 the objective; both run on the same basis. The basis is kept as
an LU factorisation plus an eta file and refactorised periodically. Dantzig
pricing with a Harris two-pass ratio test is the default; after a run of
degenerate pivots the engine switches to Bland's rule until progress resumes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .lp import LinearProgram, LPResult

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DENSE_MAX = 300
DEGENERATE_RUN = 40

BASIC, AT_LOWER, AT_UPPER, FREE = 0, 1, 2, 3


class SingularBasis(RuntimeError):
    pass


@dataclass
class Basis:
    head: np.ndarray
    status: np.ndarray

    def copy(self) -> "Basis":
        return Basis(self.head.copy(), self.status.copy())


class _Factor:
    def __init__(self, B: sp.csc_matrix):
        m = B.shape[0]
        self.etas: list = []
        if m <= DENSE_MAX:
            dense = B.toarray()
            lu, piv = sla.lu_factor(dense, check_finite=False)
            diag = np.abs(np.diag(lu))
            if m and diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise SingularBasis("dense basis is singular")
            self._lu = (lu, piv)
            self._solve = lambda v: sla.lu_solve(self._lu, v, check_finite=False)
            self._solve_t = lambda v: sla.lu_solve(self._lu, v, trans=1, check_finite=False)
        else:
            try:
                lu = splu(B, permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularBasis(str(exc)) from exc
            diag = np.abs(lu.U.diagonal())
            if diag.min() <= 1e-11 * max(1.0, diag.max()):
                raise SingularBasis("sparse basis is singular")
            self._solve = lu.solve
            self._solve_t = lambda v: lu.solve(v, trans="T")

    def ftran(self, v: np.ndarray) -> np.ndarray:
        w = self._solve(v)
        for r, a in self.etas:
            wr = w[r] / a[r]
            if wr != 0.0:
                w -= wr * a
            w[r] = wr
        return w

    def btran(self, v: np.ndarray) -> np.ndarray:
        w = np.array(v, dtype=float)
        for r, a in reversed(self.etas):
            w[r] = (w[r] - (a @ w - a[r] * w[r])) / a[r]
        return self._solve_t(w)


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def _scaling(A: sp.csr_matrix, lb: np.ndarray, ub: np.ndarray):
    """Power-of-two row and column factors.

    Columns with a finite box are scaled to roughly ``[0, 1]`` first, the
    rest so their largest entry is about 1, then every row is equilibrated
    in the max norm. Keeping the primal values near unit size is what makes
    the fixed dual tolerance meaningful: a reduced cost below tolerance can
    then only move the objective by a negligible amount.
    """
    m, n = A.shape
    col = np.ones(n)
    span = np.maximum(np.abs(np.where(np.isfinite(ub), ub, 0.0)), np.abs(np.where(np.isfinite(lb), lb, 0.0)))
    boxed = span > 0
    col[boxed] = _pow2(span[boxed])
    absA = abs(A).tocsc()
    free = ~boxed
    if free.any() and absA.nnz:
        cmax = absA.max(axis=0).toarray().ravel()
        pick = free & (cmax > 0)
        col[pick] = 1.0 / _pow2(cmax[pick])
    row = np.ones(m)
    if absA.nnz:
        rmax = (abs(A) @ sp.diags(col)).tocsr().max(axis=1).toarray().ravel()
        has = rmax > 0
        row[has] = 1.0 / _pow2(rmax[has])
    return row, col


class BoundedSimplex:
    """Reusable simplex engine for one constraint matrix.

    ``solve`` accepts per-call column bounds and an optional warm-start basis,
    which is what branch-and-bound needs.
    """

    def __init__(self, lp: LinearProgram, scale: bool = True):
        self.lp = lp
        m, n = lp.num_rows, lp.num_cols
        self.m, self.n = m, n
        if scale:
            self.rscale, self.cscale = _scaling(lp.A, lp.lb, lp.ub)
        else:
            self.rscale, self.cscale = np.ones(m), np.ones(n)
        As = sp.diags(self.rscale) @ lp.A @ sp.diags(self.cscale)
        self.M = sp.hstack([As, -sp.identity(m)], format="csc")
        self.MT = self.M.T.tocsr()
        c = lp.c * self.cscale
        self.cost_scale = 1.0 / max(1.0, float(np.max(np.abs(c), initial=0.0)))
        self.cost = np.concatenate([c * self.cost_scale, np.zeros(m)])
        lo, hi = lp.row_bounds()
        self.row_lo = lo * self.rscale
        self.row_hi = hi * self.rscale
        self._indptr = self.M.indptr
        self._indices = self.M.indices
        self._data = self.M.data

    # -- helpers ---------------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        s, e = self._indptr[j], self._indptr[j + 1]
        col[self._indices[s:e]] = self._data[s:e]
        return col

    def _initial_basis(self, L, U) -> Basis:
        m, n = self.m, self.n
        head = np.arange(n, n + m)
        status = np.empty(n + m, dtype=np.int8)
        status[n:] = BASIC
        status[:n] = np.where(
            np.isfinite(L[:n]), AT_LOWER, np.where(np.isfinite(U[:n]), AT_UPPER, FREE)
        )
        hint = self.lp.start_at_upper
        if hint is not None:
            status[:n][hint & np.isfinite(U[:n])] = AT_UPPER
        return Basis(head, status)

    @staticmethod
    def _place_nonbasic(status, L, U, x):
        nb = status != BASIC
        lower_ok = np.isfinite(L)
        upper_ok = np.isfinite(U)
        st = status.copy()
        st[nb & (st == AT_LOWER) & ~lower_ok] = AT_UPPER
        st[nb & (st == AT_UPPER) & ~upper_ok] = AT_LOWER
        st[nb & (st == FREE) & lower_ok] = AT_LOWER
        st[nb & (st == FREE) & ~lower_ok & upper_ok] = AT_UPPER
        st[nb & (st == AT_LOWER) & ~lower_ok] = FREE
        st[nb & (st == AT_UPPER) & ~upper_ok & ~lower_ok] = FREE
        x[nb & (st == AT_LOWER)] = L[nb & (st == AT_LOWER)]
        x[nb & (st == AT_UPPER)] = U[nb & (st == AT_UPPER)]
        x[nb & (st == FREE)] = 0.0
        return st

    def _recompute_basics(self, factor: _Factor, head, x):
        xn = x.copy()
        xn[head] = 0.0
        x[head] = factor.ftran(-(self.M @ xn))

    # -- main entry ------------------------------------------------------
    def solve(
        self,
        lb: Optional[np.ndarray] = None,
        ub: Optional[np.ndarray] = None,
        basis: Optional[Basis] = None,
        max_iter: Optional[int] = None,
    ) -> LPResult:
        lp = self.lp
        m, n = self.m, self.n
        lb = lp.lb if lb is None else np.asarray(lb, dtype=float)
        ub = lp.ub if ub is None else np.asarray(ub, dtype=float)
        if np.any(lb > ub + 1e-12):
            return LPResult("infeasible", None, np.inf)
        L = np.concatenate([lb / self.cscale, self.row_lo])
        U = np.concatenate([ub / self.cscale, self.row_hi])
        if max_iter is None:
            max_iter = 50 * (m + n) + 1000
        if m == 0:
            return self._solve_unconstrained(L, U)

        if basis is None or len(basis.head) != m:
            basis = self._initial_basis(L, U)
        else:
            basis = basis.copy()
        head, status = basis.head, basis.status
        x = np.zeros(n + m)
        status[:] = self._place_nonbasic(status, L, U, x)
        status[head] = BASIC

        try:
            factor = _Factor(self.M[:, head])
        except SingularBasis:
            basis = self._initial_basis(L, U)
            head, status = basis.head, basis.status
            status[:] = self._place_nonbasic(status, L, U, x)
            factor = _Factor(self.M[:, head])
        self._recompute_basics(factor, head, x)

        it = 0
        degenerate = 0
        bland = False
        rechecks = 0
        cost = self.cost
        fixed = L == U
        while True:
            if it >= max_iter:
                return self._result("iteration_limit", x, it, head, status)
            if len(factor.etas) >= REFACTOR_EVERY:
                try:
                    factor = _Factor(self.M[:, head])
                except SingularBasis:
                    return self._result("failed", x, it, head, status)
                self._recompute_basics(factor, head, x)

            xb = x[head]
            lo_b, hi_b = L[head], U[head]
            tol_b = FEAS_TOL * np.maximum(1.0, np.abs(xb))
            below = xb < lo_b - tol_b
            above = xb > hi_b + tol_b
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = factor.btran(cb)
                d = -(self.MT @ y)
            else:
                y = factor.btran(cost[head])
                d = cost - self.MT @ y
            d[head] = 0.0

            elig = (
                ((status == AT_LOWER) & (d < -OPT_TOL))
                | ((status == AT_UPPER) & (d > OPT_TOL))
                | ((status == FREE) & (np.abs(d) > OPT_TOL))
            ) & ~fixed
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                # confirm with a fresh factorisation before declaring the end
                if factor.etas and rechecks < 3:
                    rechecks += 1
                    try:
                        factor = _Factor(self.M[:, head])
                    except SingularBasis:
                        return self._result("failed", x, it, head, status)
                    self._recompute_basics(factor, head, x)
                    continue
                if phase1:
                    return self._result("infeasible", x, it, head, status)
                return self._result("optimal", x, it, head, status, d)
            rechecks = 0
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0

            alpha = factor.ftran(self._column(q))
            delta = -direction * alpha  # change of basic values per unit step
            t, r, bound_hit = self._ratio_test(xb, lo_b, hi_b, delta, below, above, phase1, bland, head)
            span = U[q] - L[q]
            if span < t:
                t, r = span, -1
            if not np.isfinite(t):
                if phase1:
                    return self._result("failed", x, it, head, status)
                return self._result("unbounded", x, it, head, status)

            it += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate > DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

            if t > 0:
                x[head] = xb + t * delta
                x[q] += direction * t
            if r < 0:
                status[q] = AT_UPPER if direction > 0 else AT_LOWER
                x[q] = U[q] if direction > 0 else L[q]
                continue
            leaving = head[r]
            x[leaving] = bound_hit
            status[leaving] = AT_LOWER if bound_hit == L[leaving] else AT_UPPER
            if not np.isfinite(bound_hit):
                status[leaving] = FREE
                x[leaving] = 0.0
            head[r] = q
            status[q] = BASIC
            if abs(alpha[r]) < 1e-11:
                try:
                    factor = _Factor(self.M[:, head])
                except SingularBasis:
                    return self._result("failed", x, it, head, status)
                self._recompute_basics(factor, head, x)
            else:
                factor.etas.append((r, alpha))

    def _ratio_test(self, xb, lo, hi, delta, below, above, phase1, bland, head):
        """Harris two-pass ratio test; returns (step, row, bound reached)."""
        dec = delta < -PIVOT_TOL
        inc = delta > PIVOT_TOL
        feas = ~(below | above)
        tol = FEAS_TOL * np.maximum(1.0, np.abs(xb))
        # target bound per basic variable in the direction of motion
        target = np.full(len(xb), np.nan)
        relaxed = np.full(len(xb), np.inf)
        exact = np.full(len(xb), np.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            m1 = dec & feas & np.isfinite(lo)
            target[m1] = lo[m1]
            relaxed[m1] = (xb[m1] - lo[m1] + tol[m1]) / -delta[m1]
            exact[m1] = (xb[m1] - lo[m1]) / -delta[m1]
            m2 = inc & feas & np.isfinite(hi)
            target[m2] = hi[m2]
            relaxed[m2] = (hi[m2] - xb[m2] + tol[m2]) / delta[m2]
            exact[m2] = (hi[m2] - xb[m2]) / delta[m2]
            if phase1:
                # infeasible variables stop when they reach the violated bound
                m3 = dec & above
                target[m3] = hi[m3]
                relaxed[m3] = (xb[m3] - hi[m3]) / -delta[m3]
                exact[m3] = relaxed[m3]
                m4 = inc & below
                target[m4] = lo[m4]
                relaxed[m4] = (lo[m4] - xb[m4]) / delta[m4]
                exact[m4] = relaxed[m4]
        exact = np.maximum(exact, 0.0)
        tmax = relaxed.min() if len(relaxed) else np.inf
        if not np.isfinite(tmax):
            return np.inf, -1, np.nan
        cands = np.flatnonzero(exact <= tmax)
        if bland:
            r = int(cands[np.argmin(head[cands])])
        else:
            r = int(cands[np.argmax(np.abs(delta[cands]))])
        return float(exact[r]), r, float(target[r])

    def _solve_unconstrained(self, L, U) -> LPResult:
        n = self.n
        c = self.cost[:n]
        x = np.where(c > 0, L[:n], np.where(c < 0, U[:n], np.where(np.isfinite(L[:n]), L[:n], 0.0)))
        if not np.all(np.isfinite(x)):
            return LPResult("unbounded", None, -np.inf)
        xs = x * self.cscale
        return LPResult("optimal", xs, self.lp.objective(xs), 0, None)

    def _result(self, status, x, it, head, st, d=None) -> LPResult:
        basis = Basis(head.copy(), st.copy())
        if status != "optimal":
            obj = np.inf if status == "infeasible" else -np.inf if status == "unbounded" else np.nan
            return LPResult(status, None, obj, it, basis)
        xs = x[: self.n] * self.cscale
        # snap to column bounds, then verify on the original rows
        xs = np.minimum(np.maximum(xs, self.lp.lb), self.lp.ub)
        rc = None if d is None else d[: self.n] / (self.cost_scale * self.cscale)
        return LPResult("optimal", xs, self.lp.objective(xs), it, basis, rc)


def solve_lp(lp: LinearProgram, engine: str = "simplex", basis: Optional[Basis] = None) -> LPResult:
    """Solve the LP relaxation of ``lp`` (integrality flags are ignored).

    ``engine="simplex"`` runs the in-repo bounded simplex; ``engine="highs"``
    delegates to SciPy's HiGHS for comparison and large instances.
    """
    if engine == "highs":
        return _solve_highs(lp)
    if engine != "simplex":
        raise ValueError(f"unknown LP engine {engine!r}")
    result = BoundedSimplex(lp).solve(basis=basis)
    if result.status == "optimal" and lp.violation(result.x) > 1e-6:
        return LPResult("failed", None, np.nan, result.iterations, result.basis)
    return result


def _solve_highs(lp: LinearProgram) -> LPResult:
    from scipy.optimize import linprog

    lo, hi = lp.row_bounds()
    A = lp.A
    ub_rows = np.isfinite(hi) & (lo != hi)
    lb_rows = np.isfinite(lo) & (lo != hi)
    eq_rows = lo == hi
    A_ub = sp.vstack([A[ub_rows], -A[lb_rows]]) if (ub_rows.any() or lb_rows.any()) else None
    b_ub = np.concatenate([hi[ub_rows], -lo[lb_rows]]) if A_ub is not None else None
    res = linprog(
        lp.c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A[eq_rows] if eq_rows.any() else None,
        b_eq=lo[eq_rows] if eq_rows.any() else None,
        bounds=np.column_stack([lp.lb, lp.ub]),
        method="highs",
    )
    if res.status == 0:
        return LPResult("optimal", res.x, lp.objective(res.x), int(res.nit))
    status = {2: "infeasible", 3: "unbounded", 1: "iteration_limit"}.get(res.status, "failed")
    return LPResult(status, None, np.nan, int(getattr(res, "nit", 0)))
