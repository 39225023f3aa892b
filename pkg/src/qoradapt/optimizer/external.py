"""Plug-in point for third-party MILP solvers.

A solver is any callable ``(LinearProgram, SolveBudget) -> SolveResult``.
``ScipyMilpSolver`` wraps SciPy's HiGHS interface. It is meant for
cross-checks and large instances. Nothing in the package requires it.
"""
from __future__ import annotations

import time
from typing import Callable, Protocol

import numpy as np

from .bnb import SolveBudget, SolveResult, TrajectoryPoint, accept_solution, relative_gap
from .lp import LinearProgram


class ExternalSolver(Protocol):
    def __call__(self, lp: LinearProgram, budget: SolveBudget) -> SolveResult: ...


class ScipyMilpSolver:
    name = "scipy-highs"

    def __call__(self, lp: LinearProgram, budget: SolveBudget) -> SolveResult:
        from scipy.optimize import Bounds, LinearConstraint, milp

        t0 = time.perf_counter()
        lo, hi = lp.row_bounds()
        options = {"time_limit": float(budget.time_limit_s), "mip_rel_gap": float(budget.gap_target)}
        if budget.node_limit is not None:
            options["node_limit"] = int(budget.node_limit)
        res = milp(
            lp.c,
            constraints=[LinearConstraint(lp.A, lo, hi)] if lp.num_rows else None,
            integrality=lp.integer.astype(int),
            bounds=Bounds(lp.lb, lp.ub),
            options=options,
        )
        elapsed = time.perf_counter() - t0
        x = accept_solution(lp, res.x) if res.x is not None else None
        if x is None:
            status = "infeasible" if res.status == 2 else "budget_no_incumbent"
            return SolveResult(status, None, np.nan, -np.inf, np.inf, nodes=0, elapsed_s=elapsed)
        obj = lp.objective(x)
        bound = getattr(res, "mip_dual_bound", None)
        bound = obj if bound is None or not np.isfinite(bound) else min(float(bound) + lp.offset, obj)
        gap = relative_gap(obj, bound)
        status = "optimal" if res.status == 0 and gap <= budget.gap_target + 1e-12 else "feasible_gap"
        out = SolveResult(
            status, x, obj, bound, gap,
            gap_trajectory=[TrajectoryPoint(elapsed, 0, obj, bound)],
            nodes=int(getattr(res, "mip_node_count", 0) or 0),
            elapsed_s=elapsed,
        )
        if lp.meta is not None:
            from .problem import decode

            out.deployment, out.allocation = decode(lp, x)
        return out


def solve_with(solver: Callable, lp: LinearProgram, budget: SolveBudget) -> SolveResult:
    """Run ``solver`` and sanity-check what it returns."""
    res = solver(lp, budget)
    if res.x is not None and lp.violation(res.x) > 1e-6:
        raise RuntimeError("external solver returned an infeasible point")
    return res
