"""LP-based branch-and-bound for the deployment MILP."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .lp import LinearProgram
from .simplex import Basis, BoundedSimplex

INT_TOL = 1e-6
FEAS_CHECK = 1e-7
GAP_EPS = 1e-9


@dataclass(frozen=True)
class SolveBudget:
    time_limit_s: float = 3600.0
    gap_target: float = 0.001
    node_limit: Optional[int] = None

    def __post_init__(self):
        if not self.time_limit_s > 0:
            raise ValueError("time_limit_s must be > 0")
        if not 0.0 <= self.gap_target < 1.0:
            raise ValueError("gap_target must be in [0, 1)")


@dataclass(frozen=True)
class TrajectoryPoint:
    elapsed_s: float
    nodes: int
    incumbent_g: float
    bound_g: float

    @property
    def gap(self) -> float:
        return relative_gap(self.incumbent_g, self.bound_g)


@dataclass
class SolveResult:
    status: str  # optimal | feasible_gap | infeasible | budget_no_incumbent
    x: Optional[np.ndarray]
    objective_g: float
    bound_g: float
    gap: float
    gap_trajectory: list = field(default_factory=list)
    nodes: int = 0
    elapsed_s: float = 0.0
    deployment: object = None
    allocation: object = None

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def relative_gap(incumbent: float, bound: float) -> float:
    if not np.isfinite(incumbent):
        return np.inf
    return max(0.0, (incumbent - bound) / max(abs(incumbent), GAP_EPS))


def is_integral(lp: LinearProgram, x: np.ndarray) -> bool:
    xi = x[lp.integer]
    return bool(np.all(np.abs(xi - np.rint(xi)) <= INT_TOL))


def accept_solution(lp: LinearProgram, x: Optional[np.ndarray]) -> Optional[np.ndarray]:
    """Round integer columns and return ``x`` if it is MILP-feasible."""
    if x is None:
        return None
    x = np.array(x, dtype=float)
    if not is_integral(lp, x):
        return None
    x[lp.integer] = np.rint(x[lp.integer])
    if lp.violation(x) > FEAS_CHECK:
        return None
    return x


def round_and_repair(lp: LinearProgram, x: np.ndarray, engine: Optional[BoundedSimplex] = None):
    """Ceil every fractional integer column, then re-solve the continuous part.

    Returns a MILP-feasible column vector or ``None``.
    """
    x = np.asarray(x, dtype=float)
    xi = x[lp.integer]
    if np.all(np.abs(xi - np.rint(xi)) <= INT_TOL):
        cand = accept_solution(lp, x)
        if cand is not None:
            return cand
    fixed = np.where(np.abs(xi - np.rint(xi)) <= INT_TOL, np.rint(xi), np.ceil(xi))
    lb = lp.lb.copy()
    ub = lp.ub.copy()
    fixed = np.minimum(np.maximum(fixed, lb[lp.integer]), ub[lp.integer])
    lb[lp.integer] = fixed
    ub[lp.integer] = fixed
    engine = engine or BoundedSimplex(lp)
    res = engine.solve(lb, ub)
    if not res.ok:
        return None
    return accept_solution(lp, res.x)


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)
    basis: Optional[Basis] = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def _most_fractional(lp: LinearProgram, x: np.ndarray) -> int:
    cols = np.flatnonzero(lp.integer)
    frac = x[cols] - np.floor(x[cols])
    score = np.minimum(frac, 1.0 - frac)
    score[score <= INT_TOL] = -1.0
    k = int(np.argmax(score))  # argmax returns the lowest index on ties
    return int(cols[k]) if score[k] > 0 else -1


def branch_and_bound(
    lp: LinearProgram,
    budget: SolveBudget = SolveBudget(),
    initial: Optional[np.ndarray] = None,
    heuristic: Optional[Callable] = None,
    heuristic_every: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> SolveResult:
    """Minimise ``lp`` over its integer columns.

    Nodes are explored by a depth-first dive from the root (up-branch first)
    followed by best-bound selection. Branching picks the most fractional
    integer column, lowest index on ties. The search stops at the gap target,
    the time or node limit, or when the tree is exhausted. Only the time
    limit depends on the wall clock; it truncates the search but never
    changes branching decisions.
    """
    t0 = clock()
    engine = BoundedSimplex(lp)
    counter = itertools.count()
    trajectory: list[TrajectoryPoint] = []
    state = {"inc": np.inf, "x": None, "bound": -np.inf, "nodes": 0}

    def elapsed():
        return clock() - t0

    def record():
        if state["x"] is None:
            return
        inc, bnd = state["inc"], min(state["bound"], state["inc"])
        if trajectory and trajectory[-1].incumbent_g == inc and trajectory[-1].bound_g == bnd:
            return
        trajectory.append(TrajectoryPoint(elapsed(), state["nodes"], inc, bnd))

    def offer(x):
        x = accept_solution(lp, x)
        if x is None:
            return False
        obj = lp.objective(x)
        if obj < state["inc"] - 1e-12 * max(1.0, abs(obj)):
            state["inc"], state["x"] = obj, x
            return True
        return False

    def finish(status):
        inc, x = state["inc"], state["x"]
        bound = min(state["bound"], inc) if x is not None else state["bound"]
        gap = relative_gap(inc, bound) if x is not None else np.inf
        if x is not None and status == "optimal":
            bound, gap = inc, 0.0
        if x is not None and (not trajectory or trajectory[-1].bound_g != bound):
            trajectory.append(TrajectoryPoint(elapsed(), state["nodes"], inc, bound))
        result = SolveResult(
            status=status,
            x=x,
            objective_g=inc if x is not None else np.nan,
            bound_g=bound,
            gap=gap,
            gap_trajectory=trajectory,
            nodes=state["nodes"],
            elapsed_s=elapsed(),
        )
        if x is not None and lp.meta is not None:
            from .problem import decode

            result.deployment, result.allocation = decode(lp, x)
        return result

    if initial is not None:
        offer(initial)

    heap: list[_Node] = []
    dive: Optional[_Node] = _Node(-np.inf, next(counter), lp.lb.copy(), lp.ub.copy())
    diving = True

    while True:
        open_bounds = ([heap[0].bound] if heap else []) + ([dive.bound] if dive else [])
        if not open_bounds:
            return finish("optimal" if state["x"] is not None else "infeasible")
        state["bound"] = max(state["bound"], min(min(open_bounds), state["inc"]))
        record()
        if state["x"] is not None:
            gap = relative_gap(state["inc"], state["bound"])
            if gap <= GAP_EPS:
                return finish("optimal")
            if gap <= budget.gap_target:
                return finish("feasible_gap")
        if elapsed() > budget.time_limit_s or (
            budget.node_limit is not None and state["nodes"] >= budget.node_limit
        ):
            return finish("feasible_gap" if state["x"] is not None else "budget_no_incumbent")

        if dive is not None:
            node, dive = dive, None
        else:
            node = heapq.heappop(heap)
        if state["x"] is not None and node.bound >= state["inc"] - _prune_tol(state["inc"]):
            continue

        res = engine.solve(node.lb, node.ub, basis=node.basis)
        state["nodes"] += 1
        if res.status == "unbounded":
            raise ValueError("LP relaxation is unbounded")
        if not res.ok:
            continue
        bound = max(node.bound, res.objective)
        if state["x"] is not None and bound >= state["inc"] - _prune_tol(state["inc"]):
            continue
        x = res.x
        if is_integral(lp, x):
            offer(x)
            continue
        lb_node, ub_node = node.lb, node.ub
        if heuristic is not None:
            if (state["nodes"] - 1) % max(1, heuristic_every) == 0:
                offer(heuristic(lp, x))
        elif state["nodes"] == 1:
            offer(round_and_repair(lp, x, engine))
        if state["x"] is not None and res.reduced_costs is not None:
            lb_node, ub_node = reduced_cost_fixing(
                lp, lb_node, ub_node, x, res.reduced_costs, state["inc"] - res.objective
            )
        j = _most_fractional(lp, x)
        v = x[j]
        down_ub = ub_node.copy()
        down_ub[j] = np.floor(v)
        up_lb = lb_node.copy()
        up_lb[j] = np.ceil(v)
        down = _Node(bound, next(counter), lb_node, down_ub, res.basis, node.depth + 1)
        up = _Node(bound, next(counter), up_lb, ub_node, res.basis, node.depth + 1)
        heapq.heappush(heap, down)
        if diving and state["x"] is None:
            dive = up
        else:
            diving = False
            heapq.heappush(heap, up)


def reduced_cost_fixing(lp: LinearProgram, lb, ub, x, reduced, slack):
    """Tighten integer bounds that no improving solution in the subtree can cross.

    Moving a nonbasic column ``k`` units off its bound raises the node's LP
    value by at least ``k * |reduced cost|``; with ``slack`` between the
    incumbent and the node bound, larger moves cannot improve. Returns new
    ``(lb, ub)`` arrays (the inputs when nothing changes).
    """
    if not np.isfinite(slack) or slack < 0:
        return lb, ub
    cols = np.flatnonzero(lp.integer)
    d = reduced[cols]
    at_lo = (d > 1e-9) & (np.abs(x[cols] - lb[cols]) <= INT_TOL)
    at_hi = (d < -1e-9) & (np.abs(x[cols] - ub[cols]) <= INT_TOL)
    if not (at_lo.any() or at_hi.any()):
        return lb, ub
    mag = np.where(at_lo | at_hi, np.abs(d), 1.0)
    reach = np.floor(slack / mag + 1e-6)
    new_ub = np.where(at_lo, np.minimum(ub[cols], lb[cols] + reach), ub[cols])
    new_lb = np.where(at_hi, np.maximum(lb[cols], ub[cols] - reach), lb[cols])
    if np.array_equal(new_ub, ub[cols]) and np.array_equal(new_lb, lb[cols]):
        return lb, ub
    lb, ub = lb.copy(), ub.copy()
    lb[cols], ub[cols] = new_lb, new_ub
    return lb, ub


def _prune_tol(incumbent: float) -> float:
    return 1e-9 * max(1.0, abs(incumbent))
