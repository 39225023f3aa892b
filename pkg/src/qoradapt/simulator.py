"""Perfect-foresight and online (multi-horizon) operation of a scenario.

The online loop runs a long-term solve every ``tau`` intervals over the rest
of the grid, using fresh forecasts, and a short-term solve every interval
over the next ``gamma`` intervals with allocations beyond that horizon held
at the current plan. The first interval of the short-term solution is
executed and becomes immutable history.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .emissions import emissions_series
from .forecast import ForecastProvider, PerfectProvider
from .optimizer.bnb import SolveBudget, SolveResult, branch_and_bound
from .optimizer.heuristics import StructuredHeuristic
from .optimizer.problem import build_problem, encode
from .qor import check_feasible, min_rolling_qor
from .scenario import (
    TIER1,
    TIER2,
    Allocation,
    Deployment,
    InfeasibleError,
    Scenario,
    minimal_deployment,
)

HEURISTIC_EVERY = 10
UNLIMITED_S = 1e9


class SolverError(RuntimeError):
    pass


@dataclass
class SolveRecord:
    interval: int
    kind: str  # long | short | fallback | upper_bound
    status: str
    objective_g: float
    bound_g: float
    gap: float
    nodes: int
    elapsed_s: float
    trajectory: list = field(default_factory=list, repr=False)


@dataclass
class SimulationTrajectory:
    requests: np.ndarray  # (I, U) realised
    carbon: np.ndarray  # (I,) realised
    deployment: np.ndarray  # (I, M, 2)
    allocation: np.ndarray  # (I, U, 2)
    emissions_g: np.ndarray  # (I,)
    solves: list = field(default_factory=list)

    @property
    def total_g(self) -> float:
        return float(self.emissions_g.sum())

    def __len__(self):
        return len(self.emissions_g)

    def min_rolling_qor(self, gamma: int) -> float:
        return min_rolling_qor(self.allocation, self.requests, gamma)

    def feasibility(self, scenario: Scenario):
        return check_feasible(Deployment(self.deployment), Allocation(self.allocation), scenario)


def make_trajectory(scenario: Scenario, deploy, alloc, solves=()) -> SimulationTrajectory:
    d = np.asarray(getattr(deploy, "values", deploy))
    a = np.asarray(getattr(alloc, "values", alloc), dtype=float)
    return SimulationTrajectory(
        requests=scenario.request_matrix.copy(),
        carbon=np.asarray(scenario.carbon.values, dtype=float).copy(),
        deployment=d.copy(),
        allocation=a.copy(),
        emissions_g=emissions_series(d, scenario),
        solves=list(solves),
    )


def solve_horizon(
    scenario: Scenario,
    start: int,
    end: int,
    budget: SolveBudget,
    history=None,
    future=None,
    requests=None,
    carbon=None,
    initial: Optional[tuple] = None,
    strengthen: bool = True,
    construct: bool = True,
) -> SolveResult:
    """Build and solve the deployment MILP over ``start..end``.

    ``initial`` is an optional ``(deploy, alloc)`` pair for the horizon,
    offered to branch-and-bound as a starting incumbent. ``construct``
    enables the sliding-window start heuristic.
    """
    lp = build_problem(
        scenario, start, end, history=history, future=future, requests=requests, carbon=carbon,
        strengthen=strengthen,
    )
    x0 = encode(lp, *initial) if initial is not None else None
    return branch_and_bound(
        lp, budget, initial=x0, heuristic=StructuredHeuristic(lp, construct=construct), heuristic_every=HEURISTIC_EVERY
    )


def _record(interval: int, kind: str, res: SolveResult) -> SolveRecord:
    return SolveRecord(
        interval, kind, res.status, res.objective_g, res.bound_g, res.gap, res.nodes,
        res.elapsed_s, list(res.gap_trajectory),
    )


def upper_bound_budget(scenario: Scenario) -> SolveBudget:
    b = scenario.budgets
    return SolveBudget(b.upper_bound_time_limit_s, b.gap_target, b.upper_bound_node_limit)


def run_upper_bound(
    scenario: Scenario,
    budget: Optional[SolveBudget] = None,
    strengthen: bool = True,
    initial: Optional[tuple] = None,
):
    """Solve the whole grid once with perfect knowledge of requests and carbon.

    Returns ``(SolveResult, SimulationTrajectory)``.
    """
    _require_machines(scenario)
    budget = budget or upper_bound_budget(scenario)
    res = solve_horizon(
        scenario, 0, scenario.num_intervals - 1, budget, initial=initial, strengthen=strengthen
    )
    if res.status == "infeasible":
        raise InfeasibleError("scenario admits no feasible deployment")
    if not res.has_incumbent:
        raise SolverError(f"no incumbent within budget ({res.status})")
    traj = make_trajectory(scenario, res.deployment, res.allocation, [_record(0, "upper_bound", res)])
    return res, traj


def _require_machines(scenario: Scenario):
    if not scenario.machines and np.any(scenario.request_matrix > 0):
        raise InfeasibleError("no machine types available for positive demand")


def fallback_allocation(scenario: Scenario, alpha: int, requests=None, carbon=None):
    """Everything at Tier 2 in interval ``alpha`` with the least-emission machines.

    Returns ``(deploy_row (M, 2), alloc_row (U, 2))``.
    """
    r = scenario.request_matrix[alpha] if requests is None else np.asarray(requests, dtype=float)
    c = scenario.carbon.values[alpha] if carbon is None else float(carbon)
    alloc = np.zeros((len(r), 2))
    alloc[:, TIER2] = r
    totals = alloc.sum(axis=0)
    deploy = minimal_deployment(totals, scenario.machines, c, scenario.grid.delta_hours, alpha)
    return deploy, alloc


def _fallback_plan(scenario: Scenario, start: int, r_est, c_est):
    I = scenario.num_intervals
    U, M = r_est.shape[1], len(scenario.machines)
    deploy = np.zeros((I, M, 2), dtype=np.int64)
    alloc = np.zeros((I, U, 2))
    for i in range(start, I):
        deploy[i], alloc[i] = fallback_allocation(scenario, i, r_est[i], c_est[i])
    return deploy, alloc


def _as_providers(providers, U: int) -> list:
    if isinstance(providers, (list, tuple)):
        if len(providers) != U:
            raise ValueError(f"{len(providers)} request providers for {U} user groups")
        return list(providers)
    if U != 1:
        raise ValueError("one request provider per user group is required")
    return [providers]


def _online_budgets(scenario: Scenario, deterministic: bool):
    b = scenario.budgets
    if deterministic:
        if b.long_node_limit is None or b.short_node_limit is None:
            raise ValueError("deterministic mode needs long and short node limits")
        return (
            SolveBudget(UNLIMITED_S, b.gap_target, b.long_node_limit),
            SolveBudget(UNLIMITED_S, b.gap_target, b.short_node_limit),
        )
    return (
        SolveBudget(b.long_time_limit_s, b.gap_target, b.long_node_limit),
        SolveBudget(b.short_time_limit_s, b.gap_target, b.short_node_limit),
    )


def run_online(
    scenario: Scenario,
    request_provider: Union[ForecastProvider, Sequence[ForecastProvider], None] = None,
    carbon_provider: Optional[ForecastProvider] = None,
    short_horizon: Optional[int] = None,
    deterministic: bool = False,
    strengthen: bool = False,
    log=None,
) -> SimulationTrajectory:
    """Multi-horizon online operation with forecasts.

    Providers default to perfect knowledge. ``short_horizon`` defaults to the
    validity period. With ``deterministic=True`` only node limits bound the
    solves, which makes the run reproducible bit for bit.

    Requests of the interval being executed are taken as observed; every
    later interval uses the forecasts issued at the last long-term step.
    Envelope rows (``strengthen``) only tighten bounds, which budget-limited
    online solves rarely use, so they are off by default.
    """
    _require_machines(scenario)
    I = scenario.num_intervals
    r_true = scenario.request_matrix
    c_true = np.asarray(scenario.carbon.values, dtype=float)
    U, M = r_true.shape[1], len(scenario.machines)
    req_providers = _as_providers(
        request_provider if request_provider is not None else [PerfectProvider(r_true[:, u]) for u in range(U)],
        U,
    )
    carbon_provider = carbon_provider or PerfectProvider(c_true)
    for p in req_providers + [carbon_provider]:
        if p.num_intervals < I:
            raise IndexError(f"provider covers {p.num_intervals} intervals, grid has {I}")
    tau = scenario.budgets.tau
    gamma = scenario.policy.validity_len
    horizon = gamma if short_horizon is None else int(short_horizon)
    if horizon < 1:
        raise ValueError("short horizon must be >= 1")
    long_budget, short_budget = _online_budgets(scenario, deterministic)

    committed_d = np.zeros((I, M, 2), dtype=np.int64)
    committed_a = np.zeros((I, U, 2))
    plan_d: Optional[np.ndarray] = None
    plan_a: Optional[np.ndarray] = None
    r_est = r_true.copy()
    c_est = c_true.copy()
    solves = []

    for alpha in range(I):
        if alpha % tau == 0:
            for u, p in enumerate(req_providers):
                r_est[alpha:, u] = p.forecast(alpha, I - alpha).values
            c_est[alpha:] = carbon_provider.forecast(alpha, I - alpha).values
            r_est[alpha] = r_true[alpha]
            init = None if plan_d is None else (plan_d[alpha:], plan_a[alpha:])
            res = solve_horizon(
                scenario, alpha, I - 1, long_budget, history=committed_a, requests=r_est,
                carbon=c_est, initial=init, strengthen=strengthen,
            )
            solves.append(_record(alpha, "long", res))
            if res.has_incumbent:
                if plan_d is None:
                    plan_d, plan_a = np.zeros((I, M, 2), dtype=np.int64), np.zeros((I, U, 2))
                plan_d[alpha:] = res.deployment.values
                plan_a[alpha:] = res.allocation.values
            elif plan_d is None:
                plan_d, plan_a = _fallback_plan(scenario, alpha, r_est, c_est)
        r_est[alpha] = r_true[alpha]

        end = min(alpha + horizon, I) - 1
        res = solve_horizon(
            scenario, alpha, end, short_budget, history=committed_a, future=plan_a,
            requests=r_est, carbon=c_est, initial=(plan_d[alpha : end + 1], plan_a[alpha : end + 1]),
            strengthen=strengthen, construct=False,
        )
        if res.has_incumbent:
            solves.append(_record(alpha, "short", res))
            d_row = res.deployment.values[0]
            a_row = res.allocation.values[0]
            plan_d[alpha : end + 1] = res.deployment.values
            plan_a[alpha : end + 1] = res.allocation.values
        else:
            t0 = time.perf_counter()
            d_row, a_row = fallback_allocation(scenario, alpha, r_true[alpha], c_est[alpha])
            solves.append(
                SolveRecord(alpha, "fallback", res.status, np.nan, np.nan, np.inf, res.nodes,
                            res.elapsed_s + time.perf_counter() - t0)
            )
            plan_d[alpha], plan_a[alpha] = d_row, a_row
        committed_d[alpha] = d_row
        committed_a[alpha] = a_row
        if log is not None:
            log(alpha, solves[-1])

    return make_trajectory(scenario, committed_d, committed_a, solves)
