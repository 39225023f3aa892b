"""Exhaustive reference solver for toy instances.

For a fixed integer deployment the allocation question has a closed form.
Interval ``i`` can route any Tier-2 load in
``[max(0, R_i - cap1_i), min(R_i, cap2_i)]`` (user groups split freely), and
pushing every interval to its upper end maximises every window sum at once.
So a deployment is feasible iff each interval's range is non-empty and the
windows hold at the upper ends. The enumeration therefore needs no LP engine
and shares no code with branch-and-bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..scenario import TIER1, TIER2, Allocation, Deployment, Scenario

MAX_SEARCH_SPACE = 10_000_000
_TOL = 1e-9


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    status: str  # optimal | infeasible
    objective_g: float
    deployment: Optional[Deployment]
    allocation: Optional[Allocation]
    search_space: int


def search_space_size(scenario: Scenario, start: int = 0, end: Optional[int] = None) -> int:
    end = scenario.num_intervals - 1 if end is None else end
    H = end - start + 1
    cap = scenario.capacity_matrix()
    if cap.size == 0:
        return 1
    peak = scenario.request_matrix[start : end + 1].sum(axis=1).max(initial=0.0)
    d_max = np.ceil(peak / cap - 1e-12).astype(int) + 1
    per_interval = int(np.prod(d_max + 1))
    return per_interval**H


def _interval_candidates(total, capacity, costs, d_max):
    """Feasible deployments of one interval reduced to ``(x2_max, cost, d)``.

    Only the Tier-2 ceiling and the cost of a deployment matter to the
    windows, so among deployments with equal ceiling the cheapest is kept.
    """
    M = capacity.shape[0]
    if M == 0:
        if total > _TOL:
            return None
        return np.array([0.0]), np.array([0.0]), np.zeros((1, 0, 2), dtype=np.int64)
    grid = np.array(list(itertools.product(*(range(int(v) + 1) for v in d_max.ravel()))))
    d = grid.reshape(-1, M, 2)
    cap1 = (d[:, :, TIER1] * capacity[:, TIER1]).sum(axis=1)
    cap2 = (d[:, :, TIER2] * capacity[:, TIER2]).sum(axis=1)
    cost = (d * costs).sum(axis=(1, 2))
    lo = np.maximum(0.0, total - cap1)
    hi = np.minimum(total, cap2)
    ok = lo <= hi + _TOL * max(1.0, total)
    if not ok.any():
        return None
    d, hi, cost = d[ok], hi[ok], cost[ok]
    order = np.lexsort((cost, hi))
    hi, cost, d = hi[order], cost[order], d[order]
    first = np.r_[True, np.diff(hi) > 0]
    return hi[first], cost[first], d[first]


def brute_force_oracle(
    scenario: Scenario, start: int = 0, end: Optional[int] = None
) -> OracleResult:
    """Exact optimum over ``start..end`` treated as a stand-alone grid.

    Only windows lying inside the horizon are enforced. Refuses with
    ``SearchSpaceTooLarge`` when the raw deployment space exceeds
    ``MAX_SEARCH_SPACE``.
    """
    end = scenario.num_intervals - 1 if end is None else int(end)
    size = search_space_size(scenario, start, end)
    if size > MAX_SEARCH_SPACE:
        raise SearchSpaceTooLarge(f"search space {size} exceeds {MAX_SEARCH_SPACE}")
    H = end - start + 1
    r = scenario.request_matrix[start : end + 1]
    totals = r.sum(axis=1)
    cap = scenario.capacity_matrix()
    costs = scenario.cost_matrix()[start : end + 1]
    peak = totals.max(initial=0.0)
    d_max = np.ceil(peak / cap - 1e-12).astype(int) + 1 if cap.size else np.zeros((0, 2), int)

    cands = []
    for i in range(H):
        c = _interval_candidates(totals[i], cap, costs[i], d_max)
        if c is None:
            return OracleResult("infeasible", math.nan, None, None, size)
        cands.append(c)

    # total cost and Tier-2 ceilings over the full product, by broadcasting
    total_cost = np.zeros(())
    x2 = []
    for i, (hi, cost, _) in enumerate(cands):
        shape = [1] * H
        shape[i] = len(hi)
        total_cost = total_cost + cost.reshape(shape)
        x2.append(hi.reshape(shape))
    feasible = np.ones(total_cost.shape, dtype=bool)
    gamma = scenario.policy.validity_len
    target = scenario.policy.target
    for s in range(0, H - gamma + 1):
        got = sum(x2[s : s + gamma])
        need = target * totals[s : s + gamma].sum()
        feasible &= got >= need - _TOL * max(1.0, need)
    if not feasible.any():
        return OracleResult("infeasible", math.nan, None, None, size)
    masked = np.where(feasible, total_cost, np.inf)
    flat = int(np.argmin(masked))
    pick = np.unravel_index(flat, masked.shape)

    deploy = np.stack([cands[i][2][pick[i]] for i in range(H)])
    load2 = np.array([cands[i][0][pick[i]] for i in range(H)])
    share = np.divide(load2, totals, out=np.zeros(H), where=totals > 0)
    alloc = np.empty(r.shape + (2,))
    alloc[:, :, TIER2] = r * share[:, None]
    alloc[:, :, TIER1] = r - alloc[:, :, TIER2]
    return OracleResult("optimal", float(masked[pick]), Deployment(deploy), Allocation(alloc), size)
