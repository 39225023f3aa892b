"""MILP formulation of emission-minimal deployment under rolling QoR windows.

Columns per interval ``i`` of the horizon are ``a[i,u,q]`` (continuous
requests) followed by ``d[i,m,q]`` (integer machines). Rows:

* ``balance``  ``sum_q a[i,u,q] = r[i,u]``
* ``capacity`` ``sum_u a[i,u,q] - sum_m k[m,q] d[i,m,q] <= 0``
* ``qor``      ``sum_{i in w} sum_u a[i,u,2] >= target * sum_{i in w} r_i``
  for every window ``w`` of ``gamma`` intervals inside the grid that touches
  the horizon; allocations outside the horizon are constants moved to the
  right-hand side.
* ``envelope`` (optional) per-interval valid inequalities: the emissions of
  an interval are bounded below by the convex envelope of the cheapest
  integer deployment as a function of its Tier-2 load.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ..scenario import TIER1, TIER2, Allocation, Deployment, Scenario
from .lp import EQ, GE, LE, LinearProgram

_ENVELOPE_MAX_COMBOS = 20_000


class PreconditionError(ValueError):
    pass


@dataclass
class ProblemMeta:
    start: int
    end: int
    a_cols: np.ndarray  # (H, U, 2)
    d_cols: np.ndarray  # (H, M, 2)
    requests: np.ndarray  # (H, U) demand assumed inside the horizon
    costs: np.ndarray  # (H, M, 2) grams per machine
    capacity: np.ndarray  # (M, 2)
    gamma: int
    target: float
    window_starts: np.ndarray  # absolute start index per qor row
    window_lo: np.ndarray  # first local interval of each window inside horizon
    window_hi: np.ndarray  # last local interval (inclusive)
    window_need: np.ndarray  # Tier-2 requests the horizon must supply

    @property
    def horizon(self) -> int:
        return self.end - self.start + 1


def tier_staircase(total: float, capacities: np.ndarray, costs: np.ndarray):
    """Cheapest-cost cover levels for one tier.

    Returns ``(caps, cost)`` sorted by capacity where ``cost[j]`` is the least
    emissions of any deployment with capacity ``>= caps[j]``, or ``None`` when
    enumeration would be too large.
    """
    upper = [int(math.ceil(total / k - 1e-12)) for k in capacities]
    if np.prod([u + 1 for u in upper], dtype=float) > _ENVELOPE_MAX_COMBOS:
        return None
    if len(capacities) == 1:
        counts = np.arange(upper[0] + 1)
        caps = counts * capacities[0]
        cost = counts * costs[0]
    else:
        grid = np.array(list(itertools.product(*(range(u + 1) for u in upper))), dtype=float)
        caps = grid @ capacities
        cost = grid @ costs
        order = np.lexsort((cost, caps))
        caps, cost = caps[order], cost[order]
        cost = np.minimum.accumulate(cost[::-1])[::-1]
    return caps, cost


def _stair_value(caps, cost, y):
    y = np.atleast_1d(y)
    idx = np.searchsorted(caps, y - 1e-9 * np.maximum(1.0, np.abs(y)), side="left")
    out = np.full(len(y), np.inf)
    ok = idx < len(caps)
    out[ok] = cost[idx[ok]]
    out[y <= 1e-12] = 0.0
    return out


def interval_cost_points(total: float, capacity: np.ndarray, cost: np.ndarray):
    """Breakpoints ``(x2, f(x2))`` of the cheapest deployment for a Tier-2 load.

    ``f`` is piecewise constant and lower semicontinuous, so its convex
    envelope is the lower hull of these points.
    """
    if total <= 0:
        return np.array([0.0]), np.array([0.0])
    stairs = [tier_staircase(total, capacity[:, q], cost[:, q]) for q in (TIER1, TIER2)]
    if stairs[0] is None or stairs[1] is None:
        return None
    caps1, cost1 = stairs[0]
    caps2, cost2 = stairs[1]
    xs = np.concatenate([[0.0, total], caps2[caps2 <= total], total - caps1[caps1 <= total]])
    xs = np.unique(np.clip(xs, 0.0, total))
    f = _stair_value(caps1, cost1, total - xs) + _stair_value(caps2, cost2, xs)
    return xs, f


def lower_hull(xs: np.ndarray, ys: np.ndarray):
    hull: list = []
    for x, y in zip(xs, ys):
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (x - x1) >= (y - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((float(x), float(y)))
    return hull


def build_problem(
    scenario: Scenario,
    start: int = 0,
    end: Optional[int] = None,
    history: Optional[np.ndarray] = None,
    future: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
    carbon: Optional[np.ndarray] = None,
    strengthen: bool = False,
) -> LinearProgram:
    """Build the MILP for intervals ``start..end`` (inclusive).

    ``history`` holds the committed allocation ``(>=start, U, 2)`` for every
    interval before ``start``; ``future`` an allocation over the whole grid
    whose rows after ``end`` are treated as fixed. Without ``future``,
    windows reaching past ``end`` are not enforced. ``requests`` ``(I, U)``
    and ``carbon`` ``(I,)`` replace the scenario traces, e.g. with forecasts.
    """
    I = scenario.num_intervals
    end = I - 1 if end is None else int(end)
    start = int(start)
    if not 0 <= start <= end < I:
        raise PreconditionError(f"invalid horizon [{start}, {end}] for grid of {I}")
    r_all = scenario.request_matrix if requests is None else np.asarray(requests, dtype=float)
    c_all = scenario.carbon.values if carbon is None else np.asarray(carbon, dtype=float)
    H = end - start + 1
    U = r_all.shape[1]
    M = len(scenario.machines)
    gamma = int(scenario.policy.validity_len)
    target = float(scenario.policy.target)
    capacity = scenario.capacity_matrix()
    costs = scenario.cost_matrix(c_all)[start : end + 1]
    r = r_all[start : end + 1]

    block = 2 * U + 2 * M
    n = H * block
    base = (np.arange(H) * block)[:, None, None]
    a_cols = base + np.arange(2 * U).reshape(U, 2)[None]
    d_cols = base + 2 * U + np.arange(2 * M).reshape(M, 2)[None]

    c = np.zeros(n)
    c[d_cols.ravel()] = costs.ravel()
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    ub[a_cols.ravel()] = np.repeat(r.ravel(), 2)
    demand = r.sum(axis=1)
    ub[d_cols.ravel()] = np.ceil(demand[:, None, None] / capacity[None] - 1e-9).ravel()
    integer = np.zeros(n, dtype=bool)
    integer[d_cols.ravel()] = True
    names = [""] * n
    for i in range(H):
        for u in range(U):
            for q in range(2):
                names[a_cols[i, u, q]] = f"a[{start + i},{u},{q + 1}]"
        for m in range(M):
            for q in range(2):
                names[d_cols[i, m, q]] = f"d[{start + i},{m},{q + 1}]"

    rows, cols, vals = [], [], []
    senses, rhs, kinds = [], [], []

    def add_row(col_idx, coefs, sense, value, kind):
        k = len(senses)
        rows.extend([k] * len(col_idx))
        cols.extend(col_idx)
        vals.extend(coefs)
        senses.append(sense)
        rhs.append(value)
        kinds.append(kind)

    for i in range(H):
        for u in range(U):
            add_row(list(a_cols[i, u]), [1.0, 1.0], EQ, r[i, u], "balance")
    for i in range(H):
        for q in (TIER1, TIER2):
            add_row(
                list(a_cols[i, :, q]) + list(d_cols[i, :, q]),
                [1.0] * U + list(-capacity[:, q]),
                LE,
                0.0,
                "capacity",
            )

    # windows [s, s+gamma-1] inside the grid that intersect the horizon
    s_lo = max(0, start - gamma + 1)
    s_hi = min(end, I - gamma)
    if future is None:
        s_hi = min(s_hi, end - gamma + 1)
    if s_lo < start and history is None:
        raise PreconditionError(f"allocation history before interval {start} is required")
    if history is not None and s_lo < start and len(history) < start:
        raise PreconditionError(f"history covers {len(history)} intervals, need {start}")
    tier2_fixed = np.zeros(I)
    if history is not None and start > 0:
        tier2_fixed[:start] = np.asarray(history, dtype=float)[:start, :, TIER2].sum(axis=1)
    if future is not None and end + 1 < I:
        tier2_fixed[end + 1 :] = np.asarray(future, dtype=float)[end + 1 : I, :, TIER2].sum(axis=1)
    totals_all = r_all.sum(axis=1)
    window_starts, window_lo, window_hi, window_need = [], [], [], []
    for s in range(s_lo, s_hi + 1):
        e = s + gamma - 1
        lo_i, hi_i = max(s, start), min(e, end)
        fixed = tier2_fixed[s:start].sum() + tier2_fixed[end + 1 : e + 1].sum()
        need = target * totals_all[s : e + 1].sum() - fixed
        col_idx = list(a_cols[lo_i - start : hi_i - start + 1, :, TIER2].ravel())
        add_row(col_idx, [1.0] * len(col_idx), GE, need, "qor")
        window_starts.append(s)
        window_lo.append(lo_i - start)
        window_hi.append(hi_i - start)
        window_need.append(need)

    if strengthen:
        for i in range(H):
            pts = interval_cost_points(demand[i], capacity, costs[i])
            if pts is None:
                continue
            hull = lower_hull(*pts)
            for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
                slope = (y2 - y1) / (x2 - x1)
                intercept = y1 - slope * x1
                add_row(
                    list(d_cols[i].ravel()) + list(a_cols[i, :, TIER2]),
                    list(costs[i].ravel()) + [-slope] * U,
                    GE,
                    intercept,
                    "envelope",
                )

    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(senses), n))
    # all-Tier-2 at the column upper bounds satisfies every row whenever
    # the model is feasible at all, so the simplex can skip phase 1
    start_hi = np.zeros(n, dtype=bool)
    start_hi[a_cols[:, :, TIER2].ravel()] = True
    start_hi[d_cols[:, :, TIER2].ravel()] = True
    meta = ProblemMeta(
        start=start,
        end=end,
        a_cols=a_cols,
        d_cols=d_cols,
        requests=r.copy(),
        costs=costs,
        capacity=capacity,
        gamma=gamma,
        target=target,
        window_starts=np.array(window_starts, dtype=int),
        window_lo=np.array(window_lo, dtype=int),
        window_hi=np.array(window_hi, dtype=int),
        window_need=np.array(window_need, dtype=float),
    )
    return LinearProgram(
        c=c,
        A=A,
        senses=np.array(senses, dtype="<U1"),
        rhs=np.array(rhs),
        lb=lb,
        ub=ub,
        integer=integer,
        names=names,
        row_kinds=kinds,
        meta=meta,
        start_at_upper=start_hi,
    )


def decode(lp: LinearProgram, x: np.ndarray):
    """Split a column vector into ``(Deployment, Allocation)`` for the horizon."""
    meta: ProblemMeta = lp.meta
    x = np.asarray(x, dtype=float)
    alloc = np.maximum(x[meta.a_cols], 0.0)
    deploy = np.rint(x[meta.d_cols])
    return Deployment(deploy), Allocation(alloc)


def encode(lp: LinearProgram, deploy, alloc) -> np.ndarray:
    """Column vector for a horizon ``(H, M, 2)`` deployment and ``(H, U, 2)`` allocation."""
    meta: ProblemMeta = lp.meta
    x = np.zeros(lp.num_cols)
    x[meta.a_cols] = np.asarray(getattr(alloc, "values", alloc), dtype=float)
    x[meta.d_cols] = np.asarray(getattr(deploy, "values", deploy), dtype=float)
    return x
