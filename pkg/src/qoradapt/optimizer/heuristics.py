"""Primal heuristics that exploit the deployment/window structure.

Each interval gets a list of Pareto options ``(x2max, cost, d)``: the most
Tier-2 requests an integer deployment ``d`` can take while Tier 1 still covers
the rest, and what it emits. A solution is one option per interval. It is
feasible when every enforced window receives enough Tier-2 capacity. The local
search lowers options where window slack allows and pairs a lowering with a
cheaper raise elsewhere inside the same windows.

The sliding construction solves one full window exactly as a multiple-choice
knapsack and then walks outwards, giving every further interval the smallest
option its windows still require. On periodic data it reproduces the best
periodic schedule.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..scenario import TIER1, TIER2, cover_tier
from .problem import ProblemMeta, tier_staircase

SLACK_TOL = 1e-7


@dataclass
class IntervalOptions:
    x2: np.ndarray  # ascending max Tier-2 load
    cost: np.ndarray  # strictly ascending emissions
    deploy: np.ndarray  # (K, M, 2)


def _pareto(x2, cost, deploy) -> IntervalOptions:
    order = np.lexsort((cost, -x2))  # x2 descending, then cheapest first
    keep = []
    best = math.inf
    for j in order:
        if cost[j] < best - 1e-12 * max(1.0, abs(cost[j])):
            keep.append(j)
            best = cost[j]
    keep = keep[::-1]
    return IntervalOptions(x2[keep], cost[keep], deploy[keep])


def interval_options(total: float, capacity: np.ndarray, costs: np.ndarray) -> IntervalOptions:
    M = capacity.shape[0]
    if total <= 0:
        return IntervalOptions(np.array([0.0]), np.array([0.0]), np.zeros((1, M, 2), dtype=np.int64))
    if M == 1:
        k1, k2 = capacity[0]
        j2 = np.arange(int(math.ceil(total / k2 - 1e-12)) + 1)
        x2 = np.minimum(total, j2 * k2)
        j1 = np.maximum(0, np.ceil((total - x2) / k1 - 1e-12)).astype(np.int64)
        cost = j1 * costs[0, TIER1] + j2 * costs[0, TIER2]
        deploy = np.stack([j1, j2], axis=1)[:, None, :]
        return _pareto(x2, cost, deploy)
    stairs = tier_staircase(total, capacity[:, TIER2], costs[:, TIER2])
    levels = []
    if stairs is not None:
        upper = [int(math.ceil(total / k - 1e-12)) for k in capacity[:, TIER2]]
        for combo in itertools.product(*(range(u + 1) for u in upper)):
            levels.append(np.array(combo, dtype=np.int64))
    else:
        m = int(np.argmin(costs[:, TIER2] / capacity[:, TIER2]))
        for j in range(int(math.ceil(total / capacity[m, TIER2] - 1e-12)) + 1):
            d2 = np.zeros(M, dtype=np.int64)
            d2[m] = j
            levels.append(d2)
    x2s, cs, ds = [], [], []
    for d2 in levels:
        x2 = min(total, float(capacity[:, TIER2] @ d2))
        d1 = cover_tier(total - x2, capacity[:, TIER1], costs[:, TIER1])
        ds.append(np.stack([d1, d2], axis=1))
        x2s.append(x2)
        cs.append(float(costs[:, TIER1] @ d1 + costs[:, TIER2] @ d2))
    return _pareto(np.array(x2s), np.array(cs), np.array(ds))


class WindowState:
    """Option choice per interval plus window slacks."""

    def __init__(self, meta: ProblemMeta, options: list[IntervalOptions], idx: np.ndarray):
        self.meta = meta
        self.options = options
        self.idx = idx
        H = meta.horizon
        self.x2 = np.array([options[i].x2[idx[i]] for i in range(H)])
        self.lo = meta.window_lo
        self.hi = meta.window_hi
        cs = np.concatenate([[0.0], np.cumsum(self.x2)])
        self.slack = cs[self.hi + 1] - cs[self.lo] - meta.window_need
        # windows containing interval i form the contiguous range [wf[i], wl[i])
        ii = np.arange(H)
        self.wf = np.searchsorted(self.hi, ii, side="left")
        self.wl = np.searchsorted(self.lo, ii, side="right")

    def feasible(self) -> bool:
        scale = SLACK_TOL * np.maximum(1.0, np.abs(self.meta.window_need))
        return bool(np.all(self.slack >= -scale))

    def cost(self) -> float:
        return float(sum(o.cost[k] for o, k in zip(self.options, self.idx)))

    def set(self, i: int, k: int):
        delta = self.options[i].x2[k] - self.x2[i]
        self.idx[i] = k
        self.x2[i] = self.options[i].x2[k]
        self.slack[self.wf[i] : self.wl[i]] += delta

    def min_slack(self, i: int) -> float:
        a, b = self.wf[i], self.wl[i]
        return float(self.slack[a:b].min()) if b > a else math.inf


def _try_lower(state: WindowState, i: int) -> bool:
    opts = state.options[i]
    k = state.idx[i]
    if k == 0:
        return False
    drop = state.x2[i] - opts.x2[k - 1]
    gain = opts.cost[k] - opts.cost[k - 1]
    a, b = state.wf[i], state.wl[i]
    if b <= a or state.slack[a:b].min() >= drop - SLACK_TOL:
        state.set(i, k - 1)
        return True
    # pair with a raise at some j that lies in every window that would go short
    short = np.flatnonzero(state.slack[a:b] < drop - SLACK_TOL) + a
    j_lo = int(state.lo[short].max())
    j_hi = int(state.hi[short].min())
    best = None
    for j in range(j_lo, j_hi + 1):
        if j == i:
            continue
        c, e = state.wf[j], state.wl[j]
        shared_lo, shared_hi = max(a, c), min(b, e)
        # windows with i but without j must absorb the full drop
        outside = np.r_[state.slack[a:shared_lo], state.slack[shared_hi:b]]
        if outside.size and outside.min() < drop - SLACK_TOL:
            continue
        need = drop - state.slack[shared_lo:shared_hi].min() if shared_hi > shared_lo else 0.0
        oj = state.options[j]
        kj = state.idx[j]
        target = state.x2[j] + need
        l = int(np.searchsorted(oj.x2, target - SLACK_TOL, side="left"))
        l = max(l, kj)
        if l >= len(oj.x2):
            continue
        extra = oj.cost[l] - oj.cost[kj]
        if extra < gain - 1e-9 * max(1.0, gain) and (best is None or extra < best[0]):
            best = (extra, j, l)
    if best is None:
        return False
    _, j, l = best
    state.set(j, l)
    state.set(i, k - 1)
    return True


def local_search(state: WindowState, max_passes: int = 50) -> WindowState:
    for _ in range(max_passes):
        gains = np.array(
            [
                (o.cost[k] - o.cost[k - 1]) if k > 0 else -1.0
                for o, k in zip(state.options, state.idx)
            ]
        )
        order = np.argsort(-gains, kind="stable")
        improved = False
        for i in order:
            if gains[i] <= 0:
                break
            while _try_lower(state, int(i)):
                improved = True
        if not improved:
            break
    return state


def window_knapsack(options: list[IntervalOptions], need: float) -> Optional[np.ndarray]:
    """Cheapest option per interval whose Tier-2 loads sum to at least ``need``.

    Exact dynamic program over partial sums capped at ``need``; states are
    pruned to the (sum, cost) Pareto front.
    """
    sums = np.array([0.0])
    cost = np.array([0.0])
    back = []
    quantum = max(need, 1.0) * 1e-9
    for o in options:
        S = np.minimum(sums[:, None] + o.x2[None, :], need).ravel()
        C = (cost[:, None] + o.cost[None, :]).ravel()
        key = np.rint(S / quantum)
        order = np.lexsort((C, key))
        first = np.r_[True, key[order][1:] != key[order][:-1]]
        sel = order[first]
        sel = sel[np.argsort(-S[sel], kind="stable")]
        c = C[sel]
        sel = sel[c < np.r_[np.inf, np.minimum.accumulate(c)[:-1]]]
        back.append((sel // len(o.x2), sel % len(o.x2)))
        sums, cost = S[sel], C[sel]
    ok = np.flatnonzero(sums >= need - SLACK_TOL * max(1.0, abs(need)))
    if ok.size == 0:
        return None
    j = ok[np.argmin(cost[ok])]
    idx = []
    for prev, k in reversed(back):
        idx.append(k[j])
        j = prev[j]
    return np.array(idx[::-1], dtype=np.int64)


def _smallest_covering(o: IntervalOptions, req: float) -> int:
    k = int(np.searchsorted(o.x2, req - SLACK_TOL * max(1.0, abs(req)), side="left"))
    return min(k, len(o.x2) - 1)


def _raise_cheapest(options, idx, x2, cols, deficit: float) -> bool:
    """Step up options among ``cols`` by best cost per unit until ``deficit`` is met."""
    tol = SLACK_TOL * max(1.0, abs(deficit))
    while deficit > tol:
        best, pick = math.inf, -1
        for j in cols:
            o, k = options[j], idx[j]
            if k + 1 < len(o.x2):
                rate = (o.cost[k + 1] - o.cost[k]) / (o.x2[k + 1] - o.x2[k])
                if rate < best:
                    best, pick = rate, j
        if pick < 0:
            return False
        k = idx[pick] + 1
        deficit -= options[pick].x2[k] - x2[pick]
        idx[pick], x2[pick] = k, options[pick].x2[k]
    return True


def sliding_construction(meta: ProblemMeta, options: list[IntervalOptions]) -> Optional[np.ndarray]:
    """Option indices from the sliding-window construction, or ``None``."""
    H = meta.horizon
    lo, hi, need = meta.window_lo, meta.window_hi, meta.window_need
    if len(lo) == 0:
        return None
    full = np.flatnonzero(hi - lo + 1 == min(meta.gamma, H))
    if full.size == 0:
        return None
    w = int(full[0])
    sub = window_knapsack(options[lo[w] : hi[w] + 1], float(need[w]))
    if sub is None:
        return None
    idx = np.zeros(H, dtype=np.int64)
    idx[lo[w] : hi[w] + 1] = sub
    x2 = np.array([options[i].x2[idx[i]] for i in range(H)])
    for t in range(hi[w] + 1, H):
        for v in np.flatnonzero(hi == t):
            short = need[v] - x2[lo[v] : t + 1].sum()
            if short <= 0:
                continue
            idx[t] = max(idx[t], _smallest_covering(options[t], x2[t] + short))
            x2[t] = options[t].x2[idx[t]]
            # the interval alone cannot close the gap: lift earlier ones in the window
            short = need[v] - x2[lo[v] : t + 1].sum()
            if short > 0 and not _raise_cheapest(options, idx, x2, range(lo[v], t), short):
                return None
    for t in range(lo[w] - 1, -1, -1):
        for v in np.flatnonzero(lo == t):
            short = need[v] - x2[t : hi[v] + 1].sum()
            if short <= 0:
                continue
            idx[t] = max(idx[t], _smallest_covering(options[t], x2[t] + short))
            x2[t] = options[t].x2[idx[t]]
            short = need[v] - x2[t : hi[v] + 1].sum()
            if short > 0 and not _raise_cheapest(options, idx, x2, range(t + 1, hi[v] + 1), short):
                return None
    return idx


def build_options(meta: ProblemMeta) -> list[IntervalOptions]:
    demand = meta.requests.sum(axis=1)
    return [interval_options(demand[i], meta.capacity, meta.costs[i]) for i in range(meta.horizon)]


def state_to_x(lp, state: WindowState) -> np.ndarray:
    meta: ProblemMeta = lp.meta
    x = np.zeros(lp.num_cols)
    r = meta.requests
    demand = r.sum(axis=1)
    share = np.divide(state.x2, demand, out=np.zeros_like(state.x2), where=demand > 0)
    share = np.clip(share, 0.0, 1.0)
    a2 = r * share[:, None]
    x[meta.a_cols[:, :, TIER2]] = a2
    x[meta.a_cols[:, :, TIER1]] = r - a2
    deploy = np.stack([state.options[i].deploy[state.idx[i]] for i in range(meta.horizon)])
    x[meta.d_cols] = deploy
    return x


class StructuredHeuristic:
    """Rounds an LP point to the cheapest option covering its Tier-2 load, then
    improves it by local search. Options are cached per problem.

    With ``construct`` the sliding-window construction is also tried once.
    """

    def __init__(self, lp, max_passes: int = 50, construct: bool = True):
        self.lp = lp
        self.meta: ProblemMeta = lp.meta
        self.options = build_options(self.meta)
        self.max_passes = max_passes
        self._constructed = not construct

    def _improve(self, idx: np.ndarray) -> Optional[WindowState]:
        state = WindowState(self.meta, self.options, idx)
        if not state.feasible():
            return None
        local_search(state, self.max_passes)
        return state if state.feasible() else None

    def construct(self) -> Optional[np.ndarray]:
        """Sliding-window construction followed by local search."""
        idx = sliding_construction(self.meta, self.options)
        state = None if idx is None else self._improve(idx)
        return None if state is None else state_to_x(self.lp, state)

    def from_loads(self, x2: np.ndarray) -> Optional[np.ndarray]:
        idx = np.array(
            [
                min(
                    int(np.searchsorted(o.x2, v - SLACK_TOL * max(1.0, abs(v)), side="left")),
                    len(o.x2) - 1,
                )
                for o, v in zip(self.options, x2)
            ]
        )
        state = self._improve(idx)
        return None if state is None else state_to_x(self.lp, state)

    def __call__(self, lp, x: np.ndarray) -> Optional[np.ndarray]:
        x2 = np.asarray(x)[self.meta.a_cols[:, :, TIER2]].sum(axis=1)
        cand = self.from_loads(x2)
        if not self._constructed:
            # the construction does not depend on the LP point; run it once
            self._constructed = True
            built = self.construct()
            if built is not None and (cand is None or lp.objective(built) < lp.objective(cand)):
                cand = built
        return cand

    def all_tier2(self) -> Optional[np.ndarray]:
        """Every interval at its largest Tier-2 option (fallback plan)."""
        idx = np.array([len(o.x2) - 1 for o in self.options])
        state = WindowState(self.meta, self.options, idx)
        if not state.feasible():
            return None
        return state_to_x(self.lp, state)
