"""QoR over windows, rolling validity-period checks and low-QoR CDFs.

A window of length ``g`` covers ``g`` consecutive intervals, i.e. QoR is
evaluated from ``start`` to ``start + g - 1`` inclusive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .scenario import BALANCE_TOL, TIER2, Scenario

CAPACITY_TOL = 1e-9
WINDOW_TOL = 1e-9


@dataclass(frozen=True)
class WindowQoR:
    start: int
    end: int
    value: Optional[float]


@dataclass(frozen=True)
class Violation:
    constraint: str  # "balance", "capacity", "qor", "integrality", "sign"
    interval: int
    magnitude: float
    detail: str = ""


@dataclass
class FeasibilityReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __len__(self):
        return len(self.violations)

    def of(self, constraint: str) -> list:
        return [v for v in self.violations if v.constraint == constraint]


def _tier2_and_total(alloc, requests):
    a = np.asarray(getattr(alloc, "values", alloc), dtype=float)
    if requests is None:
        r = a.sum(axis=2)
    elif hasattr(requests, "request_matrix"):
        r = requests.request_matrix
    elif isinstance(requests, (list, tuple)) and requests and hasattr(requests[0], "values"):
        r = np.stack([t.values for t in requests], axis=1)
    else:
        r = np.asarray(requests, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
    return a[:, :, TIER2].sum(axis=1), r.sum(axis=1)


def qor_of_window(alloc, requests, start: int, end: int) -> Optional[float]:
    """Tier-2 share of all requests in ``[start, end]``; ``None`` when no requests."""
    tier2, total = _tier2_and_total(alloc, requests)
    n = len(total)
    if not (0 <= start <= end < n):
        raise IndexError(f"window [{start}, {end}] outside grid of {n} intervals")
    denom = total[start : end + 1].sum()
    if denom <= 0:
        return None
    return float(tier2[start : end + 1].sum() / denom)


def window_qor_values(alloc, requests, length: int) -> np.ndarray:
    """QoR of every length-``length`` window, NaN where undefined."""
    tier2, total = _tier2_and_total(alloc, requests)
    n = len(total)
    if length < 1:
        raise ValueError("window length must be >= 1")
    if length > n:
        raise IndexError(f"window length {length} exceeds grid of {n} intervals")
    c2 = np.concatenate([[0.0], np.cumsum(tier2)])
    ct = np.concatenate([[0.0], np.cumsum(total)])
    num = c2[length:] - c2[:-length]
    den = ct[length:] - ct[:-length]
    out = np.full(len(den), np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def min_rolling_qor(alloc, requests, gamma: int) -> float:
    values = window_qor_values(alloc, requests, gamma)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return 1.0
    return float(values.min())


def check_feasible(deploy, alloc, scenario: Scenario, start: int = 0) -> FeasibilityReport:
    """Check request balance, capacity and rolling-QoR constraints.

    ``deploy`` and ``alloc`` may cover a sub-range beginning at ``start``; the
    QoR check is then limited to windows fully inside that range.
    """
    report = FeasibilityReport()
    d = np.asarray(getattr(deploy, "values", deploy), dtype=float)
    a = np.asarray(getattr(alloc, "values", alloc), dtype=float)
    n = a.shape[0]
    r = scenario.request_matrix[start : start + n]
    if np.any(a < -BALANCE_TOL):
        i = int(np.argwhere(a < -BALANCE_TOL)[0][0])
        report.violations.append(Violation("sign", start + i, float(-a.min()), "negative allocation"))
    if np.any(d < 0):
        i = int(np.argwhere(d < 0)[0][0])
        report.violations.append(Violation("sign", start + i, float(-d.min()), "negative deployment"))
    frac = np.abs(d - np.rint(d))
    for i in np.unique(np.argwhere(frac > 1e-6)[:, 0]) if frac.size else []:
        report.violations.append(Violation("integrality", start + int(i), float(frac[i].max())))
    gap = np.abs(a.sum(axis=2) - r)
    for i, u in np.argwhere(gap > BALANCE_TOL):
        report.violations.append(
            Violation("balance", start + int(i), float(gap[i, u]), f"user group {int(u)}")
        )
    served = a.sum(axis=1)
    cap = np.einsum("imq,mq->iq", d, scenario.capacity_matrix())
    excess = served - cap
    for i, q in np.argwhere(excess > CAPACITY_TOL * np.maximum(1.0, served)):
        report.violations.append(
            Violation("capacity", start + int(i), float(excess[i, q]), f"tier {int(q) + 1}")
        )
    gamma = scenario.policy.validity_len
    target = scenario.policy.target
    if gamma <= n:
        tier2 = a[:, :, TIER2].sum(axis=1)
        total = r.sum(axis=1)
        c2 = np.concatenate([[0.0], np.cumsum(tier2)])
        ct = np.concatenate([[0.0], np.cumsum(total)])
        deficit = target * (ct[gamma:] - ct[:-gamma]) - (c2[gamma:] - c2[:-gamma])
        scale = np.maximum(1.0, ct[gamma:] - ct[:-gamma])
        for s in np.flatnonzero(deficit > WINDOW_TOL * scale):
            report.violations.append(
                Violation("qor", start + int(s), float(deficit[s]), f"window of {gamma}")
            )
    return report


def qor_cdf(alloc, requests, beta: int) -> list[tuple[float, float]]:
    """Empirical CDF of QoR over all sliding windows of ``beta`` intervals.

    Returns ``(threshold, fraction)`` points, one per distinct QoR value, where
    ``fraction`` is the share of windows with QoR at most ``threshold``.
    """
    if beta < 1:
        raise ValueError("beta must be >= 1")
    values = window_qor_values(alloc, requests, beta)
    values = np.sort(values[~np.isnan(values)])
    if values.size == 0:
        return []
    thresholds, counts = np.unique(values, return_counts=True)
    fractions = np.cumsum(counts) / values.size
    fractions[-1] = 1.0
    return [(float(t), float(f)) for t, f in zip(thresholds, fractions)]


def mass_below(cdf: list[tuple[float, float]], threshold: float, tol: float = 1e-9) -> float:
    """Fraction of windows with QoR strictly below ``threshold - tol``."""
    below = [f for t, f in cdf if t < threshold - tol]
    return below[-1] if below else 0.0
