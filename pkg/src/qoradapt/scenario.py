"""Domain types for two-tier quality-of-responses (QoR) adaptation.

Array conventions used throughout the package:

* requests ``r``: shape ``(I, U)``, requests per interval and user group
* allocation ``a``: shape ``(I, U, 2)``, requests served per tier
  (index 0 = Tier 1 / low quality, index 1 = Tier 2 / high quality)
* deployment ``d``: shape ``(I, M, 2)``, integer machine counts per tier
* carbon ``C``: shape ``(I,)``, grid carbon intensity in gCO2/kWh

All arrays stored on the frozen dataclasses below are made read-only.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

TIER1, TIER2 = 0, 1
BALANCE_TOL = 1e-6
EMISSIONS_RTOL = 1e-9

# single-machine knapsack enumeration cap for the exact multi-type solve
_EXACT_MAX_TYPES = 3
_EXACT_MAX_COMBOS = 200_000


class InfeasibleError(ValueError):
    """Raised when demand cannot be served by the available machines."""


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    delta_hours: float = 1.0
    num_intervals: int = 8760
    start_epoch_hour: int = 0

    def __post_init__(self):
        object.__setattr__(self, "delta_hours", float(Fraction(self.delta_hours)))
        object.__setattr__(self, "num_intervals", int(self.num_intervals))
        object.__setattr__(self, "start_epoch_hour", int(self.start_epoch_hour))

    def hour_of(self, i) -> np.ndarray:
        """Absolute UTC hour index of interval ``i`` (scalar or array)."""
        return self.start_epoch_hour + np.asarray(i) * self.delta_hours


@dataclass(frozen=True)
class QualityTierPair:
    tier1_name: str = "tier1"
    tier2_name: str = "tier2"

    @property
    def names(self) -> tuple[str, str]:
        return (self.tier1_name, self.tier2_name)


@dataclass(frozen=True)
class MachineType:
    """A machine type with per-tier power draw and throughput.

    ``power_override`` optionally holds a ``(I, 2)`` series of watts that
    replaces ``power_watts`` interval by interval.
    """

    name: str
    power_watts: tuple[float, float]
    capacity_per_interval: tuple[float, float]
    embodied_g_per_interval: float = 0.0
    power_override: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "power_watts", tuple(float(p) for p in self.power_watts))
        object.__setattr__(
            self, "capacity_per_interval", tuple(float(k) for k in self.capacity_per_interval)
        )
        object.__setattr__(self, "embodied_g_per_interval", float(self.embodied_g_per_interval))
        if self.power_override is not None:
            object.__setattr__(self, "power_override", _frozen(self.power_override))

    def power_at(self, i: Optional[int] = None) -> np.ndarray:
        if self.power_override is not None and i is not None:
            return np.asarray(self.power_override[i], dtype=float)
        return np.asarray(self.power_watts, dtype=float)

    def cost_per_machine(self, carbon_now: float, delta_hours: float, i: Optional[int] = None):
        """Grams emitted by one machine per interval, per tier."""
        return delta_hours * self.power_at(i) / 1000.0 * carbon_now + self.embodied_g_per_interval


@dataclass(frozen=True)
class RequestTrace:
    user_group: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class CarbonTrace:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class QoRPolicy:
    target: float = 0.5
    validity_len: int = 24


@dataclass(frozen=True)
class SolverBudgets:
    tau: int = 24
    long_time_limit_s: float = 30.0
    short_time_limit_s: float = 10.0
    gap_target: float = 0.001
    long_node_limit: Optional[int] = None
    short_node_limit: Optional[int] = None
    upper_bound_time_limit_s: float = 3600.0
    upper_bound_node_limit: Optional[int] = None


@dataclass(frozen=True)
class Allocation:
    """Requests per interval, user group and tier, shape ``(I, U, 2)``."""

    values: np.ndarray
    complete: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def tier2_totals(self) -> np.ndarray:
        return self.values[:, :, TIER2].sum(axis=1)

    @property
    def tier_totals(self) -> np.ndarray:
        return self.values.sum(axis=1)


@dataclass(frozen=True)
class Deployment:
    """Machine counts per interval, machine type and tier, shape ``(I, M, 2)``."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("deployment counts must be integers")
        object.__setattr__(self, "values", _frozen(np.rint(arr), dtype=np.int64))


@dataclass(frozen=True)
class Scenario:
    grid: TimeGrid
    machines: tuple[MachineType, ...]
    requests: tuple[RequestTrace, ...]
    carbon: CarbonTrace
    policy: QoRPolicy = QoRPolicy()
    budgets: SolverBudgets = SolverBudgets()
    tiers: QualityTierPair = field(default_factory=QualityTierPair)

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "requests", tuple(self.requests))

    @property
    def num_intervals(self) -> int:
        return self.grid.num_intervals

    @property
    def request_matrix(self) -> np.ndarray:
        """Requests as an ``(I, U)`` array."""
        return np.stack([t.values for t in self.requests], axis=1)

    def cost_matrix(self, carbon: Optional[np.ndarray] = None) -> np.ndarray:
        """Per-machine emissions ``(I, M, 2)`` for every interval, tier and type."""
        carbon = self.carbon.values if carbon is None else np.asarray(carbon, dtype=float)
        out = np.empty((len(carbon), len(self.machines), 2))
        dh = self.grid.delta_hours
        for m, machine in enumerate(self.machines):
            if machine.power_override is not None:
                power = np.asarray(machine.power_override[: len(carbon)], dtype=float)
            else:
                power = np.broadcast_to(np.asarray(machine.power_watts), (len(carbon), 2))
            out[:, m, :] = dh * power / 1000.0 * carbon[:, None] + machine.embodied_g_per_interval
        return out

    def capacity_matrix(self) -> np.ndarray:
        """Requests per interval ``(M, 2)`` for every machine type and tier."""
        return np.array([m.capacity_per_interval for m in self.machines], dtype=float)

    def replace(self, **changes) -> "Scenario":
        import dataclasses

        return dataclasses.replace(self, **changes)

    def with_policy(self, target: Optional[float] = None, validity_len: Optional[int] = None):
        policy = QoRPolicy(
            self.policy.target if target is None else float(target),
            self.policy.validity_len if validity_len is None else int(validity_len),
        )
        return self.replace(policy=policy)


def p4d_machine(delta_hours: float = 1.0) -> MachineType:
    """EC2 p4d.24xlarge serving LLaMA 3.1 8B (Tier 1) and 70B (Tier 2)."""
    seconds = 3600.0 * delta_hours
    return MachineType(
        name="p4d.24xlarge",
        power_watts=(3781.8, 3781.8),
        capacity_per_interval=(11.57 * seconds, 5.05 * seconds),
        embodied_g_per_interval=135.3 * delta_hours,
    )


def validate_scenario(scenario: Scenario) -> list[str]:
    """List every violated invariant, empty when the scenario is valid."""
    problems = []
    grid = scenario.grid
    if grid.num_intervals < 1:
        problems.append(f"grid: num_intervals must be >= 1, got {grid.num_intervals}")
    if not grid.delta_hours > 0:
        problems.append(f"grid: delta_hours must be > 0, got {grid.delta_hours}")
    if scenario.tiers.tier1_name == scenario.tiers.tier2_name:
        problems.append("tiers: tier names must be distinct")
    if not scenario.machines:
        problems.append("machines: at least one machine type required")
    for m, machine in enumerate(scenario.machines):
        where = f"machines[{m}] ({machine.name})"
        if len(machine.capacity_per_interval) != 2 or len(machine.power_watts) != 2:
            problems.append(f"{where}: expected two tiers")
            continue
        for q, k in enumerate(machine.capacity_per_interval):
            if not k > 0:
                problems.append(f"{where}: capacity for tier {q + 1} must be > 0, got {k}")
        for q, p in enumerate(machine.power_watts):
            if not p > 0:
                problems.append(f"{where}: power for tier {q + 1} must be > 0, got {p}")
        if machine.embodied_g_per_interval < 0:
            problems.append(f"{where}: embodied emissions must be >= 0")
        if machine.power_override is not None:
            shape = np.shape(machine.power_override)
            if shape != (grid.num_intervals, 2):
                problems.append(
                    f"{where}: power override shape {shape} != ({grid.num_intervals}, 2)"
                )
            elif np.any(np.asarray(machine.power_override) <= 0):
                problems.append(f"{where}: power override values must be > 0")
    if not scenario.requests:
        problems.append("requests: at least one user group required")
    names = [t.user_group for t in scenario.requests]
    if len(set(names)) != len(names):
        problems.append("requests: user group names must be distinct")
    for trace in scenario.requests:
        where = f"requests[{trace.user_group}]"
        if len(trace.values) != grid.num_intervals:
            problems.append(
                f"{where}: length mismatch, {len(trace.values)} != {grid.num_intervals}"
            )
        if np.any(~np.isfinite(trace.values)) or np.any(trace.values < 0):
            problems.append(f"{where}: values must be finite and >= 0")
    if len(scenario.carbon.values) != grid.num_intervals:
        problems.append(
            f"carbon: length mismatch, {len(scenario.carbon.values)} != {grid.num_intervals}"
        )
    if np.any(~np.isfinite(scenario.carbon.values)) or np.any(scenario.carbon.values < 0):
        problems.append("carbon: values must be finite and >= 0")
    policy = scenario.policy
    if not 0.0 <= policy.target <= 1.0:
        problems.append(f"policy: target out of [0,1], got {policy.target}")
    if int(policy.validity_len) != policy.validity_len or policy.validity_len < 1:
        problems.append(f"policy: validity_len must be a positive integer, got {policy.validity_len}")
    elif policy.validity_len > grid.num_intervals:
        problems.append(
            f"policy: validity_len {policy.validity_len} exceeds num_intervals {grid.num_intervals}"
        )
    budgets = scenario.budgets
    if budgets.tau < 1:
        problems.append(f"budgets: tau must be >= 1, got {budgets.tau}")
    if not (budgets.long_time_limit_s > 0 and budgets.short_time_limit_s > 0):
        problems.append("budgets: time limits must be > 0")
    if not 0.0 <= budgets.gap_target < 1.0:
        problems.append(f"budgets: gap_target out of [0,1), got {budgets.gap_target}")
    return problems


def _cover_exact(total: float, capacities: np.ndarray, costs: np.ndarray) -> np.ndarray:
    """Cheapest integer vector ``d`` with ``capacities @ d >= total`` by enumeration."""
    n = len(capacities)
    upper = [int(math.ceil(total / k - 1e-12)) for k in capacities]
    best, best_cost = None, math.inf
    for head in itertools.product(*(range(u + 1) for u in upper[:-1])):
        covered = float(np.dot(capacities[:-1], head)) if n > 1 else 0.0
        last = max(0, int(math.ceil((total - covered) / capacities[-1] - 1e-12)))
        d = np.array(head + (last,), dtype=np.int64)
        cost = float(np.dot(costs, d))
        if cost < best_cost - 1e-12:
            best, best_cost = d, cost
    return best


def _cover_greedy(total: float, capacities: np.ndarray, costs: np.ndarray) -> np.ndarray:
    order = np.argsort(costs / capacities, kind="stable")
    d = np.zeros(len(capacities), dtype=np.int64)
    best = order[0]
    d[best] = int(math.floor(total / capacities[best]))
    remainder = total - d[best] * capacities[best]
    if remainder > 1e-9:
        # finish the remainder with whichever single-type top-up is cheapest
        options = [
            (costs[m] * math.ceil(remainder / capacities[m] - 1e-12), m) for m in range(len(d))
        ]
        cost, m = min(options)
        d[m] += int(math.ceil(remainder / capacities[m] - 1e-12))
    # local repair: drop machines that are no longer needed
    for m in order[::-1]:
        while d[m] > 0 and np.dot(capacities, d) - capacities[m] >= total - 1e-9:
            d[m] -= 1
    return d


def cover_tier(total: float, capacities: Sequence[float], costs: Sequence[float]) -> np.ndarray:
    """Cheapest machine counts for one tier that serve ``total`` requests."""
    capacities = np.asarray(capacities, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if total <= 0:
        return np.zeros(len(capacities), dtype=np.int64)
    if len(capacities) == 0:
        raise InfeasibleError("no machine types available for positive demand")
    if len(capacities) == 1:
        return np.array([int(math.ceil(total / capacities[0] - 1e-12))], dtype=np.int64)
    combos = np.prod([math.ceil(total / k) + 1 for k in capacities[:-1]])
    if len(capacities) <= _EXACT_MAX_TYPES and combos <= _EXACT_MAX_COMBOS:
        return _cover_exact(total, capacities, costs)
    return _cover_greedy(total, capacities, costs)


def minimal_deployment(
    tier_totals: Sequence[float],
    machines: Sequence[MachineType],
    carbon_now: float,
    delta_hours: float = 1.0,
    interval: Optional[int] = None,
) -> np.ndarray:
    """Least-emission integer deployment ``(M, 2)`` covering per-tier demand."""
    tier_totals = np.asarray(tier_totals, dtype=float)
    if np.any(tier_totals < 0):
        raise ValueError("per-tier totals must be >= 0")
    if not machines:
        if np.any(tier_totals > 0):
            raise InfeasibleError("no machine types available for positive demand")
        return np.zeros((0, 2), dtype=np.int64)
    capacities = np.array([m.capacity_per_interval for m in machines], dtype=float)
    costs = np.array([m.cost_per_machine(carbon_now, delta_hours, interval) for m in machines])
    out = np.zeros((len(machines), 2), dtype=np.int64)
    for q in (TIER1, TIER2):
        out[:, q] = cover_tier(tier_totals[q], capacities[:, q], costs[:, q])
    return out


def baseline_run(scenario: Scenario):
    """Non-carbon-aware operation: fixed target split and minimal machines every interval.

    Returns ``(Deployment, Allocation, total_g)``.
    """
    from .emissions import total_emissions

    if not scenario.machines and np.any(scenario.request_matrix > 0):
        raise InfeasibleError("no machine types available for positive demand")
    r = scenario.request_matrix
    target = scenario.policy.target
    alloc = np.empty(r.shape + (2,))
    alloc[:, :, TIER2] = target * r
    alloc[:, :, TIER1] = r - alloc[:, :, TIER2]
    totals = alloc.sum(axis=1)
    carbon = scenario.carbon.values
    deploy = np.stack(
        [
            minimal_deployment(totals[i], scenario.machines, carbon[i], scenario.grid.delta_hours, i)
            for i in range(scenario.num_intervals)
        ]
    )
    deployment = Deployment(deploy)
    total_g, _ = total_emissions(deployment, scenario)
    return deployment, Allocation(alloc), total_g


def make_scenario(
    requests,
    carbon,
    machines: Sequence[MachineType],
    target: float = 0.5,
    gamma: int = 1,
    delta_hours: float = 1.0,
    budgets: SolverBudgets = SolverBudgets(),
    start_epoch_hour: int = 0,
) -> Scenario:
    """Shorthand for a scenario from raw arrays.

    ``requests`` is ``(I,)`` for one user group or ``(I, U)`` for several.
    """
    r = np.asarray(requests, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    carbon = np.asarray(carbon, dtype=float)
    grid = TimeGrid(delta_hours, len(carbon), start_epoch_hour)
    traces = [RequestTrace(f"u{u}", r[:, u]) for u in range(r.shape[1])]
    return Scenario(grid, tuple(machines), tuple(traces), CarbonTrace(carbon), QoRPolicy(target, gamma), budgets)
