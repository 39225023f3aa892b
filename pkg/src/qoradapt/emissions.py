"""Carbon accounting for deployments."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenario import Deployment, MachineType, Scenario

GRAMS_PER_TONNE = 1e6


@dataclass(frozen=True)
class EmissionRecord:
    operational_g: float
    embodied_g: float

    @property
    def total_g(self) -> float:
        return self.operational_g + self.embodied_g


def interval_emissions(
    deploy_row,
    machines: Sequence[MachineType],
    carbon_now: float,
    delta_hours: float = 1.0,
    interval: Optional[int] = None,
) -> EmissionRecord:
    """Emissions of one interval for a ``(M, 2)`` deployment row.

    Power is given in watts and converted to kW; embodied emissions are
    charged per running machine regardless of load.
    """
    d = np.asarray(deploy_row, dtype=float).reshape(len(machines), 2)
    if np.any(d < 0):
        raise ValueError("deployment counts must be >= 0")
    if carbon_now < 0:
        raise ValueError("carbon intensity must be >= 0")
    operational = 0.0
    embodied = 0.0
    for m, machine in enumerate(machines):
        power_kw = machine.power_at(interval) / 1000.0
        operational += float(np.dot(d[m], delta_hours * power_kw * carbon_now))
        embodied += float(d[m].sum() * machine.embodied_g_per_interval)
    return EmissionRecord(operational, embodied)


def emissions_series(deploy, scenario: Scenario, carbon=None) -> np.ndarray:
    """Vectorised per-interval totals for a ``(I, M, 2)`` deployment array."""
    d = np.asarray(getattr(deploy, "values", deploy), dtype=float)
    costs = scenario.cost_matrix(carbon)[: len(d)]
    return (d * costs).sum(axis=(1, 2))


def total_emissions(deploy: Deployment, scenario: Scenario):
    """Total grams and the per-interval records over the whole grid."""
    d = np.asarray(getattr(deploy, "values", deploy))
    if d.shape[0] != scenario.num_intervals:
        raise IndexError(
            f"deployment covers {d.shape[0]} intervals, grid has {scenario.num_intervals}"
        )
    carbon = scenario.carbon.values
    records = [
        interval_emissions(d[i], scenario.machines, carbon[i], scenario.grid.delta_hours, i)
        for i in range(len(d))
    ]
    return float(sum(r.total_g for r in records)), records


def savings_pct(candidate_g: float, baseline_g: float) -> float:
    if not baseline_g > 0:
        raise ValueError("baseline emissions must be > 0")
    return 100.0 * (baseline_g - candidate_g) / baseline_g
