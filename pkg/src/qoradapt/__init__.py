"""Carbon-aware quality-of-responses adaptation for two-tier services."""
from .scenario import (
    TIER1,
    TIER2,
    Allocation,
    CarbonTrace,
    Deployment,
    InfeasibleError,
    MachineType,
    QoRPolicy,
    QualityTierPair,
    RequestTrace,
    Scenario,
    SolverBudgets,
    TimeGrid,
    baseline_run,
    make_scenario,
    minimal_deployment,
    p4d_machine,
    validate_scenario,
)
from .emissions import EmissionRecord, interval_emissions, savings_pct, total_emissions
from .qor import check_feasible, min_rolling_qor, qor_cdf, qor_of_window

__version__ = "0.1.0"
