"""
Planning with imperfect carbon forecasts
========================================

The online loop re-plans the rest of the week every 24 hours and refines the
next day every hour. Carbon forecasts carry CISO-like day-ahead errors; the
committed schedule must still meet the QoR target on every window.
"""
import numpy as np

from qoradapt import SolverBudgets, baseline_run, make_scenario, p4d_machine, savings_pct
from qoradapt.forecast import MAPE_PROFILES, CompositeCarbonProvider, ConstantProvider, fit_seasonal
from qoradapt.optimizer import SolveBudget
from qoradapt.simulator import run_online, run_upper_bound

I = 168
carbon = 300 * (1 + 0.3 * np.sin(2 * np.pi * np.arange(I) / 24))
budgets = SolverBudgets(tau=24, long_node_limit=5, short_node_limit=5)
sc = make_scenario(np.full(I, 1e6), carbon, [p4d_machine()], 0.5, 24, budgets=budgets)

_, _, base = baseline_run(sc)
ub, _ = run_upper_bound(sc, SolveBudget(60, 0.001))
print(f"upper bound: {savings_pct(ub.objective_g, base):.2f}% savings")

model = fit_seasonal(carbon, (24,))
for seed in range(3):
    prov = CompositeCarbonProvider(carbon, MAPE_PROFILES["CISO"], model, seed)
    tr = run_online(sc, ConstantProvider(1e6, I), prov, deterministic=True)
    s = savings_pct(tr.total_g, base)
    print(f"seed {seed}: {s:.2f}% savings ({s / savings_pct(ub.objective_g, base):.0%} of the bound), "
          f"min rolling QoR {tr.min_rolling_qor(24):.4f}")
