"""Seeded random scenario generators shared by the test modules."""
import numpy as np

from qoradapt import MachineType, SolverBudgets, make_scenario
from qoradapt.optimizer.oracle import MAX_SEARCH_SPACE, search_space_size


def random_machine(rng, name, dominated=False):
    k1 = int(rng.integers(4, 12))
    k2 = int(rng.integers(3, 12))
    p1 = float(rng.integers(500, 2000))
    p2 = float(rng.integers(500, 3000))
    if dominated:
        # Tier 2 never cheaper or roomier than Tier 1 on the same machine
        k2 = min(k2, k1)
        p2 = max(p2, p1)
    emb = float(rng.choice([0.0, 10.0, 50.0]))
    return MachineType(name, (p1, p2), (k1, k2), emb)


def tiny_instance(seed):
    """I <= 4, one or two machine types, every d_max <= 3, raw space <= 1e7."""
    rng = np.random.default_rng(seed)
    while True:
        M = int(rng.integers(1, 3))
        machines = [random_machine(rng, f"m{m}") for m in range(M)]
        kmin = min(min(m.capacity_per_interval) for m in machines)
        gamma = int(rng.choice([1, 2, 4]))
        I = int(rng.integers(gamma, 5))
        U = int(rng.integers(1, 3))
        # peak demand <= 2 * smallest capacity keeps ceil(peak / k) + 1 <= 3
        r = rng.uniform(0, 2 * kmin / U, size=(I, U))
        r[rng.random((I, U)) < 0.15] = 0.0
        carbon = rng.uniform(20, 600, size=I)
        target = float(rng.choice([0.3, 0.5, 0.7]))
        sc = make_scenario(r, carbon, machines, target, gamma)
        if search_space_size(sc) <= MAX_SEARCH_SPACE:
            return sc


def small_instance(seed, I=None, gamma=1, target=None, dominated=True, U=None):
    """Six to eight intervals, peak demand within one machine's capacity.

    Branch and bound proves these optimal in well under a second on average.
    """
    rng = np.random.default_rng(seed)
    I = int(rng.integers(6, 9)) if I is None else I
    U = int(rng.integers(1, 3)) if U is None else U
    M = int(rng.integers(1, 3))
    machines = [random_machine(rng, f"m{m}", dominated) for m in range(M)]
    kmin = min(min(m.capacity_per_interval) for m in machines)
    r = rng.uniform(0, kmin / U, size=(I, U))
    carbon = rng.uniform(20, 600, size=I)
    if target is None:
        target = float(rng.uniform(0.1, 0.9))
    return make_scenario(r, carbon, machines, target, gamma, budgets=SolverBudgets(upper_bound_time_limit_s=120))


TINY = dict(
    requests=[10.0, 10.0],
    carbon=[100.0, 500.0],
    machines=[MachineType("toy", (1000.0, 2000.0), (10.0, 10.0), 0.0)],
)


def tiny_700(gamma=2, target=0.5):
    return make_scenario(TINY["requests"], TINY["carbon"], TINY["machines"], target, gamma)
