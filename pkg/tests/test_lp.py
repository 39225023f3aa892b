"""Bounded simplex against vertex enumeration and against HiGHS."""
import itertools

import numpy as np
import pytest
import scipy.sparse as sp

from qoradapt.optimizer import LinearProgram, solve_lp
from qoradapt.optimizer.simplex import BoundedSimplex


def lp_of(c, A, senses, rhs, lb, ub):
    n = len(c)
    return LinearProgram(c, sp.csr_matrix(np.asarray(A, float).reshape(-1, n)), senses, rhs, lb, ub, np.zeros(n, bool))


def vertex_oracle(lp):
    """Best vertex by enumerating every choice of n tight hyperplanes."""
    A = lp.A.toarray()
    n = lp.num_cols
    planes = [(A[i], lp.rhs[i]) for i in range(lp.num_rows)]
    for j in range(n):
        e = np.eye(n)[j]
        if np.isfinite(lp.lb[j]):
            planes.append((e, lp.lb[j]))
        if np.isfinite(lp.ub[j]):
            planes.append((e, lp.ub[j]))
    best = None
    for combo in itertools.combinations(range(len(planes)), n):
        M = np.array([planes[k][0] for k in combo])
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, np.array([planes[k][1] for k in combo]))
        if lp.violation(x) > 1e-9:
            continue
        val = lp.objective(x)
        if best is None or val < best:
            best = val
    return best


def random_bounded_lp(rng, n=3, m=3):
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.uniform(0, 3, n)  # keeps the instance feasible
    senses = rng.choice(["<", ">", "="], size=m, p=[0.45, 0.45, 0.1])
    act = A @ x0
    rhs = np.where(senses == "<", act + rng.uniform(0, 2, m), np.where(senses == ">", act - rng.uniform(0, 2, m), act))
    lb = np.zeros(n)
    ub = np.where(rng.random(n) < 0.7, rng.uniform(3, 6, n), 8.0)
    c = rng.integers(-5, 6, n).astype(float)
    return lp_of(c, A, senses, rhs, lb, ub)


def test_single_variable():
    lp = lp_of([1.0], [[1.0]], [">"], [3.0], [0.0], [np.inf])
    res = solve_lp(lp)
    assert res.ok and res.x[0] == pytest.approx(3.0) and res.objective == pytest.approx(3.0)


def test_contradictory_rows():
    lp = lp_of([1.0], [[1.0], [1.0]], [">", "<"], [2.0, 1.0], [0.0], [np.inf])
    assert solve_lp(lp).status == "infeasible"


def test_unbounded():
    lp = lp_of([-1.0, 0.0], [[1.0, -1.0]], ["<"], [1.0], [0.0, 0.0], [np.inf, np.inf])
    assert solve_lp(lp).status == "unbounded"


@pytest.mark.parametrize("seed", range(40))
def test_matches_vertex_enumeration(seed):
    lp = random_bounded_lp(np.random.default_rng(seed))
    res = solve_lp(lp)
    assert res.ok
    assert lp.violation(res.x) <= 1e-7
    expected = vertex_oracle(lp)
    assert res.objective == pytest.approx(expected, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("seed", range(15))
def test_matches_highs_on_larger_lps(seed):
    lp = random_bounded_lp(np.random.default_rng(1000 + seed), n=25, m=18)
    ours, ref = solve_lp(lp), solve_lp(lp, engine="highs")
    assert ours.status == ref.status == "optimal"
    assert ours.objective == pytest.approx(ref.objective, rel=1e-7, abs=1e-7)


def test_warm_start_after_bound_change():
    lp = random_bounded_lp(np.random.default_rng(7), n=6, m=5)
    eng = BoundedSimplex(lp)
    first = eng.solve()
    ub = lp.ub.copy()
    ub[0] = min(ub[0], first.x[0] / 2)
    warm = eng.solve(lp.lb, ub, basis=first.basis)
    cold = BoundedSimplex(lp).solve(lp.lb, ub)
    assert warm.status == cold.status
    if warm.ok:
        assert warm.objective == pytest.approx(cold.objective, rel=1e-9, abs=1e-9)


def test_lp_validation():
    with pytest.raises(ValueError):
        lp_of([1.0], [[1.0]], ["?"], [1.0], [0.0], [1.0])
    with pytest.raises(ValueError):
        lp_of([1.0], [[1.0]], ["<"], [1.0], [2.0], [1.0])
