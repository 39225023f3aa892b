import numpy as np
import pytest

from qoradapt import (
    TIER1,
    TIER2,
    InfeasibleError,
    MachineType,
    QoRPolicy,
    baseline_run,
    make_scenario,
    minimal_deployment,
    p4d_machine,
    validate_scenario,
)
from qoradapt.scenario import CarbonTrace, Deployment


def test_well_formed_scenario_has_no_problems():
    sc = make_scenario(np.full(24, 5.0), np.full(24, 200.0), [p4d_machine()], 0.5, 24)
    assert validate_scenario(sc) == []


def test_carbon_length_mismatch_reported_once():
    sc = make_scenario(np.full(24, 5.0), np.full(24, 200.0), [p4d_machine()])
    bad = sc.replace(carbon=CarbonTrace(np.full(23, 200.0)))
    problems = validate_scenario(bad)
    assert len(problems) == 1 and "length mismatch" in problems[0]


def test_target_out_of_range():
    sc = make_scenario(np.full(4, 5.0), np.full(4, 200.0), [p4d_machine()])
    problems = validate_scenario(sc.replace(policy=QoRPolicy(1.3, 1)))
    assert len(problems) == 1 and "target out of [0,1]" in problems[0]


def test_p4d_constants():
    m = p4d_machine()
    assert m.capacity_per_interval == pytest.approx((41652.0, 18180.0))
    assert m.power_watts == (3781.8, 3781.8)
    assert m.embodied_g_per_interval == 135.3


@pytest.mark.parametrize(
    "totals, expected",
    [((1.0e6, 0.0), (25, 0)), ((0.0, 5.0e5), (0, 28)), ((0.0, 0.0), (0, 0))],
)
def test_minimal_deployment_ceilings(totals, expected):
    d = minimal_deployment(totals, [p4d_machine()], 300.0)
    assert tuple(d[0]) == expected


def test_minimal_deployment_picks_cheaper_type():
    cheap = MachineType("cheap", (100.0, 100.0), (10.0, 10.0), 0.0)
    dear = MachineType("dear", (900.0, 900.0), (10.0, 10.0), 0.0)
    d = minimal_deployment((25.0, 0.0), [dear, cheap], 100.0)
    assert d[:, TIER1].tolist() == [0, 3]


def test_minimal_deployment_without_machines():
    with pytest.raises(InfeasibleError):
        minimal_deployment((1.0, 0.0), [], 100.0)


def test_baseline_static_p4d():
    sc = make_scenario(np.full(5, 1e6), np.full(5, 300.0), [p4d_machine()], 0.5, 1)
    deploy, alloc, total = baseline_run(sc)
    assert (deploy.values[:, 0, :] == [13, 28]).all()
    assert total == pytest.approx(5 * 41 * (3.7818 * 300 + 135.3), rel=1e-12)
    assert total / 5 == pytest.approx(52063.44, rel=1e-12)
    assert np.allclose(alloc.values[:, 0, TIER2], 5e5)


def test_baseline_target_zero_and_zero_demand():
    sc = make_scenario([3e5, 0.0], [300.0, 300.0], [p4d_machine()], 0.0, 1)
    deploy, _, total = baseline_run(sc)
    assert (deploy.values[:, :, TIER2] == 0).all()
    assert deploy.values[1].sum() == 0
    assert total == pytest.approx(8 * (3.7818 * 300 + 135.3))


def test_deployment_rejects_fractions():
    with pytest.raises(ValueError):
        Deployment(np.array([[[0.5, 1.0]]]))


def test_make_scenario_groups():
    sc = make_scenario(np.ones((3, 2)), np.ones(3), [p4d_machine()])
    assert [t.user_group for t in sc.requests] == ["u0", "u1"]
    assert sc.request_matrix.shape == (3, 2)
    assert sc.with_policy(target=0.2).policy.target == 0.2
