import numpy as np
import pytest
from conftest import small_doc
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from netisac.driver import (
    CASES,
    CaseSpec,
    exhaustive_association,
    gamma_sweep,
    initialize,
    optimize_association,
    run_benchmark,
    solve,
    straight_flight,
    straight_plan,
)
from netisac.scenario import InfeasibleScenario, bundled_scenario, scenario_from_dict


def test_case_numbers():
    assert [CaseSpec.from_number(i).number for i in (1, 2, 3, 4)] == [1, 2, 3, 4]
    assert CASES[4] == CaseSpec("vertical", "TypeII")
    with pytest.raises(ValueError):
        CaseSpec.from_number(5)


def test_association_examples():
    r = np.array([2.0, 1.0, 0.5]).reshape(3, 1, 1)
    assert optimize_association(r).gbs_of[0, 0] == 0
    tie = np.ones((3, 1, 1))
    assert optimize_association(tie).gbs_of[0, 0] == 0
    r = np.zeros((3, 1, 1))
    r[2] = 1.0
    assert optimize_association(r).gbs_of[0, 0] == 2


@given(arrays(float, st.tuples(st.integers(1, 3), st.integers(1, 2), st.integers(1, 3)),
              elements=st.floats(0, 20)))
def test_association_matches_brute_force(r):
    a = optimize_association(r)
    _, best = exhaustive_association(r)
    K, N = r.shape[1:]
    got = sum(r[a.gbs_of[k, n], k, n] for k in range(K) for n in range(N))
    assert got == pytest.approx(best, abs=1e-12)


def test_straight_flight_examples():
    q = straight_flight((1.0, 2.0), (1.0, 2.0), 5)
    assert np.all(q == [1.0, 2.0])
    sc = bundled_scenario("default")
    plan = straight_plan(sc)
    steps = np.linalg.norm(np.diff(plan.q, axis=1), axis=2)
    assert np.allclose(steps, 300 / 39, rtol=1e-12)
    assert np.array_equal(plan.q[:, 0], sc.uav_start) and np.array_equal(plan.q[:, -1], sc.uav_end)


def _tiny(**over):
    doc = small_doc(n_slots=3, max_step=90.0, **over)
    doc["solver"] = {"max_sca_iters": 3, "max_tr_iters": 4, "max_rounds": 2}
    return scenario_from_dict(doc)


def test_infeasible_threshold_raises():
    sc = _tiny(gamma=1.0)
    with pytest.raises(InfeasibleScenario):
        solve(CASES[1], sc)


def test_solve_report_consistent():
    sc = _tiny()
    rep = solve(CASES[2], sc)
    assert np.all(np.diff(rep.history) >= 0)
    assert rep.objective == rep.history[-1]
    assert rep.per_slot_rates.sum() == pytest.approx(rep.objective, rel=1e-12)
    assert rep.average_sum_rate == pytest.approx(rep.objective / sc.n_slots)
    res = rep.residuals[-1]
    assert res["max_power_ratio"] <= 1 + 1e-8 and res["min_illumination_ratio"] >= 1 - 1e-6
    assert res["flight_violation_m"] <= 1e-6


def test_benchmarks_bounded_by_full_from_shared_start():
    sc = _tiny()
    case = CASES[1]
    base = run_benchmark("straight_flight", case, sc)
    full = solve(case, sc, start=(base.traj, base.beams, base.assoc))
    assert full.objective >= base.objective - 1e-9
    assert np.array_equal(base.traj.q, straight_plan(sc).q)


def test_isotropic_keeps_scaled_identity():
    sc = _tiny()
    rep = run_benchmark("isotropic", CASES[1], sc)
    W = rep.beams.W
    scale = np.trace(W, axis1=-2, axis2=-1)[..., None, None] / 4
    assert np.allclose(W, scale * np.eye(4), atol=1e-12)


def test_start_validation():
    sc = _tiny()
    traj, beams, assoc, _ = initialize(CASES[1], sc)
    moved = traj.copy()
    moved.q[:, 1] += 1.0
    with pytest.raises(ValueError):
        run_benchmark("straight_flight", CASES[1], sc, start=(moved, beams, assoc))
    skewed = beams.copy()
    skewed.W[:, 0, 0, 0, 0] += 1e-3  # still feasible, no longer isotropic
    with pytest.raises(ValueError):
        run_benchmark("isotropic", CASES[1], sc, start=(traj, skewed, assoc))
    with pytest.raises(ValueError):
        run_benchmark("bogus", CASES[1], sc)


def test_sweep_continuation_monotone():
    sc = _tiny()
    pts = gamma_sweep([(CASES[1], "full")], sc, [1e-6, 1e-5, 1.0], max_rounds=1)
    status = {p.gamma: p.status for p in pts}
    assert status[1.0] == "infeasible"
    ok = [p for p in pts if p.status == "ok"]
    assert ok[0].report.objective >= ok[1].report.objective - 1e-9
