from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paradox_lab.errors import TableError
from paradox_lab.leggett_garg import (
    LambdaAssignment,
    deterministic_trajectories,
    direct_q,
    lg_for_scenario,
    lg_fourbox,
    lg_statistic,
    lg_threebox,
    random_mixture,
    trajectory_table,
)
from paradox_lab.protocol import ProbabilityTable, Scenario, run_all


def _bob_tables(s):
    return [t for k, t in run_all(s).items() if k != "N"]


def test_threebox_quantum_value():
    r = lg_threebox(*_bob_tables(Scenario("original")))
    assert r.Q == pytest.approx(-13 / 9, abs=1e-12)
    assert r.violated
    assert sum(r.terms.values()) == pytest.approx(r.Q, abs=1e-12)


def test_fourbox_quantum_value():
    r = lg_fourbox(*_bob_tables(Scenario("coherent")))
    assert r.Q == pytest.approx(-5 / 4, abs=1e-12)
    assert r.violated
    assert sum(r.terms.values()) == pytest.approx(r.Q, abs=1e-12)


def test_fourbox_k2_same_value():
    assert lg_fourbox(*_bob_tables(Scenario("coherent", k_exp=2))).Q == pytest.approx(-5 / 4, abs=1e-12)


def test_fourbox_from_stated_conditionals():
    # P(3_3)=1/8 with conditionals 1, 1, 1/2 gives -5/4
    table = ProbabilityTable(
        "coherent_k3",
        "manual",
        "B1,B4+B2,B4",
        {"3_3": 1 / 8, "{1,4}_2": 1 / 2, "{2,4}_2": 1 / 2, "4_2": 1 / 4},
        {("{1,4}_2", "3_3"): 1 / 8, ("{2,4}_2", "3_3"): 1 / 8, ("4_2", "3_3"): 1 / 16},
    )
    assert lg_fourbox(table).Q == pytest.approx(-5 / 4, abs=1e-15)


def test_ball_stays_in_box_three():
    for n in (3, 4):
        r = lg_statistic(trajectory_table({(3, 3): 1.0}, n), n)
        assert r.Q == pytest.approx(3.0) and not r.violated


def test_missing_entries_raise():
    table = ProbabilityTable("original", "manual", "B1", {"3_3": 1 / 9, "1_2": 1 / 3})
    with pytest.raises(TableError, match="joint"):
        lg_threebox(table)
    with pytest.raises(TableError):
        lg_fourbox(table)


@pytest.mark.parametrize("n", [3, 4])
def test_all_deterministic_trajectories_respect_bound(n):
    trajs = deterministic_trajectories(n)
    assert len(trajs) == n * n
    for traj in trajs:
        r = lg_statistic(trajectory_table({traj: 1.0}, n), n)
        assert -1 <= r.Q <= 3
        assert r.Q == pytest.approx(direct_q({traj: 1.0}), abs=1e-12)


@pytest.mark.parametrize("n", [3, 4])
def test_random_mixtures_respect_bound(n):
    rng = np.random.default_rng(20240611)
    for _ in range(500):
        w = random_mixture(n, rng)
        r = lg_statistic(trajectory_table(w, n), n)
        assert -1 - 1e-12 <= r.Q <= 3 + 1e-12
        assert r.Q == pytest.approx(direct_q(w), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 4), st.lists(st.floats(0, 1), min_size=16, max_size=16))
def test_decomposition_identity(n, raw):
    trajs = deterministic_trajectories(n)
    w = np.array(raw[: len(trajs)]) + 1e-9
    weights = dict(zip(trajs, w / w.sum()))
    r = lg_statistic(trajectory_table(weights, n), n)
    # Q = 4 P(3_2, 3_3) - 1 and Q = sum of the three correlators
    assert r.Q == pytest.approx(4 * weights[(3, 3)] - 1, abs=1e-12)
    assert sum(r.terms.values()) == pytest.approx(r.Q, abs=1e-12)
    assert r.Q == pytest.approx(direct_q(weights), abs=1e-12)


def test_lambda_assignment():
    lam = LambdaAssignment.box3_positive(4)
    assert lam(2, 3) == 1 and lam(3, "4") == -1
    with pytest.raises(ValueError):
        LambdaAssignment({1: {"1": 0}})
    with pytest.raises(ValueError):
        LambdaAssignment({1: {"1": 1}, 2: {"2": 1}})


def test_condition_report_and_json():
    three = lg_for_scenario(Scenario("original"))
    assert three.condition["operationally_nondisturbing"] is True
    four = lg_for_scenario(Scenario("coherent"))
    assert four.condition["operationally_nondisturbing"] is False
    assert four.condition["setting_independent"] is True
    payload = json.loads(json.dumps(four.to_json()))
    assert set(payload) >= {"Q", "terms", "violated", "inputs"}
    assert four.Q_value == four.Q


def test_meso_dynamics_violation_close_to_ideal():
    r = lg_for_scenario(Scenario("mesoscopic", engine="dynamics", N=5, kappa=20.0, g=333.33))
    assert r.Q == pytest.approx(-13 / 9, abs=2e-2)
    assert r.violated
