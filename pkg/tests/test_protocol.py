from __future__ import annotations

import json

import numpy as np
import pytest

from paradox_lab.errors import ArgumentError, TableError, VariantError
from paradox_lab.protocol import (
    DYNAMICS_TOL,
    ProbabilityTable,
    Scenario,
    build_model,
    disturbance_check,
    meso_phases,
    parse_bob,
    path_leakage,
    run,
    run_all,
    stage_compare,
    trace,
)

MESO = {2: (1.0, 30.0), 5: (20.0, 333.33)}


def test_scenario_validation():
    with pytest.raises(VariantError):
        Scenario("quantum")
    with pytest.raises(VariantError):
        Scenario("original", engine="dynamics")
    with pytest.raises(VariantError):
        Scenario("coherent", k_exp=4)
    with pytest.raises(ArgumentError):
        Scenario("original", bob=frozenset({1, 4}))
    with pytest.raises(ArgumentError):
        Scenario("coherent", bob=frozenset({1}))
    assert Scenario("coherent", bob=frozenset({4, 1})).setting == "B1,B4"


def test_parse_bob():
    assert parse_bob("open24") == frozenset({2, 4})
    assert parse_bob([1]) == frozenset({1})
    with pytest.raises(ArgumentError):
        parse_bob("open3")


def test_from_config(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"variant": "coherent_k2", "alpha0": 4, "bob_action": "open14"}))
    s = Scenario.from_json(path)
    assert (s.variant, s.k_exp, s.alpha0, s.bob) == ("coherent", 2, 4, frozenset({1, 4}))
    with pytest.raises(ArgumentError):
        Scenario.from_config({"variant": "original", "colour": "red"})
    path.write_text("{not json")
    with pytest.raises(ArgumentError):
        Scenario.from_json(path)


def test_original_no_measurement_table():
    t = run(Scenario("original"))
    assert t.marginal("1_2") == pytest.approx(1 / 3, abs=1e-12)
    assert [t.marginal(f"{b}_3") for b in (1, 2, 3)] == pytest.approx([0, 8 / 9, 1 / 9], abs=1e-12)
    assert t.time_sums() == pytest.approx({"1": 1.0, "2": 1.0, "3": 1.0})


def test_original_bob_tables():
    t1 = run(Scenario("original", bob=frozenset({1})))
    assert t1.marginal("1_2") == pytest.approx(1 / 3, abs=1e-12)
    assert t1.marginal("none_2") == pytest.approx(2 / 3, abs=1e-12)
    assert t1.conditional("1_2", "3_3") == pytest.approx(1.0, abs=1e-12)
    assert t1.joint("3_3", "1_2") == pytest.approx(1 / 9, abs=1e-12)
    assert t1.leakage["t2"] == 0.0
    with pytest.raises(TableError):
        t1.conditional("2_2", "3_3")


def test_law_of_total_probability():
    # branch weights reproduce the unmeasured t2 marginals
    for variant, bobs in (("original", [{1}, {2}]), ("coherent", [{1, 4}, {2, 4}])):
        free = run(Scenario(variant))
        for bob in bobs:
            t = run(Scenario(variant, bob=frozenset(bob)))
            for b in bob:
                assert t.marginal(f"{b}_2") == pytest.approx(free.marginal(f"{b}_2"), abs=1e-12)
            for b3 in range(1, 4 if variant == "original" else 5):
                summed = sum(t.joint(e, f"{b3}_3") for e in [f"{b}_2" for b in bob] + ["none_2"])
                assert summed == pytest.approx(t.marginal(f"{b3}_3"), abs=1e-12)


def test_coherent_k3_table():
    t = run(Scenario("coherent", bob=frozenset({1, 4})))
    assert t.marginal("3_3") == pytest.approx(1 / 8, abs=1e-12)
    assert t.conditional("{1,4}_2", "3_3") == pytest.approx(1.0, abs=1e-12)
    assert t.conditional("4_2", "3_3") == pytest.approx(0.5, abs=1e-12)
    assert run(Scenario("coherent")).marginal("3_3") == pytest.approx(0.0, abs=1e-12)


def test_coherent_disturbance_is_setting_independent_only():
    rep = disturbance_check(Scenario("coherent"))
    assert rep.setting_independent
    assert not rep.nondisturbing
    assert rep.to_json()["P(3_3)"]["N"] == pytest.approx(0.0, abs=1e-12)


def test_original_is_operationally_nondisturbing():
    rep = disturbance_check(Scenario("original"))
    assert rep.nondisturbing and rep.setting_independent
    assert rep.finals["N"] == pytest.approx((0, 8 / 9, 1 / 9), abs=1e-12)


@pytest.mark.parametrize("N", [2, 5])
def test_meso_dynamics_matches_box_algebra(N):
    kappa, g = MESO[N]
    for bob in ((), (1,), (2,)):
        s = Scenario("mesoscopic", bob=frozenset(bob), engine="dynamics", N=N, kappa=kappa, g=g)
        dyn = run(s)
        box = run(Scenario("mesoscopic", bob=frozenset(bob)))
        for key, p in box.marginals.items():
            assert abs(dyn.marginal(key) - p) < DYNAMICS_TOL, key
        for (a, b), p in box.conditionals.items():
            assert abs(dyn.conditional(a, b) - p) < DYNAMICS_TOL, (a, b)


@pytest.mark.parametrize("N", [2, 5])
def test_meso_path_leakage(N):
    kappa, g = MESO[N]
    leak = path_leakage(Scenario("mesoscopic", engine="dynamics", N=N, kappa=kappa, g=g))
    assert leak.preparation < 3e-3
    assert leak.postselection < 6e-3
    assert leak.alice_max < 8e-3


def test_meso_phases_are_finite_and_drive_box_engine():
    phi, phi1 = meso_phases(2, 1.0, 30.0)
    assert np.isfinite([phi, phi1]).all()
    t = run(Scenario("mesoscopic", bob=frozenset({1}), phi=phi, phi1=phi1))
    assert t.conditional("1_2", "3_3") == pytest.approx(1.0, abs=1e-12)


def test_coherent_fock_engine_matches_box():
    box = run(Scenario("coherent", bob=frozenset({2, 4})))
    dyn = run(Scenario("coherent", bob=frozenset({2, 4}), engine="dynamics", alpha0=3.0))
    for key, p in box.marginals.items():
        assert abs(dyn.marginal(key) - p) < 1e-6, key


def test_raw_coherent_start_converges_with_amplitude():
    errs = []
    for a0 in (3.0, 5.0):
        dyn = run(Scenario("coherent", bob=frozenset({1, 4}), engine="dynamics", alpha0=a0, raw_coherent_start=True))
        errs.append(abs(dyn.marginal("3_3") - 1 / 8))
    assert errs[1] < errs[0] and errs[1] < 1e-9


def test_trace_tags_sequence_times():
    stages = trace(Scenario("original", bob=frozenset({1})))
    assert [s.time for s in stages] == ["t0", "", "t1", "t2", "", "t3"]
    assert stages[3].name == "bob"


def test_stage_compare_original():
    comp = stage_compare(Scenario("original"))
    assert comp.mixture_from == ("3",)
    first = comp.row("U_2f^-1")
    assert first.superposition == pytest.approx((0, 2 / 3, 1 / 3), abs=1e-12)
    assert first.mixture == pytest.approx((0, 2 / 3, 1 / 3), abs=1e-12)
    last = comp.row("U_1f^-1")
    assert last.superposition == pytest.approx((0, 8 / 9, 1 / 9), abs=1e-12)
    # U_1f^-1 mixes boxes 2 and 3 only, so box 1 stays empty for the mixture
    assert last.mixture == pytest.approx((0, 4 / 9, 5 / 9), abs=1e-12)


def test_mixture_oracle_by_hand():
    # rho_3,mix = 1/3 |3><3| + 2/3 |a><a| with |a> = (|1>+|2>)/sqrt2
    from paradox_lab.boxalgebra import standard_unitaries

    us = standard_unitaries("original")
    stage1, stage2 = (us[n].matrix for n in us.alice_stages)
    rho = np.diag([0, 0, 1 / 3]).astype(complex)
    a = np.array([1, 1, 0]) / np.sqrt(2)
    rho += 2 / 3 * np.outer(a, a.conj())
    rho = stage2 @ stage1 @ rho @ stage1.conj().T @ stage2.conj().T
    comp = stage_compare(Scenario("original"))
    assert comp.row("U_1f^-1").mixture == pytest.approx(np.real(np.diag(rho)), abs=1e-12)


def test_table_serialization_is_deterministic(tmp_path):
    t = run(Scenario("coherent", bob=frozenset({1, 4})))
    a, b = t.to_csv(tmp_path / "a.csv"), run(Scenario("coherent", bob=frozenset({1, 4}))).to_csv(tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "kind,event,conditioning,value"
    assert any(line.startswith("joint,{1,4}_2&3_3,") or line.startswith('joint,"{1,4}_2&3_3"') for line in lines)
    payload = t.to_json()
    assert payload["conditionals"]["4_2|3_3"] == pytest.approx(0.5)


def test_merge_keeps_first_table():
    tabs = run_all(Scenario("original"))
    merged = ProbabilityTable.merge(tabs["B1"], tabs["B2"])
    assert merged.setting == "B1+B2"
    assert merged.has("joint", "1_2", "3_3") and merged.has("joint", "2_2", "3_3")
    assert merged.marginal("none_2") == tabs["B1"].marginal("none_2")
    with pytest.raises(TableError):
        ProbabilityTable.merge()


def test_model_is_reused():
    s = Scenario("mesoscopic", engine="dynamics")
    m = build_model(s)
    assert m.is_fock and len(m.box_states) == 3
    assert abs(sum(m.probabilities(m.psi_sup())) - 1) < 3e-3
