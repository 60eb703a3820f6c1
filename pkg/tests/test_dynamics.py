from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from paradox_lab.dynamics import (
    THETA_1I,
    THETA_2,
    JosephsonSpec,
    KerrSpec,
    build_josephson,
    build_kerr,
    calibrate_noon,
    evolve,
    leakage,
    noon_calibration,
    noon_trajectory,
    propagator,
    timed_box_unitary,
    trajectory,
)
from paradox_lab.errors import CalibrationError, KindError, ModeIndexError, ProjectorError
from paradox_lab.fock import ModeSpec, Operator, StateVector, coherent_state, default_n_max, number_state


def _ladder_josephson(n_max: int, kappa: float, g: float) -> np.ndarray:
    """Two-mode H_kl from Kronecker products of truncated ladder operators."""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1)), 1)
    eye = np.eye(n_max + 1)
    ak, al = np.kron(a, eye), np.kron(eye, a)
    return (
        kappa * (ak.conj().T @ al + ak @ al.conj().T)
        + g * ak.conj().T @ ak.conj().T @ ak @ ak
        + g * al.conj().T @ al.conj().T @ al @ al
    )


def test_josephson_matches_ladder_construction():
    n_max = 4
    full = _ladder_josephson(n_max, 0.7, 3.0)
    H = build_josephson(ModeSpec(2, n_max), JosephsonSpec(0.7, 3.0))
    # off the truncation edge the two constructions agree entry by entry
    spec = ModeSpec(2, n_max)
    inner = [i for i, occ in enumerate(spec.basis) if sum(occ) <= n_max]
    assert np.allclose(H.matrix[np.ix_(inner, inner)], full[np.ix_(inner, inner)])


def test_josephson_sector_blocks_agree_with_full_space():
    N = 3
    full = build_josephson(ModeSpec(3, N), JosephsonSpec(1.0, 5.0, (2, 1)))
    sector = build_josephson(ModeSpec.number_sector(3, N), JosephsonSpec(1.0, 5.0, (2, 1)))
    idx = [full.modes.index(occ) for occ in sector.modes.basis]
    assert np.allclose(full.matrix[np.ix_(idx, idx)], sector.matrix)


def test_josephson_single_boson_is_beam_splitter():
    H = build_josephson(ModeSpec.number_sector(2, 1), JosephsonSpec(2.0, 99.0))
    assert np.allclose(H.matrix, [[0, 2], [2, 0]])


def test_josephson_commutes_with_number():
    modes = ModeSpec(3, 3)
    H = build_josephson(modes, JosephsonSpec(1.0, 2.0, (0, 2))).matrix
    n = np.diag(modes.number_operator_diagonal())
    assert np.abs(H @ n - n @ H).max() < 1e-12


def test_josephson_bad_modes():
    with pytest.raises(ModeIndexError):
        JosephsonSpec(1, 1, (1, 1))
    with pytest.raises(ModeIndexError):
        build_josephson(ModeSpec(2, 2), JosephsonSpec(1, 1, (0, 2)))


def test_kerr_diagonal():
    H = build_kerr(4, KerrSpec(1.0, 3))
    assert np.allclose(np.diag(H.matrix), [0, 1, 8, 27, 64])
    H = build_kerr(3, KerrSpec(0.5, 2, omega=2.0))
    assert np.diag(H.matrix)[0] == 0
    assert np.diag(H.matrix)[2] == pytest.approx(2 * 2 + 0.5 * 4)


def test_propagator_matches_expm():
    H = build_josephson(ModeSpec.number_sector(3, 2), JosephsonSpec(1.0, 30.0, (1, 0)))
    U = propagator(H, 0.37)
    assert np.allclose(U.matrix, expm(-1j * 0.37 * H.matrix), atol=1e-12)
    assert np.allclose(propagator(H, 0.0).matrix, np.eye(H.modes.dim), atol=1e-12)


def test_propagator_rejects_non_hermitian():
    op = Operator(ModeSpec(1, 1), [[0, 1], [0, 0]])
    with pytest.raises(KindError):
        propagator(op, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_propagator_group_and_inverse(t1, t2):
    H = build_josephson(ModeSpec.number_sector(2, 3), JosephsonSpec(1.3, 4.0))
    u1, u2 = propagator(H, t1), propagator(H, t2)
    assert np.abs((u1 @ u2).matrix - propagator(H, t1 + t2).matrix).max() < 1e-8
    assert np.abs(u1.dagger().matrix - propagator(H, -t1).matrix).max() < 1e-9


def test_trajectory_conserves_number_and_norm():
    modes = ModeSpec(2, 4)
    H = build_josephson(modes, JosephsonSpec(1.0, 3.0))
    psi = StateVector.from_amplitudes(modes, np.arange(modes.dim) + 1j)
    n = np.diag(modes.number_operator_diagonal())
    n0 = np.vdot(psi.amplitudes, n @ psi.amplitudes).real
    for s in trajectory(psi, H, np.linspace(0, 3, 31)):
        assert abs(np.linalg.norm(s.amplitudes) - 1) < 1e-10
        assert abs(np.vdot(s.amplitudes, n @ s.amplitudes).real - n0) < 1e-10


def test_kerr_populations_are_invariant():
    psi = coherent_state(2.0)
    H = build_kerr(psi.modes.n_max, KerrSpec(1.0, 3))
    out = evolve(psi, H, 0.731)
    assert np.allclose(out.probabilities(), psi.probabilities(), atol=1e-14)


def test_kerr_inverse_identity():
    H = build_kerr(30, KerrSpec(1.3, 3))
    a = propagator(H, 3 * math.pi / (2 * 1.3))
    b = propagator(H, math.pi / (2 * 1.3)).dagger()
    assert np.abs(a.matrix - b.matrix).max() < 1e-9


@pytest.mark.parametrize("k", [2, 3])
def test_kerr_half_period_flips_amplitude(k):
    a0, Omega = 3.0, 0.8
    n_max = default_n_max(a0)
    psi = coherent_state(a0, n_max)
    H = build_kerr(n_max, KerrSpec(Omega, k))
    assert evolve(psi, H, 2 * math.pi / Omega).fidelity(psi) > 1 - 1e-9
    assert evolve(psi, H, math.pi / Omega).fidelity(coherent_state(-a0, n_max)) > 1 - 1e-9


def test_kappa_zero_cannot_calibrate():
    with pytest.raises(CalibrationError):
        calibrate_noon(ModeSpec.number_sector(2, 2), JosephsonSpec(0.0, 30.0), 2)
    H = build_josephson(ModeSpec.number_sector(2, 2), JosephsonSpec(0.0, 30.0))
    start = number_state(H.modes, (2, 0))
    assert evolve(start, H, 1.7).fidelity(start) == pytest.approx(1.0, abs=1e-12)


def test_weak_nonlinearity_is_rejected():
    with pytest.raises(CalibrationError):
        calibrate_noon(ModeSpec.number_sector(2, 2), JosephsonSpec(1.0, 0.001), 2)


@pytest.mark.parametrize("N,kappa,g", [(2, 1.0, 30.0), (5, 20.0, 333.33)])
def test_noon_calibration(N, kappa, g):
    cal = noon_calibration(N, kappa, g)
    assert cal.fidelity >= 0.99
    assert cal.residual < 0.05
    assert cal.population_floor >= 0.99
    assert cal.T_noon == pytest.approx(math.pi / 4 / cal.omega_N)
    t, p_n, p_0 = noon_trajectory(cal)
    assert len(t) == 200 and np.min(p_n + p_0) >= 0.99


def test_noon_frequency_regression():
    # N=2: |2,0> and |0,2> couple through |1,1> at energy detuning 2g, so
    # second order gives omega_N ~ (sqrt2 kappa)^2 / (2g) = kappa^2 / g.
    cal = noon_calibration(2, 1.0, 30.0)
    assert cal.omega_N == pytest.approx(1.0 / 30.0, rel=0.01)


def test_timed_box_unitaries_on_box_states():
    modes = ModeSpec.number_sector(3, 2)
    spec = JosephsonSpec(1.0, 30.0)
    three, two = number_state(modes, (0, 0, 2)), number_state(modes, (0, 2, 0))
    boxes = [number_state(modes, occ) for occ in ((2, 0, 0), (0, 2, 0), (0, 0, 2))]

    psi = timed_box_unitary(THETA_1I, spec.with_pair(2, 1), modes).apply(three)
    probs = [b.fidelity(psi) for b in boxes]
    assert np.allclose(probs, [0, 2 / 3, 1 / 3], atol=3e-3)

    psi = timed_box_unitary(THETA_2, spec.with_pair(1, 0), modes).apply(two)
    probs = [b.fidelity(psi) for b in boxes]
    assert np.allclose(probs, [1 / 2, 1 / 2, 0], atol=3e-3)

    full = timed_box_unitary(2 * math.pi, spec.with_pair(1, 0), modes).apply(two)
    assert full.fidelity(two) > 1 - 3e-3


def test_leakage():
    modes = ModeSpec.number_sector(3, 2)
    boxes = [number_state(modes, occ) for occ in ((2, 0, 0), (0, 2, 0), (0, 0, 2))]
    assert leakage(boxes[0], boxes) == pytest.approx(0.0, abs=1e-12)
    mid = number_state(modes, (1, 1, 0))
    assert leakage(mid, boxes) == pytest.approx(1.0)
    with pytest.raises(ProjectorError):
        leakage(boxes[0], [boxes[0], boxes[0]])
