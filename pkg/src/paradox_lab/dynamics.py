"""Hamiltonians, propagators and the NOON-time calibration.

Two models are covered: the two-mode Josephson coupling used as a nonlinear
beam splitter between number states, and the single-mode Kerr Hamiltonian
``omega*n + Omega*n**k`` that produces multi-component cat states.  Units
take hbar = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import CalibrationError, KindError, ModeIndexError, ProjectorError
from .fock import ModeSpec, Operator, StateVector, number_state

# Rotation angles of the staged shuffles.  Each lies on the branch the
# protocol needs: cos = 1/sqrt3 with sin < 0, then the 7pi/4 half-splitter,
# then cos = -1/sqrt3 with sin < 0.
THETA_1I = 2 * math.pi - math.acos(1 / math.sqrt(3))
THETA_2 = 7 * math.pi / 4
THETA_1F = math.pi + math.acos(1 / math.sqrt(3))

FIT_SAMPLES = 2000
MAX_FIT_RESIDUAL = 0.05


@dataclass(frozen=True)
class JosephsonSpec:
    kappa: float
    g: float
    mode_pair: tuple[int, int] = (0, 1)

    def __post_init__(self) -> None:
        if self.kappa < 0 or self.g < 0:
            raise ValueError("kappa and g must be non-negative")
        k, l = self.mode_pair
        if k == l:
            raise ModeIndexError(f"mode_pair must name two distinct modes, got {self.mode_pair}")
        object.__setattr__(self, "mode_pair", (int(k), int(l)))

    def with_pair(self, k: int, l: int) -> JosephsonSpec:
        return JosephsonSpec(self.kappa, self.g, (k, l))


@dataclass(frozen=True)
class KerrSpec:
    Omega: float
    k_exp: int
    omega: float = 0.0

    def __post_init__(self) -> None:
        if self.Omega <= 0:
            raise ValueError(f"Omega must be positive, got {self.Omega}")
        if int(self.k_exp) != self.k_exp or self.k_exp < 2:
            raise ValueError(f"k_exp must be an integer >= 2, got {self.k_exp}")


@dataclass(frozen=True)
class NoonCalibration:
    """Fitted two-level frequency of a Josephson pair acting on |N,0>.

    ``population_floor`` is min(P_N + P_0) over the fitted half-period and
    ``residual`` the largest deviation of P_N from cos^2(omega_N t).
    """

    N: int
    spec: JosephsonSpec
    omega_N: float
    T_noon: float
    fidelity: float
    residual: float
    population_floor: float

    def __post_init__(self) -> None:
        if not self.omega_N > 0:
            raise ValueError("omega_N must be positive")
        if not 0.0 <= self.fidelity <= 1.0 + 1e-12:
            raise ValueError(f"fidelity {self.fidelity} outside [0, 1]")

    def time_for(self, theta: float) -> float:
        return theta / self.omega_N


def build_josephson(modes: ModeSpec, spec: JosephsonSpec) -> Operator:
    k, l = spec.mode_pair
    for m in (k, l):
        if not 0 <= m < modes.mode_count:
            raise ModeIndexError(f"mode index {m} outside 0..{modes.mode_count - 1}")
    dim = modes.dim
    H = np.zeros((dim, dim), dtype=complex)
    for i, occ in enumerate(modes.basis):
        nk, nl = occ[k], occ[l]
        H[i, i] = spec.g * (nk * (nk - 1) + nl * (nl - 1))
        if nl > 0 and nk < modes.n_max:
            # a_k^dag a_l moves one boson from l to k; the Hermitian partner
            # is filled in below.
            moved = list(occ)
            moved[k] += 1
            moved[l] -= 1
            j = modes.index(moved)
            amp = spec.kappa * math.sqrt(nl * (nk + 1))
            H[j, i] += amp
            H[i, j] += amp
    return Operator(modes, H, "hermitian")


def build_kerr(n_max: int, spec: KerrSpec) -> Operator:
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    n = np.arange(n_max + 1, dtype=float)
    return Operator(ModeSpec(1, n_max), np.diag(spec.omega * n + spec.Omega * n ** spec.k_exp), "hermitian")


def propagator(H: Operator, t: float) -> Operator:
    """exp(-i H t) from the cached eigendecomposition of ``H``."""
    if H.kind != "hermitian":
        raise KindError(f"propagator needs a Hermitian generator, got kind={H.kind!r}")
    w, V = H.spectrum
    phases = np.exp(-1j * w * t)
    return Operator(H.modes, (V * phases) @ V.conj().T, "unitary")


def evolve(state: StateVector, H: Operator, t: float) -> StateVector:
    return trajectory(state, H, [t])[0]


def trajectory(state: StateVector, H: Operator, times: Sequence[float]) -> list[StateVector]:
    """States exp(-iHt)|state> for every t, sharing one eigendecomposition."""
    if H.kind != "hermitian":
        raise KindError("trajectory needs a Hermitian generator")
    w, V = H.spectrum
    coeffs = V.conj().T @ state.amplitudes
    t = np.asarray(times, dtype=float)
    amps = (np.exp(-1j * np.outer(t, w)) * coeffs) @ V.T
    return [StateVector(state.modes, a) for a in amps]


def _pair_occupations(modes: ModeSpec, spec: JosephsonSpec, N: int) -> tuple[list[int], list[int]]:
    k, l = spec.mode_pair
    a = [0] * modes.mode_count
    b = [0] * modes.mode_count
    a[k] = N
    b[l] = N
    return a, b


def calibrate_noon(modes: ModeSpec, spec: JosephsonSpec, N: int) -> NoonCalibration:
    """Fit P_N(t) = cos^2(omega_N t) for |N>_k |0>_l evolving under H_kl."""
    H = build_josephson(modes, spec)
    occ_start, occ_other = _pair_occupations(modes, spec, N)
    start, other = number_state(modes, occ_start), number_state(modes, occ_other)
    i_start, i_other = modes.index(occ_start), modes.index(occ_other)

    w, V = H.spectrum
    coeffs = V.conj().T @ start.amplitudes
    weights = np.abs(coeffs) ** 2
    top = np.argsort(weights)[::-1][:2]
    if len(top) < 2 or weights[top[1]] < 1e-6:
        raise CalibrationError("|N,0> is (nearly) an eigenstate: no two-level oscillation to fit")
    omega0 = float(abs(w[top[0]] - w[top[1]]) / 2)
    if omega0 == 0:
        raise CalibrationError("degenerate doublet: no oscillation")

    times = np.linspace(0.0, math.pi / omega0, FIT_SAMPLES)
    amps = (np.exp(-1j * np.outer(times, w)) * coeffs) @ V.T
    p_n = np.abs(amps[:, i_start]) ** 2
    p_0 = np.abs(amps[:, i_other]) ** 2

    # Fit in units of omega0: the bounded optimizer's absolute tolerance would
    # otherwise swamp frequencies as small as ~1e-6.
    fit = minimize_scalar(
        lambda s: float(np.sum((p_n - np.cos(s * omega0 * times) ** 2) ** 2)),
        bounds=(0.8, 1.2),
        method="bounded",
        options={"xatol": 1e-12},
    )
    omega_n = float(fit.x) * omega0
    residual = float(np.max(np.abs(p_n - np.cos(omega_n * times) ** 2)))
    if residual > MAX_FIT_RESIDUAL:
        raise CalibrationError(
            f"cos^2 fit residual {residual:.3g} exceeds {MAX_FIT_RESIDUAL}: "
            "parameters are outside the nonlinear beam-splitter regime"
        )
    t_noon = (math.pi / 4) / omega_n
    target = StateVector.from_amplitudes(modes, start.amplitudes - 1j * other.amplitudes)
    fidelity = evolve(start, H, t_noon).fidelity(target)
    return NoonCalibration(
        N=N,
        spec=spec,
        omega_N=omega_n,
        T_noon=t_noon,
        fidelity=min(fidelity, 1.0),
        residual=residual,
        population_floor=float(np.min(p_n + p_0)),
    )


@lru_cache(maxsize=32)
def noon_calibration(N: int, kappa: float, g: float) -> NoonCalibration:
    """Calibration on the bare two-mode N-boson sector, memoized."""
    return calibrate_noon(ModeSpec.number_sector(2, N), JosephsonSpec(kappa, g), N)


def noon_trajectory(calibration: NoonCalibration, samples: int = 200) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t, P_N, P_0) over one period pi/omega_N of the calibrated pair."""
    modes = ModeSpec.number_sector(2, calibration.N)
    spec = JosephsonSpec(calibration.spec.kappa, calibration.spec.g)
    start, other = (number_state(modes, o) for o in _pair_occupations(modes, spec, calibration.N))
    H = build_josephson(modes, spec)
    times = np.linspace(0.0, math.pi / calibration.omega_N, samples)
    states = trajectory(start, H, times)
    p_n = np.array([abs(s.overlap(start)) ** 2 for s in states])
    p_0 = np.array([abs(s.overlap(other)) ** 2 for s in states])
    return times, p_n, p_0


def timed_box_unitary(
    theta: float,
    spec: JosephsonSpec,
    modes: ModeSpec,
    calibration: NoonCalibration | None = None,
) -> Operator:
    """Propagator of H_kl for the time theta / omega_N.

    ``modes`` must carry a boson-number sector; its N selects the calibration
    when none is supplied.
    """
    if calibration is None:
        if modes.sector is None:
            raise ValueError("timed_box_unitary needs a number-sector ModeSpec or an explicit calibration")
        calibration = noon_calibration(modes.sector, spec.kappa, spec.g)
    return propagator(build_josephson(modes, spec), theta / calibration.omega_N)


def leakage(state: StateVector, allowed: Sequence[StateVector]) -> float:
    if not allowed:
        return 1.0
    cols = np.column_stack([a.amplitudes for a in allowed])
    gram = cols.conj().T @ cols
    if np.abs(gram - np.eye(len(allowed))).max() > 1e-9:
        raise ProjectorError("allowed states are not orthonormal")
    captured = float(np.sum(np.abs(cols.conj().T @ state.amplitudes) ** 2))
    return min(1.0, max(0.0, 1.0 - captured))
