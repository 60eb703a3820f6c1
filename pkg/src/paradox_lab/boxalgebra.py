"""Exact box-basis algebra for the three- and four-box paradoxes.

Each box is one basis vector; shuffles are small unitary matrices.  The
coherent-state variants treat their four cat components as an exact
orthonormal basis, which is the large-amplitude limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .errors import ArgumentError, BasisError, VariantError
from .fock import ZERO_WEIGHT, Ensemble, Member

UNITARY_TOL = 1e-12
NORM_TOL = 1e-12

S2, S3, S6 = math.sqrt(2), math.sqrt(3), math.sqrt(6)

VARIANTS = ("original", "mesoscopic", "coherent_k3", "coherent_k2")


@dataclass(frozen=True)
class BoxBasis:
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"box labels must be distinct: {labels}")
        if len(labels) not in (3, 4):
            raise ValueError("only three- and four-box bases are supported")
        object.__setattr__(self, "labels", labels)

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def index(self, label: Any) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise ArgumentError(f"no box {label!r} in basis {self.labels}") from None


THREE_BOX = BoxBasis(("1", "2", "3"))
FOUR_BOX = BoxBasis(("1", "2", "3", "4"))


@dataclass(frozen=True, eq=False)
class BoxVector:
    basis: BoxBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.basis.dimension,):
            raise BasisError(f"expected {self.basis.dimension} amplitudes, got {amps.shape[0]}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"box vector is not normalized (norm={norm:.15g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, basis: BoxBasis, amplitudes: Iterable[complex]) -> BoxVector:
        amps = np.asarray(list(amplitudes), dtype=complex)
        return cls(basis, amps / np.linalg.norm(amps))

    @classmethod
    def box(cls, basis: BoxBasis, label: Any) -> BoxVector:
        amps = np.zeros(basis.dimension, dtype=complex)
        amps[basis.index(label)] = 1.0
        return cls(basis, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def probability(self, label: Any) -> float:
        return float(abs(self.amplitudes[self.basis.index(label)]) ** 2)

    def overlap(self, other: BoxVector) -> complex:
        _check_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class BoxUnitary:
    basis: BoxBasis
    matrix: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=complex)
        d = self.basis.dimension
        if mat.shape != (d, d):
            raise BasisError(f"matrix shape {mat.shape} does not match a {d}-box basis")
        defect = float(np.abs(mat.conj().T @ mat - np.eye(d)).max())
        if defect > UNITARY_TOL:
            raise ValueError(f"{self.provenance or 'matrix'} is not unitary (defect {defect:.3g})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def inverse(self, provenance: str | None = None) -> BoxUnitary:
        return BoxUnitary(self.basis, self.matrix.conj().T, provenance or f"inverse of {self.provenance}")

    def __matmul__(self, other: BoxUnitary) -> BoxUnitary:
        _check_basis(self.basis, other.basis)
        return BoxUnitary(self.basis, self.matrix @ other.matrix, f"({self.provenance}) after ({other.provenance})")

    def to_json(self) -> dict[str, Any]:
        return {
            "basis": list(self.basis.labels),
            "provenance": self.provenance,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


def _check_basis(a: BoxBasis, b: BoxBasis) -> None:
    if a != b:
        raise BasisError(f"basis mismatch: {a.labels} vs {b.labels}")


def apply(U: BoxUnitary, v: BoxVector) -> BoxVector:
    _check_basis(U.basis, v.basis)
    return BoxVector(v.basis, U.matrix @ v.amplitudes)


@dataclass(frozen=True)
class UnitarySet:
    """Named unitaries of one variant plus the order in which they act.

    ``preparation`` takes |3> to the superposition at t1; ``alice_stages``
    is Alice's shuffle between t2 and t3.  ``kerr_times`` gives, for the
    coherent variants, the Omega*t of each stage's Kerr evolution.
    """

    variant: str
    basis: BoxBasis
    unitaries: Mapping[str, BoxUnitary]
    preparation: tuple[str, ...]
    alice_stages: tuple[str, ...]
    kerr_times: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> BoxUnitary:
        return self.unitaries[name]

    def names(self) -> tuple[str, ...]:
        return tuple(self.unitaries)

    def initial(self) -> BoxVector:
        return BoxVector.box(self.basis, "3")

    def psi_sup(self) -> BoxVector:
        v = self.initial()
        for name in self.preparation:
            v = apply(self[name], v)
        return v

    def psi_f(self) -> BoxVector:
        """The state Alice's shuffle maps onto |3>."""
        return apply(self["U_f"].inverse(), self.initial())

    def alice(self, v: BoxVector) -> BoxVector:
        for name in self.alice_stages:
            v = apply(self[name], v)
        return v

    def to_json(self) -> dict[str, Any]:
        return {
            "variant": self.variant,
            "basis": list(self.basis.labels),
            "preparation": list(self.preparation),
            "alice_stages": list(self.alice_stages),
            "unitaries": {name: u.to_json() for name, u in self.unitaries.items()},
        }


# Box index m of each coherent component, |box> ~ |(-i)^m alpha0>.
COHERENT_POWERS = {"1": 1, "2": 3, "3": 0, "4": 2}


def kerr_box_matrix(k_exp: int, omega_t: float, basis_phases: Iterable[complex] = (1, 1, 1, 1)) -> np.ndarray:
    """Action of exp(-i Omega t n^k) on the four phased coherent boxes.

    Exact when the Kerr phase exp(-i Omega t n^k) depends only on n mod 4,
    which is checked; the result is then a circulant in the box powers.
    """
    k = int(k_exp)
    phases = np.asarray(list(basis_phases), dtype=complex)
    # Integer-valued check of a degree k-1 polynomial on k consecutive points.
    for n in range(k + 1):
        turns = omega_t * ((n + 4) ** k - n ** k) / (2 * math.pi)
        if abs(turns - round(turns)) > 1e-9:
            raise ValueError(f"Omega*t = {omega_t} is not a 4-fold Kerr revival time for k={k}")
    f = np.exp(-1j * omega_t * np.arange(4) ** k)
    coeff = np.array([np.sum(f * 1j ** (m * np.arange(4))) / 4 for m in range(4)])
    labels = FOUR_BOX.labels
    mat = np.empty((4, 4), dtype=complex)
    for a, la in enumerate(labels):
        for b, lb in enumerate(labels):
            shift = (COHERENT_POWERS[la] - COHERENT_POWERS[lb]) % 4
            mat[a, b] = coeff[shift] * phases[b] / phases[a]
    return _snap(mat)


def _snap(mat: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Round off sub-ulp noise so exact zeros in the algebra stay exact."""
    re = np.where(np.abs(mat.real) < tol, 0.0, mat.real)
    im = np.where(np.abs(mat.imag) < tol, 0.0, mat.imag)
    return re + 1j * im


def _three(rows: list[list[complex]], scale: float, note: str) -> BoxUnitary:
    return BoxUnitary(THREE_BOX, np.array(rows, dtype=complex) / scale, note)


def _staged_three(variant: str, u1i: BoxUnitary, u2i: BoxUnitary, u1f: BoxUnitary) -> UnitarySet:
    u2f = BoxUnitary(THREE_BOX, u2i.matrix, "boxes 1-2 splitter, same as U_2i")
    u_i = BoxUnitary(THREE_BOX, u2i.matrix @ u1i.matrix, "preparation U_2i U_1i")
    u_f_inv = BoxUnitary(THREE_BOX, u2f.matrix @ u1f.matrix, "inverse shuffle U_2f U_1f")
    u_f = u_f_inv.inverse("Alice's shuffle U_1f^-1 U_2f^-1")
    return UnitarySet(
        variant=variant,
        basis=THREE_BOX,
        unitaries={
            "U_1i": u1i,
            "U_2i": u2i,
            "U_i": u_i,
            "U_1f": u1f,
            "U_2f": u2f,
            "U_f": u_f,
            "U_f^-1": u_f_inv,
            "U_2f^-1": u2f.inverse("Alice stage 1: boxes 1-2"),
            "U_1f^-1": u1f.inverse("Alice stage 2: boxes 2-3"),
        },
        preparation=("U_1i", "U_2i"),
        alice_stages=("U_2f^-1", "U_1f^-1"),
    )


def _original() -> UnitarySet:
    u1i = _three([[S3, 0, 0], [0, -1, S2], [0, S2, 1]], S3, "boxes 2-3 rotation: |3> -> sqrt(2/3)|2> + |3>/sqrt3")
    u2i = _three([[-1, 1, 0], [1, 1, 0], [0, 0, S2]], S2, "boxes 1-2 splitter: |2> -> (|1>+|2>)/sqrt2")
    u1f = _three([[S3, 0, 0], [0, 1, S2], [0, S2, -1]], S3, "boxes 2-3 rotation: |3> -> sqrt(2/3)|2> - |3>/sqrt3")
    return _staged_three("original", u1i, u2i, u1f)


def _mesoscopic(phi: float, phi1: float) -> UnitarySet:
    e, e1 = np.exp(1j * phi), np.exp(1j * phi1)
    u1i = _three(
        [[S3, 0, 0], [0, -1j * e, 1j * e * S2], [0, e * S2, e]],
        S3,
        "H_32 evolution at theta = 2pi - arccos(1/sqrt3)",
    )
    u2i = _three(
        [[-1j * e1, 1j * e1, 0], [e1, e1, 0], [0, 0, S2]],
        S2,
        "H_21 evolution at theta = 7pi/4",
    )
    u1f = _three(
        [[S3, 0, 0], [0, -1j * e, 1j * e * S2], [0, -e * S2, -e]],
        S3,
        "H_32 evolution at theta = pi + arccos(1/sqrt3)",
    )
    return _staged_three("mesoscopic", u1i, u2i, u1f)


def _kerr_unitary(k_exp: int, omega_t: float, phases: tuple[complex, ...], note: str, scale: complex = 1) -> BoxUnitary:
    return BoxUnitary(FOUR_BOX, scale * kerr_box_matrix(k_exp, omega_t, phases), note)


def _coherent_k3() -> UnitarySet:
    ph = (1, 1, 1, 1)
    times = {"U_i": math.pi / 2, "U_f1": 3 * math.pi / 2, "U_f2": math.pi}
    u_i = _kerr_unitary(3, times["U_i"], ph, "Kerr k=3 for Omega t = pi/2")
    u_f1 = _kerr_unitary(3, times["U_f1"], ph, "Kerr k=3 for Omega t = 3pi/2")
    u_f2 = _kerr_unitary(3, times["U_f2"], ph, "Kerr k=3 for Omega t = pi")
    u_f = BoxUnitary(FOUR_BOX, u_f2.matrix @ u_f1.matrix, "Alice's shuffle U_f2 U_f1")
    return UnitarySet(
        variant="coherent_k3",
        basis=FOUR_BOX,
        unitaries={
            "U_i": u_i,
            "U_f1": u_f1,
            "U_f2": u_f2,
            "U_f": u_f,
            "U_f1^-1": u_f1.inverse(),
            "U_f2^-1": u_f2.inverse(),
        },
        preparation=("U_i",),
        alice_stages=("U_f1", "U_f2"),
        kerr_times=times,
    )


def _coherent_k2() -> UnitarySet:
    w = np.exp(-1j * math.pi / 4)
    ph = (1, 1, w, w)
    times = {"U_i": math.pi / 4, "U_f3": 7 * math.pi / 4, "U_f2": math.pi}
    # The global phase e^{i pi/4} makes U_i|3> equal the superposition exactly.
    u_i = _kerr_unitary(2, times["U_i"], ph, "Kerr k=2 for Omega t = pi/4, times e^{i pi/4}", np.conj(w))
    u_f3 = _kerr_unitary(2, times["U_f3"], ph, "Kerr k=2 for Omega t = 7pi/4")
    u_f2 = _kerr_unitary(2, times["U_f2"], ph, "Kerr k=2 for Omega t = pi")
    u_f = BoxUnitary(FOUR_BOX, u_f2.matrix @ u_f3.matrix, "Alice's shuffle U_f2 U_f3")
    return UnitarySet(
        variant="coherent_k2",
        basis=FOUR_BOX,
        unitaries={
            "U_i": u_i,
            "U_f3": u_f3,
            "U_f2": u_f2,
            "U_f": u_f,
            "U_f3^-1": u_f3.inverse(),
            "U_f2^-1": u_f2.inverse(),
        },
        preparation=("U_i",),
        alice_stages=("U_f3", "U_f2"),
        kerr_times=times,
    )


def standard_unitaries(variant: str, phi: float = 0.0, phi1: float = 0.0) -> UnitarySet:
    if variant == "original":
        return _original()
    if variant == "mesoscopic":
        return _mesoscopic(phi, phi1)
    if variant == "coherent_k3":
        return _coherent_k3()
    if variant == "coherent_k2":
        return _coherent_k2()
    raise VariantError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")


def measure_boxes(v: BoxVector | Ensemble, opened: Iterable[Any]) -> Ensemble:
    """Bob opens the ``opened`` boxes; one branch per box plus ``"none"``."""
    opened_labels = [str(x) for x in opened]
    if not opened_labels:
        raise ArgumentError("at least one box must be opened")
    if len(set(opened_labels)) != len(opened_labels):
        raise ArgumentError(f"repeated box in {opened_labels}")
    source = v if isinstance(v, Ensemble) else Ensemble.pure(v)
    out: list[Member] = []
    for parent in source:
        psi: BoxVector = parent.state
        idx = [psi.basis.index(lab) for lab in opened_labels]
        rest = psi.amplitudes.copy()
        branches: list[tuple[str, np.ndarray]] = []
        for lab, i in zip(opened_labels, idx):
            proj = np.zeros_like(rest)
            proj[i] = rest[i]
            rest[i] = 0
            branches.append((lab, proj))
        branches.append(("none", rest))
        for lab, vec in branches:
            weight = float(np.vdot(vec, vec).real)
            if weight <= ZERO_WEIGHT:
                continue
            label = lab if not parent.label else f"{parent.label},{lab}"
            out.append(Member(parent.weight * weight, label, BoxVector(psi.basis, vec / math.sqrt(weight))))
    total = sum(m.weight for m in out)
    return Ensemble(tuple(Member(m.weight / total, m.label, m.state) for m in out))
