"""Truncated Fock-space states, operators and projective measurement.

Basis tuples are enumerated in lexicographic order of the occupation
numbers, optionally restricted to a fixed total boson number.  Every value
here is immutable; operations return new objects.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

from . import _io
from .errors import KindError, ProjectorError, SectorError, TruncationError

NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-9
# Born weights at or below this are treated as exact zeros and dropped.
ZERO_WEIGHT = 1e-14


@dataclass(frozen=True)
class ModeSpec:
    mode_count: int
    n_max: int
    sector: int | None = None

    def __post_init__(self) -> None:
        if self.mode_count < 1:
            raise ValueError(f"mode_count must be >= 1, got {self.mode_count}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.sector is not None:
            if self.sector < 0:
                raise ValueError(f"sector must be >= 0, got {self.sector}")
            if self.sector > self.mode_count * self.n_max:
                raise ValueError("sector cannot be filled within the per-mode truncation")

    @classmethod
    def number_sector(cls, mode_count: int, total: int) -> ModeSpec:
        """Modes holding exactly ``total`` bosons between them."""
        return cls(mode_count, max(total, 1), total)

    @cached_property
    def basis(self) -> tuple[tuple[int, ...], ...]:
        tuples = itertools.product(range(self.n_max + 1), repeat=self.mode_count)
        if self.sector is None:
            return tuple(tuples)
        return tuple(t for t in tuples if sum(t) == self.sector)

    @cached_property
    def _index(self) -> dict[tuple[int, ...], int]:
        return {occ: i for i, occ in enumerate(self.basis)}

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, occupations: Sequence[int]) -> int:
        occ = tuple(int(n) for n in occupations)
        if len(occ) != self.mode_count:
            raise ValueError(f"expected {self.mode_count} occupations, got {len(occ)}")
        if any(n < 0 or n > self.n_max for n in occ):
            raise TruncationError(f"occupations {occ} exceed n_max={self.n_max}")
        if self.sector is not None and sum(occ) != self.sector:
            raise SectorError(f"occupations {occ} are outside the N={self.sector} sector")
        return self._index[occ]

    def contains(self, occupations: Sequence[int]) -> bool:
        return tuple(occupations) in self._index

    def number_operator_diagonal(self, mode: int | None = None) -> np.ndarray:
        """Diagonal of n_mode (or of the total number when ``mode`` is None)."""
        occ = np.array(self.basis, dtype=float).reshape(self.dim, self.mode_count)
        return occ.sum(axis=1) if mode is None else occ[:, mode]


@dataclass(frozen=True, eq=False)
class StateVector:
    modes: ModeSpec
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.modes.dim,):
            raise ValueError(f"expected {self.modes.dim} amplitudes, got {amps.shape[0]}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm:.12g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, modes: ModeSpec, amplitudes: Any) -> StateVector:
        """Build a state after renormalizing ``amplitudes``."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(modes, amps / norm)

    def overlap(self, other: StateVector) -> complex:
        """Inner product <self|other>."""
        _check_same_modes(self.modes, other.modes)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: StateVector) -> float:
        return abs(self.overlap(other)) ** 2

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def probability_of(self, occupations: Sequence[int]) -> float:
        return float(abs(self.amplitudes[self.modes.index(occupations)]) ** 2)

    def csv_rows(self) -> Iterator[tuple[str, float, float]]:
        for occ, amp in zip(self.modes.basis, self.amplitudes):
            yield "(" + ",".join(map(str, occ)) + ")", amp.real, amp.imag

    def to_csv(self, path: str | Path) -> Path:
        return _io.write_csv(path, ("occupations", "re", "im"), self.csv_rows())


class Member(NamedTuple):
    weight: float
    label: str
    state: Any


@dataclass(frozen=True)
class Ensemble:
    """Weighted, labelled pure states; the mixed state left by a measurement.

    Members may hold any state type exposing an ``amplitudes`` array, so the
    same container serves Fock states and box-basis vectors.
    """

    members: tuple[Member, ...]

    def __post_init__(self) -> None:
        members = tuple(Member(float(w), str(lab), s) for w, lab, s in self.members)
        if not members:
            raise ValueError("an ensemble needs at least one member")
        weights = np.array([m.weight for m in members])
        if np.any(weights < 0):
            raise ValueError("ensemble weights must be non-negative")
        if abs(weights.sum() - 1.0) > NORM_TOL:
            raise ValueError(f"ensemble weights sum to {weights.sum():.12g}, not 1")
        for m in members:
            norm = float(np.linalg.norm(m.state.amplitudes))
            if abs(norm - 1.0) > NORM_TOL:
                raise ValueError(f"member {m.label!r} is not normalized")
        object.__setattr__(self, "members", members)

    @classmethod
    def pure(cls, state: Any, label: str = "") -> Ensemble:
        return cls((Member(1.0, label, state),))

    def __iter__(self) -> Iterator[Member]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.members)

    def member(self, label: str) -> Member:
        for m in self.members:
            if m.label == label:
                return m
        raise KeyError(label)

    def probabilities(self) -> np.ndarray:
        """Basis-state probabilities of the mixture."""
        return sum(m.weight * np.abs(m.state.amplitudes) ** 2 for m in self.members)

    def map(self, fn: Callable[[Any], Any]) -> Ensemble:
        return Ensemble(tuple(Member(m.weight, m.label, fn(m.state)) for m in self.members))


@dataclass(frozen=True, eq=False)
class Operator:
    modes: ModeSpec
    matrix: np.ndarray
    kind: str = "general"

    def __post_init__(self) -> None:
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (self.modes.dim, self.modes.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match basis dim {self.modes.dim}")
        if self.kind not in ("hermitian", "unitary", "general"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "hermitian":
            defect = np.abs(mat - mat.conj().T).max(initial=0.0)
            if defect > HERMITIAN_TOL:
                raise KindError(f"matrix is not Hermitian (defect {defect:.3g})")
        elif self.kind == "unitary":
            defect = unitarity_defect(mat)
            if defect > UNITARY_TOL:
                raise KindError(f"matrix is not unitary (defect {defect:.3g})")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and eigenvector columns of a Hermitian operator."""
        if self.kind != "hermitian":
            raise KindError("spectral decomposition requires a Hermitian operator")
        mat = self.matrix
        if np.count_nonzero(mat - np.diag(np.diag(mat))) == 0:
            return np.real(np.diag(mat)).copy(), np.eye(self.modes.dim, dtype=complex)
        return np.linalg.eigh(mat)

    def dagger(self) -> Operator:
        return Operator(self.modes, self.matrix.conj().T, self.kind)

    def apply(self, state: StateVector) -> StateVector:
        if self.kind != "unitary":
            raise KindError("only unitary operators map states to states")
        _check_same_modes(self.modes, state.modes)
        return StateVector(self.modes, self.matrix @ state.amplitudes)

    def __matmul__(self, other: Operator) -> Operator:
        _check_same_modes(self.modes, other.modes)
        kind = "unitary" if self.kind == other.kind == "unitary" else "general"
        return Operator(self.modes, self.matrix @ other.matrix, kind)

    def expectation(self, state: StateVector) -> complex:
        return complex(np.vdot(state.amplitudes, self.matrix @ state.amplitudes))


def unitarity_defect(matrix: np.ndarray) -> float:
    mat = np.asarray(matrix)
    return float(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max(initial=0.0))


def _check_same_modes(a: ModeSpec, b: ModeSpec) -> None:
    if a != b:
        raise ValueError(f"mode specifications differ: {a} vs {b}")


def number_state(modes: ModeSpec, occupations: Sequence[int]) -> StateVector:
    amps = np.zeros(modes.dim, dtype=complex)
    amps[modes.index(occupations)] = 1.0
    return StateVector(modes, amps)


def default_n_max(alpha: complex) -> int:
    """Truncation keeping the Poisson tail of |alpha> far below 1e-12."""
    r = abs(alpha)
    return max(1, math.ceil(r * r + 8 * r + 10))


def coherent_amplitudes(alpha: complex, n: np.ndarray) -> np.ndarray:
    """Unnormalized-by-truncation coefficients exp(-|a|^2/2) a^n / sqrt(n!)."""
    n = np.asarray(n)
    r = abs(alpha)
    if r == 0:
        return (n == 0).astype(complex)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent_state(alpha: complex, n_max: int | None = None) -> StateVector:
    if n_max is None:
        n_max = default_n_max(alpha)
    r = abs(alpha)
    if n_max < r * r + 8 * r:
        raise TruncationError(f"n_max={n_max} is below |alpha|^2 + 8|alpha| = {r * r + 8 * r:.3f}")
    amps = coherent_amplitudes(alpha, np.arange(n_max + 1))
    tail = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if tail >= 1e-10:
        raise TruncationError(f"truncation tail {tail:.3g} for alpha={alpha} at n_max={n_max}")
    return StateVector.from_amplitudes(ModeSpec(1, n_max), amps)


def symmetric_orthonormalize(states: Sequence[StateVector]) -> list[StateVector]:
    """Lowdin orthonormalization: the orthonormal set closest to ``states``."""
    modes = states[0].modes
    for s in states[1:]:
        _check_same_modes(modes, s.modes)
    cols = np.column_stack([s.amplitudes for s in states])
    gram = cols.conj().T @ cols
    w, v = np.linalg.eigh(gram)
    if w.min() <= 1e-13:
        raise ProjectorError("states are linearly dependent")
    ortho = cols @ (v @ np.diag(w ** -0.5) @ v.conj().T)
    return [StateVector.from_amplitudes(modes, ortho[:, i]) for i in range(len(states))]


def _subspace_matrix(basis: Sequence[StateVector], tol: float) -> np.ndarray:
    cols = np.column_stack([b.amplitudes for b in basis])
    gram = cols.conj().T @ cols
    if np.abs(gram - np.eye(len(basis))).max() > tol:
        raise ProjectorError("projector basis vectors are not orthonormal")
    return cols


def measure_projective(
    state: StateVector | Ensemble,
    projectors: Sequence[tuple[str, Sequence[StateVector]]],
    rest_label: str | None = None,
    tol: float = NORM_TOL,
) -> Ensemble:
    """Ideal projective measurement; the complement of the projectors is implicit.

    Outcomes with vanishing Born weight are left out of the returned
    ensemble.  When ``state`` is itself an ensemble each member branches
    separately and labels are joined as ``"<member>,<outcome>"``.
    """
    if not projectors:
        raise ProjectorError("at least one projector is required")
    labels = [label for label, _ in projectors]
    if len(set(labels)) != len(labels):
        raise ProjectorError("projector labels must be distinct")
    mats = [_subspace_matrix(basis, tol) for _, basis in projectors]
    for i, j in itertools.combinations(range(len(mats)), 2):
        if np.abs(mats[i].conj().T @ mats[j]).max() > tol:
            raise ProjectorError(f"projectors {labels[i]!r} and {labels[j]!r} are not orthogonal")
    if rest_label is None:
        rest_label = f"not{labels[0]}" if len(labels) == 1 else "none"

    source = state if isinstance(state, Ensemble) else Ensemble.pure(state)
    out: list[Member] = []
    for parent in source:
        psi = parent.state
        remainder = psi.amplitudes.copy()
        outcomes: list[tuple[str, np.ndarray]] = []
        for label, cols in zip(labels, mats):
            projected = cols @ (cols.conj().T @ psi.amplitudes)
            remainder = remainder - projected
            outcomes.append((label, projected))
        outcomes.append((rest_label, remainder))
        for label, vec in outcomes:
            weight = float(np.vdot(vec, vec).real)
            if weight <= ZERO_WEIGHT:
                continue
            full = label if not parent.label else f"{parent.label},{label}"
            out.append(Member(parent.weight * weight, full, StateVector(psi.modes, vec / math.sqrt(weight))))
    total = sum(m.weight for m in out)
    # Dropped near-zero branches leave a residue far below NORM_TOL; fold it back in.
    return Ensemble(tuple(Member(m.weight / total, m.label, m.state) for m in out))
