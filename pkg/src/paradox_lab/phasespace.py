"""Husimi Q functions on rectangular phase-space grids.

Axes are in alpha-plane units: a grid point (x, p) is the coherent amplitude
alpha = x + i p, so |alpha0> peaks at x = alpha0 (the X = a + a^dag
quadrature would read 2*alpha0 there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import gammaln

from . import _io
from .errors import GridError, ModeError
from .fock import Ensemble, StateVector

GRID_MARGIN = 5.0
DEFAULT_RESOLUTION = 201


@dataclass(frozen=True)
class PhaseGrid:
    x_range: tuple[float, float]
    p_range: tuple[float, float]
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        if self.resolution < 2:
            raise GridError(f"resolution must be >= 2, got {self.resolution}")
        for name, (lo, hi) in (("x_range", self.x_range), ("p_range", self.p_range)):
            if not hi > lo:
                raise GridError(f"{name} must be a non-degenerate interval, got {(lo, hi)}")
        object.__setattr__(self, "x_range", (float(self.x_range[0]), float(self.x_range[1])))
        object.__setattr__(self, "p_range", (float(self.p_range[0]), float(self.p_range[1])))

    @classmethod
    def covering(cls, alpha0: float, resolution: int = DEFAULT_RESOLUTION, margin: float = GRID_MARGIN) -> PhaseGrid:
        r = abs(alpha0) + margin
        return cls((-r, r), (-r, r), resolution)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.resolution)

    @property
    def p(self) -> np.ndarray:
        return np.linspace(*self.p_range, self.resolution)

    @property
    def cell_area(self) -> float:
        n = self.resolution - 1
        return (self.x_range[1] - self.x_range[0]) / n * (self.p_range[1] - self.p_range[0]) / n

    def alphas(self) -> np.ndarray:
        """Complex amplitudes, shape (resolution, resolution), indexed [i_x, j_p]."""
        return self.x[:, None] + 1j * self.p[None, :]

    def to_json(self) -> dict[str, Any]:
        return {"x_range": list(self.x_range), "p_range": list(self.p_range), "resolution": self.resolution}


@dataclass(frozen=True, eq=False)
class QGrid:
    grid: PhaseGrid
    values: np.ndarray
    alpha0: float = 0.0
    provenance: str = ""

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        n = self.grid.resolution
        if vals.shape != (n, n):
            raise GridError(f"values have shape {vals.shape}, grid needs {(n, n)}")
        if vals.min() < -1e-12:
            raise ValueError(f"Q values must be non-negative (min {vals.min():.3g})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def integral(self) -> float:
        """Riemann sum times the cell area."""
        return float(self.values.sum() * self.grid.cell_area)

    def csv_rows(self):
        x, p = self.grid.x, self.grid.p
        for i in range(len(x)):
            for j in range(len(p)):
                yield x[i], p[j], self.values[i, j]

    def to_csv(self, path: str | Path) -> Path:
        return _io.write_csv(path, ("x", "p", "q"), self.csv_rows())

    def metadata(self) -> dict[str, Any]:
        return {"alpha0": self.alpha0, "grid": self.grid.to_json(), "provenance": self.provenance}

    def write(self, path: str | Path) -> tuple[Path, Path]:
        """CSV of the grid plus a companion ``.json`` with its metadata."""
        path = Path(path)
        return self.to_csv(path), _io.write_json(path.with_suffix(".json"), self.metadata())


def _husimi_pure(amplitudes: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """|<alpha|psi>|^2 / pi for a single-mode state, in the log domain."""
    n = np.arange(len(amplitudes))
    flat = alphas.reshape(-1)
    r = np.abs(flat)
    safe_r = np.where(r > 0, r, 1.0)
    # <alpha|n> = exp(-|a|^2/2) conj(a)^n / sqrt(n!)
    log_mag = -0.5 * r[:, None] ** 2 + n[None, :] * np.log(safe_r)[:, None] - 0.5 * gammaln(n + 1)[None, :]
    phase = -1j * n[None, :] * np.angle(flat)[:, None]
    basis = np.exp(log_mag + phase)
    basis[r == 0] = 0.0
    basis[r == 0, 0] = 1.0
    overlap = basis @ amplitudes
    return (np.abs(overlap) ** 2 / math.pi).reshape(alphas.shape)


def qfunction(state: StateVector | Ensemble, grid: PhaseGrid, alpha0: float = 0.0, provenance: str = "") -> QGrid:
    """Q(alpha) = <alpha|rho|alpha> / pi, member-wise for ensembles."""
    members = list(state) if isinstance(state, Ensemble) else [(1.0, "", state)]
    alphas = grid.alphas()
    total = np.zeros(alphas.shape)
    for weight, _, psi in members:
        if psi.modes.mode_count != 1:
            raise ModeError(f"Q function needs a single-mode state, got {psi.modes.mode_count} modes")
        total += weight * _husimi_pure(psi.amplitudes, alphas)
    return QGrid(grid, total, alpha0, provenance)


def q_distance(a: QGrid, b: QGrid) -> float:
    if a.grid != b.grid:
        raise GridError("Q grids differ; distances need identical grids")
    return float(np.max(np.abs(a.values - b.values)))


def analytic_q_forms(alpha0: float, grid: PhaseGrid, prefactor: str = "printed") -> tuple[QGrid, QGrid]:
    """Closed-form Q of the four-component superposition and of its mixture.

    ``prefactor="printed"`` puts 2 pi inside the exponent,
    exp(-(|a|^2 + a0^2) / (2 pi)), reproducing that closed form verbatim.
    ``prefactor="gaussian"`` uses
    exp(-(|a|^2 + a0^2)) / (2 pi), which is what the direct evaluation of
    <alpha|rho|alpha>/pi gives for the bracketed terms.
    """
    x = grid.x[:, None]
    p = grid.p[None, :]
    a = float(alpha0)
    r2 = x ** 2 + p ** 2 + a ** 2
    if prefactor == "printed":
        pre = np.exp(-r2 / (2 * math.pi))
    elif prefactor == "gaussian":
        pre = np.exp(-r2) / (2 * math.pi)
    else:
        raise ValueError(f"prefactor must be 'printed' or 'gaussian', got {prefactor!r}")
    u, v = (x + p) * a, (x - p) * a
    common = np.cosh(2 * x * a) + np.cosh(2 * p * a)
    sup = pre * (
        2 * np.cos(v) * np.sinh(v) - 2 * np.cos(u) * np.sinh(u) + common + np.cos(2 * p * a) - np.cos(2 * x * a)
    )
    mix = pre * (common - np.exp(u) * np.cos(u))
    return (
        QGrid(grid, sup, a, f"analytic superposition ({prefactor})"),
        QGrid(grid, mix, a, f"analytic mixture ({prefactor})"),
    )


def local_maxima(q: QGrid, threshold: float = 0.05) -> list[tuple[float, float]]:
    """Interior cells strictly above their 8 neighbours and threshold*max."""
    v = q.values
    core = v[1:-1, 1:-1]
    is_peak = core > threshold * v.max()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbour = v[1 + di : v.shape[0] - 1 + di, 1 + dj : v.shape[1] - 1 + dj]
            is_peak &= core > neighbour
    xs, ps = q.grid.x, q.grid.p
    return [(float(xs[i + 1]), float(ps[j + 1])) for i, j in zip(*np.nonzero(is_peak))]
