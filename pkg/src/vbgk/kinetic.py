"""Pointwise kinetic algebra: fluxes, Maxwellians, moments, hydrodynamic fields.

Arrays carry the component axis first: a moment vector is ``(3, ...)`` and a
kinetic vector ``(5, 3, ...)``, where the trailing axes are any grid shape.
Velocity ordering is +x, +y, -x, -y, rest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ModelParams

N_VELOCITIES = 5
N_COMPONENTS = 3


class DensityCollapseError(RuntimeError):
    """Density dropped to rho_bar/2 or below somewhere on the grid."""

    def __init__(self, min_density: float, rho_bar: float, field=None):
        self.min_density = float(min_density)
        self.rho_bar = float(rho_bar)
        self.field = field
        super().__init__(
            f"density collapse: min rho = {self.min_density:.6g} <= rho_bar/2 = {0.5 * rho_bar:.6g}"
        )


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    length: float = 2.0 * math.pi

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"grid sizes must be even integers >= 4, got {self.nx}x{self.ny}")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def dy(self) -> float:
        return self.length / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def area(self) -> float:
        return self.length * self.length

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as (nx, ny) arrays, x along the first axis."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")


@dataclass
class KineticField:
    """Five 3-component distributions on a periodic grid, stored as 15 planes."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        expected = (N_VELOCITIES, N_COMPONENTS) + self.grid.shape
        if self.data.shape != expected:
            raise ValueError(f"field data has shape {self.data.shape}, expected {expected}")
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)

    def copy(self) -> "KineticField":
        return KineticField(self.grid, self.data.copy())

    @property
    def planes(self) -> np.ndarray:
        """View as (15, nx, ny) in velocity-major order."""
        return self.data.reshape((N_VELOCITIES * N_COMPONENTS,) + self.grid.shape)


def _guard_density(w: np.ndarray, rho_bar: float) -> None:
    rho = np.asarray(w[0])
    if rho.size and not np.all(rho > 0.5 * rho_bar):
        raise DensityCollapseError(np.min(rho), rho_bar)


def flux_a1(w: np.ndarray, rho_bar: float) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    _guard_density(w, rho_bar)
    rho, q1, q2 = w
    return np.stack([q1, q1 * q1 / rho + (rho - rho_bar), q1 * q2 / rho])


def flux_a2(w: np.ndarray, rho_bar: float) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    _guard_density(w, rho_bar)
    rho, q1, q2 = w
    return np.stack([q2, q1 * q2 / rho, q2 * q2 / rho + (rho - rho_bar)])


def maxwellians(w: np.ndarray, params: ModelParams) -> np.ndarray:
    """Equilibria M_1..M_5 of shape (5, 3, ...).

    The rest state is formed as w minus the four moving ones so that the
    five always sum to w in floating point as closely as possible.
    """
    w = np.asarray(w, dtype=np.float64)
    a = params.a
    half_inv_lam = 0.5 / params.lam
    f1 = half_inv_lam * flux_a1(w, params.rho_bar)
    f2 = half_inv_lam * flux_a2(w, params.rho_bar)
    base = a * w
    out = np.empty((N_VELOCITIES,) + w.shape)
    out[0] = base + f1
    out[1] = base + f2
    out[2] = base - f1
    out[3] = base - f2
    out[4] = w - (out[0] + out[1] + out[2] + out[3])
    return out


def moments(f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    return f[0] + f[1] + f[2] + f[3] + f[4]


def hydrodynamics(w: np.ndarray, params: ModelParams):
    """Return (rho, u, p_est) with u stacked as (2, ...)."""
    w = np.asarray(w, dtype=np.float64)
    _guard_density(w, params.rho_bar)
    eps = params.epsilon
    rho = w[0]
    u = np.stack([w[1], w[2]]) / (eps * rho)
    p_est = (rho - params.rho_bar) / (eps * eps)
    return rho, u, p_est


def equilibrium_init(u0: np.ndarray, params: ModelParams, grid: GridSpec) -> KineticField:
    """Local equilibrium at constant density rho_bar and velocity u0 of shape (2, nx, ny)."""
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (2,) + grid.shape:
        raise ValueError(f"u0 must have shape (2, {grid.nx}, {grid.ny}), got {u0.shape}")
    rb = params.rho_bar
    w = np.empty((3,) + grid.shape)
    w[0] = rb
    w[1:] = params.epsilon * rb * u0
    return KineticField(grid, maxwellians(w, params))
