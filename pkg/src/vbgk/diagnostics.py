"""Analysis-side quantities computed from kinetic fields.

All norms are discrete L2 norms weighted by the cell area, so values are
comparable across resolutions. Spatial derivatives are periodic centered
differences of second order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kinetic import GridSpec, KineticField, flux_a1, flux_a2, hydrodynamics, moments
from .matrices import StructuralMatrices
from .params import ModelParams


class InsufficientDataError(ValueError):
    pass


# ---------------------------------------------------------------- stencils

def ddx(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return (np.roll(f, -1, axis=-2) - np.roll(f, 1, axis=-2)) / (2.0 * grid.dx)


def ddy(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * grid.dy)


def d2dx2(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return (np.roll(f, -1, axis=-2) - 2.0 * f + np.roll(f, 1, axis=-2)) / grid.dx ** 2


def d2dy2(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / grid.dy ** 2


def laplacian(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    return d2dx2(f, grid) + d2dy2(f, grid)


def norm_sq(f: np.ndarray, grid: GridSpec) -> float:
    """Squared discrete L2 norm over every component and cell."""
    return float(np.sum(np.square(f)) * grid.cell_area)


def norm(f: np.ndarray, grid: GridSpec) -> float:
    return math.sqrt(norm_sq(f, grid))


def derivatives(f: np.ndarray, grid: GridSpec, order: int) -> list[np.ndarray]:
    """Every mixed difference quotient of exactly the given order."""
    if order == 0:
        return [f]
    if order == 1:
        return [ddx(f, grid), ddy(f, grid)]
    if order == 2:
        return [d2dx2(f, grid), ddx(ddy(f, grid), grid), d2dy2(f, grid)]
    raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")


def seminorm_sq(f: np.ndarray, grid: GridSpec, order: int) -> float:
    return sum(norm_sq(d, grid) for d in derivatives(f, grid, order))


# --------------------------------------------------------------- variables

@dataclass
class AuxVariables:
    grid: GridSpec
    w: np.ndarray
    m: np.ndarray
    xi: np.ndarray
    k: np.ndarray
    h: np.ndarray


@dataclass
class TranslatedState:
    grid: GridSpec
    w_star: np.ndarray
    m: np.ndarray
    xi: np.ndarray
    k_star: np.ndarray
    h_star: np.ndarray


def aux_variables(fld: KineticField, params: ModelParams) -> AuxVariables:
    f = fld.data
    speed = params.lam / params.epsilon
    return AuxVariables(
        grid=fld.grid,
        w=moments(f),
        m=speed * (f[0] - f[2]),
        xi=speed * (f[1] - f[3]),
        k=f[0] + f[2],
        h=f[1] + f[3],
    )


def kinetic_from_aux(aux: AuxVariables, params: ModelParams) -> KineticField:
    s = params.epsilon / params.lam
    data = np.empty((5, 3) + aux.grid.shape)
    data[0] = 0.5 * (aux.k + s * aux.m)
    data[2] = 0.5 * (aux.k - s * aux.m)
    data[1] = 0.5 * (aux.h + s * aux.xi)
    data[3] = 0.5 * (aux.h - s * aux.xi)
    data[4] = aux.w - aux.k - aux.h
    return KineticField(aux.grid, data)


def _rest_moment(params: ModelParams) -> np.ndarray:
    return np.array([params.rho_bar, 0.0, 0.0])[:, None, None]


def translate(aux: AuxVariables, params: ModelParams) -> TranslatedState:
    wbar = _rest_moment(params)
    shift = 2.0 * params.a * wbar
    return TranslatedState(aux.grid, aux.w - wbar, aux.m, aux.xi, aux.k - shift, aux.h - shift)


def untranslate(state: TranslatedState, params: ModelParams) -> AuxVariables:
    wbar = _rest_moment(params)
    shift = 2.0 * params.a * wbar
    return AuxVariables(state.grid, state.w_star + wbar, state.m, state.xi,
                        state.k_star + shift, state.h_star + shift)


def conservative_vector(state: TranslatedState, params: ModelParams) -> np.ndarray:
    """W = (w*, eps^2 m, eps^2 xi, eps^2 k*, eps^2 h*) as a (15, nx, ny) array."""
    e2 = params.epsilon ** 2
    return np.concatenate([state.w_star, e2 * state.m, e2 * state.xi,
                           e2 * state.k_star, e2 * state.h_star])


# ---------------------------------------------------------------- energies

@dataclass(frozen=True)
class EnergyBreakdown:
    E_w: float
    E_mxi: float
    E_kh: float
    D_mxi: float
    D_kh: float
    quadratic_form: float
    order: int = 0

    @property
    def energy(self) -> float:
        return self.E_w + self.E_mxi + self.E_kh

    @property
    def dissipation(self) -> float:
        return self.D_mxi + self.D_kh


def tilde_energy(state: TranslatedState, matrices: StructuralMatrices, s: int = 0) -> EnergyBreakdown:
    """Weighted energies of W~ = Sigma^{-1} W at derivative order s.

    W~ carries (w~, eps^2 m~, eps^2 xi~, eps^2 k~, eps^2 h~), so e.g.
    eps^6 |m~|^2 = eps^2 |(W~)_m|^2.
    """
    if s not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {s}")
    grid = state.grid
    e2 = matrices.params.epsilon ** 2
    big_w = conservative_vector(state, matrices.params)
    tilde = np.tensordot(matrices.Sigma_inv, big_w, axes=1)
    w_part = seminorm_sq(tilde[0:3], grid, s)
    mxi_part = seminorm_sq(tilde[3:9], grid, s)
    kh_part = seminorm_sq(tilde[9:15], grid, s)
    quad = sum(float(np.sum(dw * dt)) for dw, dt in
               zip(derivatives(big_w, grid, s), derivatives(tilde, grid, s))) * grid.cell_area
    return EnergyBreakdown(
        E_w=w_part,
        E_mxi=e2 * mxi_part,
        E_kh=e2 * e2 * kh_part,
        D_mxi=mxi_part,
        D_kh=e2 * kh_part,
        quadratic_form=quad,
        order=s,
    )


# --------------------------------------------------------------- residuals

@dataclass(frozen=True)
class HydroSnapshot:
    """Density and physical momentum rho*u at one time."""

    t: float
    rho: np.ndarray
    momentum: np.ndarray


def hydro_snapshot(fld: KineticField, t: float, params: ModelParams) -> HydroSnapshot:
    w = moments(fld.data)
    return HydroSnapshot(t, w[0].copy(), w[1:] / params.epsilon)


def _time_derivative(before: HydroSnapshot, after: HydroSnapshot):
    span = after.t - before.t
    return (after.rho - before.rho) / span, (after.momentum - before.momentum) / span


def mass_residual(before: HydroSnapshot, center: HydroSnapshot, after: HydroSnapshot,
                  params: ModelParams, grid: GridSpec) -> np.ndarray:
    """d/dt(rho - rho_bar) + div(rho u) - nu Lap(rho - rho_bar) at the center time."""
    drho, _ = _time_derivative(before, after)
    mom = center.momentum
    div = ddx(mom[0], grid) + ddy(mom[1], grid)
    return drho + div - params.nu * laplacian(center.rho - params.rho_bar, grid)


def momentum_residual(before: HydroSnapshot, center: HydroSnapshot, after: HydroSnapshot,
                      params: ModelParams, grid: GridSpec) -> np.ndarray:
    """d/dt(rho u) + div(rho u (x) u) + grad(rho - rho_bar)/eps^2 - nu Lap(rho u)."""
    _, dmom = _time_derivative(before, after)
    rho, mom = center.rho, center.momentum
    u = mom / rho
    conv = np.stack([
        ddx(mom[0] * u[0], grid) + ddy(mom[1] * u[0], grid),
        ddx(mom[0] * u[1], grid) + ddy(mom[1] * u[1], grid),
    ])
    pressure = (rho - params.rho_bar) / params.epsilon ** 2
    grad_p = np.stack([ddx(pressure, grid), ddy(pressure, grid)])
    return dmom + conv + grad_p - params.nu * laplacian(mom, grid)


def ns_residual(snapshots: Sequence[HydroSnapshot], params: ModelParams, grid: GridSpec):
    """Mass and momentum residual norms at every interior snapshot.

    Returns arrays (times, mass_norms, momentum_norms); the first and last
    snapshots have no centered time difference and are dropped.
    """
    if len(snapshots) < 3:
        raise InsufficientDataError("need at least 3 consecutive snapshots")
    times, mass, mom = [], [], []
    for before, center, after in zip(snapshots, snapshots[1:], snapshots[2:]):
        times.append(center.t)
        mass.append(norm(mass_residual(before, center, after, params, grid), grid))
        mom.append(norm(momentum_residual(before, center, after, params, grid), grid))
    return np.array(times), np.array(mass), np.array(mom)


def chapman_enskog_residual(aux: AuxVariables, params: ModelParams) -> float:
    """|m - A1(w)/eps + nu d_x w*| + |xi - A2(w)/eps + nu d_y w*|."""
    grid = aux.grid
    eps, nu = params.epsilon, params.nu
    if not np.any(aux.w):
        return norm(aux.m, grid) + norm(aux.xi, grid)
    rx = aux.m - flux_a1(aux.w, params.rho_bar) / eps + nu * ddx(aux.w, grid)
    ry = aux.xi - flux_a2(aux.w, params.rho_bar) / eps + nu * ddy(aux.w, grid)
    return norm(rx, grid) + norm(ry, grid)


def divergence_norm(u: np.ndarray, grid: GridSpec) -> float:
    return norm(ddx(u[0], grid) + ddy(u[1], grid), grid)


def pressure_error(p_est: np.ndarray, p_ref: np.ndarray, grid: GridSpec) -> float:
    """Relative L2 distance after removing each field's spatial mean."""
    diff = (p_est - p_est.mean()) - (p_ref - p_ref.mean())
    ref = norm(p_ref - p_ref.mean(), grid)
    if ref == 0.0:
        return norm(diff, grid)
    return norm(diff, grid) / ref


# ------------------------------------------------------------------ series

COLUMNS = (
    "step", "t", "mass", "rho_min", "rho_max", "divergence",
    "E_w", "E_mxi", "E_kh", "D_mxi", "D_kh", "quadratic_form",
    "mass_residual", "momentum_residual", "ce_residual",
    "drho_dt_over_eps", "dmomentum_dt", "velocity_error", "pressure_error",
)

Reference = Callable[[float], "tuple[np.ndarray, np.ndarray]"]


@dataclass
class ProbeSchedule:
    """What to measure and how often (``every`` counts solver steps)."""

    every: int = 1
    energies: bool = True
    energy_order: int = 0
    residuals: bool = True
    reference: Reference | None = None

    def __post_init__(self):
        if int(self.every) != self.every or self.every < 1:
            raise ValueError(f"probe interval must be a positive integer, got {self.every!r}")


@dataclass
class DiagnosticSeries:
    epsilon: float
    u0_norm_sq: float
    rows: list[dict] = field(default_factory=list)

    def append(self, row: dict) -> dict:
        """Store a copy of ``row`` restricted to COLUMNS and return the stored dict."""
        if self.rows and not row["t"] > self.rows[-1]["t"]:
            raise ValueError("time stamps must be strictly increasing")
        stored = {name: row.get(name, math.nan) for name in COLUMNS}
        self.rows.append(stored)
        return stored

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.rows:
            writer.writerow([r["step"]] + [repr(float(r[c])) for c in COLUMNS[1:]])
        return buf.getvalue()


def measure(fld: KineticField, step: int, t: float, params: ModelParams,
            schedule: ProbeSchedule, matrices: StructuralMatrices | None) -> dict:
    """Instantaneous diagnostics of one state (residual columns are filled later)."""
    grid = fld.grid
    w = moments(fld.data)
    rho, u, p_est = hydrodynamics(w, params)
    row = {
        "step": step,
        "t": t,
        "mass": float(np.sum(w[0]) * grid.cell_area),
        "rho_min": float(rho.min()),
        "rho_max": float(rho.max()),
        "divergence": divergence_norm(u, grid),
    }
    aux = aux_variables(fld, params)
    if schedule.energies and matrices is not None:
        e = tilde_energy(translate(aux, params), matrices, schedule.energy_order)
        row.update(E_w=e.E_w, E_mxi=e.E_mxi, E_kh=e.E_kh, D_mxi=e.D_mxi, D_kh=e.D_kh,
                   quadratic_form=e.quadratic_form)
    if schedule.residuals:
        row["ce_residual"] = chapman_enskog_residual(aux, params)
    if schedule.reference is not None:
        u_ref, p_ref = schedule.reference(t)
        row["velocity_error"] = norm(u - u_ref, grid)
        row["pressure_error"] = pressure_error(p_est, p_ref, grid)
    return row


def fill_residuals(row: dict, before: HydroSnapshot, center: HydroSnapshot,
                   after: HydroSnapshot, params: ModelParams, grid: GridSpec) -> None:
    row["mass_residual"] = norm(mass_residual(before, center, after, params, grid), grid)
    row["momentum_residual"] = norm(momentum_residual(before, center, after, params, grid), grid)
    drho, dmom = _time_derivative(before, after)
    row["drho_dt_over_eps"] = norm(drho, grid) / params.epsilon
    row["dmomentum_dt"] = norm(dmom, grid)


# ----------------------------------------------------------------- Gronwall

@dataclass(frozen=True)
class GronwallReport:
    constant: float
    degenerate: bool
    lhs: np.ndarray
    rhs_base: np.ndarray

    def __str__(self):
        if self.degenerate:
            return "Gronwall fit degenerate (zero perturbation)"
        return f"fitted Gronwall constant c = {self.constant:.6g}"


def _cumulative_trapezoid(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def gronwall_monitor(series: DiagnosticSeries) -> GronwallReport:
    """Smallest c with E(t) + int D <= c (eps^2 |u0|^2 + int E) along the run."""
    if len(series) < 3:
        raise InsufficientDataError("Gronwall fit needs at least 3 samples")
    t = series.column("t")
    energy = series.column("E_w") + series.column("E_mxi") + series.column("E_kh")
    diss = series.column("D_mxi") + series.column("D_kh")
    if np.any(np.isnan(energy)) or np.any(np.isnan(diss)):
        raise InsufficientDataError("series has no energy columns")
    lhs = energy + _cumulative_trapezoid(diss, t)
    base = series.epsilon ** 2 * series.u0_norm_sq + _cumulative_trapezoid(energy, t)
    if not np.any(lhs > 0.0) and not np.any(base > 0.0):
        return GronwallReport(math.nan, True, lhs, base)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(base > 0.0, lhs / base, np.where(lhs > 0.0, np.inf, 0.0))
    return GronwallReport(float(np.max(ratios)), False, lhs, base)
