"""Time stepping by operator splitting: exact shift transport plus relaxation.

Splitting modes:

``lie``
    transport over dt, then exact relaxation over dt.
``strang``
    exact relaxation over dt/2, transport, exact relaxation over dt/2.
``trapezoidal`` (default)
    explicit relaxation half step, transport, implicit relaxation half step.
    Across consecutive steps the two halves combine into the trapezoidal rule
    for the relaxation source, which keeps the relaxation-induced viscosity
    at nu even when dt is much larger than tau*eps^2. The exact-exponential
    modes project onto equilibrium in that regime and add a numerical
    viscosity of order lambda*dx/eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .diagnostics import (
    DiagnosticSeries, ProbeSchedule, fill_residuals, hydro_snapshot, measure, norm_sq,
)
from .kinetic import DensityCollapseError, GridSpec, KineticField, hydrodynamics, moments
from .matrices import build
from .params import ModelParams

SPLITTINGS = ("lie", "strang", "trapezoidal")
DEFAULT_MAX_STEPS = 2_000_000


class ResourceLimitError(RuntimeError):
    pass


class AlignmentError(RuntimeError):
    """A transport substep does not move characteristics by whole cells."""


@dataclass(frozen=True)
class TimeStepPlan:
    dt: float
    shift_cells: int
    n_steps: int
    splitting: str = "trapezoidal"

    @property
    def final_time(self) -> float:
        return self.n_steps * self.dt


def plan_steps(T: float, grid: GridSpec, params: ModelParams, *, splitting: str = "trapezoidal",
               shift_cells: int = 1, max_steps: int = DEFAULT_MAX_STEPS) -> TimeStepPlan:
    if not T > 0.0:
        raise ValueError(f"final time must be positive, got {T!r}")
    if splitting not in SPLITTINGS:
        raise ValueError(f"splitting must be one of {SPLITTINGS}, got {splitting!r}")
    if int(shift_cells) != shift_cells or shift_cells < 1:
        raise ValueError("shift_cells must be a positive integer")
    if grid.nx != grid.ny:
        raise AlignmentError("exact shifts in both directions need dx = dy (nx = ny)")
    dt = shift_cells * params.epsilon * grid.dx / params.lam
    n_steps = math.ceil(T / dt - 1e-9)
    if n_steps > max_steps:
        raise ResourceLimitError(
            f"{n_steps} steps exceed the cap of {max_steps}; use a coarser grid, "
            "a larger epsilon or shift_cells, or raise max_steps"
        )
    return TimeStepPlan(dt=dt, shift_cells=int(shift_cells), n_steps=max(n_steps, 1),
                        splitting=splitting)


def _cells_per_substep(substep_dt: float, grid: GridSpec, params: ModelParams) -> int:
    cells = substep_dt * params.lam / (params.epsilon * grid.dx)
    whole = round(cells)
    if whole < 0 or abs(cells - whole) > 1e-9 * max(1.0, cells):
        raise AlignmentError(f"substep moves {cells!r} cells, not a whole number")
    return int(whole)


def _shift(data: np.ndarray, cells: int) -> np.ndarray:
    for _ in range(cells):
        data = _kernels.shift(data)
    return data


def _relax(data: np.ndarray, factor: float, params: ModelParams) -> None:
    lowest = _kernels.relax(data, params.a, params.lam, params.rho_bar, factor)
    if not lowest > 0.5 * params.rho_bar:
        raise DensityCollapseError(lowest, params.rho_bar)


def transport_step(fld: KineticField, substep_dt: float, params: ModelParams) -> KineticField:
    cells = _cells_per_substep(substep_dt, fld.grid, params)
    return KineticField(fld.grid, _shift(fld.data, cells) if cells else fld.data.copy())


def relaxation_factor(dt: float, params: ModelParams) -> float:
    return math.exp(-dt / (params.tau * params.epsilon ** 2))


def relax_with_factor(fld: KineticField, factor: float, params: ModelParams) -> KineticField:
    """f <- M(w) + factor (f - M(w)) per cell, on a copy."""
    data = fld.data.copy()
    try:
        _relax(data, factor, params)
    except DensityCollapseError as err:
        err.field = fld
        raise
    return KineticField(fld.grid, data)


def relaxation_step(fld: KineticField, dt: float, params: ModelParams) -> KineticField:
    return relax_with_factor(fld, relaxation_factor(dt, params), params)


def _advance(data: np.ndarray, plan: TimeStepPlan, params: ModelParams) -> np.ndarray:
    """One step on a raw (5, 3, nx, ny) array; the input may be overwritten."""
    dt = plan.dt
    if plan.splitting == "trapezoidal":
        kappa = dt / (2.0 * params.tau * params.epsilon ** 2)
        _relax(data, 1.0 - kappa, params)
        data = _shift(data, plan.shift_cells)
        _relax(data, 1.0 / (1.0 + kappa), params)
    elif plan.splitting == "strang":
        half = relaxation_factor(0.5 * dt, params)
        _relax(data, half, params)
        data = _shift(data, plan.shift_cells)
        _relax(data, half, params)
    elif plan.splitting == "lie":
        data = _shift(data, plan.shift_cells)
        _relax(data, relaxation_factor(dt, params), params)
    else:
        raise ValueError(f"unknown splitting {plan.splitting!r}")
    return data


def step(fld: KineticField, plan: TimeStepPlan, params: ModelParams) -> KineticField:
    try:
        data = _advance(fld.data.copy(), plan, params)
    except DensityCollapseError as err:
        err.field = fld
        raise
    return KineticField(fld.grid, data)


def initial_velocity_norm_sq(fld: KineticField, params: ModelParams) -> float:
    _, u, _ = hydrodynamics(moments(fld.data), params)
    return norm_sq(u, fld.grid)


def run(initial: KineticField, plan: TimeStepPlan, params: ModelParams,
        probes: ProbeSchedule | None = None,
        on_step: Callable[[int, float, KineticField], None] | None = None,
        on_step_every: int = 0):
    """Advance ``plan.n_steps`` steps, probing at multiples of ``probes.every``.

    Residual columns at a probe step n use the states at n-1, n and n+1, so
    they stay empty at t = 0 and at the last step. ``on_step`` is called with
    copies of the state every ``on_step_every`` steps (including step 0).
    On density collapse the raised error carries the last good field.
    """
    probes = probes or ProbeSchedule()
    grid = initial.grid
    matrices = build(params) if probes.energies else None
    series = DiagnosticSeries(params.epsilon, initial_velocity_norm_sq(initial, params))
    every = probes.every

    data = initial.data.copy()
    pending = None  # (stored row, state before, state at probe) awaiting the next state
    before = None

    def probe(n, t, fld):
        nonlocal pending
        row = series.append(measure(fld, n, t, params, probes, matrices))
        if probes.residuals and before is not None and n < plan.n_steps:
            pending = (row, before, hydro_snapshot(fld, t, params))

    def notify(n, t):
        if on_step is not None and on_step_every and n % on_step_every == 0:
            on_step(n, t, KineticField(grid, data.copy()))

    probe(0, 0.0, KineticField(grid, data))
    notify(0, 0.0)
    for n in range(1, plan.n_steps + 1):
        last_good = data.copy()
        try:
            data = _advance(data, plan, params)
        except DensityCollapseError as err:
            err.field = KineticField(grid, last_good)
            raise
        t = n * plan.dt
        fld = KineticField(grid, data)
        if pending is not None:
            row, b, c = pending
            fill_residuals(row, b, c, hydro_snapshot(fld, t, params), params, grid)
            pending = None
        if n % every == 0 or n == plan.n_steps:
            probe(n, t, fld)
        before = None
        if probes.residuals and (n + 1) % every == 0:
            before = hydro_snapshot(fld, t, params)
        notify(n, t)
    return KineticField(grid, data), series
