"""Taylor-Green reference solution and epsilon-convergence studies."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import (
    DiagnosticSeries, ProbeSchedule, ddx, ddy, divergence_norm, gronwall_monitor, laplacian,
    norm, pressure_error,
)
from .kinetic import DensityCollapseError, GridSpec, equilibrium_init, hydrodynamics, moments
from .params import ModelParams, validate
from .solver import plan_steps, run

# Residual norms are averaged (root mean square) over probes in the last half
# of each run: that excludes the start-up layer and averages over the fast
# acoustic oscillation left by the equilibrium initial data.
LATE_WINDOW = 0.5


@dataclass(frozen=True)
class TaylorGreenSolution:
    nu: float

    def velocity(self, t, x, y):
        decay = math.exp(-2.0 * self.nu * t)
        return np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)]) * decay

    def pressure(self, t, x, y):
        return 0.25 * (np.cos(2.0 * x) + np.cos(2.0 * y)) * math.exp(-4.0 * self.nu * t)

    def velocity_dt(self, t, x, y):
        return -2.0 * self.nu * self.velocity(t, x, y)

    def sample(self, t: float, grid: GridSpec):
        x, y = grid.centers()
        return self.velocity(t, x, y), self.pressure(t, x, y)


def taylor_green(t: float, grid: GridSpec, nu: float):
    """Velocity (2, nx, ny) and pressure (nx, ny) at cell centers."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return TaylorGreenSolution(nu).sample(t, grid)


class _Sampler:
    """Picklable callable t -> Taylor-Green fields on a grid."""

    def __init__(self, grid: GridSpec, nu: float):
        self.grid = grid
        self.solution = TaylorGreenSolution(nu)

    def __call__(self, t):
        return self.solution.sample(t, self.grid)


def ns_reference_residual(grid: GridSpec, nu: float, t: float) -> float:
    """Centered-difference momentum residual of the exact solution (pure truncation error)."""
    sol = TaylorGreenSolution(nu)
    x, y = grid.centers()
    u = sol.velocity(t, x, y)
    p = sol.pressure(t, x, y)
    conv = np.stack([
        ddx(u[0] * u[0], grid) + ddy(u[1] * u[0], grid),
        ddx(u[0] * u[1], grid) + ddy(u[1] * u[1], grid),
    ])
    grad_p = np.stack([ddx(p, grid), ddy(p, grid)])
    res = sol.velocity_dt(t, x, y) + conv + grad_p - nu * laplacian(u, grid)
    return norm(res, grid)


@dataclass
class ConvergenceRow:
    epsilon: float
    nx: int
    ny: int
    final_time: float
    n_steps: int
    velocity_error: float
    divergence: float
    pressure_error: float
    momentum_residual: float
    mass_residual: float
    ce_residual: float
    gronwall_constant: float
    status: str = "ok"
    runtime: float = 0.0
    series: DiagnosticSeries | None = field(default=None, repr=False)


TABLE_COLUMNS = (
    "epsilon", "nx", "ny", "final_time", "n_steps", "velocity_error", "divergence",
    "pressure_error", "momentum_residual", "mass_residual", "ce_residual",
    "gronwall_constant", "status",
)


@dataclass(frozen=True)
class TrendCheck:
    name: str
    passed: bool
    detail: str

    def __str__(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        """Deterministic table; wall-clock times are kept out (see timings_csv)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for r in self.rows:
            out = []
            for name in TABLE_COLUMNS:
                value = getattr(r, name)
                out.append(repr(float(value)) if isinstance(value, float) else value)
            writer.writerow(out)
        return buf.getvalue()

    def timings_csv(self) -> str:
        lines = ["epsilon,runtime_seconds"]
        lines += [f"{r.epsilon!r},{r.runtime:.3f}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def trend_checks(self) -> list[TrendCheck]:
        ok = [r for r in self.rows if r.status == "ok"]
        checks = []
        if len(ok) < 2:
            return [TrendCheck("at least two completed runs", False, f"{len(ok)} completed")]

        def pairs(name):
            vals = [getattr(r, name) for r in ok]
            return list(zip(vals, vals[1:]))

        def fmt(name):
            return ", ".join(f"{getattr(r, name):.4g}" for r in ok)

        for name in ("velocity_error", "divergence", "momentum_residual"):
            good = all(b < a for a, b in pairs(name))
            checks.append(TrendCheck(f"{name} strictly decreasing", good, fmt(name)))
        ratios = [a / b for a, b in pairs("mass_residual")]
        checks.append(TrendCheck("mass_residual ratio in [2, 8]",
                                 all(2.0 <= q <= 8.0 for q in ratios),
                                 "ratios " + ", ".join(f"{q:.3f}" for q in ratios)))
        ratios = [a / b for a, b in pairs("ce_residual")]
        checks.append(TrendCheck("ce_residual ratio >= 2", all(q >= 2.0 for q in ratios),
                                 "ratios " + ", ".join(f"{q:.3f}" for q in ratios)))
        gron = [r.gronwall_constant for r in ok]
        spread = max(gron) / min(gron) if min(gron) > 0 else math.inf
        checks.append(TrendCheck("Gronwall constant varies by < 4x", spread < 4.0,
                                 f"constants {fmt('gronwall_constant')}, spread {spread:.3f}"))
        return checks

    def summary(self) -> str:
        return "\n".join(str(c) for c in self.trend_checks()) + "\n"


def late_rms(series: DiagnosticSeries, column: str, start_fraction: float = LATE_WINDOW) -> float:
    t = series.column("t")
    vals = series.column(column)
    keep = (t >= start_fraction * t[-1]) & ~np.isnan(vals)
    if not np.any(keep):
        return math.nan
    return float(np.sqrt(np.mean(vals[keep] ** 2)))


def run_taylor_green(params: ModelParams, grid: GridSpec, T: float, *,
                     splitting: str = "trapezoidal", probes_per_run: int = 50,
                     max_steps: int | None = None) -> ConvergenceRow:
    report = validate(params)
    if not report.ok:
        raise ValueError(f"parameters fail validation:\n{report}")
    kwargs = {} if max_steps is None else {"max_steps": max_steps}
    plan = plan_steps(T, grid, params, splitting=splitting, **kwargs)
    sampler = _Sampler(grid, params.nu)
    u0, _ = sampler(0.0)
    initial = equilibrium_init(u0, params, grid)
    every = max(1, round(plan.n_steps / probes_per_run))
    schedule = ProbeSchedule(every=every, reference=sampler)
    start = time.perf_counter()
    nan = math.nan
    try:
        final, series = run(initial, plan, params, schedule)
    except DensityCollapseError:
        return ConvergenceRow(params.epsilon, grid.nx, grid.ny, plan.final_time, plan.n_steps,
                              nan, nan, nan, nan, nan, nan, nan, status="density_collapse",
                              runtime=time.perf_counter() - start)
    elapsed = time.perf_counter() - start
    _, u, p_est = hydrodynamics(moments(final.data), params)
    u_ref, p_ref = sampler(plan.final_time)
    return ConvergenceRow(
        epsilon=params.epsilon, nx=grid.nx, ny=grid.ny, final_time=plan.final_time,
        n_steps=plan.n_steps,
        velocity_error=norm(u - u_ref, grid),
        divergence=divergence_norm(u, grid),
        pressure_error=pressure_error(p_est, p_ref, grid),
        momentum_residual=late_rms(series, "momentum_residual"),
        mass_residual=late_rms(series, "mass_residual"),
        ce_residual=late_rms(series, "ce_residual"),
        gronwall_constant=gronwall_monitor(series).constant,
        runtime=elapsed,
        series=series,
    )


def _run_one(args):
    params, grid, T, splitting, probes_per_run = args
    return run_taylor_green(params, grid, T, splitting=splitting, probes_per_run=probes_per_run)


def convergence_study(eps_list, grid: GridSpec, params_base: ModelParams, T: float, *,
                      splitting: str = "trapezoidal", probes_per_run: int = 50,
                      workers: int = 1) -> ConvergenceTable:
    """Taylor-Green runs at each epsilon with lambda, tau and nu held fixed."""
    eps_sorted = sorted({float(e) for e in eps_list}, reverse=True)
    jobs = [(replace(params_base, epsilon=e), grid, T, splitting, probes_per_run)
            for e in eps_sorted]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(job) for job in jobs]
    return ConvergenceTable(rows)
