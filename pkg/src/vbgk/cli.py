"""Command-line entry points: run, convergence, certify, constants."""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import contextmanager
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from . import _kernels
from .config import ConfigError, RunConfig, load_config
from .diagnostics import ProbeSchedule
from .kinetic import DensityCollapseError, GridSpec, KineticField, equilibrium_init, hydrodynamics, moments
from .matrices import build, certify_definiteness, certify_symmetrizer
from .params import (
    InfeasibleConstantsError, ModelParams, ParameterDomainError, find_stability_constants, validate,
)
from .reference import TaylorGreenSolution, convergence_study
from .solver import ResourceLimitError, plan_steps, run

PLANE_NAMES = [f"f{l}_{c}" for l in range(1, 6) for c in range(3)] + ["rho", "u1", "u2", "p_est"]
MASS_TOL = 1e-10


def code_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # running from a source tree
        return "unknown"


class DirectoryLocked(RuntimeError):
    pass


@contextmanager
def locked_dir(path: str):
    os.makedirs(path, exist_ok=True)
    lock = os.path.join(path, ".lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DirectoryLocked(f"{path} is in use by another command (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield path
    finally:
        os.remove(lock)


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_snapshot(directory: str, name: str, fld: KineticField, t: float, step: int,
                   params: ModelParams) -> str:
    """Flat little-endian float64 planes plus a text header next to it."""
    w = moments(fld.data)
    rho, u, p_est = hydrodynamics(w, params) if np.all(w[0] > 0) else (w[0], w[1:] * np.nan, w[0] * np.nan)
    planes = np.concatenate([fld.planes, rho[None], u, p_est[None]])
    path = os.path.join(directory, name + ".bin")
    planes.astype("<f8").tofile(path)
    header = [
        f"nx = {fld.grid.nx}", f"ny = {fld.grid.ny}", f"t = {t!r}", f"step = {step}",
        f"epsilon = {params.epsilon!r}", f"tau = {params.tau!r}", f"lambda = {params.lam!r}",
        f"nu = {params.nu!r}", f"rho_bar = {params.rho_bar!r}", f"a = {params.a!r}",
        "dtype = float64 little-endian",
        "layout = planes of nx*ny values, x index slowest",
        "planes = " + " ".join(PLANE_NAMES),
    ]
    _write(os.path.join(directory, name + ".txt"), "\n".join(header) + "\n")
    return path


def read_snapshot(path: str) -> tuple[dict, np.ndarray]:
    """Inverse of write_snapshot: (header dict, planes array of shape (19, nx, ny))."""
    header = {}
    with open(path[:-4] + ".txt", encoding="utf-8") as fh:
        for line in fh:
            key, value = (s.strip() for s in line.split("=", 1))
            header[key] = value
    nx, ny = int(header["nx"]), int(header["ny"])
    data = np.fromfile(path, dtype="<f8").reshape(len(PLANE_NAMES), nx, ny)
    return header, data


def _manifest(cfg: RunConfig, extra: list[tuple[str, object]]) -> str:
    lines = [f"code_version = {code_version()}", f"numba = {_kernels.USE_NUMBA}"]
    for key, value in cfg.resolved():
        if isinstance(value, tuple):
            value = "x".join(str(v) for v in value)
        elif isinstance(value, list):
            value = ", ".join(repr(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    for key, value in extra:
        lines.append(f"{key} = {value!r}" if isinstance(value, float) else f"{key} = {value}")
    return "\n".join(lines) + "\n"


def _certification(params: ModelParams):
    """Structural certification report, or (None, message) when it cannot be built."""
    try:
        matrices = build(params)
    except ParameterDomainError as err:
        return None, str(err)
    report = certify_symmetrizer(matrices)
    try:
        consts = find_stability_constants(params.a, params.lam)
    except InfeasibleConstantsError as err:
        return report, f"stability constants infeasible: {err}"
    report.extend(certify_definiteness(matrices, consts))
    return report, f"constants {consts}"


def cmd_run(cfg: RunConfig, out: str) -> int:
    params = cfg.params()
    admissible = validate(params)
    if not admissible.ok:
        print(f"FAIL  parameters:\n{admissible}")
        return 1
    nx, ny = cfg.grid
    grid = GridSpec(nx, ny)
    plan = plan_steps(cfg.T, grid, params, splitting=cfg.splitting,
                      shift_cells=cfg.shift_cells, max_steps=cfg.max_steps)
    tg = TaylorGreenSolution(params.nu)
    if cfg.initial == "taylor_green":
        u0, _ = tg.sample(0.0, grid)
        reference = lambda t: tg.sample(t, grid)  # noqa: E731
    else:
        u0, reference = np.zeros((2, nx, ny)), None
    initial = equilibrium_init(u0, params, grid)
    report, cert_note = _certification(params)
    schedule = ProbeSchedule(every=cfg.probe_every, energies=report is not None,
                             energy_order=cfg.energy_order, reference=reference)
    snapdir = os.path.join(out, "snapshots")
    os.makedirs(snapdir, exist_ok=True)

    def snapshot(n, t, fld):
        write_snapshot(snapdir, f"snap_{n:08d}", fld, t, n, params)

    if not cfg.snapshot_every:
        snapshot(0, 0.0, initial)
    checks = []
    status = "completed"
    series = None
    try:
        final, series = run(initial, plan, params, schedule, on_step=snapshot,
                            on_step_every=cfg.snapshot_every)
        snapshot(plan.n_steps, plan.final_time, final)
    except DensityCollapseError as err:
        status = f"density collapse: {err}"
        write_snapshot(snapdir, "snap_last_good", err.field, float("nan"), -1, params)
    if series is not None:
        mass = series.column("mass")
        drift = abs(mass[-1] - mass[0]) / abs(mass[0])
        checks.append(("mass_conservation", drift <= MASS_TOL, f"relative drift {drift:.3e}"))
        _write(os.path.join(out, "diagnostics.csv"), series.to_csv())
    checks.append(("run_completed", status == "completed", status))
    extra = [("a_derived", params.a), ("dt", plan.dt), ("n_steps", plan.n_steps),
             ("final_time", plan.final_time),
             ("certification", "unavailable" if report is None else
              ("pass" if report.passed else "fail")), ("certification_note", cert_note)]
    extra += [(f"check_{name}", f"{'pass' if ok else 'fail'} ({detail})") for name, ok, detail in checks]
    _write(os.path.join(out, "manifest.txt"), _manifest(cfg, extra))
    if report is not None:
        _write(os.path.join(out, "certification.txt"), report.to_text())
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in checks) else 1


def cmd_convergence(cfg: RunConfig, out: str, workers: int) -> int:
    nx, ny = cfg.grid
    grid = GridSpec(nx, ny)
    base = cfg.params(epsilon=max(cfg.eps_list))
    table = convergence_study(cfg.eps_list, grid, base, cfg.T, splitting=cfg.splitting,
                              probes_per_run=cfg.probes_per_run, workers=workers)
    _write(os.path.join(out, "convergence.csv"), table.to_csv())
    _write(os.path.join(out, "timings.csv"), table.timings_csv())
    for row in table.rows:
        if row.series is not None:
            _write(os.path.join(out, f"series_eps_{row.epsilon!r}.csv"), row.series.to_csv())
    summary = table.summary()
    _write(os.path.join(out, "summary.txt"), summary)
    _write(os.path.join(out, "manifest.txt"), _manifest(cfg, [("a_derived", base.a)]))
    print(summary, end="")
    return 0 if all(c.passed for c in table.trend_checks()) else 1


def cmd_certify(cfg: RunConfig, out: str) -> int:
    params = cfg.params()
    report, note = _certification(params)
    if report is None:
        print(f"FAIL  build: {note}")
        return 1
    _write(os.path.join(out, "certification.txt"), report.to_text() + note + "\n")
    _write(os.path.join(out, "certification.kv"), report.to_keyvalue())
    print(report.to_text(), end="")
    print(note)
    feasible = not note.startswith("stability constants infeasible")
    return 0 if report.passed and feasible else 1


def cmd_constants(a: float, lam: float, tau: float | None = None) -> int:
    if not 0.0 < a < 0.25:
        print(f"FAIL  admissibility assumption 0 < a < 1/4 violated: a = {a:g}")
        return 1
    try:
        consts = find_stability_constants(a, lam)
    except InfeasibleConstantsError as err:
        print(f"INFEASIBLE  {err}")
        return 1
    for name in ("delta", "mu", "omega", "eta", "zeta", "beta"):
        print(f"{name} = {getattr(consts, name)!r}")
    if tau is not None:
        params = ModelParams.from_a(a, epsilon=1.0, lam=lam, tau=tau)
        report = validate(params, strict=True, constants=consts)
        print(report)
        return 0 if report.ok else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vbgk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "convergence", "certify"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--workers", type=int, help="worker processes (overrides workers)")
    p = sub.add_parser("constants")
    p.add_argument("--config", help="configuration file providing a or tau, lambda, nu")
    p.add_argument("--a", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--out", help="unused; accepted for symmetry")
    p.add_argument("--workers", type=int, help="unused; accepted for symmetry")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "constants":
            a, lam, tau = args.a, args.lam, args.tau
            if args.config:
                cfg = load_config(args.config, "constants")
                a = cfg.a if a is None else a
                lam = cfg.values["lambda"] if lam is None else lam
                tau = cfg.values["tau"] if tau is None else tau
            if a is None or lam is None:
                print("error: constants needs a and lambda (flags or --config)", file=sys.stderr)
                return 2
            return cmd_constants(a, lam, tau)
        cfg = load_config(args.config, args.command)
        out = args.out or cfg.output_dir
        workers = args.workers if args.workers is not None else cfg.workers
        if workers < 1:
            raise ConfigError([("--workers", "domain error: workers must be >= 1")])
        with locked_dir(out):
            if args.command == "run":
                return cmd_run(cfg, out)
            if args.command == "convergence":
                return cmd_convergence(cfg, out, workers)
            return cmd_certify(cfg, out)
    except ConfigError as err:
        print(f"config error:\n{err}", file=sys.stderr)
        return 2
    except (DirectoryLocked, ResourceLimitError, ParameterDomainError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
