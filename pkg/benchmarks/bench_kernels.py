"""Time the compiled and pure-numpy kernels and a full solver run on each path.

    python benchmarks/bench_kernels.py [--sizes 32 64 128] [--steps 200]

The full-run comparison starts a subprocess per path with VBGK_NUMBA set,
since the path is chosen at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from vbgk import _kernels

RUN_SNIPPET = """
import time, numpy as np
from vbgk import _kernels
from vbgk.params import ModelParams
from vbgk.kinetic import GridSpec, equilibrium_init
from vbgk.reference import taylor_green
from vbgk.solver import TimeStepPlan, plan_steps, run
from vbgk.diagnostics import ProbeSchedule
p = ModelParams.from_a(0.1, epsilon=0.1, lam=30.0, nu=0.01)
g = GridSpec({n}, {n})
u0, _ = taylor_green(0.0, g, p.nu)
plan = TimeStepPlan(plan_steps(1.0, g, p).dt, 1, {steps})
sched = ProbeSchedule(every={steps}, energies=False, residuals=False)
run(equilibrium_init(u0, p, g), TimeStepPlan(plan.dt, 1, 2), p, sched)
start = time.perf_counter()
run(equilibrium_init(u0, p, g), plan, p, sched)
print(_kernels.USE_NUMBA, time.perf_counter() - start)
"""


def best_of(fn, repeat=7, number=20):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_table(sizes):
    print(f"{'grid':>6} {'kernel':>6} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)
    for n in sizes:
        f = rng.uniform(0.1, 0.3, (5, 3, n, n))
        f[:, 1:] -= 0.2
        rows = [("shift", lambda: _kernels.shift_numpy(f), lambda: _kernels.shift_numba(f))]
        work_np, work_nb = f.copy(), f.copy()
        rows.append(("relax", lambda: _kernels.relax_numpy(work_np, 0.1, 30.0, 1.0, 0.5),
                     lambda: _kernels.relax_numba(work_nb, 0.1, 30.0, 1.0, 0.5)))
        for name, slow, fast in rows:
            fast()  # compile outside the timing
            t_np, t_nb = best_of(slow), best_of(fast)
            print(f"{n:>6} {name:>6} {t_np * 1e6:>10.1f} {t_nb * 1e6:>10.1f} {t_np / t_nb:>8.2f}")


def run_table(sizes, steps):
    print(f"\nfull run, {steps} steps")
    print(f"{'grid':>6} {'numpy s':>9} {'numba s':>9} {'speedup':>8}")
    for n in sizes:
        times = {}
        for flag in ("0", "1"):
            env = dict(os.environ, VBGK_NUMBA=flag)
            out = subprocess.run([sys.executable, "-c", RUN_SNIPPET.format(n=n, steps=steps)],
                                 env=env, capture_output=True, text=True, check=True)
            used, seconds = out.stdout.split()
            times[used == "True"] = float(seconds)
        print(f"{n:>6} {times[False]:>9.3f} {times[True]:>9.3f} {times[False] / times[True]:>8.2f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args()
    if _kernels.numba is None:
        sys.exit("numba is not installed; nothing to compare")
    kernel_table(args.sizes)
    run_table(args.sizes, args.steps)


if __name__ == "__main__":
    main()
