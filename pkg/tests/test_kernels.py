import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vbgk import _kernels

needs_numba = pytest.mark.skipif(_kernels.numba is None, reason="numba not installed")


def _random_state(seed, nx=12, ny=10):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0.05, 0.3, (5, 3, nx, ny))
    f[:, 1:] -= 0.175
    return f


@needs_numba
@given(st.integers(0, 2**32 - 1), st.floats(-1.0, 1.0), st.floats(0.01, 0.24), st.floats(2.0, 50.0))
def test_relax_paths_agree(seed, factor, a, lam):
    f = _random_state(seed)
    g = f.copy()
    lo_np = _kernels.relax_numpy(f, a, lam, 1.0, factor)
    lo_nb = _kernels.relax_numba(g, a, lam, 1.0, factor)
    assert lo_np == lo_nb
    np.testing.assert_allclose(g, f, rtol=0, atol=1e-15)


@needs_numba
@given(st.integers(0, 2**32 - 1))
def test_shift_paths_agree_bitwise(seed):
    f = _random_state(seed)
    assert np.array_equal(_kernels.shift_numpy(f), _kernels.shift_numba(f))


def test_shift_directions():
    f = np.zeros((5, 3, 6, 6))
    f[:, :, 2, 3] = 1.0
    out = _kernels.shift_numpy(f)
    assert out[0, 0, 3, 3] == 1.0  # +x
    assert out[1, 0, 2, 4] == 1.0  # +y
    assert out[2, 0, 1, 3] == 1.0  # -x
    assert out[3, 0, 2, 2] == 1.0  # -y
    assert out[4, 0, 2, 3] == 1.0


def test_selected_path_follows_environment():
    assert _kernels.USE_NUMBA == (_kernels.numba is not None
                                  and os.environ.get("VBGK_NUMBA", "1") != "0")


SNIPPET = """
import numpy as np
from vbgk import _kernels
from vbgk.params import ModelParams
from vbgk.kinetic import GridSpec, equilibrium_init
from vbgk.reference import taylor_green
from vbgk.solver import TimeStepPlan, plan_steps, run
p = ModelParams.from_a(0.1, epsilon=0.1, lam=30.0, nu=0.01)
g = GridSpec(16, 16)
u0, _ = taylor_green(0.0, g, p.nu)
final, _ = run(equilibrium_init(u0, p, g), TimeStepPlan(plan_steps(1.0, g, p).dt, 1, 50), p)
print(_kernels.USE_NUMBA)
print(" ".join(repr(float(v)) for v in final.data[:, :, 3, 5].ravel()))
"""


@needs_numba
def test_environment_flag_switches_path_with_same_results():
    outputs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, VBGK_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True,
                             text=True, check=True).stdout.splitlines()
        outputs[out[0]] = np.array([float(v) for v in out[1].split()])
    assert set(outputs) == {"False", "True"}
    np.testing.assert_allclose(outputs["True"], outputs["False"], rtol=0, atol=1e-13)
