"""Hot loops of the solver: per-cell relaxation and plane shifts.

Each kernel exists as a numba-compiled loop and as a pure numpy version.
The compiled path is used when numba imports and ``VBGK_NUMBA`` is not set
to ``0``; the numpy path is always importable for comparison.
"""

import os

import numpy as np


def relax_numpy(f, a, lam, rho_bar, factor):
    """In place: f <- M(w) + factor * (f - M(w)) per cell. Returns min density."""
    w = f[0] + f[1] + f[2] + f[3] + f[4]
    rho, q1, q2 = w[0], w[1], w[2]
    min_rho = rho.min()
    half = 0.5 / lam
    p = rho - rho_bar
    with np.errstate(divide="ignore", invalid="ignore"):
        a1 = np.stack([q1, q1 * q1 / rho + p, q1 * q2 / rho])
        a2 = np.stack([q2, q1 * q2 / rho, q2 * q2 / rho + p])
    base = a * w
    m = np.empty_like(f)
    m[0] = base + half * a1
    m[1] = base + half * a2
    m[2] = base - half * a1
    m[3] = base - half * a2
    m[4] = w - (m[0] + m[1] + m[2] + m[3])
    f -= m
    f *= factor
    f += m
    return min_rho


def shift_numpy(f):
    out = np.empty_like(f)
    out[0] = np.roll(f[0], 1, axis=1)
    out[1] = np.roll(f[1], 1, axis=2)
    out[2] = np.roll(f[2], -1, axis=1)
    out[3] = np.roll(f[3], -1, axis=2)
    out[4] = f[4]
    return out


try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


if numba is not None:

    # Serial loops: a parallel loop or an in-loop min reduction stops LLVM
    # from vectorizing the cell update, which costs more than threads gain
    # at the grid sizes used here.

    @njit(cache=True, error_model="numpy")
    def _relax_flat(g, a, lam, rho_bar, factor):
        n = g.shape[1]
        half = 0.5 / lam
        dens = np.empty(n)
        for c in range(n):
            rho = g[0, c] + g[3, c] + g[6, c] + g[9, c] + g[12, c]
            q1 = g[1, c] + g[4, c] + g[7, c] + g[10, c] + g[13, c]
            q2 = g[2, c] + g[5, c] + g[8, c] + g[11, c] + g[14, c]
            dens[c] = rho
            p = rho - rho_bar
            x0 = half * q1
            x1 = half * (q1 * q1 / rho + p)
            x2 = half * (q1 * q2 / rho)
            y0 = half * q2
            y1 = half * (q1 * q2 / rho)
            y2 = half * (q2 * q2 / rho + p)
            b0 = a * rho
            b1 = a * q1
            b2 = a * q2
            m00 = b0 + x0
            m01 = b1 + x1
            m02 = b2 + x2
            m10 = b0 + y0
            m11 = b1 + y1
            m12 = b2 + y2
            m20 = b0 - x0
            m21 = b1 - x1
            m22 = b2 - x2
            m30 = b0 - y0
            m31 = b1 - y1
            m32 = b2 - y2
            m40 = rho - (m00 + m10 + m20 + m30)
            m41 = q1 - (m01 + m11 + m21 + m31)
            m42 = q2 - (m02 + m12 + m22 + m32)
            g[0, c] = (g[0, c] - m00) * factor + m00
            g[1, c] = (g[1, c] - m01) * factor + m01
            g[2, c] = (g[2, c] - m02) * factor + m02
            g[3, c] = (g[3, c] - m10) * factor + m10
            g[4, c] = (g[4, c] - m11) * factor + m11
            g[5, c] = (g[5, c] - m12) * factor + m12
            g[6, c] = (g[6, c] - m20) * factor + m20
            g[7, c] = (g[7, c] - m21) * factor + m21
            g[8, c] = (g[8, c] - m22) * factor + m22
            g[9, c] = (g[9, c] - m30) * factor + m30
            g[10, c] = (g[10, c] - m31) * factor + m31
            g[11, c] = (g[11, c] - m32) * factor + m32
            g[12, c] = (g[12, c] - m40) * factor + m40
            g[13, c] = (g[13, c] - m41) * factor + m41
            g[14, c] = (g[14, c] - m42) * factor + m42
        return dens.min()

    def relax_numba(f, a, lam, rho_bar, factor):
        """Compiled counterpart of relax_numpy (f must be C-contiguous)."""
        return _relax_flat(f.reshape(15, -1), a, lam, rho_bar, factor)

    @njit(cache=True)
    def shift_numba(f):
        nx = f.shape[2]
        ny = f.shape[3]
        out = np.empty_like(f)
        for c in range(3):
            for i in range(nx):
                left = (i - 1) % nx
                right = (i + 1) % nx
                for j in range(ny):
                    out[0, c, i, j] = f[0, c, left, j]
                    out[2, c, i, j] = f[2, c, right, j]
                    out[4, c, i, j] = f[4, c, i, j]
                out[1, c, i, 0] = f[1, c, i, ny - 1]
                for j in range(1, ny):
                    out[1, c, i, j] = f[1, c, i, j - 1]
                for j in range(ny - 1):
                    out[3, c, i, j] = f[3, c, i, j + 1]
                out[3, c, i, ny - 1] = f[3, c, i, 0]
        return out

else:  # pragma: no cover
    relax_numba = None
    shift_numba = None


USE_NUMBA = numba is not None and os.environ.get("VBGK_NUMBA", "1") != "0"

relax = relax_numba if USE_NUMBA else relax_numpy
shift = shift_numba if USE_NUMBA else shift_numpy

