"""Pure NumPy fallback for the compiled kernels.

Same contracts as ``_core``; used when the extension is unavailable or when
``HOMLAB_PURE_PYTHON`` is set.  Vectorised throughout, roughly 2-4x slower
than the compiled twin on large grids (see benchmarks/bench_kernels.py).
"""

import numpy as np


def flux_apply_periodic(u, ax, ay, inv_h2):
    axm = np.roll(ax, 1, axis=0)
    aym = np.roll(ay, 1, axis=1)
    fx = ax * (np.roll(u, -1, axis=0) - u) - axm * (u - np.roll(u, 1, axis=0))
    fy = ay * (np.roll(u, -1, axis=1) - u) - aym * (u - np.roll(u, 1, axis=1))
    return -inv_h2 * (fx + fy)


def flux_apply_box(u, ax, ay, inv_h2):
    out = np.zeros_like(u)
    fx = (ax[1:, 1:-1] * (u[2:, 1:-1] - u[1:-1, 1:-1])
          - ax[:-1, 1:-1] * (u[1:-1, 1:-1] - u[:-2, 1:-1]))
    fy = (ay[1:-1, 1:] * (u[1:-1, 2:] - u[1:-1, 1:-1])
          - ay[1:-1, :-1] * (u[1:-1, 1:-1] - u[1:-1, :-2]))
    out[1:-1, 1:-1] = -inv_h2 * (fx + fy)
    return out


def stencil5_apply(u, cC, cE, cW, cN, cS):
    out = cC * u
    out[:-1, :] += cE[:-1, :] * u[1:, :]
    out[1:, :] += cW[1:, :] * u[:-1, :]
    out[:, :-1] += cN[:, :-1] * u[:, 1:]
    out[:, 1:] += cS[:, 1:] * u[:, :-1]
    return out


def ball_fractions(nx, ny, x00, y00, h, cx, cy, r, m):
    xlo = x00 + h * np.arange(nx)[:, None]
    ylo = y00 + h * np.arange(ny)[None, :]
    xhi, yhi = xlo + h, ylo + h
    # nearest point of each cell to the centre
    dx = np.clip(cx, xlo, xhi) - cx
    dy = np.clip(cy, ylo, yhi) - cy
    r2 = r * r
    near_in = dx * dx + dy * dy < r2

    def corner(d1, d2):
        return (d1 - cx) ** 2 + (d2 - cy) ** 2 < r2

    full = (corner(xlo, ylo) & corner(xlo, yhi)
            & corner(xhi, ylo) & corner(xhi, yhi))
    out = np.zeros((nx, ny))
    out[full] = 1.0
    rim = near_in & ~full
    if np.any(rim):
        ri, rj = np.nonzero(rim)
        xs = x00 + h * (ri[:, None] + (np.arange(m)[None, :] + 0.5) / m) - cx
        ys = y00 + h * (rj[:, None] + (np.arange(m)[None, :] + 0.5) / m) - cy
        inside = (xs[:, :, None] ** 2 + ys[:, None, :] ** 2) < r2
        out[ri, rj] = inside.sum(axis=(1, 2)) / (m * m)
    return out
