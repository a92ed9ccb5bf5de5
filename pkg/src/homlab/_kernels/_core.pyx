# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: flux-form stencil applications and disc-indicator
cell fractions.  The pure NumPy twin lives in ``pure.py``; both expose the
same signatures and are selected in ``homlab._kernels``."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def flux_apply_periodic(const double[:, ::1] u, const double[:, ::1] ax, const double[:, ::1] ay,
                        double inv_h2):
    """Apply -div(a grad u) in flux form on the periodic unit cell.

    ``ax[i, j]`` is the coefficient on the edge between nodes (i, j) and
    (i+1, j); ``ay[i, j]`` between (i, j) and (i, j+1), indices wrapping.
    """
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1]
    cdef Py_ssize_t i, j, im, ip, jm, jp
    out_arr = np.empty((n0, n1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double fx, fy
    with nogil:
        for i in range(n0):
            ip = i + 1 if i + 1 < n0 else 0
            im = i - 1 if i > 0 else n0 - 1
            for j in range(n1):
                jp = j + 1 if j + 1 < n1 else 0
                jm = j - 1 if j > 0 else n1 - 1
                fx = ax[i, j] * (u[ip, j] - u[i, j]) - ax[im, j] * (u[i, j] - u[im, j])
                fy = ay[i, j] * (u[i, jp] - u[i, j]) - ay[i, jm] * (u[i, j] - u[i, jm])
                out[i, j] = -inv_h2 * (fx + fy)
    return out_arr


def flux_apply_box(const double[:, ::1] u, const double[:, ::1] ax, const double[:, ::1] ay,
                   double inv_h2):
    """Interior rows of -div(a grad u) on an (N, N) nodal grid.

    ``ax`` has shape (N-1, N) (x-edges), ``ay`` has shape (N, N-1) (y-edges).
    Output is zero on the boundary ring; boundary values of ``u`` feed the
    interior rows, which is how Dirichlet data enters.
    """
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1]
    cdef Py_ssize_t i, j
    out_arr = np.zeros((n0, n1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double fx, fy
    with nogil:
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                fx = ax[i, j] * (u[i + 1, j] - u[i, j]) - ax[i - 1, j] * (u[i, j] - u[i - 1, j])
                fy = ay[i, j] * (u[i, j + 1] - u[i, j]) - ay[i, j - 1] * (u[i, j] - u[i, j - 1])
                out[i, j] = -inv_h2 * (fx + fy)
    return out_arr


def stencil5_apply(const double[:, ::1] u, const double[:, ::1] cC, const double[:, ::1] cE,
                   const double[:, ::1] cW, const double[:, ::1] cN, const double[:, ::1] cS):
    """Generic masked 5-point stencil: coefficients are per node, arms whose
    neighbour is invalid must carry coefficient zero."""
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1]
    cdef Py_ssize_t i, j
    out_arr = np.zeros((n0, n1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double acc
    with nogil:
        for i in range(n0):
            for j in range(n1):
                acc = cC[i, j] * u[i, j]
                if i + 1 < n0:
                    acc += cE[i, j] * u[i + 1, j]
                if i > 0:
                    acc += cW[i, j] * u[i - 1, j]
                if j + 1 < n1:
                    acc += cN[i, j] * u[i, j + 1]
                if j > 0:
                    acc += cS[i, j] * u[i, j - 1]
                out[i, j] = acc
    return out_arr


def ball_fractions(Py_ssize_t nx, Py_ssize_t ny, double x00, double y00,
                   double h, double cx, double cy, double r, int m):
    """Fraction of each grid cell covered by the disc of radius r at (cx, cy).

    Cells fully inside/outside are classified from corner distances (the disc
    is convex); rim cells are resolved by an m-by-m midpoint subsample of the
    indicator.
    """
    cdef double r2 = r * r
    cdef Py_ssize_t i, j, p, q
    cdef int cnt
    cdef double xlo, xhi, ylo, yhi, dx, dy, d00, d01, d10, d11, xs, ys
    cdef double inv_m = 1.0 / m
    out_arr = np.zeros((nx, ny), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(nx):
            xlo = x00 + i * h
            xhi = xlo + h
            for j in range(ny):
                ylo = y00 + j * h
                yhi = ylo + h
                # nearest point of the cell to the centre
                dx = cx - xlo
                if dx > h:
                    dx = cx - xhi
                elif dx > 0.0:
                    dx = 0.0
                dy = cy - ylo
                if dy > h:
                    dy = cy - yhi
                elif dy > 0.0:
                    dy = 0.0
                if dx * dx + dy * dy >= r2:
                    continue
                d00 = (xlo - cx) * (xlo - cx) + (ylo - cy) * (ylo - cy)
                d01 = (xlo - cx) * (xlo - cx) + (yhi - cy) * (yhi - cy)
                d10 = (xhi - cx) * (xhi - cx) + (ylo - cy) * (ylo - cy)
                d11 = (xhi - cx) * (xhi - cx) + (yhi - cy) * (yhi - cy)
                if d00 < r2 and d01 < r2 and d10 < r2 and d11 < r2:
                    out[i, j] = 1.0
                    continue
                cnt = 0
                for p in range(m):
                    xs = xlo + (p + 0.5) * inv_m * h - cx
                    for q in range(m):
                        ys = ylo + (q + 0.5) * inv_m * h - cy
                        if xs * xs + ys * ys < r2:
                            cnt += 1
                out[i, j] = cnt * inv_m * inv_m
    return out_arr
