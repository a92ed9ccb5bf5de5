"""Iterative solvers used by the cell and Dirichlet problems.

Conjugate gradients is hand-rolled so the periodic solves can project onto
mean-zero at every iteration and so residual histories are available for
error reporting.  Square-domain solves get a fast-transform preconditioner
(the inverse of a constant-coefficient 5-point operator, diagonal in the
type-I sine basis), which keeps iteration counts bounded by the coefficient
contrast instead of the grid size.  Embedded-disc operators with one-sided
boundary corrections are mildly non-symmetric, so they go through BiCGSTAB.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft
from scipy.sparse.linalg import LinearOperator, bicgstab

from .errors import SolverError


def _norm(v):
    return float(np.sqrt(np.sum(v * v, dtype=np.float64)))


def conjugate_gradient(apply_op, b, tol, maxiter, project=None, precond=None):
    """Preconditioned CG on arrays of any shape.

    ``apply_op``/``precond`` map arrays to arrays; ``project`` (if given) is
    applied to the initial residual and every direction update, which keeps
    the iteration on the mean-zero complement for singular periodic systems.
    Returns (x, info) with info carrying the relative residual and iteration
    count; raises SolverError on non-convergence.
    """
    b = np.asarray(b, dtype=np.float64)
    bnorm = _norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, {"residual": 0.0, "iterations": 0, "history": [0.0]}
    r = b.copy()
    if project is not None:
        r = project(r)
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(np.sum(r * z, dtype=np.float64))
    history = [_norm(r) / bnorm]
    for it in range(1, maxiter + 1):
        Ap = apply_op(p)
        if project is not None:
            Ap = project(Ap)
        alpha = rz / float(np.sum(p * Ap, dtype=np.float64))
        x += alpha * p
        r -= alpha * Ap
        res = _norm(r) / bnorm
        history.append(res)
        if res <= tol:
            if project is not None:
                x = project(x)
            return x, {"residual": res, "iterations": it, "history": history}
        z = precond(r) if precond is not None else r
        rz_new = float(np.sum(r * z, dtype=np.float64))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach relative residual {tol:.1e} in {maxiter} iterations "
        f"(final {history[-1]:.3e})", residual=history[-1], iterations=maxiter)


class SinePoissonPreconditioner:
    """Exact inverse of -c1 d11 - c2 d22 (5-point, zero Dirichlet) on the
    interior of an (n+1)x(n+1) nodal square grid, via the orthonormal DST-I.

    An optional mask restricts input and output to a subset of nodes, which
    turns the square inverse into a serviceable fictitious-domain
    preconditioner for the embedded-disc operator.
    """

    def __init__(self, n, h, c1, c2, mask=None):
        k = np.arange(1, n)
        lam1 = (2.0 * c1 / h**2) * (1.0 - np.cos(np.pi * k / n))
        lam2 = (2.0 * c2 / h**2) * (1.0 - np.cos(np.pi * k / n))
        self._inv_eig = 1.0 / (lam1[:, None] + lam2[None, :])
        self._mask = mask
        self._workers = os.cpu_count() or 1

    def __call__(self, r):
        """r: full (n+1, n+1) array, zero outside the unknown set."""
        if self._mask is not None:
            r = r * self._mask
        z = scipy.fft.dstn(r[1:-1, 1:-1], type=1, norm="ortho", workers=self._workers)
        z *= self._inv_eig
        out = np.zeros_like(r)
        out[1:-1, 1:-1] = scipy.fft.idstn(z, type=1, norm="ortho", workers=self._workers)
        if self._mask is not None:
            out *= self._mask
        return out


def bicgstab_solve(apply_op, b, tol, maxiter, precond=None):
    """BiCGSTAB on flattened arrays with an optional preconditioner callable;
    verifies the true relative residual afterwards."""
    shape = b.shape
    bflat = np.asarray(b, dtype=np.float64).ravel()
    bnorm = _norm(bflat)
    if bnorm == 0.0:
        return np.zeros(shape), {"residual": 0.0, "iterations": 0}
    nit = 0

    def matvec(v):
        nonlocal nit
        nit += 1
        return apply_op(v.reshape(shape)).ravel()

    A = LinearOperator((bflat.size, bflat.size), matvec=matvec, dtype=np.float64)
    M = None
    if precond is not None:
        M = LinearOperator((bflat.size, bflat.size),
                           matvec=lambda v: precond(v.reshape(shape)).ravel(),
                           dtype=np.float64)
    x, code = bicgstab(A, bflat, rtol=0.1 * tol, atol=0.0, maxiter=maxiter, M=M)
    res = _norm(bflat - A @ x) / bnorm
    if code != 0 or res > tol:
        raise SolverError(
            f"BiCGSTAB failed (code {code}, relative residual {res:.3e} > {tol:.1e}, "
            f"{nit} operator applications)", residual=res, iterations=nit)
    return x.reshape(shape), {"residual": res, "iterations": nit}
