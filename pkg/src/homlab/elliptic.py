"""Dirichlet problems on the square domain: oscillating-coefficient and
constant-coefficient operators, embedded-disc boundaries, and boundary-data
generators (harmonic polynomials, seeded Fourier traces, bump traces).

Square-boundary operators are flux-form 5-point stencils with edge-midpoint
coefficients (plus a centered cross stencil when the constant tensor has an
off-diagonal entry) and are solved by conjugate gradients preconditioned
with a fast sine-transform inverse of the mean-coefficient operator.
Embedded circles use one-sided stencil corrections with the exact boundary
distance along grid lines; those rows are mildly non-symmetric, so the
disc solves go through BiCGSTAB with Jacobi scaling.  The under-resolution
rule h <= eps/8 is a hard error.
"""

from __future__ import annotations

import math

import numpy as np

from . import errors, solvers
from ._kernels import flux_apply_box, stencil5_apply
from .cell import HomogenizedTensor
from .fields import CoefficientField, DomainGrid, ScalarField

_THETA_MIN = 1e-6


# ---------------------------------------------------------------------------
# boundary data
# ---------------------------------------------------------------------------

class HarmonicPolynomial:
    """x -> Re((x1 + i x2)^k), i.e. r^k cos(k theta); harmonic for every k."""

    def __init__(self, degree: int):
        if degree < 0:
            raise errors.ConfigurationError("polynomial degree must be >= 0")
        self.degree = int(degree)

    def __call__(self, x1, x2):
        if self.degree == 0:
            return np.ones(np.broadcast(x1, x2).shape)
        return np.real((np.asarray(x1, dtype=complex) + 1j * np.asarray(x2)) ** self.degree)


def _square_boundary_parameter(x1, x2, L):
    """Arclength fraction t in [0, 1) along the boundary of [-L, L]^2,
    starting at the lower-left corner and running counterclockwise.
    Points are assigned to their nearest side."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    d = np.stack([np.abs(x2 + L), np.abs(x1 - L), np.abs(x2 - L), np.abs(x1 + L)])
    side = np.argmin(d, axis=0)
    t_sides = np.stack([
        (x1 + L),            # bottom, left to right
        2 * L + (x2 + L),    # right, bottom to top
        4 * L + (L - x1),    # top, right to left
        6 * L + (L - x2),    # left, top to bottom
    ])
    t = np.take_along_axis(t_sides, side[None], axis=0)[0]
    return np.mod(t / (8.0 * L), 1.0)


class FourierBoundaryData:
    """Trigonometric polynomial in the square-boundary arclength with seeded
    coefficients decaying like m^-decay; the seed makes runs reproducible."""

    def __init__(self, half_extent: float, modes: int = 6, decay: float = 2.0,
                 seed: int = 0, offset: float = 1.0):
        rng = np.random.default_rng(seed)
        m = np.arange(1, modes + 1)
        self.half_extent = float(half_extent)
        self.offset = float(offset)
        self.seed = int(seed)
        self._m = m
        self._ca = rng.standard_normal(modes) * m**(-decay)
        self._cb = rng.standard_normal(modes) * m**(-decay)

    def __call__(self, x1, x2):
        t = _square_boundary_parameter(x1, x2, self.half_extent)
        ang = 2.0 * math.pi * np.multiply.outer(t, self._m)
        return (self.offset + np.cos(ang) @ self._ca + np.sin(ang) @ self._cb)


class BumpBoundaryData:
    """Gaussian bump in the boundary arclength; concentrates the solution
    near one side, producing growth-condition violations on demand."""

    def __init__(self, half_extent: float, center: float = 0.125,
                 width: float = 0.04, amplitude: float = 1.0):
        self.half_extent = float(half_extent)
        self.center = float(center)
        self.width = float(width)
        self.amplitude = float(amplitude)

    def __call__(self, x1, x2):
        t = _square_boundary_parameter(x1, x2, self.half_extent)
        d = np.abs(t - self.center)
        d = np.minimum(d, 1.0 - d)
        return self.amplitude * np.exp(-((d / self.width) ** 2))


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------

class DiscreteOperator:
    """Flux-form Dirichlet operator on a square or an embedded disc.

    ``apply`` acts on full nodal arrays and returns rows at unknown nodes
    (zero elsewhere); boundary data enters through ``rhs``.
    """

    def __init__(self, grid: DomainGrid, kind: str, apply_fn, unknown_mask,
                 rhs_fn, embed_fn, cmean, diag=None, symmetric=True, radius=None):
        self.grid = grid
        self.kind = kind
        self._apply = apply_fn
        self.unknown_mask = unknown_mask
        self._rhs = rhs_fn
        self._embed = embed_fn
        self.cmean = cmean
        self.diag = diag
        self.symmetric = symmetric
        self.radius = radius

    def apply(self, u):
        return self._apply(u)

    def rhs(self, g):
        return self._rhs(g)

    def embed(self, x, g):
        return self._embed(x, g)


def _sample_g_square(g, grid: DomainGrid) -> np.ndarray:
    """Boundary ring values from a callable or a full nodal array."""
    N = grid.nnodes
    out = np.zeros((N, N))
    if isinstance(g, np.ndarray):
        if g.shape != (N, N):
            raise errors.ConfigurationError("boundary array must be full nodal shape")
        ring = g
        out[0, :], out[-1, :] = ring[0, :], ring[-1, :]
        out[:, 0], out[:, -1] = ring[:, 0], ring[:, -1]
        return out
    x = grid.nodes()
    out[0, :] = g(np.full(N, x[0]), x)
    out[-1, :] = g(np.full(N, x[-1]), x)
    out[:, 0] = g(x, np.full(N, x[0]))
    out[:, -1] = g(x, np.full(N, x[-1]))
    return out


def _square_operator(grid: DomainGrid, ax, ay, a12n, cmean) -> DiscreteOperator:
    N = grid.nnodes
    h = grid.h
    inv_h2 = 1.0 / (h * h)
    interior = np.zeros((N, N), dtype=bool)
    interior[1:-1, 1:-1] = True

    if a12n is None:
        def apply_fn(u):
            return flux_apply_box(u, ax, ay, inv_h2)
    else:
        inv_4h2 = 1.0 / (4.0 * h * h)

        def apply_fn(u):
            out = flux_apply_box(u, ax, ay, inv_h2)
            # -d1(a12 d2 u) - d2(a12 d1 u), centered; exact for bilinears
            d2u = np.zeros_like(u)
            d1u = np.zeros_like(u)
            d2u[:, 1:-1] = u[:, 2:] - u[:, :-2]
            d1u[1:-1, :] = u[2:, :] - u[:-2, :]
            mix = np.zeros_like(u)
            mix[1:-1, :] += (a12n * d2u)[2:, :] - (a12n * d2u)[:-2, :]
            mix[:, 1:-1] += (a12n * d1u)[:, 2:] - (a12n * d1u)[:, :-2]
            out[1:-1, 1:-1] -= inv_4h2 * mix[1:-1, 1:-1]
            return out

    def rhs_fn(g):
        bc = _sample_g_square(g, grid)
        b = -apply_fn(bc)
        b[~interior] = 0.0
        return b, bc

    def embed_fn(x, g):
        bc = _sample_g_square(g, grid)
        out = x.copy()
        out[~interior] = bc[~interior]
        return out

    return DiscreteOperator(grid, "square", apply_fn, interior, rhs_fn,
                            embed_fn, cmean, symmetric=True)


def assemble(A: CoefficientField, eps: float, grid: DomainGrid,
             boundary: str = "square") -> DiscreteOperator:
    """Operator -div(A(x/eps) grad .) with Dirichlet data on the square."""
    if not (0.0 < eps <= 1.0):
        raise errors.ConfigurationError("eps must lie in (0, 1]")
    if boundary != "square":
        raise errors.ConfigurationError(
            "oscillating-coefficient solves support the square boundary only")
    h = grid.h
    if h > eps / 8.0 + 1e-12:
        needed = math.ceil(16.0 * grid.half_extent / eps)
        raise errors.ResolutionError(
            f"grid does not resolve the oscillation: h = {h:.6g} > eps/8 = "
            f"{eps / 8.0:.6g}; need n >= {needed} at L = {grid.half_extent}")
    x = grid.nodes()
    xm = x[:-1] + 0.5 * h
    ax = np.ascontiguousarray(A.entries(xm[:, None] / eps, x[None, :] / eps)[0])
    ay = np.ascontiguousarray(A.entries(x[:, None] / eps, xm[None, :] / eps)[3])
    a12n = np.asarray(A.entries(x[:, None] / eps, x[None, :] / eps)[1])
    if np.max(np.abs(a12n)) <= 1e-14:
        a12n = None
    return _square_operator(grid, ax, ay, a12n,
                            (float(np.mean(ax)), float(np.mean(ay))))


def assemble_homogenized(a_hat: HomogenizedTensor, grid: DomainGrid,
                         boundary="square") -> DiscreteOperator:
    """Constant-coefficient operator; ``boundary`` is "square" or a circle
    radius for the embedded-disc problem."""
    m = a_hat.a_hat
    if boundary == "square":
        N = grid.nnodes
        ax = np.full((N - 1, N), m[0, 0])
        ay = np.full((N, N - 1), m[1, 1])
        a12n = None
        if abs(m[0, 1]) > 1e-14:
            a12n = np.full((N, N), m[0, 1])
        return _square_operator(grid, ax, ay, a12n, (m[0, 0], m[1, 1]))
    r0 = float(boundary)
    if not (0.0 < r0 <= grid.half_extent):
        raise errors.GeometryError(f"circle radius {r0} outside the domain")
    if abs(m[0, 1]) > 1e-9 * max(m[0, 0], m[1, 1]):
        raise errors.ConfigurationError(
            "embedded-circle solves support diagonal tensors only "
            f"(off-diagonal entry {m[0, 1]:.3e}); the shipped coefficient "
            "families all homogenize to diagonal tensors")
    return _circle_operator(grid, r0, m[0, 0], m[1, 1])


def _circle_operator(grid: DomainGrid, r0: float, c1: float, c2: float) -> DiscreteOperator:
    N = grid.nnodes
    h = grid.h
    inv_h2 = 1.0 / (h * h)
    x = grid.nodes()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    active = X1**2 + X2**2 < r0**2

    # fractional distances to the circle along each arm, in units of h
    theta = {}
    cross1 = np.sqrt(np.maximum(r0**2 - X2**2, 0.0))   # |x1| at the crossing
    cross2 = np.sqrt(np.maximum(r0**2 - X1**2, 0.0))
    arms = {
        "E": (1, 0, (cross1 - X1) / h),
        "W": (-1, 0, (X1 + cross1) / h),
        "N": (0, 1, (cross2 - X2) / h),
        "S": (0, -1, (X2 + cross2) / h),
    }
    neigh_active = {}
    for name, (di, dj, dist) in arms.items():
        na = np.zeros_like(active)
        src = active
        if di == 1:
            na[:-1, :] = src[1:, :]
        elif di == -1:
            na[1:, :] = src[:-1, :]
        elif dj == 1:
            na[:, :-1] = src[:, 1:]
        else:
            na[:, 1:] = src[:, :-1]
        neigh_active[name] = na
        th = np.ones((N, N))
        cut = active & ~na
        th[cut] = np.clip(dist[cut], _THETA_MIN, 1.0)
        theta[name] = th

    thE, thW, thN, thS = theta["E"], theta["W"], theta["N"], theta["S"]
    cE_full = -c1 * 2.0 / (thE * (thE + thW)) * inv_h2
    cW_full = -c1 * 2.0 / (thW * (thE + thW)) * inv_h2
    cN_full = -c2 * 2.0 / (thN * (thN + thS)) * inv_h2
    cS_full = -c2 * 2.0 / (thS * (thN + thS)) * inv_h2
    cC = c1 * 2.0 / (thE * thW) * inv_h2 + c2 * 2.0 / (thN * thS) * inv_h2
    cC = np.where(active, cC, 0.0)

    coeffs = {}
    cut_info = []
    for name, cfull in (("E", cE_full), ("W", cW_full), ("N", cN_full), ("S", cS_full)):
        regular = active & neigh_active[name]
        coeffs[name] = np.where(regular, cfull, 0.0)
        cut = active & ~neigh_active[name]
        if np.any(cut):
            di, dj, _ = arms[name]
            ci, cj = np.nonzero(cut)
            t = theta[name][ci, cj] * h
            px = x[ci] + di * t
            py = x[cj] + dj * t
            cut_info.append((ci, cj, cfull[ci, cj], px, py))
    cE, cW, cN, cS = coeffs["E"], coeffs["W"], coeffs["N"], coeffs["S"]

    def apply_fn(u):
        return stencil5_apply(u, cC, cE, cW, cN, cS)

    def rhs_fn(g):
        if not callable(g):
            raise errors.ConfigurationError(
                "disc boundaries take callable boundary data, evaluated at "
                "the circle crossings")
        b = np.zeros((N, N))
        for ci, cj, coef, px, py in cut_info:
            np.add.at(b, (ci, cj), -coef * np.asarray(g(px, py), dtype=float))
        return b, None

    def embed_fn(u, g):
        """Active values plus one extrapolated ghost ring outside the circle
        (linear along each cut arm through the boundary value), so bilinear
        interpolation right up to the circle stays second order."""
        out = u.copy()
        out[~active] = 0.0
        ghost_sum = np.zeros((N, N))
        ghost_cnt = np.zeros((N, N))
        for name, (di, dj, _) in arms.items():
            cut = active & ~neigh_active[name]
            if not np.any(cut):
                continue
            ci, cj = np.nonzero(cut)
            gi, gj = ci + di, cj + dj
            ok = (gi >= 0) & (gi < N) & (gj >= 0) & (gj < N)
            ci, cj, gi, gj = ci[ok], cj[ok], gi[ok], gj[ok]
            th = theta[name][ci, cj]
            t = th * h
            gb = np.asarray(g(x[ci] + di * t, x[cj] + dj * t), dtype=float)
            val = u[ci, cj] + (gb - u[ci, cj]) / th
            np.add.at(ghost_sum, (gi, gj), val)
            np.add.at(ghost_cnt, (gi, gj), 1.0)
        ghosts = ghost_cnt > 0
        out[ghosts] = ghost_sum[ghosts] / ghost_cnt[ghosts]
        return out

    return DiscreteOperator(grid, "circle", apply_fn, active, rhs_fn, embed_fn,
                            (c1, c2), diag=cC, symmetric=False, radius=r0)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def solve_dirichlet(op: DiscreteOperator, g, tol: float = 1e-10,
                    maxiter: int | None = None) -> ScalarField:
    """Solve op u = 0 with Dirichlet data g; boundary values are imposed
    exactly and the interior relative residual is driven below tol."""
    if tol > 1e-8:
        raise errors.ConfigurationError("solve_dirichlet needs tol <= 1e-8")
    if maxiter is None:
        maxiter = 50 * op.grid.n
    b, _ = op.rhs(g)
    if op.kind == "square":
        precond = solvers.SinePoissonPreconditioner(
            op.grid.n, op.grid.h, op.cmean[0], op.cmean[1])
        x, _ = solvers.conjugate_gradient(op.apply, b, tol=tol,
                                          maxiter=maxiter, precond=precond)
    else:
        precond = solvers.SinePoissonPreconditioner(
            op.grid.n, op.grid.h, op.cmean[0], op.cmean[1],
            mask=op.unknown_mask.astype(np.float64))
        x, _ = solvers.bicgstab_solve(op.apply, b, tol=tol, maxiter=maxiter,
                                      precond=precond)
    return ScalarField(op.grid, op.embed(x, g))
