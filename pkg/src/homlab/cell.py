"""Periodic cell problems: correctors, the effective (homogenized) tensor,
and flux correctors with an antisymmetric potential.

Discretization: flux-form 5-point differences with coefficients sampled at
edge midpoints; off-diagonal coefficient entries (none of the shipped
families have any) enter through centered differences of nodal samples.
The corrector solves use conjugate gradients projected onto mean-zero with
a constant-coefficient FFT preconditioner.  All derived quantities (tensor
entries, flux discrepancies, potentials) are assembled from the same edge
fluxes the stencil uses, which is what makes the discrete compatibility
identities hold at solver tolerance instead of at discretization order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors, solvers
from ._kernels import flux_apply_periodic
from .fields import CoefficientField, PeriodicGrid, ScalarField, gradient, sample_periodic


def edge_coefficients(A: CoefficientField, grid: PeriodicGrid):
    """Sample a11 on x-edge midpoints, a22 on y-edge midpoints and (if any)
    a12 on nodes.  Returns (ax, ay, a12n) with a12n None when it vanishes."""
    y = grid.nodes()
    half = 0.5 * grid.h
    ym = y + half
    ax = np.ascontiguousarray(A.entries(ym[:, None], y[None, :])[0])
    ay = np.ascontiguousarray(A.entries(y[:, None], ym[None, :])[3])
    a12n = np.asarray(A.entries(y[:, None], y[None, :])[1])
    if np.max(np.abs(a12n)) <= 1e-14:
        a12n = None
    return ax, ay, a12n


def _d1c(v, h):
    return (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2.0 * h)


def _d2c(v, h):
    return (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * h)


def _make_apply(ax, ay, a12n, h):
    inv_h2 = 1.0 / (h * h)

    if a12n is None:
        def apply_op(u):
            return flux_apply_periodic(u, ax, ay, inv_h2)
    else:
        def apply_op(u):
            out = flux_apply_periodic(u, ax, ay, inv_h2)
            out -= _d1c(a12n * _d2c(u, h), h) + _d2c(a12n * _d1c(u, h), h)
            return out
    return apply_op


def _cell_rhs(ax, ay, a12n, h, j):
    """Right-hand side of the corrector problem: the stencil applied to the
    linear profile y_j, with the sign moved to the right."""
    if j == 0:
        rhs = (ax - np.roll(ax, 1, axis=0)) / h
        if a12n is not None:
            rhs = rhs + _d2c(a12n, h)
    else:
        rhs = (ay - np.roll(ay, 1, axis=1)) / h
        if a12n is not None:
            rhs = rhs + _d1c(a12n, h)
    return rhs


class _PeriodicPoissonInverse:
    """FFT inverse of the 5-point Laplacian on the periodic cell (zero-mean)."""

    def __init__(self, n, h, scale=1.0):
        k = np.fft.fftfreq(n, d=1.0) * n
        s = -4.0 / (h * h) * np.sin(np.pi * k / n) ** 2
        sym = scale * (s[:, None] + s[None, : n // 2 + 1])
        sym[0, 0] = 1.0
        self._inv = 1.0 / sym
        self._inv[0, 0] = 0.0

    def __call__(self, rhs):
        return np.fft.irfft2(np.fft.rfft2(rhs) * self._inv, s=rhs.shape)


@dataclass(frozen=True)
class Corrector:
    """First-order correctors chi_1, chi_2 on the periodic cell."""

    chi: tuple[ScalarField, ScalarField]
    residual_norm: float
    iterations: tuple[int, int]

    @property
    def grid(self) -> PeriodicGrid:
        return self.chi[0].grid


@dataclass(frozen=True)
class HomogenizedTensor:
    """Constant effective 2x2 tensor; symmetrized, with the raw asymmetry."""

    a_hat: np.ndarray
    asymmetry: float

    def __post_init__(self):
        m = np.asarray(self.a_hat, dtype=np.float64).reshape(2, 2)
        m.flags.writeable = False
        object.__setattr__(self, "a_hat", m)

    def eigenvalues(self):
        return tuple(np.linalg.eigvalsh(self.a_hat))


@dataclass(frozen=True)
class FluxCorrector:
    """Flux discrepancies b_ij and potentials F_kij with F_kij = -F_ikj."""

    b: tuple           # b[i][j] -> ScalarField
    F: tuple           # F[k][i][j] -> ScalarField
    div_defect: float  # max_ij rel. L2 of (backward-div F)_ij - b_ij


def solve_corrector(A: CoefficientField, grid: PeriodicGrid,
                    tol: float = 1e-10) -> Corrector:
    """Solve the two periodic corrector problems to relative residual tol."""
    if not (0.0 < tol <= 1e-6):
        raise errors.ConfigurationError("corrector tol must lie in (0, 1e-6]")
    ax, ay, a12n = edge_coefficients(A, grid)
    apply_op = _make_apply(ax, ay, a12n, grid.h)
    cbar = 0.5 * (float(np.mean(ax)) + float(np.mean(ay)))
    precond = _PeriodicPoissonInverse(grid.n, grid.h, scale=cbar)

    def project(v):
        return v - np.mean(v)

    chis, its, res = [], [], 0.0
    for j in (0, 1):
        rhs = project(_cell_rhs(ax, ay, a12n, grid.h, j))
        x, info = solvers.conjugate_gradient(
            apply_op, rhs, tol=tol, maxiter=50 * grid.n,
            project=project, precond=precond)
        chis.append(ScalarField(grid, x))
        its.append(info["iterations"])
        res = max(res, info["residual"])
    return Corrector(chi=(chis[0], chis[1]), residual_norm=res,
                     iterations=(its[0], its[1]))


def _edge_fluxes(A: CoefficientField, chi: Corrector):
    """Edge fluxes of the corrected gradients e_j + grad chi_j.

    fx[j] lives on x-edges (value at index i belongs to edge i+1/2), fy[j]
    on y-edges; mixed nodal contributions are folded in when present.
    """
    grid = chi.grid
    h = grid.h
    ax, ay, a12n = edge_coefficients(A, grid)
    fx, fy = [], []
    for j in (0, 1):
        v = chi.chi[j].values
        d1p = (np.roll(v, -1, axis=0) - v) / h
        d2p = (np.roll(v, -1, axis=1) - v) / h
        fxj = ax * ((1.0 if j == 0 else 0.0) + d1p)
        fyj = ay * ((1.0 if j == 1 else 0.0) + d2p)
        if a12n is not None:
            fxj = fxj + a12n * ((1.0 if j == 1 else 0.0) + _d2c(v, h))
            fyj = fyj + a12n * ((1.0 if j == 0 else 0.0) + _d1c(v, h))
        fx.append(fxj)
        fy.append(fyj)
    return fx, fy


def homogenize(A: CoefficientField, chi: Corrector,
               ellipticity_tol: float = 1e-6) -> HomogenizedTensor:
    """Effective tensor: cell averages of the corrected fluxes."""
    fx, fy = _edge_fluxes(A, chi)
    raw = np.array([[np.mean(fx[0]), np.mean(fx[1])],
                    [np.mean(fy[0]), np.mean(fy[1])]])
    asym = float(abs(raw[0, 1] - raw[1, 0]))
    sym = 0.5 * (raw + raw.T)
    ev = np.linalg.eigvalsh(sym)
    if ev[0] < A.mu - ellipticity_tol or ev[1] > 1.0 / A.mu + ellipticity_tol:
        raise errors.InternalConsistencyError(
            f"effective tensor eigenvalues {ev} escape [{A.mu}, {1.0 / A.mu}]")
    return HomogenizedTensor(a_hat=sym, asymmetry=asym)


def flux_correctors(A: CoefficientField, chi: Corrector,
                    a_hat: HomogenizedTensor, tol: float = 1e-10) -> FluxCorrector:
    """Flux discrepancies and their antisymmetric potential.

    b_ij is the effective entry minus the corrected flux, stored nodally with
    each node carrying its right/top edge value so that the backward discrete
    divergence of b reproduces the cell-problem residual exactly.  The
    potential follows the standard recipe: solve the periodic Poisson problem
    for each b_ij (FFT, exact at machine level), then antisymmetrize forward
    differences of the potentials.
    """
    grid = chi.grid
    h = grid.h
    fx, fy = _edge_fluxes(A, chi)
    ahat = a_hat.a_hat
    b_vals = [[ahat[0, j] - fx[j] for j in (0, 1)],
              [ahat[1, j] - fy[j] for j in (0, 1)]]
    b_vals = [[v - np.mean(v) for v in row] for row in b_vals]

    inv5 = _PeriodicPoissonInverse(grid.n, h)
    f_pot = [[inv5(b_vals[i][j]) for j in (0, 1)] for i in (0, 1)]

    def dplus(v, axis):
        return (np.roll(v, -1, axis=axis) - v) / h

    def dminus(v, axis):
        return (v - np.roll(v, 1, axis=axis)) / h

    F_vals = [[[dplus(f_pot[i][j], k) - dplus(f_pot[k][j], i) for j in (0, 1)]
               for i in (0, 1)] for k in (0, 1)]

    defect = 0.0
    for i in (0, 1):
        for j in (0, 1):
            div_f = dminus(F_vals[0][i][j], 0) + dminus(F_vals[1][i][j], 1)
            num = float(np.sqrt(np.mean((div_f - b_vals[i][j]) ** 2)))
            den = max(float(np.sqrt(np.mean(b_vals[i][j] ** 2))), 1e-30)
            defect = max(defect, num / max(den, 1.0))

    wrap = lambda v: ScalarField(grid, v)
    return FluxCorrector(
        b=tuple(tuple(wrap(b_vals[i][j]) for j in (0, 1)) for i in (0, 1)),
        F=tuple(tuple(tuple(wrap(F_vals[k][i][j]) for j in (0, 1))
                      for i in (0, 1)) for k in (0, 1)),
        div_defect=defect)


# ---------------------------------------------------------------------------
# bundle consumed by the oscillating-solution analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrectorFields:
    """Correctors with the nodal periodic fields the weighted-inequality
    assembly needs: centered gradients and the vector div_y(A chi_j)."""

    corrector: Corrector
    grad: tuple      # grad[j][l] -> ScalarField, l-th derivative of chi_j
    div_a_chi: tuple  # div_a_chi[j][l] -> ScalarField, sum_i d_i(a_il chi_j)
    chi_inf: float
    grad_inf: float

    @property
    def grid(self):
        return self.corrector.grid

    def sample_chi(self, j, x1, x2):
        return sample_periodic(self.corrector.chi[j], x1, x2)

    def sample_grad(self, j, l, x1, x2):
        return sample_periodic(self.grad[j][l], x1, x2)

    def sample_div_a_chi(self, j, l, x1, x2):
        return sample_periodic(self.div_a_chi[j][l], x1, x2)


def corrector_fields(A: CoefficientField, chi: Corrector) -> CorrectorFields:
    grid = chi.grid
    h = grid.h
    y = grid.nodes()
    a11, a12, _, a22 = (np.broadcast_to(v, (grid.n, grid.n))
                        for v in A.entries(y[:, None], y[None, :]))
    grad_rows, div_rows = [], []
    chi_inf = grad_inf = 0.0
    for j in (0, 1):
        v = chi.chi[j].values
        g1, g2 = gradient(chi.chi[j])
        grad_rows.append((ScalarField(grid, g1), ScalarField(grid, g2)))
        # l-component of div_y(A chi_j): d_1(a_1l chi_j) + d_2(a_2l chi_j)
        d1 = _d1c(a11 * v, h) + _d2c(a12 * v, h)
        d2 = _d1c(a12 * v, h) + _d2c(a22 * v, h)
        div_rows.append((ScalarField(grid, d1), ScalarField(grid, d2)))
        chi_inf = max(chi_inf, float(np.max(np.abs(v))))
        grad_inf = max(grad_inf, float(np.max(np.hypot(g1, g2))))
    return CorrectorFields(corrector=chi, grad=tuple(grad_rows),
                           div_a_chi=tuple(div_rows),
                           chi_inf=chi_inf, grad_inf=grad_inf)
