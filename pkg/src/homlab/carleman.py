"""Gaussian-exponential weight machinery and weighted-inequality assembly.

The weight is w = exp(2 tau (phi - 1)) with phi = exp(-lam |x|^2); the
constant factor exp(2 tau) is dropped uniformly so both sides of every
inequality share it and nothing overflows.  The fixed radial cutoff eta
vanishes outside the annulus 1/2 < |x| < 5/2 and equals one on
2/3 <= |x| <= 7/3, built from the classic smooth step
psi(t) = f(t)/(f(t)+f(1-t)), f(t) = exp(-1/t).

The right-hand side of the oscillating weighted inequality is always
assembled in expanded form (the product-rule expansion of the operator
applied to u*eta + eps*chi^eps*grad(eta)*u): applying the discrete
oscillating operator to the product directly contains 1/eps-sized pieces
that only cancel analytically, and the discrete cancellation is
catastrophic.  ``rhs_expansion_residual`` measures the agreement of the two
routes instead.  Cutoff derivatives up to third order come from the
analytic radial profile, never from differencing sampled values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .cell import CorrectorFields, HomogenizedTensor
from .elliptic import assemble, assemble_homogenized
from .fields import (CoefficientField, DomainGrid, ScalarField, ball_l2,
                     cell_average, cell_fractions, cell_radius2, gradient,
                     sample_periodic)
from .twoscale import RecoveredU0, expansion

SUPPORT = (0.5, 2.5)
PLATEAU = (2.0 / 3.0, 7.0 / 3.0)
_RAMP = 1.0 / 6.0  # transition width on both sides


# ---------------------------------------------------------------------------
# smooth step and radial cutoff profile, with derivatives
# ---------------------------------------------------------------------------

def _bump_f(t):
    out = np.zeros_like(t)
    pos = t > 1e-9
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def psi_derivatives(t):
    """psi, psi', psi'', psi''' of the smooth step on [0, 1]."""
    t = np.asarray(t, dtype=float)
    lo = t <= 1e-9
    hi = t >= 1.0 - 1e-9
    mid = ~(lo | hi)
    p0 = np.where(hi, 1.0, 0.0)
    p1 = np.zeros_like(t)
    p2 = np.zeros_like(t)
    p3 = np.zeros_like(t)
    tm = t[mid]
    f = np.exp(-1.0 / tm)
    g = np.exp(-1.0 / (1.0 - tm))
    f1 = f / tm**2
    f2 = f * (1.0 / tm**4 - 2.0 / tm**3)
    f3 = f * (1.0 / tm**6 - 6.0 / tm**5 + 6.0 / tm**4)
    s = 1.0 - tm
    g1 = -g / s**2
    g2 = g * (1.0 / s**4 - 2.0 / s**3)
    g3 = -g * (1.0 / s**6 - 6.0 / s**5 + 6.0 / s**4)
    S = f + g
    S1 = f1 + g1
    S2 = f2 + g2
    N = f1 * g - f * g1
    N1 = f2 * g - f * g2
    N2 = f3 * g + f2 * g1 - f1 * g2 - f * g3
    p0[mid] = f / S
    p1[mid] = N / S**2
    p2[mid] = N1 / S**2 - 2.0 * N * S1 / S**3
    p3[mid] = (N2 / S**2 - 4.0 * N1 * S1 / S**3 - 2.0 * N * S2 / S**3
               + 6.0 * N * S1**2 / S**4)
    return p0, p1, p2, p3


def eta_radial(r):
    """eta(r) and its first three radial derivatives."""
    r = np.asarray(r, dtype=float)
    u = (r - SUPPORT[0]) / _RAMP
    v = (SUPPORT[1] - r) / _RAMP
    a0, a1, a2, a3 = psi_derivatives(u)
    b0, b1, b2, b3 = psi_derivatives(v)
    c = 1.0 / _RAMP
    e0 = a0 * b0
    e1 = c * (a1 * b0 - a0 * b1)
    e2 = c**2 * (a2 * b0 - 2.0 * a1 * b1 + a0 * b2)
    e3 = c**3 * (a3 * b0 - 3.0 * a2 * b1 + 3.0 * a1 * b2 - a0 * b3)
    return e0, e1, e2, e3


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff sampled on a domain grid, with the nodal Cartesian
    derivative fields needed by the expanded assembly."""

    eta: ScalarField
    grad: tuple       # grad[j]: d_j eta
    hess: tuple       # hess = (d11, d12, d22)
    third: tuple      # third = (d111, d112, d122, d222), symmetric

    @property
    def grid(self):
        return self.eta.grid

    def hess_entry(self, i, j):
        return self.hess[i + j]

    def third_entry(self, l, i, j):
        return self.third[l + i + j]


def make_cutoff(grid: DomainGrid) -> Cutoff:
    if grid.half_extent < SUPPORT[1]:
        raise errors.GeometryError(
            f"cutoff support needs half-extent >= {SUPPORT[1]}")
    x = grid.nodes()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    R = np.hypot(X1, X2)
    e0, e1, e2, e3 = eta_radial(R)
    safe = np.maximum(R, 1e-12)
    n1 = X1 / safe
    n2 = X2 / safe
    inside = R > 1e-12
    e1 = np.where(inside, e1, 0.0)
    e2 = np.where(inside, e2, 0.0)
    e3 = np.where(inside, e3, 0.0)
    over_r = np.where(inside, 1.0 / safe, 0.0)

    g = (e1 * n1, e1 * n2)
    q = e1 * over_r  # eta'/r
    hess = (e2 * n1 * n1 + q * (1.0 - n1 * n1),
            (e2 - q) * n1 * n2,
            e2 * n2 * n2 + q * (1.0 - n2 * n2))
    # radial third derivative: e3 nhat^3 + (e2/r - e1/r^2) * (symmetrized
    # delta*nhat - 3 nhat^3); fully symmetric in all three indices
    w = (e2 - q) * over_r

    def third(l, i, j, nl, ni, nj):
        delta = (1.0 if l == i else 0.0) * nj \
            + (1.0 if l == j else 0.0) * ni \
            + (1.0 if i == j else 0.0) * nl
        return e3 * nl * ni * nj + w * (delta - 3.0 * nl * ni * nj)

    t = (third(0, 0, 0, n1, n1, n1), third(0, 0, 1, n1, n1, n2),
         third(0, 1, 1, n1, n2, n2), third(1, 1, 1, n2, n2, n2))
    wrap = lambda v: ScalarField(grid, v)
    return Cutoff(eta=wrap(e0), grad=tuple(wrap(v) for v in g),
                  hess=tuple(wrap(v) for v in hess),
                  third=tuple(wrap(v) for v in t))


@dataclass(frozen=True)
class CarlemanWeight:
    lam: float
    tau: float

    def __post_init__(self):
        if self.lam <= 0 or self.tau < 0:
            raise errors.ConfigurationError("weights need lam > 0, tau >= 0")


@dataclass(frozen=True)
class CarlemanConstants:
    """Admissible constants of the weighted inequalities.  The literature
    never pins numeric values, so they are either configured or calibrated
    from a probe sweep; the provenance travels with every report."""

    c0: float
    lambda0: float
    tau0: float
    c_range: float    # multiplier of the norm ratio in the tau-range cap
    provenance: str   # "configured" | "calibrated"

    def tau_max(self, norm_ratio: float) -> float:
        return 100.0 * self.tau0 + self.c_range * norm_ratio


# ---------------------------------------------------------------------------
# expanded right-hand side of the oscillating inequality
# ---------------------------------------------------------------------------

def _nodal_coefficients(A: CoefficientField, grid: DomainGrid, eps: float):
    x = grid.nodes()
    a11, a12, _, a22 = (np.broadcast_to(v, (grid.nnodes, grid.nnodes))
                        for v in A.entries(x[:, None] / eps, x[None, :] / eps))
    return a11, a12, a22


def expanded_rhs_field(u_eps: ScalarField, cf: CorrectorFields, eps: float,
                       A: CoefficientField, eta: Cutoff):
    """The expanded form of the operator applied to the cutoff product, as a
    nodal field, together with the zero-order/gradient coefficient split
    used for the pointwise bound.  Every term carries a cutoff derivative,
    so the field vanishes identically on the plateau annulus.
    """
    grid = u_eps.grid
    u = u_eps.values
    a11, a12, a22 = _nodal_coefficients(A, grid, eps)
    gu1, gu2 = gradient(u_eps)
    x = grid.nodes()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    Y1, Y2 = X1 / eps, X2 / eps

    d1, d2 = eta.grad[0].values, eta.grad[1].values
    H = [[eta.hess_entry(0, 0).values, eta.hess_entry(0, 1).values],
         [eta.hess_entry(0, 1).values, eta.hess_entry(1, 1).values]]

    # gradient-coefficient vector: 2 A grad(eta) plus corrector corrections
    cgrad1 = 2.0 * (a11 * d1 + a12 * d2)
    cgrad2 = 2.0 * (a12 * d1 + a22 * d2)
    # zero-order coefficient: A : hess(eta) plus corrector corrections
    czero = a11 * H[0][0] + 2.0 * a12 * H[0][1] + a22 * H[1][1]

    for j in (0, 1):
        chi_j = cf.sample_chi(j, Y1, Y2)
        gc1 = cf.sample_grad(j, 0, Y1, Y2)
        gc2 = cf.sample_grad(j, 1, Y1, Y2)
        v1 = cf.sample_div_a_chi(j, 0, Y1, Y2)
        v2 = cf.sample_div_a_chi(j, 1, Y1, Y2)
        dj = d1 if j == 0 else d2
        # (A grad chi_j) . grad d_j eta  and  div_y(A chi_j) . grad d_j eta
        agc1 = a11 * gc1 + a12 * gc2
        agc2 = a12 * gc1 + a22 * gc2
        czero += agc1 * H[0][j] + agc2 * H[1][j]
        czero += v1 * H[0][j] + v2 * H[1][j]
        # eps A chi_j : third(eta)_{..j}
        czero += eps * chi_j * (
            a11 * eta.third_entry(0, 0, j).values
            + 2.0 * a12 * eta.third_entry(0, 1, j).values
            + a22 * eta.third_entry(1, 1, j).values)
        # 2 (A grad u . grad chi_j) d_j eta  -> gradient coefficient
        cgrad1 += 2.0 * (a11 * gc1 + a12 * gc2) * dj
        cgrad2 += 2.0 * (a12 * gc1 + a22 * gc2) * dj
        # 2 eps chi_j (A grad d_j eta) . grad u
        cgrad1 += 2.0 * eps * chi_j * (a11 * H[0][j] + a12 * H[1][j])
        cgrad2 += 2.0 * eps * chi_j * (a12 * H[0][j] + a22 * H[1][j])

    R = czero * u + cgrad1 * gu1 + cgrad2 * gu2
    return R, czero, (cgrad1, cgrad2)


# ---------------------------------------------------------------------------
# weighted quadrature of the assembled integrands
# ---------------------------------------------------------------------------

class WeightedQuadrature:
    """Reweighting helper: cell-average an integrand once, then integrate it
    against any (lam, tau) weight power without touching the field again.

    ``ref_radius`` renormalizes the weight to its maximum on the integrand
    support (both sides of an inequality share the dropped constant factor,
    so ratios and flags are unchanged).  Without it, every integral of a
    cutoff-supported quantity underflows once tau reaches a few hundred.
    The exponent is clipped where the integrand vanishes identically.
    """

    def __init__(self, grid: DomainGrid, radius: float = 3.0, subsamples: int = 4,
                 ref_radius: float = 0.0):
        self.grid = grid
        self.ref_radius = ref_radius
        self._fw = np.asarray(cell_fractions(grid, radius, subsamples),
                              dtype=np.float64) * grid.h**2
        self._r2 = cell_radius2(grid)

    def average(self, nodal_values):
        return cell_average(nodal_values)

    def cell_gradient_sq(self, nodal_values):
        """Squared bilinear gradient at cell centres: single-cell spans keep
        the difference footprint aligned with the midpoint weight, which
        matters once the weight varies strongly across a cell."""
        v = nodal_values
        inv2h = 0.5 / self.grid.h
        gx = (v[1:, :-1] + v[1:, 1:] - v[:-1, :-1] - v[:-1, 1:]) * inv2h
        gy = (v[:-1, 1:] + v[1:, 1:] - v[:-1, :-1] - v[1:, :-1]) * inv2h
        return gx**2 + gy**2

    def integrate(self, cell_values, lam: float, tau: float, power: str = "w"):
        phi = np.exp(-lam * self._r2)
        phi_ref = math.exp(-lam * self.ref_radius**2)
        expo = np.clip(2.0 * tau * (phi - phi_ref), -700.0, 700.0)
        w = np.exp(expo)
        if power == "w_phi":
            w *= phi
        elif power == "w_phi3":
            w *= phi**3
        elif power == "w_x2_phi2":
            w *= self._r2 * phi**2
        elif power != "w":
            raise errors.ConfigurationError(f"unknown weight power {power!r}")
        return float(np.sum(cell_values * w * self._fw, dtype=np.float64))


def support_quadrature(grid: DomainGrid, subsamples: int = 4) -> WeightedQuadrature:
    """Quadrature for cutoff-supported integrands, weight-normalized at the
    inner support edge where the weight is largest."""
    return WeightedQuadrature(grid, radius=3.0, subsamples=subsamples,
                              ref_radius=SUPPORT[0])


def carleman_lhs(u_eps: ScalarField, u0: RecoveredU0, cf: CorrectorFields,
                 eps: float, weight: CarlemanWeight, eta: Cutoff, c0: float,
                 quad: WeightedQuadrature | None = None):
    """Zero-order and gradient terms of the weighted left-hand side, and the
    combined (c0/2)-scaled sum."""
    grid = u_eps.grid
    if quad is None:
        quad = support_quadrature(grid)
    zero_cells, grad_cells = lhs_integrands(u_eps, u0, cf, eps, eta, quad)
    lam, tau = weight.lam, weight.tau
    t0 = lam**4 * tau**3 * quad.integrate(zero_cells, lam, tau, "w_phi3")
    tg = lam**2 * tau * quad.integrate(grad_cells, lam, tau, "w_phi")
    return t0, tg, 0.5 * c0 * (t0 + tg)


def lhs_integrands(u_eps: ScalarField, u0: RecoveredU0, cf: CorrectorFields,
                   eps: float, eta: Cutoff, quad: WeightedQuadrature):
    """Cell values of (u eta)^2 and |grad((u - eps chi grad u0) eta)|^2."""
    grid = u_eps.grid
    ev = eta.eta.values
    zero_sq = cell_average((u_eps.values * ev) ** 2)
    # subtract the oscillating part of the expansion, then cut off
    osc = expansion(u0.u0, cf.corrector, eps, grid=grid).values - \
        _u0_on(u0, grid)
    q = (u_eps.values - osc) * ev
    grad_sq = quad.cell_gradient_sq(q)
    return zero_sq, grad_sq


def _u0_on(u0: RecoveredU0, grid: DomainGrid):
    from .fields import sample_domain
    if u0.u0.grid == grid:
        return u0.u0.values
    x = grid.nodes()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    return sample_domain(u0.u0.values, u0.u0.grid, X1, X2)


def carleman_rhs(u_eps: ScalarField, cf: CorrectorFields, eps: float,
                 A: CoefficientField, eta: Cutoff, weight: CarlemanWeight,
                 quad: WeightedQuadrature | None = None) -> float:
    """Weighted square integral of the expanded right-hand side."""
    if quad is None:
        quad = WeightedQuadrature(u_eps.grid)
    R, _, _ = expanded_rhs_field(u_eps, cf, eps, A, eta)
    return quad.integrate(cell_average(R**2), weight.lam, weight.tau, "w")


def rhs_expansion_residual(u_eps: ScalarField, cf: CorrectorFields, eps: float,
                           A: CoefficientField, eta: Cutoff) -> float:
    """Relative L2 gap between the discrete operator applied to the cutoff
    product and the expanded form; drops under grid refinement at fixed eps.
    """
    grid = u_eps.grid
    op = assemble(A, eps, grid)
    x = grid.nodes()
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    Y1, Y2 = X1 / eps, X2 / eps
    prod = u_eps.values * eta.eta.values
    for j in (0, 1):
        prod = prod + eps * cf.sample_chi(j, Y1, Y2) * eta.grad[j].values * u_eps.values
    applied = op.apply(prod)
    R, _, _ = expanded_rhs_field(u_eps, cf, eps, A, eta)
    quad = WeightedQuadrature(grid)
    num = quad.integrate(cell_average((applied + R) ** 2), 1.0, 0.0, "w")
    den = quad.integrate(cell_average(R**2), 1.0, 0.0, "w")
    if den == 0.0:
        return 0.0
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# constant-coefficient inequality and calibration
# ---------------------------------------------------------------------------

def classical_carleman_ratio(v: ScalarField, eta: Cutoff,
                             a_hat: HomogenizedTensor, lam: float, tau: float,
                             quad: WeightedQuadrature | None = None) -> float:
    """Empirical admissible constant for the constant-coefficient weighted
    inequality: RHS/LHS0 with RHS the weighted square of the operator applied
    to the cutoff product and LHS0 the unscaled weighted terms."""
    grid = v.grid
    if quad is None:
        quad = support_quadrature(grid)
    op = assemble_homogenized(a_hat, grid)
    prod = v.values * eta.eta.values
    applied = op.apply(prod)
    zero_cells = cell_average(prod**2)
    grad_cells = quad.cell_gradient_sq(prod)
    lhs0 = (lam**4 * tau**3 * quad.integrate(zero_cells, lam, tau, "w_phi3")
            + lam**2 * tau * quad.integrate(grad_cells, lam, tau, "w_phi"))
    if lhs0 <= 0.0:
        raise errors.DegenerateInputError(
            "cutoff product vanishes; the weighted terms are zero")
    rhs = quad.integrate(cell_average(applied**2), lam, tau, "w")
    return rhs / lhs0


def caccioppoli_constant(u_eps: ScalarField, s1: float, s2: float, s3: float,
                         s4: float, lam: float, tau: float,
                         subsamples: int = 4) -> float:
    """Empirical constant of the weighted interior energy bound on nested
    annuli: gradient mass on the middle annulus over the weighted
    zero-order masses on the enclosing one."""
    if not (0.0 <= s1 < s2 < s3 < s4 <= 3.0):
        raise errors.ConfigurationError("need 0 <= s1 < s2 < s3 < s4 <= 3")
    from .fields import annulus_weighted_integral
    grid = u_eps.grid
    g1, g2 = gradient(u_eps)
    gsq = ScalarField(grid, g1**2 + g2**2)
    usq = ScalarField(grid, u_eps.values**2)
    num = annulus_weighted_integral(gsq, s2, s3, lam, tau, "w", subsamples)
    coef = (1.0 / (s4 - s3) + 1.0 / (s2 - s1)) ** 2
    den = (coef * annulus_weighted_integral(usq, s1, s4, lam, tau, "w", subsamples)
           + lam**2 * tau**2
           * annulus_weighted_integral(usq, s1, s4, lam, tau, "w_x2_phi2", subsamples))
    if den <= 0.0:
        raise errors.DegenerateInputError("zero mass on the outer annulus")
    return num / den


def probe_suite(a_hat: HomogenizedTensor, grid: DomainGrid, eta: Cutoff,
                degrees=(1, 2, 3, 4), lambdas=(1.0, 2.0),
                taus=(5.0, 10.0, 20.0, 40.0)):
    """Constant-coefficient ratios over the harmonic-polynomial probe sweep."""
    from .elliptic import HarmonicPolynomial
    from .fields import field_from_function
    quad = support_quadrature(grid)
    rows = []
    for k in degrees:
        v = field_from_function(grid, HarmonicPolynomial(k))
        for lam in lambdas:
            for tau in taus:
                rows.append((k, lam, tau,
                             classical_carleman_ratio(v, eta, a_hat, lam, tau, quad)))
    return rows


def calibrate_constants(a_hat: HomogenizedTensor, grid: DomainGrid,
                        eta: Cutoff, lambda0: float = 1.0, tau0: float = 5.0,
                        c_range: float | None = None,
                        degrees=(1, 2, 3, 4), lambdas=(1.0, 2.0),
                        taus=(5.0, 10.0, 20.0, 40.0)):
    """Calibrated constants: half the minimum probe ratio, echoed with
    provenance so reports state where every constant came from."""
    rows = probe_suite(a_hat, grid, eta, degrees, lambdas, taus)
    c0 = 0.5 * min(r[3] for r in rows)
    consts = CarlemanConstants(
        c0=c0, lambda0=lambda0, tau0=tau0,
        c_range=(tau0 if c_range is None else c_range),
        provenance="calibrated")
    return consts, rows


# ---------------------------------------------------------------------------
# full sweep of the oscillating inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarlemanSweepRow:
    lam: float
    tau: float
    term_zero: float
    term_grad: float
    combined: float
    rhs: float

    @property
    def margin(self):
        return self.rhs - self.combined

    @property
    def ratio(self):
        if self.rhs == 0.0:
            return math.inf if self.combined > 0 else 0.0
        return self.combined / self.rhs


@dataclass(frozen=True)
class CarlemanSweep:
    rows: tuple
    tau_min: float
    tau_max: float
    norm_ratio: float

    @property
    def max_ratio(self):
        return max(r.ratio for r in self.rows)

    @property
    def flagged(self):
        return tuple(r for r in self.rows if r.ratio > 1.0)


def carleman_check(u_eps: ScalarField, u0: RecoveredU0, cf: CorrectorFields,
                   eps: float, A: CoefficientField,
                   constants: CarlemanConstants, lambda_grid, eta: Cutoff,
                   tau_points: int = 8) -> CarlemanSweep:
    """Evaluate both sides of the oscillating weighted inequality across the
    admissible (lam, tau) range and record margins and ratios."""
    for lam in lambda_grid:
        if lam < constants.lambda0 - 1e-12:
            raise errors.ConfigurationError(
                f"lambda {lam} below the admissible lambda0 = {constants.lambda0}")
    n1 = ball_l2(u_eps, 1.0)
    n3 = ball_l2(u_eps, 3.0)
    if n1 <= 0.0:
        raise errors.DegenerateInputError(
            "oscillating solution vanishes on the unit ball; the admissible "
            "tau range is unbounded")
    ratio = n3 / n1
    tau_lo = constants.tau0
    tau_hi = constants.tau_max(ratio)
    taus = np.exp(np.linspace(math.log(tau_lo), math.log(tau_hi), tau_points))

    grid = u_eps.grid
    quad = support_quadrature(grid)
    zero_cells, grad_cells = lhs_integrands(u_eps, u0, cf, eps, eta, quad)
    R, _, _ = expanded_rhs_field(u_eps, cf, eps, A, eta)
    rhs_cells = cell_average(R**2)

    rows = []
    for lam in lambda_grid:
        for tau in taus:
            t0 = lam**4 * tau**3 * quad.integrate(zero_cells, lam, tau, "w_phi3")
            tg = lam**2 * tau * quad.integrate(grad_cells, lam, tau, "w_phi")
            rhs = quad.integrate(rhs_cells, lam, tau, "w")
            rows.append(CarlemanSweepRow(
                lam=float(lam), tau=float(tau), term_zero=t0, term_grad=tg,
                combined=0.5 * constants.c0 * (t0 + tg), rhs=rhs))
    return CarlemanSweep(rows=tuple(rows), tau_min=tau_lo, tau_max=tau_hi,
                         norm_ratio=ratio)
