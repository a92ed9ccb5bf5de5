"""Quantitative unique-continuation diagnostics: three-ball constants and
exponents, the tau-balancing bound, growth and doubling checks, multiscale
three-ball ratios, and the harmonic-polynomial study showing why the growth
hypothesis cannot be dropped.

Conventions: plain integrals for the growth bound and the three-ball
constants, mean-normalized (area-averaged) integrals for doubling ratios;
the growth bound is evaluated literally on un-normalized masses, so its
verdict depends on the solution's normalization (callers are warned in the
docstring of ``growth_check``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .elliptic import HarmonicPolynomial
from .fields import (DomainGrid, GrowthParams, ScalarField, ball_integral,
                     ball_l2, field_from_function)


@dataclass(frozen=True)
class ThreeBallExponent:
    """Interpolation exponent of the three-ball bound at a given weight
    sharpness lam."""

    lam: float
    alpha: float
    beta: float
    s: float


def three_ball_exponents(lam: float) -> ThreeBallExponent:
    """alpha = 1 - 2 e^{-4 lam}, beta = 2(e^{-4 lam} - e^{-81 lam/16}),
    s = alpha/(alpha+beta).  beta > 0 for every lam > 0 since 4 < 81/16;
    alpha > 0 needs lam > ln(2)/4, and the bounds are only used from the
    admissible lambda range upward, so smaller lam is rejected."""
    if lam <= math.log(2.0) / 4.0:
        raise errors.ConfigurationError(
            f"three-ball exponents need lam > ln(2)/4 ~ 0.1733, got {lam}")
    alpha = 1.0 - 2.0 * math.exp(-4.0 * lam)
    beta = 2.0 * (math.exp(-4.0 * lam) - math.exp(-81.0 / 16.0 * lam))
    return ThreeBallExponent(lam=lam, alpha=alpha, beta=beta,
                             s=alpha / (alpha + beta))


def three_ball_constant(u: ScalarField, s: float, radii=(1.0, 2.0, 3.0),
                        subsamples: int = 4) -> float:
    """Empirical constant |u|_{B_r2} / (|u|_{B_r1}^s |u|_{B_r3}^{1-s})."""
    r1, r2, r3 = radii
    n1 = ball_l2(u, r1, subsamples)
    n2 = ball_l2(u, r2, subsamples)
    n3 = ball_l2(u, r3, subsamples)
    if n1 <= 0.0:
        raise errors.DegenerateInputError("inner-ball norm vanishes")
    return n2 / (n1**s * n3**(1.0 - s))


@dataclass(frozen=True)
class TauBound:
    tau_tilde: float
    branch: str      # "balanced" | "small"
    bound: float     # bound on Q implied by the branch


def optimal_tau_bound(P: float, Q: float, R: float, alpha: float, beta: float,
                      tau0: float) -> TauBound:
    """Balance e^{alpha tau} P against e^{-beta tau} R.

    tau_tilde = ln(R/P)/(alpha+beta).  On the balanced branch both terms
    equal P^{1-s} R^s with s = alpha/(alpha+beta), so the bound on Q is
    2 P^{1-s} R^s; below tau0 the bound degrades by the factor e^{alpha tau0}.
    """
    if min(P, Q, R) <= 0.0:
        raise errors.DegenerateInputError("tau balancing needs positive masses")
    s = alpha / (alpha + beta)
    tau_tilde = math.log(R / P) / (alpha + beta)
    if tau_tilde >= tau0:
        return TauBound(tau_tilde=tau_tilde, branch="balanced",
                        bound=2.0 * P**(1.0 - s) * R**s)
    return TauBound(tau_tilde=tau_tilde, branch="small",
                    bound=math.exp(alpha * tau0) * P**(1.0 - s) * R**s)


@dataclass(frozen=True)
class GrowthResult:
    holds: bool
    margin: float    # RHS / LHS, inf when u vanishes
    lhs: float
    rhs: float


def growth_check(u: ScalarField, params: GrowthParams,
                 subsamples: int = 4) -> GrowthResult:
    """Literal evaluation of the mass-growth bound: the B3 mass against
    M max{(B2 mass)^N1, (B2 mass)^{1/N2}}.

    The max-of-powers form is not scale invariant; the verdict depends on
    the normalization of u.
    """
    lhs = ball_integral(ScalarField(u.grid, u.values**2), 3.0, subsamples)
    m2 = ball_integral(ScalarField(u.grid, u.values**2), 2.0, subsamples)
    rhs = params.M * max(m2**params.N1, m2**(1.0 / params.N2))
    if lhs <= 0.0:
        return GrowthResult(holds=True, margin=math.inf, lhs=lhs, rhs=rhs)
    return GrowthResult(holds=lhs <= rhs, margin=rhs / lhs, lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class DoublingReport:
    radii: tuple
    ratios: tuple            # mean-normalized N(r) per radius
    macroscopic_radii: tuple  # (outer, inner) pair actually used
    macroscopic_ratio: float
    macroscopic_holds: bool


def doubling_report(u: ScalarField, radii, mu: float, M: float,
                    subsamples: int = 4) -> DoublingReport:
    """Mean-normalized doubling ratios N(r) and the macroscopic check.

    N(r) is the area-averaged mass on B_r over the one on B_{r/2}.  The
    macroscopic form compares the largest available concentric pair shaped
    like (4, 2 sqrt(mu)), scaled down proportionally if the domain cannot
    host B_4.
    """
    usq = ScalarField(u.grid, u.values**2)

    def mean_mass(r):
        v = ball_integral(usq, r, subsamples) / (math.pi * r * r)
        return v

    ratios = []
    for r in radii:
        inner = mean_mass(r / 2.0)
        if inner <= 0.0:
            raise errors.DegenerateInputError(f"mass on B_{r / 2} vanishes")
        ratios.append(mean_mass(r) / inner)

    r_out = min(4.0, u.grid.half_extent)
    r_in = r_out * (2.0 * math.sqrt(mu)) / 4.0
    inner = mean_mass(r_in)
    if inner <= 0.0:
        raise errors.DegenerateInputError(f"mass on B_{r_in} vanishes")
    macro = mean_mass(r_out) / inner
    return DoublingReport(radii=tuple(radii), ratios=tuple(ratios),
                          macroscopic_radii=(r_out, r_in),
                          macroscopic_ratio=macro,
                          macroscopic_holds=macro <= M)


def multiscale_three_ball(u: ScalarField, s: float, r_list,
                          subsamples: int = 4) -> dict:
    """Three-ball constants on concentric triples (r, 2r, 4r); no
    re-solving is involved, the rescaling is an analysis device only."""
    out = {}
    for r in r_list:
        if 4.0 * r > u.grid.half_extent + 1e-12:
            raise errors.GeometryError(f"B_{4 * r} exceeds the domain")
        out[float(r)] = three_ball_constant(u, s, radii=(r, 2.0 * r, 4.0 * r),
                                            subsamples=subsamples)
    return out


@dataclass(frozen=True)
class CounterexampleRow:
    degree: int
    ratio_quadrature: float   # B1 mass over B3 mass
    ratio_exact: float        # 3^-(2k+2), the homogeneity value
    growth_holds: bool
    growth_margin: float


def counterexample_study(k_list, grid: DomainGrid, params: GrowthParams,
                         subsamples: int = 4):
    """Harmonic polynomials of increasing degree, normalized to unit B3
    mass: their inner-ball mass decays like 3^-(2k+2) (d = 2 homogeneity),
    and the growth bound fails from some finite degree onward.

    Returns (rows, k_star) with k_star the first failing degree (None if
    all pass).
    """
    rows = []
    k_star = None
    for k in sorted(int(k) for k in k_list):
        u = field_from_function(grid, HarmonicPolynomial(k))
        usq = ScalarField(grid, u.values**2)
        m1 = ball_integral(usq, 1.0, subsamples)
        m3 = ball_integral(usq, 3.0, subsamples)
        # normalize to unit mass on B3 before the growth check
        un = ScalarField(grid, u.values / math.sqrt(m3))
        gr = growth_check(un, params, subsamples)
        rows.append(CounterexampleRow(
            degree=k, ratio_quadrature=m1 / m3,
            ratio_exact=3.0 ** (-(2 * k + 2)),
            growth_holds=gr.holds, growth_margin=gr.margin))
        if not gr.holds and k_star is None:
            k_star = k
    return rows, k_star
