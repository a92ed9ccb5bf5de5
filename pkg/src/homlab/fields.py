"""Grids, nodal scalar fields, coefficient families, and quadrature over
discs and annuli, optionally against Gaussian-exponential weights.

Geometry conventions: the periodic unit cell is [0,1)^2 with n nodes per
side (spacing 1/n); the square domain is [-L, L]^2 with (n+1)^2 nodes
(spacing 2L/n).  Axis 0 is the x1 coordinate, axis 1 is x2.  Quadrature is
the cell-midpoint rule with partial-cell weights obtained by subsampling the
disc indicator, so every integral is a plain weighted sum over grid cells.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import errors
from ._kernels import ball_fractions


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the periodic unit cell [0,1)^2, n a power of two."""

    n: int
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise errors.ConfigurationError("only d = 2 is implemented")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise errors.ConfigurationError(
                f"periodic grid needs n >= 8 and a power of two, got n={self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def nodes(self) -> np.ndarray:
        return self.h * np.arange(self.n)


@dataclass(frozen=True)
class DomainGrid:
    """Uniform nodal grid on the square [-L, L]^2 with n cells per side."""

    half_extent: float
    n: int
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise errors.ConfigurationError("only d = 2 is implemented")
        if self.n < 8:
            raise errors.ConfigurationError(f"domain grid needs n >= 8, got n={self.n}")
        if not (self.half_extent > 0):
            raise errors.ConfigurationError("domain half-extent must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.half_extent / self.n

    @property
    def nnodes(self) -> int:
        return self.n + 1

    def nodes(self) -> np.ndarray:
        return -self.half_extent + self.h * np.arange(self.n + 1)


@dataclass(frozen=True)
class ScalarField:
    """Nodal values on a grid; immutable after construction."""

    grid: object
    values: np.ndarray

    def __post_init__(self):
        expect = (self.grid.n, self.grid.n) if isinstance(self.grid, PeriodicGrid) \
            else (self.grid.nnodes, self.grid.nnodes)
        if self.values.shape != expect:
            raise errors.ConfigurationError(
                f"field shape {self.values.shape} does not match grid {expect}")
        if not np.all(np.isfinite(self.values)):
            raise errors.ConfigurationError("field contains non-finite entries")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def field_from_function(grid, fn) -> ScalarField:
    """Sample a vectorized function of (x1, x2) at the grid nodes."""
    x = grid.nodes()
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    return ScalarField(grid, np.asarray(fn(x1, x2), dtype=np.float64))


def constant_field(grid, value) -> ScalarField:
    shape = (grid.n, grid.n) if isinstance(grid, PeriodicGrid) \
        else (grid.nnodes, grid.nnodes)
    return ScalarField(grid, np.full(shape, float(value)))


# ---------------------------------------------------------------------------
# coefficient fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefficientField:
    """1-periodic matrix coefficient with certified bounds.

    ``entries(y1, y2)`` returns the four matrix entries (a11, a12, a21, a22)
    as broadcastable arrays.  ``mu`` certifies the two-sided ellipticity
    bound mu |xi|^2 <= A xi . xi <= |xi|^2 / mu, ``lip`` is an entrywise
    Lipschitz constant.
    """

    name: str
    entries: Callable
    mu: float
    lip: float

    def diag(self, y1, y2):
        a11, _, _, a22 = self.entries(y1, y2)
        return a11, a22


@dataclass(frozen=True)
class GrowthParams:
    """Parameters of the mass-growth bound relating the B3 and B2 masses."""

    M: float
    N1: float = 1.0
    N2: float = 1.0

    def __post_init__(self):
        if not (self.M > 0 and self.N1 >= 1 and self.N2 >= 1):
            raise errors.ConfigurationError(
                "growth parameters need M > 0, N1 >= 1, N2 >= 1")


def builtin_coefficient(name: str) -> CoefficientField:
    """Shipped coefficient families: ``identity``, ``laminate``, ``smooth2d``."""
    if name == "identity":
        def entries(y1, y2):
            one = np.ones(np.broadcast(y1, y2).shape)
            return one, np.zeros_like(one), np.zeros_like(one), one
        return CoefficientField("identity", entries, mu=1.0, lip=0.0)

    if name == "laminate":
        def entries(y1, y2):
            a = 1.0 / (2.0 + np.sin(2.0 * np.pi * np.asarray(y1)))
            a = np.broadcast_to(a, np.broadcast(y1, y2).shape).copy()
            z = np.zeros_like(a)
            return a, z, z, a
        # a ranges over [1/3, 1]; max |da/dt| is attained at sin(2 pi t) = 1 - sqrt(3)
        lip = 2.0 * math.pi * math.sqrt(2.0 * math.sqrt(3.0) - 3.0) / (12.0 - 6.0 * math.sqrt(3.0))
        return CoefficientField("laminate", entries, mu=1.0 / 3.0, lip=lip)

    if name == "smooth2d":
        def entries(y1, y2):
            s = 1.5 + 0.5 * np.sin(2.0 * np.pi * np.asarray(y1)) * np.sin(2.0 * np.pi * np.asarray(y2))
            s = np.broadcast_to(s, np.broadcast(y1, y2).shape).copy()
            z = np.zeros_like(s)
            return s, z, z, s
        return CoefficientField("smooth2d", entries, mu=0.5, lip=math.pi)

    raise errors.ConfigurationError(f"unknown coefficient family {name!r}")


def verify_assumptions(coeff: CoefficientField, samples: int = 10_000,
                       seed: int = 0) -> tuple[float, float]:
    """Sampled check of symmetry, periodicity and two-sided ellipticity.

    Returns (mu_hat, lip_hat): the sampled ellipticity constant (minimum
    eigenvalue over the draw, with the max eigenvalue checked against
    1/mu_hat) and the maximum finite-difference slope of the entries.
    """
    if samples < 10_000:
        raise errors.ConfigurationError("verify_assumptions needs samples >= 1e4")
    rng = np.random.default_rng(seed)
    y1 = rng.random(samples)
    y2 = rng.random(samples)
    a11, a12, a21, a22 = (np.asarray(v, dtype=float) for v in coeff.entries(y1, y2))

    scale = max(np.max(np.abs(a11)), np.max(np.abs(a22)), 1e-30)
    if np.max(np.abs(a12 - a21)) > 1e-12 * scale:
        raise errors.AssumptionViolationError(
            "coefficient matrix is not symmetric: max |a12 - a21| = "
            f"{np.max(np.abs(a12 - a21)):.3e}")

    for shift in ((1.0, 0.0), (0.0, 1.0)):
        b11, b12, _, b22 = coeff.entries(y1 + shift[0], y2 + shift[1])
        err = max(np.max(np.abs(a11 - b11)), np.max(np.abs(a12 - b12)),
                  np.max(np.abs(a22 - b22)))
        if err > 1e-12 * scale:
            raise errors.AssumptionViolationError(
                f"coefficient matrix is not 1-periodic (shift {shift}, err {err:.3e})")

    half_tr = 0.5 * (a11 + a22)
    disc = np.sqrt((0.5 * (a11 - a22)) ** 2 + a12 * a21)
    lam_min = np.min(half_tr - disc)
    lam_max = np.max(half_tr + disc)
    if lam_min <= 0:
        raise errors.AssumptionViolationError(
            f"ellipticity fails: minimum eigenvalue {lam_min:.3e} <= 0")
    # largest mu certifying the two-sided bound on the sample: both
    # mu <= lam_min and lam_max <= 1/mu must hold
    mu_hat = float(min(lam_min, 1.0 / lam_max))

    delta = 1e-4
    theta = rng.random(samples) * 2.0 * math.pi
    z1 = y1 + delta * np.cos(theta)
    z2 = y2 + delta * np.sin(theta)
    b11, b12, b21, b22 = coeff.entries(z1, z2)
    slope = max(np.max(np.abs(a11 - b11)), np.max(np.abs(a12 - b12)),
                np.max(np.abs(a21 - b21)), np.max(np.abs(a22 - b22))) / delta
    return mu_hat, float(slope)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

_FRAC_CACHE: OrderedDict = OrderedDict()
_FRAC_CACHE_MAX = 8
_RADIUS2_CACHE: dict = {}

WEIGHT_POWERS = ("w", "w_phi", "w_phi3", "w_x2_phi2")


def _check_ball(grid: DomainGrid, r: float, center) -> None:
    cx, cy = center
    if max(abs(cx), abs(cy)) + r > grid.half_extent + 1e-12:
        raise errors.GeometryError(
            f"ball of radius {r} at ({cx}, {cy}) exceeds the domain "
            f"[-{grid.half_extent}, {grid.half_extent}]^2")


def cell_fractions(grid: DomainGrid, r: float, subsamples: int = 4,
                   center=(0.0, 0.0)) -> np.ndarray:
    """Covered fraction of each grid cell for the disc B_r(center).

    Fractions are multiples of 1/subsamples^2 and exactly representable, so
    the cache stores float32 without loss.
    """
    if subsamples < 2:
        raise errors.ConfigurationError("quadrature needs subsamples >= 2")
    _check_ball(grid, r, center)
    key = (grid.half_extent, grid.n, float(r), int(subsamples),
           float(center[0]), float(center[1]))
    hit = _FRAC_CACHE.get(key)
    if hit is not None:
        _FRAC_CACHE.move_to_end(key)
        return hit
    frac = ball_fractions(grid.n, grid.n, -grid.half_extent, -grid.half_extent,
                          grid.h, center[0], center[1], r, subsamples)
    frac = np.asarray(frac, dtype=np.float32)
    frac.flags.writeable = False
    _FRAC_CACHE[key] = frac
    while len(_FRAC_CACHE) > _FRAC_CACHE_MAX:
        _FRAC_CACHE.popitem(last=False)
    return frac


def cell_average(values: np.ndarray) -> np.ndarray:
    """Nodal (N, N) values -> cell-centre averages (N-1, N-1)."""
    return 0.25 * (values[:-1, :-1] + values[1:, :-1]
                   + values[:-1, 1:] + values[1:, 1:])


def cell_radius2(grid: DomainGrid) -> np.ndarray:
    """Squared distance of cell centres from the origin (cached per grid)."""
    key = (grid.half_extent, grid.n)
    hit = _RADIUS2_CACHE.get(key)
    if hit is None:
        c = -grid.half_extent + grid.h * (np.arange(grid.n) + 0.5)
        hit = c[:, None] ** 2 + c[None, :] ** 2
        hit.flags.writeable = False
        _RADIUS2_CACHE[key] = hit
        if len(_RADIUS2_CACHE) > 8:
            _RADIUS2_CACHE.pop(next(iter(_RADIUS2_CACHE)))
    return hit


def ball_integral(f: ScalarField, r: float, subsamples: int = 4,
                  center=(0.0, 0.0)) -> float:
    """Integral of f over the disc B_r(center), midpoint rule with
    partial-cell weights.  Deterministic for fixed inputs."""
    grid = f.grid
    if not isinstance(grid, DomainGrid):
        raise errors.ConfigurationError("ball_integral expects a domain-grid field")
    frac = cell_fractions(grid, r, subsamples, center)
    cc = cell_average(f.values)
    return float(np.sum(cc * frac, dtype=np.float64) * grid.h ** 2)


def ball_l2(f: ScalarField, r: float, subsamples: int = 4) -> float:
    """L2 norm of f over B_r (origin-centred)."""
    grid = f.grid
    frac = cell_fractions(grid, r, subsamples)
    cc = cell_average(f.values)
    return math.sqrt(max(float(np.sum(cc * cc * frac, dtype=np.float64) * grid.h ** 2), 0.0))


def weight_values(grid: DomainGrid, lam: float, tau: float, power: str = "w") -> np.ndarray:
    """Cell-centre values of the selected weight.

    phi = exp(-lam |x|^2); the base weight is the normalized
    w = exp(2 tau (phi - 1)) in (0, 1].  The constant factor exp(2 tau) is
    dropped from every weighted quantity uniformly, so ratios between
    weighted integrals are unchanged and nothing overflows; underflow to
    zero far out is harmless.
    """
    if power not in WEIGHT_POWERS:
        raise errors.ConfigurationError(
            f"unknown weight power {power!r}; expected one of {WEIGHT_POWERS}")
    r2 = cell_radius2(grid)
    phi = np.exp(-lam * r2)
    w = np.exp(2.0 * tau * (phi - 1.0))
    if power == "w_phi":
        w = w * phi
    elif power == "w_phi3":
        w = w * phi ** 3
    elif power == "w_x2_phi2":
        w = w * r2 * phi ** 2
    return w


def annulus_weighted_integral(f: ScalarField, r_in: float, r_out: float,
                              lam: float, tau: float, power: str = "w",
                              subsamples: int = 4) -> float:
    """Integral of f times the selected weight over B_{r_out} \\ B_{r_in}."""
    if not (0.0 <= r_in < r_out):
        raise errors.GeometryError(f"need 0 <= r_in < r_out, got ({r_in}, {r_out})")
    if lam <= 0 or tau < 0:
        raise errors.ConfigurationError("weights need lam > 0 and tau >= 0")
    grid = f.grid
    frac = np.asarray(cell_fractions(grid, r_out, subsamples), dtype=np.float64)
    if r_in > 0.0:
        frac = frac - cell_fractions(grid, r_in, subsamples)
    cc = cell_average(f.values)
    w = weight_values(grid, lam, tau, power)
    return float(np.sum(cc * w * frac, dtype=np.float64) * grid.h ** 2)


# ---------------------------------------------------------------------------
# differential / interpolation helpers shared by the higher-level modules
# ---------------------------------------------------------------------------

def gradient(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference gradient; one-sided at the square boundary,
    wrapping on the periodic cell."""
    v = f.values
    if isinstance(f.grid, PeriodicGrid):
        inv2h = 0.5 / f.grid.h
        g1 = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) * inv2h
        g2 = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) * inv2h
        return g1, g2
    h = f.grid.h
    g1 = np.gradient(v, h, axis=0)
    g2 = np.gradient(v, h, axis=1)
    return g1, g2


def sample_periodic(f: ScalarField, x1: np.ndarray, x2: np.ndarray,
                    snap: float = 1e-9) -> np.ndarray:
    """Bilinear interpolation of a periodic-cell field at arbitrary points.

    Fractional indices within ``snap`` of a node are snapped, so aligned
    evaluation points (e.g. h = eps/8 sweeps) reproduce nodal values exactly.
    """
    if not isinstance(f.grid, PeriodicGrid):
        raise errors.ConfigurationError("sample_periodic expects a periodic-cell field")
    n = f.grid.n
    fx = np.mod(np.asarray(x1), 1.0) * n
    fy = np.mod(np.asarray(x2), 1.0) * n
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    tx = fx - ix
    ty = fy - iy
    tx[tx < snap] = 0.0
    tx[tx > 1.0 - snap] = 1.0
    ty[ty < snap] = 0.0
    ty[ty > 1.0 - snap] = 1.0
    ixp = (ix + 1) % n
    iyp = (iy + 1) % n
    ix %= n
    iy %= n
    v = f.values
    return ((1 - tx) * (1 - ty) * v[ix, iy] + tx * (1 - ty) * v[ixp, iy]
            + (1 - tx) * ty * v[ix, iyp] + tx * ty * v[ixp, iyp])


def sample_domain(values: np.ndarray, grid: DomainGrid, x1: np.ndarray,
                  x2: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of nodal domain-grid values; points are clamped
    to the closed square."""
    h, L = grid.h, grid.half_extent
    fx = np.clip((np.asarray(x1) + L) / h, 0.0, grid.n)
    fy = np.clip((np.asarray(x2) + L) / h, 0.0, grid.n)
    ix = np.minimum(np.floor(fx).astype(np.int64), grid.n - 1)
    iy = np.minimum(np.floor(fy).astype(np.int64), grid.n - 1)
    tx = fx - ix
    ty = fy - iy
    return ((1 - tx) * (1 - ty) * values[ix, iy] + tx * (1 - ty) * values[ix + 1, iy]
            + (1 - tx) * ty * values[ix, iy + 1] + tx * ty * values[ix + 1, iy + 1])
