import math

import numpy as np
import pytest

from homlab import cell, errors, fields, twoscale


@pytest.fixture(scope="module")
def laminate_recovery(laminate_solution, laminate_cell):
    _, a_hat, _ = laminate_cell
    return twoscale.recover_u0(laminate_solution, a_hat)


class TestRecoverU0:
    def test_identity_recovery_near_exact(self, identity_solution, identity_cell):
        # same operator on both sides: only interpolation and the embedded
        # boundary scheme separate u0 from the oscillating field
        _, a_hat, _ = identity_cell
        rec = twoscale.recover_u0(identity_solution, a_hat, resolution_cap=384)
        rel = twoscale.l2_recovery_error(identity_solution, rec) \
            / fields.ball_l2(identity_solution, 3.0)
        assert rel <= 1e-4

    def test_radius_in_band(self, laminate_recovery):
        assert twoscale.RING_BAND[0] <= laminate_recovery.r0 <= twoscale.RING_BAND[1]

    def test_ring_energy_is_minimal(self, laminate_recovery):
        energies = laminate_recovery.candidate_energies
        assert laminate_recovery.ring_energy == min(energies)
        assert laminate_recovery.ring_energy <= float(np.mean(energies))

    def test_zero_field_recovers_zero(self, identity_cell):
        _, a_hat, _ = identity_cell
        grid = fields.DomainGrid(3.0, 128)
        rec = twoscale.recover_u0(fields.constant_field(grid, 0.0), a_hat)
        assert rec.r0 == twoscale.RING_BAND[0]  # tie-break: first candidate
        assert np.all(rec.u0.values == 0.0)

    def test_domain_too_small(self, identity_cell):
        _, a_hat, _ = identity_cell
        grid = fields.DomainGrid(2.0, 64)
        with pytest.raises(errors.GeometryError):
            twoscale.recover_u0(fields.constant_field(grid, 1.0), a_hat)

    def test_residual_contract(self, laminate_recovery, laminate_cell):
        from homlab.elliptic import assemble_homogenized
        _, a_hat, _ = laminate_cell
        u0 = laminate_recovery.u0
        op = assemble_homogenized(a_hat, u0.grid, boundary=laminate_recovery.r0)
        interior = op.apply(u0.values * op.unknown_mask)
        # interior rows vanish for the solved disc problem
        inner = np.hypot(*np.meshgrid(u0.grid.nodes(), u0.grid.nodes(),
                                      indexing="ij")) < laminate_recovery.r0 - 2 * u0.grid.h
        assert np.abs(interior[inner]).max() <= 1e-6


class TestExpansion:
    def test_zero_corrector_is_identity(self, laminate_recovery, identity_cell):
        cor, _, _ = identity_cell
        out = twoscale.expansion(laminate_recovery.u0, cor, 0.125)
        np.testing.assert_array_equal(out.values, laminate_recovery.u0.values)

    def test_small_eps_sup_bound(self, laminate_recovery, laminate_cell):
        cor, _, _ = laminate_cell
        u0 = laminate_recovery.u0
        chi_inf = max(np.abs(c.values).max() for c in cor.chi)
        g1, g2 = fields.gradient(u0)
        grad_inf = float(np.max(np.hypot(g1, g2)))
        for eps in (1e-2, 1e-3):
            out = twoscale.expansion(u0, cor, eps)
            dev = np.abs(out.values - u0.values).max()
            assert dev <= 2.0 * eps * chi_inf * grad_inf

    def test_laminate_flux_nearly_constant(self, laminate, laminate_cell):
        # for u0 = x1 the corrected slope carries a constant flux
        cor, a_hat, _ = laminate_cell
        eps = 1.0 / 8.0
        grid = fields.DomainGrid(3.0, 768)  # 16 cells per period
        u0 = fields.field_from_function(grid, lambda x, y: x)
        e = twoscale.expansion(u0, cor, eps, grid=grid)
        h = grid.h
        x_edge = grid.nodes()[:-1] + 0.5 * h
        a_edge = 1.0 / (2.0 + np.sin(2.0 * np.pi * x_edge / eps))
        d1 = (e.values[1:, :] - e.values[:-1, :]) / h
        flux = a_edge[:, None] * d1
        dev = np.abs(flux - a_hat.a_hat[0, 0]) / a_hat.a_hat[0, 0]
        assert np.median(dev) <= 0.02


class TestConvergenceRows:
    def test_two_rows_decrease(self, laminate, laminate_cell, fourier_data,
                               laminate_solution):
        _, a_hat, cf = laminate_cell
        r1 = twoscale.convergence_row(laminate, a_hat, cf, fourier_data,
                                      1.0 / 8.0, u_eps=laminate_solution)
        r2 = twoscale.convergence_row(laminate, a_hat, cf, fourier_data, 1.0 / 16.0)
        assert r2.l2_err < r1.l2_err
        assert r2.h1_err < r1.h1_err
        assert 1.5 <= r1.l2_err / r2.l2_err <= 2.6  # close to a first-order rate

    def test_expansion_consistency_chi_zero(self, laminate_solution,
                                            laminate_cell, identity_cell):
        # with a vanishing corrector the two-scale error is the plain one
        _, a_hat, _ = laminate_cell
        _, _, cf0 = identity_cell
        rec = twoscale.recover_u0(laminate_solution, a_hat)
        h1 = twoscale.h1_twoscale_error(laminate_solution, rec, cf0, 0.125)
        u0f = twoscale.expansion(rec.u0, cf0.corrector, 0.125,
                                 grid=laminate_solution.grid)
        g1, g2 = fields.gradient(fields.ScalarField(
            laminate_solution.grid, laminate_solution.values - u0f.values))
        direct = math.sqrt(fields.ball_integral(
            fields.ScalarField(laminate_solution.grid, g1**2 + g2**2), 2.5))
        assert h1 == pytest.approx(direct, rel=1e-10)

    def test_slope_fit_on_synthetic_rows(self):
        eps = [1 / 8, 1 / 16, 1 / 32]
        assert twoscale.fit_slope(eps, [e**0.75 for e in eps]) == pytest.approx(0.75)
