import math

import numpy as np
import pytest

from homlab import cell, errors, fields


class TestIdentity:
    def test_correctors_vanish(self, identity_cell):
        cor, a_hat, _ = identity_cell
        assert cor.residual_norm <= 1e-10
        assert max(np.abs(c.values).max() for c in cor.chi) == 0.0

    def test_tensor_is_identity(self, identity_cell):
        _, a_hat, _ = identity_cell
        np.testing.assert_array_equal(a_hat.a_hat, np.eye(2))

    def test_flux_correctors_vanish(self, identity, identity_cell):
        cor, a_hat, _ = identity_cell
        fc = cell.flux_correctors(identity, cor, a_hat)
        assert max(np.abs(fc.b[i][j].values).max()
                   for i in range(2) for j in range(2)) == 0.0
        assert max(np.abs(fc.F[k][i][j].values).max()
                   for k in range(2) for i in range(2) for j in range(2)) == 0.0


class TestLaminate:
    def test_tensor_oracle(self, laminate_cell):
        # harmonic mean across the layers, arithmetic mean along them
        _, a_hat, _ = laminate_cell
        assert a_hat.a_hat[0, 0] == pytest.approx(0.5, abs=1e-9)
        assert a_hat.a_hat[1, 1] == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-9)
        assert a_hat.a_hat[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert a_hat.asymmetry <= 1e-12

    def test_transverse_corrector_vanishes(self, laminate_cell):
        cor, _, _ = laminate_cell
        assert np.abs(cor.chi[1].values).max() <= 1e-12

    def test_corrector_is_one_dimensional(self, laminate_cell):
        cor, _, _ = laminate_cell
        chi1 = cor.chi[0].values
        assert np.abs(chi1 - chi1[:, :1]).max() <= 1e-12

    def test_corrector_slope_formula(self, laminate, laminate_cell):
        # d1 chi1 on edges equals a_hat_11 / a(edge midpoint) - 1
        cor, a_hat, _ = laminate_cell
        grid = cor.grid
        y = grid.nodes() + 0.5 * grid.h
        a_edge = 1.0 / (2.0 + np.sin(2.0 * np.pi * y))
        d1 = (np.roll(cor.chi[0].values, -1, axis=0) - cor.chi[0].values) / grid.h
        pred = a_hat.a_hat[0, 0] / a_edge - 1.0
        assert np.abs(d1 - pred[:, None]).max() <= 1e-9

    def test_divergence_identity(self, laminate, laminate_cell):
        cor, a_hat, _ = laminate_cell
        fc = cell.flux_correctors(laminate, cor, a_hat, tol=1e-10)
        assert fc.div_defect <= 10 * 1e-10

    def test_antisymmetry_exact(self, laminate, laminate_cell):
        cor, a_hat, _ = laminate_cell
        fc = cell.flux_correctors(laminate, cor, a_hat)
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    np.testing.assert_array_equal(
                        fc.F[k][i][j].values, -fc.F[i][k][j].values)

    def test_mean_zero(self, laminate, laminate_cell):
        cor, a_hat, _ = laminate_cell
        fc = cell.flux_correctors(laminate, cor, a_hat)
        assert max(abs(float(np.mean(c.values))) for c in cor.chi) <= 1e-10
        assert max(abs(float(np.mean(fc.b[i][j].values)))
                   for i in range(2) for j in range(2)) <= 1e-10


@pytest.fixture(scope="module")
def tensors():
    A = fields.builtin_coefficient("smooth2d")
    out = {}
    for n in (64, 128, 256):
        cor = cell.solve_corrector(A, fields.PeriodicGrid(n))
        out[n] = (cor, cell.homogenize(A, cor))
    return out


class TestSmooth2d:
    def test_second_order_tensor_convergence(self, tensors):
        d1 = np.abs(tensors[64][1].a_hat - tensors[128][1].a_hat).max()
        d2 = np.abs(tensors[128][1].a_hat - tensors[256][1].a_hat).max()
        assert 3.0 <= d1 / d2 <= 5.0

    def test_ellipticity_inherited(self, tensors):
        A = fields.builtin_coefficient("smooth2d")
        ev = tensors[256][1].eigenvalues()
        assert ev[0] >= A.mu - 1e-6
        assert ev[1] <= 1.0 / A.mu + 1e-6

    def test_energy_identity(self, tensors):
        # quadratic form of the tensor equals the corrected Dirichlet energy
        A = fields.builtin_coefficient("smooth2d")
        cor, a_hat = tensors[256]
        grid = cor.grid
        ax, ay, _ = cell.edge_coefficients(A, grid)
        h = grid.h
        for j in (0, 1):
            v = cor.chi[j].values
            d1 = (np.roll(v, -1, axis=0) - v) / h + (1.0 if j == 0 else 0.0)
            d2 = (np.roll(v, -1, axis=1) - v) / h + (1.0 if j == 1 else 0.0)
            energy = float(np.mean(ax * d1 * d1) + np.mean(ay * d2 * d2))
            assert energy == pytest.approx(a_hat.a_hat[j, j], rel=1e-8)

    def test_mean_zero_correctors(self, tensors):
        cor, _ = tensors[128]
        assert max(abs(float(np.mean(c.values))) for c in cor.chi) <= 1e-12


def test_tolerance_validation(laminate):
    with pytest.raises(errors.ConfigurationError):
        cell.solve_corrector(laminate, fields.PeriodicGrid(32), tol=1e-3)
