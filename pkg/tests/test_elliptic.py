import numpy as np
import pytest

from homlab import cell, elliptic, errors, fields


@pytest.fixture(scope="module")
def unit_grid():
    return fields.DomainGrid(1.0, 64)


@pytest.fixture(scope="module")
def identity_op(identity, unit_grid):
    return elliptic.assemble(identity, 1.0, unit_grid)


class TestAssemble:
    def test_laplacian_on_quadratics(self, identity_op, unit_grid):
        # the 5-point stencil is exact on polynomials of degree <= 2
        f = fields.field_from_function(unit_grid, lambda x, y: x * x)
        out = identity_op.apply(f.values)
        np.testing.assert_allclose(out[1:-1, 1:-1], -2.0, atol=1e-10)

    def test_constants_in_kernel(self, identity_op, unit_grid):
        out = identity_op.apply(np.full((65, 65), 3.7))
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_resolution_rule_is_hard(self, laminate):
        grid = fields.DomainGrid(3.2, 512)
        # h = 0.0125 resolves eps = 1/8 (needs <= 1/64) ...
        elliptic.assemble(laminate, 1.0 / 8.0, grid)
        # ... but not eps = 1/16, and the message names the required n
        with pytest.raises(errors.ResolutionError, match="need n >= 820"):
            elliptic.assemble(laminate, 1.0 / 16.0, grid)

    def test_eps_range(self, laminate):
        grid = fields.DomainGrid(1.0, 64)
        with pytest.raises(errors.ConfigurationError):
            elliptic.assemble(laminate, 1.5, grid)


class TestHomogenizedOperator:
    def test_anisotropic_on_quadratic(self, unit_grid):
        a_hat = cell.HomogenizedTensor(np.diag([0.5, 1.0 / np.sqrt(3.0)]), 0.0)
        op = elliptic.assemble_homogenized(a_hat, unit_grid)
        f = fields.field_from_function(unit_grid, lambda x, y: x * x)
        np.testing.assert_allclose(op.apply(f.values)[1:-1, 1:-1], -1.0, atol=1e-10)

    def test_cross_term_on_bilinear(self, unit_grid):
        a_hat = cell.HomogenizedTensor(np.array([[1.0, 0.1], [0.1, 1.0]]), 0.0)
        op = elliptic.assemble_homogenized(a_hat, unit_grid)
        f = fields.field_from_function(unit_grid, lambda x, y: x * y)
        np.testing.assert_allclose(op.apply(f.values)[1:-1, 1:-1], -0.2, atol=1e-10)

    def test_cross_term_circle_unsupported(self, unit_grid):
        a_hat = cell.HomogenizedTensor(np.array([[1.0, 0.1], [0.1, 1.0]]), 0.0)
        with pytest.raises(errors.ConfigurationError, match="diagonal"):
            elliptic.assemble_homogenized(a_hat, unit_grid, boundary=0.8)

    def test_self_adjoint_interior(self, unit_grid):
        a_hat = cell.HomogenizedTensor(np.array([[1.3, 0.2], [0.2, 0.8]]), 0.0)
        op = elliptic.assemble_homogenized(a_hat, unit_grid)
        rng = np.random.default_rng(5)
        u = np.zeros((65, 65))
        v = np.zeros((65, 65))
        u[4:-4, 4:-4] = rng.standard_normal((57, 57))
        v[4:-4, 4:-4] = rng.standard_normal((57, 57))
        lhs = float(np.sum(op.apply(u) * v))
        rhs = float(np.sum(u * op.apply(v)))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


class TestSolveDirichlet:
    def test_linear_data_exact(self, identity_op, unit_grid):
        u = elliptic.solve_dirichlet(identity_op, lambda x, y: x, tol=1e-10)
        ex = fields.field_from_function(unit_grid, lambda x, y: x)
        assert np.abs(u.values - ex.values).max() <= 1e-9

    def test_harmonic_quadratic(self, identity_op, unit_grid):
        g = elliptic.HarmonicPolynomial(2)
        u = elliptic.solve_dirichlet(identity_op, g, tol=1e-10)
        ex = fields.field_from_function(unit_grid, g)
        assert np.abs(u.values - ex.values).max() <= 1e-9

    def test_grid_convergence_order_two(self, identity):
        # centered second differences are exact through cubics, so the
        # lowest degree with a genuine truncation error is four
        g = elliptic.HarmonicPolynomial(4)
        errs = []
        for n in (32, 64, 128):
            grid = fields.DomainGrid(1.0, n)
            op = elliptic.assemble(identity, 1.0, grid)
            u = elliptic.solve_dirichlet(op, g, tol=1e-10)
            ex = fields.field_from_function(grid, g)
            errs.append(np.abs(u.values - ex.values).max())
        assert 3.0 <= errs[0] / errs[1] <= 5.0
        assert 3.0 <= errs[1] / errs[2] <= 5.0

    def test_maximum_principle(self, identity_op, unit_grid):
        g = elliptic.FourierBoundaryData(1.0, modes=5, decay=1.0, seed=11,
                                         offset=0.0)
        u = elliptic.solve_dirichlet(identity_op, g, tol=1e-10)
        ring = np.concatenate([u.values[0, :], u.values[-1, :],
                               u.values[:, 0], u.values[:, -1]])
        assert u.values.max() <= ring.max() + 1e-9
        assert u.values.min() >= ring.min() - 1e-9

    def test_residual_contract(self, laminate, fourier_data):
        grid = fields.DomainGrid(3.0, 384)
        op = elliptic.assemble(laminate, 1.0 / 8.0, grid)
        u = elliptic.solve_dirichlet(op, fourier_data, tol=1e-10)
        b, _ = op.rhs(fourier_data)
        res = b - op.apply(u.values * op.unknown_mask)
        assert np.linalg.norm(res) <= 1e-10 * np.linalg.norm(b) * 10

    def test_tol_validation(self, identity_op):
        with pytest.raises(errors.ConfigurationError):
            elliptic.solve_dirichlet(identity_op, lambda x, y: x, tol=1e-6)


class TestEmbeddedDisc:
    @pytest.mark.parametrize("k", [3, 4])
    def test_harmonic_accuracy(self, k):
        a_hat = cell.HomogenizedTensor(np.eye(2), 0.0)
        g = elliptic.HarmonicPolynomial(k)
        errs = []
        for n in (64, 128):
            grid = fields.DomainGrid(1.0, n)
            op = elliptic.assemble_homogenized(a_hat, grid, boundary=0.8)
            u = elliptic.solve_dirichlet(op, g, tol=1e-10)
            ex = fields.field_from_function(grid, g)
            errs.append(np.abs((u.values - ex.values)[op.unknown_mask]).max())
        # one-sided boundary corrections with exact distances: order >= 1.5
        assert errs[0] / errs[1] >= 2.0 ** 1.5

    def test_anisotropic_polynomial(self):
        # u = x^2 / a11 - y^2 / a22 is in the kernel of the anisotropic op
        a_hat = cell.HomogenizedTensor(np.diag([0.5, 2.0]), 0.0)
        grid = fields.DomainGrid(1.0, 96)
        op = elliptic.assemble_homogenized(a_hat, grid, boundary=0.85)
        g = lambda x, y: 2.0 * x * x - 0.5 * y * y
        u = elliptic.solve_dirichlet(op, g, tol=1e-10)
        ex = fields.field_from_function(grid, g)
        err = np.abs((u.values - ex.values)[op.unknown_mask]).max()
        assert err <= 5e-4


class TestBoundaryData:
    def test_harmonic_polynomial_values(self):
        h0 = elliptic.HarmonicPolynomial(0)
        h1 = elliptic.HarmonicPolynomial(1)
        h2 = elliptic.HarmonicPolynomial(2)
        x = np.array([0.3, -1.2])
        y = np.array([0.4, 0.5])
        np.testing.assert_allclose(h0(x, y), 1.0)
        np.testing.assert_allclose(h1(x, y), x)
        np.testing.assert_allclose(h2(x, y), x * x - y * y)

    def test_fourier_reproducible(self):
        a = elliptic.FourierBoundaryData(3.0, seed=9)
        b = elliptic.FourierBoundaryData(3.0, seed=9)
        x = np.full(7, 3.0)
        y = np.linspace(-3, 3, 7)
        np.testing.assert_array_equal(a(x, y), b(x, y))

    def test_fourier_continuous_at_corner(self):
        g = elliptic.FourierBoundaryData(3.0, seed=9)
        eps = 1e-9
        below = g(np.array([3.0]), np.array([-3.0 + eps]))[0]
        beside = g(np.array([3.0 - eps]), np.array([-3.0]))[0]
        assert abs(below - beside) < 1e-6

    def test_bump_concentrates(self):
        g = elliptic.BumpBoundaryData(3.0, center=0.125, width=0.03)
        # center of the bottom edge vs the opposite side
        lo = g(np.array([0.0]), np.array([-3.0]))[0]
        hi = g(np.array([0.0]), np.array([3.0]))[0]
        assert lo > 0.5 and hi < 1e-8
