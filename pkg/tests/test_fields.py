import math

import numpy as np
import pytest

from homlab import errors, fields
from homlab.elliptic import HarmonicPolynomial


class TestCoefficientFamilies:
    def test_identity_certificates(self, identity):
        mu_hat, lip_hat = fields.verify_assumptions(identity)
        assert mu_hat == pytest.approx(1.0, abs=1e-12)
        assert lip_hat == pytest.approx(0.0, abs=1e-12)

    def test_laminate_range(self, laminate):
        # a(t) = 1/(2+sin 2 pi t) ranges over [1/3, 1]
        mu_hat, lip_hat = fields.verify_assumptions(laminate, samples=40_000)
        assert laminate.mu == pytest.approx(1.0 / 3.0)
        assert mu_hat == pytest.approx(1.0 / 3.0, abs=2e-3)
        assert lip_hat <= laminate.lip + 1e-6

    def test_smooth2d_eigenvalues(self):
        A = fields.builtin_coefficient("smooth2d")
        mu_hat, lip_hat = fields.verify_assumptions(A)
        assert A.mu == pytest.approx(0.5)
        # eigenvalues sit in [1, 2]; the two-sided constant is 1/2
        assert mu_hat == pytest.approx(0.5, abs=2e-3)
        assert mu_hat >= A.mu - 1e-9
        assert lip_hat <= A.lip + 1e-6

    def test_unknown_name(self):
        with pytest.raises(errors.ConfigurationError):
            fields.builtin_coefficient("granite")

    def test_asymmetric_evaluator_rejected(self):
        def entries(y1, y2):
            one = np.ones(np.broadcast(y1, y2).shape)
            return one, 0.3 * one, 0.1 * one, one
        bad = fields.CoefficientField("bad", entries, mu=0.5, lip=0.0)
        with pytest.raises(errors.AssumptionViolationError, match="symmetric"):
            fields.verify_assumptions(bad)

    def test_nonperiodic_evaluator_rejected(self):
        def entries(y1, y2):
            s = 1.5 + 0.1 * np.asarray(y1)
            s = np.broadcast_to(s, np.broadcast(y1, y2).shape).copy()
            z = np.zeros_like(s)
            return s, z, z, s
        bad = fields.CoefficientField("drift", entries, mu=0.5, lip=0.1)
        with pytest.raises(errors.AssumptionViolationError, match="periodic"):
            fields.verify_assumptions(bad)


class TestBallQuadrature:
    def test_unit_disc_area(self):
        grid = fields.DomainGrid(1.5, 256)
        one = fields.constant_field(grid, 1.0)
        assert fields.ball_integral(one, 1.0, subsamples=4) == pytest.approx(
            math.pi, abs=1e-3)

    def test_zero_field(self):
        grid = fields.DomainGrid(1.5, 64)
        zero = fields.constant_field(grid, 0.0)
        assert fields.ball_integral(zero, 1.0) == 0.0

    def test_degree2_homogeneity(self):
        # squared degree-2 harmonics scale their disc mass like r^6
        grid = fields.DomainGrid(3.0, 1024)
        p = fields.field_from_function(grid, HarmonicPolynomial(2))
        sq = fields.ScalarField(grid, p.values**2)
        ratio = fields.ball_integral(sq, 1.0) / fields.ball_integral(sq, 3.0)
        assert ratio == pytest.approx(3.0**-6, rel=1e-3)

    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_homogeneous_scaling_r1_vs_r2(self, k):
        grid = fields.DomainGrid(2.5, 768)
        p = fields.field_from_function(grid, HarmonicPolynomial(k))
        sq = fields.ScalarField(grid, p.values**2)
        ratio = fields.ball_integral(sq, 2.0) / fields.ball_integral(sq, 1.0)
        assert ratio == pytest.approx(2.0 ** (2 * k + 2), rel=2e-3)

    def test_monotone_in_radius(self):
        grid = fields.DomainGrid(2.0, 256)
        f = fields.field_from_function(grid, lambda x, y: 1.0 + 0.5 * np.cos(x + y))
        vals = [fields.ball_integral(f, r) for r in (0.5, 1.0, 1.5, 2.0)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_ball_outside_domain(self):
        grid = fields.DomainGrid(1.0, 64)
        one = fields.constant_field(grid, 1.0)
        with pytest.raises(errors.GeometryError):
            fields.ball_integral(one, 1.5)

    def test_refinement_consistency(self):
        grid = fields.DomainGrid(1.5, 128)
        f = fields.field_from_function(grid, lambda x, y: np.exp(-x * x - y * y))
        vals = {m: fields.ball_integral(f, 1.2, subsamples=m) for m in (2, 4, 8)}
        assert abs(vals[8] - vals[4]) <= abs(vals[4] - vals[2]) + 1e-12


class TestWeightedAnnulus:
    def test_tau_zero_is_plain_area(self):
        grid = fields.DomainGrid(2.5, 384)
        one = fields.constant_field(grid, 1.0)
        got = fields.annulus_weighted_integral(one, 1.0, 2.0, lam=1.0, tau=0.0)
        assert got == pytest.approx(math.pi * 3.0, abs=2e-3)

    def test_radial_oracle(self):
        # 2 pi int_1^2 r exp(2(exp(-r^2)-1)) dr, adaptive 1-D quadrature
        grid = fields.DomainGrid(2.5, 512)
        one = fields.constant_field(grid, 1.0)
        got = fields.annulus_weighted_integral(one, 1.0, 2.0, lam=1.0, tau=1.0)
        assert got == pytest.approx(1.641024140867915, rel=1e-3)

    def test_large_lambda_kills_annulus(self):
        grid = fields.DomainGrid(2.5, 256)
        one = fields.constant_field(grid, 1.0)
        small = fields.annulus_weighted_integral(one, 1.0, 2.0, lam=200.0, tau=3.0)
        assert small < math.pi * 3.0 * math.exp(-5.9)

    def test_weight_powers_recognized(self):
        grid = fields.DomainGrid(2.5, 64)
        one = fields.constant_field(grid, 1.0)
        with pytest.raises(errors.ConfigurationError):
            fields.annulus_weighted_integral(one, 1.0, 2.0, 1.0, 1.0, power="w_phi7")


class TestGridsAndFields:
    def test_periodic_grid_validation(self):
        with pytest.raises(errors.ConfigurationError):
            fields.PeriodicGrid(100)  # not a power of two
        with pytest.raises(errors.ConfigurationError):
            fields.PeriodicGrid(4)

    def test_field_shape_mismatch(self):
        grid = fields.DomainGrid(1.0, 16)
        with pytest.raises(errors.ConfigurationError):
            fields.ScalarField(grid, np.zeros((16, 16)))

    def test_nonfinite_rejected(self):
        grid = fields.DomainGrid(1.0, 16)
        vals = np.zeros((17, 17))
        vals[3, 3] = np.nan
        with pytest.raises(errors.ConfigurationError):
            fields.ScalarField(grid, vals)

    def test_periodic_sampling_hits_nodes(self):
        grid = fields.PeriodicGrid(32)
        f = fields.field_from_function(grid, lambda x, y: np.sin(2 * np.pi * x) + y)
        x = grid.nodes()
        got = fields.sample_periodic(f, x[:, None] + 3.0, x[None, :] - 2.0)
        np.testing.assert_allclose(got, f.values, atol=1e-12)

    def test_gradient_linear_exact(self):
        grid = fields.DomainGrid(2.0, 64)
        f = fields.field_from_function(grid, lambda x, y: 2.0 * x - 0.5 * y)
        g1, g2 = fields.gradient(f)
        np.testing.assert_allclose(g1, 2.0, atol=1e-12)
        np.testing.assert_allclose(g2, -0.5, atol=1e-12)
