"""Compiled and pure kernel backends must agree bitwise on the same inputs."""

import numpy as np
import pytest

from homlab import _kernels
from homlab._kernels import pure

rng = np.random.default_rng(42)


@pytest.mark.skipif(_kernels.BACKEND != "compiled",
                    reason="compiled extension unavailable")
class TestBackendAgreement:
    def test_flux_apply_periodic(self):
        n = 64
        u = rng.standard_normal((n, n))
        ax = 1.0 + 0.4 * rng.random((n, n))
        ay = 1.0 + 0.4 * rng.random((n, n))
        a = np.asarray(_kernels.flux_apply_periodic(u, ax, ay, n * n * 1.0))
        b = pure.flux_apply_periodic(u, ax, ay, n * n * 1.0)
        np.testing.assert_array_equal(a, b)

    def test_flux_apply_box(self):
        N = 41
        u = rng.standard_normal((N, N))
        ax = 1.0 + rng.random((N - 1, N))
        ay = 1.0 + rng.random((N, N - 1))
        a = np.asarray(_kernels.flux_apply_box(u, ax, ay, 100.0))
        b = pure.flux_apply_box(u, ax, ay, 100.0)
        np.testing.assert_array_equal(a, b)
        assert np.all(a[0, :] == 0) and np.all(a[:, -1] == 0)

    def test_stencil5(self):
        N = 33
        u = rng.standard_normal((N, N))
        cs = [rng.standard_normal((N, N)) for _ in range(5)]
        for c in cs[1:]:
            c[0, :] = c[-1, :] = c[:, 0] = c[:, -1] = 0.0
        a = np.asarray(_kernels.stencil5_apply(u, *cs))
        b = pure.stencil5_apply(u, *cs)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("r,m", [(1.0, 4), (2.3, 8), (0.37, 2)])
    def test_ball_fractions(self, r, m):
        a = np.asarray(_kernels.ball_fractions(96, 96, -3.0, -3.0, 6.0 / 96,
                                               0.1, -0.2, r, m))
        b = pure.ball_fractions(96, 96, -3.0, -3.0, 6.0 / 96, 0.1, -0.2, r, m)
        np.testing.assert_array_equal(a, b)
        assert a.min() >= 0.0 and a.max() <= 1.0


def test_fraction_area_converges():
    n, L = 256, 1.5
    f = pure.ball_fractions(n, n, -L, -L, 2 * L / n, 0.0, 0.0, 1.0, 8)
    area = f.sum() * (2 * L / n) ** 2
    assert abs(area - np.pi) < 5e-4
