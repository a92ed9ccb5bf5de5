import numpy as np
import pytest

from homlab import cell, elliptic, fields, twoscale


@pytest.fixture(scope="session")
def laminate():
    return fields.builtin_coefficient("laminate")


@pytest.fixture(scope="session")
def identity():
    return fields.builtin_coefficient("identity")


@pytest.fixture(scope="session")
def laminate_cell(laminate):
    cor = cell.solve_corrector(laminate, fields.PeriodicGrid(256))
    a_hat = cell.homogenize(laminate, cor)
    cf = cell.corrector_fields(laminate, cor)
    return cor, a_hat, cf


@pytest.fixture(scope="session")
def identity_cell(identity):
    cor = cell.solve_corrector(identity, fields.PeriodicGrid(64))
    a_hat = cell.homogenize(identity, cor)
    cf = cell.corrector_fields(identity, cor)
    return cor, a_hat, cf


@pytest.fixture(scope="session")
def fourier_data():
    return elliptic.FourierBoundaryData(3.0, modes=6, decay=2.0, seed=7)


@pytest.fixture(scope="session")
def laminate_solution(laminate, fourier_data):
    """Oscillating solution at eps = 1/8 on its resolving grid (n = 384)."""
    grid = twoscale.grid_for(1.0 / 8.0)
    u = twoscale.oscillating_solution(laminate, 1.0 / 8.0, grid, fourier_data)
    return u


@pytest.fixture(scope="session")
def identity_solution(identity, fourier_data):
    grid = fields.DomainGrid(3.0, 384)
    op = elliptic.assemble(identity, 1.0, grid)
    return elliptic.solve_dirichlet(op, fourier_data, tol=1e-10)
