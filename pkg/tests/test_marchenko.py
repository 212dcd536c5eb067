import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from edscat.direct import scattering_coefficients
from edscat.errors import ConditioningError, ValidationError
from edscat.gauge import compute_gauge, to_uv
from edscat.marchenko import (SeparableSolver, build_kernel, fourier_synthesis, nyquist_check,
                              nystrom_solve, recover_potentials, separable_solution,
                              separable_solve, solve_all)
from edscat.model import SpatialGrid, SpectralGrid, build_triplets

from conftest import GAUSS_SPECTRAL, INVERSION_GRID

TOL_KERNEL = 1e-8
TOL_SEPARABLE = 1e-8
TOL_HYBRID = 1e-6
TOL_ROUNDTRIP = 1e-3
TOL_DIAGONAL = 1e-6

HALF = SpatialGrid(0.0, 16.0, 401)
TWO_STATES = build_triplets([(0.5j, 1.0)], [(-0.5j, -0.5)])


@pytest.fixture(scope="module")
def gauss_uv_data(gauss):
    uv = to_uv(gauss, compute_gauge(gauss))
    return uv, scattering_coefficients(uv, GAUSS_SPECTRAL)


def test_zero_kernel():
    k = build_kernel(None, None, None, None, SpatialGrid(-2, 2, 21))
    assert not np.any(k.omega) and not np.any(k.omega_bar)
    sol = solve_all(k)
    for name in ("K1", "K1bar", "K2", "K2bar"):
        assert not np.any(getattr(sol, name))


def test_one_state_kernel():
    k = build_kernel(None, None, None, build_triplets([(1j, 2.0)]), SpatialGrid(0, 2, 11))
    np.testing.assert_allclose(k.omega, 2 * np.exp(-k.y), rtol=1e-15)
    assert not np.any(k.omega_bar)


def test_fourier_synthesis_at_origin():
    # R = exp(-lam^2): Omega(0) = 1/(2 sqrt(pi))
    lam = np.linspace(-12, 12, 2401)
    got = fourier_synthesis(np.exp(-lam ** 2), lam, np.array([0.0, 1.0]))
    want = [quad(lambda s: np.exp(-s ** 2) * np.cos(s * y), -np.inf, np.inf)[0] / (2 * np.pi)
            for y in (0.0, 1.0)]
    assert abs(got[0] - 1 / (2 * np.sqrt(np.pi))) < TOL_KERNEL
    np.testing.assert_allclose(got, want, atol=TOL_KERNEL)


def test_nyquist():
    assert nyquist_check(np.linspace(-1, 1, 21), 10.0) == pytest.approx(0.1)
    with pytest.raises(ValidationError) as exc:
        nyquist_check(np.linspace(-1, 1, 3), 10.0)
    assert exc.value.violations == ["spectral.nyquist"]


def test_undecayed_kernel_rejected(gauss_uv_data):
    _, d = gauss_uv_data
    with pytest.raises(ValidationError) as exc:
        build_kernel(d.R, d.Rbar, d.grid, None, SpatialGrid(-1, 1, 21))
    assert any(v.endswith(".decay") for v in exc.value.violations)


def test_singular_reflection_rejected():
    lam = np.array([-1.0, 0.0, 1.0])
    with pytest.raises(ValidationError):
        build_kernel(np.array([0, np.nan, 0]), None, SpectralGrid(lam), None, SpatialGrid(0, 1, 3))


def test_one_sided_closed_form():
    # Omegabar = 0: K2bar = -2 exp(-(x+y)), v = 4 exp(-2x), u = 0
    grid = SpatialGrid(-1, 3, 41)
    trip = build_triplets([(1j, 2.0)])
    for mode in ("exact", "quadrature"):
        sol = solve_all(build_kernel(None, None, None, trip, grid), mode)
        x = grid.x
        for i in (0, 13, 40):
            yy = sol.y[i:2 * 40 - i + 1]
            assert np.abs(sol.K2bar[i, i:2 * 40 - i + 1] + 2 * np.exp(-(x[i] + yy))).max() < 1e-9
        rec = recover_potentials(sol)
        np.testing.assert_allclose(rec.pair.second, 4 * np.exp(-2 * x), rtol=1e-9)
        assert not np.any(rec.pair.first)
    row = separable_solve(trip, 0.5, [0.5, 1.0])
    np.testing.assert_allclose(row["K2bar"], -2 * np.exp(-np.array([1.0, 1.5])), rtol=1e-14)


def test_quadrature_matches_separable():
    kern = build_kernel(None, None, None, TWO_STATES, HALF)
    sep = SeparableSolver(TWO_STATES)
    for x in (0.0, 2.0, 8.0):
        row = nystrom_solve(kern, x, "quadrature")
        exact = sep.row(x, row.t)
        for name in ("K1", "K1bar", "K2", "K2bar"):
            assert np.abs(getattr(row, name) - exact[name]).max() < TOL_SEPARABLE


def test_exact_mode_is_exact_for_separable_data():
    kern = build_kernel(None, None, None, TWO_STATES, HALF)
    sol = solve_all(kern)
    exact = separable_solution(TWO_STATES, HALF)
    for name in ("K1", "K1bar", "K2", "K2bar"):
        assert np.abs(getattr(sol, name) - getattr(exact, name)).max() < 1e-12


def test_resolution_doubling():
    errs = []
    for n in (51, 101):
        grid = SpatialGrid(0.0, 16.0, n)
        sol = solve_all(build_kernel(None, None, None, TWO_STATES, grid), "quadrature")
        want = SeparableSolver(TWO_STATES).diagonal(grid.x)["K1"]
        errs.append(np.abs(sol.diagonal("K1") - want).max())
    assert errs[0] / errs[1] > 8


def test_hybrid_matches_quadrature_on_mixed_data(gauss_uv_data):
    # continuous reflection plus bound states: both treatments discretize
    # the same equations, so they agree to quadrature accuracy
    _, d = gauss_uv_data
    trip = build_triplets([(0.5j, 0.3)], [(-0.5j, 0.2)])
    kern = build_kernel(d.R, d.Rbar, d.grid, trip, INVERSION_GRID)
    for x in (-2.0, 0.0, 3.0):
        a = nystrom_solve(kern, x, "exact")
        b = nystrom_solve(kern, x, "quadrature")
        for name in ("K1", "K1bar", "K2", "K2bar"):
            assert np.abs(getattr(a, name) - getattr(b, name)).max() < TOL_HYBRID, (x, name)
        assert a.residual < 1e-10


def test_support_below_diagonal_is_zero():
    sol = solve_all(build_kernel(None, None, None, TWO_STATES, SpatialGrid(0, 4, 21)))
    n = 21
    j = np.arange(2 * n - 1)
    for i in range(n):
        assert not np.any(sol.K1[i, j < i])


def test_diagonal_identity(gauss_uv_data):
    _, d = gauss_uv_data
    sol = solve_all(build_kernel(d.R, d.Rbar, d.grid, None, INVERSION_GRID))
    rec = recover_potentials(sol)
    assert rec.diagnostics["diagonal_residual"] < TOL_DIAGONAL
    assert rec.diagnostics["product_residual"] < 1e-4


def test_gaussian_roundtrip(gauss_uv_data):
    uv, d = gauss_uv_data
    rec = recover_potentials(solve_all(build_kernel(d.R, d.Rbar, d.grid, None, INVERSION_GRID)))
    step = (uv.grid.n_points - 1) // (INVERSION_GRID.n_points - 1)
    for got, want in ((rec.pair.first, uv.first[::step]), (rec.pair.second, uv.second[::step])):
        assert np.abs(got - want).max() / np.abs(want).max() < TOL_ROUNDTRIP


def test_off_grid_point_rejected():
    kern = build_kernel(None, None, None, None, SpatialGrid(0, 1, 11))
    with pytest.raises(ValidationError):
        nystrom_solve(kern, 0.05)


def test_singular_separable_system():
    # (i, 2) and (-i, 2): Mbar(0) = 0
    trip = build_triplets([(1j, 2.0)], [(-1j, 2.0)])
    with pytest.raises(ConditioningError):
        separable_solve(trip, 0.0)
    with pytest.raises(ConditioningError):
        solve_all(build_kernel(None, None, None, trip, SpatialGrid(-1, 1, 11)))


def test_empty_separable_is_zero():
    out = separable_solve(build_triplets(), 0.3, [0.3, 1.0])
    for v in out.values():
        assert not np.any(v)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.1, 3.0), st.floats(0.3, 2.0), st.floats(-3.0, -0.1))
def test_separable_satisfies_equations(a, c, b, cb):
    # closed form against quadrature Nystrom for random simple states
    trip = build_triplets([(1j * a, c)], [(-1j * b, cb)])
    grid = SpatialGrid(2.0, 14.0, 241)
    kern = build_kernel(None, None, None, trip, grid)
    sep = SeparableSolver(trip)
    for x in (2.0, 5.0, 9.0):
        try:
            row = nystrom_solve(kern, x, "quadrature")
            exact = sep.row(x, row.t)
        except ConditioningError:
            continue
        scale = 1.0 + max(np.abs(v).max() for v in exact.values())
        for name in ("K1", "K1bar", "K2", "K2bar"):
            assert np.abs(getattr(row, name) - exact[name]).max() < 1e-5 * scale
