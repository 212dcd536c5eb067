import numpy as np
import pytest

from edscat.altmarchenko import (AltSolution, build_alt_kernel, defining_ratio, invert_alt,
                                 recover_qr_alt, solve_alt, solve_alt_all, zero_energy_jost)
from edscat.direct import integrate_jost
from edscat.errors import NumericalError, ValidationError
from edscat.gauge import compute_gauge, to_ps, to_uv
from edscat.inverse import build_auxiliary_data
from edscat.marchenko import MarchenkoSolution, build_kernel
from edscat.model import PotentialPair, SpatialGrid, Variant, build_triplets

from conftest import INVERSION_GRID

TOL_ZERO_ENERGY = 1e-6
TOL_DERIVATIVE = 1e-6
TOL_RATIO = 1e-4
TOL_DIAGONAL = 1e-3
TOL_PIPELINE = 1e-2
TOL_CROSS = 2e-2


@pytest.fixture(scope="module")
def gauss_alt(gauss_data):
    return invert_alt(gauss_data, INVERSION_GRID)


def _kernels(data, grid, phase):
    uv, ps = build_auxiliary_data(data, phase)
    return (build_kernel(uv.R, uv.Rbar, uv.grid, uv.bound_states, grid, Variant.UV),
            build_kernel(ps.R, ps.Rbar, ps.grid, ps.bound_states, grid, Variant.PS))


def test_zero_energy_trivial():
    z = zero_energy_jost(PotentialPair.zero(SpatialGrid(-2, 2, 21)))
    np.testing.assert_array_equal(z.psi_uv, [[0, 1]] * 21)
    np.testing.assert_array_equal(z.psibar_uv, [[1, 0]] * 21)
    np.testing.assert_array_equal(z.psi_ps, [[0, 1]] * 21)
    np.testing.assert_array_equal(z.psibar_ps, [[1, 0]] * 21)
    with pytest.raises(ValidationError):
        zero_energy_jost(PotentialPair.zero(SpatialGrid(-2, 2, 21), Variant.UV))


def test_zero_energy_against_ode(gauss):
    g = compute_gauge(gauss)
    z = zero_energy_jost(gauss, g)
    for conv, cols in ((to_uv, (z.psi_uv, z.psibar_uv)), (to_ps, (z.psi_ps, z.psibar_ps))):
        aux = conv(gauss, g)
        for kind, want in zip(("psi", "psibar"), cols):
            got = integrate_jost(aux, 0.0, kind)[kind]
            assert np.abs(got - want).max() < TOL_ZERO_ENERGY, (conv.__name__, kind)


def test_zero_kernel():
    grid = SpatialGrid(-2, 2, 21)
    k = build_kernel(None, None, None, None, grid)
    alt = build_alt_kernel(k, k)
    for name in ("G_uv", "Gbar_uv", "G_ps", "Gbar_ps"):
        assert not np.any(getattr(alt, name))
    sol = solve_alt_all(alt)
    assert not np.any(sol.Kc) and not np.any(sol.Kcbar)


def test_one_state_tail():
    grid = SpatialGrid(0, 2, 11)
    k = build_kernel(None, None, None, build_triplets([(1j, 2.0)]), grid)
    alt = build_alt_kernel(k, k)
    np.testing.assert_allclose(alt.G_uv, 2 * np.exp(-alt.y), rtol=1e-14)
    # Gbar_uv = 0 forces Kc = 0
    assert not np.any(alt.Gbar_uv)
    assert not np.any(solve_alt(alt, 3).Kc)


def test_grid_mismatch():
    a = build_kernel(None, None, None, None, SpatialGrid(0, 1, 5))
    b = build_kernel(None, None, None, None, SpatialGrid(0, 1, 7))
    with pytest.raises(ValidationError):
        build_alt_kernel(a, b)
    with pytest.raises(ValidationError):
        solve_alt(build_alt_kernel(a, a), 5)


def test_derivative_residual_fine_grid(gauss, gauss_data):
    grid = SpatialGrid(-8.0, 8.0, 321)
    alt = build_alt_kernel(*_kernels(gauss_data, grid, compute_gauge(gauss).phase))
    for name in ("G_uv", "Gbar_uv", "G_ps", "Gbar_ps"):
        assert alt.diagnostics[f"{name}_derivative_residual"] < TOL_DERIVATIVE


def test_defining_ratio(gauss_inversion, gauss_alt):
    s_uv, s_ps = gauss_inversion.solutions
    Kc, Kcbar = defining_ratio(s_uv, s_ps)
    sol = gauss_alt.solution
    assert np.abs(Kc - sol.Kc).max() < TOL_RATIO
    assert np.abs(Kcbar - sol.Kcbar).max() < TOL_RATIO


def test_diagonal_matches_zero_energy_ratios(gauss, gauss_alt):
    r1, r2 = zero_energy_jost(gauss).ratios()
    sol = gauss_alt.solution
    assert np.abs(sol.diagonal("Kc") - r1[::5]).max() < TOL_DIAGONAL
    assert np.abs(sol.diagonal("Kcbar") - r2[::5]).max() < TOL_DIAGONAL


def test_left_limits(gauss):
    # the diagonals tend to exp(-i mu) int q and exp(i mu) int r as x -> -inf
    g = compute_gauge(gauss)
    r1, r2 = zero_energy_jost(gauss, g).ratios()
    h = gauss.grid.h
    iq = h * (gauss.first.sum() - 0.5 * (gauss.first[0] + gauss.first[-1]))
    ir = h * (gauss.second.sum() - 0.5 * (gauss.second[0] + gauss.second[-1]))
    assert abs(r1[0] + iq / g.phase ** 2) < 1e-8
    assert abs(r2[0] + ir * g.phase ** 2) < 1e-8


def test_synthetic_trace():
    # Kc(x,x) = exp(-x) with unit phase gives q = -exp(-x)
    grid = SpatialGrid(0, 2, 41)
    n = grid.n_points
    Kc = np.zeros((n, 2 * n - 1), complex)
    i = np.arange(n)
    Kc[i, i] = np.exp(-grid.x)
    pair, info = recover_qr_alt(AltSolution(grid, Kc, np.zeros_like(Kc)), 1.0)
    err = np.abs(pair.first + np.exp(-grid.x))
    # central stencils inside, one-sided ones at the two end nodes
    assert err[2:-2].max() < 1e-6 and err.max() < 1e-5
    assert not np.any(pair.second)
    assert info["one_sided_nodes"] == [0, 1, n - 2, n - 1]


def test_pipeline(gauss, gauss_alt):
    pair = gauss_alt.pair
    for got, want in ((pair.first, gauss.first[::5]), (pair.second, gauss.second[::5])):
        assert np.abs(got - want).max() / np.abs(want).max() < TOL_PIPELINE


def test_cross_method(gauss, gauss_inversion, gauss_alt):
    for k in ("first", "second"):
        a = getattr(gauss_inversion.pair, k)
        b = getattr(gauss_alt.pair, k)
        assert np.abs(a - b).max() / np.abs(getattr(gauss, k)).max() < TOL_CROSS


def test_vanishing_denominator():
    grid = SpatialGrid(0, 1, 5)
    z = np.zeros((5, 9), complex)
    K1bar = z.copy()
    # constant -1/2 over the row-0 support [0, 2]: 1 + int K1bar = 0
    K1bar[0, :] = -0.5
    sol = MarchenkoSolution(grid, z, K1bar, z, z)
    with pytest.raises(NumericalError):
        defining_ratio(sol, MarchenkoSolution(grid, z, z, z, z))
