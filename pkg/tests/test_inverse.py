import cmath

import numpy as np
import pytest

from edscat.direct import scattering_coefficients
from edscat.errors import EdscatError, InconsistentDataError, ValidationError
from edscat.gauge import compute_gauge, map_norming_constants, to_ps, to_uv
from edscat.inverse import build_auxiliary_data, invert, recover_phase, reconstruct_E
from edscat.marchenko import SeparableSolver
from edscat.model import ScatteringMatrixData, SpatialGrid, SpectralGrid, Variant, build_triplets

from conftest import GAUSS_SPECTRAL, INVERSION_GRID

TOL_PHASE = 1e-3
TOL_AUX = 1e-5
TOL_E = 1e-3
TOL_INVERSION = 1e-2
TOL_PLANTED = 1e-5


def _phase_data(phase, n=40):
    lam = np.linspace(-30, 30, n)
    z = np.zeros(n, complex)
    return ScatteringMatrixData(SpectralGrid(lam), np.full(n, 1 / phase), z, z,
                                np.full(n, phase), z, z, Variant.QR)


def test_phase_trivial():
    phase, info = recover_phase(_phase_data(1.0))
    assert phase == 1.0 and info["phase_disagreement"] == 0


def test_phase_constant():
    # T = exp(-0.3 i) everywhere gives exp(i mu/2) = exp(0.3 i)
    phase, _ = recover_phase(_phase_data(cmath.exp(0.3j)))
    assert abs(phase - cmath.exp(0.3j)) < 1e-14


def test_phase_gaussian(gauss, gauss_data):
    phase, info = recover_phase(gauss_data)
    assert abs(phase - compute_gauge(gauss).phase) < TOL_PHASE
    assert info["phase_disagreement"] < TOL_PHASE


def test_phase_inconsistent():
    d = _phase_data(1.0)
    d = d.replace(Tbar=np.full(len(d.grid), cmath.exp(0.1j)))
    with pytest.raises(InconsistentDataError):
        recover_phase(d)


def test_auxiliary_single_sample():
    # R = 0.1 at lam = 4 with unit phase: R_uv = 0.2, R_ps = 0.05
    d = ScatteringMatrixData(SpectralGrid([4.0]), [1.0], [0.1], [0.0], [1.0], [0.0], [0.0], Variant.QR)
    uv, ps = build_auxiliary_data(d, 1.0)
    assert uv.R[0] == pytest.approx(0.2, abs=1e-15)
    assert ps.R[0] == pytest.approx(0.05, abs=1e-15)
    assert uv.variant is Variant.UV and ps.variant is Variant.PS


def test_auxiliary_rejects_zero_lambda():
    d = ScatteringMatrixData.free(SpectralGrid([-1.0, 0.0, 1.0]))
    with pytest.raises(ValidationError):
        build_auxiliary_data(d, 1.0)


def test_auxiliary_two_route(gauss, gauss_data):
    # mapped reflection against the direct problem of the gauge-transformed pair
    g = compute_gauge(gauss)
    lam_grid = SpectralGrid(GAUSS_SPECTRAL.values[::40])
    sub = scattering_coefficients(gauss, lam_grid)
    uv, ps = build_auxiliary_data(sub, g.phase)
    for mapped, conv in ((uv, to_uv), (ps, to_ps)):
        direct = scattering_coefficients(conv(gauss, g), lam_grid)
        for k in ("R", "Rbar"):
            a, b = getattr(mapped, k), getattr(direct, k)
            assert np.abs(a - b).max() / np.abs(b).max() < TOL_AUX


def test_reconstruct_E_trivial():
    grid = SpatialGrid(-1, 1, 11)
    z = np.zeros(11)
    g = reconstruct_E(z, z, grid, 1.0)
    np.testing.assert_array_equal(g.E, 1)
    with pytest.raises(ValidationError):
        reconstruct_E(z[:5], z[:5], grid, 1.0)


def test_reconstruct_E_gaussian(gauss, gauss_inversion):
    want = compute_gauge(gauss).E[::5]
    assert np.abs(gauss_inversion.gauge.E - want).max() < TOL_E


def test_invert_zero_data():
    d = ScatteringMatrixData.free(SpectralGrid(np.linspace(-20, 20, 400)))
    res = invert(d, SpatialGrid(-4, 4, 41))
    assert not np.any(res.pair.first) and not np.any(res.pair.second)
    np.testing.assert_array_equal(res.gauge.E, 1)


def test_invert_gaussian(gauss, gauss_inversion):
    res = gauss_inversion
    for got, want in ((res.pair.first, gauss.first[::5]), (res.pair.second, gauss.second[::5])):
        assert np.abs(got - want).max() / np.abs(want).max() < TOL_INVERSION
    assert res.diagnostics["E_left_residual"] < TOL_E
    assert res.diagnostics["product_trace_residual"] < TOL_E


def test_invert_planted_matches_closed_form(planted):
    data, res = planted
    grid = res.pair.grid
    trip = data.bound_states
    uv, _ = SeparableSolver(map_norming_constants(trip, Variant.QR, Variant.UV, -1)).potentials(grid)
    ps, _ = SeparableSolver(map_norming_constants(trip, Variant.QR, Variant.PS, -1)).potentials(
        grid, Variant.PS)
    # the phase is estimated from finite-lambda samples of T, which carries
    # an O(1e-6) error into the mapped norming constants
    assert abs(res.phase + 1) < TOL_PLANTED
    for got, want in ((res.uv.pair.first, uv.first), (res.ps.pair.second, ps.second)):
        assert np.abs(got - want).max() / np.abs(want).max() < TOL_PLANTED
    assert res.diagnostics["E_left_residual"] < TOL_E


def test_bound_state_count_preserved(planted):
    data, _ = planted
    uv, ps = build_auxiliary_data(data, -1)
    for t in (uv.bound_states, ps.bound_states):
        assert t.N == data.bound_states.N and t.Nbar == data.bound_states.Nbar


def _step_of(fn):
    with pytest.raises(EdscatError) as exc:
        fn()
    return exc.value.step


def test_step_tags(gauss_data):
    grid = SpatialGrid(-4, 4, 41)
    free = ScatteringMatrixData.free(SpectralGrid(np.linspace(-20, 20, 400)))
    assert _step_of(lambda: invert(free.replace(variant=Variant.UV), grid)) == "a"
    bad_phase = free.replace(Tbar=np.full(400, cmath.exp(0.2j)))
    assert _step_of(lambda: invert(bad_phase, grid)) == "b"
    with_zero = ScatteringMatrixData.free(SpectralGrid(np.linspace(-20, 20, 401)))
    assert _step_of(lambda: invert(with_zero, grid)) == "c"
    assert _step_of(lambda: invert(gauss_data, SpatialGrid(-1, 1, 11))) == "d"
    # (i, 2) and (-i, 2) in both auxiliary systems: Mbar(0) is singular
    trip = build_triplets([(1j, 2.0)], [(-1j, 2.0)])
    singular = free.replace(bound_states=trip)
    assert _step_of(lambda: invert(singular, grid, aux_triplets=(trip, trip))) == "e"
