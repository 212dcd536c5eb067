"""Inversion of energy-dependent scattering data through two AKNS gauges.

Pipeline (the letters tag errors raised along the way):

a. validate the (q, r) data set
b. recover exp(i mu/2) from the high-energy limit of T (cross-checked with Tbar)
c. build the (u, v) and (p, s) reflection coefficients and norming constants
d. synthesize both Marchenko kernels
e. solve both Marchenko systems
f. rebuild E from the two K2 diagonals
g. q = u E^2, r = s E^-2
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nm
from .errors import EdscatError, InconsistentDataError, ValidationError
from .gauge import GaugeData, map_norming_constants, map_scattering
from .marchenko import (KERNEL_DECAY_TOL, MarchenkoSolution, RecoveredPotentials,
                        build_kernel, recover_potentials, solve_all)
from .model import (Axis, BoundStateTriplets, PotentialPair, ScatteringMatrixData,
                    SpatialGrid, Variant, validate)

PHASE_TOL = 1e-3


def _tagged(step: str):
    def deco(fn):
        def wrapper(*a, **kw):
            try:
                return fn(*a, **kw)
            except EdscatError as exc:
                if getattr(exc, "step", None) is None:
                    exc.step = step
                    exc.args = (f"step ({step}): {exc.args[0] if exc.args else ''}",) + exc.args[1:]
                raise
        wrapper.__name__ = fn.__name__
        wrapper.__doc__ = fn.__doc__
        return wrapper
    return deco


def _outer(values: np.ndarray, fraction: float) -> np.ndarray:
    m = max(2, int(round(fraction * values.size)))
    return np.argsort(np.abs(values), kind="stable")[-m:]


def recover_phase(data: ScatteringMatrixData, fraction: float = 0.1, tol: float = PHASE_TOL):
    """``exp(i mu/2)`` from the high-energy limit of the transmission coefficients.

    ``T -> exp(-i mu/2)`` and ``Tbar -> exp(i mu/2)``; each is averaged over
    the outermost ``fraction`` of the samples (on a symmetric grid the
    1/lambda term cancels in the mean).

    Returns
    -------
    phase : complex
        Estimate from T.
    info : dict
        The Tbar estimate and the disagreement between the two.
    """
    if data.variant is not Variant.QR:
        raise ValidationError("phase recovery needs (q, r) data", ["variant"])
    idx = _outer(data.grid.values, fraction)
    t_mean = np.nanmean(data.T[idx])
    tb_mean = np.nanmean(data.Tbar[idx])
    if not np.isfinite(t_mean) or t_mean == 0:
        raise InconsistentDataError("transmission coefficient has no usable high-energy samples")
    phase = 1.0 / t_mean
    diff = abs(phase - tb_mean)
    info = {"phase_from_Tbar": complex(tb_mean), "phase_disagreement": float(diff),
            "phase_samples": int(idx.size)}
    if not diff < tol:
        raise InconsistentDataError(
            f"phase from T ({phase:.6f}) and from Tbar ({tb_mean:.6f}) differ by {diff:.2e}")
    return complex(phase), info


def evenness_residual(data: ScatteringMatrixData) -> float:
    """Largest |T(zeta) - T(-zeta)| over mirrored zeta-axis samples (0 on lambda grids)."""
    if data.grid.axis is not Axis.ZETA:
        return 0.0
    v = data.grid.values
    j = np.searchsorted(v, -v)
    ok = (j < v.size) & (np.abs(v[np.minimum(j, v.size - 1)] + v) < 1e-12 * max(1.0, np.abs(v).max()))
    if not ok.any():
        return 0.0
    i = np.flatnonzero(ok)
    jj = j[ok]
    return float(max(np.nanmax(np.abs(data.T[i] - data.T[jj])), np.nanmax(np.abs(data.Tbar[i] - data.Tbar[jj]))))


def build_auxiliary_data(data: ScatteringMatrixData, phase: complex,
                         aux_triplets: tuple | None = None):
    """The (u, v) and (p, s) data sets derived from (q, r) data.

    Parameters
    ----------
    aux_triplets : (BoundStateTriplets, BoundStateTriplets), optional
        Norming constants for the two systems.  Required when a bound state
        is not simple; otherwise converted from ``data.bound_states``.
    """
    if data.grid.axis is not Axis.LAMBDA:
        raise ValidationError("inversion needs a lambda-axis grid covering both signs of lambda",
                              ["spectral.axis"])
    if np.any(data.grid.values == 0):
        raise ValidationError("lambda = 0 must be excluded from the grid", ["spectral.zero"])
    base = data.replace(bound_states=None)
    uv = map_scattering(base, phase, Variant.UV)
    ps = map_scattering(base, phase, Variant.PS)
    trip = data.bound_states
    if aux_triplets is not None:
        t_uv, t_ps = aux_triplets
    elif trip is not None:
        t_uv = map_norming_constants(trip, Variant.QR, Variant.UV, phase)
        t_ps = map_norming_constants(trip, Variant.QR, Variant.PS, phase)
    else:
        t_uv = t_ps = None
    if t_uv is not None and trip is not None:
        for t in (t_uv, t_ps):
            if t.eigenvalues != trip.eigenvalues or t.bar_eigenvalues != trip.bar_eigenvalues:
                raise ValidationError("auxiliary triplets must share the bound-state eigenvalues",
                                      ["triplets.eigenvalues"])
    return uv.replace(bound_states=t_uv), ps.replace(bound_states=t_ps)


def reconstruct_E(k2_uv, k2_ps, grid: SpatialGrid, phase: complex) -> GaugeData:
    """``E(x) = exp(i mu/2) exp(2 int_x^inf (K2ps - K2uv)(z, z) dz)``."""
    k2_uv = np.asarray(k2_uv)
    k2_ps = np.asarray(k2_ps)
    if k2_uv.shape != (grid.n_points,) or k2_ps.shape != k2_uv.shape:
        raise ValidationError("diagonal traces must be sampled on the inversion grid", ["grid.mismatch"])
    tail = nm.tail(k2_ps - k2_uv, grid.h)
    E = phase * np.exp(2.0 * tail)
    E.setflags(write=False)
    return GaugeData(grid, E, -2j * cmath.log(phase))


@dataclass(frozen=True, eq=False)
class InversionResult:
    pair: PotentialPair
    phase: complex
    gauge: GaugeData
    uv: RecoveredPotentials
    ps: RecoveredPotentials
    solutions: tuple
    diagnostics: dict = field(default_factory=dict)


def invert(data: ScatteringMatrixData, grid: SpatialGrid, aux_triplets=None,
           phase: complex | None = None, relation_tol: float = 1e-6,
           kernel_decay_tol: float = KERNEL_DECAY_TOL) -> InversionResult:
    """Recover (q, r) on ``grid`` from energy-dependent scattering data.

    ``phase`` may be given to skip step (b).  Diagnostics include the
    diagonal-identity residuals of both Marchenko solves, the pointwise
    check ``(i/2) q r = 2 (K2uv - K2ps)(x, x)`` and ``|E(x_min) - 1|``.
    """
    diag: dict = {}
    _step_a(data, relation_tol, diag)
    if phase is None:
        phase, info = _tagged("b")(recover_phase)(data)
        diag.update(info)
    phase = complex(phase)
    uv_data, ps_data = _tagged("c")(build_auxiliary_data)(data, phase, aux_triplets)
    k_uv, k_ps = _step_d(uv_data, ps_data, grid, kernel_decay_tol)
    s_uv, s_ps = _tagged("e")(lambda: (solve_all(k_uv), solve_all(k_ps)))()
    rec_uv = recover_potentials(s_uv)
    rec_ps = recover_potentials(s_ps)
    gauge = _tagged("f")(reconstruct_E)(s_uv.diagonal("K2"), s_ps.diagonal("K2"), grid, phase)
    E = gauge.E
    q = rec_uv.pair.first * E ** 2
    r = rec_ps.pair.second / E ** 2
    pair = PotentialPair(grid, q, r, Variant.QR)
    prod = 0.5j * q * r
    trace = 2 * (s_uv.diagonal("K2") - s_ps.diagonal("K2"))
    diag.update({
        "phase": phase,
        "uv_diagonal_residual": rec_uv.diagnostics["diagonal_residual"],
        "ps_diagonal_residual": rec_ps.diagnostics["diagonal_residual"],
        "uv_product_residual": rec_uv.diagnostics["product_residual"],
        "ps_product_residual": rec_ps.diagnostics["product_residual"],
        "product_trace_residual": float(np.abs(prod - trace).max()),
        "E_left_residual": float(abs(E[0] - 1.0)),
        "uv_nystrom_residual": s_uv.diagnostics["residual_max"],
        "ps_nystrom_residual": s_ps.diagnostics["residual_max"],
        "condition_max": max(s_uv.diagnostics["condition_max"], s_ps.diagnostics["condition_max"]),
    })
    return InversionResult(pair, phase, gauge, rec_uv, rec_ps, (s_uv, s_ps), diag)


@_tagged("a")
def _step_a(data, relation_tol, diag):
    if data.variant is not Variant.QR:
        raise ValidationError("inversion input must be (q, r) scattering data", ["variant"])
    viol = validate(data, relation_tol=relation_tol)
    if viol:
        raise ValidationError("; ".join(str(v) for v in viol[:5]), viol)
    diag["relation_residual_max"] = float(np.nanmax(data.relation_residual(), initial=0.0))
    diag["evenness_residual"] = evenness_residual(data)


@_tagged("d")
def _step_d(uv_data, ps_data, grid, decay_tol):
    def kern(d, variant):
        return build_kernel(d.R, d.Rbar, d.grid, d.bound_states, grid, variant, decay_tol)
    return kern(uv_data, Variant.UV), kern(ps_data, Variant.PS)

