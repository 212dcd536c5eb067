"""Gauge maps between the energy-dependent system and its two AKNS partners.

``E(x) = exp((i/2) int_{-inf}^x q r)`` and ``mu = int q r`` link the (q, r)
system to the (u, v) and (p, s) systems.  Everywhere below ``sqrt(lambda)``
is the principal branch (cut along the negative real axis), which is the
zeta used by the direct solver on lambda-axis grids.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from . import _numerics as nm
from .direct import JostField
from .errors import SingularMapError, UnsupportedMultiplicityError, ValidationError
from .model import (Axis, BoundStateTriplets, PotentialPair, ScatteringMatrixData,
                    Variant, build_triplets, sqrt_principal, validate)


@dataclass(frozen=True, eq=False)
class GaugeData:
    grid: object
    E: np.ndarray
    mu: complex

    @property
    def phase(self) -> complex:
        """``exp(i mu / 2)``."""
        return cmath.exp(0.5j * self.mu)

    def consistency(self) -> dict:
        """Deviations of E at the grid ends from 1 and exp(i mu/2)."""
        return {"E_left": float(abs(self.E[0] - 1.0)),
                "E_right": float(abs(self.E[-1] - self.phase))}


def _require_qr(pot: PotentialPair):
    if pot.variant is not Variant.QR:
        raise ValidationError("expected a (q, r) potential pair", ["variant"])


def compute_gauge(pot: PotentialPair) -> GaugeData:
    """Phase function E and constant mu from (q, r) by cumulative Simpson."""
    _require_qr(pot)
    cum = nm.cumulative(pot.first * pot.second, pot.grid.h)
    mu = complex(cum[-1])
    E = np.exp(0.5j * cum)
    E.setflags(write=False)
    return GaugeData(pot.grid, E, mu)


def _checked(out: PotentialPair, decay_tol) -> PotentialPair:
    if decay_tol is not None:
        bad = [v for v in validate(out, decay_tol=decay_tol) if v.invariant == "decay"]
        if bad:
            raise ValidationError("mapped potentials do not decay at the grid ends; widen the grid",
                                  bad)
    return out


def to_uv(pot: PotentialPair, gauge: GaugeData | None = None, decay_tol=None) -> PotentialPair:
    """``u = q E^-2``, ``v = (-(i/2) r' + q r^2 / 4) E^2``."""
    _require_qr(pot)
    gauge = gauge or compute_gauge(pot)
    q, r, E = pot.first, pot.second, gauge.E
    dr = nm.derivative(r, pot.grid.h)
    u = q / E ** 2
    v = (-0.5j * dr + 0.25 * q * r * r) * E ** 2
    return _checked(PotentialPair(pot.grid, u, v, Variant.UV), decay_tol)


def to_ps(pot: PotentialPair, gauge: GaugeData | None = None, decay_tol=None) -> PotentialPair:
    """``p = ((i/2) q' + q^2 r / 4) E^-2``, ``s = r E^2``."""
    _require_qr(pot)
    gauge = gauge or compute_gauge(pot)
    q, r, E = pot.first, pot.second, gauge.E
    dq = nm.derivative(q, pot.grid.h)
    p = (0.5j * dq + 0.25 * q * q * r) / E ** 2
    s = r * E ** 2
    return _checked(PotentialPair(pot.grid, p, s, Variant.PS), decay_tol)


def product_identity_residual(pot: PotentialPair, gauge: GaugeData | None = None) -> np.ndarray:
    """Pointwise ``|p s - u v - (i/2)(q r)'|``."""
    gauge = gauge or compute_gauge(pot)
    uv, ps = to_uv(pot, gauge), to_ps(pot, gauge)
    rhs = 0.5j * nm.derivative(pot.first * pot.second, pot.grid.h)
    return np.abs(ps.first * ps.second - uv.first * uv.second - rhs)


# ---------------------------------------------------------------------------
# Jost maps

def _zeta_of(value, zeta):
    z = complex(zeta) if zeta is not None else complex(value)
    return z


def _multipliers(system: Variant, kind: str, pot: PotentialPair, gauge: GaugeData, zeta: complex):
    """2x2 matrices M(x) (shape (n, 2, 2)) with Y_qr = M Y_system."""
    q, r, E = pot.first, pot.second, gauge.E
    n = E.size
    ph = gauge.phase
    need_inv = {Variant.UV: ("phi", "psibar"), Variant.PS: ("psi", "phibar")}[system]
    if zeta == 0 and kind in need_inv:
        raise SingularMapError(f"map for {kind} divides by sqrt(lambda) = 0")
    M = np.zeros((n, 2, 2), complex)
    if system is Variant.UV:
        if kind in ("psi", "phibar"):
            M[:, 0, 0] = zeta * E
            M[:, 1, 0] = 0.5j * r * E
            M[:, 1, 1] = 1.0 / E
        else:
            M[:, 0, 0] = E
            M[:, 1, 0] = 0.5j * r * E / zeta
            M[:, 1, 1] = 1.0 / (zeta * E)
    else:
        if kind in ("psi", "phibar"):
            M[:, 0, 0] = E / zeta
            M[:, 0, 1] = -0.5j * q / (zeta * E)
            M[:, 1, 1] = 1.0 / E
        else:
            M[:, 0, 0] = E
            M[:, 0, 1] = -0.5j * q / E
            M[:, 1, 1] = zeta / E
    if kind == "psi":
        M *= ph
    elif kind == "psibar":
        M /= ph
    return M


def _map_jost(system, jost: JostField, gauge, pot, zeta, inverse):
    _require_qr(pot)
    z = _zeta_of(jost.value, zeta)
    cols = {}
    for kind in ("psi", "phi", "psibar", "phibar"):
        y = jost[kind]
        if y is None:
            continue
        M = _multipliers(system, kind, pot, gauge, z)
        if inverse:
            M = np.linalg.inv(M)
        cols[kind] = np.einsum("nij,nj->ni", M, y)
    target = system if inverse else Variant.QR
    return JostField(jost.grid, z * z if inverse else z, target, **cols)


def map_jost_uv(jost: JostField, gauge: GaugeData, pot: PotentialPair, zeta=None,
                inverse: bool = False) -> JostField:
    """Map (u, v) Jost solutions to those of the (q, r) system.

    ``zeta`` defaults to the principal square root of ``jost.value``.  With
    ``inverse=True`` the input is a (q, r) field at ``zeta`` and the output
    belongs to the (u, v) system at ``lambda = zeta**2``.
    """
    if zeta is None:
        zeta = jost.value if inverse else cmath.sqrt(jost.value)
    return _map_jost(Variant.UV, jost, gauge, pot, zeta, inverse)


def map_jost_ps(jost: JostField, gauge: GaugeData, pot: PotentialPair, zeta=None,
                inverse: bool = False) -> JostField:
    """Same as :func:`map_jost_uv` for the (p, s) system."""
    if zeta is None:
        zeta = jost.value if inverse else cmath.sqrt(jost.value)
    return _map_jost(Variant.PS, jost, gauge, pot, zeta, inverse)


# ---------------------------------------------------------------------------
# scattering-data maps

def _factors(variant: Variant, zeta, phase):
    """Multipliers taking (q, r) coefficients to ``variant`` coefficients."""
    e = phase
    if variant is Variant.QR:
        one = np.ones_like(zeta)
        return dict(T=one, Tbar=one, R=one, Rbar=one, L=one, Lbar=one)
    with np.errstate(all="ignore"):
        inv = 1.0 / zeta
        if variant is Variant.UV:
            return dict(T=e + 0 * zeta, Tbar=1 / e + 0 * zeta, R=zeta * e * e,
                        Rbar=inv / (e * e), L=inv, Lbar=zeta)
        return dict(T=e + 0 * zeta, Tbar=1 / e + 0 * zeta, R=inv * e * e,
                    Rbar=zeta / (e * e), L=zeta, Lbar=inv)


def constant_factor(variant: Variant, lam: complex, phase: complex, barred: bool) -> complex:
    """Factor taking a simple (q, r) norming constant to ``variant``.

    Norming constants transform like the reflection coefficient of the same
    half plane.
    """
    if variant is Variant.QR:
        return 1.0
    z = cmath.sqrt(lam)
    f = _factors(variant, np.array([z]), phase)
    return complex(f["Rbar" if barred else "R"][0])


def map_norming_constants(trip: BoundStateTriplets, source: Variant, target: Variant,
                          phase: complex) -> BoundStateTriplets:
    """Convert simple-state norming constants between systems."""
    if source is target:
        return trip
    if any(m != 1 for m in trip.multiplicities + trip.bar_multiplicities):
        raise UnsupportedMultiplicityError(
            "norming-constant conversion is only available for simple bound states", ["multiplicity"])

    def conv(st, barred):
        c = st.constants[0] / constant_factor(source, st.lam, phase, barred)
        return (st.lam, c * constant_factor(target, st.lam, phase, barred))

    return build_triplets([conv(s, False) for s in trip.states],
                          [conv(s, True) for s in trip.bar_states])


def map_scattering(data: ScatteringMatrixData, phase: complex, target: Variant) -> ScatteringMatrixData:
    """Transform scattering data to another system.

    ``phase`` is ``exp(i mu / 2)``.  Samples at lambda = 0 become NaN when a
    factor involves 1/sqrt(lambda).  Attached bound states are converted
    with :func:`map_norming_constants`.
    """
    target = Variant(target)
    zeta = data.grid.values.astype(complex) if data.grid.axis is Axis.ZETA \
        else sqrt_principal(data.grid.values)
    if target is not Variant.QR and data.grid.axis is Axis.ZETA and data.variant is Variant.QR:
        raise ValidationError("energy-independent data need a lambda-axis grid", ["spectral.axis"])
    src = _factors(data.variant, zeta, phase)
    dst = _factors(target, zeta, phase)
    out = {}
    with np.errstate(all="ignore"):
        for k in ("T", "R", "L", "Tbar", "Rbar", "Lbar"):
            v = getattr(data, k) / src[k] * dst[k]
            out[k] = np.where(np.isfinite(src[k]) & np.isfinite(dst[k]) & (src[k] != 0), v, np.nan)
    bs = data.bound_states
    if bs is not None:
        bs = map_norming_constants(bs, data.variant, target, phase)
    return ScatteringMatrixData(data.grid, variant=target, phase=phase, bound_states=bs, **out)
