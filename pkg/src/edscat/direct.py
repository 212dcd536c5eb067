"""Direct scattering: Jost solutions, scattering coefficients and bound states.

All three systems share the form ``Y' = [[-i k, P], [Q, i k]] Y``.  For the
energy-dependent system ``k = zeta**2``, ``P = zeta q``, ``Q = zeta r``; for
the two energy-independent systems ``k = lambda`` and (P, Q) are the
potentials themselves.

Solutions are integrated in the interaction picture
``Y = diag(exp(-i k x), exp(i k x)) w`` so that the free part is exact and the
Jost boundary values are the constant vectors (1, 0) and (0, 1).  Because the
diagonal factor has unit determinant, Wronskians of ``w`` equal Wronskians of
``Y``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (ConvergenceError, NotABoundStateError, OverflowRiskError,
                     RegionError, UnsupportedMultiplicityError, ValidationError)
from .model import (DECAY_TOL, Axis, PotentialPair, ScatteringMatrixData,
                    SpectralGrid, Variant, require_valid, sqrt_principal)

KINDS = ("psi", "phi", "psibar", "phibar")
# boundary vector of w and the end where it is imposed (True = x_max)
_BOUNDARY = {
    "psi": ((0.0, 1.0), True),
    "psibar": ((1.0, 0.0), True),
    "phi": ((1.0, 0.0), False),
    "phibar": ((0.0, 1.0), False),
}


@dataclass(frozen=True)
class DirectConfig:
    """Integrator and tolerance settings.

    Attributes
    ----------
    substeps : int
        RK4 steps per grid cell.
    truncation_tol : float
        Relative tail-decay tolerance required of the potentials.
    drift_tol : float
        Wronskian drift above which a warning is recorded.
    singular_tol : float
        Denominator magnitude below which a sample is marked singular.
    chunk : int
        Spectral values integrated together.
    max_exponent : float
        Largest allowed ``2 |Im k| max|x|`` before refusing to integrate.
    """

    substeps: int = 4
    truncation_tol: float = DECAY_TOL
    drift_tol: float = 1e-8
    singular_tol: float = 1e-12
    chunk: int = 128
    max_exponent: float = 600.0

    def __post_init__(self):
        if self.substeps < 1:
            raise ValidationError("substeps must be positive", ["substeps"])
        for name in ("truncation_tol", "drift_tol", "singular_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive", [name])


@dataclass(frozen=True)
class BoundStateSearchRegion:
    re_min: float = -10.0
    re_max: float = 10.0
    im_min: float = 1e-3
    im_max: float = 10.0
    samples: int = 64
    barred: bool = False

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValidationError("degenerate search rectangle", ["region.shape"])
        if self.barred and not self.im_max < 0:
            raise ValidationError("barred search needs im_max < 0", ["region.half_plane"])
        if not self.barred and not self.im_min > 0:
            raise ValidationError("unbarred search needs im_min > 0", ["region.half_plane"])
        if self.samples < 64:
            raise ValidationError("contour needs at least 64 samples", ["region.samples"])

    @classmethod
    def lower(cls, **kw) -> "BoundStateSearchRegion":
        """Default rectangle mirrored into the lower half plane."""
        kw.setdefault("im_min", -10.0)
        kw.setdefault("im_max", -1e-3)
        return cls(barred=True, **kw)


@dataclass(frozen=True, eq=False)
class JostField:
    """Jost solutions at one spectral value; unpopulated columns are None.

    Arrays have shape ``(n_points, 2)``.
    """

    grid: object
    value: complex
    variant: Variant
    psi: np.ndarray | None = None
    phi: np.ndarray | None = None
    psibar: np.ndarray | None = None
    phibar: np.ndarray | None = None

    def __getitem__(self, kind):
        return getattr(self, kind)


class _Sampler:
    """Potentials resampled at the RK4 stage points (spacing h / (2 substeps))."""

    def __init__(self, pot: PotentialPair, substeps: int):
        g = pot.grid
        self.grid = g
        self.substeps = substeps
        self.step = g.h / substeps
        self.n_fine = 2 * substeps * (g.n_points - 1) + 1
        self.xf = np.linspace(g.x_min, g.x_max, self.n_fine)
        x = g.x
        self.p = CubicSpline(x, pot.first)(self.xf)
        self.q = CubicSpline(x, pot.second)(self.xf)
        self.variant = pot.variant


def _coupling(sampler: _Sampler, s: np.ndarray, sl=slice(None)):
    """Return k and the interaction-picture couplings a(x), b(x) for values ``s``.

    ``s`` is zeta for the energy-dependent system and lambda otherwise.
    """
    if sampler.variant is Variant.QR:
        k = s * s
        scale = s
    else:
        k = s
        scale = np.ones_like(s)
    xf = sampler.xf[sl][:, None]
    ph = np.exp(2j * k[None, :] * xf)
    a = sampler.p[sl][:, None] * scale[None, :] * ph
    b = sampler.q[sl][:, None] * scale[None, :] / ph
    return k, a, b


def _check_overflow(k, x_min, x_max, limit):
    worst = 2.0 * np.max(np.abs(np.imag(k)), initial=0.0) * max(abs(x_min), abs(x_max))
    if worst > limit:
        raise OverflowRiskError(
            f"exponential factor exp({worst:.0f}) would overflow; use a narrower grid "
            "centred on the potential or a spectral value closer to the real axis")


def _rk4(a, b, w1, w2, step, substeps, forward):
    """Integrate w1' = a w2, w2' = b w1 across the fine samples.

    ``a``/``b`` have one row per stage point; returns w at every grid node
    touched (every ``2 * substeps`` stage rows), ordered by increasing x.
    """
    nf = a.shape[0]
    d = 1.0 if forward else -1.0
    out1 = [w1.copy()]
    out2 = [w2.copy()]
    idx = range(0, nf - 1, 2) if forward else range(nf - 1, 0, -2)
    for n_done, j in enumerate(idx, 1):
        jm = j + (1 if forward else -1)
        j1 = j + (2 if forward else -2)
        a0, am, a1 = a[j], a[jm], a[j1]
        b0, bm, b1 = b[j], b[jm], b[j1]
        h = d * step
        hh = 0.5 * h
        k1a = a0 * w2
        k1b = b0 * w1
        k2a = am * (w2 + hh * k1b)
        k2b = bm * (w1 + hh * k1a)
        k3a = am * (w2 + hh * k2b)
        k3b = bm * (w1 + hh * k2a)
        k4a = a1 * (w2 + h * k3b)
        k4b = b1 * (w1 + h * k3a)
        w1 = w1 + (h / 6.0) * (k1a + 2.0 * (k2a + k3a) + k4a)
        w2 = w2 + (h / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)
        if n_done % substeps == 0:
            out1.append(w1)
            out2.append(w2)
    w = np.stack([np.array(out1), np.array(out2)], axis=1)
    return w if forward else w[::-1]


def _propagate(sampler: _Sampler, s: np.ndarray, kind: str, node_range=None):
    """w for Jost solution ``kind`` at values ``s``; shape (nodes, 2, len(s)).

    ``node_range`` restricts integration to grid nodes ``[i0, i1]`` (inclusive);
    the boundary vector is imposed at the end named by ``kind``.
    """
    g = sampler.grid
    i0, i1 = node_range if node_range is not None else (0, g.n_points - 1)
    f0, f1 = 2 * sampler.substeps * i0, 2 * sampler.substeps * i1
    vec, right = _BOUNDARY[kind]
    if right and i1 != g.n_points - 1 or (not right and i0 != 0):
        raise ValueError("boundary end must be included in node_range")
    k, a, b = _coupling(sampler, s, slice(f0, f1 + 1))
    m = s.size
    w1 = np.full(m, vec[0], complex)
    w2 = np.full(m, vec[1], complex)
    return _rk4(a, b, w1, w2, sampler.step, sampler.substeps, forward=not right)


def _spectral_values(pot: PotentialPair, values, axis: Axis) -> np.ndarray:
    """Map requested samples to the parameter entering the coefficient matrix."""
    v = np.atleast_1d(np.asarray(values, complex))
    if pot.variant is Variant.QR:
        return v if axis is Axis.ZETA else sqrt_principal(v)
    if axis is Axis.ZETA:
        raise ValidationError("energy-independent systems take lambda-axis grids", ["spectral.axis"])
    return v


def _physical(w, x, k):
    """Y = diag(exp(-ikx), exp(ikx)) w for w of shape (n, 2, m)."""
    e = np.exp(1j * x[:, None] * k[None, :])
    out = np.empty_like(w)
    out[:, 0] = w[:, 0] / e
    out[:, 1] = w[:, 1] * e
    return out


def _check_potentials(pot: PotentialPair, cfg: DirectConfig):
    require_valid(pot, decay_tol=cfg.truncation_tol)


def integrate_jost(pot: PotentialPair, value: complex, which: str = "psi",
                   cfg: DirectConfig = DirectConfig(), axis: Axis | None = None) -> JostField:
    """Integrate one Jost solution at a single spectral value.

    Parameters
    ----------
    pot : PotentialPair
        (q, r), (u, v) or (p, s) samples.
    value : complex
        zeta for the energy-dependent system, lambda otherwise.  Pass
        ``axis=Axis.LAMBDA`` to give lambda for the energy-dependent system
        (zeta is then its principal square root).
    which : {"psi", "phi", "psibar", "phibar"}
    """
    if which not in KINDS:
        raise ValidationError(f"unknown Jost solution {which!r}", ["which"])
    _check_potentials(pot, cfg)
    if axis is None:
        axis = Axis.ZETA if pot.variant is Variant.QR else Axis.LAMBDA
    s = _spectral_values(pot, value, axis)
    k = s * s if pot.variant is Variant.QR else s
    g = pot.grid
    _check_overflow(k, g.x_min, g.x_max, cfg.max_exponent)
    w = _propagate(_Sampler(pot, cfg.substeps), s, which)
    y = _physical(w, g.x, k)[:, :, 0]
    return JostField(g, complex(np.atleast_1d(value)[0]), pot.variant, **{which: y})


def wronskian(sol_a, sol_b) -> np.ndarray:
    """``a1 b2 - a2 b1`` pointwise; inputs have shape (n, 2, ...)."""
    a = np.asarray(sol_a)
    b = np.asarray(sol_b)
    if a.shape != b.shape:
        raise ValidationError("solutions sampled on different grids", ["grid.mismatch"])
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def _mean_drift(w):
    m = w.mean(axis=0)
    return m, np.abs(w - m).max(axis=0)


def scattering_coefficients(pot: PotentialPair, grid: SpectralGrid,
                            cfg: DirectConfig = DirectConfig()) -> ScatteringMatrixData:
    """Sample T, R, L, Tbar, Rbar, Lbar on a real spectral grid.

    Each coefficient is a ratio of Wronskians averaged over x.  The
    diagnostics record the largest Wronskian drift per sample, the relation
    residual between left and right reflections, and the disagreement with
    coefficients read directly off the boundary values (an independent
    cross-check of the Wronskian route).
    """
    _check_potentials(pot, cfg)
    s_all = _spectral_values(pot, grid.values, grid.axis)
    k_all = s_all * s_all if pot.variant is Variant.QR else s_all
    g = pot.grid
    _check_overflow(k_all, g.x_min, g.x_max, cfg.max_exponent)
    sampler = _Sampler(pot, cfg.substeps)
    n = s_all.size
    out = {key: np.empty(n, complex) for key in ("T", "R", "L", "Tbar", "Rbar", "Lbar")}
    drift = np.empty(n)
    fit = np.empty(n)
    for start in range(0, n, cfg.chunk):
        sl = slice(start, min(n, start + cfg.chunk))
        s = s_all[sl]
        w = {kind: _propagate(sampler, s, kind) for kind in KINDS}
        w_phi_psi, d1 = _mean_drift(wronskian(w["phi"], w["psi"]))
        w_pb_fb, d2 = _mean_drift(wronskian(w["psibar"], w["phibar"]))
        w_phi_pb, d3 = _mean_drift(wronskian(w["phi"], w["psibar"]))
        w_fb_psi, d4 = _mean_drift(wronskian(w["phibar"], w["psi"]))
        w_psi_fb, d5 = _mean_drift(wronskian(w["psi"], w["phibar"]))
        drift[sl] = np.max([d1, d2, d3, d4, d5], axis=0)
        with np.errstate(all="ignore"):
            bad = np.abs(w_phi_psi) < cfg.singular_tol
            badbar = np.abs(w_pb_fb) < cfg.singular_tol
            T = np.where(bad, np.nan, 1.0 / w_phi_psi)
            Tbar = np.where(badbar, np.nan, 1.0 / w_pb_fb)
            R = -w_phi_pb * T
            L = w_psi_fb * T
            Rbar = w_fb_psi * Tbar
            Lbar = w_phi_pb * Tbar
            # boundary read-off: psi at x_min gives (L/T, 1/T); phi at x_max gives R/T
            t_fit = 1.0 / w["psi"][0, 1]
            l_fit = w["psi"][0, 0] * t_fit
            r_fit = w["phi"][-1, 1] * t_fit
            fit[sl] = np.nanmax(np.abs([T - t_fit, L - l_fit, R - r_fit]), axis=0)
        out["T"][sl], out["Tbar"][sl] = T, Tbar
        out["R"][sl], out["L"][sl] = R, L
        out["Rbar"][sl], out["Lbar"][sl] = Rbar, Lbar
    data = ScatteringMatrixData(grid, variant=pot.variant, **out)
    rel = data.relation_residual()
    data.diagnostics.update({
        "wronskian_drift": drift,
        "wronskian_drift_max": float(np.max(drift, initial=0.0)),
        "relation_residual_max": float(np.nanmax(rel, initial=0.0)) if rel.size else 0.0,
        "boundary_fit_residual_max": float(np.nanmax(fit, initial=0.0)) if fit.size else 0.0,
        "singular_count": int(data.singular.sum()),
    })
    if data.diagnostics["wronskian_drift_max"] > cfg.drift_tol:
        data.diagnostics["warning"] = "Wronskian drift above tolerance"
    return data


def _transmission_denominators(sampler: _Sampler, lam: np.ndarray, barred: bool, cfg: DirectConfig):
    """[phi; psi] (or [psibar; phibar]) at complex lambda, matched at the middle node."""
    g = sampler.grid
    s = lam if sampler.variant is not Variant.QR else sqrt_principal(lam)
    k = s * s if sampler.variant is Variant.QR else s
    _check_overflow(k, g.x_min, g.x_max, cfg.max_exponent)
    mid = (g.n_points - 1) // 2
    left, right = ("phibar", "psibar") if barred else ("phi", "psi")
    out = np.empty(s.size, complex)
    for start in range(0, s.size, cfg.chunk):
        sl = slice(start, min(s.size, start + cfg.chunk))
        wl = _propagate(sampler, s[sl], left, (0, mid))[-1]
        wr = _propagate(sampler, s[sl], right, (mid, g.n_points - 1))[0]
        if barred:
            out[sl] = wr[0] * wl[1] - wr[1] * wl[0]
        else:
            out[sl] = wl[0] * wr[1] - wl[1] * wr[0]
    return out


def transmission_in_upper_plane(pot: PotentialPair, lam, cfg: DirectConfig = DirectConfig(),
                                barred: bool = False):
    """Analytic continuation of 1/T into the upper half plane.

    Returns the Wronskian ``[phi; psi]`` at complex ``lam`` (``[psibar; phibar]``,
    i.e. 1/Tbar, in the lower half plane when ``barred``).  For the AKNS
    systems both tend to 1 as ``|lam|`` grows; for the energy-dependent
    system the limits are ``exp(i mu/2)`` and ``exp(-i mu/2)``.  ``lam`` is lambda for every system; for the
    energy-dependent system the principal square root gives zeta.
    """
    _check_potentials(pot, cfg)
    lam_arr = np.atleast_1d(np.asarray(lam, complex))
    if barred and np.any(lam_arr.imag >= 0) or (not barred and np.any(lam_arr.imag <= 0)):
        raise ValidationError("spectral value in the wrong half plane", ["lambda.half_plane"])
    val = _transmission_denominators(_Sampler(pot, cfg.substeps), lam_arr, barred, cfg)
    return val if np.ndim(lam) else complex(val[0])


# ---------------------------------------------------------------------------
# bound states


class _Denominator:
    """Callable lambda -> 1/T (or 1/Tbar) with a shared resampled potential."""

    def __init__(self, pot, barred, cfg):
        self.sampler = _Sampler(pot, cfg.substeps)
        self.barred = barred
        self.cfg = cfg
        self.calls = 0

    def __call__(self, z):
        z = np.atleast_1d(np.asarray(z, complex))
        self.calls += z.size
        return _transmission_denominators(self.sampler, z, self.barred, self.cfg)


def _resolved_contour(f, points, max_rounds=12):
    """Samples of f on a closed polyline, refined until every phase step
    is below pi/3."""
    z = np.asarray(points, complex)
    vals = f(z)
    for _ in range(max_rounds):
        zc = np.append(z, z[0])
        vc = np.append(vals, vals[0])
        dphi = np.angle(vc[1:] / vc[:-1])
        big = np.flatnonzero(np.abs(dphi) > math.pi / 3)
        if big.size == 0:
            return z, vals
        mids = 0.5 * (zc[big] + zc[big + 1])
        mv = f(mids)
        z = np.insert(z, big + 1, mids)
        vals = np.insert(vals, big + 1, mv)
    raise RegionError("contour phase could not be resolved; a zero is too close to the contour")


def _contour_winding(f, points, max_rounds=12):
    """Winding number of f around a closed polyline.  Returns (winding, min |f| on the samples)."""
    _, vals = _resolved_contour(f, points, max_rounds)
    vc = np.append(vals, vals[0])
    total = np.sum(np.angle(vc[1:] / vc[:-1]))
    return int(round(total / (2 * math.pi))), float(np.abs(vals).min())


def _zero_centroid(f, points, count):
    """Mean of the zeros enclosed by the contour, ``(1/2 pi i) oint z dlog f / count``."""
    z, vals = _resolved_contour(f, points)
    zc = np.append(z, z[0])
    vc = np.append(vals, vals[0])
    dlog = np.log(vc[1:] / vc[:-1])
    return complex(np.sum(0.5 * (zc[1:] + zc[:-1]) * dlog) / (2j * math.pi * count))


def _rectangle(re0, re1, im0, im1, n):
    w, h = re1 - re0, im1 - im0
    per = 2 * (w + h)
    nw = max(2, int(round(n * w / per)))
    nh = max(2, int(round(n * h / per)))
    bottom = re0 + np.linspace(0, w, nw, endpoint=False) + 1j * im0
    right = re1 + 1j * (im0 + np.linspace(0, h, nh, endpoint=False))
    top = re1 - np.linspace(0, w, nw, endpoint=False) + 1j * im1
    left = re0 + 1j * (im1 - np.linspace(0, h, nh, endpoint=False))
    return np.concatenate([bottom, right, top, left])


def _circle(center, radius, n=64):
    return center + radius * np.exp(2j * np.pi * np.arange(n) / n)


def _newton(f, z0, m, tol=1e-10, maxiter=60):
    z = complex(z0)
    fz = complex(f(z)[0])
    for _ in range(maxiter):
        if abs(fz) < tol:
            return z, fz
        eps = 1e-6 * max(1.0, abs(z))
        fp, fm = f(np.array([z + eps, z - eps]))
        d = (fp - fm) / (2 * eps)
        if d == 0:
            break
        z_new = z - m * fz / d
        f_new = complex(f(z_new)[0])
        # damp if the step made things worse
        t = 1.0
        while abs(f_new) > abs(fz) and t > 1e-3:
            t *= 0.5
            z_new = z - t * m * fz / d
            f_new = complex(f(z_new)[0])
        z, fz = z_new, f_new
    if abs(fz) < tol:
        return z, fz
    raise ConvergenceError(f"Newton iteration did not reach |1/T| < {tol:g} (|1/T| = {abs(fz):.3e})", z)


def find_bound_states(pot: PotentialPair, region: BoundStateSearchRegion = BoundStateSearchRegion(),
                      cfg: DirectConfig = DirectConfig(), min_box: float = 0.5,
                      newton_tol: float = 1e-10) -> list:
    """Locate zeros of 1/T (or 1/Tbar) inside a rectangle.

    The winding number of the Wronskian around the rectangle counts zeros
    with multiplicity.  Boxes with nonzero winding are split in four until
    smaller than ``min_box``; each surviving box seeds a (multiplicity
    weighted) Newton iteration, and the multiplicity of the refined zero is
    re-measured by the winding around a small circle.  Newton starts from
    the contour-integral centroid of the zeros in the box and must stay in
    the box.

    Returns
    -------
    list of (complex, int)
        ``(lambda_j, m_j)`` sorted by real part.
    """
    _check_potentials(pot, cfg)
    f = _Denominator(pot, region.barred, cfg)
    r = region
    total, fmin = _contour_winding(f, _rectangle(r.re_min, r.re_max, r.im_min, r.im_max, r.samples))
    if fmin < 1e-6:
        raise RegionError(f"|1/T| = {fmin:.2e} on the search contour; move or shrink the region")
    if total == 0:
        return []
    if total < 0:
        raise RegionError("negative winding number; the Wronskian is not analytic in the region")

    leaves = []

    def split(re0, re1, im0, im1, wnd, depth):
        if wnd == 0:
            return
        if max(re1 - re0, im1 - im0) <= min_box or depth > 12:
            leaves.append((re0, re1, im0, im1, wnd))
            return
        for frac in (0.5, 0.43, 0.57, 0.37):
            rm = re0 + frac * (re1 - re0)
            imm = im0 + frac * (im1 - im0)
            boxes = [(re0, rm, im0, imm), (rm, re1, im0, imm), (re0, rm, imm, im1), (rm, re1, imm, im1)]
            try:
                res = [_contour_winding(f, _rectangle(*b, 64)) for b in boxes]
            except RegionError:
                continue
            if sum(w for w, _ in res) == wnd and min(m for _, m in res) > 1e-8:
                for b, (w, _) in zip(boxes, res):
                    split(*b, w, depth + 1)
                return
        leaves.append((re0, re1, im0, im1, wnd))

    split(r.re_min, r.re_max, r.im_min, r.im_max, total, 0)

    found = []
    for re0, re1, im0, im1, wnd in leaves:
        z0 = _zero_centroid(f, _rectangle(re0, re1, im0, im1, 256), wnd)
        z, _ = _newton(f, z0, wnd, newton_tol)
        pad = 1e-6 * max(1.0, abs(z))
        if not (re0 - pad <= z.real <= re1 + pad and im0 - pad <= z.imag <= im1 + pad):
            raise ConvergenceError(f"Newton iteration left the search box around {z0:.4g}", z)
        if any(abs(z - zf) < 1e-6 for zf, _ in found):
            continue
        rad = 0.25 * min(re1 - re0, im1 - im0, abs(z.imag))
        mult, _ = _contour_winding(f, _circle(z, rad))
        found.append((z, max(mult, 1)))
    if sum(m for _, m in found) != total:
        raise ConvergenceError(
            f"refined zeros account for multiplicity {sum(m for _, m in found)} "
            f"but the contour encloses {total}", [z for z, _ in found])
    return sorted(found, key=lambda t: (t[0].real, t[0].imag))


def _residue_of_reciprocal(f, z0, radius, n=64):
    """Residue of 1/f at a simple zero z0, by the trapezoid rule on a circle."""
    t = radius * np.exp(2j * np.pi * np.arange(n) / n)
    return complex(np.mean(t / f(z0 + t)))


def simple_norming_constants(pot: PotentialPair, lam: complex, cfg: DirectConfig = DirectConfig(),
                             barred: bool = False, multiplicity: int = 1,
                             proportionality_tol: float = 1e-6, radius: float | None = None):
    """Norming constant of a simple bound state.

    At a bound state ``psi = b phi`` (``psibar = bbar phibar`` in the lower
    half plane).  The constant used throughout the package is
    ``c = -i Res(T, lam) / b`` (``cbar = +i Res(Tbar, lambar) / bbar``), the
    normalization under which the discrete Marchenko kernel term
    ``c exp(i lam y)`` reproduces the same potential.

    Returns
    -------
    c : complex
    info : dict
        ``b``, the residue, and the proportionality residual.
    """
    if multiplicity != 1:
        raise UnsupportedMultiplicityError(
            "norming constants are only extracted for simple bound states", ["multiplicity"])
    _check_potentials(pot, cfg)
    lam = complex(lam)
    if (barred and lam.imag >= 0) or (not barred and lam.imag <= 0):
        raise ValidationError("bound state in the wrong half plane", ["lambda.half_plane"])
    sampler = _Sampler(pot, cfg.substeps)
    s = np.array([lam if pot.variant is not Variant.QR else cmath.sqrt(lam)])
    k = s * s if pot.variant is Variant.QR else s
    _check_overflow(k, pot.grid.x_min, pot.grid.x_max, cfg.max_exponent)
    right, left = ("psibar", "phibar") if barred else ("psi", "phi")
    x = pot.grid.x
    yr = _physical(_propagate(sampler, s, right), x, k)[:, :, 0]
    yl = _physical(_propagate(sampler, s, left), x, k)[:, :, 0]
    # compare where the right solution is well above the contamination level
    amp = np.linalg.norm(yr, axis=1)
    win = amp >= 1e-2 * amp.max()
    a, bvec = yl[win].ravel(), yr[win].ravel()
    b = complex(np.vdot(a, bvec) / np.vdot(a, a))
    resid = float(np.linalg.norm(bvec - b * a) / np.linalg.norm(bvec))
    if not resid < proportionality_tol:
        raise NotABoundStateError(
            f"Jost solutions at {lam} are not proportional (relative residual {resid:.2e})")
    f = _Denominator(pot, barred, cfg)
    if radius is None:
        radius = min(0.05, 0.5 * abs(lam.imag))
    res = _residue_of_reciprocal(f, lam, radius)
    c = (1j * res / b) if barred else (-1j * res / b)
    return c, {"b": b, "residue": res, "proportionality_residual": resid}
