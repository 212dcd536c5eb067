"""Alternate Marchenko method: q and r straight from two uncoupled scalar equations.

With ``G(y) = int_y^inf Omega`` (likewise Gbar) the unknowns

    Kc(x, y)    = int_y^inf K1uv(x, t) dt    / (1 + int_x^inf K1bar_uv(x, t) dt)
    Kcbar(x, y) = int_y^inf K2bar_ps(x, t) dt / (1 + int_x^inf K2ps(x, t) dt)

satisfy, for x < y,

    Kc(x,y) + Gbar_uv(x+y)
        + int_x^inf dz int_x^inf dt Kc_t(x,t) G_uv(t+z) Gbar_uv'(z+y) = 0
    Kcbar(x,y) + G_ps(x+y)
        + int_x^inf dz int_x^inf dt Kcbar_t(x,t) Gbar_ps(t+z) G_ps'(z+y) = 0

and ``q = exp(i mu) d/dx Kc(x,x)``, ``r = exp(-i mu) d/dx Kcbar(x,x)``.
The diagonals also equal ratios of zero-energy Jost components, which
:func:`zero_energy_jost` provides in closed form.

The discretization shares the support and y-grid of :mod:`edscat.marchenko`:
row ``i`` lives on ``t_k = x_i + k h``, ``k = 0 .. 2(n-1-i)``, the t-derivative
is a dense 4th-order differentiation matrix and both integrals use
composite Simpson weights.  ``G'`` is taken as ``-Omega`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _numerics as nm
from .errors import ConditioningError, NumericalError, ValidationError
from .gauge import GaugeData, compute_gauge
from .inverse import (_step_a, _step_d, _tagged, build_auxiliary_data,
                      recover_phase)
from .marchenko import (KERNEL_DECAY_TOL, MarchenkoKernel, MarchenkoSolution,
                        _solve_checked)
from .model import (PotentialPair, ScatteringMatrixData, SpatialGrid, Variant,
                    discrete_tail)

DENOMINATOR_TOL = 1e-8


# ---------------------------------------------------------------------------
# zero-energy Jost solutions


@dataclass(frozen=True, eq=False)
class ZeroEnergyJost:
    """Zero-energy Jost columns of the two AKNS systems, shape ``(n, 2)``."""

    grid: SpatialGrid
    psi_uv: np.ndarray
    psibar_uv: np.ndarray
    psi_ps: np.ndarray
    psibar_ps: np.ndarray

    def ratios(self):
        """``psi1_uv / psibar1_uv`` and ``psibar2_ps / psi2_ps``."""
        return self.psi_uv[:, 0] / self.psibar_uv[:, 0], self.psibar_ps[:, 1] / self.psi_ps[:, 1]


def zero_energy_jost(pot: PotentialPair, gauge: GaugeData | None = None) -> ZeroEnergyJost:
    """Closed-form zero-energy Jost solutions of the (u, v) and (p, s) systems.

    Only E, exp(i mu/2) and the tail integrals of q and r are needed; the
    tails are cumulative Simpson sums.
    """
    if pot.variant is not Variant.QR:
        raise ValidationError("expected a (q, r) potential pair", ["variant"])
    gauge = gauge or compute_gauge(pot)
    q, r, E = pot.first, pot.second, gauge.E
    h = pot.grid.h
    e = gauge.phase
    iq = nm.tail(q, h)
    ir = nm.tail(r, h)
    psi_uv = np.column_stack([-iq / (e * E), E * (1 + 0.5j * r * iq) / e])
    psibar_uv = np.column_stack([e / E, -0.5j * e * r * E])
    psi_ps = np.column_stack([0.5j * q / (e * E), E / e])
    psibar_ps = np.column_stack([e * (1 - 0.5j * q * ir) / E, -e * E * ir])
    return ZeroEnergyJost(pot.grid, psi_uv, psibar_uv, psi_ps, psibar_ps)


# ---------------------------------------------------------------------------
# G-kernels


@dataclass(frozen=True, eq=False)
class AltKernel:
    """Tail integrals of the four Marchenko kernels on the extended y-grid.

    ``y = 2 x_min + j h`` as in :class:`edscat.marchenko.MarchenkoKernel`;
    the ``omega*`` arrays are minus the y-derivatives of the G arrays.
    """

    grid: SpatialGrid
    G_uv: np.ndarray
    Gbar_uv: np.ndarray
    G_ps: np.ndarray
    Gbar_ps: np.ndarray
    omega_uv: np.ndarray
    omega_bar_uv: np.ndarray
    omega_ps: np.ndarray
    omega_bar_ps: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def y(self) -> np.ndarray:
        g = self.grid
        return 2 * g.x_min + g.h * np.arange(self.G_uv.size)


def _tail_of(kernel: MarchenkoKernel, barred: bool) -> np.ndarray:
    trip = kernel.triplets
    states = trip.bar_states if barred else trip.states
    for st in states:
        if abs(st.lam) < 1e-8:
            raise ConditioningError("bound state at lambda = 0 makes the tail integral singular",
                                    np.inf)
    cont = kernel.omega_bar_c if barred else kernel.omega_c
    return nm.tail(cont, kernel.grid.h) + discrete_tail(trip, kernel.y, barred)


def build_alt_kernel(k_uv: MarchenkoKernel, k_ps: MarchenkoKernel,
                     decay_tol: float = KERNEL_DECAY_TOL) -> AltKernel:
    """G-kernels from the (u, v) and (p, s) Marchenko kernels.

    Continuous parts are integrated by Simpson tail sums; bound-state parts
    use ``C A^-1 exp(-A y) B``.  Diagnostics hold the relative size of each
    G at ``y = 2 x_max`` and the residual of ``G' = -Omega`` by central
    differences.
    """
    if k_uv.grid != k_ps.grid:
        raise ValidationError("both kernels must live on the same x-grid", ["grid.mismatch"])
    g = k_uv.grid
    arrays = {"G_uv": _tail_of(k_uv, False), "Gbar_uv": _tail_of(k_uv, True),
              "G_ps": _tail_of(k_ps, False), "Gbar_ps": _tail_of(k_ps, True)}
    omegas = {"G_uv": k_uv.omega, "Gbar_uv": k_uv.omega_bar,
              "G_ps": k_ps.omega, "Gbar_ps": k_ps.omega_bar}
    diag = {}
    n_cont = k_uv.n_cont
    for name, G in arrays.items():
        scale = np.abs(G).max()
        end = abs(G[n_cont - 1]) / scale if scale > 0 else 0.0
        diag[f"{name}_tail"] = float(end)
        if end > decay_tol and not (k_uv.triplets.N or k_uv.triplets.Nbar):
            raise ValidationError(f"{name} has not decayed at y = 2 x_max (relative {end:.2e})",
                                  [f"{name}.decay"])
        om = omegas[name]
        res = np.abs(nm.derivative(G, g.h) + om)
        diag[f"{name}_derivative_residual"] = float(res.max() / max(1.0, np.abs(om).max()))
        G.setflags(write=False)
    return AltKernel(g, omega_uv=k_uv.omega, omega_bar_uv=k_uv.omega_bar,
                     omega_ps=k_ps.omega, omega_bar_ps=k_ps.omega_bar, diagnostics=diag, **arrays)


# ---------------------------------------------------------------------------
# solver


@dataclass(frozen=True, eq=False)
class AltRow:
    index: int
    x: float
    t: np.ndarray
    Kc: np.ndarray
    Kcbar: np.ndarray
    residual: float
    condition: float


def _alt_system(forcing, G, Gp, idx, w, D):
    """Matrix and right-hand side of ``k + F + Gp-Hankel W G-Hankel W D k = 0``."""
    nr = w.size
    Hp = Gp[idx]
    Hg = G[idx]
    A = np.eye(nr) + (Hp * w[None, :]) @ (Hg * w[None, :]) @ D
    return A, -forcing


def solve_alt(kernel: AltKernel, i: int) -> AltRow:
    """Both alternate unknowns on the row at grid node ``i``.

    The two equations are uncoupled and solved separately.
    """
    g = kernel.grid
    n = g.n_points
    if not 0 <= i < n:
        raise ValidationError(f"row index {i} outside the grid", ["x.grid"])
    h = g.h
    nr = 2 * (n - 1 - i) + 1
    k = np.arange(nr)
    w = nm.simpson_weights(nr, h)
    D = nm.differentiation_matrix(nr, h)
    idx = 2 * i + k[:, None] + k[None, :]
    f = 2 * i + k
    # Gbar_uv'(z+y) = -omega_bar_uv, G_ps'(z+y) = -omega_ps
    A1, b1 = _alt_system(kernel.Gbar_uv[f], kernel.G_uv, -kernel.omega_bar_uv, idx, w, D)
    A2, b2 = _alt_system(kernel.G_ps[f], kernel.Gbar_ps, -kernel.omega_ps, idx, w, D)
    Kc, c1 = _solve_checked(A1, b1)
    Kcbar, c2 = _solve_checked(A2, b2)
    scale = 1.0 + max(np.abs(b1).max(), np.abs(b2).max())
    res = max(np.abs(A1 @ Kc - b1).max(), np.abs(A2 @ Kcbar - b2).max()) / scale
    return AltRow(i, g.x[i], g.x[i] + h * k, Kc, Kcbar, float(res), max(c1, c2))


@dataclass(frozen=True, eq=False)
class AltSolution:
    """Rows laid out like :class:`edscat.marchenko.MarchenkoSolution`.

    ``Kc[i, j]`` is the unknown at ``x_i`` and ``y = x_min + j h``, zero for
    ``y < x``; ``diagonal`` returns the ``y = x+`` traces.
    """

    grid: SpatialGrid
    Kc: np.ndarray
    Kcbar: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def diagonal(self, name: str) -> np.ndarray:
        i = np.arange(self.grid.n_points)
        return getattr(self, name)[i, i]


def solve_alt_all(kernel: AltKernel) -> AltSolution:
    g = kernel.grid
    n = g.n_points
    Kc = np.zeros((n, 2 * n - 1), complex)
    Kcbar = np.zeros_like(Kc)
    res = np.empty(n)
    cond = np.empty(n)
    for i in range(n):
        row = solve_alt(kernel, i)
        sl = slice(i, i + row.t.size)
        Kc[i, sl] = row.Kc
        Kcbar[i, sl] = row.Kcbar
        res[i] = row.residual
        cond[i] = row.condition
    diag = {"residual_max": float(res.max()), "condition_max": float(cond.max())}
    return AltSolution(g, Kc, Kcbar, diag)


def recover_qr_alt(solution: AltSolution, phase: complex):
    """``q = exp(i mu) d/dx Kc(x,x)``, ``r = exp(-i mu) d/dx Kcbar(x,x)``.

    ``phase`` is ``exp(i mu/2)``.  Derivatives are 4th-order central
    differences; the two nodes at each end use one-sided stencils, which
    the diagnostics record.

    Returns
    -------
    pair : PotentialPair
    diagnostics : dict
    """
    g = solution.grid
    e2 = complex(phase) ** 2
    q = e2 * nm.derivative(solution.diagonal("Kc"), g.h)
    r = nm.derivative(solution.diagonal("Kcbar"), g.h) / e2
    one_sided = [0, 1, g.n_points - 2, g.n_points - 1] if g.n_points >= 5 else list(range(g.n_points))
    return PotentialPair(g, q, r, Variant.QR), {"one_sided_nodes": one_sided}


# ---------------------------------------------------------------------------
# cross-checks


def defining_ratio(sol_uv: MarchenkoSolution, sol_ps: MarchenkoSolution,
                   tol: float = DENOMINATOR_TOL):
    """The alternate unknowns assembled from standard Marchenko solutions.

    Returns ``(Kc, Kcbar)`` laid out like :class:`AltSolution`.  Raises
    :class:`NumericalError` where a denominator is within ``tol`` of zero.
    """
    g = sol_uv.grid
    h = g.h
    n = g.n_points
    Kc = np.zeros_like(sol_uv.K1)
    Kcbar = np.zeros_like(sol_ps.K2bar)
    for i in range(n):
        sl = slice(i, 2 * (n - 1) - i + 1)
        num = nm.tail(sol_uv.K1[i, sl], h)
        den = 1 + nm.tail(sol_uv.K1bar[i, sl], h)[0]
        numb = nm.tail(sol_ps.K2bar[i, sl], h)
        denb = 1 + nm.tail(sol_ps.K2[i, sl], h)[0]
        if abs(den) < tol or abs(denb) < tol:
            raise NumericalError(f"defining-ratio denominator vanishes at x = {g.x[i]:.6g}")
        Kc[i, sl] = num / den
        Kcbar[i, sl] = numb / denb
    return Kc, Kcbar


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True, eq=False)
class AltInversionResult:
    pair: PotentialPair
    phase: complex
    solution: AltSolution
    kernel: AltKernel
    diagnostics: dict = field(default_factory=dict)


def invert_alt(data: ScatteringMatrixData, grid: SpatialGrid, aux_triplets=None,
               phase: complex | None = None, relation_tol: float = 1e-6,
               kernel_decay_tol: float = KERNEL_DECAY_TOL) -> AltInversionResult:
    """Recover (q, r) with the alternate system.

    Validation, phase recovery and the auxiliary data are shared with
    :func:`edscat.inverse.invert`; the phase is the only source of
    ``exp(i mu)``.
    """
    diag: dict = {}
    _step_a(data, relation_tol, diag)
    if phase is None:
        phase, info = _tagged("b")(recover_phase)(data)
        diag.update(info)
    phase = complex(phase)
    uv_data, ps_data = _tagged("c")(build_auxiliary_data)(data, phase, aux_triplets)
    k_uv, k_ps = _step_d(uv_data, ps_data, grid, kernel_decay_tol)
    kern = _tagged("d")(build_alt_kernel)(k_uv, k_ps, kernel_decay_tol)
    sol = _tagged("e")(solve_alt_all)(kern)
    pair, rinfo = recover_qr_alt(sol, phase)
    diag.update({"phase": phase,
                 "alt_residual": sol.diagnostics["residual_max"],
                 "alt_condition_max": sol.diagnostics["condition_max"],
                 "one_sided_nodes": rinfo["one_sided_nodes"]})
    diag.update({f"alt_{k}": v for k, v in kern.diagnostics.items()})
    return AltInversionResult(pair, phase, sol, kern, diag)
