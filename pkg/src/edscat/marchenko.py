"""Marchenko kernels, the Nystrom solver and the separable closed form.

The kernel pair is

    Omega(y)    = (1/2pi) int R(lam) exp(i lam y) dlam    + C exp(-A y) B
    Omegabar(y) = (1/2pi) int Rbar(lam) exp(-i lam y) dlam + Cbar exp(-Abar y) Bbar

and the 2x2 Marchenko system splits into two scalar pairs,

    K1bar(x,t) + int_x^inf K1(x,z) Omega(z+t) dz = 0
    K1(x,t) + Omegabar(x+t) + int_x^inf K1bar(x,z) Omegabar(z+t) dz = 0

    K2bar(x,t) + Omega(x+t) + int_x^inf K2(x,z) Omega(z+t) dz = 0
    K2(x,t) + int_x^inf K2bar(x,z) Omegabar(z+t) dz = 0

with ``u = -2 K1(x,x)``, ``v = -2 K2bar(x,x)`` and
``int_x^inf u v = 2 K1bar(x,x) = 2 K2(x,x)``.

Discretization.  For a grid node ``x_i`` the unknowns live on
``t_k = x_i + k h``, ``k = 0 .. 2(n-1-i)``: once the continuous kernel part
has decayed beyond ``2 x_max``, ``K(x, .)`` is supported on
``[x, 2 x_max - x]``.  Every ``Omega(t_k + t_l)`` then falls on the extended
y-grid ``2 x_min + j h``, so the discretized operator is an exact Hankel
matrix.  Composite Simpson weights apply because the panel count is even.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve, solve_sylvester

from . import _numerics as nm
from .errors import ConditioningError, ValidationError
from .model import (EMPTY_TRIPLETS, BoundStateTriplets, PotentialPair,
                    SpatialGrid, SpectralGrid, Variant, discrete_kernel, jordan_expm)

COND_LIMIT = 1e12
KERNEL_DECAY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MarchenkoKernel:
    """Omega and Omegabar sampled on the extended y-grid of an x-grid.

    ``omega[j]`` is the kernel at ``y = 2 x_min + j h`` for
    ``j = 0 .. 4 (n - 1)``.  The continuous part is set to zero beyond
    ``2 x_max``; the discrete part is exact everywhere.
    """

    grid: SpatialGrid
    omega: np.ndarray
    omega_bar: np.ndarray
    omega_c: np.ndarray
    omega_bar_c: np.ndarray
    triplets: BoundStateTriplets = EMPTY_TRIPLETS
    variant: Variant = Variant.UV
    diagnostics: dict = field(default_factory=dict)

    @property
    def y(self) -> np.ndarray:
        g = self.grid
        return 2 * g.x_min + g.h * np.arange(self.omega.size)

    @property
    def n_cont(self) -> int:
        """Number of y samples in ``[2 x_min, 2 x_max]``."""
        return 2 * (self.grid.n_points - 1) + 1


def trapezoid_weights(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, float)
    w = np.zeros_like(v)
    if v.size > 1:
        d = np.diff(v)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def fourier_synthesis(coeff, lam, y, sign: int = 1, chunk: int = 4096) -> np.ndarray:
    """``(1/2pi) int coeff(lam) exp(sign i lam y) dlam`` by the trapezoid rule."""
    coeff = np.asarray(coeff, complex)
    if np.any(~np.isfinite(coeff)):
        raise ValidationError("reflection data contain singular samples (lambda = 0 must be excluded)",
                              ["reflection.finite"])
    wc = trapezoid_weights(lam) * coeff / (2 * np.pi)
    y = np.asarray(y, float)
    out = np.empty(y.shape, complex)
    flat = y.ravel()
    res = out.ravel()
    for s in range(0, flat.size, chunk):
        yy = flat[s:s + chunk]
        res[s:s + chunk] = np.exp(sign * 1j * np.outer(yy, lam)) @ wc
    return res.reshape(y.shape)


def nyquist_check(lam, y_max: float) -> float:
    """Largest spectral step; raises if it cannot resolve ``|y| <= y_max``."""
    lam = np.asarray(lam, float)
    step = float(np.max(np.diff(lam))) if lam.size > 1 else np.inf
    if y_max > 0 and step > np.pi / y_max * (1 + 1e-12):
        raise ValidationError(
            f"spectral step {step:.4g} exceeds pi/y_max = {np.pi / y_max:.4g}; refine the spectral grid",
            ["spectral.nyquist"])
    return step


def build_kernel(R, Rbar, spectral: SpectralGrid | None, triplets: BoundStateTriplets | None,
                 grid: SpatialGrid, variant: Variant = Variant.UV,
                 decay_tol: float = KERNEL_DECAY_TOL) -> MarchenkoKernel:
    """Synthesize the kernel pair on the extended y-grid of ``grid``.

    Parameters
    ----------
    R, Rbar : array or None
        Right reflection coefficients of an energy-independent system on the
        lambda-axis grid ``spectral``.  ``None`` means reflectionless.
    triplets : BoundStateTriplets or None
    grid : SpatialGrid
        x-grid on which the Marchenko system will be solved.
    """
    triplets = triplets if triplets is not None else EMPTY_TRIPLETS
    n = grid.n_points
    h = grid.h
    y = 2 * grid.x_min + h * np.arange(4 * (n - 1) + 1)
    n_cont = 2 * (n - 1) + 1
    oc = np.zeros(y.size, complex)
    obc = np.zeros(y.size, complex)
    diag = {}
    if R is not None or Rbar is not None:
        if spectral is None:
            raise ValidationError("reflection data need a spectral grid", ["spectral"])
        lam = spectral.lam
        if spectral.axis.value != "lambda":
            raise ValidationError("kernels are synthesized on the lambda axis", ["spectral.axis"])
        y_max = max(abs(2 * grid.x_min), abs(2 * grid.x_max))
        diag["spectral_step"] = nyquist_check(lam, y_max)
        if R is not None and np.any(R):
            oc[:n_cont] = fourier_synthesis(R, lam, y[:n_cont], +1)
        if Rbar is not None and np.any(Rbar):
            obc[:n_cont] = fourier_synthesis(Rbar, lam, y[:n_cont], -1)
        for name, a in (("omega", oc), ("omega_bar", obc)):
            scale = np.abs(a[:n_cont]).max()
            tail = abs(a[n_cont - 1]) / scale if scale > 0 else 0.0
            diag[f"{name}_tail"] = float(tail)
            if tail > decay_tol:
                raise ValidationError(
                    f"{name} has not decayed at y = 2 x_max (relative {tail:.2e}); widen the x-grid",
                    [f"{name}.decay"])
    om = oc + discrete_kernel(triplets, y)
    omb = obc + discrete_kernel(triplets, y, barred=True)
    for a in (om, omb, oc, obc):
        a.setflags(write=False)
    return MarchenkoKernel(grid, om, omb, oc, obc, triplets, Variant(variant), diag)


# ---------------------------------------------------------------------------
# Nystrom solver


@dataclass(frozen=True, eq=False)
class MarchenkoRow:
    """Solution on ``t = x + k h``, ``k = 0 .. len - 1`` for one grid node."""

    index: int
    x: float
    t: np.ndarray
    K1: np.ndarray
    K1bar: np.ndarray
    K2: np.ndarray
    K2bar: np.ndarray
    residual: float
    condition: float


def _solve_checked(A, b):
    lu, piv = lu_factor(A, check_finite=False)
    anorm = np.abs(A).sum(axis=0).max()
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not cond < COND_LIMIT:
        raise ConditioningError("discretized Marchenko operator is numerically singular", cond)
    return lu_solve((lu, piv), b, check_finite=False), cond


def nystrom_row(kernel: MarchenkoKernel, i: int, discrete: str = "exact",
                _elim: "_Elimination | None" = None) -> MarchenkoRow:
    """Solve the discretized system at grid node ``i``.

    Parameters
    ----------
    discrete : {"exact", "quadrature"}
        ``"quadrature"`` puts the whole kernel, bound-state part included,
        through Simpson quadrature.  ``"exact"`` applies quadrature to the
        continuous part only and eliminates the separable bound-state part
        in closed form.  The latter stays well conditioned far to the left,
        where ``C exp(-A y) B`` grows exponentially and the plain system
        loses every significant digit.
    """
    if discrete == "quadrature" or kernel.triplets.is_empty:
        return _row_quadrature(kernel, i)
    if discrete != "exact":
        raise ValueError(f"unknown discrete treatment {discrete!r}")
    return (_elim or _Elimination(kernel)).row(i)


def _row_quadrature(kernel: MarchenkoKernel, i: int) -> MarchenkoRow:
    g = kernel.grid
    n = g.n_points
    h = g.h
    nr = 2 * (n - 1 - i) + 1
    k = np.arange(nr)
    w = nm.simpson_weights(nr, h)
    idx = 2 * i + k[:, None] + k[None, :]
    M = kernel.omega[idx] * w[None, :]
    N = kernel.omega_bar[idx] * w[None, :]
    wb = kernel.omega_bar[2 * i + k]
    wo = kernel.omega[2 * i + k]
    eye = np.eye(nr)
    K1, c1 = _solve_checked(eye - N @ M, -wb)
    K1bar = -M @ K1
    K2bar, c2 = _solve_checked(eye - M @ N, -wo)
    K2 = -N @ K2bar
    # residual of the four discretized equations
    r = np.concatenate([K1bar + M @ K1, K1 + wb + N @ K1bar,
                        K2bar + wo + M @ K2, K2 + N @ K2bar])
    scale = 1.0 + np.abs(wb).max() + np.abs(wo).max()
    res = float(np.abs(r).max() / scale)
    return MarchenkoRow(i, g.x[i], g.x[i] + h * k, K1, K1bar, K2, K2bar, res, max(c1, c2))


class _Elimination:
    """Row solver with the separable kernel part eliminated exactly.

    Each unknown splits as ``K1 = K1c + g exp(-Abar (t-x)) Bbar`` and
    ``K1bar = K1bar_c + d exp(-A (t-x)) B`` (likewise for the second pair),
    where the ``c`` parts are driven by the continuous kernel only and are
    therefore supported on ``[x, 2 x_max - x]``.  The row vectors ``g`` and
    ``d`` are affine in the moments ``a = int K1c C exp(-A(z-x)) dz`` and
    ``b = int K1bar_c Cbar exp(-Abar(z-x)) dz``; the coefficient matrices
    only involve ``M(x)^-1`` and ``Mbar(x)^-1`` from the separable closed
    form, so no exponentially large quantities are ever subtracted.
    """

    def __init__(self, kernel: MarchenkoKernel):
        self.kernel = kernel
        trip = kernel.triplets
        self.sep = SeparableSolver(trip)
        self.reflectionless = not (np.any(kernel.omega_c) or np.any(kernel.omega_bar_c))
        g = kernel.grid
        s = g.h * np.arange(2 * g.n_points - 1)
        ea = jordan_expm(trip.A, self.sep.sa, -s)
        eb = jordan_expm(trip.Abar, self.sep.sb, -s)
        # rows C exp(-A s) and columns exp(-A s) B, stacked over s
        self.UA = np.einsum("ij,sjk->sk", trip.C, ea)
        self.YA = np.einsum("sij,jk->si", ea, trip.B)
        self.UAb = np.einsum("ij,sjk->sk", trip.Cbar, eb)
        self.YAb = np.einsum("sij,jk->si", eb, trip.Bbar)

    def _coefficients(self, x):
        sep = self.sep
        t = sep.t
        S = jordan_expm(t.A, sep.sa, -2 * x)
        Sb = jordan_expm(t.Abar, sep.sb, -2 * x)
        M = jordan_expm(t.A, sep.sa, 2 * x) - sep.Q0 @ Sb @ sep.P0
        Mb = jordan_expm(t.Abar, sep.sb, 2 * x) - sep.P0 @ S @ sep.Q0
        Mi, c1 = _inverse_checked(M)
        Mbi, c2 = _inverse_checked(Mb)
        G1 = S @ sep.Q0 @ Mbi
        G2 = -Mbi
        D1 = -Mi
        D2 = Mbi @ sep.P0 @ S
        return G1, G2, D1, D2, max(c1, c2)

    def row(self, i: int) -> MarchenkoRow:
        kern = self.kernel
        g = kern.grid
        n = g.n_points
        h = g.h
        x = g.x[i]
        t = kern.triplets
        nr = 2 * (n - 1 - i) + 1
        k = np.arange(nr)
        w = nm.simpson_weights(nr, h)
        idx = 2 * i + k[:, None] + k[None, :]
        H = kern.omega_c[idx]
        Hb = kern.omega_bar_c[idx]
        wo = kern.omega_c[2 * i + k]
        wb = kern.omega_bar_c[2 * i + k]
        UA, YA = self.UA[:nr], self.YA[:nr]
        UAb, YAb = self.UAb[:nr], self.YAb[:nr]
        G1, G2, D1, D2, c_small = self._coefficients(x)
        # continuous integrals of the separable columns
        VA = (YA * w[:, None]).T @ Hb
        VAb = (YAb * w[:, None]).T @ H
        WA = UA.T * w[None, :]
        WAb = UAb.T * w[None, :]
        C, Cb = t.C.T, t.Cbar.T
        rhs = np.zeros((2 * nr, 2), complex)
        rhs[:nr, 0] = -(VAb.T @ G2.T @ Cb)[:, 0]
        rhs[nr:, 0] = -wb - (VA.T @ D2.T @ Cb)[:, 0]
        rhs[:nr, 1] = -wo - (VAb.T @ G1.T @ C)[:, 0]
        rhs[nr:, 1] = -(VA.T @ D1.T @ C)[:, 0]
        if self.reflectionless:
            # continuous parts vanish identically; only the closed form remains
            sol, c_big, res = np.zeros_like(rhs), 1.0, 0.0
        else:
            eye = np.eye(nr)
            big = np.block([[H * w[None, :] + VAb.T @ G1.T @ WA, eye + VAb.T @ G2.T @ WAb],
                            [eye + VA.T @ D1.T @ WA, Hb * w[None, :] + VA.T @ D2.T @ WAb]])
            sol, c_big = _solve_checked(big, rhs)
            r = big @ sol - rhs
            res = float(np.abs(r).max() / (1.0 + np.abs(rhs).max()))
        K1c, K1bc = sol[:nr, 0], sol[nr:, 0]
        K2c, K2bc = sol[:nr, 1], sol[nr:, 1]
        a1, b1 = WA @ K1c, WAb @ K1bc
        a2, b2 = WA @ K2c, WAb @ K2bc
        g1 = G1.T @ a1 + G2.T @ (b1 + Cb[:, 0])
        d1 = D1.T @ a1 + D2.T @ (b1 + Cb[:, 0])
        g2 = G1.T @ (a2 + C[:, 0]) + G2.T @ b2
        d2 = D1.T @ (a2 + C[:, 0]) + D2.T @ b2
        K1 = K1c + YAb @ g1
        K1bar = K1bc + YA @ d1
        K2 = K2c + YAb @ g2
        K2bar = K2bc + YA @ d2
        return MarchenkoRow(i, x, x + h * k, K1, K1bar, K2, K2bar, res, max(c_big, c_small))


def _inverse_checked(M):
    if M.size == 0:
        return np.zeros_like(M, dtype=complex), 1.0
    cond = np.linalg.cond(M)
    if not cond < COND_LIMIT:
        raise ConditioningError("bound-state matrix of the separable part is singular at this x", cond)
    return np.linalg.inv(M), float(cond)


def nystrom_solve(kernel: MarchenkoKernel, x: float, discrete: str = "exact") -> MarchenkoRow:
    """Row of the solution at the grid node nearest ``x``."""
    g = kernel.grid
    i = int(round((x - g.x_min) / g.h))
    if not 0 <= i < g.n_points or abs(g.x_min + i * g.h - x) > 1e-9 * max(1.0, abs(x)):
        raise ValidationError(f"x = {x} is not a grid node", ["x.grid"])
    return nystrom_row(kernel, i, discrete)


@dataclass(frozen=True, eq=False)
class MarchenkoSolution:
    """Kernel entries on the (x, y) grid, zero where y < x.

    Arrays have shape ``(n, 2n - 1)``; column ``j`` is ``y = x_min + j h``.
    """

    grid: SpatialGrid
    K1: np.ndarray
    K1bar: np.ndarray
    K2: np.ndarray
    K2bar: np.ndarray
    variant: Variant = Variant.UV
    diagnostics: dict = field(default_factory=dict)

    @property
    def y(self) -> np.ndarray:
        g = self.grid
        return g.x_min + g.h * np.arange(2 * g.n_points - 1)

    def diagonal(self, name: str) -> np.ndarray:
        a = getattr(self, name)
        i = np.arange(self.grid.n_points)
        return a[i, i]


def solve_all(kernel: MarchenkoKernel, discrete: str = "exact") -> MarchenkoSolution:
    """Nystrom rows at every grid node (see :func:`nystrom_row`)."""
    g = kernel.grid
    n = g.n_points
    shape = (n, 2 * n - 1)
    out = {k: np.zeros(shape, complex) for k in ("K1", "K1bar", "K2", "K2bar")}
    res = np.empty(n)
    cond = np.empty(n)
    elim = _Elimination(kernel) if discrete == "exact" and not kernel.triplets.is_empty else None
    for i in range(n):
        row = nystrom_row(kernel, i, discrete, elim)
        sl = slice(i, i + row.t.size)
        for name in out:
            out[name][i, sl] = getattr(row, name)
        res[i] = row.residual
        cond[i] = row.condition
    diag = {"residual_max": float(res.max()), "condition_max": float(cond.max())}
    return MarchenkoSolution(g, variant=kernel.variant, diagnostics=diag, **out)


# ---------------------------------------------------------------------------
# separable closed form


def _sizes(states):
    return [s.multiplicity for s in states]


class SeparableSolver:
    """Closed-form Marchenko solution for reflectionless (separable) kernels.

    With ``Abar P0 + P0 A = Bbar C`` and ``A Q0 + Q0 Abar = B Cbar``,

        Mbar(x) = exp(2 Abar x) - P0 exp(-2 A x) Q0
        M(x)    = exp(2 A x) - Q0 exp(-2 Abar x) P0
        K1(x,y)    = -Cbar Mbar^-1 exp(-Abar (y-x)) Bbar
        K1bar(x,y) =  Cbar Mbar^-1 P0 exp(-A (x+y)) B
        K2bar(x,y) = -C M^-1 exp(-A (y-x)) B
        K2(x,y)    =  C M^-1 Q0 exp(-Abar (x+y)) Bbar
    """

    def __init__(self, trip: BoundStateTriplets):
        self.t = trip
        self.sa = _sizes(trip.states)
        self.sb = _sizes(trip.bar_states)
        A, Ab = trip.A, trip.Abar
        B, Bb, C, Cb = trip.B, trip.Bbar, trip.C, trip.Cbar
        self.n, self.nb = A.shape[0], Ab.shape[0]
        if self.n and self.nb:
            self.P0 = solve_sylvester(Ab, A, Bb @ C)
            self.Q0 = solve_sylvester(A, Ab, B @ Cb)
        else:
            self.P0 = np.zeros((self.nb, self.n), complex)
            self.Q0 = np.zeros((self.n, self.nb), complex)

    def _expA(self, t):
        return jordan_expm(self.t.A, self.sa, t)

    def _expAb(self, t):
        return jordan_expm(self.t.Abar, self.sb, t)

    def _solve(self, M, rhs_row):
        # rhs_row @ M^-1
        cond = np.linalg.cond(M) if M.size else 1.0
        if not cond < COND_LIMIT:
            raise ConditioningError("separable system is singular at this x", cond)
        return np.linalg.solve(M.T, rhs_row.T).T

    def row(self, x: float, y) -> dict:
        """All four entries at ``x`` for the samples ``y`` (values with y < x are zeroed)."""
        y = np.atleast_1d(np.asarray(y, float))
        out = {k: np.zeros(y.shape, complex) for k in ("K1", "K1bar", "K2", "K2bar")}
        t = self.t
        if self.nb:
            Mb = self._expAb(2 * x) - self.P0 @ self._expA(-2 * x) @ self.Q0
            a = self._solve(Mb, t.Cbar)  # Cbar Mbar^-1
            out["K1"] = -(a @ self._expAb(-(y - x)) @ t.Bbar)[:, 0, 0]
            if self.n:
                out["K1bar"] = (a @ self.P0 @ self._expA(-(x + y)) @ t.B)[:, 0, 0]
        if self.n:
            M = self._expA(2 * x) - self.Q0 @ self._expAb(-2 * x) @ self.P0
            c = self._solve(M, t.C)
            out["K2bar"] = -(c @ self._expA(-(y - x)) @ t.B)[:, 0, 0]
            if self.nb:
                out["K2"] = (c @ self.Q0 @ self._expAb(-(x + y)) @ t.Bbar)[:, 0, 0]
        mask = y < x - 1e-12
        for v in out.values():
            v[mask] = 0
        return out

    def diagonal(self, x) -> dict:
        x = np.atleast_1d(np.asarray(x, float))
        out = {k: np.empty(x.shape, complex) for k in ("K1", "K1bar", "K2", "K2bar")}
        for j, xx in enumerate(x):
            r = self.row(xx, [xx])
            for k in out:
                out[k][j] = r[k][0]
        return out

    def potentials(self, grid: SpatialGrid, variant: Variant = Variant.UV):
        """Exact potentials and ``int_x^inf`` of their product on ``grid``."""
        d = self.diagonal(grid.x)
        pair = PotentialPair(grid, -2 * d["K1"], -2 * d["K2bar"], variant)
        return pair, 2 * d["K1bar"]


def separable_solve(trip: BoundStateTriplets, x: float, y=None) -> dict:
    """Closed-form row at ``x``; ``y`` defaults to ``[x]`` (the diagonal)."""
    return SeparableSolver(trip).row(x, [x] if y is None else y)


def separable_solution(trip: BoundStateTriplets, grid: SpatialGrid,
                       variant: Variant = Variant.UV) -> MarchenkoSolution:
    """Closed form laid out like :func:`solve_all` output."""
    s = SeparableSolver(trip)
    n = grid.n_points
    y = grid.x_min + grid.h * np.arange(2 * n - 1)
    out = {k: np.zeros((n, 2 * n - 1), complex) for k in ("K1", "K1bar", "K2", "K2bar")}
    for i, x in enumerate(grid.x):
        sl = slice(i, 2 * (n - 1) - i + 1)
        r = s.row(x, y[sl])
        for k in out:
            out[k][i, sl] = r[k]
    return MarchenkoSolution(grid, variant=variant, **out)


# ---------------------------------------------------------------------------
# potential recovery


@dataclass(frozen=True, eq=False)
class RecoveredPotentials:
    pair: PotentialPair
    product_integral: np.ndarray
    diagnostics: dict


def recover_potentials(sol: MarchenkoSolution, tol: float = 1e-6) -> RecoveredPotentials:
    """Potentials from the diagonal traces, with self-consistency residuals.

    ``diagonal_residual`` compares the two expressions for the product
    integral; ``product_residual`` compares them with the Simpson tail
    integral of the recovered ``u v``.
    """
    u = -2 * sol.diagonal("K1")
    v = -2 * sol.diagonal("K2bar")
    pint = 2 * sol.diagonal("K1bar")
    pint2 = 2 * sol.diagonal("K2")
    tail = nm.tail(u * v, sol.grid.h)
    diag = {
        "diagonal_residual": float(np.abs(pint - pint2).max()),
        "product_residual": float(np.abs(pint - tail).max()),
    }
    if diag["diagonal_residual"] > tol:
        diag["warning"] = "diagonal identity residual above tolerance"
    pair = PotentialPair(sol.grid, u, v, sol.variant)
    return RecoveredPotentials(pair, pint, diag)
