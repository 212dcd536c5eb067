"""Domain types, grids, bound-state triplets and the JSON document format.

All value types are frozen dataclasses holding read-only numpy arrays, so they
can be shared freely.  Structural problems (wrong shapes, non-increasing
grids) are rejected at construction; semantic invariants such as tail decay
are reported by :func:`validate` and enforced by the numerical modules that
need them.
"""

from __future__ import annotations

import enum
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import FormatError, ValidationError

DECAY_TOL = 1e-10
RELATION_TOL = 1e-6


class Variant(str, enum.Enum):
    """Which system a potential pair or a scattering data set belongs to.

    ``QR`` is the energy-dependent system, whose potentials are (q, r) and
    whose coupling to the spectral parameter is (zeta q, zeta r).  ``UV`` and
    ``PS`` are the two energy-independent systems linked to it by gauge maps.
    """

    QR = "qr"
    UV = "uv"
    PS = "ps"


class Axis(str, enum.Enum):
    LAMBDA = "lambda"
    ZETA = "zeta"


def _frozen(a, dtype=complex) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _arrays_equal(a, b) -> bool:
    if a is None or b is None:
        return a is b
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and np.array_equal(a, b, equal_nan=True)


def sqrt_principal(z):
    """Principal square root, branch cut on the negative real axis."""
    return np.sqrt(np.asarray(z, dtype=complex))


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValidationError("grid ends must be finite", ["grid.finite"])
        if not self.x_min < self.x_max:
            raise ValidationError("x_min must be below x_max", ["grid.order"])
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValidationError("n_points must be an integer >= 3", ["grid.n_points"])
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @classmethod
    def parse(cls, text: str) -> "SpatialGrid":
        """Parse ``x_min:x_max:n``."""
        try:
            a, b, n = text.split(":")
            return cls(float(a), float(b), int(n))
        except ValueError as exc:
            raise FormatError("grid", f"expected x_min:x_max:n, got {text!r}") from exc


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Real spectral samples on either the lambda axis or the zeta axis."""

    values: np.ndarray
    axis: Axis = Axis.LAMBDA

    def __post_init__(self):
        v = _frozen(self.values, float)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError("spectral grid must be a non-empty 1-D array", ["spectral.shape"])
        if not np.all(np.isfinite(v)):
            raise ValidationError("spectral grid values must be finite", ["spectral.finite"])
        if v.size > 1 and np.any(np.diff(v) <= 0):
            raise ValidationError("spectral grid must be strictly increasing", ["spectral.increasing"])
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "axis", Axis(self.axis))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return (isinstance(other, SpectralGrid) and self.axis == other.axis
                and _arrays_equal(self.values, other.values))

    @property
    def lam(self) -> np.ndarray:
        """Samples mapped to the lambda axis."""
        return self.values if self.axis is Axis.LAMBDA else self.values ** 2

    @property
    def is_symmetric(self) -> bool:
        v = self.values
        return bool(np.allclose(v, -v[::-1], rtol=0, atol=1e-12 * max(1.0, np.abs(v).max())))

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int, axis=Axis.LAMBDA) -> "SpectralGrid":
        return cls(np.linspace(lo, hi, n), axis)

    @classmethod
    def parse(cls, text: str, axis=Axis.LAMBDA) -> "SpectralGrid":
        """Parse ``l_min:l_max:n`` into a uniform grid."""
        try:
            a, b, n = text.split(":")
            return cls.uniform(float(a), float(b), int(n), axis)
        except ValueError as exc:
            raise FormatError("spectral", f"expected l_min:l_max:n, got {text!r}") from exc


@dataclass(frozen=True, eq=False)
class PotentialPair:
    """Samples of two potentials on a uniform grid.

    ``first``/``second`` are (q, r), (u, v) or (p, s) depending on ``variant``.
    """

    grid: SpatialGrid
    first: np.ndarray
    second: np.ndarray
    variant: Variant = Variant.QR

    def __post_init__(self):
        first = _frozen(self.first)
        second = _frozen(self.second)
        bad = [name for name, a in (("first", first), ("second", second))
               if a.shape != (self.grid.n_points,)]
        if bad:
            raise ValidationError(
                f"sample count must equal n_points={self.grid.n_points}",
                [f"{b}.length" for b in bad])
        object.__setattr__(self, "first", first)
        object.__setattr__(self, "second", second)
        object.__setattr__(self, "variant", Variant(self.variant))

    def __eq__(self, other):
        return (isinstance(other, PotentialPair) and self.grid == other.grid
                and self.variant == other.variant
                and _arrays_equal(self.first, other.first)
                and _arrays_equal(self.second, other.second))

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @classmethod
    def zero(cls, grid: SpatialGrid, variant=Variant.QR) -> "PotentialPair":
        z = np.zeros(grid.n_points, complex)
        return cls(grid, z, z, variant)

    @classmethod
    def sample(cls, grid: SpatialGrid, f, g, variant=Variant.QR) -> "PotentialPair":
        """Sample callables ``f`` and ``g`` on ``grid``."""
        x = grid.x
        return cls(grid, np.broadcast_to(f(x), x.shape), np.broadcast_to(g(x), x.shape), variant)


# ---------------------------------------------------------------------------
# bound-state triplets


@dataclass(frozen=True)
class BoundState:
    """A bound state ``lam`` with norming constants ``c_0 .. c_{m-1}``."""

    lam: complex
    constants: tuple

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "constants", tuple(complex(c) for c in self.constants))

    @property
    def multiplicity(self) -> int:
        return len(self.constants)


def jordan_block(diag: complex, m: int) -> np.ndarray:
    """``m x m`` upper-bidiagonal block with ``diag`` on the diagonal and -1 above."""
    a = np.diag(np.full(m, diag, complex))
    if m > 1:
        a -= np.diag(np.ones(m - 1), 1)
    return a


@dataclass(frozen=True, eq=False)
class BoundStateTriplets:
    """Jordan-form triplets for both half planes.

    The unbarred triplet describes states with Im lam > 0 and gives the
    discrete part ``C exp(-A y) B``; the barred triplet describes states with
    Im lam < 0 and gives ``Cbar exp(-Abar y) Bbar``.  ``A`` has blocks with
    diagonal ``-i lam_j`` and ``Abar`` has blocks with diagonal ``+i lambar_j``
    so that both exponentials decay for y > 0.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    states: tuple = ()
    bar_states: tuple = ()

    def __post_init__(self):
        for name in ("A", "B", "C", "Abar", "Bbar", "Cbar"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "bar_states", tuple(self.bar_states))

    def __eq__(self, other):
        if not isinstance(other, BoundStateTriplets):
            return False
        return (self.states == other.states and self.bar_states == other.bar_states
                and all(_arrays_equal(getattr(self, k), getattr(other, k))
                        for k in ("A", "B", "C", "Abar", "Bbar", "Cbar")))

    @property
    def eigenvalues(self) -> list:
        return [s.lam for s in self.states]

    @property
    def multiplicities(self) -> list:
        return [s.multiplicity for s in self.states]

    @property
    def bar_eigenvalues(self) -> list:
        return [s.lam for s in self.bar_states]

    @property
    def bar_multiplicities(self) -> list:
        return [s.multiplicity for s in self.bar_states]

    @property
    def N(self) -> int:
        return len(self.states)

    @property
    def Nbar(self) -> int:
        return len(self.bar_states)

    @property
    def is_empty(self) -> bool:
        return not self.states and not self.bar_states

    def with_constants(self, constants, bar_constants) -> "BoundStateTriplets":
        """Same eigenvalues, new norming constants (one sequence per state)."""
        return build_triplets(
            [(s.lam, c) for s, c in zip(self.states, constants)],
            [(s.lam, c) for s, c in zip(self.bar_states, bar_constants)])


def _as_states(items, barred: bool) -> list:
    states, problems = [], []
    for j, item in enumerate(items):
        if isinstance(item, BoundState):
            st = item
        else:
            lam, consts = item[0], item[-1]
            if np.isscalar(consts):
                consts = (consts,)
            st = BoundState(lam, consts)
            if len(item) == 3 and int(item[1]) != st.multiplicity:
                problems.append(f"{'bar_' if barred else ''}states[{j}].constant_count")
        if st.multiplicity < 1:
            problems.append(f"{'bar_' if barred else ''}states[{j}].multiplicity")
        im = st.lam.imag
        if (barred and not im < 0) or (not barred and not im > 0):
            problems.append(f"{'bar_' if barred else ''}states[{j}].half_plane")
        states.append(st)
    return states, problems


def _block_diag(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), complex)
    i = 0
    for b in blocks:
        m = b.shape[0]
        out[i:i + m, i:i + m] = b
        i += m
    return out


def _assemble(states, sign: complex):
    blocks, bs, cs = [], [], []
    for st in states:
        m = st.multiplicity
        blocks.append(jordan_block(sign * st.lam, m))
        b = np.zeros(m, complex)
        b[-1] = 1.0
        bs.append(b)
        cs.append(np.array(st.constants[::-1], complex))
    a = _block_diag(blocks)
    b = np.concatenate(bs).reshape(-1, 1) if bs else np.zeros((0, 1), complex)
    c = np.concatenate(cs).reshape(1, -1) if cs else np.zeros((1, 0), complex)
    return a, b, c


def build_triplets(bound_states: Sequence = (), bar_bound_states: Sequence = ()) -> BoundStateTriplets:
    """Assemble Jordan-form triplets from bound-state lists.

    Parameters
    ----------
    bound_states, bar_bound_states : sequence
        Items are :class:`BoundState`, ``(lam, constants)`` or
        ``(lam, m, constants)``.  ``constants`` lists ``c_0 .. c_{m-1}``;
        a scalar stands for a simple state.

    Returns
    -------
    BoundStateTriplets
        ``C`` stores the constants highest index first, so that
        ``C exp(-A y) B = exp(i lam y) * sum_k c_k y**k / k!`` per block.
    """
    states, p1 = _as_states(bound_states, barred=False)
    bar_states, p2 = _as_states(bar_bound_states, barred=True)
    if p1 or p2:
        raise ValidationError("invalid bound-state list", p1 + p2)
    a, b, c = _assemble(states, -1j)
    abar, bbar, cbar = _assemble(bar_states, 1j)
    return BoundStateTriplets(a, b, c, abar, bbar, cbar, tuple(states), tuple(bar_states))


EMPTY_TRIPLETS = build_triplets()


def _block_sizes(states) -> list:
    return [s.multiplicity for s in states]


def jordan_expm(M: np.ndarray, sizes: Sequence[int], t) -> np.ndarray:
    """``exp(t M)`` for block-diagonal ``M`` whose blocks are diagonal-constant
    upper-triangular with nilpotent remainder (Jordan form).

    Uses ``exp(t d) * sum_k (t N)^k / k!`` per block; the sum is finite.
    An array ``t`` gives a stack of shape ``t.shape + M.shape``.
    """
    t = np.asarray(t, float)
    tt = t[..., None, None]
    out = np.zeros(t.shape + M.shape, dtype=complex)
    i = 0
    for m in sizes:
        blk = M[i:i + m, i:i + m]
        d = blk[0, 0]
        nil = blk - d * np.eye(m)
        term = np.broadcast_to(np.eye(m, dtype=complex), t.shape + (m, m))
        acc = term.copy()
        for k in range(1, m):
            term = tt * (term @ nil) / k
            acc = acc + term
        out[..., i:i + m, i:i + m] = np.exp(tt * d) * acc
        i += m
    return out


def _closure(states, y, sign, barred: bool):
    """sum_j exp(-a_j y) sum_k c_jk y^k/k! with a_j = sign*lam_j."""
    y = np.asarray(y, float)
    out = np.zeros(y.shape, complex)
    for st in states:
        a = sign * st.lam
        poly = np.zeros(y.shape, complex)
        fact = 1.0
        for k, c in enumerate(st.constants):
            if k:
                fact *= k
            poly += c * y ** k / fact
        out += np.exp(-a * y) * poly
    return out


def discrete_kernel(trip: BoundStateTriplets, y, barred: bool = False) -> np.ndarray:
    """``C exp(-A y) B`` (or the barred analog) at the samples ``y``."""
    if barred:
        return _closure(trip.bar_states, y, 1j, True)
    return _closure(trip.states, y, -1j, False)


def discrete_tail(trip: BoundStateTriplets, y, barred: bool = False) -> np.ndarray:
    """``int_y^inf C exp(-A z) B dz = C A^{-1} exp(-A y) B`` (or barred)."""
    states = trip.bar_states if barred else trip.states
    sign = 1j if barred else -1j
    y = np.asarray(y, float)
    out = np.zeros(y.shape, complex)
    for st in states:
        a = sign * st.lam
        m = st.multiplicity
        # exp(-A_j y) B_j: component m-1-k carries y^k/k!
        vec = np.zeros((m,) + y.shape, complex)
        fact = 1.0
        for k in range(m):
            if k:
                fact *= k
            vec[m - 1 - k] = y ** k / fact
        vec = vec * np.exp(-a * y)
        blk = jordan_block(a, m)
        sol = np.linalg.solve(blk, vec.reshape(m, -1)).reshape(vec.shape)
        c = np.array(st.constants[::-1], complex)
        out += np.tensordot(c, sol, axes=1)
    return out


# ---------------------------------------------------------------------------
# scattering data


_COEFFS = ("T", "R", "L", "Tbar", "Rbar", "Lbar")


@dataclass(frozen=True, eq=False)
class ScatteringMatrixData:
    """Scattering coefficients sampled on a real spectral grid.

    NaN entries mark samples where a coefficient could not be formed (a
    vanishing Wronskian denominator or a 1/sqrt(lambda) singularity).
    ``diagnostics`` is free-form, neither serialized nor compared.
    """

    grid: SpectralGrid
    T: np.ndarray
    R: np.ndarray
    L: np.ndarray
    Tbar: np.ndarray
    Rbar: np.ndarray
    Lbar: np.ndarray
    variant: Variant = Variant.QR
    phase: complex | None = None
    bound_states: BoundStateTriplets | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.grid)
        bad = []
        for k in _COEFFS:
            a = _frozen(getattr(self, k))
            if a.shape != (n,):
                bad.append(f"{k}.length")
            object.__setattr__(self, k, a)
        if bad:
            raise ValidationError(f"coefficient sample counts must equal grid size {n}", bad)
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.phase is not None:
            object.__setattr__(self, "phase", complex(self.phase))

    def __eq__(self, other):
        return (isinstance(other, ScatteringMatrixData) and self.grid == other.grid
                and self.variant == other.variant and self.phase == other.phase
                and self.bound_states == other.bound_states
                and all(_arrays_equal(getattr(self, k), getattr(other, k)) for k in _COEFFS))

    @property
    def lam(self) -> np.ndarray:
        return self.grid.lam

    @property
    def singular(self) -> np.ndarray:
        """Mask of samples where any coefficient is NaN."""
        return np.any([np.isnan(getattr(self, k)) for k in _COEFFS], axis=0)

    def relation_residual(self) -> np.ndarray:
        """Pointwise max of |L + Rbar T / Tbar| and |Lbar + R Tbar / T|."""
        with np.errstate(all="ignore"):
            r1 = np.abs(self.L + self.Rbar * self.T / self.Tbar)
            r2 = np.abs(self.Lbar + self.R * self.Tbar / self.T)
        return np.fmax(r1, r2)

    def replace(self, **kw) -> "ScatteringMatrixData":
        vals = {k: getattr(self, k) for k in ("grid",) + _COEFFS
                + ("variant", "phase", "bound_states", "diagnostics")}
        vals.update(kw)
        return ScatteringMatrixData(**vals)

    @classmethod
    def free(cls, grid: SpectralGrid, variant=Variant.QR, bound_states=None) -> "ScatteringMatrixData":
        """Reflectionless data with unit transmission (bound states excluded from T)."""
        n = len(grid)
        one, zero = np.ones(n, complex), np.zeros(n, complex)
        return cls(grid, one, zero, zero, one, zero, zero, variant, bound_states=bound_states)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: Any = None
    detail: str = ""

    def __str__(self):
        where = "" if self.index is None else f"[{self.index}]"
        return f"{self.invariant}{where}: {self.detail}"


def _decay(name, a, tol):
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        i = int(np.flatnonzero(~np.isfinite(a))[0])
        return [Violation(f"{name}.finite", i, "non-finite sample")]
    scale = np.abs(a).max()
    out = []
    for i in (0, a.size - 1):
        if abs(a[i]) > tol * scale:
            out.append(Violation("decay", f"{name}:{i}",
                                 f"|{name}|={abs(a[i]):.3e} exceeds {tol:g} x max {scale:.3e}"))
    return out


def _triplet_violations(t: BoundStateTriplets) -> list:
    out = []
    for barred, states, a, b, c in ((False, t.states, t.A, t.B, t.C),
                                    (True, t.bar_states, t.Abar, t.Bbar, t.Cbar)):
        pre = "bar_" if barred else ""
        n = sum(s.multiplicity for s in states)
        if a.shape != (n, n) or b.shape != (n, 1) or c.shape != (1, n):
            out.append(Violation(f"{pre}triplet.shape", None, "block dimensions disagree with multiplicities"))
            continue
        i = 0
        for j, s in enumerate(states):
            im = s.lam.imag
            if (barred and not im < 0) or (not barred and not im > 0):
                out.append(Violation(f"{pre}triplet.half_plane", j, f"lambda={s.lam}"))
            m = s.multiplicity
            want = jordan_block((1j if barred else -1j) * s.lam, m)
            if not np.array_equal(a[i:i + m, i:i + m], want):
                out.append(Violation(f"{pre}triplet.jordan_form", j, "block is not the Jordan block of lambda"))
            bj = np.zeros(m)
            bj[-1] = 1
            if not np.array_equal(b[i:i + m, 0], bj):
                out.append(Violation(f"{pre}triplet.B", j, "B block must be the last unit vector"))
            i += m
        off = a.copy()
        i = 0
        for m in _block_sizes(states):
            off[i:i + m, i:i + m] = 0
            i += m
        if np.any(off != 0):
            out.append(Violation(f"{pre}triplet.block_diagonal", None, "nonzero entries off the blocks"))
    return out


def validate(value, decay_tol: float = DECAY_TOL, relation_tol: float = RELATION_TOL) -> list:
    """List the invariant violations of ``value`` (empty when valid)."""
    if isinstance(value, PotentialPair):
        return _decay("first", value.first, decay_tol) + _decay("second", value.second, decay_tol)
    if isinstance(value, BoundStateTriplets):
        return _triplet_violations(value)
    if isinstance(value, ScatteringMatrixData):
        out = []
        n = len(value.grid)
        for k in _COEFFS:
            if getattr(value, k).shape != (n,):
                out.append(Violation(f"{k}.length", None, "sample count differs from grid"))
        if out:
            return out
        res = value.relation_residual()
        for i in np.flatnonzero(res > relation_tol):
            out.append(Violation("reflection_relation", int(i), f"residual {res[i]:.3e}"))
        if value.bound_states is not None:
            out += _triplet_violations(value.bound_states)
        return out
    if isinstance(value, SpatialGrid | SpectralGrid):
        return []
    raise TypeError(f"cannot validate {type(value).__name__}")


def require_valid(value, **kw) -> None:
    v = validate(value, **kw)
    if v:
        raise ValidationError("; ".join(str(x) for x in v[:5]), v)


# ---------------------------------------------------------------------------
# serialization

SCHEMAS = {"potential-pair/1", "scattering-data/1", "triplets/1"}


def _c_out(a) -> dict:
    a = np.asarray(a, complex)
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _c_in(doc, key, n=None) -> np.ndarray:
    try:
        d = doc[key]
        re, im = d["re"], d["im"]
    except (KeyError, TypeError) as exc:
        raise FormatError(key, "missing complex array with re/im parts") from exc
    try:
        re = np.array(re, float)
        im = np.array(im, float)
    except (TypeError, ValueError) as exc:
        raise FormatError(key, "non-numeric entries") from exc
    if re.ndim != 1 or re.shape != im.shape:
        raise FormatError(key, "re and im must be flat arrays of equal length")
    # assign parts separately: re + 1j*im would turn -0.0 into +0.0
    out = np.empty(re.shape, complex)
    out.real, out.imag = re, im
    if n is not None and out.size != n:
        raise ValidationError(f"{key}: length {out.size} differs from grid size {n}", [f"{key}.length"])
    return out


def _get(doc, key, kind=None):
    try:
        v = doc[key]
    except (KeyError, TypeError) as exc:
        raise FormatError(key, "missing field") from exc
    if kind is not None and not isinstance(v, kind):
        raise FormatError(key, f"expected {kind.__name__ if isinstance(kind, type) else kind}")
    return v


def _triplets_doc(t: BoundStateTriplets) -> dict:
    def states(ss):
        return [{"lam": [s.lam.real, s.lam.imag], "constants": _c_out(s.constants)} for s in ss]
    return {"schema": "triplets/1", "states": states(t.states), "bar_states": states(t.bar_states)}


def _triplets_from(doc) -> BoundStateTriplets:
    def states(key):
        out = []
        for j, s in enumerate(_get(doc, key, list)):
            lam = _get(s, "lam", list)
            if len(lam) != 2:
                raise FormatError(f"{key}[{j}].lam", "expected [re, im]")
            out.append((complex(float(lam[0]), float(lam[1])), _c_in(s, "constants")))
        return out
    return build_triplets(states("states"), states("bar_states"))


def to_document(value) -> dict:
    """Plain-dict document for a value type."""
    if isinstance(value, PotentialPair):
        g = value.grid
        return {"schema": "potential-pair/1", "variant": value.variant.value,
                "grid": {"x_min": g.x_min, "x_max": g.x_max, "n_points": g.n_points},
                "first": _c_out(value.first), "second": _c_out(value.second)}
    if isinstance(value, BoundStateTriplets):
        return _triplets_doc(value)
    if isinstance(value, ScatteringMatrixData):
        doc = {"schema": "scattering-data/1", "variant": value.variant.value,
               "grid": {"axis": value.grid.axis.value, "values": value.grid.values.tolist()}}
        for k in _COEFFS:
            doc[k] = _c_out(getattr(value, k))
        doc["phase"] = None if value.phase is None else [value.phase.real, value.phase.imag]
        if value.bound_states is not None:
            doc["bound_states"] = _triplets_doc(value.bound_states)
        return doc
    raise TypeError(f"cannot serialize {type(value).__name__}")


def from_document(doc):
    if not isinstance(doc, dict):
        raise FormatError("document", "top level must be an object")
    schema = _get(doc, "schema", str)
    if schema not in SCHEMAS:
        raise FormatError("schema", f"unknown schema {schema!r}")
    if schema == "triplets/1":
        return _triplets_from(doc)
    try:
        variant = Variant(_get(doc, "variant", str))
    except ValueError as exc:
        raise FormatError("variant", "unknown variant") from exc
    g = _get(doc, "grid", dict)
    if schema == "potential-pair/1":
        try:
            grid = SpatialGrid(float(_get(g, "x_min")), float(_get(g, "x_max")), _get(g, "n_points", int))
        except (TypeError, ValueError) as exc:
            raise FormatError("grid", str(exc)) from exc
        n = grid.n_points
        return PotentialPair(grid, _c_in(doc, "first", n), _c_in(doc, "second", n), variant)
    try:
        axis = Axis(_get(g, "axis", str))
    except ValueError as exc:
        raise FormatError("grid.axis", "unknown axis") from exc
    try:
        values = np.array(_get(g, "values", list), float)
    except (TypeError, ValueError) as exc:
        raise FormatError("grid.values", "non-numeric entries") from exc
    grid = SpectralGrid(values, axis)
    coeffs = {k: _c_in(doc, k, len(grid)) for k in _COEFFS}
    ph = doc.get("phase")
    if ph is not None:
        if not (isinstance(ph, list) and len(ph) == 2):
            raise FormatError("phase", "expected [re, im] or null")
        ph = complex(float(ph[0]), float(ph[1]))
    bs = doc.get("bound_states")
    if bs is not None:
        bs = _triplets_from(bs)
    return ScatteringMatrixData(grid, variant=variant, phase=ph, bound_states=bs, **coeffs)


def serialize(value) -> bytes:
    """Encode as a JSON document (floats in shortest round-trip form)."""
    return json.dumps(to_document(value), allow_nan=True).encode("utf-8")


def deserialize(data: bytes | str):
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError("document", f"not a complete JSON document ({exc})") from exc
    return from_document(doc)


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(value, path) -> None:
    atomic_write(path, serialize(value))


def load(path):
    with open(path, "rb") as fh:
        return deserialize(fh.read())
