"""Command-line front end.

    edscat direct POT -o DATA [--spectral a:b:n] [--bound-states]
    edscat invert DATA -o POT [--grid a:b:n] [--method marchenko5|alternate]
    edscat roundtrip POT [--spectral a:b:n] [--grid a:b:n] [--method ...]
    edscat synth TRIPLETS -o DATA --potential POT [--variant uv|qr]

Every command accepts ``--report PATH`` (flat JSON key/value document),
``--plot PATH`` (whitespace-separated columns) and repeated
``--tol NAME=VALUE``.  Exit status is 0 on success, 2 for invalid input and
3 for numerical failure; on failure nothing is written and a JSON error
record goes to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .altmarchenko import invert_alt
from .direct import (BoundStateSearchRegion, DirectConfig, find_bound_states,
                     scattering_coefficients, simple_norming_constants)
from .errors import EdscatError, FormatError, NumericalError, ValidationError
from .inverse import invert
from .marchenko import KERNEL_DECAY_TOL, separable_solution
from .model import (DECAY_TOL, RELATION_TOL, Axis, BoundStateTriplets, PotentialPair,
                    ScatteringMatrixData, SpatialGrid, SpectralGrid, Variant, atomic_write,
                    build_triplets, deserialize, require_valid, serialize)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_SPECTRAL = "-40:40:800"
MAX_INVERSION_POINTS = 201

TOLERANCES = {
    "decay": DECAY_TOL,
    "relation": RELATION_TOL,
    "kernel_decay": KERNEL_DECAY_TOL,
    "drift": DirectConfig().drift_tol,
    "singular": DirectConfig().singular_tol,
}


# ---------------------------------------------------------------------------
# helpers


class _Run:
    """Collects report entries and pending output files."""

    def __init__(self, command: str):
        self.command = command
        self.report: dict = {"command": command, "version": __version__}
        self.outputs: list = []
        self.t0 = time.perf_counter()

    def digest(self, name: str, data: bytes):
        self.report[f"input.{name}.sha256"] = hashlib.sha256(data).hexdigest()

    def put(self, prefix: str, values: dict):
        for k, v in values.items():
            _flatten(self.report, f"{prefix}.{k}" if prefix else k, v)

    def add_output(self, kind: str, path, data: bytes | str):
        self.outputs.append((kind, path, data))

    def commit(self, report_path):
        # encode everything before the first write so a failure leaves no files
        for kind, path, _ in self.outputs:
            self.report[f"output.{kind}"] = str(path)
        self.report["wall_time"] = time.perf_counter() - self.t0
        files = list(self.outputs)
        if report_path:
            files.append(("report", report_path, json.dumps(self.report, indent=1, sort_keys=True)))
        for _, path, data in files:
            atomic_write(path, data)


def _flatten(out: dict, key: str, v):
    if key in out:
        raise KeyError(f"duplicate report key {key}")
    if isinstance(v, np.ndarray):
        return  # per-sample arrays belong in plot files, not the report
    if isinstance(v, dict):
        for k, w in v.items():
            _flatten(out, f"{key}.{k}", w)
    elif isinstance(v, (complex, np.complexfloating)):
        out[f"{key}.re"] = float(v.real)
        out[f"{key}.im"] = float(v.imag)
    elif isinstance(v, (np.integer,)):
        out[key] = int(v)
    elif isinstance(v, (float, np.floating)):
        out[key] = float(v)
    elif isinstance(v, (list, tuple)):
        out[key] = [int(x) if isinstance(x, (int, np.integer)) else float(x) for x in v]
    else:
        out[key] = v


def _read(path, run: _Run, name: str):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(name, f"cannot read {path}: {exc.strerror}") from exc
    run.digest(name, data)
    return deserialize(data)


def _expect(value, cls, name):
    if not isinstance(value, cls):
        raise FormatError(name, f"expected a {cls.__name__} document, got {type(value).__name__}")
    return value


def _tolerances(items) -> dict:
    tol = dict(TOLERANCES)
    for item in items or ():
        name, sep, val = item.partition("=")
        if not sep or name not in tol:
            raise ValidationError(f"unknown tolerance {item!r}; known: {', '.join(sorted(tol))}",
                                  ["tol.name"])
        try:
            tol[name] = float(val)
        except ValueError as exc:
            raise ValidationError(f"tolerance {name} needs a number", ["tol.value"]) from exc
    return tol


def _config(tol) -> DirectConfig:
    return DirectConfig(truncation_tol=tol["decay"], drift_tol=tol["drift"], singular_tol=tol["singular"])


def _columns(header: str, x, arrays) -> str:
    cols = [np.asarray(x, float)]
    for a in arrays:
        a = np.asarray(a, complex)
        cols += [a.real, a.imag]
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(cols), header=header, fmt="%.17g")
    return buf.getvalue()


def _plot_potential(pot: PotentialPair) -> str:
    a, b = {"qr": ("q", "r"), "uv": ("u", "v"), "ps": ("p", "s")}[pot.variant.value]
    return _columns(f"x re_{a} im_{a} re_{b} im_{b}", pot.grid.x, [pot.first, pot.second])


def _plot_data(d: ScatteringMatrixData) -> str:
    names = ("T", "R", "L", "Tbar", "Rbar", "Lbar")
    head = d.grid.axis.value + " " + " ".join(f"re_{k} im_{k}" for k in names)
    return _columns(head, d.grid.values, [getattr(d, k) for k in names])


def _subsampled(grid: SpatialGrid, cap: int = MAX_INVERSION_POINTS) -> SpatialGrid:
    step = max(1, -(-(grid.n_points - 1) // (cap - 1)))
    n = (grid.n_points - 1) // step + 1
    return SpatialGrid(grid.x_min, grid.x_min + (n - 1) * step * grid.h, n)


def _resample(pot: PotentialPair, grid: SpatialGrid):
    x = pot.grid.x
    if grid.x_min < x[0] - 1e-12 or grid.x_max > x[-1] + 1e-12:
        raise ValidationError("inversion grid must lie inside the potential grid", ["grid.range"])
    xs = grid.x
    return [CubicSpline(x, a.real)(xs) + 1j * CubicSpline(x, a.imag)(xs) for a in (pot.first, pot.second)]


# ---------------------------------------------------------------------------
# commands


def _search_bound_states(pot, cfg, region_text):
    vals = [float(v) for v in region_text.split(":")] if region_text else [-10, 10, 1e-3, 10]
    if len(vals) != 4:
        raise FormatError("search", "expected re_min:re_max:im_min:im_max")
    up = BoundStateSearchRegion(vals[0], vals[1], vals[2], vals[3])
    found = find_bound_states(pot, up, cfg)
    found_bar = find_bound_states(pot, up.lower(), cfg)
    states, bar_states = [], []
    for lam, m in found:
        c, _ = simple_norming_constants(pot, lam, cfg, barred=False, multiplicity=m)
        states.append((lam, c))
    for lam, m in found_bar:
        c, _ = simple_norming_constants(pot, lam, cfg, barred=True, multiplicity=m)
        bar_states.append((lam, c))
    return build_triplets(states, bar_states)


def cmd_direct(args, run: _Run):
    tol = _tolerances(args.tol)
    pot = _expect(_read(args.potential, run, "potential"), PotentialPair, "potential")
    require_valid(pot, decay_tol=tol["decay"])
    cfg = _config(tol)
    lam_grid = SpectralGrid.parse(args.spectral, Axis(args.axis))
    data = scattering_coefficients(pot, lam_grid, cfg)
    if args.bound_states:
        trip = _search_bound_states(pot, cfg, args.search)
        data = data.replace(bound_states=trip)
        run.put("bound_states", {"count": trip.N, "bar_count": trip.Nbar})
    run.put("direct", data.diagnostics)
    run.add_output("data", args.output, serialize(data))
    if args.plot:
        run.add_output("plot", args.plot, _plot_data(data))


def _invert(data, grid, method, tol):
    if method == "alternate":
        res = invert_alt(data, grid, relation_tol=tol["relation"], kernel_decay_tol=tol["kernel_decay"])
    else:
        res = invert(data, grid, relation_tol=tol["relation"], kernel_decay_tol=tol["kernel_decay"])
    return res.pair, res.diagnostics


def cmd_invert(args, run: _Run):
    tol = _tolerances(args.tol)
    data = _expect(_read(args.data, run, "data"), ScatteringMatrixData, "data")
    grid = SpatialGrid.parse(args.grid)
    pair, diag = _invert(data, grid, args.method, tol)
    run.put("invert", diag)
    run.report["method"] = args.method
    run.add_output("potential", args.output, serialize(pair))
    if args.plot:
        run.add_output("plot", args.plot, _plot_potential(pair))


def cmd_roundtrip(args, run: _Run):
    tol = _tolerances(args.tol)
    pot = _expect(_read(args.potential, run, "potential"), PotentialPair, "potential")
    if pot.variant is not Variant.QR:
        raise ValidationError("round trips start from a (q, r) pair", ["variant"])
    require_valid(pot, decay_tol=tol["decay"])
    cfg = _config(tol)
    lam_grid = SpectralGrid.parse(args.spectral)
    t = time.perf_counter()
    data = scattering_coefficients(pot, lam_grid, cfg)
    run.put("direct", data.diagnostics)
    run.report["direct.wall_time"] = time.perf_counter() - t
    if args.grid:
        grid = SpatialGrid.parse(args.grid)
        q0, r0 = _resample(pot, grid)
    else:
        grid = _subsampled(pot.grid)
        step = round(grid.h / pot.grid.h)
        q0, r0 = pot.first[::step][:grid.n_points], pot.second[::step][:grid.n_points]
    t = time.perf_counter()
    pair, diag = _invert(data, grid, args.method, tol)
    run.report["invert.wall_time"] = time.perf_counter() - t
    run.put("invert", diag)
    run.report["method"] = args.method
    eq = float(np.abs(pair.first - q0).max())
    er = float(np.abs(pair.second - r0).max())
    nq, nr = float(np.abs(q0).max()), float(np.abs(r0).max())
    run.put("error", {"q_max": eq, "r_max": er,
                      "q_relative": eq / nq if nq else eq, "r_relative": er / nr if nr else er})
    if args.output:
        run.add_output("potential", args.output, serialize(pair))
    if args.plot:
        run.add_output("plot", args.plot, _plot_potential(pair))


def _reflectionless(trip: BoundStateTriplets, lam_grid: SpectralGrid, variant: Variant) -> ScatteringMatrixData:
    lam = lam_grid.lam.astype(complex)
    T = np.ones_like(lam)
    phase = 1.0 + 0j
    for st in trip.states:
        T = T / (lam - st.lam) ** st.multiplicity
        phase /= (-st.lam) ** st.multiplicity
    for st in trip.bar_states:
        T = T * (lam - st.lam) ** st.multiplicity
        phase *= (-st.lam) ** st.multiplicity
    z = np.zeros_like(lam)
    if variant is Variant.UV:
        return ScatteringMatrixData(lam_grid, T=T, R=z, L=z, Tbar=1 / T, Rbar=z, Lbar=z,
                                    variant=Variant.UV, bound_states=trip)
    # T(0) = 1 for the energy-dependent system fixes exp(i mu/2) = T_uv(0)
    return ScatteringMatrixData(lam_grid, T=T / phase, R=z, L=z, Tbar=phase / T, Rbar=z, Lbar=z,
                                variant=Variant.QR, phase=phase, bound_states=trip)


def cmd_synth(args, run: _Run):
    tol = _tolerances(args.tol)
    trip = _expect(_read(args.triplets, run, "triplets"), BoundStateTriplets, "triplets")
    require_valid(trip)
    lam_grid = SpectralGrid.parse(args.spectral)
    grid = SpatialGrid.parse(args.grid)
    variant = Variant(args.variant)
    if variant is Variant.QR and np.any(lam_grid.values == 0):
        raise ValidationError("lambda = 0 must be excluded from the grid", ["spectral.zero"])
    data = _reflectionless(trip, lam_grid, variant)
    if variant is Variant.UV:
        sol = separable_solution(trip, grid, Variant.UV)
        pair = PotentialPair(grid, -2 * sol.diagonal("K1"), -2 * sol.diagonal("K2bar"), Variant.UV)
    else:
        pair, diag = _invert(data, grid, "marchenko5", tol)
        run.put("invert", diag)
    run.report["states"] = trip.N
    run.report["bar_states"] = trip.Nbar
    run.add_output("data", args.output, serialize(data))
    run.add_output("potential", args.potential, serialize(pair))
    if args.plot:
        run.add_output("plot", args.plot, _plot_potential(pair))


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edscat", description="Direct and inverse scattering for "
                                 "the energy-dependent 2x2 system.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--report", help="write a flat JSON report here")
        p.add_argument("--plot", help="write plot-ready columns here")
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help=f"override a tolerance ({', '.join(sorted(TOLERANCES))})")

    p = sub.add_parser("direct", help="scattering data of a potential pair")
    p.add_argument("potential")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--spectral", default=DEFAULT_SPECTRAL, help="l_min:l_max:n (default %(default)s)")
    p.add_argument("--axis", choices=[a.value for a in Axis], default="lambda")
    p.add_argument("--bound-states", action="store_true", help="search both half planes")
    p.add_argument("--search", help="re_min:re_max:im_min:im_max of the upper search box")
    common(p)
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("invert", help="recover (q, r) from scattering data")
    p.add_argument("data")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--grid", default="-8:8:161", help="x_min:x_max:n (default %(default)s)")
    p.add_argument("--method", choices=["marchenko5", "alternate"], default="marchenko5")
    common(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("roundtrip", help="direct, invert and compare")
    p.add_argument("potential")
    p.add_argument("-o", "--output", help="also write the recovered pair")
    p.add_argument("--spectral", default=DEFAULT_SPECTRAL)
    p.add_argument("--grid", help="inversion grid (default: the input grid thinned to "
                   f"at most {MAX_INVERSION_POINTS} points)")
    p.add_argument("--method", choices=["marchenko5", "alternate"], default="marchenko5")
    common(p)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("synth", help="reflectionless data and exact potentials from triplets")
    p.add_argument("triplets")
    p.add_argument("-o", "--output", required=True, help="scattering-data file")
    p.add_argument("--potential", required=True, help="exact potential file")
    p.add_argument("--spectral", default=DEFAULT_SPECTRAL)
    p.add_argument("--grid", default="-8:8:161")
    p.add_argument("--variant", choices=["uv", "qr"], default="uv")
    common(p)
    p.set_defaults(func=cmd_synth)
    return ap


def _error_record(exc: Exception, code: int) -> str:
    rec = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    step = getattr(exc, "step", None)
    if step:
        rec["step"] = step
    viol = getattr(exc, "violations", None)
    if viol:
        rec["violations"] = [str(v) for v in viol]
    return json.dumps(rec)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = _Run(args.command)
    try:
        args.func(args, run)
        run.commit(args.report)
    except ValidationError as exc:
        print(_error_record(exc, EXIT_VALIDATION), file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, EdscatError) as exc:
        print(_error_record(exc, EXIT_NUMERICAL), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
