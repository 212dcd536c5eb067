import json

import numpy as np
import pytest

from edscat.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from edscat.marchenko import build_kernel, nystrom_solve
from edscat.model import (PotentialPair, ScatteringMatrixData, SpatialGrid, SpectralGrid, Variant,
                          build_triplets, load, save)

from conftest import gaussian_pair

TOL_RELATION = 1e-6
TOL_REFLECTIONLESS = 1e-3
TOL_CROSS = 2e-2
TOL_NYSTROM = 1e-8


@pytest.fixture
def files(tmp_path):
    def write(name, obj):
        path = tmp_path / name
        save(obj, path)
        return str(path)
    write.dir = tmp_path
    return write


def _report(path):
    with open(path) as fh:
        return json.load(fh)


def test_direct_zero(files):
    pot = files("zero.json", PotentialPair.zero(SpatialGrid(-4, 4, 81)))
    out = files.dir / "d.json"
    assert main(["direct", pot, "-o", str(out), "--spectral=-5:5:11"]) == EXIT_OK
    d = load(out)
    assert isinstance(d, ScatteringMatrixData)
    np.testing.assert_allclose(d.T, 1, atol=1e-12)
    np.testing.assert_allclose(d.R, 0, atol=1e-12)


def test_direct_gaussian_report(files):
    pot = files("g.json", gaussian_pair())
    out, rep, plot = (str(files.dir / n) for n in ("d.json", "r.json", "p.txt"))
    assert main(["direct", pot, "-o", out, "--spectral=-10:10:41", "--report", rep,
                 "--plot", plot]) == EXIT_OK
    r = _report(rep)
    assert r["direct.relation_residual_max"] < TOL_RELATION
    assert r["command"] == "direct" and len(r["input.potential.sha256"]) == 64
    cols = np.loadtxt(plot)
    assert cols.shape == (41, 13)


def test_report_keys_unique(files):
    pot = files("g.json", gaussian_pair())
    rep = files.dir / "r.json"
    assert main(["direct", pot, "-o", str(files.dir / "d.json"), "--spectral=-10:10:21",
                 "--report", str(rep)]) == EXIT_OK
    pairs = json.loads(rep.read_text(), object_pairs_hook=lambda kv: kv)
    keys = [k for k, _ in pairs]
    assert len(keys) == len(set(keys))
    assert all(not isinstance(v, list) or len(v) < 10 for _, v in pairs)


def test_direct_deterministic(files):
    pot = files("g.json", gaussian_pair())
    a, b = files.dir / "a.json", files.dir / "b.json"
    for out in (a, b):
        assert main(["direct", pot, "-o", str(out), "--spectral=-10:10:21"]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_malformed_input(files, capsys):
    bad = files.dir / "bad.json"
    bad.write_text('{"schema": "edscat.potential/1", "grid": ')
    out = files.dir / "d.json"
    assert main(["direct", str(bad), "-o", str(out)]) == EXIT_VALIDATION
    assert not out.exists()
    rec = json.loads(capsys.readouterr().err)
    assert rec["exit_code"] == EXIT_VALIDATION and rec["error"] == "FormatError"


def test_wrong_document_kind(files):
    data = files("d.json", ScatteringMatrixData.free(SpectralGrid.uniform(-1, 1, 4)))
    assert main(["direct", data, "-o", str(files.dir / "x.json")]) == EXIT_VALIDATION


def test_unknown_tolerance(files, capsys):
    pot = files("zero.json", PotentialPair.zero(SpatialGrid(-4, 4, 81)))
    assert main(["direct", pot, "-o", str(files.dir / "d.json"), "--tol", "nope=1"]) == EXIT_VALIDATION
    assert "unknown tolerance" in capsys.readouterr().err


def test_invert_zero(files):
    pot = files("zero.json", PotentialPair.zero(SpatialGrid(-4, 4, 81)))
    d, out = str(files.dir / "d.json"), str(files.dir / "q.json")
    assert main(["direct", pot, "-o", d, "--spectral=-20:20:400"]) == EXIT_OK
    assert main(["invert", d, "-o", out, "--grid=-4:4:41"]) == EXIT_OK
    pair = load(out)
    assert np.abs(pair.first).max() < 1e-10 and np.abs(pair.second).max() < 1e-10


def test_invert_methods_agree(files):
    pot = files("g.json", gaussian_pair())
    d = str(files.dir / "d.json")
    assert main(["direct", pot, "-o", d]) == EXIT_OK
    outs = []
    for method in ("marchenko5", "alternate"):
        out = str(files.dir / f"{method}.json")
        assert main(["invert", d, "-o", out, "--method", method]) == EXIT_OK
        outs.append(load(out))
    g = gaussian_pair()
    for k in ("first", "second"):
        diff = np.abs(getattr(outs[0], k) - getattr(outs[1], k)).max()
        assert diff / np.abs(getattr(g, k)).max() < TOL_CROSS


def test_synth_invert_direct_reflectionless(files):
    trip = files("t.json", build_triplets([(1j, 2.0)], [(-1j, 2.0)]))
    d, p, d2 = (str(files.dir / n) for n in ("d.json", "p.json", "d2.json"))
    assert main(["synth", trip, "-o", d, "--potential", p, "--variant", "qr",
                 "--grid=-12:12:481", "--spectral=-400:400:8000"]) == EXIT_OK
    assert load(p).variant is Variant.QR
    assert main(["direct", p, "-o", d2, "--spectral=-5:5:51"]) == EXIT_OK
    back = load(d2)
    assert np.abs(back.R).max() < TOL_REFLECTIONLESS
    assert np.abs(back.Rbar).max() < TOL_REFLECTIONLESS


def test_roundtrip_zero(files):
    pot = files("zero.json", PotentialPair.zero(SpatialGrid(-4, 4, 81)))
    rep = str(files.dir / "r.json")
    assert main(["roundtrip", pot, "--spectral=-20:20:400", "--report", rep]) == EXIT_OK
    r = _report(rep)
    assert r["error.q_max"] < 1e-10 and r["error.r_max"] < 1e-10


def test_roundtrip_decay_failure(files, capsys):
    pot = files("g.json", gaussian_pair(SpatialGrid(-2, 2, 41)))
    rep = files.dir / "r.json"
    assert main(["roundtrip", pot, "--report", str(rep)]) == EXIT_VALIDATION
    assert "decay" in capsys.readouterr().err
    assert not rep.exists()


def test_synth_empty(files):
    trip = files("t.json", build_triplets())
    d, p = str(files.dir / "d.json"), str(files.dir / "p.json")
    assert main(["synth", trip, "-o", d, "--potential", p, "--grid=-2:2:21"]) == EXIT_OK
    pair = load(p)
    assert not np.any(pair.first) and not np.any(pair.second)
    np.testing.assert_array_equal(load(d).T, 1)


def test_synth_one_state(files):
    # (i, 2) alone: v = 4 exp(-2x), u = 0
    trip = files("t.json", build_triplets([(1j, 2.0)]))
    p = str(files.dir / "p.json")
    assert main(["synth", trip, "-o", str(files.dir / "d.json"), "--potential", p,
                 "--grid=-1:3:41"]) == EXIT_OK
    pair = load(p)
    np.testing.assert_allclose(pair.second, 4 * np.exp(-2 * pair.grid.x), rtol=1e-12)
    assert not np.any(pair.first)


def test_synth_two_states_against_nystrom(files):
    trip = build_triplets([(0.5j, 1.0)], [(-0.5j, -0.5)])
    p = str(files.dir / "p.json")
    assert main(["synth", files("t.json", trip), "-o", str(files.dir / "d.json"), "--potential", p,
                 "--grid=0:16:481"]) == EXIT_OK
    pair = load(p)
    kern = build_kernel(None, None, None, trip, pair.grid)
    for i in (0, 60, 240):
        row = nystrom_solve(kern, pair.grid.x[i], "quadrature")
        # u = -2 K1(x, x), v = -2 K2bar(x, x)
        assert abs(-2 * row.K1[0] - pair.first[i]) < TOL_NYSTROM
        assert abs(-2 * row.K2bar[0] - pair.second[i]) < TOL_NYSTROM


def test_numerical_failure_exit_code(files, capsys):
    # (i, 2) and (-i, 2): the separable system is singular at x = 0
    trip = files("t.json", build_triplets([(1j, 2.0)], [(-1j, 2.0)]))
    d = files.dir / "d.json"
    assert main(["synth", trip, "-o", str(d), "--potential", str(files.dir / "p.json"),
                 "--grid=-1:1:11"]) == EXIT_NUMERICAL
    assert json.loads(capsys.readouterr().err)["error"] == "ConditioningError"
    assert not d.exists()
