"""Acceptance checks, one group per criterion.

Run with ``pytest tests/test_acceptance.py`` (or ``python3 tests/test_acceptance.py``);
the terminal summary prints one PASS/FAIL line per criterion.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest

from proxim import gallery, geometry, maps, properties, solver
from proxim.geometry import EUCLIDEAN, SUP, Box, FiniteCloud, NormTag, Point, Segment

c1, c2, c3, c4, c5, c6 = (pytest.mark.criterion(n) for n in range(1, 7))


def cli(*args, out=None):
    """Run the installed CLI in a fresh interpreter; returns (code, report, seconds)."""
    argv = [sys.executable, "-m", "proxim", *args]
    if out is not None:
        argv += ["--out", str(out)]
    start = time.perf_counter()
    proc = subprocess.run(argv, capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    report = json.loads(proc.stdout) if proc.stdout.startswith("{") else None
    return proc.returncode, report, elapsed


# ---------------------------------------------------------------------------
# 1. interval instance


@c1
@pytest.mark.parametrize("u0", ["1", "1.5", "2"])
def test_c1_interval_solve(u0):
    code, rep, elapsed = cli("solve", "intervals-psi", "--tol", "1e-9", "--u0", u0)
    res = rep["results"]
    assert code == 0 and rep["verdict"] == "Converged"
    assert abs(res["u_star"][0] - 1.0) <= 1e-8
    assert abs(res["companion"][0] + 1.0) <= 1e-8
    assert res["set_distance"] == 2.0
    assert res["residual"] <= 1e-9
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2. strongly-UC falsification on the sup-norm segments


@c2
def test_c2_strongly_uc_witness():
    code, rep, elapsed = cli("props", "uc-not-suc", "--property", "strongly-uc", "--delta", "1e-3",
                             "--epsilon", "0.4", "--budget", "20000")
    w = rep["results"]["best_witness"]
    assert code == 1 and rep["verdict"] == properties.VIOLATION_CANDIDATE
    assert w["defect"] <= 1e-3
    assert 0.45 <= w["separation"] <= 0.55
    assert elapsed < 5.0


@c2
def test_c2_uc_silent():
    code, rep, elapsed = cli("props", "uc-not-suc", "--property", "uc", "--epsilon", "0.05")
    assert code == 0 and rep["verdict"] == properties.NO_VIOLATION
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 3. contraction classification on the function-space map

_c3_time = []


@c3
def test_c3_almost_cyclic_psi_holds():
    code, rep, elapsed = cli("verify", "function-space", "--class", "almost-cyclic-psi", "--samples", "10000")
    _c3_time.append(elapsed)
    assert code == 0 and rep["results"]["worst_margin"] >= -1e-9


@c3
@pytest.mark.parametrize("beta", [0.0, 0.25, 0.5, 0.75])
def test_c3_almost_cyclic_violated(beta):
    code, rep, elapsed = cli("verify", "function-space", "--class", "almost-cyclic", "--beta", str(beta))
    _c3_time.append(elapsed)
    assert code == 1
    u = np.array(rep["results"]["witness"]["u"])
    v = np.array(rep["results"]["witness"]["v"])
    grid = u.size // 2
    amp = 0.9 * (1 - beta) / (1 + beta)
    # the witness is the pair (f1, i f1 / 2) with ||f1|| = 0.9 (1 - beta) / (1 + beta)
    assert np.max(np.abs(u[:grid])) == pytest.approx(amp, rel=1e-12)
    assert np.all(u[grid:] == 0) and np.all(v[:grid] == 0)
    assert np.allclose(v[grid:], u[:grid] / 2, rtol=0, atol=1e-15)


@c3
def test_c3_total_runtime():
    assert len(_c3_time) == 5 and sum(_c3_time) < 10.0


# ---------------------------------------------------------------------------
# 4. cyclic-contraction corollary on midpoint-pull


@c4
def test_c4_converges_to_best_proximity():
    gi = gallery.load("midpoint-pull")
    r = solver.solve_best_approximation(gi.map, Point((2.0,)), 1e-9)
    assert r.converged and r.gap_to_infimum <= 1e-8


@c4
def test_c4_min_beta():
    est = maps.estimate_min_beta(gallery.load("midpoint-pull").map, "cyclic-contraction", 10_000, 42)
    assert abs(est.beta - 0.5) <= 1e-6


@c4
def test_c4_trace_ratios():
    gi = gallery.load("midpoint-pull")
    gap = geometry.set_distance(gi.instance.G, gi.instance.H).value
    tr = solver.iterate(gi.map, Point((2.0,)), 82)
    # closed form: d_n - sigma(G, H) = 1.5 * 2^-n, so each step halves the excess
    bad = []
    for m in range(40):
        n = 2 * m
        a, b = tr.d[n] - gap, tr.d[n + 1] - gap
        closed = 1.5 * 2.0 ** -n
        ratio = b / a if a else float("nan")
        if not (abs(ratio - 0.5) <= 1e-9 and a == pytest.approx(closed, rel=1e-9)):
            bad.append(m)
    assert not bad, f"even steps with ratio off 0.5: {bad}"


# ---------------------------------------------------------------------------
# 5. solution identities


def _gallery_solves():
    out = []
    for name in ("intervals-psi", "midpoint-pull"):
        gi = gallery.load(name)
        for u0 in gi.instance.G.from_params(np.array([[0.0], [0.5], [1.0]])):
            out.append((name, gi.map, solver.solve_best_approximation(gi.map, Point(tuple(u0)), 1e-9)))
    gi = gallery.load("fixed-point-halving")
    out.append(("fixed-point-halving", gi.map, solver.solve_fixed_point(gi.map, Point((1.0,)), 1e-9)))
    return out


@c5
def test_c5_identities_on_every_converged_solve():
    solves = _gallery_solves()
    assert all(r.converged for _, _, r in solves)
    for name, T, r in solves:
        rep = solver.verify_solution_identities(r, T)
        assert rep.tolerance == 10 * r.tol
        checks = {c.name: c for c in rep.checks}
        assert checks["T2-return"].passed and checks["companion"].passed, name
        assert rep.passed, (name, rep.failures)


# ---------------------------------------------------------------------------
# 6. property suite

_c6_time = []


@pytest.fixture
def timed():
    start = time.perf_counter()
    yield
    _c6_time.append(time.perf_counter() - start)


@c6
@pytest.mark.parametrize("p", [1.0, 2.0, 3.5, float("inf")])
def test_c6_triangle_inequality(p, timed):
    norm = NormTag(p)
    rng = np.random.default_rng(123)
    X, Y, Z = (rng.normal(size=(10_000, 4)) * rng.uniform(0.1, 100) for _ in range(3))
    assert np.all(norm(X - Z) <= norm(X - Y) + norm(Y - Z) + 1e-12)


@c6
@pytest.mark.parametrize("norm", [EUCLIDEAN, SUP])
def test_c6_distance_oracle(norm, timed):
    rng = np.random.default_rng(8)
    sets = [Box((0, 0), (1, 2), norm), Segment(Point((0, 0), norm), Point((2, 1), norm)),
            FiniteCloud(tuple(Point(tuple(r), norm) for r in rng.normal(size=(30, 2))))]
    for S in sets:
        params = np.vstack([S.vertex_params(), rng.uniform(size=(100_000, S.param_dim))])
        pool = S.from_params(params)
        spacing = 100_000 ** (-1 / S.param_dim)
        for x in rng.normal(size=(10, 2)) * 3:
            got = geometry.point_set_distance(Point(tuple(x), norm), S).value
            brute = float(np.min(norm(pool - x)))
            assert got <= brute + 1e-12
            assert brute - got <= 2 * spacing * S.dim * 3


def _gallery_traces():
    traces = []
    for name in ("intervals-psi", "midpoint-pull", "fixed-point-halving"):
        gi = gallery.load(name)
        for u0 in gi.instance.G.from_params(gi.instance.G.vertex_params()):
            traces.append((name, solver.iterate(gi.map, Point(tuple(u0)), 60)))
    gi = gallery.load("function-space")
    G = gi.instance.G
    u0 = G.point(np.concatenate([0.9 * G.nodes, np.zeros(G.grid)]))
    traces.append(("function-space", solver.iterate(gi.map, u0, 200)))
    return traces


@c6
def test_c6_monotone_diagnostics(timed):
    for name, tr in _gallery_traces():
        even = tr.d[::2]
        assert all(b <= a + 1e-12 for a, b in zip(even, even[1:])), name
        assert all(b <= a + 1e-12 for a, b in zip(tr.e, tr.e[1:])), name


def _without_wall_time(raw: bytes) -> bytes:
    return b"\n".join(line for line in raw.split(b"\n") if b'"wall_time_s"' not in line)


@c6
@pytest.mark.parametrize("args", [
    ("solve", "midpoint-pull"),
    ("verify", "function-space", "--class", "almost-cyclic-psi", "--samples", "2000"),
    ("props", "uc-not-suc", "--property", "strongly-uc", "--budget", "5000"),
])
def test_c6_report_determinism(args, tmp_path, timed):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli(*args, out=a)
    cli(*args, out=b)
    assert _without_wall_time(a.read_bytes()) == _without_wall_time(b.read_bytes())


@c6
def test_c6_semi_sharp_consistency_hook(timed):
    # wherever the strongly-UC falsifier is silent at tight thresholds, no
    # point may have two distinct partners at the sigma(G, H) level
    silent = 0
    for name in gallery.names():
        G, H = gallery.load(name).pair
        rep = properties.falsify_strongly_uc(G, H, 1e-4, 1e-2, 10_000, 42)
        if rep.verdict == properties.NO_VIOLATION:
            silent += 1
            assert properties.check_semi_sharp_proximal(G, H).verdict == properties.SEMI_SHARP, name
    assert silent >= 3


@c6
def test_c6_uc_implies_suc_probe(timed):
    cases = [
        (Box((0, 0), (0, 1)), Box((2, 0), (2, 1))),
        (Box((0,), (1,)), Box((0,), (1,))),
    ]
    for G, H in cases:
        rep = properties.uc_implies_suc_probe(G, H, 10_000, 42, delta=1e-4, epsilon=0.05)
        assert rep.premise_holds and rep.applicable
        assert not rep.contradiction


@c6
def test_c6_euclidean_boxes_silent(timed):
    G, H = Box((0, 0), (1, 1)), Box((3, 0), (4, 1))
    rep = properties.falsify_strongly_uc(G, H, 1e-4, 0.05, 10_000, 42)
    assert rep.verdict == properties.NO_VIOLATION


@c6
def test_c6_total_runtime():
    assert sum(_c6_time) < 60.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
