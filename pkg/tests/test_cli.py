import csv
import io
import json
import subprocess
import sys

import pytest

from proxim import cli


def run(*argv, env_seed=None, monkeypatch=None):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    report = None
    text = out.getvalue()
    if text.startswith("{"):
        report = json.loads(text)
    return code, report, text, err.getvalue()


def strip_time(text):
    doc = json.loads(text)
    doc.pop("wall_time_s")
    return doc


def test_solve_intervals():
    code, rep, _, _ = run("solve", "intervals-psi", "--tol", "1e-9")
    assert code == 0 and rep["verdict"] == "Converged"
    assert rep["results"]["u_star"] == [1.0] and rep["results"]["set_distance"] == 2.0
    assert rep["results"]["identities"]["passed"]


def test_solve_fixed_point():
    code, rep, _, _ = run("solve", "fixed-point-halving", "--fixed-point")
    assert code == 0 and abs(rep["results"]["u_star"][0]) <= 1e-8


def test_solve_trace_csv(tmp_path):
    path = tmp_path / "t.csv"
    code, _, _, _ = run("solve", "midpoint-pull", "--trace-csv", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.read_text().splitlines()))
    excess = [float(r["d_n"]) - 2.0 for r in rows if r["d_n"]]
    for a, b in zip(excess[:20:2], excess[2:22:2]):
        assert b == pytest.approx(a / 4, rel=1e-12)


def test_solve_exit_codes():
    assert run("solve", "midpoint-pull", "--max-iter", "4", "--tol", "1e-12")[0] == 2
    assert run("solve", "intervals-psi", "--fixed-point")[0] == 64
    assert run("solve", "uc-not-suc")[0] == 64
    assert run("solve", "intervals-psi", "--u0", "0")[0] == 64
    assert run("solve", "intervals-psi", "--u0", "1,2")[0] == 64
    assert run("solve", "does-not-exist")[0] == 66


def test_solve_diverged(tmp_path):
    doc = {"norm": 2, "G": {"type": "interval", "lo": 1, "hi": 2}, "H": {"type": "interval", "lo": -2, "hi": -1},
           "map": {"G": {"kind": "constant", "value": [-2]}, "H": {"kind": "constant", "value": [2]}},
           "solver": {"u0": [1]}}
    p = tmp_path / "div.json"
    p.write_text(json.dumps(doc))
    code, rep, _, _ = run("solve", str(p))
    assert code == 3 and rep["verdict"] == "Diverged"


def test_cyclicity_error(tmp_path):
    doc = {"norm": 2, "G": {"type": "interval", "lo": 1, "hi": 2}, "H": {"type": "interval", "lo": -2, "hi": -1},
           "map": {"G": {"kind": "constant", "value": [5]}, "H": {"kind": "constant", "value": [2]}}}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert run("solve", str(p))[0] == 65


def test_verify_examples():
    code, rep, _, _ = run("verify", "intervals-psi", "--class", "almost-cyclic-psi")
    assert code == 0 and rep["results"]["worst_margin"] >= -1e-9
    code, rep, _, _ = run("verify", "intervals-psi", "--class", "cyclic-psi")
    assert code == 1 and rep["results"]["witness"]["v"] == [-2.0]
    code, _, _, _ = run("verify", "function-space", "--class", "almost-cyclic", "--beta", "0.5")
    assert code == 1


def test_verify_missing_gauge_or_beta(tmp_path):
    assert run("verify", "intervals-psi", "--class", "almost-cyclic")[0] == 64
    doc = json.loads(run("gallery", "export", "intervals-psi")[2])
    del doc["gauge"]
    p = tmp_path / "nogauge.json"
    p.write_text(json.dumps(doc))
    code, _, _, err = run("verify", str(p), "--class", "almost-cyclic-psi")
    assert code == 64 and "gauge" in err


def test_props_examples():
    code, rep, _, _ = run("props", "uc-not-suc", "--property", "strongly-uc")
    assert code == 1 and rep["results"]["best_witness"]["separation"] >= 0.49
    assert run("props", "uc-not-suc", "--property", "uc", "--epsilon", "0.05")[0] == 0
    assert run("props", "intervals-psi", "--property", "semi-sharp")[0] == 0


def test_schema_error_diagnostics(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "norm": 2,\n  "G": {"type": "interval", "lo": 1, "hi": 2},\n  "bogus": true\n}\n')
    code, _, _, err = run("props", str(p))
    assert code == 64 and f"{p}:4:3:" in err


def test_names_resolve_before_paths(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "intervals-psi").write_text("not json")
    assert run("solve", "intervals-psi")[0] == 0


def test_reports_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run("props", "uc-not-suc", "--budget", "2000", "--out", str(path))[0] == 1
    assert strip_time(a.read_text()) == strip_time(b.read_text())
    ta, tb = (json.dumps(strip_time(p.read_text()), sort_keys=True) for p in (a, b))
    assert ta == tb


def test_seed_env(monkeypatch):
    monkeypatch.setenv("PROXIM_SEED", "7")
    assert run("verify", "intervals-psi", "--samples", "50")[1]["seed"] == 7
    monkeypatch.setenv("PROXIM_SEED", "x")
    assert run("verify", "intervals-psi")[0] == 64


def test_gallery_subcommands(tmp_path):
    code, _, text, _ = run("gallery", "list")
    assert code == 0 and text.split() == ["uc-not-suc", "function-space", "intervals-psi", "midpoint-pull",
                                          "fixed-point-halving"]
    out = tmp_path / "fs.json"
    assert run("gallery", "export", "function-space", "--grid", "16", "--out", str(out))[0] == 0
    assert json.loads(out.read_text())["G"]["grid"] == 16
    code, rep, _, _ = run("verify", str(out), "--class", "almost-cyclic", "--beta", "0.25")
    assert code == 1
    assert run("gallery", "export")[0] == 64
    assert run("gallery", "export", "nope")[0] == 66


def test_gallery_run_all():
    code, rep, _, _ = run("gallery", "run-all", "--samples", "2000")
    assert code == 0 and rep["results"]["misses"] == 0


def test_help_lists_defaults():
    for sub in ("solve", "verify", "props", "gallery"):
        code, _, _, _ = run(sub, "--help")
        assert code == 0
    text = cli.build_parser(42)._subparsers._group_actions[0].choices["props"].format_help()
    for flag in ("--property", "--delta", "--epsilon", "--budget", "--seed", "--resolution"):
        assert flag in text
    assert text.count("default") >= 7


def test_usage_error_exit_code():
    assert run("verify", "intervals-psi", "--class", "bogus")[0] == 64
    assert run()[0] == 64


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "proxim", "gallery", "list"], capture_output=True, text=True)
    assert proc.returncode == 0 and "intervals-psi" in proc.stdout
