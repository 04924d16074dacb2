import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from contact_tops.cli import COMMANDS, DEFAULT_TOL, SpecError, main, model_from_spec
from contact_tops.tops import classify_top

from conftest import SCRAMBLE


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out), err


def write_spec(tmp_path, spec, name="spec.json"):
    p = tmp_path / name
    p.write_text(json.dumps(spec))
    return str(p)


def test_classify_s3(capsys):
    code, rep, _ = run_json(capsys, "classify", "--model", "s3")
    r = rep["results"]
    assert code == 0 and rep["verdict"] == "pass"
    assert (r["c"], r["k"], r["algebra"], r["alpha"], r["beta"]) == (2.0, 2.0, "so3", 1.0, 1.0)
    assert rep["seed"] == 42 and rep["parameters"]["tol"] == DEFAULT_TOL["classify"]


def test_contact_circle_torus(capsys):
    code, rep, _ = run_json(capsys, "contact-circle", "--model", "torus3", "--n", "1")
    assert code == 0
    assert rep["results"]["taut"] is True and rep["results"]["contact_value"] == pytest.approx(-1.0)
    assert rep["parameters"]["theta-grid"] == 16


def test_contact_circle_generators(capsys):
    code, rep, _ = run_json(capsys, "contact-circle", "--model", "heisenberg", "--u", "1,0,0", "--w", "0,0,1")
    assert code == 2 and rep["results"]["classification"] == "mixed/invalid"
    assert rep["results"]["generators"] == [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]


def test_degenerate_spec_fails(capsys, tmp_path):
    spec = {"chart": {"coords": ["x", "y", "z"], "domain": [[-1, 1]] * 3,
                      "frame": [["1", "0", "0"], ["2", "0", "0"], ["0", "0", "1"]]}}
    code, out, err = run(capsys, "classify", "--spec", write_spec(tmp_path, spec))
    assert code == 1 and out == "" and "degenerate frame" in err


@pytest.mark.parametrize("spec,msg", [
    ("{not json", "malformed spec"),
    ({"chart": {"coords": ["x", "y", "z"], "frame": [["1"]]}}, "missing"),
    ({"chart": {"coords": ["x", "y", "z"], "domain": [[0, 1]] * 3,
                "frame": [["1", "0", "0"], ["0", "1 + q", "0"], ["0", "0", "1"]]}}, "unknown identifier"),
    ({"chart": {"coords": ["x", "y", "z"], "domain": [[1, 1]] * 3,
                "frame": [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]}}, "error"),
    ({"model": "klein"}, "error"),
])
def test_spec_errors(capsys, tmp_path, spec, msg):
    p = tmp_path / "bad.json"
    p.write_text(spec if isinstance(spec, str) else json.dumps(spec))
    code, _, err = run(capsys, "classify", "--spec", str(p))
    assert code == 1 and msg in err


def test_model_and_spec_are_exclusive(capsys, tmp_path):
    assert run(capsys, "classify")[0] == 1
    p = write_spec(tmp_path, {"model": "s3"})
    assert run(capsys, "classify", "--model", "s3", "--spec", p)[0] == 1
    assert run(capsys, "classify", "--spec", str(tmp_path / "missing.json"))[0] == 1


def test_fail_verdicts_exit_2(capsys):
    code, rep, _ = run_json(capsys, "spinning", "--model", "heisenberg", "--pivot", "1")
    assert code == 2 and rep["verdict"] == "fail"
    code, rep, _ = run_json(capsys, "contact-circle", "--model", "heisenberg")
    assert code == 2 and rep["results"]["classification"] == "integrable pencil"


def test_spec_forms(tmp_path):
    chart = {"coords": ["x", "y", "z"], "domain": [[-2, 2]] * 3,
             "frame": [["1", "0", "0"], ["0", "1", "x"], ["0", "0", "1"]],
             "structure": [[1, 2, 3, 1.0]]}
    m = model_from_spec({"chart": chart})
    assert m.analytic_structure[0, 1, 2] == 1.0 and m.analytic_structure[1, 0, 2] == -1.0
    assert model_from_spec(chart).kind == "chart3"
    assert classify_top(model_from_spec({"model": {"name": "torus3", "n": 2}})).k == pytest.approx(2.0)
    rot = model_from_spec({"rotate": {"base": {"model": "s3"}, "angle": SCRAMBLE}})
    assert not classify_top(rot).is_top
    tr = model_from_spec({"transform": {"base": {"model": "s3"}, "matrix": np.diag([2, 2, 3]).tolist()}})
    assert classify_top(tr).c == pytest.approx(8 / 3, abs=1e-6)
    sphere = model_from_spec({"chart": {"coords": ["q1", "q2", "q3", "q4"], "domain": {"kind": "sphere"},
                                        "frame": [["-q2", "q1", "q4", "-q3"], ["-q3", "-q4", "q1", "q2"],
                                                  ["-q4", "q3", "-q2", "q1"]]}})
    assert sphere.kind == "embedded4"
    tc = classify_top(sphere)
    assert tc.is_top and (tc.c, tc.k) == pytest.approx((2, 2), abs=1e-6)
    with pytest.raises(SpecError):
        model_from_spec([1, 2])


def test_build_top_spec_reloads(capsys, tmp_path):
    base = write_spec(tmp_path, {"rotate": {"base": {"model": "s3"}, "angle": f"-({SCRAMBLE})"}})
    code, rep, _ = run_json(capsys, "build-top", "--spec", base)
    assert code == 0
    r = rep["results"]
    assert r["h"] == pytest.approx(2.0, abs=1e-6) and r["classification"]["algebra"] == "so3"
    again = write_spec(tmp_path, r["frame_spec"], "rebuilt.json")
    code, rep2, _ = run_json(capsys, "classify", "--spec", again)
    assert code == 0 and rep2["results"]["c"] == pytest.approx(2.0, abs=1e-6)


def test_build_top_free_h(capsys):
    code, rep, _ = run_json(capsys, "build-top", "--model", "flat3", "--h", "1")
    assert code == 0 and rep["results"]["classification"]["k"] == pytest.approx(1.0, abs=1e-8)
    code, _, err = run(capsys, "build-top", "--model", "s3", "--h", "1")
    assert code == 1 and "inconsistent" in err


def test_geodesic_csv_to_stdout(capsys):
    code, out, _ = run(capsys, "geodesic", "--model", "heisenberg", "--duration", "1", "--step", "0.01")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == 0
    assert rows[0] == ["t", "x1", "x2", "x3", "a1", "a2", "a3", "rot13", "rot3v"]
    assert len(rows) == 102
    last = [float(v) for v in rows[-1]]
    assert last[0] == pytest.approx(1.0)
    assert last[-2] == pytest.approx(-0.4) and last[-1] == pytest.approx(0.18)


def test_geodesic_csv_to_file(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, rep, _ = run_json(capsys, "geodesic", "--model", "s3", "--duration", "0.5", "--step", "0.01",
                            "--a0", "1,0,0", "--out", str(out))
    rows = list(csv.reader(out.open()))
    assert code == 0 and rows[0][:5] == ["t", "x1", "x2", "x3", "x4"]
    assert rep["results"]["steps"] == 50 and rep["results"]["a3_spread"] == 0.0
    assert run(capsys, "geodesic", "--model", "s3", "--x0", "1,0")[0] == 1


def test_curvature_grid(capsys, tmp_path):
    out = tmp_path / "K.csv"
    code, rep, _ = run_json(capsys, "curvature", "--model", "heisenberg", "--samples", "3", "--out", str(out))
    r = rep["results"]
    assert code == 0 and (r["alpha"], r["beta"]) == pytest.approx((0.25, -0.75))
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["point", "x1", "x2", "x3", "phi", "theta", "K"]
    assert len(rows) == 1 + 3 * 11 * 12


def test_verify_top_command(capsys):
    code, rep, _ = run_json(capsys, "verify-top", "--model", "heisenberg", "--geodesics", "10",
                            "--duration", "1", "--step", "0.01")
    assert code == 0 and rep["results"]["is_top"] is True
    assert rep["parameters"]["geodesics"] == 10


def test_every_flag_is_echoed(capsys):
    _, rep, _ = run_json(capsys, "spinning", "--model", "s3", "--samples", "5")
    params = rep["parameters"]
    for flag in ("tol", "step", "duration", "geodesics", "theta-grid", "phi-grid", "seed", "pivot", "h", "out"):
        assert flag in params
    assert params["theta-grid"] == 12 and params["tol"] == 1e-6


@pytest.mark.parametrize("argv", [["classify", "--model", "s3"], ["contact-circle", "--model", "torus3", "--n", "2"],
                                  ["spinning", "--model", "heisenberg"]])
def test_reports_are_deterministic(capsys, argv):
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    assert a == b


def test_all_commands_dispatch(capsys):
    fast = {"verify-top": ["--geodesics", "10", "--duration", "0.2", "--step", "0.05"],
            "geodesic": ["--duration", "0.1", "--step", "0.05"], "curvature": ["--samples", "2"]}
    for cmd in COMMANDS:
        code, _, err = run(capsys, cmd, "--model", "heisenberg", *fast.get(cmd, []))
        assert code in (0, 2), (cmd, err)


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "contact_tops", "classify", "--model", "heisenberg"],
                       capture_output=True, text=True, check=False)
    assert p.returncode == 0
    assert json.loads(p.stdout)["results"]["algebra"] == "nil3"
