import csv
import json
import subprocess
import sys

import pytest

from rmkplab import cli
from rmkplab.spectral import load_field


def strip_header(text):
    """Drop the timestamped header, JSON or CSV."""
    if text.startswith("{"):
        doc = json.loads(text)
        assert "timestamp" in doc.pop("header")
        return json.dumps(doc, sort_keys=True)
    lines = text.splitlines(keepends=True)
    assert '"timestamp"' in lines[0]
    return "".join(lines[1:])


def run(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.dispatch(argv + ["--out", str(out)])
    return code, (out.read_text() if out.exists() else None)


def test_version_prints_conventions(capsys):
    assert cli.dispatch(["--version"]) == 0
    out = capsys.readouterr().out
    assert "phase_sign=+1" in out and "duhamel_factor=-1" in out


def test_entry_point_module():
    p = subprocess.run([sys.executable, "-m", "rmkplab", "--version"], capture_output=True, text=True)
    assert p.returncode == 0 and "phase_sign" in p.stdout


def test_usage_errors(capsys, tmp_path):
    assert cli.dispatch([]) == 2
    assert cli.dispatch(["bogus"]) == 2
    assert cli.dispatch(["solve", "--nx", "8", "--bogus", "1", "--out", "x"]) == 2
    code, _ = run(["solve", "--nx", "63", "--ny", "64", "--t-end", "0.5", "--dt", "1e-3"], tmp_path)
    assert code == 2
    assert "powers of two" in capsys.readouterr().err
    code, _ = run(["solve", "--nx", "16", "--ny", "16", "--t-end", "0.15", "--dt", "0.1"], tmp_path)
    assert code == 2
    code, _ = run(["verify", "--lemma", "7.7"], tmp_path)
    assert code == 2
    code, _ = run(["illposed", "--k-min", "8", "--k-max", "6"], tmp_path)
    assert code == 2
    code, _ = run(["norms", "--ic", "file"], tmp_path)
    assert code == 2
    assert cli.dispatch(["--config", str(tmp_path / "missing.ini"), "regions"]) == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit_one(capsys, tmp_path):
    code, _ = run(["solve", "--nx", "16", "--ny", "16", "--amp", "1e8", "--t-end", "1", "--dt", "0.1"],
                  tmp_path)
    assert code == 1
    assert "numerical failure" in capsys.readouterr().err


def test_solve_writes_valid_json(tmp_path):
    argv = ["solve", "--nx", "64", "--ny", "64", "--t-end", "0.5", "--dt", "1e-3", "--ic", "gaussian"]
    code, text = run(argv + ["--csv", str(tmp_path / "d.csv")], tmp_path, "t.json")
    assert code == 0
    doc = json.loads(text)
    assert doc["config"]["nx"] == 64 and doc["result"]["times"][-1] == pytest.approx(0.5)
    assert doc["result"]["l2_drift"] <= 1e-8
    final = tmp_path / "final.json"
    final.write_text(json.dumps(doc["result"]["final"]))
    assert load_field(final).grid.nx == 64
    rows = [r for r in csv.reader(open(tmp_path / "d.csv")) if not r[0].startswith("#")]
    assert rows[0] == ["t", "l2", "sobolev", "energy"] and len(rows) == 3


def test_solve_deterministic_modulo_header(tmp_path):
    argv = ["solve", "--nx", "16", "--ny", "16", "--t-end", "0.1", "--dt", "0.01", "--ic", "random"]
    c1 = cli.dispatch(["--seed", "3"] + argv + ["--out", str(tmp_path / "a.json")])
    c2 = cli.dispatch(["--seed", "3"] + argv + ["--out", str(tmp_path / "b.json")])
    c3 = cli.dispatch(["--seed", "4"] + argv + ["--out", str(tmp_path / "c.json")])
    assert c1 == c2 == c3 == 0
    A, B, C = (strip_header((tmp_path / f).read_text()) for f in ("a.json", "b.json", "c.json"))
    assert A == B and A != C


def test_regions_csv(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("xi1,xi2\n1.0,300000\n0.0,5\n2.0,3.0\n")
    code, text = run(["regions", "--points", str(pts)], tmp_path, "r.csv")
    assert code == 0
    rows = list(csv.reader(strip_header(text).splitlines()[1:]))
    assert rows[0][:2] == ["xi1", "xi2"]
    # the zero-frequency row is dropped
    assert [r[:2] for r in rows[1:]] == [["1.0", "300000.0"], ["2.0", "3.0"]]
    assert rows[1][rows[0].index("regular")] == "true"
    assert rows[2][rows[0].index("omega0")] == "false"


def test_config_precedence(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[global]\nseed = 5\n[regions]\nsamples = 7\n")
    _, text = run(["--config", str(ini), "regions"], tmp_path, "a.csv")
    cfg = json.loads(text.splitlines()[1][len("# config "):])
    assert cfg["samples"] == 7 and cfg["seed"] == 5
    assert len(text.splitlines()) == 2 + 1 + 7
    _, text = run(["--config", str(ini), "--seed", "9", "regions", "--samples", "3"], tmp_path, "b.csv")
    cfg = json.loads(text.splitlines()[1][len("# config "):])
    assert cfg["samples"] == 3 and cfg["seed"] == 9
    bad = tmp_path / "bad.ini"
    bad.write_text("[regions]\nsamples = many\n")
    assert cli.dispatch(["--config", str(bad), "regions"]) == 2


def test_verify_report(tmp_path):
    code, text = run(["verify", "--lemma", "2.7"], tmp_path, "r.json")
    assert code == 0
    res = json.loads(text)["result"]
    assert res["stable"] is True and res["sup_ratio"] > 0


def test_illposed_csv(tmp_path):
    code, text = run(["illposed", "--k-min", "6", "--k-max", "8", "--s1", "-0.5", "-0.3"], tmp_path, "s.csv")
    assert code == 0
    lines = strip_header(text).splitlines()
    cfg = json.loads(lines[0][len("# config "):])
    assert set(cfg["slopes"]) == {"-0.5", "-0.3"}
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["k", "s1", "norm_u0", "norm_A3", "ratio", "converged"]
    assert len(rows) == 1 + 2 * 2 and all(r[-1] == "true" for r in rows[1:])
    _, again = run(["illposed", "--k-min", "6", "--k-max", "8", "--s1=-0.5,-0.3"], tmp_path, "t.csv")
    assert strip_header(again) == strip_header(text)


def test_norms_subcommand(tmp_path):
    code, text = run(["norms", "--nx", "16", "--ny", "16", "--ic", "random", "--b", "0.5"], tmp_path)
    assert code == 0
    res = json.loads(text)["result"]
    assert res["real"] and res["zero_mean"] and res["bourgain_free"] > 0
