import json
import math
import subprocess
import sys

import pytest

from mdpart.cli import main, nominal_gap
from mdpart.gapseq import parse_gap_spec


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_count(capsys):
    assert run(capsys, "count", "--gaps", "const:1", "--n", "40")[1].strip() == "1113"
    code, out, _ = run(capsys, "count", "--gaps", "periodic:1,0", "--n", "35", "--k", "9", "--format", "json")
    assert code == 0 and json.loads(out)["count"] == "41"
    res = json.loads(run(capsys, "count", "--gaps", "const:0", "--n", "4", "--format", "json")[1])
    assert res["by_k"] == {"1": "1", "2": "2", "3": "1", "4": "1"}


def test_constants(capsys):
    d = json.loads(run(capsys, "constants", "--q", "1")[1])
    assert d["T_q"] == pytest.approx(math.log(2)) and d["theta_q"] == pytest.approx(math.pi / math.sqrt(12))
    assert json.loads(run(capsys, "constants", "--q", "0")[1])["T_q"] is None


def test_shape(capsys, tmp_path):
    code, out, _ = run(capsys, "shape", "--q", "1", "--points", "5")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "x,y" and len(lines) == 6
    x, y = map(float, lines[-1].split(","))
    assert x == pytest.approx(0.764304, abs=1e-6) and y == 0.0
    out_file = tmp_path / "c.csv"
    run(capsys, "shape", "--q", "0", "--scaling", "intrinsic", "--points", "3", "--out", str(out_file))
    assert out_file.read_text().count("\n") == 4


def test_sample_formats_and_determinism(capsys):
    args = ("sample", "--gaps", "const:1", "--ensemble", "uniform-n", "--n", "1e3", "--count", "5", "--seed", "9")
    a = run(capsys, *args)[1]
    b = run(capsys, *args, "--workers", "3")[1]
    assert a == b
    recs = [json.loads(line) for line in a.splitlines()]
    assert all(r["N"] == 1000 and sum(r["parts"]) == 1000 for r in recs)
    assert recs[2]["seed_stream"] == "9:0:2"
    csv_out = run(capsys, "sample", "--gaps", "const:2", "--ensemble", "canonical", "--z", "0.3", "--k", "4",
                  "--count", "3", "--format", "csv")[1].splitlines()
    assert csv_out[0] == "rep,parts,N,K,seed_stream" and all(",4," in r for r in csv_out[1:])
    with pytest.raises(SystemExit):
        main(["sample", "--gaps", "const:1", "--ensemble", "grand"])


def test_bad_gap_spec_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["count", "--gaps", "const:x", "--n", "3"])
    assert e.value.code == 2
    assert "position 6" in capsys.readouterr().err


def test_rwre(capsys, tmp_path):
    code, out, _ = run(capsys, "rwre", "--dist", "two-point:p1=0.75,w=1", "--a", "const:2", "--b", "1",
                       "--length", "1000", "--seed", "4")
    gaps_line, meta_line = out.splitlines()
    spec = parse_gap_spec(gaps_line)
    assert len(spec.values) == 1000 and spec.tail == 2
    meta = json.loads(meta_line)
    assert meta["q_predicted"] == 2.5 and meta["regime"] == "transient-ballistic"
    assert meta["source"].startswith("rwre:")
    path = tmp_path / "g.txt"
    run(capsys, "rwre", "--dist", "two-point:p1=0.75,w=1", "--a", "const:2", "--b", "1", "--length", "1000",
        "--seed", "4", "--out", str(path))
    assert path.read_text().strip() == gaps_line


def test_experiment_exit_codes(capsys, tmp_path):
    base = ("experiment", "limit-shape", "--gaps", "const:1", "--n", "400,900", "--reps", "4", "--seed", "1")
    code, out, err = run(capsys, *base, "--threshold", "10")
    assert code == 0 and out.splitlines()[0] == "exp,gaps,ensemble,n,k,z,rep,stat_name,value,seed_stream"
    assert "PASS" in err
    code, _, err = run(capsys, *base, "--threshold", "1e-9")
    assert code == 2 and "FAIL" in err
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, *base, "--format", "json", "--out", str(p1))
    run(capsys, *base, "--format", "json", "--out", str(p2), "--workers", "2")
    assert p1.read_bytes() == p2.read_bytes()


def test_experiment_kinds(capsys):
    code, out, _ = run(capsys, "experiment", "parts-lln", "--gaps", "const:1", "--n", "400", "--reps", "3",
                       "--format", "json")
    assert code == 0 and json.loads(out)["meta"]["statistic"] == "K/sqrt(n)"
    code, out, _ = run(capsys, "experiment", "ensemble-equivalence", "--gaps", "const:1", "--n-max", "6",
                       "--samples", "2000", "--format", "json")
    assert code == 0 and json.loads(out)["passed"]
    code, out, _ = run(capsys, "experiment", "rwre-pipeline", "--gaps",
                       "rwre:two-point:p1=0.75,w=1.0;a=2;b=1;seed=3", "--n", "2000", "--reps", "3",
                       "--length", "1e4", "--q-band", "2.4,2.6", "--drift-tol", "0.05", "--format", "json")
    rep = json.loads(out)
    assert code == 0 and rep["meta"]["rwre"]["q_predicted"] == 2.5
    with pytest.raises(SystemExit):
        main(["experiment", "rwre-pipeline", "--gaps", "const:1"])


def test_nominal_gap():
    assert nominal_gap(parse_gap_spec("const:2")) == 2.0
    assert nominal_gap(parse_gap_spec("periodic:1,0")) == 0.5
    assert nominal_gap(parse_gap_spec("list:3,0;tail=1")) == 1.0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mdpart", "count", "--gaps", "const:1", "--n", "6"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.strip() == "4"
