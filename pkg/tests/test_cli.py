import json
import math
import subprocess
import sys

import pytest

from lncmi import calibration, cli, synthgen
from lncmi.experiments import planted_synergy


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _body(text):
    return [l for l in text.splitlines() if not l.startswith("#")]


@pytest.fixture
def linear_csv(tmp_path):
    def make(seed, sigma=1e-3, n=5000):
        p = tmp_path / f"lin{seed}.csv"
        synthgen.generate(synthgen.RelationshipSpec("linear", sigma, n=n, seed=seed)).to_csv(p)
        return str(p)

    return make


def _estimate(capsys, path, *extra):
    code, out, _ = run(capsys, "estimate", "--input", path, "--cols", "x,y", "--k", "5", *extra)
    assert code == 0
    return float(out.splitlines()[0].split()[1]), out


def test_estimate_prints_fields(capsys, linear_csv):
    value, out = _estimate(capsys, linear_csv(0, n=500), "--est", "lnc", "--alpha", "0.37")
    lines = out.splitlines()
    assert lines[0].startswith("estimate: ") and lines[0].endswith(" nats")
    assert {l.split(":")[0] for l in lines} >= {"estimate", "estimator", "n", "alpha",
                                                  "corrected_fraction", "floored_count", "config"}
    cfg = json.loads(out.split("config: ", 1)[1])
    assert cfg["alpha"] == {"alpha": 0.37, "source": "value"}
    assert cfg["version"] and cfg["convention"]["marginal"] == "final"


def test_estimate_lnc_above_ksg(capsys, linear_csv):
    path = linear_csv(1, n=1000)
    lnc, _ = _estimate(capsys, path, "--est", "lnc", "--alpha", "0.37")
    ksg, _ = _estimate(capsys, path, "--est", "ksg")
    assert lnc > ksg


def test_estimate_ten_seed_mean_near_truth(capsys, linear_csv):
    vals = [_estimate(capsys, linear_csv(s), "--est", "lnc", "--alpha", "0.37")[0] for s in range(10)]
    assert abs(math.fsum(vals) / 10 - synthgen.linear_closed_form(1e-3)) <= 0.3


def test_estimate_bits(capsys, linear_csv):
    path = linear_csv(2, n=400)
    nats, _ = _estimate(capsys, path, "--est", "ksg")
    bits, out = _estimate(capsys, path, "--est", "ksg", "--bits")
    assert bits == pytest.approx(nats / math.log(2), rel=1e-15)
    assert " bits" in out.splitlines()[0]


def test_estimate_writes_record(capsys, linear_csv, tmp_path):
    out = tmp_path / "e.json"
    _estimate(capsys, linear_csv(3, n=300), "--est", "lnc", "--out", str(out), "--format", "json")
    doc = json.loads(out.read_text())
    assert doc["records"][0]["estimator"] == "lnc"
    assert doc["meta"]["alpha"]["source"] == "table"


def test_exit_codes(capsys, linear_csv, tmp_path):
    path = linear_csv(4, n=200)
    assert run(capsys, "estimate", "--input", path, "--k", "50", "--est", "lnc")[0] == cli.EXIT_ALPHA
    code, _, err = run(capsys, "estimate", "--input", path, "--k", "50", "--est", "lnc")
    assert "lncmi calibrate --k 50 --d 2" in err
    assert run(capsys, "estimate", "--input", str(tmp_path / "nope.csv"), "--k", "5")[0] == cli.EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,2\n3,abc\n")
    assert run(capsys, "estimate", "--input", str(bad), "--k", "1")[0] == cli.EXIT_DATA
    assert run(capsys, "estimate", "--input", path, "--cols", "x,q", "--k", "5")[0] != 0
    with pytest.raises(SystemExit) as e:
        cli.main(["estimate", "--input", path, "--k", "0"])
    assert e.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        cli.main(["sweep", "--k", "5", "--alpha", "1.5"])
    assert e.value.code == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == cli.EXIT_USAGE
    capsys.readouterr()


def test_list_arguments():
    assert cli.float_list("1e-1..1e-5") == [0.1, 0.01, 0.001, 1e-4, 1e-5]
    assert cli.float_list("0.5,2") == [0.5, 2.0]
    assert cli.int_list("125..8000") == [125, 250, 500, 1000, 2000, 4000, 8000]
    assert cli.int_list("3,5") == [3, 5]


def test_sweep_decade_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "linear", "--sigmas", "1e-1..1e-5", "--est", "ksg,lnc",
                       "--k", "5", "--n", "200", "--seeds", "2")
    assert code == 0
    rows = _body(out)
    assert rows[0] == "experiment,estimator,family,sigma,n,k,alpha,seed,estimate,truth,abs_error"
    assert len(rows) - 1 == 2 * 5 * 2


def test_outputs_byte_identical_across_threads(tmp_path):
    paths = []
    for t in (1, 8):
        p = tmp_path / f"s{t}.csv"
        assert cli.main(["sweep", "--family", "linear,quadratic", "--sigmas", "0.1,0.01", "--k", "5",
                         "--n", "300", "--seeds", "3", "--threads", str(t), "--out", str(p)]) == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    m1, m8 = (json.loads((tmp_path / f"s{t}.csv.meta.json").read_text()) for t in (1, 8))
    m1["config"].pop("threads"), m8["config"].pop("threads")
    assert m1 == m8


def test_repeat_runs_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"c{i}.json"
        assert cli.main(["converge", "--k", "5", "--n-grid", "125..250", "--seeds", "2",
                         "--format", "json", "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_sweep_bits_rescales(capsys):
    base = ["sweep", "--family", "linear", "--sigmas", "0.1", "--est", "ksg", "--k", "5", "--n", "200", "--seeds", "1"]
    _, nats, _ = run(capsys, *base)
    _, bits, _ = run(capsys, *base, "--bits")
    hdr = _body(nats)[0].split(",")
    a, b = _body(nats)[1].split(","), _body(bits)[1].split(",")
    for f in ("estimate", "truth", "abs_error"):
        i = hdr.index(f)
        assert float(b[i]) == pytest.approx(float(a[i]) / math.log(2), rel=1e-15)
    assert json.loads(bits.splitlines()[0][2:])["units"] == "bits"


def test_calibrate_defaults_near_published_value(capsys):
    code, out, _ = run(capsys, "calibrate", "--k", "5", "--d", "2")
    assert code == 0
    alpha = float(out.split("alpha=")[1])
    assert 0.35 <= alpha <= 0.39


def test_calibrate_writes_table_and_env_override(capsys, tmp_path, monkeypatch, linear_csv):
    t = tmp_path / "t.csv"
    assert run(capsys, "calibrate", "--k", "5,6", "--d", "2", "--trials", "2000", "--out", str(t))[0] == 0
    table = calibration.AlphaTable.load(t)
    assert {kd for kd, _ in table.items()} == {(5, 2), (6, 2)}
    assert (tmp_path / "t.csv.meta.json").exists()
    monkeypatch.setenv("LNCMI_ALPHA_TABLE", str(t))
    _, out = _estimate(capsys, linear_csv(5, n=300), "--est", "lnc")
    assert float(out.split("alpha: ")[1].split()[0]) == table.lookup(5, 2)
    assert run(capsys, "estimate", "--input", linear_csv(5, n=300), "--k", "7", "--est", "lnc")[0] == cli.EXIT_ALPHA


def test_calibrate_on_the_fly(capsys):
    code, out, _ = run(capsys, "sweep", "--family", "linear", "--sigmas", "0.1", "--est", "lnc", "--k", "40",
                       "--n", "300", "--seeds", "1", "--alpha", "calibrate", "--calib-trials", "1000")
    assert code == 0
    assert json.loads(out.splitlines()[0][2:])["alpha"]["source"] == "calibrated"


def test_complexity_bound_column(capsys):
    code, out, _ = run(capsys, "complexity", "--eps", "0.1", "--k", "1", "--targets", "1.4,2.8", "--trials", "4",
                       "--n-cap", "4096")
    assert code == 0
    rows = _body(out)
    hdr = rows[0].split(",")
    assert hdr == ["I_true", "eps", "k", "d", "family", "sigma", "n_s", "lower_bound", "trials", "censored"]
    for r in rows[1:]:
        v = dict(zip(hdr, r.split(",")))
        assert v["censored"] == "true" or int(v["n_s"]) >= float(v["lower_bound"])


def test_synergy_planted(capsys, tmp_path):
    p = tmp_path / "syn.csv"
    planted_synergy(n=600, seed=0).to_csv(p)
    code, out, _ = run(capsys, "synergy", "--input", str(p), "--est", "ksg", "--k", "5")
    assert code == 0
    rows = _body(out)
    assert rows[0] == "estimator,x,y,z,n,multi_info,max_pair,ss,ss_undefined,interaction"
    assert rows[1].startswith("ksg,x,y,z,600,")


def test_rank_small(capsys, tmp_path):
    from lncmi.experiments import planted_ladder
    p = tmp_path / "ladder.csv"
    planted_ladder(n=200, n_cols=7, seed=0).to_csv(p)
    code, out, _ = run(capsys, "rank", "--input", str(p), "--est", "ksg", "--k", "5", "--fractions", "1,0.5",
                       "--repeats", "2", "--top-m", "15", "--min-rows", "100")
    assert code == 0
    rows = _body(out)
    assert rows[1].split(",")[:3] == ["ksg", "1.0", "2"]
    assert float(rows[1].split(",")[4]) == 1.0


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "lncmi", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "estimate" in r.stdout
