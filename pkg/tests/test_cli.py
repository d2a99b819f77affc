import json
from fractions import Fraction

import pytest

from hybrid_qmc.cli import main
from hybrid_qmc.discrepancy import star_discrepancy_exact
from hybrid_qmc.pointfile import read_csv


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def points(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["generate", "--gen", "rhalton", "--d", "2", "--n", "128", "--seed", "5",
                 "--out", str(path)]) == 0
    return path


def test_generate_csv_to_stdout(capsys):
    code, out, _ = run(capsys, "generate", "--gen", "halton", "--d", "2", "--n", "3")
    assert code == 0
    assert out.splitlines() == ["# d=2 n=3 mode=halton seed=0", "1/3,1/5", "2/3,2/5", "1/9,3/5"]


def test_generate_json_and_global_flag_position(capsys):
    code, out, _ = run(capsys, "--format", "json", "generate", "--gen", "halton", "--d", "1", "--n", "2")
    assert code == 0
    assert json.loads(out)["points"] == [["1/3"], ["2/3"]]


def test_generate_exact_sidecar(tmp_path):
    path = tmp_path / "h.csv"
    assert main(["generate", "--d", "2", "--n", "5", "--exact", "--out", str(path), "--H", "8"]) == 0
    doc = json.loads((tmp_path / "h.csv.digits.json").read_text())
    assert [t["consumed"] for t in doc["tapes"]] == [8, 8 + 2 * 4]


def test_disc_exact_and_interval(capsys, points):
    P, _ = read_csv(points.read_text())
    exact = star_discrepancy_exact(P).value
    code, out, _ = run(capsys, "disc", str(points))
    assert code == 0 and Fraction(json.loads(out)["value_exact"]) == exact
    code, out, _ = run(capsys, "disc", str(points), "--interval", "1/32")
    doc = json.loads(out)
    assert code == 0
    assert Fraction(doc["lo_exact"]) <= exact <= Fraction(doc["hi_exact"])


def test_disc_budget_refusal_is_usage_error(capsys, points):
    code, _, err = run(capsys, "--budget", "10", "disc", str(points))
    assert code == 2 and "--interval" in err


def test_subseq(capsys, points):
    code, out, _ = run(capsys, "subseq", str(points), "--kappa", "2")
    rows = json.loads(out)
    assert code == 0
    assert [r["gamma"] for r in rows] == [0, 1, 2, 3]
    assert all(r["pass"] for r in rows)


def test_cover(capsys):
    code, out, _ = run(capsys, "cover", "--d", "2", "--delta", "1/8", "--validate", "500")
    doc = json.loads(out)
    assert code == 0
    assert {"count", "max_weight", "bound_met", "failures"} <= set(doc)
    assert doc["failures"] == 0
    code, out, _ = run(capsys, "cover", "--d", "2", "--delta", "1/16", "--snap", "2", "--validate", "500")
    assert code == 0 and json.loads(out)["max_weight"] <= 0.25


def test_verify_quick(capsys):
    code, out, _ = run(capsys, "verify", "--quick")
    reports = json.loads(out)
    assert code == 0
    assert all(r["pass"] for r in reports)


def test_integrate(capsys):
    code, out, _ = run(capsys, "integrate", "--fn", "prod", "--gen", "halton", "--d", "2", "--n", "81")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] and doc["inputs"]["vhk"] == 3.0
    code, out, _ = run(capsys, "integrate", "--fn", "tent", "--d", "2", "--n", "64", "--interval", "1/16")
    assert code == 0 and json.loads(out)["inputs"]["dstar_method"] == "interval(1/16)"


def test_experiment(capsys, tmp_path):
    spec = tmp_path / "e.spec"
    spec.write_text("generator = hybrid-practical\nd = 2\nN = 16, 32\nseeds = 0..1\nmeasurements = exact\n")
    code, out, _ = run(capsys, "experiment", str(spec))
    assert code == 0
    assert len(out.splitlines()) == 1 + 4
    code, _, err = run(capsys, "experiment", str(spec), "--out", str(tmp_path / "r"), "--workers", "2")
    assert code == 0 and "4/4 passed" in err
    assert (tmp_path / "r.csv").exists() and (tmp_path / "r.json").exists()


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["generate", "--d", "2"],
    ["generate", "--gen", "sobol", "--d", "2", "--n", "4"],
    ["disc", "/no/such/file.csv"],
    ["integrate", "--fn", "nope", "--d", "2", "--n", "4"],
    ["cover", "--d", "2", "--delta", "0"],
    ["cover", "--d", "2", "--delta", "1/2", "--snap", "0"],
])
def test_usage_errors_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_bad_spec_exit_2(capsys, tmp_path):
    spec = tmp_path / "bad.spec"
    spec.write_text("generator = sobol\n")
    code, _, err = run(capsys, "experiment", str(spec))
    assert code == 2 and "line 1" in err


def test_failed_check_exit_1(capsys, monkeypatch):
    # every bound reachable from the CLI is loose at desk scale, so force one
    import hybrid_qmc.cli as cli
    from hybrid_qmc.bounds import BoundReport

    monkeypatch.setattr(cli, "verify_battery", lambda **kw: [BoundReport("forced", {}, 1.0, 2.0)])
    monkeypatch.setattr(cli, "bernstein_monte_carlo", lambda **kw: [])
    code, out, _ = run(capsys, "verify", "--quick")
    assert code == 1
    assert json.loads(out)[0]["pass"] is False


def test_version(capsys):
    assert run(capsys, "--version")[0] == 0
