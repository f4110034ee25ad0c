import csv
import json

import numpy as np
import pytest

from hypgreen.cli import load_graph, load_potential, main, vertex
from hypgreen import InputError


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_build_and_reload(tmp_path, capsys):
    code, out = run(capsys, "build", "tree", "--b", "3", "--depth", "4", "--out-dir", str(tmp_path))
    assert code == 0
    info = json.loads(out.out)
    assert info["vertices"] == 46
    assert load_graph(info["path"]).n == 46


def test_delta_tree_is_zero(capsys):
    code, out = run(capsys, "delta", "--graph", "tree:3:4", "--mode", "exhaustive")
    assert code == 0 and json.loads(out.out)["delta"] == 0


def test_green_csv(tmp_path, capsys):
    code, _ = run(capsys, "green", "--graph", "line:20", "--pole", "origin", "--omega", "all",
                  "--potential", "0.5", "--out-dir", str(tmp_path), "--out", "g.csv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "g.csv")))
    assert len(rows) == 41
    v = {int(float(r["distance_to_pole"])): float(r["value"]) for r in rows}
    assert v[0] > v[1] > v[5] > 0


def test_eig_interior(capsys):
    code, out = run(capsys, "eig", "--graph", "tree:3:4", "--omega", "interior")
    assert code == 0
    lam = json.loads(out.out)["lambda1"]
    assert 3 - 2 * np.sqrt(2) < lam < 1  # a finite ball sits above the bottom of the spectrum


@pytest.mark.parametrize("check", ["3g", "greenmetric", "growth"])
def test_verify_chain_checks(check, capsys):
    code, out = run(capsys, "verify", check, "--graph", "tree:3:6", "--from", "down:0:4",
                    "--to", "down:2:3", "--omega", "interior")
    assert code == 0
    assert isinstance(json.loads(out.out), dict)


def test_phichain(capsys):
    code, out = run(capsys, "phichain", "--graph", "tree:3:6", "--from", "down:0:5",
                    "--to", "down:1:5")
    assert code == 0 and json.loads(out.out)["ok"]


def test_unfold_subcommand(tmp_path, capsys):
    code, _ = run(capsys, "unfold", "--domain", "disc", "--h", "0.1", "--checks", "hardy,transfer",
                  "--out-dir", str(tmp_path), "--out", "u.json")
    rep = json.loads((tmp_path / "u.json").read_text())
    assert code == 0
    assert rep["transfer"]["residual"] < 1e-9 and rep["hardy"]["C"] > 0


# -- exit codes ------------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["delta", "--graph", "nosuchfile.txt"],
    ["eig", "--graph", "tree:3:4", "--omega", "nowhere"],
    ["verify", "3g", "--graph", "grid:4:4", "--from", "down:0:2", "--to", "0"],
    ["unfold", "--domain", "annulus"],
    ["run", "no_such_config.cfg"],
])
def test_input_errors_exit_2(argv, capsys):
    code, out = run(capsys, *argv)
    assert code == 2 and "error" in out.err


def test_numeric_failure_exit_3(tmp_path, capsys):
    code, out = run(capsys, "green", "--graph", "tree:3:4", "--pole", "origin", "--omega", "all",
                    "--out-dir", str(tmp_path))
    assert code == 3
    diag = json.loads((tmp_path / "diagnostic.json").read_text())
    assert diag["error"] == "NotCoerciveError"
    assert abs(diag["lambda1"]) < 1e-12


def test_failed_assertion_exit_1(tmp_path, capsys):
    cfg = tmp_path / "strict.cfg"
    cfg.write_text("[run]\nname = strict\n[graph]\nspec = tree:3:6\n[operator]\n"
                   "omega = interior\n[check:3g]\nfrom = down:0:4\nto = down:2:3\nmax_c = 1\n")
    code, out = run(capsys, "run", str(cfg), "--out-dir", str(tmp_path))
    assert code == 1
    assert "FAIL 3g." in out.out
    assert json.loads((tmp_path / "strict.report.json").read_text())["ok"] is False


# -- configs ---------------------------------------------------------------------------------

def test_tree3g_config(tmp_path, capsys):
    code, out = run(capsys, "run", "tree3g.cfg", "--out-dir", str(tmp_path))
    rep = json.loads((tmp_path / "tree3g.report.json").read_text())
    assert code == 0 and rep["ok"]
    assert "FAIL" not in out.out
    assert 2.5 < rep["results"]["3g"]["c"] < 3
    assert rep["seed"] == 7
    assert len(rep["input_sha256"]) == 64


def test_config_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, threads in ((a, "1"), (b, "4")):
        assert run(capsys, "run", "tree3g.cfg", "--seed", "11", "--threads", threads,
                   "--out-dir", str(d))[0] == 0
    assert (a / "tree3g.report.json").read_bytes() == (b / "tree3g.report.json").read_bytes()


def test_discunfold_config(tmp_path, capsys):
    code, _ = run(capsys, "run", "discunfold.cfg", "--out-dir", str(tmp_path))
    rep = json.loads((tmp_path / "discunfold.report.json").read_text())
    assert code == 0
    res = rep["results"]
    assert {"hardy", "unfold_delta", "transfer", "uniformity"} <= set(res)
    # golden values for disc at h = 0.08
    assert res["hardy"]["C"] == pytest.approx(0.763, abs=1e-3)
    assert res["transfer"]["residual"] < 1e-9


# -- input helpers ---------------------------------------------------------------------------

def test_potential_file(tmp_path):
    p = tmp_path / "v.txt"
    p.write_text("# potential\nV 0 1.5\nV 3 0.25\n")
    v = load_potential(str(p), 5)
    np.testing.assert_array_equal(v, [1.5, 0, 0, 0.25, 0])
    assert np.all(load_potential("0.3", 4) == 0.3)
    p.write_text("V 9 1.0\n")
    with pytest.raises(InputError):
        load_potential(str(p), 5)


def test_vertex_tokens():
    t = load_graph("tree:3:4")
    assert vertex(t, "origin") == vertex(t, "root") == 0
    d = vertex(t, "down:1:3")
    assert t.meta["depth"][d] == 3
    assert vertex(t, "17") == 17
    assert vertex(load_graph("line:5"), "origin") == 5
    with pytest.raises(InputError):
        vertex(load_graph("grid:3:3"), "down:0:1")
