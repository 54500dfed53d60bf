import csv
import json
import math
import subprocess
import sys

import pytest

from mapper_stability.cli import main
from mapper_stability.export import diagram_csv, dumps, firep, tower_ranks_csv
from mapper_stability.filtration import build_bifiltration
from mapper_stability.homology import GridHomology
from mapper_stability.pointcloud import eval_filter

from conftest import X12, circle_cloud, sandwich_values


@pytest.fixture
def files(tmp_path):
    circle = tmp_path / "circle.csv"
    circle.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in circle_cloud().points))
    x12 = tmp_path / "x12.csv"
    x12.write_text("".join(f"{v}\n" for v in X12))
    vals = sandwich_values()
    sandwich_minpts = tmp_path / "sandwich_minpts.csv"
    order = [8, 2] + list(range(9, 15)) + [0, 1] + list(range(3, 8))
    sandwich_minpts.write_text("".join(f"{vals[i]!r}\n" for i in order))
    sandwich_q_first = tmp_path / "sandwich_q_first.csv"
    order_q = [1] + list(range(3, 9)) + [0] + [2] + list(range(9, 15))
    sandwich_q_first.write_text("".join(f"{vals[i]!r}\n" for i in order_q))
    return {"circle": circle, "x12": x12, "sandwich_minpts": sandwich_minpts,
            "sandwich_q_first": sandwich_q_first, "dir": tmp_path}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.err


def test_mapper_circle(files, capsys):
    out = files["dir"] / "m"
    code, _ = run(capsys, "mapper", "--input", files["circle"], "--filter", "coord:0", "--intervals", 3,
                  "--overlap", 30, "--cluster", "dbscan", "--eps", 0.4, "--minpts", 1, "--out", out)
    assert code == 0
    doc = json.loads((out / "complex.json").read_text())
    assert len(doc["vertices"]) == 4 and len(doc["simplices"]["1"]) == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "mapper" and len(man["input"]["sha256"]) == 64
    assert set(man["outputs"]) == {"complex.json", "graph.dot", "manifest.json"}
    assert (out / "graph.dot").read_text().count(" -- ") == 4


def test_mapper_complete_linkage(files, capsys):
    out = files["dir"] / "m2"
    code, _ = run(capsys, "mapper", "--input", files["x12"], "--intervals", 2, "--overlap", 20, "--cluster",
                  "complete", "--num-bins-clustering", 10, "--layout", "tdamapper", "--out", out)
    assert code == 0
    doc = json.loads((out / "complex.json").read_text())
    assert [7, 8] in [v["members"] for v in doc["vertices"] if v["bin"] == 1]


def test_usage_errors(files, capsys):
    out = files["dir"] / "e"
    code, err = run(capsys, "mapper", "--input", files["dir"] / "missing.csv", "--eps", 1, "--out", out)
    assert code == 1 and json.loads(err)["error"] == "io"
    code, err = run(capsys, "mapper", "--input", files["x12"], "--cluster", "complete", "--eps", 1, "--out", out)
    assert code == 1 and "--eps" in json.loads(err)["message"]
    code, err = run(capsys, "mapper", "--input", files["x12"], "--out", out)
    assert code == 1
    code, err = run(capsys, "frobnicate")
    assert code == 1 and json.loads(err)["error"] == "usage"
    code, err = run(capsys, "sweep", "--input", files["circle"], "--axis", "eps", "--values", "0.3,0.2",
                    "--out", out)
    assert code == 1


def test_sweep_counterexample_exit_code(files, capsys):
    out = files["dir"] / "s"
    code, err = run(capsys, "sweep", "--input", files["x12"], "--axis", "bin", "--values", "20,50", "--intervals", 2,
                    "--cluster", "complete", "--num-bins-clustering", 10, "--layout", "tdamapper", "--out", out)
    assert code == 2
    ob = json.loads(err)["obstruction"]
    assert ob["failures"][0]["cluster"] == [7, 8] and ob["witnesses"] == [8]
    assert json.loads((out / "report.json").read_text())["obstruction"]["cell"] == [0, 1]


def test_eps_sweep_diagram(files, capsys):
    out = files["dir"] / "s2"
    code, _ = run(capsys, "sweep", "--input", files["circle"], "--axis", "eps", "--values", "0.05,0.1,0.3,0.5",
                  "--minpts", 1, "--out", out)
    assert code == 0
    rows = list(csv.DictReader((out / "diagram.csv").open()))
    assert rows == [{"birth": "1", "death": "inf"}]
    single = files["dir"] / "s3"
    assert run(capsys, "sweep", "--input", files["circle"], "--axis", "eps", "--values", "0.3", "--out", single)[0] == 0
    assert (single / "ranks.csv").read_text() == "a,b,rank\n0,0,1\n"


def test_minpts_sweep_obstruction(files, capsys):
    out = files["dir"] / "s4"
    code, err = run(capsys, "sweep", "--input", files["sandwich_minpts"], "--axis", "minpts", "--values", "5,4,3,2,1",
                    "--eps", 0.5, "--intervals", 1, "--overlap", 0, "--out", out)
    assert code == 2
    ob = json.loads(err)["obstruction"]
    assert ob["cell"] == [0, 1] and ob["witnesses"] == [8]


def test_bifilt_outputs_and_obstruction(files, capsys):
    out = files["dir"] / "b"
    code, _ = run(capsys, "bifilt", "--input", files["circle"], "--overlaps", "20,30", "--eps-values", "0.2,0.4",
                  "--minpts", 2, "--out", out)
    assert code == 0
    header = (out / "ranks.csv").read_text().splitlines()[0]
    assert header == "a_bin,a_eps,b_bin,b_eps,rank"
    assert (out / "module.firep").read_text().startswith("firep\nbin\nepsilon\n")
    bad = files["dir"] / "b2"
    code, err = run(capsys, "bifilt", "--input", files["sandwich_q_first"], "--overlaps", "20,75", "--eps-values", "0.5",
                    "--minpts", 5, "--intervals", 2, "--out", bad)
    assert code == 2 and json.loads(err)["obstruction"]["witnesses"] == [7]


def test_interleave_is_deterministic(files, capsys):
    outs = []
    for name in ("i1", "i2"):
        out = files["dir"] / name
        code, _ = run(capsys, "interleave", "--input", files["circle"], "--delta", 0.03, "--seed", 7, "--eps", 0.2,
                      "--minpts", 2, "--out", out)
        assert code == 0
        outs.append(out)
    for fname in ("manifest.json", "report.json", "ranks.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
    report = json.loads((outs[0] / "report.json").read_text())
    assert report["report"]["verdict"] is True


def test_interleave_zero_delta_and_config(files, capsys):
    cfg = files["dir"] / "exp.txt"
    cfg.write_text("delta = 0\nepsilon = 0.2\nmin_pts = 2\n")
    code, _ = run(capsys, "interleave", "--input", files["circle"], "--config", cfg, "--out", files["dir"] / "i3")
    assert code == 0


def test_interleave_obstruction(files, capsys):
    code, err = run(capsys, "interleave", "--input", files["sandwich_q_first"], "--intervals", 2, "--overlap", 0, "--eps", 0.5,
                    "--minpts", 5, "--delta", 0.5, "--k-max", 1, "--l-max", 1, "--k", 0, "--out", files["dir"] / "i4")
    assert code == 2
    assert json.loads(err)["obstruction"]["witnesses"] == [7]


def test_perturb_command(files, capsys):
    out = files["dir"] / "p"
    code, _ = run(capsys, "perturb", "--input", files["circle"], "--delta", 0.1, "--seed", 3, "--out", out)
    assert code == 0
    rows = (out / "perturbed.csv").read_text().splitlines()
    assert len(rows) == 100
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3


def test_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "mapper_stability.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_export_helpers():
    assert dumps({"b": math.inf, "a": 1}) == '{\n  "a": 1,\n  "b": "inf"\n}\n'
    assert diagram_csv([(0, 2), (1, math.inf)]) == "birth,death\n0,2\n1,inf\n"
    assert tower_ranks_csv({(0, 1): 1, (0, 0): 2}) == "a,b,rank\n0,0,2\n0,1,1\n"


def test_firep_presents_the_module():
    cloud = circle_cloud()
    g = build_bifiltration(cloud, eval_filter(cloud, 0), [20, 30], [0.05, 0.3], 1)
    gh = GridHomology(g, 1)
    lines = firep(gh).splitlines()
    n_rel, n_gen, zero = map(int, lines[3].split())
    assert zero == 0
    assert n_gen == sum(sum(row) for row in gh.dims())
    assert len(lines) == 4 + n_rel + n_gen
    # one relation per basis class per outgoing grid edge
    expected = sum(m.matrix.shape[1] for m in list(gh.right.values()) + list(gh.up.values()))
    assert n_rel == expected
