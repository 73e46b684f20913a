import json
import subprocess
import sys

import numpy as np
import pytest

from topoclust.cli import main
from topoclust.graph import save_graph_csv
from oracles import random_weights
from topoclust.graph import WeightedGraph

TRIANGLE = "NA,0.5,0.8\n0.5,NA,0.3\n0.8,0.3,NA\n"


@pytest.fixture
def tri(tmp_path):
    path = tmp_path / "tri.csv"
    path.write_text(TRIANGLE)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_decompose_triangle(capsys, tri):
    code, out, _ = run(capsys, "decompose", tri)
    assert code == 0
    data = json.loads(out)
    assert data["births"] == [0.5, 0.8] and data["deaths"] == [0.3]


def test_decompose_verify_round_trip(capsys, tri, tmp_path):
    ref = tmp_path / "tri.json"
    assert main(["decompose", str(tri), "--out", str(ref)]) == 0
    code, out, _ = run(capsys, "decompose", tri, "--verify", ref)
    assert code == 0 and json.loads(out)["verified"]
    ref.write_text(ref.read_text().replace("0.3", "0.30000001"))
    code, _, err = run(capsys, "decompose", tri, "--verify", ref)
    assert code == 1 and "does not reproduce" in err


def test_distance_self_is_zero(capsys, tri):
    code, out, _ = run(capsys, "distance", tri, tri)
    assert code == 0 and json.loads(out) == {"d0": 0.0, "d1": 0.0, "combined": 0.0}


def test_missing_file_exit_1(capsys, tri):
    code, _, err = run(capsys, "distance", tri, "no/such.csv")
    assert code == 1 and "no/such.csv" in err


def test_usage_error_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["cluster", "--k", "0", "x"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def graph_dir(tmp_path, n=6, p=5):
    rng = np.random.default_rng(0)
    d = tmp_path / "graphs"
    d.mkdir()
    for i in range(n):
        save_graph_csv(WeightedGraph(random_weights(rng, p)), d / f"g{i}.csv")
    return d


def test_pairwise_and_cluster(capsys, tmp_path):
    d = graph_dir(tmp_path)
    code, out, _ = run(capsys, "pairwise", d)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 7 and lines[0].startswith(",g0")
    code, out, _ = run(capsys, "cluster", "--k", 2, "--restarts", 3, "--seed", 42, d)
    res = json.loads(out)
    assert code == 0 and len(res["assignments"]) == 6 and len(res["means"]) == 2
    _, again, _ = run(capsys, "cluster", "--k", 2, "--restarts", 3, "--seed", 42, d)
    assert again == out


def test_cluster_too_many_clusters(capsys, tmp_path):
    d = graph_dir(tmp_path, n=3)
    code, _, err = run(capsys, "cluster", "--k", 5, d)
    assert code == 1


def test_mean_and_accuracy(capsys, tmp_path):
    d = graph_dir(tmp_path)
    code, out, _ = run(capsys, "mean", d, "--graph-out", tmp_path / "m.csv", "--pretty")
    assert code == 0 and json.loads(out)["n"] == 6 and (tmp_path / "m.csv").exists()
    (tmp_path / "p.csv").write_text("1,1,2,2,3,3\n")
    (tmp_path / "t.csv").write_text("2\n2\n3\n1\n1\n1\n")
    code, out, _ = run(capsys, "accuracy", tmp_path / "p.csv", tmp_path / "t.csv")
    assert code == 0 and json.loads(out)["accuracy"] == pytest.approx(5 / 6)


def series_file(tmp_path, n=60, p=3):
    x = np.random.default_rng(1).normal(size=(n, p))
    path = tmp_path / "ts.csv"
    path.write_text("a,b,c\n" + "\n".join(",".join(map(str, r)) for r in x) + "\n")
    return path


def test_smooth_and_dyncorr(capsys, tmp_path):
    ts = series_file(tmp_path)
    code, out, _ = run(capsys, "smooth", "--bandwidth", "1e-3", ts)
    res = json.loads(out)
    assert code == 0 and res["degree"] == 59 and len(res["values"]) == 3
    code, _, _ = run(capsys, "smooth", "--bandwidth", "1e-3", "--degree", 60, ts)
    assert code == 1
    out_dir = tmp_path / "dc"
    code, out, _ = run(capsys, "dyncorr", "--window", 10, "--stride", 20, "--out", out_dir, ts)
    assert code == 0 and len(json.loads(out)["files"]) == 3
    first = (out_dir / "corr_00000.csv").read_text().splitlines()
    assert first[0] == "a,b,c" and len(first) == 4


def test_simulate_then_states(capsys, tmp_path):
    (tmp_path / "synth.toml").write_text("k_true = 3\nT = 40\nn_subjects = 3\nseed = 2\n")
    code, out, _ = run(capsys, "simulate", "--config", tmp_path / "synth.toml", "--out", tmp_path / "data")
    assert code == 0 and len(json.loads(out)["subjects"]) == 3
    (tmp_path / "run.toml").write_text(f'input = "{tmp_path / "data"}"\nwindow = 8\nk_min = 2\nk_max = 4\nrestarts = 2\n')
    code, out, _ = run(capsys, "states", "--config", tmp_path / "run.toml", "--seed", 5)
    assert code == 0 and json.loads(out)["selected_k"] in (2, 3, 4)
    (tmp_path / "bad.toml").write_text('input = "x"\nk_min = 4\nk_max = 2\n')
    code, _, err = run(capsys, "states", "--config", tmp_path / "bad.toml")
    assert code == 1 and "empty k range" in err


def test_module_entry_point(tri):
    res = subprocess.run([sys.executable, "-m", "topoclust", "decompose", str(tri)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["deaths"] == [0.3]
