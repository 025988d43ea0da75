import json
import math
import subprocess
import sys

import numpy as np
import pytest

from heatcut import load_edge_list
from heatcut.cli import run
from heatcut.report import dumps, envelope


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gen_round_trip(capsys, tmp_path):
    code, out, _ = call(capsys, "gen", "--type", "clique", "--n", "4")
    assert code == 0
    assert len(out.splitlines()) == 6
    g = load_edge_list(out.encode())
    assert g.n == 4 and g.m == 6
    path = tmp_path / "g.txt"
    assert call(capsys, "gen", "--type", "planted", "--n", "40", "--cross", "2", "--seed", "3", "-o", str(path))[0] == 0
    assert load_edge_list(path.read_bytes()).n == 40


def test_partition_json_and_determinism(capsys, tmp_path):
    argv = ["partition", "--generate", "planted:n=40,d=3,cross=2", "-b", "0.25", "--gamma", "0.1", "--seed", "4"]
    code, first, _ = call(capsys, *argv)
    assert code == 0
    _, second, _ = call(capsys, *argv, "--threads", "2")
    assert first == second
    doc = json.loads(first)
    assert doc["schema"] == 1 and doc["command"] == "partition"
    assert doc["result"] == "balanced_cut"
    assert "timing_seconds" not in doc
    assert list(doc)[:3] == ["schema", "command", "result"]


def test_partition_timing_and_figure(capsys, tmp_path):
    fig = tmp_path / "psi.png"
    code, out, _ = call(capsys, "partition", "--generate", "regular:n=16,d=3", "-b", "0.25",
                        "--gamma", "0.02", "--timing", "--figure", str(fig), "--lambda2")
    assert code == 0
    doc = json.loads(out)
    assert doc["result"] == "no_cert" and doc["timing_seconds"] > 0
    assert doc["lambda2"] > 0
    assert fig.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    code, _, _ = call(capsys, "partition", "--generate", "regular:n=16,d=3", "-b", "0.25",
                      "--gamma", "0.02", "--nocert-exit-2")
    assert code == 2


def test_partition_fail_exit(capsys, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("alpha_factor = 1e-6\n")
    code, out, _ = call(capsys, "partition", "--generate", "regular:n=20,d=3", "--graph-seed", "1",
                        "-b", "0.5", "--gamma", "0.1", "--config", str(cfg))
    assert code == 2
    assert json.loads(out)["result"] == "fail"


@pytest.mark.parametrize("argv", [
    [],
    ["partition", "--generate", "clique:n=8", "-b", "0.7", "--gamma", "0.1"],
    ["partition", "--generate", "clique:n=8", "-b", "0.5", "--gamma", "1e-4"],
    ["partition", "-i", "/nonexistent/graph.txt", "-b", "0.5", "--gamma", "0.1"],
    ["polyfit", "--a", "1", "--b", "0", "--delta", "0.1"],
    ["polyfit", "--a", "0", "--b", "1", "--delta", "0.1", "--sweep", "1,x"],
    ["expmv", "--generate", "clique:n=8", "--delta", "0"],
    ["gen", "--type", "torus"],
    ["partition", "--generate", "clique:n=8", "-b", "0.5", "--gamma", "0.1", "--threads", "-1"],
])
def test_usage_errors(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 1
    assert out == ""
    assert "usage:" in err and "schema" in err


def test_bad_edge_list(capsys, tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("0 0\n")
    code, _, err = call(capsys, "partition", "-i", str(path), "-b", "0.5", "--gamma", "0.1")
    assert code == 1 and "self-loop" in err.lower()


@pytest.mark.parametrize("method", ["exprational", "lanczos", "taylor", "dense"])
def test_expmv_methods(capsys, method):
    code, out, _ = call(capsys, "expmv", "--generate", "regular:n=20,d=3", "--tau", "2",
                        "--delta", "1e-9", "--method", method, "--check")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["result"]) == 20
    assert doc["dense_error"] <= 1e-8


def test_polyfit(capsys, tmp_path):
    fig = tmp_path / "deg.png"
    code, out, _ = call(capsys, "polyfit", "--a", "0", "--b", "64", "--delta", "0.001",
                        "--sweep", "32,64", "--figure", str(fig))
    assert code == 0
    doc = json.loads(out)
    assert doc["degree"] == 19
    assert doc["measured_error"] <= 1e-3
    assert [s["degree"] for s in doc["sweep"]] == [14, 19]
    assert fig.exists()


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("HEATCUT_THREADS", "bogus")
    code, _, err = call(capsys, "partition", "--generate", "clique:n=8", "-b", "0.5", "--gamma", "0.1")
    assert code == 1 and "thread" in err


def test_console_script(tmp_path):
    out = subprocess.run([sys.executable, "-m", "heatcut.cli", "gen", "--type", "path", "--n", "3"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.split("\n")[:2] == ["0 1", "1 2"]


def test_report_encoding():
    doc = envelope("x", {"a": 0.1, "b": float("nan"), "c": np.arange(3), "d": [1.5, 2], "e": np.float32(2)})
    text = dumps(doc)
    back = json.loads(text)
    assert back["a"] == 0.1 and back["b"] is None and back["c"] == [0, 1, 2]
    assert "[0, 1, 2]" in text
    assert dumps(1.0) == "1.0\n"
    assert float(dumps(math.pi)) == math.pi
    with pytest.raises(TypeError):
        dumps(object())
