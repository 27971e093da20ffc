import json
import os
import subprocess
import sys

import numpy as np
import pytest

from graphrecover.baselines import knn_graph
from graphrecover.cli import main
from graphrecover.embeddings import load_embeddings
from graphrecover.evaluation import evaluate
from graphrecover.graph import load_edge_list, save_edge_list
from graphrecover.synthetic import erdos_renyi, stochastic_block_model

CLI = [sys.executable, "-m", "graphrecover.cli"]


def run(args, **kw):
    return subprocess.run(CLI + [str(a) for a in args], capture_output=True, text=True, **kw)


def strip_time(text):
    d = json.loads(text)
    d.pop("created_utc")
    return d


def read(path):
    with open(path) as fh:
        return fh.read()


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    g = stochastic_block_model([20, 20], 0.3, 0.03, seed=4)
    save_edge_list(g, d / "g.edges")
    save_edge_list(erdos_renyi(40, 0.15, seed=5), d / "ref.edges")
    assert main(["gen-embeddings", "--graph", str(d / "g.edges"), "--dim", "6",
                 "--output", str(d / "h.nemb"), "--seed", "1", "--out", str(d)]) == 0
    return d


def commands(d, out):
    return {
        "estimate-degree": ["estimate-degree", "--refs", d / "ref.edges", "--reps", 5,
                            "--seed", 2, "--out", out],
        "gen-embeddings": ["gen-embeddings", "--graph", d / "g.edges", "--dim", 6,
                           "--output", out.parent / "h.nemb", "--seed", 1, "--out", out],
        "recover": ["recover", "--embeddings", d / "h.nemb", "--k", 5, "--iters", 3,
                    "--truth", d / "g.edges", "--seed", 3, "--out", out],
        "baseline": ["baseline", "--method", "knn", "--embeddings", d / "h.nemb", "--k", 5,
                     "--output", out / "knn.edges", "--out", out],
        "evaluate": ["evaluate", "--truth", d / "g.edges", "--recovered", d / "g.edges",
                     "--out", out],
        "defense-sweep": ["defense-sweep", "--embeddings", d / "h.nemb", "--truth", d / "g.edges",
                          "--k", 5, "--iters", 2, "--b", "0,0.5", "--seed", 3, "--out", out],
        "end-to-end": ["end-to-end", "--sbm", "15,15", "--p-in", 0.3, "--p-out", 0.03,
                       "--dim", 6, "--iters", 2, "--reps", 3, "--repeats", 2, "--seed", 5,
                       "--out", out],
    }


def reports(out):
    return {f: strip_time(read(out / f)) for f in sorted(os.listdir(out)) if f.endswith(".json")}


@pytest.mark.parametrize("name", ["estimate-degree", "gen-embeddings", "recover", "baseline",
                                  "evaluate", "defense-sweep", "end-to-end"])
def test_rerun_is_byte_identical(files, tmp_path, name):
    outs = []
    for i in range(2):
        out = tmp_path / str(i)
        args = commands(files, out)[name]
        assert main([str(a) for a in args]) == 0
        outs.append(out)
    first, second = reports(outs[0]), reports(outs[1])
    assert first and first.keys() == second.keys()
    for f in first:
        a = read(outs[0] / f).splitlines()
        b = read(outs[1] / f).splitlines()
        keep = lambda lines: [ln for ln in lines if '"created_utc"' not in ln]
        assert keep(a) == keep(b)
    for f in os.listdir(outs[0]):
        if not f.endswith(".json"):
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_output_file_names(files, tmp_path):
    assert main([str(a) for a in commands(files, tmp_path)["recover"]]) == 0
    assert {"recover.3.json", "recovered.3.edges"} <= set(os.listdir(tmp_path))
    rep = json.loads(read(tmp_path / "recover.3.json"))
    assert rep["schema_version"] == 1 and rep["command"] == "recover"


def test_seed_required(files):
    assert main(["recover", "--embeddings", str(files / "h.nemb"), "--k", "3"]) == 2


def test_missing_input_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.edges"
    assert main(["evaluate", "--truth", str(missing), "--recovered", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err
    r = run(["end-to-end", "--graph", missing, "--k", 3, "--seed", 0])
    assert r.returncode == 2 and str(missing) in r.stderr


def test_runtime_failure_exit_code(tmp_path):
    bad = tmp_path / "bad.edges"
    bad.write_text("0 x\n")
    assert main(["evaluate", "--truth", str(bad), "--recovered", str(bad)]) in (1, 2)


def test_evaluate_identical_files(files, capsys):
    assert main(["evaluate", "--truth", str(files / "g.edges"),
                 "--recovered", str(files / "g.edges")]) == 0
    assert json.loads(capsys.readouterr().out)["result"]["f1"] == 1.0


def test_baseline_pipe_matches_api(files):
    base = run(["baseline", "--method", "knn", "--embeddings", files / "h.nemb", "--k", 5])
    assert base.returncode == 0
    ev = run(["evaluate", "--truth", files / "g.edges", "--recovered", "-"], input=base.stdout)
    assert ev.returncode == 0
    truth = load_edge_list(files / "g.edges")
    expected = evaluate(truth, knn_graph(load_embeddings(files / "h.nemb"), 5)).to_dict()
    assert json.loads(ev.stdout)["result"] == expected


def test_end_to_end_summary_population_std(files, tmp_path):
    args = commands(files, tmp_path)["end-to-end"]
    args[args.index("--repeats") + 1] = 3
    assert main([str(a) for a in args]) == 0
    summary = json.loads(read(tmp_path / "summary.5.json"))["result"]["summary"]
    f1s = [json.loads(read(tmp_path / f"end-to-end.{s}.json"))["result"]["methods"]["knn"]["f1"]
           for s in (5, 6, 7)]
    mean = sum(f1s) / 3
    std = (sum((x - mean) ** 2 for x in f1s) / 3) ** 0.5
    assert summary["knn"]["f1"]["mean"] == pytest.approx(mean, abs=1e-15)
    assert summary["knn"]["f1"]["std"] == pytest.approx(std, abs=1e-15)
    assert summary["knn"]["f1"]["count"] == 3


def test_bad_noise_grid(files):
    assert main(["defense-sweep", "--embeddings", str(files / "h.nemb"), "--truth",
                 str(files / "g.edges"), "--k", "3", "--b", "1:0:-1", "--seed", "0"]) == 2


def test_version_flag():
    assert run(["--version"]).returncode == 0
