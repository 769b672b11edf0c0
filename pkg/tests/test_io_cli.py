import csv
import json

import numpy as np
import pytest

from hyperdiffuse import cli
from hyperdiffuse.errors import ConfigError, DataError
from hyperdiffuse.experiment import RunRecord, load_config, load_dataset, run_train
from hyperdiffuse.hypergraph import Hypergraph
from hyperdiffuse.io import (
    parse_hypergraph,
    read_features,
    read_hypergraph,
    read_labels,
    read_splits,
    write_hypergraph,
    write_labels,
    write_matrix_csv,
)
from hyperdiffuse.synthetic import write_planted_dataset

from oracles import random_hypergraph


def test_hypergraph_file_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    for _ in range(10):
        h = random_hypergraph(rng, n_max=20, m_max=15)
        write_hypergraph(h, tmp_path / "h.txt")
        assert read_hypergraph(tmp_path / "h.txt") == h


def test_parse_with_comments_and_errors():
    h = parse_hypergraph("# two edges\n3 2\n1 0:1 1:0.5\n0.5 1:1 2:1\n")
    assert h == Hypergraph(3, [[(0, 1.0), (1, 0.5)], [1, 2]], [1.0, 0.5])
    with pytest.raises(DataError, match="declares 3"):
        parse_hypergraph("3 3\n1 0:1\n")
    with pytest.raises(DataError, match="malformed"):
        parse_hypergraph("3 1\n1 0-1\n")
    with pytest.raises(DataError, match="empty"):
        parse_hypergraph("# nothing\n")


def test_features_and_labels(tmp_path):
    X = np.random.default_rng(1).standard_normal((5, 3))
    write_matrix_csv(X, tmp_path / "x.csv")
    assert np.array_equal(read_features(tmp_path / "x.csv"), X)
    labels = np.array([0, 1, -1, 2, 1])
    write_labels(labels, tmp_path / "y.csv")
    assert np.array_equal(read_labels(tmp_path / "y.csv", 5), labels)
    (tmp_path / "bad.csv").write_text("0,1\n9,1\n")
    with pytest.raises(DataError, match="outside"):
        read_labels(tmp_path / "bad.csv", 5)
    (tmp_path / "nan.csv").write_text("1,nan\n")
    with pytest.raises(DataError, match="non-finite"):
        read_features(tmp_path / "nan.csv")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        read_features(tmp_path / "nope.csv")
    with pytest.raises(DataError):
        read_splits(tmp_path / "none")


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    d = tmp_path_factory.mktemp("planted")
    cfg_path = write_planted_dataset(d, n_splits=2)
    raw = json.loads(cfg_path.read_text())
    raw.update(epochs=60, patience=20, hidden=[8])
    cfg_path.write_text(json.dumps(raw))
    return cfg_path


def test_config_rejects_unknown_keys(tmp_path, planted):
    raw = json.loads(planted.read_text())
    raw["bogus"] = 1
    p = tmp_path / "c.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(p)


def test_run_train_outputs_and_record(tmp_path, planted):
    cfg = load_config(planted, {"out_dir": str(tmp_path / "out")})
    records = run_train(cfg)
    assert len(records) == 1
    rec = records[0]
    assert len(rec.splits) == 2
    accs = [s["test_accuracy"] for s in rec.splits]
    assert rec.mean == pytest.approx(np.mean(accs), rel=1e-12)
    assert rec.std == pytest.approx(np.std(accs), abs=1e-15)
    back = RunRecord.load(tmp_path / "out" / "runs" / f"{rec.config_hash}.json")
    assert back.mean == rec.mean
    with open(tmp_path / "out" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["config_hash"] == rec.config_hash
    assert (tmp_path / "out" / "metrics").is_dir()


def test_run_record_self_consistency(tmp_path):
    rec = RunRecord.build("h", {}, [{"test_accuracy": 0.5}, {"test_accuracy": 1.0}])
    assert (rec.mean, rec.std) == (0.75, 0.25)
    rec.mean = 0.7
    with pytest.raises(DataError):
        rec.save(tmp_path / "r.json")


def test_run_train_is_deterministic(tmp_path, planted):
    a = run_train(load_config(planted, {"out_dir": str(tmp_path / "a"), "threads": 1}))[0]
    b = run_train(load_config(planted, {"out_dir": str(tmp_path / "b"), "threads": 4}))[0]
    assert a.config_hash == b.config_hash
    assert [s["test_accuracy"] for s in a.splits] == [s["test_accuracy"] for s in b.splits]


def test_dataset_test_indices(planted):
    data = load_dataset(load_config(planted))
    name, train_idx = data.splits[0]
    test_idx = data.test_indices(train_idx)
    assert not set(test_idx.tolist()) & set(train_idx.tolist())
    assert len(test_idx) + len(train_idx) == data.hypergraph.num_vertices


# ------------------------------------------------------------------- CLI
def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_validate(tmp_path, capsys):
    write_hypergraph(Hypergraph(4, [[0, 1], [1, 2]]), tmp_path / "h.txt")
    assert run_cli("validate", tmp_path / "h.txt") == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"E": 2, "D": 2, "num_isolated": 1, "isolated": [3]}


def test_cli_knn(tmp_path, capsys):
    write_matrix_csv(np.random.default_rng(0).standard_normal((12, 3)), tmp_path / "x.csv")
    assert run_cli("knn", tmp_path / "x.csv", "--k", 3, "--out", tmp_path / "h.txt") == 0
    h = read_hypergraph(tmp_path / "h.txt")
    assert h.num_edges == 12 and np.all(h.edge_sizes() == 4)


def test_cli_exit_codes(tmp_path, capsys, planted):
    assert run_cli("knn", tmp_path / "missing.csv", "--out", tmp_path / "h.txt") == 3
    assert "missing.csv" in capsys.readouterr().err
    assert run_cli("train") == 2
    (tmp_path / "h.txt").write_text("2 1\n1 0:1 5:1\n")
    assert run_cli("validate", tmp_path / "h.txt") == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("train", "--config", bad) == 2
    write_matrix_csv(np.ones((4, 2)), tmp_path / "same.csv")
    assert run_cli("knn", tmp_path / "same.csv", "--k", 2, "--out", tmp_path / "o.txt") == 3


def test_cli_pipeline(tmp_path, capsys, planted):
    out = tmp_path / "res"
    common = ["--config", planted, "--out-dir", out]
    assert run_cli("train", *common) == 0
    assert "mean=" in capsys.readouterr().out
    assert run_cli("stability", *common) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["all_lemmas_ok"] is True
    assert (out / "stability.json").exists()
    assert run_cli("spectrum", *common, "--thresholds", 0.5, -1) == 0
    lines = capsys.readouterr().out.split()
    assert lines[-1] == "-1,100"
    assert run_cli("sweep-depth", *common, "--t", 1, 2) == 0
    assert (out / "sweep_depth.csv").exists()
    capsys.readouterr()
    assert run_cli("kernel", *common, "--distance", 3, 3) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert run_cli("kernel", *common) == 0
    K = np.loadtxt(out / "kernel.csv", delimiter=",")
    assert K.shape == (100, 100) and np.array_equal(K, K.T)
    assert run_cli("kernel", *common, "--dense-cap", 10) == 3
