import json

import numpy as np
import pytest

from logidist.cli import EXIT_INPUT, EXIT_OK, main
from logidist.io import read_csv
from logidist.synthetic import intro_traces
from logidist.trace import Trace, dump_trace_csv


@pytest.fixture
def intro_dir(tmp_path):
    d = tmp_path / "traces"
    d.mkdir()
    for t in intro_traces():
        (d / f"{t.id}.csv").write_text(dump_trace_csv(t))
    return d


def run(tmp_path, *argv, traces=None):
    base = ["--out-dir", str(tmp_path / "out"), "--spec", "phi_ex", "--delta", "0.05"]
    if traces is not None:
        base += ["--traces", str(traces)]
    return main([argv[0], *base, *argv[1:]])


def test_missing_trace_file_is_input_error(tmp_path, capsys):
    assert run(tmp_path, "boundary", str(tmp_path / "nope.csv"), traces=tmp_path) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_unknown_spec_is_input_error(tmp_path, intro_dir):
    assert main(["distmat", "--spec", "nope", "--traces", str(intro_dir), "--out-dir", str(tmp_path)]) == EXIT_INPUT


def test_bad_config_key_is_input_error(tmp_path, intro_dir):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    assert main(["distmat", "--config", str(cfg), "--traces", str(intro_dir)]) == EXIT_INPUT


def test_negative_delta_is_input_error(tmp_path, intro_dir):
    assert main(["distmat", "--spec", "phi_ex", "--traces", str(intro_dir), "--delta", "-1"]) == EXIT_INPUT


def test_boundary_straddles_threshold(tmp_path):
    t = Trace("half", np.linspace(0, 1, 11), np.full(11, 0.5))
    f = tmp_path / "half.csv"
    f.write_text(dump_trace_csv(t))
    assert run(tmp_path, "boundary", str(f), "--precision", "0.05") == EXIT_OK
    text = (tmp_path / "out" / "boundary_half.csv").read_text().splitlines()
    rows = [list(map(float, r.split(","))) for r in text if r and not r.startswith("#") and r[0].isdigit()]
    assert rows
    # away from tau = 1 (empty window, always true) the boundary is h = 0.5
    flat = [r for r in rows if r[2] < 0.99]
    assert flat and all(r[1] <= 0.5 <= r[3] for r in flat)


def test_boundary_all_true_trace_warns_but_succeeds(tmp_path):
    f = tmp_path / "low.csv"
    f.write_text(dump_trace_csv(Trace("low", [0, 1], [-1.0, -1.0])))
    with pytest.warns(UserWarning):
        assert run(tmp_path, "boundary", str(f)) == EXIT_OK


def test_distmat_rows_order_and_determinism(tmp_path, intro_dir):
    assert run(tmp_path, "distmat", traces=intro_dir) == EXIT_OK
    path = tmp_path / "out" / "distances.csv"
    first = path.read_bytes()
    rows = read_csv(path)
    assert len(rows) == 15
    get = {(r["i"], r["j"]): r for r in rows}
    assert float(get["0", "1"]["hi"]) < float(get["0", "5"]["lo"])
    path.unlink()
    assert run(tmp_path, "distmat", traces=intro_dir) == EXIT_OK
    assert path.read_bytes() == first


def test_toy_pipeline_three_labels_three_specs(tmp_path, intro_dir):
    out = tmp_path / "out"
    assert run(tmp_path, "distmat", traces=intro_dir) == EXIT_OK
    assert run(tmp_path, "cluster", "--k", "3", traces=intro_dir) == EXIT_OK
    labels = {r["trace_id"]: int(r["label"]) for r in read_csv(out / "labels.csv")}
    groups = {}
    for tid, lab in labels.items():
        groups.setdefault(lab, set()).add(tid)
    assert sorted(map(sorted, groups.values())) == [["0", "1"], ["2", "3", "4"], ["5"]]
    assert run(tmp_path, "project", "--pair", traces=intro_dir) == EXIT_OK
    doc = json.loads((out / "projection.json").read_text())
    assert len(doc["lines"]) == 2 and doc["lines"][0]["score"] > 0
    assert run(tmp_path, "extract", traces=intro_dir) == EXIT_OK
    specs = sorted(p.name for p in out.glob("label_*.psl"))
    assert specs == ["label_0.psl", "label_1.psl", "label_2.psl"]
    assert "spec " in (out / "label_0.psl").read_text()


def test_gmm_cluster_on_projected_points(tmp_path, intro_dir):
    out = tmp_path / "out"
    assert run(tmp_path, "distmat", traces=intro_dir) == EXIT_OK
    assert run(tmp_path, "cluster", "--k", "3", traces=intro_dir) == EXIT_OK
    assert run(tmp_path, "project", traces=intro_dir) == EXIT_OK
    assert run(tmp_path, "cluster", "--method", "gmm", "--k", "2", traces=intro_dir) == EXIT_OK
    assert (out / "gmm.json").is_file()
    assert {r["label"] for r in read_csv(out / "labels.csv")} == {"0", "1"}


def test_extract_dimension_mismatch_names_file(tmp_path, intro_dir, capsys):
    out = tmp_path / "out"
    out.mkdir()
    bad = {"lines": [{"boxes": {"0": {"bot": [0.1, 0.1, 0.1], "top": [0.2, 0.2, 0.2]}}}]}
    (out / "projection.json").write_text(json.dumps(bad))
    assert run(tmp_path, "extract", traces=intro_dir) == EXIT_INPUT
    assert "projection.json" in capsys.readouterr().err


def test_cluster_without_distances_is_input_error(tmp_path, intro_dir):
    assert run(tmp_path, "cluster", traces=intro_dir) == EXIT_INPUT


def test_dimred_histogram(tmp_path, intro_dir):
    assert run(tmp_path, "dimred", "--bins", "20", traces=intro_dir) == EXIT_OK
    rows = read_csv(tmp_path / "out" / "histogram.csv")
    assert len(rows) == 20 and sum(int(r["count"]) for r in rows) == 6
