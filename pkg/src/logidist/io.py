"""Artifact files shared by the CLI stages."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .trace import IngestionError, Trace, load_trace_csv


class SchemaError(ValueError):
    """An artifact file does not have the expected columns or shape."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def read_csv(path, expected_header=None, min_columns=None) -> list[dict]:
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(path, "empty file") from None
        if expected_header is not None and header[: len(expected_header)] != list(expected_header):
            raise SchemaError(path, f"expected columns {list(expected_header)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(path, f"line {lineno}: {len(row)} cells for {len(header)} columns")
            rows.append(dict(zip(header, row)))
    return rows


def fmt(x) -> str:
    return repr(float(x))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(path, f"invalid JSON ({exc})") from None


def load_trace_file(path) -> Trace:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            return load_trace_csv(fh, path.stem)
        except IngestionError as exc:
            raise IngestionError(f"{path}: {exc}") from None


def load_trace_dir(directory) -> list[Trace]:
    """All ``*.csv`` traces in ``directory`` sorted by id (file stem)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"trace directory {directory} does not exist")
    files = sorted(directory.glob("*.csv"), key=lambda p: _natural_key(p.stem))
    return [load_trace_file(p) for p in files]


def _natural_key(s: str):
    return (0, int(s), s) if s.isdigit() else (1, 0, s)


def write_trace_dir(directory, traces) -> None:
    from .trace import dump_trace_csv

    for t in traces:
        atomic_write_text(Path(directory) / f"{t.id}.csv", dump_trace_csv(t))


def write_labeling(path, labeling) -> None:
    write_csv(path, ["trace_id", "label"], [[tid, lab] for tid, lab in labeling.assignments.items()])


def read_labeling(path):
    from .learn import Labeling

    rows = read_csv(path, ["trace_id", "label"])
    try:
        assignments = {r["trace_id"]: int(r["label"]) for r in rows}
    except ValueError:
        raise SchemaError(path, "labels must be integers") from None
    return Labeling(assignments)


def write_gmm(path, model) -> None:
    write_json(
        path,
        {
            "weights": [float(w) for w in model.weights],
            "means": np.asarray(model.means).tolist(),
            "covariances": np.asarray(model.covariances).tolist(),
        },
    )


def read_gmm(path):
    from .learn import GmmModel

    obj = read_json(path)
    return GmmModel(np.array(obj["weights"]), np.array(obj["means"]), np.array(obj["covariances"]))
