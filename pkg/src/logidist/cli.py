"""Command-line entry point.

Exit codes: 0 success (warnings allowed), 2 input error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .boundary import BoundaryCache, Rectangle, approx_to_precision, write_boundary
from .config import ConfigError, PipelineConfig, load_config
from .distance import distance_matrix, read_distance_matrix, write_distance_matrix
from .io import (
    SchemaError,
    atomic_write_text,
    load_trace_dir,
    load_trace_file,
    read_csv,
    read_json,
    read_labeling,
    write_csv,
    write_gmm,
    write_json,
    write_labeling,
)
from .learn import Labeling, agglomerative, gmm_fit, gmm_predict_many
from .project import (
    LabelSpec,
    LineProjection,
    ProjectionError,
    dimred,
    extract_label_spec,
    optimize_projection,
    write_histogram,
    write_projection_report,
)
from .specdsl import ParametricSpec, SpecError, make_and, pretty_print, resolve_spec
from .trace import IngestionError

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT = 0, 2, 3


class InvariantError(RuntimeError):
    pass


def _check(cond, message):
    if not cond:
        raise InvariantError(message)


# ---------------------------------------------------------------- helpers


def _spec(cfg: PipelineConfig) -> ParametricSpec:
    if cfg.spec_path is None:
        raise ConfigError("no specification given (--spec or spec_path)")
    return resolve_spec(cfg.spec_path)


def _traces(cfg: PipelineConfig):
    if cfg.trace_dir is None:
        raise ConfigError("no trace directory given (--traces or trace_dir)")
    traces = load_trace_dir(cfg.trace_dir)
    if not traces:
        raise SchemaError(cfg.trace_dir, "no *.csv traces found")
    return traces


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _input_path(arg, cfg, default_name):
    path = Path(arg) if arg else Path(cfg.output_dir) / default_name
    if not path.is_file():
        raise FileNotFoundError(f"{path} does not exist")
    return path


# ---------------------------------------------------------------- commands


def cmd_boundary(cfg: PipelineConfig, args) -> int:
    spec = _spec(cfg)
    ref = Path(args.trace)
    if ref.is_file():
        trace = load_trace_file(ref)
    else:
        by_id = {t.id: t for t in _traces(cfg)}
        if args.trace not in by_id:
            raise SchemaError(cfg.trace_dir, f"no trace with id {args.trace!r}")
        trace = by_id[args.trace]
    precision = args.precision if args.precision is not None else cfg.delta
    b = approx_to_precision(spec, trace, precision, cfg.eta, cfg.max_depth)
    _check(b.eps >= 0 and len(b) > 0, "boundary approximation is empty")
    path = _out(cfg) / f"boundary_{trace.id}.csv"
    write_boundary(b, path)
    print(f"{path}: depth {b.depth}, {len(b)} rectangles, max edge {b.max_edge:.6g}")
    return EXIT_OK


def cmd_distmat(cfg: PipelineConfig, args) -> int:
    spec = _spec(cfg)
    traces = _traces(cfg)
    if len(traces) < 2:
        raise SchemaError(cfg.trace_dir, "need at least two traces")
    dm = distance_matrix(spec, traces, cfg.delta, cfg.max_depth, cfg.eta, BoundaryCache(), workers=args.workers)
    for t in traces:
        _check(dm[t.id, t.id].lo == 0.0, f"identity violated for {t.id}")
    path = _out(cfg) / "distances.csv"
    write_distance_matrix(path, dm)
    flagged = sum(1 for _, _, iv in dm.pairs if not iv.converged)
    print(f"{path}: {len(dm.pairs)} pairs, {flagged} not converged")
    return EXIT_OK


def _read_points(path):
    rows = read_csv(path)
    if not rows or "trace_id" not in rows[0]:
        raise SchemaError(path, "expected a trace_id column")
    cols = sorted((c for c in rows[0] if c.startswith("coord_")), key=lambda c: int(c[6:]))
    if not cols:
        raise SchemaError(path, "expected coord_1.. columns")
    ids, pts = [], []
    for r in rows:
        if any(r[c] == "" for c in cols):
            continue
        ids.append(r["trace_id"])
        try:
            pts.append([float(r[c]) for c in cols])
        except ValueError:
            raise SchemaError(path, f"non-numeric coordinates for {r['trace_id']}") from None
    return ids, np.array(pts)


def cmd_cluster(cfg: PipelineConfig, args) -> int:
    c = cfg.clustering
    out = _out(cfg)
    if c.method == "agglomerative":
        dm = read_distance_matrix(_input_path(args.distances, cfg, "distances.csv"))
        labeling = agglomerative(dm.array("mid"), c.k, c.linkage, dm.ids)
    else:
        ids, pts = _read_points(_input_path(args.points, cfg, "projection_t.csv"))
        model = gmm_fit(pts, c.k, seed=cfg.seed)
        raw = gmm_predict_many(model, pts)
        # renumber components by first appearance so labels are contiguous
        order = {lab: i for i, lab in enumerate(dict.fromkeys(int(v) for v in raw))}
        labeling = Labeling({tid: order[int(v)] for tid, v in zip(ids, raw)})
        write_gmm(out / "gmm.json", model)
    _check(labeling.k == len(set(labeling.assignments.values())), "labels are not contiguous")
    write_labeling(out / "labels.csv", labeling)
    sizes = [len(labeling.members(lab)) for lab in range(labeling.k)]
    print(f"{out / 'labels.csv'}: {labeling.k} labels, sizes {sizes}")
    return EXIT_OK


def _groups(cfg, labels_path):
    labeling = read_labeling(labels_path)
    by_id = {t.id: t for t in _traces(cfg)}
    missing = sorted(set(labeling.assignments) - set(by_id))
    if missing:
        raise SchemaError(labels_path, f"labels name unknown traces: {', '.join(missing[:5])}")
    groups = {}
    for tid, lab in labeling.assignments.items():
        groups.setdefault(lab, []).append(by_id[tid])
    return groups


def cmd_project(cfg: PipelineConfig, args) -> int:
    spec = _spec(cfg)
    labels_path = _input_path(args.labels, cfg, "labels.csv")
    groups = _groups(cfg, labels_path)
    p = cfg.projection
    choices = [optimize_projection(spec, groups, tol=p.tol, angle_steps=p.angle_steps)]
    if args.pair:
        choices.append(optimize_projection(spec, groups, tol=p.tol, angle_steps=p.angle_steps, fixed=choices[0]))
    out = _out(cfg)
    doc = {
        "spec": spec.name,
        "lines": [
            {
                "angles": list(ch.line.angles),
                "direction": ch.line.direction.tolist(),
                "score": ch.score,
                "boxes": {str(lab): {"bot": list(map(float, b.bot)), "top": list(map(float, b.top))}
                          for lab, b in ch.boxes.items()},
            }
            for ch in choices
        ],
    }
    write_json(out / "projection.json", doc)
    write_projection_report(out / "projection_t.csv", choices[0].line, choices[0].t_star)
    print(f"{out / 'projection.json'}: separation {', '.join(f'{ch.score:.6g}' for ch in choices)}")
    return EXIT_OK


def combined_psl(specs: list[LabelSpec]) -> str:
    """One ``.psl`` document holding the conjunction of the box specifications."""
    base = specs[0].spec
    header = "".join(f"# {s.render()}\n" for s in specs)
    formula = make_and([s.formula() for s in specs])
    return header + pretty_print(ParametricSpec(formula, (), base.name))


def cmd_extract(cfg: PipelineConfig, args) -> int:
    spec = _spec(cfg)
    path = _input_path(args.projection, cfg, "projection.json")
    doc = read_json(path)
    try:
        lines = doc["lines"]
        labels = sorted(lines[0]["boxes"], key=int)
        boxes = [[Rectangle(np.array(ln["boxes"][lab]["bot"]), np.array(ln["boxes"][lab]["top"])) for ln in lines]
                 for lab in labels]
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise SchemaError(path, f"malformed projection file ({exc})") from None
    out = _out(cfg)
    for lab, rects in zip(labels, boxes):
        for r in rects:
            if r.dim != spec.n:
                raise SchemaError(path, f"box dimension {r.dim} does not match {spec.name} with {spec.n} parameters")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            specs = [extract_label_spec(spec, r) for r in rects]
        atomic_write_text(out / f"label_{lab}.psl", combined_psl(specs))
        print(f"label {lab}: " + " ∧ ".join(f"({s.render()})" if len(specs) > 1 else s.render() for s in specs))
    return EXIT_OK


def cmd_dimred(cfg: PipelineConfig, args) -> int:
    spec = _spec(cfg)
    traces = _traces(cfg)
    d = cfg.dimred
    line = LineProjection.diagonal(spec.n) if d.line is None else LineProjection.from_angles(*d.line)
    if line.dim != spec.n:
        raise ConfigError(f"dimred.line has {line.dim} coordinates, {spec.name} has {spec.n} parameters")
    result = dimred(spec, traces, line, cfg.projection.tol, d.bins)
    out = _out(cfg)
    write_projection_report(out / "dimred_positions.csv", line, result.positions)
    write_histogram(out / "histogram.csv", result)
    print(f"{out / 'histogram.csv'}: {len(traces) - result.absent} projected, {result.absent} miss the line")
    return EXIT_OK


def cmd_casestudy(cfg: PipelineConfig, args) -> int:
    from .pipeline import run_casestudy

    result = run_casestudy(cfg, out_dir=_out(cfg))
    rep = result.report
    _check(rep["stages"]["matched"] <= rep["stages"]["ideal_cluster"] <= rep["stages"]["after_filter"],
           "stage counts are not nested")
    print(json.dumps({k: rep[k] for k in ("stages", "false_negatives", "false_positives", "label_specs")},
                     indent=2, ensure_ascii=False))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    S = argparse.SUPPRESS
    g.add_argument("--config", default=S, help="JSON config file")
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--out-dir", dest="output_dir", default=S)
    g.add_argument("--delta", type=float, default=S, help="distance bracket width")
    g.add_argument("--eta", type=float, default=S, help="bisection tolerance")
    g.add_argument("--max-depth", dest="max_depth", type=int, default=S)
    g.add_argument("--spec", dest="spec_path", default=S, help=".psl file or bundled spec name")
    g.add_argument("--traces", dest="trace_dir", default=S, help="directory of trace CSVs")

    parser = argparse.ArgumentParser(prog="logidist", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boundary", parents=[common], help="approximate one trace's validity boundary")
    p.add_argument("trace", help="trace CSV file or trace id in the trace directory")
    p.add_argument("--precision", type=float, help="target max edge length (default: delta)")
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("distmat", parents=[common], help="pairwise logical distance intervals")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("cluster", parents=[common], help="label traces from distances or projected points")
    p.add_argument("--distances", help="distance CSV (default: OUT/distances.csv)")
    p.add_argument("--points", help="projection CSV for gmm (default: OUT/projection_t.csv)")
    p.add_argument("--method", choices=("agglomerative", "gmm"))
    p.add_argument("--k", type=int)
    p.add_argument("--linkage", choices=("single", "complete", "average"))
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("project", parents=[common], help="choose a separating projection line")
    p.add_argument("--labels", help="labeling CSV (default: OUT/labels.csv)")
    p.add_argument("--pair", action="store_true", help="also choose a second, complementary line")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("extract", parents=[common], help="write one label specification per label")
    p.add_argument("--projection", help="projection JSON (default: OUT/projection.json)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("dimred", parents=[common], help="histogram of line-projection positions")
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_dimred)

    p = sub.add_parser("casestudy-synthetic", parents=[common], help="run the synthetic traffic case study")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_casestudy)
    return parser


_TOP = ("seed", "output_dir", "delta", "eta", "max_depth", "spec_path", "trace_dir")


def _config_from_args(args) -> PipelineConfig:
    ns = vars(args)
    cfg = load_config(ns.get("config"), {k: ns[k] for k in _TOP if k in ns})
    cmd = args.command
    if cmd == "cluster":
        for key in ("method", "k", "linkage"):
            if ns.get(key) is not None:
                setattr(cfg.clustering, key, ns[key])
    elif cmd == "dimred" and ns.get("bins") is not None:
        cfg.dimred.bins = ns["bins"]
    elif cmd == "casestudy-synthetic":
        for key in ("k", "threshold"):
            if ns.get(key) is not None:
                setattr(cfg.casestudy, key, ns[key])
    return cfg.validate()


INPUT_ERRORS = (ConfigError, SpecError, IngestionError, SchemaError, ProjectionError, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return args.func(cfg, args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as exc:  # anything else is an internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
