"""Synthetic traffic case study.

rescale, two-line projection filter, GMM on the projected pair, locate the
idealized slow-down's cluster, refine that cluster by logical distance to
the ideal, and describe the refined set by two bounding-box specifications.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .boundary import BoundaryCache
from .config import PipelineConfig
from .distance import NotConvergedWarning, approx_dist
from .io import atomic_write_text, fmt, write_csv, write_gmm, write_json
from .learn import gmm_fit, gmm_predict, gmm_predict_many
from .project import LineProjection, candidate_lines, extract_label_spec, optimize_projection, project_t
from .specdsl import resolve_spec
from .synthetic import MPH_PER_AU, SECONDS_PER_TICK, idealized_slow_down, traffic_traces
from .trace import Rescaling, rescale

TARGET = "slow_down"


@dataclass
class CaseStudyResult:
    report: dict
    features: dict
    gmm_labels: dict
    distances: dict
    matched: list
    label_specs: list = field(default_factory=list)


def run_casestudy(cfg: PipelineConfig, out_dir=None) -> CaseStudyResult:
    cs = cfg.casestudy
    spec = resolve_spec(cs.spec)
    data = traffic_traces(cfg.seed)
    scale = Rescaling(1.0 / SECONDS_PER_TICK, 1.0 / MPH_PER_AU)
    traces = [rescale(t, scale) for t in data.traces]
    ideal = idealized_slow_down()
    lines = [LineProjection.from_angles(a) for a in cs.line_angles]

    def feature(tr):
        return tuple(project_t(spec, tr, ln, cfg.projection.tol) for ln in lines)

    features = {tr.id: feature(tr) for tr in traces}
    ideal_feat = feature(ideal)
    if None in ideal_feat:
        raise RuntimeError("the idealized slow-down misses a projection line")
    # a trace missing either line has no 2-D feature, so it is filtered
    kept = [tr for tr in traces if None not in features[tr.id]]

    x = np.array([features[tr.id] for tr in kept])
    model = gmm_fit(x, cs.k, seed=cfg.seed, n_init=cs.n_init)
    labels = gmm_predict_many(model, x)
    gmm_labels = {tr.id: int(lab) for tr, lab in zip(kept, labels)}
    ideal_label = gmm_predict(model, np.array(ideal_feat))
    members = [tr for tr in kept if gmm_labels[tr.id] == ideal_label]

    cache = BoundaryCache()
    distances = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        for tr in members:
            distances[tr.id] = approx_dist(spec, ideal, tr, cs.delta, cfg.max_depth, cfg.eta, cache)
    matched = [tr for tr in members if distances[tr.id].mid < cs.threshold]
    matched_ids = {tr.id for tr in matched}

    truth = set(data.ids(TARGET))
    fn = sorted(truth - matched_ids)
    fp = sorted(matched_ids - truth)

    label_specs, projections = [], []
    if matched and len(matched) < len(kept):
        # 0: refined slow-downs, 1: the rest of their cluster, then the other clusters
        groups = {0: matched}
        remainder = [tr for tr in members if tr.id not in matched_ids]
        if remainder:
            groups[1] = remainder
        for lab in sorted(set(gmm_labels.values()) - {ideal_label}):
            groups[len(groups)] = [tr for tr in kept if gmm_labels[tr.id] == lab]
        candidates = candidate_lines(spec.n, cfg.projection.angle_steps)
        tol = cfg.projection.tol
        first = optimize_projection(spec, groups, candidates, tol, focus=0)
        second = optimize_projection(spec, groups, candidates, tol, fixed=first, focus=0)
        projections = [first, second]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            label_specs = [extract_label_spec(spec, ch.boxes[0]) for ch in (first, second)]

    per_cat = lambda ids: {c: sum(1 for i in ids if data.categories[i] == c) for c in sorted(set(data.categories.values()))}
    report = {
        "seed": cfg.seed,
        "spec": spec.name,
        "line_angles": list(cs.line_angles),
        "k": cs.k,
        "threshold": cs.threshold,
        "stages": {
            "generated": len(traces),
            "after_filter": len(kept),
            "ideal_cluster": len(members),
            "matched": len(matched),
        },
        "by_category": {
            "generated": per_cat([t.id for t in traces]),
            "after_filter": per_cat([t.id for t in kept]),
            "ideal_cluster": per_cat([t.id for t in members]),
            "matched": per_cat(matched_ids),
        },
        "ideal_feature": list(ideal_feat),
        "ideal_cluster_label": int(ideal_label),
        "false_negatives": len(fn),
        "false_positives": len(fp),
        "false_negative_ids": fn,
        "false_positive_ids": fp,
        "label_specs": [ls.render() for ls in label_specs],
        "label_spec_lines": [
            {"angles": list(ch.line.angles), "separation": ch.score} for ch in projections
        ],
    }
    result = CaseStudyResult(report, features, gmm_labels, distances, [t.id for t in matched], label_specs)
    if out_dir is not None:
        write_casestudy(out_dir, result, data.categories, model)
    return result


def write_casestudy(out_dir, result: CaseStudyResult, categories: dict, model) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for tid, (t1, t2) in result.features.items():
        lab = result.gmm_labels.get(tid)
        rows.append([tid, categories[tid], "" if t1 is None else fmt(t1), "" if t2 is None else fmt(t2),
                     "" if lab is None else lab])
    write_csv(out / "features.csv", ["trace_id", "category", "t1", "t2", "gmm_label"], rows)
    write_gmm(out / "gmm.json", model)
    write_csv(
        out / "refinement.csv",
        ["trace_id", "lo", "hi", "converged", "matched"],
        [[tid, fmt(iv.lo), fmt(iv.hi), int(iv.converged), int(tid in result.matched)]
         for tid, iv in result.distances.items()],
    )
    for k, ls in enumerate(result.label_specs, 1):
        atomic_write_text(out / f"slow_down_{k}.psl", ls.to_psl())
    write_json(out / "report.json", result.report)
