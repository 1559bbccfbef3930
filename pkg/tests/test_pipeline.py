import json

import numpy as np
import pytest

from oracles import grid_boundary, hausdorff_inf_brute, phi_ex_grid
from logidist.config import ConfigError, PipelineConfig, load_config
from logidist.distance import approx_dist
from logidist.project import LineProjection, project_t
from logidist.specdsl import bundled_spec
from logidist.synthetic import (
    CATEGORY_COUNTS,
    MPH_PER_AU,
    SECONDS_PER_TICK,
    idealized_slow_down,
    traffic_traces,
)
from logidist.trace import Rescaling, Trace, rescale

TICKS = bundled_spec("phi_ex_ticks")
SCALE = Rescaling(1.0 / SECONDS_PER_TICK, 1.0 / MPH_PER_AU)


def oracle_points(trace):
    # tau in ticks over [0, 20] maps to the unit axis
    axis, table = phi_ex_grid(trace.times / 20.0, trace.values, 256)
    return grid_boundary(axis, table)


def test_generator_counts_and_determinism():
    a, b = traffic_traces(0), traffic_traces(0)
    assert len(a.traces) == sum(CATEGORY_COUNTS.values())
    assert len(a.ids("slow_down")) == CATEGORY_COUNTS["slow_down"]
    assert all(np.array_equal(x.values, y.values) for x, y in zip(a.traces, b.traces))


def test_threshold_rejects_far_decoys():
    ideal = idealized_slow_down()
    ref = oracle_points(ideal)
    decoys = [Trace(f"d{v}", np.linspace(0, 20, 41), np.full(41, v)) for v in (0.02, 0.05, 0.95, 1.0)]
    far = [d for d in decoys if hausdorff_inf_brute(ref, oracle_points(d)) > 0.5]
    assert far, "no decoy at oracle distance > 0.5"
    for d in far:
        assert approx_dist(TICKS, ideal, d, 0.02).mid > 0.3


def test_threshold_keeps_synthetic_slow_downs():
    data = traffic_traces(0)
    ideal = idealized_slow_down()
    by_id = {t.id: t for t in data.traces}
    for tid in data.ids("slow_down")[:8]:
        tr = rescale(by_id[tid], SCALE)
        assert approx_dist(TICKS, ideal, tr, 0.02).mid < 0.3


def test_filter_lines_hit_ideal_and_miss_all_true_trace():
    lines = [LineProjection.from_angles(a) for a in (0.46, 1.36)]
    ideal = idealized_slow_down()
    assert all(project_t(TICKS, ideal, ln) is not None for ln in lines)
    crawl = Trace("slow", np.linspace(0, 20, 41), np.full(41, -0.1))
    assert all(project_t(TICKS, crawl, ln) is None for ln in lines)


def test_config_round_trip_and_overrides(tmp_path):
    cfg = PipelineConfig(seed=3)
    cfg.clustering.k = 4
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = load_config(path, {"delta": 0.05, "seed": None})
    assert back.seed == 3 and back.clustering.k == 4 and back.delta == 0.05


@pytest.mark.parametrize(
    "doc",
    [
        {"delta": 0},
        {"eta": -1},
        {"clustering": {"method": "dbscan"}},
        {"clustering": {"k": 0}},
        {"projection": {"angle_steps": 0}},
        {"casestudy": {"line_angles": [0.46]}},
        {"mystery": 1},
    ],
)
def test_config_rejects_bad_values(tmp_path, doc):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_missing_file():
    with pytest.raises((ConfigError, OSError)):
        load_config("/nonexistent/cfg.json")
