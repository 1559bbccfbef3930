import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_boundary, hausdorff_inf_brute, phi_ex_grid, random_step_trace
from logidist.boundary import BoundaryCache, Rectangle, approx_to_depth
from logidist.distance import (
    DistanceInterval,
    NotConvergedWarning,
    approx_dist,
    corners,
    discretize,
    distance_matrix,
    error_interval,
    hausdorff_inf,
    read_distance_matrix,
    write_distance_matrix,
)
from logidist.specdsl import phi_ex
from logidist.synthetic import intro_traces
from logidist.trace import Trace

PHI = phi_ex()


def const(v, tid=None):
    return Trace(tid or f"c{v}", np.linspace(0, 1, 11), np.full(11, v))


def test_discretize_single_rectangle():
    pts = discretize([Rectangle((0, 0.25), (0.5, 1))])
    assert sorted(map(tuple, pts.tolist())) == [(0, 0.25), (0, 1), (0.5, 0.25), (0.5, 1)]


def test_discretize_shared_corner_once():
    pts = discretize([Rectangle((0, 0), (0.5, 0.5)), Rectangle((0.5, 0.5), (1, 1))])
    assert len(pts) == 7


def test_discretize_disjoint():
    rects = [Rectangle((k / 10, k / 10), (k / 10 + 0.05, k / 10 + 0.05)) for k in range(5)]
    assert len(discretize(rects)) == 20


def test_discretize_empty():
    with pytest.raises(ValueError):
        discretize([])


@pytest.mark.parametrize("method", ["brute", "kdtree", "prune"])
def test_hausdorff_examples(method):
    assert hausdorff_inf([[0, 0]], [[1, 0]], method) == 1
    assert hausdorff_inf([[0, 0], [1, 0]], [[0, 0]], method) == 1
    assert hausdorff_inf([[0.2, 0.3], [0.4, 0.1]], [[0.4, 0.1], [0.2, 0.3]], method) == 0


clouds = st.integers(1, 40).flatmap(
    lambda k: st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=k, max_size=k)
)


@settings(max_examples=100)
@given(clouds, clouds)
def test_hausdorff_variants_agree(a, b):
    ref = hausdorff_inf_brute(np.array(a), np.array(b))
    for method in ("brute", "kdtree", "prune"):
        assert hausdorff_inf(a, b, method) == ref


def test_error_interval_examples():
    iv = error_interval(0.4, 0.1)
    assert (iv.lo, iv.hi) == pytest.approx((0.3, 0.5))
    iv = error_interval(0.05, 0.1)
    assert iv.lo == 0 and iv.hi == pytest.approx(0.15)
    assert error_interval(0.2, 0.0) == DistanceInterval(0.2, 0.2)


def test_interval_invariant():
    with pytest.raises(ValueError):
        DistanceInterval(0.5, 0.2)
    with pytest.raises(ValueError):
        DistanceInterval(-0.1, 0.2)


def test_identity():
    x = const(0.4)
    iv = approx_dist(PHI, x, x, delta=0.01)
    assert iv.lo == 0 and iv.hi <= 0.01 and iv.converged


def test_constant_traces_against_oracle():
    x, y = const(0.3), const(0.6)
    iv = approx_dist(PHI, x, y, delta=0.02)
    assert iv.width <= 0.02
    ax, tx = phi_ex_grid(x.times, x.values)
    _, ty = phi_ex_grid(y.times, y.values)
    d = hausdorff_inf_brute(grid_boundary(ax, tx), grid_boundary(ax, ty))
    assert iv.lo - 2 / 512 <= d <= iv.hi + 2 / 512
    assert 0.3 in iv


def test_intro_pair_ordering():
    tr = intro_traces()
    cache = BoundaryCache()
    d01 = approx_dist(PHI, tr[0], tr[1], 0.02, cache=cache)
    d05 = approx_dist(PHI, tr[0], tr[5], 0.02, cache=cache)
    assert d01.hi < d05.lo


def test_symmetry_exact():
    rng = np.random.default_rng(4)
    a = Trace("a", *random_step_trace(rng, 20))
    b = Trace("b", *random_step_trace(rng, 20))
    assert approx_dist(PHI, a, b, 0.02) == approx_dist(PHI, b, a, 0.02)


def test_not_converged_flag():
    x, y = const(0.3), const(0.6)
    with pytest.warns(NotConvergedWarning):
        iv = approx_dist(PHI, x, y, delta=1e-6, max_depth=2)
    assert not iv.converged and iv.depth == 2


def test_eps_strictly_decreases():
    rng = np.random.default_rng(1)
    t = Trace("r", *random_step_trace(rng))
    eps = [approx_to_depth(PHI, t, i).eps for i in range(8)]
    assert all(b < a for a, b in zip(eps, eps[1:]))


def test_pruned_route_matches_unpruned():
    tr = intro_traces()
    for a, b in [(0, 1), (2, 5), (3, 4)]:
        ref = approx_dist(PHI, tr[a], tr[b], 0.02, method="brute")
        assert approx_dist(PHI, tr[a], tr[b], 0.02, method="prune") == ref
        assert approx_dist(PHI, tr[a], tr[b], 0.02, method="kdtree") == ref


def test_distance_matrix_and_file(tmp_path):
    tr = intro_traces()
    dm = distance_matrix(PHI, tr, delta=0.02)
    assert len(dm.pairs) == 15
    for t in tr:
        assert dm[t.id, t.id].lo == 0 and dm[t.id, t.id].hi <= 0.02
    for a, b in itertools.combinations([t.id for t in tr], 2):
        assert dm[a, b] is dm[b, a]
    path = tmp_path / "d.csv"
    write_distance_matrix(path, dm)
    assert path.read_text().splitlines()[0] == "i,j,lo,hi,converged"
    back = read_distance_matrix(path)
    assert np.array_equal(back.array("lo"), dm.array("lo"))
    assert np.array_equal(back.array("hi"), dm.array("hi"))


def test_identical_traces_zero_off_diagonal():
    dm = distance_matrix(PHI, [const(0.5, "a"), const(0.5, "b")], delta=0.02)
    assert dm["a", "b"].lo == 0


def test_threaded_matrix_matches_serial():
    tr = intro_traces()[:4]
    serial = distance_matrix(PHI, tr, delta=0.05)
    threaded = distance_matrix(PHI, tr, delta=0.05, workers=3)
    for (a, b, iv), (_, _, jv) in zip(serial.pairs, threaded.pairs):
        assert iv == jv


def test_corners_count():
    bots = np.array([[0.0, 0.0, 0.0]])
    tops = np.array([[0.5, 0.5, 0.5]])
    assert corners(bots, tops).shape == (8, 3)


# ----------------------------------------------------------- metric properties

def _three(seed):
    rng = np.random.default_rng(seed)
    return [Trace(f"t{k}", *random_step_trace(rng, 12)) for k in range(3)]


@settings(max_examples=8)
@given(st.integers(0, 10_000))
def test_metric_properties_on_random_traces(seed):
    delta = 0.05
    x, y, z = _three(seed)
    cache = BoundaryCache()
    dxy = approx_dist(PHI, x, y, delta, cache=cache)
    dyx = approx_dist(PHI, y, x, delta, cache=cache)
    dxz = approx_dist(PHI, x, z, delta, cache=cache)
    dzy = approx_dist(PHI, z, y, delta, cache=cache)
    assert dxy == dyx
    for iv in (dxy, dxz, dzy):
        assert iv.converged and iv.width <= delta + 1e-12
    # the triangle inequality survives with each side's error allowance
    assert dxy.lo <= dxz.hi + dzy.hi
    assert approx_dist(PHI, x, x, delta, cache=cache).lo == 0
