"""Interval-bounded logical distance between traces.

The logical distance is the infinity-norm Hausdorff distance between two
validity-domain boundaries. Boundaries are only known up to their rectangle
covers, so distances come back as ``[lo, hi]`` brackets that tighten as the
covers are refined.
"""
from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .boundary import DEFAULT_ETA, BoundaryApprox, BoundaryCache, Rectangle
from .specdsl import ParametricSpec
from .trace import Trace

DEFAULT_DELTA = 0.01
DEFAULT_MAX_DEPTH = 20


class NotConvergedWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DistanceInterval:
    lo: float
    hi: float
    converged: bool = True
    depth: int = 0

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, value) -> bool:
        return self.lo <= value <= self.hi


# ---------------------------------------------------------------- point clouds


def corners(bots: np.ndarray, tops: np.ndarray) -> np.ndarray:
    """All ``2^n`` corners of every box, deduplicated (rows sorted)."""
    bots = np.atleast_2d(bots)
    tops = np.atleast_2d(tops)
    if bots.shape[0] == 0:
        raise ValueError("cannot discretize an empty rectangle set")
    n = bots.shape[1]
    pts = [np.where(mask, tops, bots) for mask in itertools.product((False, True), repeat=n)]
    return np.unique(np.vstack(pts), axis=0)


def discretize(rects) -> np.ndarray:
    """Corner point cloud of a rectangle set or a :class:`BoundaryApprox`."""
    if isinstance(rects, BoundaryApprox):
        return corners(rects.bots, rects.tops)
    rects = list(rects)
    if not rects:
        raise ValueError("cannot discretize an empty rectangle set")
    bots = np.array([r.bot for r in rects], dtype=float)
    tops = np.array([r.top for r in rects], dtype=float)
    return corners(bots, tops)


# --------------------------------------------------------------------- Hausdorff


def directed_brute(a: np.ndarray, b: np.ndarray, chunk: int = 2048) -> float:
    """``sup_{p in a} inf_{q in b} |p - q|_inf`` by exhaustive comparison."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    best = 0.0
    for start in range(0, a.shape[0], chunk):
        block = a[start : start + chunk]
        d = np.max(np.abs(block[:, None, :] - b[None, :, :]), axis=2)
        best = max(best, float(np.max(np.min(d, axis=1))))
    return best


def directed_kdtree(a: np.ndarray, b: np.ndarray) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d, _ = cKDTree(b).query(a, k=1, p=np.inf)
    return float(np.max(d))


def directed_early_break(a: np.ndarray, b: np.ndarray, seed: int = 0) -> float:
    """Branch-and-bound directed distance.

    Points of ``a`` are visited in random order; the scan over ``b`` stops as
    soon as a neighbour closer than the running maximum is found, because
    such a point cannot raise the supremum.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    rng = np.random.default_rng(seed)
    a = a[rng.permutation(a.shape[0])]
    b = b[rng.permutation(b.shape[0])]
    cmax = 0.0
    block = 256
    for p in a:
        cmin = np.inf
        for start in range(0, b.shape[0], block):
            d = np.max(np.abs(b[start : start + block] - p), axis=1)
            cmin = min(cmin, float(d.min()))
            if cmin < cmax:
                break
        if cmin > cmax:
            cmax = cmin
    return cmax


_DIRECTED = {"brute": directed_brute, "kdtree": directed_kdtree, "prune": directed_early_break}


def hausdorff_inf(a, b, method: str = "kdtree") -> float:
    """Symmetric infinity-norm Hausdorff distance between two point clouds."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point clouds must be nonempty")
    f = _DIRECTED[method]
    return max(f(a, b), f(b, a))


def error_interval(d_hat: float, eps: float) -> DistanceInterval:
    if d_hat < 0 or eps < 0:
        raise ValueError("d_hat and eps must be non-negative")
    return DistanceInterval(max(0.0, d_hat - eps), d_hat + eps)


# --------------------------------------------------------------- Algorithm loop


def interval_at_depth(bx: BoundaryApprox, by: BoundaryApprox, method: str = "kdtree") -> DistanceInterval:
    d_hat = hausdorff_inf(discretize(bx), discretize(by), method)
    iv = error_interval(d_hat, max(bx.eps, by.eps))
    return DistanceInterval(iv.lo, iv.hi, True, max(bx.depth, by.depth))


def approx_dist(
    spec: ParametricSpec,
    x: Trace,
    y: Trace,
    delta: float = DEFAULT_DELTA,
    max_depth: int = DEFAULT_MAX_DEPTH,
    eta: float = DEFAULT_ETA,
    cache: Optional[BoundaryCache] = None,
    method: str = "kdtree",
) -> DistanceInterval:
    """Deepen both boundary covers until the distance bracket is at most ``delta`` wide.

    The returned interval has ``converged=False`` when ``max_depth`` is reached
    first.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    cache = cache if cache is not None else BoundaryCache()
    depth = 0
    while True:
        bx = cache.get(spec, x, depth, eta)
        by = cache.get(spec, y, depth, eta)
        iv = interval_at_depth(bx, by, method)
        if iv.width <= delta:
            return DistanceInterval(iv.lo, iv.hi, True, depth)
        if depth >= max_depth:
            warnings.warn(
                f"distance between {x.id!r} and {y.id!r} not within {delta} after depth {depth}",
                NotConvergedWarning,
                stacklevel=2,
            )
            return DistanceInterval(iv.lo, iv.hi, False, depth)
        depth += 1


class DistanceMatrix:
    """Symmetric matrix of :class:`DistanceInterval` indexed by trace id."""

    def __init__(self, ids: Sequence[str], entries: dict):
        self.ids = list(ids)
        self._entries = entries

    def __getitem__(self, key) -> DistanceInterval:
        i, j = key
        return self._entries[(i, j)] if (i, j) in self._entries else self._entries[(j, i)]

    @property
    def pairs(self) -> list[tuple[str, str, DistanceInterval]]:
        out = []
        for a, b in itertools.combinations(range(len(self.ids)), 2):
            i, j = self.ids[a], self.ids[b]
            out.append((i, j, self[i, j]))
        return out

    @property
    def converged(self) -> bool:
        return all(iv.converged for _, _, iv in self.pairs)

    def array(self, which: str = "mid") -> np.ndarray:
        n = len(self.ids)
        out = np.zeros((n, n))
        for a, b in itertools.combinations(range(n), 2):
            iv = self[self.ids[a], self.ids[b]]
            out[a, b] = out[b, a] = getattr(iv, which)
        return out


def distance_matrix(
    spec: ParametricSpec,
    traces: Sequence[Trace],
    delta: float = DEFAULT_DELTA,
    max_depth: int = DEFAULT_MAX_DEPTH,
    eta: float = DEFAULT_ETA,
    cache: Optional[BoundaryCache] = None,
    workers: int = 1,
    method: str = "kdtree",
) -> DistanceMatrix:
    if len(traces) < 2:
        raise ValueError("need at least two traces")
    ids = [t.id for t in traces]
    if len(set(ids)) != len(ids):
        raise ValueError("trace ids must be unique")
    cache = cache if cache is not None else BoundaryCache()

    def job(pair):
        x, y = pair
        return approx_dist(spec, x, y, delta, max_depth, eta, cache, method)

    pairs = list(itertools.combinations(traces, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConvergedWarning)
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(job, pairs))
        else:
            results = [job(p) for p in pairs]
    entries = {(x.id, y.id): iv for (x, y), iv in zip(pairs, results)}
    for t in traces:
        entries[(t.id, t.id)] = approx_dist(spec, t, t, delta, max_depth, eta, cache, method)
    dm = DistanceMatrix(ids, entries)
    if not dm.converged:
        warnings.warn("some distance pairs did not converge", NotConvergedWarning, stacklevel=2)
    return dm


def write_distance_matrix(path, dm: DistanceMatrix) -> None:
    from .io import fmt, write_csv

    rows = [[i, j, fmt(iv.lo), fmt(iv.hi), int(iv.converged)] for i, j, iv in dm.pairs]
    write_csv(path, ["i", "j", "lo", "hi", "converged"], rows)


def read_distance_matrix(path) -> DistanceMatrix:
    from .io import SchemaError, read_csv

    rows = read_csv(path, ["i", "j", "lo", "hi", "converged"])
    ids: list[str] = []
    entries = {}
    for r in rows:
        for k in (r["i"], r["j"]):
            if k not in ids:
                ids.append(k)
        try:
            iv = DistanceInterval(float(r["lo"]), float(r["hi"]), bool(int(r["converged"])))
        except ValueError as exc:
            raise SchemaError(path, f"bad row {r}: {exc}") from None
        entries[(r["i"], r["j"])] = iv
    for k in ids:
        entries[(k, k)] = DistanceInterval(0.0, 0.0)
    n = len(ids)
    if len(rows) != n * (n - 1) // 2:
        raise SchemaError(path, f"{len(rows)} rows do not form a complete matrix over {n} ids")
    return DistanceMatrix(ids, entries)
