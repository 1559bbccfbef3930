"""Rectangle over-approximations of validity-domain boundaries.

Each refinement bisects the diagonal of every stored rectangle to bracket the
point where the specification flips from false to true, then keeps the
incomparable sub-boxes around that crossing plus the tiny bracket box. Only
*mixed* boxes (false at the bottom corner, true at the top corner) can meet
the boundary of an upward-closed domain, so all others are dropped.
"""
from __future__ import annotations

import enum
import itertools
import threading
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .specdsl import ParametricSpec, evaluate_many
from .trace import Trace

DEFAULT_ETA = 1e-4
# bracket boxes thinner than this are dropped
MACHINE_TOL = 1e-12


class DegenerateBoundaryWarning(UserWarning):
    """The specification is constant on the whole unit box for a trace."""


class BoxClass(enum.Enum):
    ALL_TRUE = "all_true"
    ALL_FALSE = "all_false"
    MIXED = "mixed"


@dataclass(frozen=True)
class Rectangle:
    bot: tuple
    top: tuple

    def __post_init__(self):
        bot = tuple(float(v) for v in self.bot)
        top = tuple(float(v) for v in self.top)
        if len(bot) != len(top):
            raise ValueError("corner dimensions differ")
        if any(b > t for b, t in zip(bot, top)):
            raise ValueError(f"bot {bot} is not below top {top}")
        if any(v < 0 or v > 1 for v in bot + top):
            raise ValueError(f"rectangle {bot}-{top} leaves the unit box")
        object.__setattr__(self, "bot", bot)
        object.__setattr__(self, "top", top)

    @property
    def dim(self) -> int:
        return len(self.bot)

    @property
    def edges(self) -> tuple:
        return tuple(t - b for b, t in zip(self.bot, self.top))

    @property
    def max_edge(self) -> float:
        return max(self.edges, default=0.0)

    @classmethod
    def unit(cls, n: int) -> "Rectangle":
        return cls((0.0,) * n, (1.0,) * n)


@dataclass(frozen=True, eq=False)
class BoundaryApprox:
    """Rectangles covering the boundary of one trace's validity domain.

    ``bots`` and ``tops`` are ``(k, n)`` arrays. A degenerate approximation
    (specification constant on the box) holds a single zero-size sentinel
    rectangle: the origin when everything is true, the all-ones corner when
    everything is false.
    """

    spec_id: str
    trace_id: str
    depth: int
    bots: np.ndarray
    tops: np.ndarray
    eta: float = DEFAULT_ETA
    degenerate: Optional[str] = None

    def __post_init__(self):
        for name in ("bots", "tops"):
            arr = np.array(getattr(self, name), dtype=float, ndmin=2)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.bots.shape != self.tops.shape:
            raise ValueError("bots and tops differ in shape")

    def __len__(self):
        return self.bots.shape[0]

    @property
    def dim(self) -> int:
        return self.bots.shape[1]

    @property
    def rects(self) -> list[Rectangle]:
        return [Rectangle(b, t) for b, t in zip(self.bots.tolist(), self.tops.tolist())]

    @property
    def max_edge(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(self.tops - self.bots))

    @property
    def eps(self) -> float:
        """Twice the largest edge plus twice the bisection slack."""
        if self.degenerate is not None:
            return 0.0
        return 2.0 * self.max_edge + 2.0 * self.eta


# --------------------------------------------------------------- classification


def classify_many(spec: ParametricSpec, trace: Trace, bots, tops) -> np.ndarray:
    """Vectorised :func:`classify_box`; returns an array of :class:`BoxClass`."""
    bots = np.atleast_2d(bots)
    tops = np.atleast_2d(tops)
    k = bots.shape[0]
    if k == 0:
        return np.empty(0, dtype=object)
    truth = evaluate_many(spec, trace, np.vstack([bots, tops]))
    bot_true, top_true = truth[:k], truth[k:]
    out = np.full(k, BoxClass.MIXED, dtype=object)
    out[~top_true] = BoxClass.ALL_FALSE
    out[bot_true] = BoxClass.ALL_TRUE
    return out


def _mixed_mask(spec, trace, bots, tops) -> np.ndarray:
    k = bots.shape[0]
    if k == 0:
        return np.zeros(0, dtype=bool)
    truth = evaluate_many(spec, trace, np.vstack([bots, tops]))
    return ~truth[:k] & truth[k:]


def classify_box(spec: ParametricSpec, trace: Trace, r: Rectangle) -> BoxClass:
    return classify_many(spec, trace, [r.bot], [r.top])[0]


# ------------------------------------------------------------ diagonal search


def _lerp(bots, tops, t):
    t = t[:, None]
    return bots * (1.0 - t) + tops * t


def crossings(spec: ParametricSpec, trace: Trace, bots, tops, eta: float = DEFAULT_ETA):
    """Bisect the diagonals of many rectangles at once.

    Returns ``(p_false, p_true)`` arrays. Rows that are not mixed get the
    diagonal midpoint for both points.
    """
    bots = np.atleast_2d(np.asarray(bots, dtype=float))
    tops = np.atleast_2d(np.asarray(tops, dtype=float))
    k = bots.shape[0]
    span = np.max(tops - bots, axis=1) if bots.shape[1] else np.zeros(k)
    lo = np.zeros(k)
    hi = np.ones(k)
    mixed = _mixed_mask(spec, trace, bots, tops)
    active = mixed & (span > eta)
    while np.any(active):
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo[idx] + hi[idx])
        ok = evaluate_many(spec, trace, _lerp(bots[idx], tops[idx], mid))
        hi[idx[ok]] = mid[ok]
        lo[idx[~ok]] = mid[~ok]
        active[idx] = (hi[idx] - lo[idx]) * span[idx] > eta
    lo[~mixed] = 0.5
    hi[~mixed] = 0.5
    return _lerp(bots, tops, lo), _lerp(bots, tops, hi)


def diagonal_crossing(spec: ParametricSpec, trace: Trace, r: Rectangle, eta: float = DEFAULT_ETA):
    pf, pt = crossings(spec, trace, [r.bot], [r.top], eta)
    return tuple(pf[0].tolist()), tuple(pt[0].tolist())


# ----------------------------------------------------------------- refinement


def _incomparable_masks(n: int) -> np.ndarray:
    """Per-axis high/low choices excluding all-low and all-high; ``(2^n - 2, n)``."""
    combos = list(itertools.product((False, True), repeat=n))[1:-1]
    return np.array(combos, dtype=bool).reshape(-1, n)


def _halve_long_edges(bots, tops, limit):
    """Split boxes at their midpoints along every edge longer than ``limit`` (per row)."""
    while True:
        edges = tops - bots
        long = edges > limit[:, None]
        if not long.any():
            return bots, tops
        row, axis = np.nonzero(long)
        # one axis per row per pass
        row, first = np.unique(row, return_index=True)
        axis = axis[first]
        mid = 0.5 * (bots[row, axis] + tops[row, axis])
        upper_b = bots[row].copy()
        upper_t = tops[row].copy()
        upper_b[np.arange(row.size), axis] = mid
        tops = tops.copy()
        tops[row, axis] = mid
        bots = np.vstack([bots, upper_b])
        tops = np.vstack([tops, upper_t])
        limit = np.concatenate([limit, limit[row]])


def refine(spec: ParametricSpec, trace: Trace, b: BoundaryApprox, eta: Optional[float] = None) -> BoundaryApprox:
    """One refinement step: ``approx^i -> approx^(i+1)``.

    Boxes already no longer than half the current largest edge are carried
    over unchanged. Every other box is split around its diagonal crossing, and
    any resulting piece longer than that half is bisected again, so the
    largest edge at least halves every step.
    """
    eta = b.eta if eta is None else eta
    if b.degenerate is not None or len(b) == 0:
        return replace(b, depth=b.depth + 1)
    bots, tops = np.array(b.bots), np.array(b.tops)
    n = bots.shape[1]
    target = 0.5 * b.max_edge
    done = np.max(tops - bots, axis=1) <= target
    kept_b, kept_t = bots[done], tops[done]
    bots, tops = bots[~done], tops[~done]

    pf, pt = crossings(spec, trace, bots, tops, eta)
    # High halves start at p_false and low halves end at p_true, so the
    # incomparable boxes overlap by the bracket width and jointly cover every
    # boundary point outside the cones below p_false and above p_true.
    masks = _incomparable_masks(n)
    cand_b = [np.where(mask, pf, bots) for mask in masks]
    cand_t = [np.where(mask, tops, pt) for mask in masks]
    bracket = np.max(pt - pf, axis=1) > MACHINE_TOL
    cand_b.append(pf[bracket])
    cand_t.append(pt[bracket])

    cb, ct = np.vstack(cand_b), np.vstack(cand_t)
    cb, ct = _halve_long_edges(cb, ct, np.full(cb.shape[0], target))
    keep = _mixed_mask(spec, trace, cb, ct)
    boxes = np.unique(
        np.vstack([np.hstack([kept_b, kept_t]), np.hstack([cb[keep], ct[keep]])]), axis=0
    )
    return replace(b, depth=b.depth + 1, bots=boxes[:, :n], tops=boxes[:, n:], eta=eta)


def initial_approx(spec: ParametricSpec, trace: Trace, eta: float = DEFAULT_ETA) -> BoundaryApprox:
    """``approx^0``: the unit box, or a sentinel if the formula is constant on it."""
    n = spec.n
    unit = Rectangle.unit(n)
    cls = classify_box(spec, trace, unit)
    if cls is BoxClass.MIXED:
        return BoundaryApprox(spec.name, trace.id, 0, [unit.bot], [unit.top], eta)
    corner = np.zeros(n) if cls is BoxClass.ALL_TRUE else np.ones(n)
    warnings.warn(
        f"specification {spec.name!r} is {cls.value.replace('_', ' ')} on the whole box "
        f"for trace {trace.id!r}; using a sentinel boundary point",
        DegenerateBoundaryWarning,
        stacklevel=3,
    )
    return BoundaryApprox(spec.name, trace.id, 0, [corner], [corner], eta, degenerate=cls.value)


class BoundaryCache:
    """Memo of per-depth approximations keyed by (spec, trace, eta).

    Reads are lock-free; extending a chain happens under a single lock so
    concurrent callers never build the same depth twice.
    """

    def __init__(self):
        self._chains: dict = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._chains)

    def get(self, spec: ParametricSpec, trace: Trace, depth: int, eta: float = DEFAULT_ETA) -> BoundaryApprox:
        key = (spec, trace, float(eta))
        chain = self._chains.get(key)
        if chain is not None and len(chain) > depth:
            return chain[depth]
        with self._lock:
            chain = self._chains.get(key)
            if chain is None:
                chain = [initial_approx(spec, trace, eta)]
            else:
                chain = list(chain)
            while len(chain) <= depth:
                chain.append(refine(spec, trace, chain[-1], eta))
            self._chains[key] = chain
            return chain[depth]


def approx_to_depth(
    spec: ParametricSpec,
    trace: Trace,
    i: int,
    eta: float = DEFAULT_ETA,
    cache: Optional[BoundaryCache] = None,
) -> BoundaryApprox:
    if i < 0:
        raise ValueError("depth must be non-negative")
    if cache is not None:
        return cache.get(spec, trace, i, eta)
    b = initial_approx(spec, trace, eta)
    for _ in range(i):
        b = refine(spec, trace, b, eta)
    return b


def approx_to_precision(
    spec: ParametricSpec,
    trace: Trace,
    max_edge: float,
    eta: float = DEFAULT_ETA,
    max_depth: int = 30,
    cache: Optional[BoundaryCache] = None,
) -> BoundaryApprox:
    """Shallowest approximation whose largest edge is at most ``max_edge``."""
    cache = cache or BoundaryCache()
    for depth in range(max_depth + 1):
        b = cache.get(spec, trace, depth, eta)
        if b.max_edge <= max_edge:
            return b
    return b


# ------------------------------------------------------------------------- I/O


def write_boundary(b: BoundaryApprox, path) -> None:
    from .io import atomic_write_text

    n = b.dim
    lines = [
        f"# depth={b.depth}",
        f"# eps={b.eps!r}",
        f"# eta={b.eta!r}",
        f"# spec_id={b.spec_id}",
        f"# trace_id={b.trace_id}",
        f"# degenerate={b.degenerate or ''}",
        ",".join([f"bot_{j + 1}" for j in range(n)] + [f"top_{j + 1}" for j in range(n)]),
    ]
    for bot, top in zip(b.bots.tolist(), b.tops.tolist()):
        lines.append(",".join(repr(v) for v in bot + top))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_boundary(path) -> BoundaryApprox:
    header: dict[str, str] = {}
    rows = []
    columns = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key.strip()] = value.strip()
        elif columns is None:
            columns = line.split(",")
        else:
            rows.append([float(v) for v in line.split(",")])
    if columns is None or len(columns) % 2:
        raise ValueError(f"{path}: malformed boundary file")
    n = len(columns) // 2
    arr = np.array(rows, dtype=float).reshape(-1, 2 * n)
    return BoundaryApprox(
        header.get("spec_id", ""),
        header.get("trace_id", ""),
        int(header["depth"]),
        arr[:, :n],
        arr[:, n:],
        float(header.get("eta", DEFAULT_ETA)),
        header.get("degenerate") or None,
    )
