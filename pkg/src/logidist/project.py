"""Projections of boundaries onto origin-anchored lines, and what they buy:
post-facto label separation, label specifications and 1-D embeddings."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .boundary import Rectangle
from .specdsl import (
    And,
    Not,
    ParametricSpec,
    evaluate_many,
    evaluate_raw_many,
    fmt_number,
    pretty_print,
    substitute,
    to_nnf,
)
from .trace import Trace

DEFAULT_TOL = 1e-4
DEFAULT_ANGLE_STEPS = 90
DEFAULT_BINS = 20


class ProjectionError(ValueError):
    pass


class ZeroWidthBoxWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LineProjection:
    """The segment ``gamma(t) = t * u`` for ``t`` in ``[0, 1]``, where ``u`` is the
    point at which the ray leaves the unit box."""

    direction: np.ndarray
    angles: tuple = ()

    def __post_init__(self):
        u = np.asarray(self.direction, dtype=float).ravel()
        if np.any(u < 0) or u.max() <= 0:
            raise ValueError("direction must be non-negative and nonzero")
        u = u / u.max()
        u.flags.writeable = False
        object.__setattr__(self, "direction", u)

    @property
    def dim(self) -> int:
        return self.direction.size

    def __call__(self, t):
        return np.multiply.outer(np.asarray(t, dtype=float), self.direction)

    @classmethod
    def from_angles(cls, *angles: float) -> "LineProjection":
        """Hyperspherical angles measured from the first axis; in 2-D a single
        angle in ``(0, pi/2)`` from the first parameter axis."""
        d = []
        s = 1.0
        for a in angles:
            d.append(s * math.cos(a))
            s *= math.sin(a)
        d.append(s)
        return cls(np.clip(np.array(d), 0.0, None), tuple(float(a) for a in angles))

    @classmethod
    def diagonal(cls, n: int) -> "LineProjection":
        return cls(np.ones(n), (math.pi / 4,) * (n - 1))


def candidate_lines(n: int, steps: int = DEFAULT_ANGLE_STEPS) -> list[LineProjection]:
    """Uniform angle grid with ``steps`` cell midpoints per angular dimension."""
    grid = (np.arange(steps) + 0.5) * (math.pi / 2) / steps
    return [LineProjection.from_angles(*combo) for combo in itertools.product(grid, repeat=n - 1)]


def line_crossings(spec: ParametricSpec, trace: Trace, directions, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Parameter ``t*`` where each line's boundary crossing lies (``nan`` when
    both endpoints agree). Bisection runs on all lines at once."""
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    L = u.shape[0]
    ends = evaluate_many(spec, trace, np.vstack([np.zeros((1, spec.n)), u]))
    origin, far = ends[0], ends[1:]
    lo = np.zeros(L)
    hi = np.ones(L)
    crosses = far & ~origin
    active = crosses & (hi - lo > tol)
    while np.any(active):
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo[idx] + hi[idx])
        ok = evaluate_many(spec, trace, mid[:, None] * u[idx])
        hi[idx[ok]] = mid[ok]
        lo[idx[~ok]] = mid[~ok]
        active[idx] = hi[idx] - lo[idx] > tol
    out = 0.5 * (lo + hi)
    out[~crosses] = np.nan
    return out


def project_t(spec, trace, line: LineProjection, tol: float = DEFAULT_TOL) -> Optional[float]:
    t = line_crossings(spec, trace, line.direction[None, :], tol)[0]
    return None if np.isnan(t) else float(t)


def project_boundary(spec, trace, line: LineProjection, tol: float = DEFAULT_TOL) -> Optional[np.ndarray]:
    """Unique crossing of the trace's boundary with ``line``, or ``None``."""
    t = project_t(spec, trace, line, tol)
    return None if t is None else line(t)


# ------------------------------------------------------------------- boxes


def bounding_box_of(points) -> Rectangle:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("bounding box of an empty point set")
    return Rectangle(pts.min(axis=0), pts.max(axis=0))


def box_separation(a: Rectangle, b: Rectangle) -> float:
    """Infinity-norm distance between two boxes; 0 when they overlap."""
    ab, at, bb, bt = (np.asarray(v) for v in (a.bot, a.top, b.bot, b.top))
    gap = np.maximum(0.0, np.maximum(bb - at, ab - bt))
    return float(gap.max(initial=0.0))


def set_separation(a, b) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return float(np.min(np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)))


@dataclass
class ProjectionChoice:
    line: LineProjection
    index: int
    score: float
    boxes: dict
    t_star: dict
    pair_separation: dict = field(default_factory=dict)


def _crossing_table(spec, traces_by_label, lines, tol):
    dirs = np.array([ln.direction for ln in lines])
    return {
        label: np.array([line_crossings(spec, tr, dirs, tol) for tr in traces])
        for label, traces in traces_by_label.items()
    }


def _score_line(tables, labels, c, line):
    boxes = {}
    for lab in labels:
        ts = tables[lab][:, c]
        ts = ts[~np.isnan(ts)]
        if ts.size == 0:
            return None
        boxes[lab] = bounding_box_of(line(ts))
    seps = {(a, b): box_separation(boxes[a], boxes[b]) for a, b in itertools.combinations(labels, 2)}
    return boxes, seps


def optimize_projection(
    spec: ParametricSpec,
    traces_by_label: Mapping[int, Sequence[Trace]],
    candidates: Optional[Sequence[LineProjection]] = None,
    tol: float = DEFAULT_TOL,
    angle_steps: int = DEFAULT_ANGLE_STEPS,
    fixed: Optional[ProjectionChoice] = None,
    focus=None,
) -> ProjectionChoice:
    """Line maximising the smallest pairwise box separation between labels.

    With ``fixed`` the per-pair separations of an already chosen line are kept,
    a pair of labels counts as separated by whichever line does better, and
    the fixed line itself is not a candidate. With ``focus`` only pairs
    involving that label enter the score.
    """
    labels = sorted(traces_by_label)
    if len(labels) < 2:
        raise ProjectionError("need at least two labels")
    if focus is not None and focus not in traces_by_label:
        raise ProjectionError(f"focus label {focus} has no traces")
    for lab in labels:
        if len(traces_by_label[lab]) == 0:
            raise ProjectionError(f"label {lab} has no traces")
    lines = list(candidates) if candidates is not None else candidate_lines(spec.n, angle_steps)
    tables = _crossing_table(spec, traces_by_label, lines, tol)

    best = None
    for c, line in enumerate(lines):
        if fixed is not None and np.array_equal(line.direction, fixed.line.direction):
            continue
        scored = _score_line(tables, labels, c, line)
        if scored is None:
            continue
        boxes, own = scored
        counted = [p for p in own if focus is None or focus in p]
        seps = own if fixed is None else {p: max(s, fixed.pair_separation[p]) for p, s in own.items()}
        score = min(seps[p] for p in counted)
        # a line that cannot raise the combined minimum is still ranked by its own
        key = (score, min(own[p] for p in counted))
        if best is None or key > best[0]:
            best = (key, c, boxes, seps)
    if best is None:
        missing = sorted(
            {lab for lab in labels for c in range(len(lines)) if np.all(np.isnan(tables[lab][:, c]))}
        )
        raise ProjectionError(f"no candidate line is crossed by every label; labels {missing} miss lines")
    (score, _), c, boxes, seps = best
    t_star = {}
    for lab in labels:
        for tr, t in zip(traces_by_label[lab], tables[lab][:, c]):
            t_star[tr.id] = None if np.isnan(t) else float(t)
    return ProjectionChoice(lines[c], c, float(score), boxes, t_star, seps)


def optimize_projection_pair(spec, traces_by_label, candidates=None, tol=DEFAULT_TOL, angle_steps=DEFAULT_ANGLE_STEPS):
    first = optimize_projection(spec, traces_by_label, candidates, tol, angle_steps)
    second = optimize_projection(spec, traces_by_label, candidates, tol, angle_steps, fixed=first)
    return first, second


# --------------------------------------------------------- label specifications


@dataclass(frozen=True, eq=False)
class LabelSpec:
    """``spec(base) and not spec(raised_1) and ... and not spec(raised_n)``.

    Corners are unit-box points; rendering uses raw parameter values.
    Under an upward-closed validity domain ``spec(base)`` already implies
    ``spec(raised_j)``, so :meth:`evaluate` is false on every trace; use
    :func:`crosses_box` to test whether a boundary meets the box.
    """

    spec: ParametricSpec
    base: tuple
    raised: tuple

    @property
    def corners(self) -> list[tuple]:
        return [self.base, *self.raised]

    def raw_corners(self) -> np.ndarray:
        return self.spec.to_raw(np.array(self.corners, dtype=float))

    def render(self) -> str:
        raw = self.raw_corners()
        terms = []
        for k, row in enumerate(raw):
            args = ",".join(fmt_number(v) for v in row)
            terms.append(f"{'¬' if k else ''}{self.spec.name}({args})")
        return " ∧ ".join(terms)

    def __str__(self):
        return self.render()

    def corner_values(self, trace: Trace) -> np.ndarray:
        return evaluate_many(self.spec, trace, np.array(self.corners, dtype=float))

    def evaluate(self, trace: Trace) -> bool:
        v = self.corner_values(trace)
        return bool(v[0] and not np.any(v[1:]))

    def formula(self):
        raw = self.raw_corners()
        names = self.spec.param_names
        inst = [substitute(self.spec.ast, dict(zip(names, row))) for row in raw]
        return to_nnf(And((inst[0], *(Not(f) for f in inst[1:]))))

    def to_psl(self) -> str:
        from .specdsl import ParametricSpec as _PS

        return f"# {self.render()}\n" + pretty_print(_PS(self.formula(), (), self.spec.name))


def extract_label_spec(spec: ParametricSpec, box: Rectangle) -> LabelSpec:
    bot = tuple(box.bot)
    raised = []
    # last axis first: phi(bot) ∧ ¬phi(bot + e_n) ∧ ... ∧ ¬phi(bot + e_1)
    for j in reversed(range(len(bot))):
        corner = list(bot)
        corner[j] = box.top[j]
        raised.append(tuple(corner))
    if any(e == 0 for e in box.edges):
        warnings.warn(
            f"label box {box} has zero width along some axis; the extracted "
            "specification repeats a corner",
            ZeroWidthBoxWarning,
            stacklevel=2,
        )
    return LabelSpec(spec, bot, tuple(raised))


def crosses_box(spec: ParametricSpec, trace: Trace, box: Rectangle) -> bool:
    """Whether the trace's boundary meets ``box`` (false at bottom, true at top)."""
    v = evaluate_many(spec, trace, np.array([box.bot, box.top]))
    return bool(not v[0] and v[1])


# ------------------------------------------------------- dimensionality reduction


@dataclass
class DimRed:
    positions: dict
    counts: np.ndarray
    edges: np.ndarray
    absent: int

    def values(self) -> np.ndarray:
        return np.array([t for t in self.positions.values() if t is not None])


def dimred(
    spec: ParametricSpec,
    traces: Sequence[Trace],
    line: LineProjection,
    tol: float = DEFAULT_TOL,
    bins: int = DEFAULT_BINS,
) -> DimRed:
    positions = {tr.id: project_t(spec, tr, line, tol) for tr in traces}
    vals = np.array([t for t in positions.values() if t is not None])
    counts, edges = np.histogram(vals, bins=bins, range=(0.0, 1.0))
    absent = sum(1 for t in positions.values() if t is None)
    return DimRed(positions, counts, edges, absent)


def write_projection_report(path, line: LineProjection, t_star: Mapping[str, Optional[float]]) -> None:
    from .io import fmt, write_csv

    n = line.dim
    rows = []
    for tid, t in t_star.items():
        if t is None:
            rows.append([tid, ""] + [""] * n)
        else:
            rows.append([tid, fmt(t)] + [fmt(v) for v in line(t)])
    write_csv(path, ["trace_id", "t_star"] + [f"coord_{j + 1}" for j in range(n)], rows)


def write_histogram(path, result: DimRed) -> None:
    from .io import fmt, write_csv

    rows = [[fmt(lo), fmt(hi), int(c)] for lo, hi, c in zip(result.edges[:-1], result.edges[1:], result.counts)]
    write_csv(path, ["bin_lo", "bin_hi", "count"], rows)
