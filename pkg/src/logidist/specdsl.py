"""Monotonic parametric specifications over a single signal ``x``.

Concrete syntax::

    # comment
    param tau in [0, 1];
    param h in [0, 1];
    spec G[tau, 1] (x < h)

Formulas are built from ``G[a,b] f``, ``F[a,b] f``, ``f and f``, ``f or f``,
``not f``, ``(f)``, ``x < b`` and ``x > b`` where every bound is a number or a
declared parameter. ``not``, ``G`` and ``F`` bind tighter than ``and``,
which binds tighter than ``or``.

Parsed formulas are kept in negation normal form. Each parameter gets a
polarity so that, after flipping decreasing parameters (``p -> 1 - p``) and
mapping the unit box affinely onto the declared ranges, every validity
domain is upward closed in ``[0, 1]^n``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .trace import Trace


class SpecError(ValueError):
    pass


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class UndeclaredParameterError(SpecSyntaxError):
    pass


class PolarityError(SpecError):
    pass


class Polarity(enum.Enum):
    INCREASING = "+"
    DECREASING = "-"

    def flip(self) -> "Polarity":
        return Polarity.DECREASING if self is Polarity.INCREASING else Polarity.INCREASING


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Param:
    name: str


Bound = Union[Const, Param]


@dataclass(frozen=True)
class AtomLess:
    signal: str
    threshold: Bound


@dataclass(frozen=True)
class AtomGreater:
    signal: str
    threshold: Bound


@dataclass(frozen=True)
class Not:
    child: "Node"


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Globally:
    low: Bound
    high: Bound
    child: "Node"


@dataclass(frozen=True)
class Eventually:
    low: Bound
    high: Bound
    child: "Node"


Node = Union[AtomLess, AtomGreater, Not, And, Or, Globally, Eventually]
ATOMS = (AtomLess, AtomGreater)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    lo: float
    hi: float
    polarity: Polarity = Polarity.INCREASING

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpecError(f"parameter {self.name!r}: empty range [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class ParametricSpec:
    ast: Node
    params: tuple
    name: str = "phi"

    @property
    def n(self) -> int:
        return len(self.params)

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.params]

    def to_raw(self, theta) -> np.ndarray:
        """Map unit-box points (shape ``(n,)`` or ``(m, n)``) to raw parameter values."""
        theta = np.asarray(theta, dtype=float)
        out = np.empty_like(theta)
        for k, p in enumerate(self.params):
            u = theta[..., k]
            if p.polarity is Polarity.DECREASING:
                u = 1.0 - u
            out[..., k] = p.lo + (p.hi - p.lo) * u
        return out

    def to_unit(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        out = np.empty_like(raw)
        for k, p in enumerate(self.params):
            u = (raw[..., k] - p.lo) / (p.hi - p.lo)
            if p.polarity is Polarity.DECREASING:
                u = 1.0 - u
            out[..., k] = u
        return out


# ------------------------------------------------------------------------ parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<sym>[\[\](),;<>])
    """,
    re.VERBOSE,
)
_KEYWORDS = {"param", "in", "spec", "and", "or", "not", "G", "F"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "ident" and m.group() in _KEYWORDS:
            toks.append(_Tok("kw", m.group(), line, pos - line_start + 1))
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.decls: dict[str, tuple[float, float]] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=SpecSyntaxError):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def accept(self, text) -> bool:
        if self.tok.kind in ("kw", "sym") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text) -> _Tok:
        tok = self.tok
        if not self.accept(text):
            shown = tok.text or "end of input"
            self.error(f"expected {text!r}, found {shown!r}")
        return tok

    def number(self) -> float:
        tok = self.tok
        if tok.kind != "number":
            self.error(f"expected a number, found {tok.text or 'end of input'!r}")
        self.i += 1
        return float(tok.text)

    def ident(self) -> _Tok:
        tok = self.tok
        if tok.kind != "ident":
            self.error(f"expected a name, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok

    def program(self):
        while self.tok.kind == "kw" and self.tok.text == "param":
            self.i += 1
            name_tok = self.ident()
            if name_tok.text in self.decls:
                self.error(f"parameter {name_tok.text!r} declared twice", name_tok)
            if name_tok.text == "x":
                self.error("'x' is the signal name and cannot be a parameter", name_tok)
            self.expect("in")
            self.expect("[")
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect("]")
            self.expect(";")
            if not lo < hi:
                self.error(f"parameter {name_tok.text!r}: range [{lo}, {hi}] is empty", name_tok)
            self.decls[name_tok.text] = (lo, hi)
        self.expect("spec")
        ast = self.disjunction()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after formula")
        return ast

    def disjunction(self):
        parts = [self.conjunction()]
        while self.accept("or"):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else make_or(parts)

    def conjunction(self):
        parts = [self.unary()]
        while self.accept("and"):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else make_and(parts)

    def unary(self):
        if self.accept("not"):
            return Not(self.unary())
        for op, cls in (("G", Globally), ("F", Eventually)):
            if self.accept(op):
                self.expect("[")
                lo = self.bound()
                self.expect(",")
                hi = self.bound()
                self.expect("]")
                return cls(lo, hi, self.unary())
        if self.accept("("):
            inner = self.disjunction()
            self.expect(")")
            return inner
        return self.atom()

    def atom(self):
        sig = self.tok
        if sig.kind != "ident":
            self.error(f"expected a formula, found {sig.text or 'end of input'!r}")
        if sig.text != "x":
            self.error(f"unknown signal {sig.text!r}; only the single signal 'x' is supported")
        self.i += 1
        if self.accept("<"):
            return AtomLess("x", self.bound())
        if self.accept(">"):
            return AtomGreater("x", self.bound())
        self.error(f"expected '<' or '>', found {self.tok.text or 'end of input'!r}")

    def bound(self) -> Bound:
        if self.tok.kind == "number":
            return Const(self.number())
        tok = self.ident()
        if tok.text not in self.decls:
            self.error(f"undeclared parameter {tok.text!r}", tok, UndeclaredParameterError)
        return Param(tok.text)


def make_and(parts) -> Node:
    flat = []
    for p in parts:
        flat.extend(p.children if isinstance(p, And) else (p,))
    return And(tuple(flat))


def make_or(parts) -> Node:
    flat = []
    for p in parts:
        flat.extend(p.children if isinstance(p, Or) else (p,))
    return Or(tuple(flat))


def to_nnf(node: Node, negate: bool = False) -> Node:
    """Push negations down to the atoms."""
    if isinstance(node, Not):
        return to_nnf(node.child, not negate)
    if isinstance(node, ATOMS):
        return Not(node) if negate else node
    if isinstance(node, (And, Or)):
        kids = [to_nnf(c, negate) for c in node.children]
        conj = isinstance(node, And) != negate
        return make_and(kids) if conj else make_or(kids)
    if isinstance(node, (Globally, Eventually)):
        cls = type(node)
        if negate:
            cls = Eventually if cls is Globally else Globally
        return cls(node.low, node.high, to_nnf(node.child, negate))
    raise TypeError(f"not a formula node: {node!r}")


def infer_polarity(ast: Node) -> dict[str, Polarity]:
    """Polarity of every parameter occurring in ``ast``; raises on conflict."""
    found: dict[str, Polarity] = {}

    def note(bound, pol):
        if not isinstance(bound, Param):
            return
        prev = found.setdefault(bound.name, pol)
        if prev is not pol:
            raise PolarityError(
                f"parameter {bound.name!r} occurs with both polarities; "
                "the specification would not be monotonic"
            )

    def walk(node, pol):
        inc, dec = pol, pol.flip()
        if isinstance(node, AtomLess):
            note(node.threshold, inc)
        elif isinstance(node, AtomGreater):
            note(node.threshold, dec)
        elif isinstance(node, Not):
            walk(node.child, dec)
        elif isinstance(node, (And, Or)):
            for c in node.children:
                walk(c, pol)
        elif isinstance(node, Globally):
            note(node.low, inc)
            note(node.high, dec)
            walk(node.child, pol)
        elif isinstance(node, Eventually):
            note(node.low, dec)
            note(node.high, inc)
            walk(node.child, pol)
        else:
            raise TypeError(f"not a formula node: {node!r}")

    walk(ast, Polarity.INCREASING)
    return found


def parse(text: str, name: str = "phi") -> ParametricSpec:
    parser = _Parser(text)
    ast = to_nnf(parser.program())
    pols = infer_polarity(ast)
    params = tuple(
        ParamDecl(pname, lo, hi, pols.get(pname, Polarity.INCREASING))
        for pname, (lo, hi) in parser.decls.items()
    )
    return ParametricSpec(ast, params, name)


def load_spec(path, name: str | None = None) -> ParametricSpec:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), name or display_name(path.stem))


def display_name(stem: str) -> str:
    return re.sub(r"^phi(?=_|$)", "φ", stem)


def bundled_spec_names() -> list[str]:
    files = resources.files("logidist") / "specs"
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".psl"))


def bundled_spec(stem: str) -> ParametricSpec:
    text = (resources.files("logidist") / "specs" / f"{stem}.psl").read_text(encoding="utf-8")
    return parse(text, display_name(stem))


def resolve_spec(ref) -> ParametricSpec:
    """A ``.psl`` file path, or the stem of a bundled specification."""
    path = Path(ref)
    if path.is_file():
        return load_spec(path)
    if str(ref) in bundled_spec_names():
        return bundled_spec(str(ref))
    raise SpecError(f"no specification file or bundled specification named {str(ref)!r}")


def phi_ex() -> ParametricSpec:
    """``G[tau, 1] (x < h)`` with ``tau, h`` in ``[0, 1]``."""
    return bundled_spec("phi_ex")


# --------------------------------------------------------------------- evaluation


def _bound_values(bound: Bound, raw: dict[str, np.ndarray], m: int) -> np.ndarray:
    if isinstance(bound, Const):
        return np.full(m, bound.value)
    return raw[bound.name]


def _eval(node: Node, times: np.ndarray, values: np.ndarray, raw, m: int) -> np.ndarray:
    """Truth of ``node`` at every sample time; shape ``(m, N)``."""
    if isinstance(node, AtomLess):
        return values[None, :] < _bound_values(node.threshold, raw, m)[:, None]
    if isinstance(node, AtomGreater):
        return values[None, :] > _bound_values(node.threshold, raw, m)[:, None]
    if isinstance(node, Not):
        return ~_eval(node.child, times, values, raw, m)
    if isinstance(node, And):
        out = _eval(node.children[0], times, values, raw, m)
        for c in node.children[1:]:
            out &= _eval(c, times, values, raw, m)
        return out
    if isinstance(node, Or):
        out = _eval(node.children[0], times, values, raw, m)
        for c in node.children[1:]:
            out |= _eval(c, times, values, raw, m)
        return out
    # temporal: window (t + low, t + high] over sample times
    child = _eval(node.child, times, values, raw, m)
    n = times.size
    lo = _bound_values(node.low, raw, m)
    hi = _bound_values(node.high, raw, m)
    start = np.searchsorted(times, (times[None, :] + lo[:, None]).ravel(), side="right").reshape(m, n)
    stop = np.searchsorted(times, (times[None, :] + hi[:, None]).ravel(), side="right").reshape(m, n)
    stop = np.maximum(stop, start)
    hits = child if isinstance(node, Eventually) else ~child
    prefix = np.zeros((m, n + 1), dtype=np.int64)
    np.cumsum(hits, axis=1, out=prefix[:, 1:])
    rows = np.arange(m)[:, None]
    count = prefix[rows, stop] - prefix[rows, start]
    return count > 0 if isinstance(node, Eventually) else count == 0


def evaluate_raw_many(spec: ParametricSpec, trace: Trace, raw) -> np.ndarray:
    """Evaluate at raw parameter vectors, shape ``(m, n)``; returns ``(m,)`` bools.

    The formula is evaluated at the first sample; temporal windows are
    relative to the current sample time and exclude their lower end.
    """
    raw = np.asarray(raw, dtype=float)
    if spec.n == 0:
        raw = raw.reshape(raw.shape[0] if raw.ndim == 2 else 1, 0)
    raw = np.atleast_2d(raw)
    m = raw.shape[0]
    named = {p.name: raw[:, k] for k, p in enumerate(spec.params)}
    return _eval(spec.ast, trace.times, trace.values, named, m)[:, 0]


def evaluate_many(spec: ParametricSpec, trace: Trace, thetas) -> np.ndarray:
    thetas = np.asarray(thetas, dtype=float)
    if spec.n == 0:
        thetas = thetas.reshape(thetas.shape[0] if thetas.ndim == 2 else 1, 0)
    else:
        thetas = np.atleast_2d(thetas)
    return evaluate_raw_many(spec, trace, spec.to_raw(thetas))


def evaluate(spec: ParametricSpec, trace: Trace, theta=()) -> bool:
    theta = np.asarray(theta, dtype=float).reshape(1, spec.n)
    if np.any(theta < 0) or np.any(theta > 1):
        raise ValueError(f"theta {theta.ravel().tolist()} outside the unit box")
    return bool(evaluate_many(spec, trace, theta)[0])


def evaluate_raw(spec: ParametricSpec, trace: Trace, raw=()) -> bool:
    return bool(evaluate_raw_many(spec, trace, np.asarray(raw, dtype=float).reshape(1, spec.n))[0])


# ------------------------------------------------------------------- printing


def fmt_number(x: float) -> str:
    """Shortest round-tripping decimal, without a trailing ``.0``."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _fmt_bound(b: Bound) -> str:
    return fmt_number(b.value) if isinstance(b, Const) else b.name


def format_formula(node: Node) -> str:
    if isinstance(node, AtomLess):
        return f"{node.signal} < {_fmt_bound(node.threshold)}"
    if isinstance(node, AtomGreater):
        return f"{node.signal} > {_fmt_bound(node.threshold)}"
    if isinstance(node, Not):
        return f"not ({format_formula(node.child)})"
    if isinstance(node, (Globally, Eventually)):
        op = "G" if isinstance(node, Globally) else "F"
        return f"{op}[{_fmt_bound(node.low)}, {_fmt_bound(node.high)}] ({format_formula(node.child)})"
    joiner = " and " if isinstance(node, And) else " or "
    parts = []
    for c in node.children:
        s = format_formula(c)
        parts.append(f"({s})" if isinstance(c, (And, Or)) else s)
    return joiner.join(parts)


def pretty_print(spec: ParametricSpec) -> str:
    lines = [f"param {p.name} in [{fmt_number(p.lo)}, {fmt_number(p.hi)}];" for p in spec.params]
    lines.append(f"spec {format_formula(spec.ast)}")
    return "\n".join(lines) + "\n"


def substitute(node: Node, raw: dict[str, float]) -> Node:
    """Replace parameters by constants."""

    def sub(b):
        return Const(float(raw[b.name])) if isinstance(b, Param) else b

    if isinstance(node, AtomLess):
        return AtomLess(node.signal, sub(node.threshold))
    if isinstance(node, AtomGreater):
        return AtomGreater(node.signal, sub(node.threshold))
    if isinstance(node, Not):
        return Not(substitute(node.child, raw))
    if isinstance(node, And):
        return And(tuple(substitute(c, raw) for c in node.children))
    if isinstance(node, Or):
        return Or(tuple(substitute(c, raw) for c in node.children))
    return type(node)(sub(node.low), sub(node.high), substitute(node.child, raw))
