import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import unit_traces
from logidist.specdsl import (
    And,
    AtomLess,
    Const,
    Globally,
    Not,
    Param,
    Polarity,
    PolarityError,
    SpecSyntaxError,
    UndeclaredParameterError,
    bundled_spec,
    bundled_spec_names,
    evaluate,
    evaluate_many,
    fmt_number,
    parse,
    phi_ex,
    pretty_print,
    resolve_spec,
    SpecError,
)
from logidist.trace import Trace

PHI_EX_TEXT = "param tau in [0,1]; param h in [0,1]; spec G[tau,1] (x < h)"


def const_trace(v, n=11):
    return Trace("c", np.linspace(0, 1, n), np.full(n, v))


def polarities(spec):
    return {p.name: p.polarity for p in spec.params}


def test_phi_ex_parses_with_increasing_parameters():
    s = parse(PHI_EX_TEXT)
    assert s.ast == Globally(Param("tau"), Const(1.0), AtomLess("x", Param("h")))
    assert polarities(s) == {"tau": Polarity.INCREASING, "h": Polarity.INCREASING}
    assert s == phi_ex().__class__(s.ast, s.params, s.name)


def test_parameter_free_spec():
    s = parse("spec x < 0.5")
    assert s.n == 0
    assert evaluate(s, const_trace(0.4))
    assert not evaluate(s, const_trace(0.6))


def test_inconsistent_polarity_rejected():
    with pytest.raises(PolarityError):
        parse("param p in [0,1]; spec (x < p) and (x > p)")


@pytest.mark.parametrize(
    "text, expected",
    [
        ("param a in [0,1]; param c in [0,1]; spec F[a,1] (x > c)", {"a": "-", "c": "-"}),
        ("param p in [0,1]; spec not (x < p)", {"p": "-"}),
        ("param a in [0,1]; param b in [0,2]; spec G[a,b] (x < 1)", {"a": "+", "b": "-"}),
        ("param a in [0,1]; param b in [0,2]; spec not G[a,b] (x < 1)", {"a": "-", "b": "+"}),
    ],
)
def test_polarity_rules(text, expected):
    assert {k: v.value for k, v in polarities(parse(text)).items()} == expected


def test_undeclared_parameter_position():
    with pytest.raises(UndeclaredParameterError) as info:
        parse("param h in [0,1];\nspec G[q, 1] (x < h)")
    assert (info.value.line, info.value.column) == (2, 8)


@pytest.mark.parametrize(
    "text",
    [
        "spec G[0,1] x <",
        "spec y < 1",
        "param p in [1,0]; spec x < p",
        "param p in [0,1]; param p in [0,1]; spec x < p",
        "spec (x < 1",
        "spec x < 1 x",
    ],
)
def test_syntax_errors(text):
    with pytest.raises(SpecSyntaxError):
        parse(text)


def test_negation_normal_form():
    s = parse("param h in [0,1]; spec not (G[0,1] (x < h) and x > 0.2)")
    assert "not (x < h)" in pretty_print(s)
    assert "F[0, 1]" in pretty_print(s)

    def only_above_atoms(node):
        if isinstance(node, Not):
            return isinstance(node.child, AtomLess) or type(node.child).__name__ == "AtomGreater"
        kids = getattr(node, "children", None) or ([node.child] if hasattr(node, "child") else [])
        return all(only_above_atoms(k) for k in kids)

    assert only_above_atoms(s.ast)


@pytest.mark.parametrize(
    "theta, expected", [((0.0, 0.6), True), ((0.0, 0.4), False), ((1.0, 0.0), True)]
)
def test_phi_ex_evaluation(theta, expected):
    assert evaluate(phi_ex(), const_trace(0.5), theta) is expected


def test_evaluate_rejects_points_outside_unit_box():
    with pytest.raises(ValueError):
        evaluate(phi_ex(), const_trace(0.5), (1.2, 0.5))


def test_decreasing_parameter_is_flipped():
    s = parse("param c in [0,1]; spec F[0,1] (x > c)")
    # unit 0 is raw c = 1: hardest; unit 1 is raw c = 0
    tr = const_trace(0.3)
    assert not evaluate(s, tr, (0.0,))
    assert evaluate(s, tr, (1.0,))
    assert s.to_raw(np.array([0.25]))[0] == pytest.approx(0.75)


def test_affine_parameter_range():
    s = bundled_spec("phi_ex_ticks")
    np.testing.assert_allclose(s.to_raw([0.5, 0.5]), [10.0, 0.5])
    np.testing.assert_allclose(s.to_unit(s.to_raw([0.3, 0.7])), [0.3, 0.7])


def test_pretty_print_round_trip_phi_ex():
    s = phi_ex()
    assert parse(pretty_print(s), s.name) == s


def test_shortest_constants():
    assert fmt_number(0.1) == "0.1"
    assert fmt_number(2.0) == "2"
    assert fmt_number(1e-7) == "1e-07"
    s = parse("spec x < 0.30000000000000004")
    assert parse(pretty_print(s)).ast == s.ast


def test_nested_and_flattens():
    s = parse("spec (x < 1 and (x < 2 and x < 3)) and x < 4")
    assert isinstance(s.ast, And) and len(s.ast.children) == 4
    assert pretty_print(s).strip() == "spec x < 1 and x < 2 and x < 3 and x < 4"


def test_bundled_specs_load_and_round_trip():
    names = bundled_spec_names()
    assert "phi_ex" in names and len(names) >= 4
    for name in names:
        s = bundled_spec(name)
        assert parse(pretty_print(s), s.name) == s
        assert resolve_spec(name) == s


def test_resolve_unknown_spec():
    with pytest.raises(SpecError):
        resolve_spec("no_such_spec")


# ----------------------------------------------------------- property tests

PARAMS = ("p", "q", "r")


@st.composite
def formula_text(draw, depth=3):
    """Formula text over parameters p, q, r (each possibly repeated)."""
    bound = st.one_of(
        st.sampled_from(PARAMS),
        st.floats(0, 1, allow_nan=False).map(fmt_number),
    )
    if depth == 0 or draw(st.booleans()):
        op = draw(st.sampled_from("<>"))
        return f"x {op} {draw(bound)}"
    kind = draw(st.sampled_from(["G", "F", "and", "or", "not"]))
    if kind in ("G", "F"):
        lo, hi = draw(bound), draw(bound)
        return f"{kind}[{lo}, {hi}] ({draw(formula_text(depth - 1))})"
    if kind == "not":
        return f"not ({draw(formula_text(depth - 1))})"
    return f"({draw(formula_text(depth - 1))}) {kind} ({draw(formula_text(depth - 1))})"


def declared(body):
    return "".join(f"param {p} in [0, 1];\n" for p in PARAMS) + "spec " + body


def parse_or_skip(text):
    try:
        return parse(text)
    except PolarityError:
        assume(False)


@settings(max_examples=50)
@given(formula_text())
def test_round_trip_generated(body):
    s = parse_or_skip(declared(body))
    assert parse(pretty_print(s)) == s


unit_points = st.lists(st.floats(0, 1), min_size=3, max_size=3)


@settings(max_examples=200)
@given(formula_text(), unit_traces(max_samples=12), unit_points, unit_points)
def test_generated_specs_are_monotone(body, trace, a, b):
    s = parse_or_skip(declared(body))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    v = evaluate_many(s, trace, np.array([lo, hi, np.ones(3)]))
    assert v[0] <= v[1] <= v[2]


@settings(max_examples=200)
@given(st.sampled_from(bundled_spec_names()), unit_traces(), st.data())
def test_bundled_specs_monotone(name, trace, data):
    s = bundled_spec(name)
    n = s.n
    a = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    b = np.array(data.draw(st.lists(st.floats(0, 1), min_size=n, max_size=n)))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    v = evaluate_many(s, trace, np.array([lo, hi, np.ones(n)]))
    assert v[0] <= v[1] <= v[2]
