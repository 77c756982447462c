import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conforma.catalog import build_entry
from conforma.dsl import (Binary, Const, Param, Power, Unary, Var, eval_chart, eval_chart_values,
                          eval_scalar, format_chart, parse_chart, parse_expression, to_source)
from conforma.errors import ArityError, ChartError, DegenerateEvaluation, DSLSyntaxError, UnboundName

EX1_SOURCE = """\
# hyperbolic line times a flat plane
chart ex1
ambient flat1 dim 4
vars u1 in [-0.8, 0.8], u2 in [-1, 1], u3 in [-1, 1]
params a = 1.0
x1 = a*cosh(u1)
x2 = a*sinh(u1)
x3 = u2
x4 = u3
"""


def test_call_under_product():
    node = parse_expression("a*cosh(u1)", ["u1"], ["a"])
    assert node == Binary("*", Param("a"), Unary("cosh", Var("u1")))


def test_precedence():
    node = parse_expression("-u^2 + 3*u/2", ["u"])
    assert node == Binary("+", Unary("neg", Power(Var("u"), 2)),
                          Binary("/", Binary("*", Const(3.0), Var("u")), Const(2.0)))


def test_chart_from_source():
    chart = parse_chart(EX1_SOURCE)
    assert chart.n == 3 and chart.N == 4
    assert chart.ambient.c == 0
    assert chart.parameters == {"a": 1.0}


def test_arity_error():
    with pytest.raises(ArityError) as info:
        parse_expression("cosh(u1, u2)", ["u1", "u2"])
    assert info.value.fn == "cosh"


def test_unbound_name():
    with pytest.raises(UnboundName) as info:
        parse_expression("b*u1", ["u1"], ["a"])
    assert info.value.name == "b"


def test_syntax_error_position():
    source = EX1_SOURCE.replace("x3 = u2", "x3 = u2 +* u3")
    with pytest.raises(DSLSyntaxError) as info:
        parse_chart(source)
    assert info.value.line == 8
    assert info.value.col == 10


def test_component_count_must_match_ambient():
    source = EX1_SOURCE.replace("x4 = u3\n", "")
    with pytest.raises(ChartError):
        parse_chart(source)


def test_eval_chart_values_and_tangents():
    chart = parse_chart(EX1_SOURCE)
    X = eval_chart(chart, np.array([0.0, 0.3, -0.2]))
    assert np.allclose(X.val, [1.0, 0.0, 0.3, -0.2], atol=1e-15)
    assert np.allclose(X.d1[:, 0], [0.0, 1.0, 0.0, 0.0], atol=1e-15)
    assert len(list(X)) == 4


def test_linear_chart_jets():
    chart = parse_chart("chart plane\nambient flat1 dim 3\nvars u1 in [0, 1], u2 in [0, 1]\n"
                        "x1 = 0\nx2 = u1\nx3 = u2\n")
    X = eval_chart(chart, np.array([0.25, 0.5]))
    assert np.array_equal(X.d1, [[0, 0], [1, 0], [0, 1]])
    assert not X.d2.any() and not X.d3.any() and not X.d4.any()


def test_ambient_dimension_must_match_variables():
    with pytest.raises(ChartError):
        parse_chart("chart id\nambient flat1 dim 3\nvars u1 in [0,1], u2 in [0,1], u3 in [0,1]\n"
                    "x1 = u1\nx2 = u2\nx3 = u3\n")


def test_cone_chart_radial_derivative():
    entry = build_entry("ex4", n=3, p=1, q=1, a=math.sqrt(2.0))
    u1, u2, t = 0.3, 1.2, 1.0
    X = eval_chart(entry.chart, np.array([u1, u2, t]))
    a, b = math.sqrt(2.0), 1.0
    expected = [b * math.cosh(u1), b * math.sinh(u1), a * math.cos(u2), a * math.sin(u2)]
    assert np.allclose(X.d1[:, 2], expected, atol=1e-14)


def test_degenerate_evaluation_names_component():
    chart = parse_chart("chart bad\nambient flat1 dim 3\nvars u in [-1, 1], v in [-1, 1]\n"
                        "x1 = u\nx2 = log(u)\nx3 = v\n")
    with pytest.raises(DegenerateEvaluation) as info:
        eval_chart(chart, np.array([-0.5, 0.0]))
    assert info.value.details["component"] == 1


# round trips ----------------------------------------------------------------

CATALOG = [("ex1", dict(n=3, k=1, a=1.5)), ("ex2", dict(n=4, k=2, a=0.7)),
           ("ex3", dict(n=3, k=2, a=0.6)), ("ex4", dict(n=4, p=1, q=2, a=1.5)),
           ("ex6", dict(n=4, k=3, r=2.0, lam=0.0))]


@pytest.mark.parametrize("family,params", CATALOG)
def test_catalog_chart_round_trip(family, params):
    chart = build_entry(family, params).chart
    again = parse_chart(format_chart(chart))
    assert again == chart
    assert parse_chart(again.source) == again


@pytest.mark.parametrize("family,params", CATALOG)
def test_jet_values_match_scalar_evaluator(family, params):
    from conforma.isoparametric import sample_points

    chart = build_entry(family, params).chart
    pts = sample_points(chart, 5)
    vals = eval_chart_values(chart, pts)
    env = {v: pts[:, i] for i, v in enumerate(chart.variables)}
    for i, comp in enumerate(chart.components):
        plain = np.broadcast_to(eval_scalar(comp, env, chart.parameters), (5,))
        assert np.allclose(vals[:, i], plain, rtol=0, atol=1e-14)


names = st.sampled_from(["u1", "u2"])
leaves = st.one_of(
    st.floats(0.0, 100.0, allow_nan=False).map(Const),
    names.map(Var),
    st.just(Param("a")),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["neg", "sin", "cos", "sinh", "cosh", "exp", "log", "sqrt"]),
                  children).map(lambda t: Unary(*t)),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: Binary(*t)),
        st.tuples(children, st.integers(-3, 4)).map(lambda t: Power(*t)),
    )


asts = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(asts)
def test_print_parse_round_trip(node):
    text = to_source(node)
    again = parse_expression(text, ["u1", "u2"], ["a"])
    assert again == node
    assert to_source(again) == text
