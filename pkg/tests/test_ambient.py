import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conforma.ambient import AmbientForm, inner_s, space_form_residual
from conforma.catalog import build_entry
from conforma.dsl import Binary, Const
from conforma.isoparametric import sample_points


def test_lorentz_products():
    assert inner_s([1, 0, 0], [1, 0, 0], 1) == -1
    assert inner_s([1, 1, 0, 0], [1, -1, 0, 0], 2) == 0
    for u in (-2.0, 0.0, 0.7):
        X = [math.cosh(u), math.sinh(u)]
        assert inner_s(X, X, 1) == pytest.approx(-1.0, abs=1e-12)


def test_length_mismatch():
    with pytest.raises(ValueError):
        inner_s([1, 2, 3], [1, 2], 1)


@pytest.mark.parametrize("kw,c,N,s", [("flat1", 0, 4, 1), ("desitter", 1, 5, 1),
                                       ("antidesitter", -1, 5, 2)])
def test_ambient_triples(kw, c, N, s):
    amb = AmbientForm.from_keyword(kw, 4)
    assert (amb.c, amb.embedding_dim, amb.signature_index) == (c, N, s)
    assert amb.keyword == kw


vec = st.lists(st.floats(-10, 10), min_size=5, max_size=5).map(np.array)


@settings(max_examples=60, deadline=None)
@given(vec, vec, vec, st.floats(-3, 3), st.integers(0, 2))
def test_symmetric_bilinear(x, y, z, t, s):
    assert inner_s(x, y, s) == inner_s(y, x, s)
    lhs = inner_s(x + t * y, z, s)
    rhs = inner_s(x, z, s) + t * inner_s(y, z, s)
    assert abs(lhs - rhs) <= 1e-14 * (1 + np.abs(x).sum() + abs(t) * np.abs(y).sum()) * (1 + np.abs(z).sum())


def test_de_sitter_chart_lies_on_quadric():
    chart = build_entry("ex2", n=3, k=1, a=1.0).chart
    for p in sample_points(chart, 10):
        assert space_form_residual(chart, p) < 1e-12


def test_flat_residual_is_zero():
    chart = build_entry("ex1", n=3, k=1, a=1.5).chart
    assert space_form_residual(chart, [0.1, 0.2, 0.3]) == 0.0


def test_misscaled_chart_residual():
    chart = build_entry("ex2", n=3, k=1, a=1.0).chart
    bigger = chart.with_components([Binary("*", Const(1.1), c) for c in chart.components])
    p = sample_points(chart, 1)[0]
    assert space_form_residual(bigger, p) == pytest.approx(0.21, abs=1e-12)


@pytest.mark.parametrize("family,params", [("ex2", dict(n=4, k=2, a=0.5)),
                                           ("ex3", dict(n=4, k=1, a=0.5)),
                                           ("ex6", dict(n=4, k=3, r=2.0, lam=0.0))])
def test_curved_catalog_charts_on_quadric(family, params):
    chart = build_entry(family, params).chart
    for p in sample_points(chart, 20):
        assert space_form_residual(chart, p) < 1e-9
