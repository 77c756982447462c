import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conforma.catalog import (InnerHypersurfaceSpec, admissible_grid, build_entry, ex4_blocks,
                              oracle_eigenvalues, product_structure_residual, realizable_lambdas,
                              solve_inner_hypersurface, two_block_values, warped_d_blocks, warped_grid)
from conforma.conformal import analyze
from conforma.errors import ConstraintViolation, NoRealization
from conforma.isoparametric import clusters, sample_points

from conftest import EX5_LAMBDA


def test_hyperbolic_entry_shape(ex1):
    chart = ex1.chart
    assert (chart.n, chart.N, chart.ambient.keyword) == (3, 4, "flat1")


def test_cone_entry_components(ex4):
    assert ex4.chart.N == 4
    assert "cosh" in ex4.chart.source and "sqrt(a^2-1.0)" in ex4.chart.source


@pytest.mark.parametrize("family,params,param", [
    ("ex3", dict(n=3, k=1, a=1.2), "a"),
    ("ex4", dict(n=3, p=1, q=2, a=1.5), "p+q"),
    ("ex4", dict(n=4, p=1, q=1, a=0.9), "a"),
    ("ex1", dict(n=3, k=3, a=1.0), "k"),
    ("ex5", dict(n=4, k=1, r=1.0), "k"),
    ("ex6", dict(n=4, k=3, r=-1.0), "r"),
])
def test_constraint_violations(family, params, param):
    with pytest.raises(ConstraintViolation) as info:
        build_entry(family, params)
    assert info.value.details["param"] == param


def test_hyperbolic_oracle_with_lambda(ex1):
    o = oracle_eigenvalues(ex1, 1.0)
    assert np.allclose(o["eig_D"], [-5 / 18, -5 / 18, 7 / 18], atol=1e-15)
    assert np.allclose(o["eig_B"], [-1 / 3, -1 / 3, 2 / 3], atol=1e-15)
    assert np.allclose(o["eig_A"], [-5 / 18, 1 / 18, 1 / 18], atol=1e-15)


def test_de_sitter_oracle(ex2):
    o = oracle_eigenvalues(ex2)
    assert np.allclose(o["eig_A"], [-17 / 18, -17 / 18, 13 / 18], atol=1e-15)


def test_warped_d_blocks():
    assert warped_d_blocks("ex5", 3, 2, 1.0, 0.0) == [(2, 0.5), (1, -0.5)]
    assert warped_d_blocks("ex6", 3, 2, 1.0, 0.0) == [(2, -0.5), (1, 0.5)]


def test_cone_oracle(ex4):
    r = 1 / math.sqrt(3)
    assert np.allclose(oracle_eigenvalues(ex4)["eig_B"], [-r, 0, r], atol=1e-15)


def test_printed_cone_closed_forms_fail_normalisation():
    printed = ex4_blocks(3, 1, 1, math.sqrt(2.0), corrected=False)
    fixed = ex4_blocks(3, 1, 1, math.sqrt(2.0))
    assert sum(m * b * b for m, b, _ in printed) == pytest.approx(1 / 3, abs=1e-14)
    assert sum(m * b * b for m, b, _ in fixed) == pytest.approx(2 / 3, abs=1e-14)


def test_cone_note_records_both_forms(ex4):
    note = ex4.notes[0]
    assert note["kind"] == "ex4-alpha"
    assert note["printed_norm_B"] == pytest.approx(1 / 3)
    assert note["corrected_norm_B"] == pytest.approx(note["required_norm_B"])


@pytest.mark.parametrize("family", ["ex1", "ex2", "ex3", "ex4"])
def test_oracle_self_consistency(family):
    for params in admissible_grid(family):
        entry = build_entry(family, params)
        n = entry.n
        B = oracle_eigenvalues(entry)["eig_B"]
        assert abs(B.sum()) < 1e-12
        assert abs((B**2).sum() - (n - 1) / n) < 1e-12
        assert product_structure_residual(entry) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8).flatmap(lambda n: st.tuples(st.just(n), st.integers(1, n - 1))),
       st.floats(-0.99, 4.0))
def test_two_block_formulas_normalised(nk, s):
    n, k = nk
    (m1, b1, a1), (m2, b2, a2) = two_block_values(n, k, s)
    assert abs(m1 * b1 + m2 * b2) < 1e-12
    assert abs(m1 * b1 * b1 + m2 * b2 * b2 - (n - 1) / n) < 1e-12
    assert abs(-b1 * b2 + a1 + a2) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 8).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(1, n - 2)).flatmap(
        lambda t: st.tuples(st.just(t[0]), st.just(t[1]), st.integers(1, t[0] - t[1] - 1)))),
    st.floats(1.05, 5.0))
def test_cone_formulas_normalised(npq, a):
    n, p, q = npq
    blocks = ex4_blocks(n, p, q, a)
    assert abs(sum(m * b for m, b, _ in blocks)) < 1e-10
    assert abs(sum(m * b * b for m, b, _ in blocks) - (n - 1) / n) < 1e-10
    for i in range(3):
        for j in range(i + 1, 3):
            assert abs(-blocks[i][1] * blocks[j][1] + blocks[i][2] + blocks[j][2]) < 1e-9


# inner hypersurfaces ----------------------------------------------------------

def test_scalar_curvature_target():
    spec = InnerHypersurfaceSpec.for_family("ex5", 4, 3, 1.0, 0.0)
    assert spec.target_H1 == 0.0
    assert spec.target_R1 == pytest.approx(27 / 4)


def test_zero_lambda_de_sitter_has_no_product():
    spec = InnerHypersurfaceSpec.for_family("ex5", 4, 3, 1.0, 0.0)
    with pytest.raises(NoRealization) as info:
        solve_inner_hypersurface(spec, "ex5", 1.0)
    assert info.value.details["landscape"]


def test_infeasible_targets():
    spec = InnerHypersurfaceSpec(3, 0.1, 1e6)
    with pytest.raises(NoRealization):
        solve_inner_hypersurface(spec, "ex6", 2.0)


def test_realized_de_sitter_instance(ex5):
    spec = InnerHypersurfaceSpec.for_family("ex5", 4, 3, 1.0, EX5_LAMBDA)
    dH, dR = ex5.realization.residuals(spec)
    assert dH < 1e-9 and dR < 1e-9
    h1, h2 = ex5.realization.principal
    assert abs(h1 - h2) > 1e-3


def test_minimal_product_at_zero_lambda(ex6):
    assert abs(ex6.realization.H) < 1e-12


def test_realizable_lambdas():
    assert realizable_lambdas("ex5", 4, 3, 1.0) == [(2, pytest.approx(EX5_LAMBDA, abs=1e-12))]
    lams = [lam for _, lam in realizable_lambdas("ex6", 4, 3, 2.0)]
    assert any(abs(lam) < 1e-9 for lam in lams)


@pytest.mark.parametrize("which", ["ex5", "ex6"])
def test_realized_entries_match_block_values(which, ex5, ex6):
    entry = ex5 if which == "ex5" else ex6
    P = entry.params
    data = analyze(entry.chart, sample_points(entry.chart, 10), identities=False).data
    expected = np.sort(np.concatenate(
        [[d] * m for m, d in warped_d_blocks(which, P["n"], P["k"], P["r"], P["lam"])]))
    up = np.linalg.eigvalsh(data.A + P["lam"] * data.B)
    down = np.linalg.eigvalsh(data.A - P["lam"] * data.B)
    err = np.minimum(np.abs(up - expected).max(axis=1), np.abs(down - expected).max(axis=1))
    assert err.max() < 1e-7
    assert all(len(clusters(e)) >= 3 for e in data.eig_B)


def test_warped_grid_has_distinct_instances():
    grid = warped_grid(ns=(4,), radii=(1.0, 2.0))
    keys = [(g["family"], g["n"], g["k"], g["r"], g["p"], round(g["lam"], 9)) for g in grid]
    assert grid and len(keys) == len(set(keys))
    assert all(2 <= g["k"] < g["n"] for g in grid)


def test_ex3_grid_stays_inside_unit_interval():
    assert {P["a"] for P in admissible_grid("ex3")} == {0.5, 0.9}
