"""Acceptance criteria, one test each.

Every test records a single PASS/FAIL line in ``RESULTS``; ``conftest.py`` prints
them in the terminal summary so the outcome of each criterion is visible even
without ``-s``.
"""

import math

import numpy as np
import pytest

from conforma import catalog
from conforma.catalog import (InnerHypersurfaceSpec, build_entry, oracle_eigenvalues,
                              product_structure_residual, warped_d_blocks)
from conforma.cli import main
from conforma.conformal import analyze, boost, dilation, invariance_probe
from conforma.errors import NoRealization
from conforma.fd import fd_check_chart
from conforma.isoparametric import check_and_classify, sample_points, theorem1_crosscheck

from conftest import PERTURBED_GRAPH, graph_chart

RESULTS: dict[int, str] = {}

FAMILY_CASE = {"ex2": 2, "ex3": 3, "ex1": 4, "ex4": 5, "ex5": 6, "ex6": 7}
# two-block families are classified away from lambda = 0, where some grid
# points have a repeated A eigenvalue and legitimately fit another case
ROUND_TRIP_LAMBDA = 0.37


def record(number: int, title: str, failures: list, summary: str):
    status = "PASS" if not failures else "FAIL"
    line = f"criterion {number} [{status}] {title}: {summary}"
    if failures:
        line += f" ({len(failures)} failure(s); first: {failures[0]})"
    RESULTS[number] = line
    print(line)
    assert not failures, line


def sign_free_gap(got, expected):
    got, expected = np.sort(got, axis=-1), np.sort(expected)
    straight = np.abs(got - expected).max(axis=-1)
    crossed = np.abs(-got[..., ::-1] - expected).max(axis=-1)
    return float(np.minimum(straight, crossed).max())


def params_match(match, family, params):
    """Built params appear as the fit or one of its exact equivalents."""
    if match.family != family:
        return False
    keys = [k for k in params if k != "p" or family == "ex4"]
    if family == "ex1":
        keys = ["n", "k"]
    for cand in [match.params] + list(match.equivalent):
        ok = True
        for key in keys:
            want, got = params[key], cand.get(key)
            if got is None:
                ok = False
            elif isinstance(want, int):
                ok &= got == want
            else:
                ok &= abs(got - want) <= 1e-6
        if ok:
            return True
    return False


@pytest.fixture(scope="module")
def two_block_entries():
    return [(f, P, build_entry(f, P))
            for f in ("ex1", "ex2", "ex3", "ex4") for P in catalog.admissible_grid(f)]


@pytest.fixture(scope="module")
def warped_entries():
    out = []
    for W in catalog.warped_grid():
        W = dict(W)
        family = W.pop("family")
        out.append((family, W, build_entry(family, W)))
    return out


@pytest.fixture(scope="module")
def all_entries(two_block_entries, warped_entries):
    return two_block_entries + warped_entries


@pytest.fixture(scope="module")
def identity_batches(all_entries):
    """Analytic identity residuals at 10 Halton points per catalog chart."""
    return [(f, P, e, analyze(e.chart, sample_points(e.chart, 10), fd_layer=False))
            for f, P, e in all_entries]


@pytest.fixture(scope="module")
def round_trip(two_block_entries, warped_entries):
    rows = []
    for f, P, e in two_block_entries:
        rows.append((f, P, check_and_classify(e.chart, [ROUND_TRIP_LAMBDA])[0]))
    for f, P, e in warped_entries:
        rows.append((f, P, check_and_classify(e.chart, [P["lam"]])[0]))
    return rows


def test_criterion_1_catalog_oracle(identity_batches):
    failures, worst, worst_c, count = [], 0.0, 0.0, 0
    for f, P, e, batch in identity_batches:
        if f not in ("ex1", "ex2", "ex3"):
            continue
        count += 1
        if batch.dropped:
            failures.append(f"{f} {P}: {batch.dropped} points dropped")
            continue
        d, o = batch.data, oracle_eigenvalues(e)
        gap = max(float(np.abs(d.eig_A - o["eig_A"]).max()), sign_free_gap(d.eig_B, o["eig_B"]))
        c_inf = float(np.abs(d.C).max())
        worst, worst_c = max(worst, gap), max(worst_c, c_inf)
        if gap > 1e-8 or c_inf > 1e-9:
            failures.append(f"{f} {P}: eig gap {gap:.3g}, |C| {c_inf:.3g}")
    ref = build_entry("ex1", n=3, k=1, a=1.5)
    o = oracle_eigenvalues(ref)
    if sign_free_gap(o["eig_B"], [2 / 3, -1 / 3, -1 / 3]) > 1e-15:
        failures.append(f"ex1(3,1) oracle eig_B {o['eig_B']}")
    if np.abs(o["eig_A"] - np.sort([-5 / 18, 1 / 18, 1 / 18])).max() > 1e-15:
        failures.append(f"ex1(3,1) oracle eig_A {o['eig_A']}")
    d = analyze(ref.chart, sample_points(ref.chart, 10), identities=False).data
    ref_gap = max(sign_free_gap(d.eig_B, [2 / 3, -1 / 3, -1 / 3]),
                  float(np.abs(d.eig_A - np.sort([-5 / 18, 1 / 18, 1 / 18])).max()))
    if ref_gap > 1e-8:
        failures.append(f"ex1(3,1) numerical reference gap {ref_gap:.3g}")
    record(1, "catalog-oracle agreement", failures,
           f"{count} charts, max eig gap {worst:.2e}, max |C| {worst_c:.2e}, "
           f"reference gap {ref_gap:.2e}")


def test_criterion_2_normalization(identity_batches):
    batches = [(f"{f} {P}", b) for f, P, _, b in identity_batches]
    for seed in range(5):
        chart = graph_chart(seed)
        batches.append((chart.name, analyze(chart, sample_points(chart, 10), fd_layer=False)))
    limits = {"trace_B": 1e-9, "norm_B": 1e-8, "trace_A": 1e-6}
    worst = dict.fromkeys(limits, 0.0)
    failures, points = [], 0
    for name, batch in batches:
        if batch.data is None:
            failures.append(f"{name}: no valid point")
            continue
        points += len(batch.valid)
        for key, limit in limits.items():
            value = float(np.max(batch.data.residuals[key]))
            worst[key] = max(worst[key], value)
            if not value < limit:
                failures.append(f"{name}: {key} {value:.3g}")
    record(2, "normalization identities", failures,
           f"{len(batches)} charts, {points} points, "
           + ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_3_structure_equations(identity_batches, all_entries):
    failures = []
    worst = {"gauss": 0.0, "codazzi": 0.0, "codazzi_fd": 0.0, "product": 0.0}
    for f, P, _, batch in identity_batches:
        for key, limit in (("gauss", 1e-6), ("codazzi", 1e-4)):
            value = float(np.max(batch.data.residuals[key]))
            worst[key] = max(worst[key], value)
            if not value < limit:
                failures.append(f"{f} {P}: {key} {value:.3g}")
    # finite-difference Codazzi cross-check on one chart per family
    firsts = {}
    for f, P, e in all_entries:
        firsts.setdefault(f, (P, e))
    for f, (P, e) in firsts.items():
        batch = analyze(e.chart, sample_points(e.chart, 4))
        value = float(np.max(batch.data.residuals["codazzi_fd"]))
        worst["codazzi_fd"] = max(worst["codazzi_fd"], value)
        if not value < 1e-4:
            failures.append(f"{f} {P}: codazzi_fd {value:.3g}")
    for f, P, e in all_entries:
        if f in ("ex1", "ex2", "ex3"):
            value = product_structure_residual(e)
            worst["product"] = max(worst["product"], value)
            if not value < 1e-9:
                failures.append(f"{f} {P}: product structure {value:.3g}")
    record(3, "Gauss/Codazzi and product structure", failures,
           ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_4_cone_discrepancy():
    failures = []
    a = math.sqrt(2.0)
    entry = build_entry("ex4", n=3, p=1, q=1, a=a)
    note = next(x for x in entry.notes if x["kind"] == "ex4-alpha")
    printed, fixed, need = note["printed_norm_B"], note["corrected_norm_B"], note["required_norm_B"]
    if abs(printed - 1 / 3) > 1e-12 or abs(need - 2 / 3) > 1e-15:
        failures.append(f"printed {printed}, required {need}")
    if abs(need / printed - a * a * (a * a - 1)) > 1e-9:
        failures.append(f"ratio {need / printed} is not a^2 b^2")
    if abs(fixed - need) > 1e-9:
        failures.append(f"corrected norm {fixed}")
    for P in catalog.admissible_grid("ex4"):
        n, b2 = P["n"], P["a"] ** 2 - 1
        alt = build_entry("ex4", P).notes[0]
        if abs(alt["corrected_norm_B"] - (n - 1) / n) > 1e-9:
            failures.append(f"{P}: corrected norm {alt['corrected_norm_B']}")
        if abs(alt["corrected_norm_B"] / alt["printed_norm_B"] - P["a"] ** 2 * b2) > 1e-9:
            failures.append(f"{P}: printed/corrected ratio")
    d = analyze(entry.chart, sample_points(entry.chart, 10), identities=False).data
    gap = sign_free_gap(d.eig_B, [-1 / math.sqrt(3), 0.0, 1 / math.sqrt(3)])
    if gap > 1e-8:
        failures.append(f"pipeline eig_B gap {gap:.3g}")
    record(4, "cone discrepancy", failures,
           f"printed sum B^2 {printed:.6f} vs required {need:.6f}, corrected off by "
           f"{abs(fixed - need):.1e}, pipeline eig_B gap {gap:.2e}")


def test_criterion_5_warped_realization(warped_entries):
    failures, outcomes = [], []
    for family in ("ex5", "ex6"):
        spec = InnerHypersurfaceSpec.for_family(family, 4, 3, 1.0, 0.0)
        try:
            real = catalog.solve_inner_hypersurface(spec, family, 1.0)
        except NoRealization as exc:
            if not exc.details.get("landscape"):
                failures.append(f"{family}: NoRealization without landscape")
            outcomes.append(f"{family}(4,3,1,0) NoRealization")
            continue
        dH, dR = real.residuals(spec)
        if max(dH, dR) > 1e-9:
            failures.append(f"{family}: realization residual {max(dH, dR):.3g}")
        outcomes.append(f"{family}(4,3,1,0) realized")
    worst, worst_fit = 0.0, 0.0
    for family, P, e in warped_entries:
        spec = InnerHypersurfaceSpec.for_family(family, P["n"], P["k"], P["r"], P["lam"])
        worst_fit = max(worst_fit, *e.realization.residuals(spec))
        expected = np.sort(np.concatenate(
            [[v] * m for m, v in warped_d_blocks(family, P["n"], P["k"], P["r"], P["lam"])]))
        batch = analyze(e.chart, sample_points(e.chart, 10), lam=P["lam"], identities=False)
        d = batch.data
        # the D spectrum is compared in whichever normal orientation matches
        gap = min(float(np.abs(d.eig_D - expected).max()),
                  float(np.abs(np.linalg.eigvalsh(d.A - P["lam"] * d.B) - expected).max()))
        worst = max(worst, gap)
        if gap > 1e-7:
            failures.append(f"{family} {P}: eig_D gap {gap:.3g}")
    if not warped_entries:
        failures.append("no realized warped instance")
    if worst_fit > 1e-9:
        failures.append(f"realization residual {worst_fit:.3g}")
    record(5, "warped products end to end", failures,
           f"{'; '.join(outcomes)}; {len(warped_entries)} realized instances, "
           f"max H/R residual {worst_fit:.1e}, max eig_D gap {worst:.2e}")


def test_criterion_6_isoparametric_crosschecks(round_trip):
    failures = []
    cone = build_entry("ex4", n=3, p=1, q=1, a=math.sqrt(2.0))
    grid = [-0.9, -0.4, 0.3, 0.8, 1.7]
    out = theorem1_crosscheck(cone.chart, grid)
    for row in out["rows"]:
        if row["r_D"] != 3 or not row["b_spread"] < 1e-8:
            failures.append(f"cone lambda {row['lambda']}: r_D {row['r_D']}, "
                            f"b_spread {row['b_spread']:.3g}")
    if not out["implication_holds"]:
        failures.append("implication violated on the cone grid")
    spread = max(row["b_spread"] for row in out["rows"])
    for f, P, v in round_trip:
        if not (v.para_blaschke_isoparametric and v.conformal_isoparametric):
            failures.append(f"{f} {P}: para {v.para_blaschke_isoparametric}, "
                            f"conformal {v.conformal_isoparametric}")
    hyp = build_entry("ex1", n=3, k=1, a=1.5)
    collapse = theorem1_crosscheck(hyp.chart, [0.0, 1 / 3, 1.0])
    if not any(abs(lam - 1 / 3) < 1e-12 for lam in collapse["collapsed_lambdas"]):
        failures.append(f"collapse at 1/3 missed: {collapse['collapsed_lambdas']}")
    record(6, "isoparametric cross-checks", failures,
           f"cone r_D=3 on {len(grid)} lambdas with b_spread <= {spread:.1e}; "
           f"{len(round_trip)} catalog entries isoparametric; "
           f"collapse at {collapse['collapsed_lambdas']}")


def test_criterion_7_classifier_round_trip(round_trip, perturbed_graph):
    failures = []
    for f, P, v in round_trip:
        m = v.family_match
        if m.case != FAMILY_CASE[f] or not params_match(m, f, P):
            failures.append(f"{f} {P} -> {m.label} {m.family} {m.params}")
    generic = check_and_classify(perturbed_graph, [0.0])[0]
    if generic.family_match.case is not None or generic.para_blaschke_isoparametric:
        failures.append(f"perturbed graph -> {generic.family_match.label}")
    record(7, "classifier round trip", failures,
           f"{len(round_trip) - len(failures)}/{len(round_trip)} entries recovered, "
           f"perturbed graph {generic.family_match.label}")


def test_criterion_8_differentiation(all_entries):
    failures, worst = [], 0.0
    for f, P, e in all_entries:
        err = fd_check_chart(e.chart, sample_points(e.chart, 50, seed=3), (1, 2, 3, 4))
        worst = max(worst, err)
        if not err < 1e-5:
            failures.append(f"{f} {P}: fd {err:.3g}")
    drift = 0.0
    for entry in (build_entry("ex1", n=3, k=1, a=1.5),
                  build_entry("ex4", n=3, p=1, q=1, a=math.sqrt(2.0))):
        N = entry.chart.N
        for lam in (0.0, 0.37):
            for M in (dilation(N, 2.0), boost(N, 0.4)):
                d = invariance_probe(entry.chart, M, lam=lam)
                drift = max(drift, d)
                if not d < 1e-8:
                    failures.append(f"{entry.chart.name} lambda {lam}: drift {d:.3g}")
    record(8, "differentiation soundness", failures,
           f"{len(all_entries)} charts x orders 1-4 x 50 points, max fd error {worst:.2e}, "
           f"max probe drift {drift:.2e}")


CLI_SUITE = [
    ["check", "--catalog", "ex1", "--n", "3", "--k", "1", "--a", "1.5", "--lambda", "0,0.5"],
    ["check", "--catalog", "ex4", "--n", "4", "--p", "1", "--q", "1", "--a", "1.5",
     "--lambda", "0.37"],
    ["identities", "--catalog", "ex2", "--n", "3", "--k", "1", "--a", "1.0"],
    ["invariants", "--catalog", "ex3", "--n", "4", "--k", "2", "--a", "0.5"],
    ["catalog", "--family", "ex6", "--n", "4", "--k", "3", "--r", "2.0", "--lam", "0.0"],
    ["probe", "--catalog", "ex4", "--n", "3", "--p", "1", "--q", "1", "--a", "1.4142135623730951"],
    ["theorem1", "--catalog", "ex1", "--n", "3", "--k", "1", "--a", "1.5",
     "--lambda", "0,0.3333333333333333,1"],
    ["check", "--chart", "{graph}", "--lambda", "0"],
]


def run_suite(directory):
    graph = directory / "graph.chart"
    graph.write_text(PERTURBED_GRAPH)
    outputs = []
    for i, argv in enumerate(CLI_SUITE):
        target = directory / f"report{i}.json"
        main([a.replace("{graph}", str(graph)) for a in argv] + ["--out", str(target)])
        outputs.append(target.read_bytes())
    return outputs


def test_criterion_9_determinism(tmp_path, monkeypatch):
    reports = {}
    for threads in ("1", "8"):
        monkeypatch.setenv("CONFORMA_THREADS", threads)
        directory = tmp_path / f"t{threads}"
        directory.mkdir()
        reports[threads] = run_suite(directory)
    failures = [f"report {i} ({' '.join(CLI_SUITE[i][:2])}) differs"
                for i, (a, b) in enumerate(zip(reports["1"], reports["8"])) if a != b]
    if any(not r for r in reports["1"]):
        failures.append("empty report")
    record(9, "determinism across thread counts", failures,
           f"{len(CLI_SUITE)} CLI reports, {sum(map(len, reports['1']))} bytes compared")
