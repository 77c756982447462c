"""The six example families: chart generators, closed-form oracles, inner hypersurfaces.

Families
    ex1  H^k(-a) x R^{n-k} in R^{n+1}_1
    ex2  S^k(sqrt(1+a^2)) x H^{n-k}(-a) in de Sitter space
    ex3  H^k(-sqrt(1-a^2)) x H^{n-k}(-a) in anti-de Sitter space
    ex4  the cone x(u', u'', t, u''') = (t u', t u'', u''') over H^q x S^p
    ex5  (y1, y2) / y0 with y1 a product hypersurface of S^{k+1}_1(r)
    ex6  (y~0, y1, y2) / y0 with y a product hypersurface of H^{k+1}_1(-r)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, root

from .dsl import ChartImmersion, parse_chart
from .errors import ConstraintViolation, NoRealization

FAMILIES = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6")
HYPERBOLIC_RANGE = (-0.8, 0.8)
ANGLE_RANGE = (0.1, math.pi - 0.1)
FLAT_RANGE = (-1.0, 1.0)
RADIAL_RANGE = (0.5, 3.0)
REALIZATION_TOL = 1e-9


# coordinate patches --------------------------------------------------------

def hyperbolic_coords(names: list[str]) -> list[str]:
    """Unit H^k in R^{k+1}_1, time coordinate first."""
    comps = [f"cosh({names[0]})", f"sinh({names[0]})"]
    for u in names[1:]:
        comps = [f"{c}*cosh({u})" for c in comps] + [f"sinh({u})"]
    return comps


def sphere_coords(names: list[str]) -> list[str]:
    """Unit S^p in R^{p+1} via iterated polar angles."""
    comps = [f"cos({names[0]})", f"sin({names[0]})"]
    for u in names[1:]:
        comps = [f"{c}*sin({u})" for c in comps] + [f"cos({u})"]
    return comps


def _scaled(factor: str, comps: list[str]) -> list[str]:
    return [f"{factor}*{c}" for c in comps]


class _Vars:
    def __init__(self):
        self.names: list[str] = []
        self.box: list[tuple] = []

    def take(self, count: int, interval) -> list[str]:
        out = [f"u{len(self.names) + i + 1}" for i in range(count)]
        self.names += out
        self.box += [interval] * count
        return out


def _chart_source(name, ambient, dim, variables: _Vars, params: dict, comps) -> str:
    lines = [f"chart {name}", f"ambient {ambient} dim {dim}"]
    lines.append("vars " + ", ".join(
        f"{v} in [{lo!r}, {hi!r}]" for v, (lo, hi) in zip(variables.names, variables.box)))
    if params:
        lines.append("params " + ", ".join(f"{k} = {float(v)!r}" for k, v in params.items()))
    lines += [f"x{i} = {c}" for i, c in enumerate(comps, start=1)]
    return "\n".join(lines) + "\n"


# inner hypersurfaces for ex5 / ex6 -------------------------------------------

@dataclass(frozen=True)
class InnerHypersurfaceSpec:
    """Targets for the k-dimensional inner hypersurface of ex5 (de Sitter) or ex6."""

    k: int
    target_H1: float
    target_R1: float

    @classmethod
    def for_family(cls, family: str, n: int, k: int, r: float, lam: float):
        sign = 1 if family == "ex5" else -1
        R1 = (sign * n * k * (k - 1) + (n - 1) * r * r) / (n * r * r) - n * (n - 1) * lam**2
        return cls(k, n * lam / k, R1)


@dataclass(frozen=True)
class Realization:
    """Two-factor product hypersurface realising an InnerHypersurfaceSpec.

    ex5: S^p(c1) x H^{k-p}(c2) in S^{k+1}_1(r), c1^2 - c2^2 = r^2.
    ex6: H^p(c1) x H^{k-p}(c2) in H^{k+1}_1(-r), c1^2 + c2^2 = r^2.
    ``sign`` is the normal orientation making the mean curvature equal H_1.
    """

    family: str
    k: int
    p: int
    c1: float
    c2: float
    r: float
    sign: int
    H: float
    R: float
    principal: tuple  # (first factor value, second factor value), normal already applied

    def residuals(self, spec: InnerHypersurfaceSpec) -> tuple[float, float]:
        return abs(self.H - spec.target_H1), abs(self.R - spec.target_R1)


def product_geometry(family: str, k: int, p: int, c1: float, c2: float):
    """(principal curvatures per factor, mean curvature, scalar curvature, radius)."""
    q = k - p
    if family == "ex5":
        r = math.sqrt(c1 * c1 - c2 * c2)
        kappa = (-c2 / (r * c1), -c1 / (r * c2))
        R = p * (p - 1) / c1**2 - q * (q - 1) / c2**2
    else:
        r = math.hypot(c1, c2)
        kappa = (-c2 / (r * c1), c1 / (r * c2))
        R = -p * (p - 1) / c1**2 - q * (q - 1) / c2**2
    H = (p * kappa[0] + q * kappa[1]) / k
    return kappa, H, R, r


def _radii(family: str, r: float, t: float) -> tuple[float, float]:
    """Points of the constraint curve: ex5 uses c2/c1 = t in (0,1), ex6 the angle t in (0, pi/2)."""
    if family == "ex5":
        c1 = r / math.sqrt(1.0 - t * t)
        return c1, t * c1
    return r * math.cos(t), r * math.sin(t)


def _curve(family: str):
    return (1e-6, 1.0 - 1e-9) if family == "ex5" else (1e-6, math.pi / 2 - 1e-6)


def _brackets(f, lo, hi, count=2000):
    """Sign-change brackets of f on a geometric/linear admissibility grid."""
    grid = np.linspace(lo, hi, count)
    vals = np.array([f(t) for t in grid])
    out = []
    for i in range(count - 1):
        if vals[i] == 0.0:
            out.append((grid[i], grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            out.append((grid[i], grid[i + 1]))
    return out


def solve_inner_hypersurface(spec: InnerHypersurfaceSpec, family: str, r: float,
                             p: int | None = None) -> Realization:
    """Find (p, c1, c2) so that the product has the target H_1 and R_1.

    On the constraint curve the mean-curvature equation is solved first (bracketed
    scan, then a 2-D Newton-type polish of (constraint, H)); the scalar-curvature
    target is then a check.  Raises NoRealization with the residual landscape.
    """
    if family not in ("ex5", "ex6"):
        raise ValueError("inner hypersurfaces exist only for ex5 and ex6")
    k = spec.k
    if k < 2:
        raise ConstraintViolation("k", ">= 2", k)
    splits = range(1, k) if p is None else [p]
    landscape = []
    best = None
    for split in splits:
        for sign in (1, -1):
            def h_gap(t, split=split, sign=sign):
                _, H, _, _ = product_geometry(family, k, split, *_radii(family, r, t))
                return sign * H - spec.target_H1

            ends = _curve(family)
            for lo, hi in _brackets(h_gap, *ends):
                t = lo if lo == hi else brentq(h_gap, lo, hi, xtol=1e-15, rtol=1e-15)
                if min(t - ends[0], ends[1] - t) < 1e-4:
                    continue
                c1, c2 = _radii(family, r, t)
                c1, c2 = _polish(family, k, split, sign, spec.target_H1, r, c1, c2)
                kappa, H, R, _ = product_geometry(family, k, split, c1, c2)
                real = Realization(family, k, split, c1, c2, r, sign, sign * H, R,
                                   (sign * kappa[0], sign * kappa[1]))
                dH, dR = real.residuals(spec)
                entry = {"p": split, "sign": sign, "c1": c1, "c2": c2,
                         "H_residual": dH, "R_residual": dR}
                landscape.append(entry)
                umbilic_free = abs(real.principal[0] - real.principal[1]) > 1e-9
                if dH < REALIZATION_TOL and dR < REALIZATION_TOL * max(1.0, abs(spec.target_R1)) \
                        and umbilic_free and (best is None or dR < best[0]):
                    best = (dR, real)
    if best is None:
        if not landscape:
            # no H_1 match at all: record the closest approach of H along the curve
            for split in splits:
                ts = np.linspace(*_curve(family), 200)
                gaps = [abs(product_geometry(family, k, split, *_radii(family, r, t))[1])
                        - abs(spec.target_H1) for t in ts]
                j = int(np.argmin(np.abs(gaps)))
                landscape.append({"p": split, "closest_H_gap": float(abs(gaps[j]))})
        raise NoRealization(
            f"no two-factor product in {'S' if family == 'ex5' else 'H'}^{k + 1}_1(r={r!r}) "
            f"has H_1 = {spec.target_H1!r} and R_1 = {spec.target_R1!r}",
            family=family, k=k, r=r, target_H1=spec.target_H1, target_R1=spec.target_R1,
            landscape=landscape)
    return best[1]


def _polish(family, k, p, sign, H1, r, c1, c2):
    """Damped-Newton (hybrid Powell) refinement of constraint and H equations in (c1, c2)."""
    def F(v):
        a, b = v
        if a <= 0 or b <= 0 or (family == "ex5" and a <= b):
            return [1e3, 1e3]
        constraint = a * a - b * b if family == "ex5" else a * a + b * b
        _, H, _, _ = product_geometry(family, k, p, a, b)
        return [constraint - r * r, sign * H - H1]
    sol = root(F, [c1, c2], method="hybr", options={"xtol": 1e-15})
    if sol.success and np.max(np.abs(F(sol.x))) <= np.max(np.abs(F([c1, c2]))):
        return float(sol.x[0]), float(sol.x[1])
    return c1, c2


def realizable_lambdas(family: str, n: int, k: int, r: float) -> list[tuple[int, float]]:
    """(p, lambda >= 0) pairs for which a two-factor product inner hypersurface exists."""
    out = []
    for p in range(1, k):
        def gap(t, p=p):
            c1, c2 = _radii(family, r, t)
            _, H, R, _ = product_geometry(family, k, p, c1, c2)
            lam = k * H / n
            return R - InnerHypersurfaceSpec.for_family(family, n, k, r, lam).target_R1
        ends = _curve(family)
        for lo, hi in _brackets(gap, *ends):
            t = lo if lo == hi else brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15)
            if min(t - ends[0], ends[1] - t) < 1e-4:
                continue  # asymptotic end of the curve, a radius blows up
            _, H, _, _ = product_geometry(family, k, p, *_radii(family, r, t))
            out.append((p, abs(k * H / n)))
    return sorted(out)


# entries -------------------------------------------------------------------

@dataclass
class CatalogEntry:
    family: str
    params: dict
    chart: ChartImmersion
    blocks: list                        # [(multiplicity, b, a)] in the family's sign convention
    realization: Realization | None = None
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.params["n"]


def _require(cond: bool, param: str, bound: str, value):
    if not cond:
        raise ConstraintViolation(param, bound, value)


def _as_int(params: dict, key: str) -> int:
    if key not in params:
        raise ConstraintViolation(key, "required", None)
    value = params[key]
    if float(value) != int(value):
        raise ConstraintViolation(key, "integer", value)
    return int(value)


def check_constraints(family: str, params: dict) -> dict:
    """Validated, normalised parameter dict."""
    if family not in FAMILIES:
        raise ConstraintViolation("family", f"one of {FAMILIES}", family)
    n = _as_int(params, "n")
    _require(3 <= n <= 8 if family in ("ex4", "ex5", "ex6") else 2 <= n <= 8, "n",
             "3 <= n <= 8" if family in ("ex4", "ex5", "ex6") else "2 <= n <= 8", n)
    out = {"n": n}
    if family in ("ex1", "ex2", "ex3"):
        k = _as_int(params, "k")
        _require(1 <= k <= n - 1, "k", "1 <= k <= n-1", k)
        a = float(params.get("a", 1.0))
        if family == "ex3":
            _require(0 < a < 1, "a", "0 < a < 1", a)
        else:
            _require(a > 0, "a", "> 0", a)
        out.update(k=k, a=a)
    elif family == "ex4":
        p, q = _as_int(params, "p"), _as_int(params, "q")
        _require(p >= 1, "p", ">= 1", p)
        _require(q >= 1, "q", ">= 1", q)
        _require(p + q < n, "p+q", "< n", p + q)
        a = float(params.get("a", math.sqrt(2.0)))
        _require(a > 1, "a", "> 1", a)
        out.update(p=p, q=q, a=a)
    else:
        k = _as_int(params, "k")
        _require(2 <= k <= n - 1, "k", "2 <= k <= n-1", k)
        r = float(params.get("r", 1.0))
        _require(r > 0, "r", "> 0", r)
        out.update(k=k, r=r, lam=float(params.get("lam", 0.0)))
        if params.get("p") is not None:
            p = _as_int(params, "p")
            _require(1 <= p <= k - 1, "p", "1 <= p <= k-1", p)
            out["p"] = p
    return out


def ex4_alpha2(n: int, p: int, q: int, a: float, corrected: bool = True) -> float:
    """alpha^2 with e^{2 tau} = alpha^2 / t^2; ``corrected=False`` omits the 1/(a^2 b^2) factor."""
    b2 = a * a - 1.0
    num = p * (n - p) * b2 * b2 - 2 * p * q * a * a * b2 + q * (n - q) * a**4
    return num / ((n - 1) * (a * a * b2 if corrected else 1.0))


def ex4_blocks(n: int, p: int, q: int, a: float, corrected: bool = True) -> list:
    """(multiplicity, b_i, a_i) for the H^q, S^p and radial/flat blocks.

    ``corrected=False`` reproduces the printed closed forms: alpha^2 without the
    1/(a^2 b^2) factor and a plus sign in the last a_i.  The corrected forms
    satisfy both the B normalisation and -b_i b_j + a_i + a_j = 0.
    """
    b = math.sqrt(a * a - 1.0)
    alpha2 = ex4_alpha2(n, p, q, a, corrected)
    alpha = math.sqrt(alpha2)
    s = p * b * b + q * a * a
    den_b = n * a * b * alpha
    den_a = 2 * n * n * a * a * b * b * alpha2
    sign3 = -1.0 if corrected else 1.0
    return [
        (q, (p * b * b - (n - q) * a * a) / den_b, (s * s - 2 * n * a * a * s + n * n * a * a * b * b) / den_a),
        (p, (q * a * a - (n - p) * b * b) / den_b, (s * s - 2 * n * b * b * s + n * n * a * a * b * b) / den_a),
        (n - p - q, s / den_b, (s * s + sign3 * n * n * a * a * b * b) / den_a),
    ]


def two_block_values(n: int, k: int, s: float) -> list:
    """ex1-ex3 blocks; s = -1 (ex1), a^2 (ex2), -a^2 (ex3)."""
    b1 = math.sqrt((n - 1) * (n - k) / k) / n
    b2 = -math.sqrt((n - 1) * k / (n - k)) / n
    f = (n - 1) / (k * (n - k)) / (2 * n * n)
    a1 = f * ((n - k) ** 2 + n * n * s)
    a2 = f * (k * k - n * n * s - n * n)
    return [(k, b1, a1), (n - k, b2, a2)]


def _ex56_blocks(family, n, k, r, lam, real: Realization) -> list:
    p = real.p
    h1, h2 = real.principal
    base_k = (1 + lam**2 * r * r) / (2 * r * r) if family == "ex5" else (lam**2 * r * r - 1) / (2 * r * r)
    rest = (lam**2 * r * r - 1) / (2 * r * r) if family == "ex5" else (lam**2 * r * r + 1) / (2 * r * r)
    return [
        (p, h1 - lam, base_k - lam * h1),
        (k - p, h2 - lam, base_k - lam * h2),
        (n - k, -lam, rest),
    ]


def warped_d_blocks(family: str, n: int, k: int, r: float, lam: float) -> list:
    """[(multiplicity, d)] for D = A + lam B of ex5/ex6; needs no realization."""
    lead = (1 - lam**2 * r * r) / (2 * r * r)
    trail = -(1 + lam**2 * r * r) / (2 * r * r)
    if family == "ex6":
        lead, trail = trail, lead
    return [(k, lead), (n - k, trail)]


def _fmt(v) -> str:
    return repr(float(v)).replace("-", "m").replace(".", "p")


def build_entry(family: str, params: dict | None = None, **kw) -> CatalogEntry:
    params = dict(params or {}, **kw)
    P = check_constraints(family, params)
    n = P["n"]
    V = _Vars()
    notes = []
    realization = None
    if family == "ex1":
        k, a = P["k"], P["a"]
        hyp = V.take(k, HYPERBOLIC_RANGE)
        flat = V.take(n - k, FLAT_RANGE)
        comps = _scaled("a", hyperbolic_coords(hyp)) + flat
        src = _chart_source(f"ex1_n{n}_k{k}", "flat1", n + 1, V, {"a": a}, comps)
        blocks = two_block_values(n, k, -1.0)
    elif family == "ex2":
        k, a = P["k"], P["a"]
        sph = V.take(k, ANGLE_RANGE)
        hyp = V.take(n - k, HYPERBOLIC_RANGE)
        H = _scaled("a", hyperbolic_coords(hyp))
        comps = [H[0]] + _scaled("sqrt(1+a^2)", sphere_coords(sph)) + H[1:]
        src = _chart_source(f"ex2_n{n}_k{k}", "desitter", n + 1, V, {"a": a}, comps)
        blocks = two_block_values(n, k, a * a)
    elif family == "ex3":
        k, a = P["k"], P["a"]
        h1 = _scaled("sqrt(1-a^2)", hyperbolic_coords(V.take(k, HYPERBOLIC_RANGE)))
        h2 = _scaled("a", hyperbolic_coords(V.take(n - k, HYPERBOLIC_RANGE)))
        comps = [h1[0], h2[0]] + h1[1:] + h2[1:]
        src = _chart_source(f"ex3_n{n}_k{k}", "antidesitter", n + 1, V, {"a": a}, comps)
        blocks = two_block_values(n, k, -a * a)
    elif family == "ex4":
        p, q, a = P["p"], P["q"], P["a"]
        hyp = V.take(q, HYPERBOLIC_RANGE)
        sph = V.take(p, ANGLE_RANGE)
        (t,) = V.take(1, RADIAL_RANGE)
        flat = V.take(n - p - q - 1, FLAT_RANGE)
        comps = (_scaled(f"{t}*sqrt(a^2-1)", hyperbolic_coords(hyp))
                 + _scaled(f"{t}*a", sphere_coords(sph)) + flat)
        src = _chart_source(f"ex4_n{n}_p{p}_q{q}", "flat1", n + 1, V, {"a": a}, comps)
        blocks = ex4_blocks(n, p, q, a)
        printed = ex4_blocks(n, p, q, a, corrected=False)
        notes.append({
            "kind": "ex4-alpha",
            "message": "printed alpha^2 lacks a 1/(a^2 b^2) factor and the last a_i has a "
                       "sign slip; only the corrected forms satisfy the B normalisation "
                       "and the product-structure identity",
            "printed_alpha2": ex4_alpha2(n, p, q, a, False),
            "corrected_alpha2": ex4_alpha2(n, p, q, a, True),
            "printed_norm_B": sum(m * b * b for m, b, _ in printed),
            "corrected_norm_B": sum(m * b * b for m, b, _ in blocks),
            "required_norm_B": (n - 1) / n,
            "printed_a": [a_ for _, _, a_ in printed],
            "corrected_a": [a_ for _, _, a_ in blocks],
        })
    else:
        k, r, lam = P["k"], P["r"], P["lam"]
        spec = InnerHypersurfaceSpec.for_family(family, n, k, r, lam)
        realization = solve_inner_hypersurface(spec, family, r, P.get("p"))
        p = realization.p
        pr = {"c1": realization.c1, "c2": realization.c2, "r": r}
        if family == "ex5":
            sph = V.take(p, ANGLE_RANGE)
            inner = V.take(k - p, HYPERBOLIC_RANGE)
            outer = V.take(n - k, HYPERBOLIC_RANGE)
            Hi = _scaled("c2", hyperbolic_coords(inner))
            y1 = [Hi[0]] + _scaled("c1", sphere_coords(sph)) + Hi[1:]
            Ho = hyperbolic_coords(outer)
            y0 = f"(r*{Ho[0]})"
            y2 = _scaled("r", Ho[1:])
            comps = [f"{c}/{y0}" for c in y1 + y2]
            ambient = "desitter"
        else:
            hp = hyperbolic_coords(V.take(p, HYPERBOLIC_RANGE))
            hq = hyperbolic_coords(V.take(k - p, HYPERBOLIC_RANGE))
            sph = sphere_coords(V.take(n - k, ANGLE_RANGE))
            y0 = f"(c1*{hp[0]})"
            parts = [f"c2*{hq[0]}"] + _scaled("c1", hp[1:]) + _scaled("c2", hq[1:]) + _scaled("r", sph)
            comps = [f"{c}/{y0}" for c in parts]
            ambient = "desitter"
        src = _chart_source(f"{family}_n{n}_k{k}_p{p}", ambient, n + 1, V, pr, comps)
        blocks = _ex56_blocks(family, n, k, r, lam, realization)
        P["p"] = p
    return CatalogEntry(family, P, parse_chart(src), blocks, realization, notes)


def _expand(blocks, key) -> np.ndarray:
    vals = []
    for block in blocks:
        vals += [block[key]] * block[0]
    return np.sort(np.array(vals, dtype=float))


def oracle_eigenvalues(entry: CatalogEntry, lam: float = 0.0) -> dict:
    """Closed-form sorted eigenvalues of B, A and D = A + lam B (family sign convention)."""
    blocks = entry.blocks
    return {
        "eig_B": _expand(blocks, 1),
        "eig_A": _expand(blocks, 2),
        "eig_D": np.sort(np.concatenate([[a + lam * b] * m for m, b, a in blocks])),
        "blocks": [(m, b, a, a + lam * b) for m, b, a in blocks],
    }


def product_structure_residual(entry: CatalogEntry) -> float:
    """max over block pairs of |-b_p b_q + a_p + a_q| (mixed sectional curvature of g)."""
    worst = 0.0
    blocks = [b for b in entry.blocks if b[0] > 0]
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            worst = max(worst, abs(-blocks[i][1] * blocks[j][1] + blocks[i][2] + blocks[j][2]))
    return worst


def admissible_grid(family: str, ns=(3, 4, 5), avals=(0.5, 1.0, 1.5),
                    ex3_avals=(0.5, 0.9)) -> list[dict]:
    """Parameter grid used by the round-trip and oracle sweeps for ex1-ex4.

    ex3 needs 0 < a < 1, so it draws from ``ex3_avals`` instead of ``avals``.
    """
    out = []
    for n in ns:
        if family in ("ex1", "ex2", "ex3"):
            for k in range(1, n):
                for a in (ex3_avals if family == "ex3" else avals):
                    out.append({"n": n, "k": k, "a": a})
        elif family == "ex4":
            for p in range(1, n):
                for q in range(1, n - p):
                    for a in (math.sqrt(2.0), 1.5, 2.0):
                        out.append({"n": n, "p": p, "q": q, "a": a})
    return out


def warped_grid(ns=(3, 4, 5), radii=(0.5, 1.0, 2.0)) -> list[dict]:
    """Every realizable ex5/ex6 instance over the grid, one per distinct (p, lam)."""
    out = []
    for family in ("ex5", "ex6"):
        for n in ns:
            for k in range(2, n):
                for r in radii:
                    seen = set()
                    for p, lam in realizable_lambdas(family, n, k, r):
                        key = (p, round(lam, 9))
                        if key in seen:
                            continue
                        seen.add(key)
                        out.append({"family": family, "n": n, "k": k, "r": r, "lam": lam, "p": p})
    return out
