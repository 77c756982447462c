"""Sampling-based isoparametric verdicts and family classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np
from scipy.stats import qmc

from .catalog import ex4_blocks, two_block_values
from .conformal import analyze
from .dsl import ChartImmersion
from .errors import EmptyDomain, TooManyDegeneratePoints

BOX_SHRINK = 0.05
MIN_SURVIVORS = 0.75
FIT_TOL = 1e-6

CASE_LABELS = {
    1: "CMC with constant scalar curvature (by elimination)",
    2: "S^k x H^(n-k) in de Sitter space",
    3: "H^k x H^(n-k) in anti-de Sitter space",
    4: "H^k x R^(n-k) in Minkowski space",
    5: "cone over H^q x S^p times R^(n-p-q-1)",
    6: "warped product over an inner hypersurface of de Sitter space",
    7: "warped product over an inner hypersurface of anti-de Sitter space",
}
FAMILY_OF_CASE = {2: "ex2", 3: "ex3", 4: "ex1", 5: "ex4", 6: "ex5", 7: "ex6"}


@dataclass(frozen=True)
class Tolerances:
    c_tol: float = 1e-9
    spread_tol: float = 1e-6
    identity_tol: float = 1e-6
    codazzi_tol: float = 1e-4
    cluster_tol: float = 1e-6

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass
class FamilyMatch:
    case: int | None            # None means unclassified
    family: str | None = None
    params: dict = field(default_factory=dict)
    residual: float = 0.0
    equivalent: list = field(default_factory=list)
    note: str = ""

    @property
    def label(self) -> str:
        return "Unclassified" if self.case is None else f"thm2-case-{self.case}"

    def to_dict(self) -> dict:
        return {
            "case": self.label,
            "description": CASE_LABELS.get(self.case, ""),
            "family": self.family,
            "params": dict(self.params),
            "residual": float(self.residual),
            "equivalent": [dict(e) for e in self.equivalent],
            "note": self.note,
        }


@dataclass
class Verdict:
    lam: float
    samples: int
    requested: int
    c_max: float
    b_spread: float
    d_spread: float
    r_B: int
    r_D: int
    eig_A: np.ndarray
    eig_B: np.ndarray
    eig_D: np.ndarray
    orientation: float
    para_blaschke_isoparametric: bool
    conformal_isoparametric: bool
    family_match: FamilyMatch | None = None
    # representative matrices at the first surviving point, oriented
    A_rep: np.ndarray | None = field(default=None, repr=False)
    B_rep: np.ndarray | None = field(default=None, repr=False)
    tolerances: Tolerances = field(default_factory=Tolerances, repr=False)

    @property
    def dropped(self) -> int:
        return self.requested - self.samples

    def canonical_B(self) -> tuple[np.ndarray, bool]:
        """B spectrum signed so its largest-magnitude eigenvalue is positive.

        The flag is true when the spectrum is symmetric under negation, in which
        case both signs describe the same hypersurface.
        """
        eig = np.asarray(self.eig_B, dtype=float)
        tol = self.tolerances.cluster_tol
        symmetric = bool(np.abs(np.sort(-eig) - eig).max() < tol)
        lo, hi = eig[0], eig[-1]
        return (eig if hi >= -lo else np.sort(-eig)), symmetric

    def to_dict(self) -> dict:
        eig_canon, symmetric = self.canonical_B()
        return {
            "lambda": float(self.lam),
            "samples": self.samples,
            "dropped": self.dropped,
            "c_max": float(self.c_max),
            "b_spread": float(self.b_spread),
            "d_spread": float(self.d_spread),
            "r_B": self.r_B,
            "r_D": self.r_D,
            "eig_A": [float(v) for v in self.eig_A],
            "eig_B": [float(v) for v in self.eig_B],
            "eig_D": [float(v) for v in self.eig_D],
            "eig_B_canonical": [float(v) for v in eig_canon],
            "eig_B_sign_symmetric": symmetric,
            "orientation": int(self.orientation),
            "para_blaschke_isoparametric": bool(self.para_blaschke_isoparametric),
            "conformal_isoparametric": bool(self.conformal_isoparametric),
            "family_match": None if self.family_match is None else self.family_match.to_dict(),
            "scope": "constancy checked on one chart box",
        }


# sampling ------------------------------------------------------------------

def sample_points(chart: ChartImmersion, count: int, seed: int = 42) -> np.ndarray:
    """Scrambled Halton points in the domain box shrunk by 5% on every side."""
    if count < 1:
        raise EmptyDomain("sample count must be positive", count=count)
    lo = np.array([b[0] for b in chart.domain_box], dtype=float)
    hi = np.array([b[1] for b in chart.domain_box], dtype=float)
    if np.any(hi <= lo):
        raise EmptyDomain("domain box is empty", box=[list(b) for b in chart.domain_box])
    margin = BOX_SHRINK * (hi - lo)
    unit = qmc.Halton(d=chart.n, scramble=True, seed=seed).random(count)
    return qmc.scale(unit, lo + margin, hi - margin)


def clusters(values, tol: float = 1e-6) -> list[tuple[float, int]]:
    """Group sorted values; a new group starts only where a gap strictly exceeds tol."""
    vals = np.sort(np.asarray(values, dtype=float))
    groups: list[list[float]] = []
    for v in vals:
        if groups and v - groups[-1][-1] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return [(float(np.mean(g)), len(g)) for g in groups]


# verdicts ------------------------------------------------------------------

def _spread(eigs: np.ndarray) -> float:
    return float(np.ptp(eigs, axis=0).max()) if len(eigs) else 0.0


def _verdict(data, lam, sigma, requested, tol: Tolerances) -> Verdict:
    B = sigma * data.B
    D = data.A + lam * B
    eig_B = np.linalg.eigvalsh(B)
    eig_D = np.linalg.eigvalsh(D)
    c_max = float(np.abs(data.C).max())
    b_spread, d_spread = _spread(eig_B), _spread(eig_D)
    mean_B, mean_D = eig_B.mean(axis=0), eig_D.mean(axis=0)
    return Verdict(
        lam=float(lam), samples=len(data.points), requested=requested, c_max=c_max,
        b_spread=b_spread, d_spread=d_spread,
        r_B=len(clusters(mean_B, tol.cluster_tol)), r_D=len(clusters(mean_D, tol.cluster_tol)),
        eig_A=data.eig_A.mean(axis=0), eig_B=mean_B, eig_D=mean_D, orientation=sigma,
        para_blaschke_isoparametric=c_max < tol.c_tol and d_spread < tol.spread_tol,
        conformal_isoparametric=c_max < tol.c_tol and b_spread < tol.spread_tol,
        A_rep=data.A[0], B_rep=B[0], tolerances=tol)


def check_many(chart: ChartImmersion, lambdas, count: int = 20, seed: int = 42,
               tol: Tolerances | None = None) -> list[Verdict]:
    """One verdict per lambda from a single pass over the sample points.

    D depends on the normal only through the sign of lambda, so both
    orientations are tried: a para-Blaschke verdict wins, then fewer distinct
    D eigenvalues, then the default orientation.
    """
    tol = tol or Tolerances()
    points = sample_points(chart, count, seed)
    batch = analyze(chart, points, identities=False)
    survivors = len(batch.valid)
    if survivors < MIN_SURVIVORS * count or batch.data is None:
        first = next((e for e in batch.errors if e is not None), None)
        raise TooManyDegeneratePoints(
            f"only {survivors} of {count} sample points are usable",
            survivors=survivors, requested=count,
            first_error=None if first is None else first.to_dict())
    out = []
    for lam in lambdas:
        options = [_verdict(batch.data, float(lam), s, count, tol) for s in (1.0, -1.0)]
        best = min(options, key=lambda v: (not v.para_blaschke_isoparametric, v.r_D))
        out.append(best)
    return out


def check(chart: ChartImmersion, lam: float, count: int = 20, seed: int = 42,
          tol: Tolerances | None = None) -> Verdict:
    return check_many(chart, [lam], count, seed, tol)[0]


# classification ------------------------------------------------------------

def _eigenspaces(M: np.ndarray, tol: float):
    """[(value, basis columns)] for the clustered eigenvalues of a symmetric matrix."""
    w, V = np.linalg.eigh(M)
    out, start = [], 0
    for value, mult in clusters(w, tol):
        out.append((value, V[:, start:start + mult]))
        start += mult
    return out


def _restricted(M: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(basis.T @ M @ basis)


def _fit_two_blocks(v: Verdict, chart: ChartImmersion) -> FamilyMatch | None:
    n, c = chart.n, chart.ambient.c
    spaces = _eigenspaces(v.B_rep, v.tolerances.cluster_tol)
    if len(spaces) != 2:
        return None
    candidates = []
    for sign in (1.0, -1.0):
        pos = [(b, V) for b, V in spaces if sign * b > 0]
        neg = [(b, V) for b, V in spaces if sign * b < 0]
        if len(pos) != 1 or len(neg) != 1:
            continue
        (bk, Vk), (br, Vr) = pos[0], neg[0]
        k = Vk.shape[1]
        a_k = float(_restricted(v.A_rep, Vk).mean())
        a_r = float(_restricted(v.A_rep, Vr).mean())
        s = (a_k * 2 * n * n * k * (n - k) / (n - 1) - (n - k) ** 2) / (n * n)
        (_, b1, _), (_, b2, a2) = two_block_values(n, k, s)
        resid = max(abs(sign * bk - b1), abs(sign * br - b2), abs(a_r - a2))
        if c == 0:
            case, params = 4, {"n": n, "k": k}
            resid = max(resid, abs(s + 1.0))
        elif c == 1 and s > 0:
            case, params = 2, {"n": n, "k": k, "a": math.sqrt(s)}
        elif c == -1 and -1 < s < 0:
            case, params = 3, {"n": n, "k": k, "a": math.sqrt(-s)}
        else:
            continue
        candidates.append((resid, case, params))
    if not candidates:
        return None
    candidates.sort(key=lambda t: (t[0] > FIT_TOL, t[2]["k"]))
    resid, case, params = candidates[0]
    equivalent = [p for r, cs, p in candidates[1:] if cs == case and r <= FIT_TOL]
    note = "the Minkowski radius is a dilation and is not a conformal invariant" if case == 4 else ""
    return FamilyMatch(case, FAMILY_OF_CASE[case], params, resid, equivalent, note)


def _fit_warped(v: Verdict, chart: ChartImmersion) -> FamilyMatch | None:
    n, tol = chart.n, v.tolerances.cluster_tol
    D = v.A_rep + v.lam * v.B_rep
    spaces = _eigenspaces(D, tol)
    if len(spaces) != 2:
        return None
    split = [(d, V, _restricted(v.B_rep, V)) for d, V in spaces]
    k_side = [s for s in split if len(clusters(s[2], tol)) >= 2]
    rest_side = [s for s in split if len(clusters(s[2], tol)) == 1]
    if len(k_side) != 1 or len(rest_side) != 1:
        return None
    d_k, Vk, _ = k_side[0]
    d_r, _, b_rest = rest_side[0]
    diff = d_k - d_r
    if abs(diff) <= tol:
        return None
    case = 6 if diff > 0 else 7
    r = 1.0 / math.sqrt(abs(diff))
    lam_fit = -float(b_rest.mean())
    resid = max(abs(lam_fit**2 + d_k + d_r), abs(lam_fit - v.lam))
    params = {"n": n, "k": Vk.shape[1], "r": r, "lam": lam_fit}
    return FamilyMatch(case, FAMILY_OF_CASE[case], params, resid)


def _fit_cone(v: Verdict, chart: ChartImmersion) -> FamilyMatch | None:
    if chart.ambient.c != 0:
        return None
    n = chart.n
    spaces = _eigenspaces(v.B_rep, v.tolerances.cluster_tol)
    if len(spaces) != 3:
        return None
    a_vals = [float(_restricted(v.A_rep, V).mean()) for _, V in spaces]
    fits = []
    for roles in permutations(range(3)):
        iq, ip, iflat = roles
        q, p = spaces[iq][1].shape[1], spaces[ip][1].shape[1]
        b_flat = spaces[iflat][0]
        if abs(b_flat) < 1e-12:
            continue
        rho = spaces[iq][0] / b_flat
        den = rho * (p + q) - (p + q - n)
        if abs(den) < 1e-14:
            continue
        x = p * (rho - 1.0) / den
        if not x > 1.0:
            continue
        a = math.sqrt(x)
        oracle = ex4_blocks(n, p, q, a)
        for sign in (1.0, -1.0):
            resid = 0.0
            for (m, b_o, a_o), idx in zip(oracle, roles):
                resid = max(resid, abs(sign * spaces[idx][0] - b_o), abs(a_vals[idx] - a_o))
            fits.append((resid, {"n": n, "p": p, "q": q, "a": a}))
    if not fits:
        return None
    # exact ties are genuine coincidences; prefer the largest flat block
    fits.sort(key=lambda t: (t[0] > FIT_TOL, t[1]["p"] + t[1]["q"], t[1]["q"], t[0]))
    resid, params = fits[0]
    equivalent = []
    for r_, p_ in fits[1:]:
        if r_ <= FIT_TOL and p_ != params and p_ not in equivalent:
            equivalent.append(p_)
    return FamilyMatch(5, "ex4", params, resid, equivalent)


def classify(verdict: Verdict, chart: ChartImmersion) -> FamilyMatch:
    """Decision tree on (r_D, r_B); fits invert the closed forms of each family."""
    if not verdict.para_blaschke_isoparametric:
        return FamilyMatch(None, note="not para-Blaschke isoparametric")
    if verdict.r_D == 1:
        return FamilyMatch(1, note="by elimination; no conformal representative is constructed")
    fit = None
    if verdict.r_D == 2 and verdict.r_B == 2:
        fit = _fit_two_blocks(verdict, chart)
    elif verdict.r_D == 2 and verdict.r_B >= 3:
        fit = _fit_warped(verdict, chart)
    elif verdict.r_D == 3:
        fit = _fit_cone(verdict, chart)
    if fit is None:
        return FamilyMatch(None, note=f"no family fits r_D={verdict.r_D}, r_B={verdict.r_B}")
    if fit.residual > FIT_TOL:
        return FamilyMatch(None, residual=fit.residual,
                           note=f"best fit {fit.label} has residual {fit.residual:.3g}")
    return fit


def check_and_classify(chart: ChartImmersion, lambdas, count: int = 20, seed: int = 42,
                       tol: Tolerances | None = None) -> list[Verdict]:
    return [replace(v, family_match=classify(v, chart))
            for v in check_many(chart, lambdas, count, seed, tol)]


def theorem1_crosscheck(chart: ChartImmersion, lambda_grid, count: int = 20, seed: int = 42,
                        tol: Tolerances | None = None) -> dict:
    """More than two distinct D eigenvalues must force constant B eigenvalues.

    Grid points whose r_D falls below the largest r_D seen are flagged as
    accidental collapses (two D eigenvalues coinciding at that lambda).
    """
    verdicts = check_many(chart, lambda_grid, count, seed, tol)
    top = max(v.r_D for v in verdicts)
    rows, holds, applicable = [], True, False
    for v in verdicts:
        if v.r_D > 2:
            applicable = True
            status = "holds" if v.conformal_isoparametric else "violated"
            holds = holds and v.conformal_isoparametric
        else:
            status = "vacuous"
        rows.append({
            "lambda": v.lam, "r_D": v.r_D, "b_spread": v.b_spread, "d_spread": v.d_spread,
            "para_blaschke_isoparametric": v.para_blaschke_isoparametric,
            "conformal_isoparametric": v.conformal_isoparametric,
            "implication": status, "collapse": v.r_D < top,
        })
    return {
        "rows": rows,
        "implication_holds": holds,
        "vacuous": not applicable,
        "collapsed_lambdas": [r["lambda"] for r in rows if r["collapse"]],
    }
