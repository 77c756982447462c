"""Conformal invariants of spacelike hypersurfaces: tau, A, B, C, D and kappa.

Everything is evaluated for a batch of chart points at once.  Points where the
chart cannot be evaluated, is not spacelike, has no timelike normal or is
umbilic are reported per point and dropped from the batch.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import jets
from .dsl import ChartImmersion, eval_chart
from .errors import (ChartError, ConformaError, DegenerateEvaluation, UmbilicPoint)
from .shape import (FundamentalForms, Screen, christoffel_jet, christoffel_values,
                    fundamental_values, orthonormal_frame, riemann_values, screen)
from .ambient import inner_s

UMBILIC_TOL = 1e-12
SPACE_FORM_TOL = 1e-9
FD_LAYER_STEP = 1e-4
CHUNK = 8

IDENTITY_NAMES = ("trace_B", "norm_B", "trace_A", "gauss", "ricci", "codazzi",
                  "codazzi_trace", "stru3", "stru1", "codazzi_fd")


@dataclass
class ConformalData:
    """Conformal invariants at one or many points (leading axis = point when batched).

    Tensors are components in the g-orthonormal frame E_i = e^{-tau} e_i where
    e_i is the Gram-Schmidt frame of the induced metric.
    """

    points: np.ndarray
    tau: np.ndarray
    grad_tau: np.ndarray
    hess_tau: np.ndarray
    H: np.ndarray
    h: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    kappa: np.ndarray
    lam: float = 0.0
    frame: np.ndarray | None = None
    normal: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.A.shape[-1]

    @property
    def e2tau(self) -> np.ndarray:
        return np.exp(2.0 * self.tau)

    @property
    def D(self) -> np.ndarray:
        return self.A + self.lam * self.B

    @property
    def eig_A(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.A)

    @property
    def eig_B(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.B)

    @property
    def eig_D(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.D)

    def with_lambda(self, lam: float) -> "ConformalData":
        return replace(self, lam=float(lam))

    def flipped(self) -> "ConformalData":
        """Same data for the opposite unit normal: B and C change sign, A does not."""
        return replace(self, B=-self.B, C=-self.C, h=-self.h, H=-self.H,
                       normal=None if self.normal is None else -self.normal)

    def take(self, idx) -> "ConformalData":
        def pick(v):
            return v[idx] if isinstance(v, np.ndarray) and v.ndim > 0 else v
        out = {k: pick(v) for k, v in self.__dict__.items() if k != "residuals"}
        out["residuals"] = {k: pick(v) for k, v in self.residuals.items()}
        return ConformalData(**out)


@dataclass
class Batch:
    """Result of evaluating a chart at many points."""

    data: ConformalData | None  # valid points only
    valid: np.ndarray           # indices into the requested points
    errors: list                # per requested point: ConformaError or None

    @property
    def dropped(self) -> int:
        return sum(e is not None for e in self.errors)


# helpers -------------------------------------------------------------------

def thread_count() -> int:
    """Worker cap from CONFORMA_THREADS (default 1)."""
    raw = os.environ.get("CONFORMA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _trace(j: jets.Jet) -> jets.Jet:
    return jets.Jet(np.einsum("...iiZ->...Z", j.coef), j.m, j.order)


_ONB = {
    1: "...i,...ia->...a",
    2: "...ij,...ia,...jb->...ab",
    3: "...ijk,...ia,...jb,...kc->...abc",
    4: "...ijkl,...ia,...jb,...kc,...ld->...abcd",
}


def _to_onb(T: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Components of a covariant tensor in the frame whose columns are F."""
    rank = T.ndim - F.ndim + 2
    return np.einsum(_ONB[rank], T, *([F] * rank), optimize=rank > 2)


def _evaluate(chart: ChartImmersion, points: np.ndarray):
    """Chart jets for every point that evaluates; errors for the rest."""
    errors = [None] * len(points)
    try:
        return eval_chart(chart, points), errors
    except DegenerateEvaluation:
        pass
    good = []
    for k, pt in enumerate(points):
        try:
            eval_chart(chart, pt[None, :])
            good.append(k)
        except DegenerateEvaluation as err:
            errors[k] = err
    if not good:
        return None, errors
    X = eval_chart(chart, points[good])
    full = np.zeros((len(points),) + X.coef.shape[1:])
    full[good] = X.coef
    return jets.Jet(full, X.m), errors


def _screen(chart, points, orientation, reference_normal):
    X, errors = _evaluate(chart, points)
    if X is None:
        return None, None, errors
    ok = np.array([e is None for e in errors])
    scr = screen(chart, X, orientation)
    if reference_normal is not None:
        eta = chart.ambient.metric_diag
        align = np.einsum("...a,a,...a->...", scr.normal, eta, reference_normal)
        scr.normal = scr.normal * np.where(align > 0, -1.0, 1.0)[..., None]
    amb = chart.ambient
    for k in range(len(points)):
        if not ok[k]:
            continue
        if scr.errors[k] is not None:
            errors[k] = scr.errors[k]
        elif amb.c != 0:
            resid = abs(inner_s(scr.x[k], scr.x[k], amb.signature_index) - amb.c)
            if resid > SPACE_FORM_TOL:
                errors[k] = ChartError("point is off the ambient space form",
                                       residual=float(resid))
    return X, scr, errors


# core pipeline -------------------------------------------------------------

def _core(chart: ChartImmersion, X: jets.Jet, normal: np.ndarray, full: bool) -> dict:
    """Jet pipeline on points that passed screening; returns arrays keyed by name."""
    amb = chart.ambient
    eta = amb.metric_diag
    n = chart.n
    c = float(amb.c)

    dX = X.grad()
    T = dX.truncate(2)
    X2 = dX.grad()
    I = jets.contract("...ai,a,...aj->...ij", T, eta, T)

    # normal as a jet: project the point's normal off the tangent (+ position) span
    span = T.coef
    if amb.c != 0:
        span = np.concatenate([span, X.truncate(2).coef[..., None, :]], axis=-2)
    V = jets.Jet(span, X.m, 2)
    G = jets.contract("...ar,a,...as->...rs", V, eta, V)
    w = jets.contract("...rs,...s->...r", jets.inv(G),
                      jets.contract("...ar,a,...a->...r", V, eta, normal))
    E = -jets.contract("...ar,...r->...a", V, w) + normal
    E = E / jets.sqrt(-jets.contract("...a,a,...a->...", E, eta, E))[:, None]

    II = jets.contract("...aij,a,...a->...ij", X2, eta, E)
    I_inv = jets.inv(I)
    S = jets.contract("...ik,...kj->...ij", I_inv, II)
    trS = _trace(S)
    H = trS / n
    e2tau = (jets.contract("...ij,...ji->...", S, S) - trS * trS / n) * (n / (n - 1))
    tau = 0.5 * jets.log(e2tau)

    Iv = I.val
    F = orthonormal_frame(Iv)
    Ft = np.swapaxes(F, -1, -2)
    gamma_I = christoffel_values(Iv, I.grad().val)
    dtau = tau.d1
    hess = tau.d2 - np.einsum("...kij,...k->...ij", gamma_I, dtau)

    Hv = H.val
    h = Ft @ II.val @ F
    tau_i = np.einsum("...ia,...i->...a", F, dtau)
    H_i = np.einsum("...ia,...i->...a", F, H.d1)
    hess_onb = Ft @ hess @ F
    eye = np.eye(n)
    tv = tau.val
    em2 = np.exp(-2.0 * tv)
    grad2 = np.einsum("...a,...a->...", tau_i, tau_i)
    A = em2[:, None, None] * (
        np.einsum("...a,...b->...ab", tau_i, tau_i) - hess_onb - h * Hv[:, None, None]
        + 0.5 * (-grad2 + Hv**2 + c)[:, None, None] * eye)
    B = np.exp(-tv)[:, None, None] * (h - Hv[:, None, None] * eye)
    C = em2[:, None] * (Hv[:, None] * tau_i - H_i - np.einsum("...ab,...b->...a", h, tau_i))

    out = dict(tau=tv, grad_tau=tau_i, hess_tau=hess_onb, H=Hv, h=h, A=A, B=B, C=C,
               frame=F, I=Iv)

    # curvature of g = e^{2 tau} I
    e2 = e2tau[:, None, None]
    g = I * e2
    g_inv = I_inv / e2
    gamma_g = christoffel_jet(g, g_inv)
    Fg = F * np.exp(-tv)[:, None, None]
    Q = _to_onb(riemann_values(gamma_g, g.val), Fg)
    ricci = np.einsum("...abad->...bd", Q)
    out["kappa"] = np.einsum("...bb->...", ricci) / (n * (n - 1))
    out["A_coord"] = np.exp(2 * tv)[:, None, None] * np.linalg.solve(
        Ft, np.swapaxes(np.linalg.solve(Ft, A), -1, -2))
    B_coord = jets.exp(tau)[:, None, None] * (II - I * H[:, None, None])
    out["B_coord"] = B_coord.val
    out["gamma_g"] = gamma_g.val
    if not full:
        return out

    trA = np.trace(A, axis1=-2, axis2=-1)
    B2 = B @ B
    res = {}
    res["trace_B"] = np.abs(np.trace(B, axis1=-2, axis2=-1))
    res["norm_B"] = np.abs(np.einsum("...ij,...ij->...", B, B) - (n - 1) / n)
    res["trace_A"] = np.abs(trA - (n * n * out["kappa"] - 1) / (2 * n))
    predicted = (np.einsum("...il,...jk->...ijkl", B, B) - np.einsum("...ik,...jl->...ijkl", B, B)
                 + np.einsum("...ik,jl->...ijkl", A, eye) + np.einsum("...jl,ik->...ijkl", A, eye)
                 - np.einsum("...il,jk->...ijkl", A, eye) - np.einsum("...jk,il->...ijkl", A, eye))
    res["gauss"] = np.abs(Q - predicted).max(axis=(-4, -3, -2, -1))
    ric_pred = trA[:, None, None] * eye + (n - 2) * A + B2
    res["ricci"] = np.abs(ricci - ric_pred).max(axis=(-2, -1))

    # Codazzi for B with covariant derivatives of g
    Gg = out["gamma_g"]
    Bc = B_coord.val
    dB = B_coord.grad().val  # [i, j, k] = d_k B_ij
    nabla_B = (dB - np.einsum("...lki,...lj->...ijk", Gg, Bc)
               - np.einsum("...lkj,...il->...ijk", Gg, Bc))
    nB = _to_onb(nabla_B, Fg)
    cod = (nB - np.swapaxes(nB, -1, -2) - np.einsum("ab,...c->...abc", eye, C)
           + np.einsum("ac,...b->...abc", eye, C))
    res["codazzi"] = np.abs(cod).max(axis=(-3, -2, -1))
    res["codazzi_trace"] = np.abs((1 - n) * C - np.einsum("...abb->...a", nB)).max(axis=-1)

    # C_{i,j} - C_{j,i} = (BA - AB)_ij
    dtau_j = tau.grad()
    dH_j = H.grad()
    inner = jets.contract("...kl,...l->...k", I_inv.truncate(1), dtau_j)
    C_coord = jets.exp(-tau)[:, None] * (
        dtau_j * H[:, None] - dH_j - jets.contract("...ik,...k->...i", II.truncate(1), inner))
    dC = C_coord.grad().val  # [i, j] = d_j C_i
    nabla_C = dC - np.einsum("...lji,...l->...ij", Gg, C_coord.val)
    nC = _to_onb(nabla_C, Fg)
    res["stru3"] = np.abs(nC - np.swapaxes(nC, -1, -2) - (B @ A - A @ B)).max(axis=(-2, -1))
    out["residuals"] = res
    return out


def _finite_difference_layer(chart, points, out, orientation):
    """stru1 and a finite-difference Codazzi residual from A, B at shifted points."""
    n = chart.n
    P = len(points)
    h = FD_LAYER_STEP
    # +h, -h, +h/2, -h/2 along every coordinate direction
    signs = np.array([1.0, -1.0, 0.5, -0.5])
    offsets = (signs[:, None, None] * np.eye(n) * h).reshape(-1, n)
    shifted = (points[:, None, :] + offsets).reshape(-1, n)
    ref = np.repeat(out["normal"], len(offsets), axis=0)
    batch = _run(chart, shifted, orientation, full=False, reference_normal=ref)
    ok = np.zeros(len(shifted), dtype=bool)
    ok[batch.valid] = True
    ok = ok.reshape(P, len(offsets)).all(axis=1)
    if batch.data is None:
        return np.full(P, np.nan), np.full(P, np.nan)

    def derivative(key):
        vals = np.full((len(shifted), n, n), np.nan)
        vals[batch.valid] = batch.data.residuals[key]
        vals = vals.reshape(P, 4, n, n, n)
        coarse = (vals[:, 0] - vals[:, 1]) / (2 * h)
        fine = (vals[:, 2] - vals[:, 3]) / h
        # Richardson step, then d[p, i, j, k] = d_k T_ij
        return np.moveaxis((4 * fine - coarse) / 3, 1, -1)

    dA = derivative("A_coord")
    dB = derivative("B_coord")
    Gg = out["gamma_g"]
    Fg = out["frame"] * np.exp(-out["tau"])[:, None, None]
    eye = np.eye(n)
    A, B, C = out["A"], out["B"], out["C"]

    def nabla(d, T):
        return _to_onb(d - np.einsum("...lki,...lj->...ijk", Gg, T)
                       - np.einsum("...lkj,...il->...ijk", Gg, T), Fg)

    nA = nabla(dA, out["A_coord"])
    stru1 = (nA - np.swapaxes(nA, -1, -2) - np.einsum("...ab,...c->...abc", B, C)
             + np.einsum("...ac,...b->...abc", B, C))
    nB = nabla(dB, out["B_coord"])
    cod = (nB - np.swapaxes(nB, -1, -2) - np.einsum("ab,...c->...abc", eye, C)
           + np.einsum("ac,...b->...abc", eye, C))
    r1 = np.where(ok, np.abs(stru1).max(axis=(-3, -2, -1)), np.nan)
    r2 = np.where(ok, np.abs(cod).max(axis=(-3, -2, -1)), np.nan)
    return r1, r2


def _run(chart, points, orientation=1.0, full=True, reference_normal=None,
         fd_layer=True) -> Batch:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    X, scr, errors = _screen(chart, points, orientation, reference_normal)
    if X is None:
        return Batch(None, np.array([], dtype=int), errors)
    n = chart.n
    eta = chart.ambient.metric_diag
    # umbilic screening on values
    cand = [k for k, e in enumerate(errors) if e is None]
    if cand:
        sub = Screen(scr.x[cand], scr.T[cand], scr.I[cand], scr.normal[cand], [])
        ff = fundamental_values(chart, X[cand], sub)
        e2 = n / (n - 1) * (ff.norm2_II - n * ff.H**2)
        for k, val in zip(cand, e2):
            if not val > UMBILIC_TOL:
                errors[k] = UmbilicPoint("hypersurface is umbilic here", e2tau=float(val))
    valid = np.array([k for k, e in enumerate(errors) if e is None], dtype=int)
    for k, e in enumerate(errors):
        if e is not None and "point" not in e.details:
            e.details["point"] = points[k]
    if len(valid) == 0:
        return Batch(None, valid, errors)

    # fixed chunking keeps results independent of the worker count
    chunks = [valid[start:start + CHUNK] for start in range(0, len(valid), CHUNK)]

    def work(idx):
        return _core(chart, X[idx], scr.normal[idx], full)

    workers = thread_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(idx) for idx in chunks]
    keys = parts[0].keys()
    out = {}
    for key in keys:
        if key == "residuals":
            out[key] = {r: np.concatenate([p[key][r] for p in parts]) for r in parts[0][key]}
        else:
            out[key] = np.concatenate([p[key] for p in parts])
    out["normal"] = scr.normal[valid]
    if full and fd_layer:
        r1, r2 = _finite_difference_layer(chart, points[valid], out, orientation)
        out["residuals"]["stru1"] = r1
        out["residuals"]["codazzi_fd"] = r2
    if full:
        residuals = out["residuals"]
    else:
        residuals = {"A_coord": out["A_coord"], "B_coord": out["B_coord"]}
    data = ConformalData(
        points=points[valid], tau=out["tau"], grad_tau=out["grad_tau"],
        hess_tau=out["hess_tau"], H=out["H"], h=out["h"], A=out["A"], B=out["B"],
        C=out["C"], kappa=out["kappa"], frame=out["frame"], normal=out["normal"],
        residuals=residuals)
    return Batch(data, valid, errors)


# public API ----------------------------------------------------------------

def analyze(chart: ChartImmersion, points, lam: float = 0.0, orientation: float = 1.0,
            identities: bool = True, fd_layer: bool = True) -> Batch:
    """Invariants (and identity residuals if requested) at many points.

    ``fd_layer=False`` keeps the analytic residuals but skips stru1 and
    codazzi_fd, which need 4n extra evaluations per point.
    """
    batch = _run(chart, points, orientation, full=identities, fd_layer=fd_layer)
    if batch.data is not None:
        batch.data.lam = float(lam)
    return batch


def invariants_at(chart: ChartImmersion, point, lam: float = 0.0,
                  orientation: float = 1.0, identities: bool = False) -> ConformalData:
    batch = analyze(chart, np.asarray(point, dtype=float)[None, :], lam, orientation, identities)
    if batch.errors[0] is not None:
        raise batch.errors[0]
    return batch.data.take(0)


def conformal_factor(ff: FundamentalForms, n: int) -> float:
    """e^{2 tau} = n/(n-1) (|II|^2 - n H^2); raises UmbilicPoint when not positive."""
    e2 = n / (n - 1) * (float(ff.norm2_II) - n * float(ff.H) ** 2)
    if not e2 > UMBILIC_TOL:
        raise UmbilicPoint("hypersurface is umbilic here", e2tau=e2)
    return e2


def tau_derivatives(chart: ChartImmersion, point, orientation: float = 1.0):
    """(tau, grad_tau, hess_tau) in the induced-metric orthonormal frame."""
    d = invariants_at(chart, point, orientation=orientation)
    return float(d.tau), d.grad_tau, d.hess_tau


def identity_suite(chart: ChartImmersion, point, orientation: float = 1.0) -> dict:
    """Residuals of the normalisation, Gauss, Ricci, Codazzi and stru identities."""
    d = invariants_at(chart, point, orientation=orientation, identities=True)
    return {k: float(v) for k, v in d.residuals.items()}


# invariance probe ----------------------------------------------------------

def transform_chart(chart: ChartImmersion, matrix, offset=None, name=None) -> ChartImmersion:
    """Chart of x -> matrix @ x + offset (flat ambient only)."""
    from .dsl import Binary, Const, const

    if chart.ambient.c != 0:
        raise ChartError("conformal transforms are only implemented for flat ambients")
    M = np.asarray(matrix, dtype=float)
    b = np.zeros(chart.N) if offset is None else np.asarray(offset, dtype=float)
    comps = []
    for i in range(chart.N):
        expr = None
        for j in range(chart.N):
            if M[i, j] == 0.0:
                continue
            term = Binary("*", const(M[i, j]), chart.components[j])
            expr = term if expr is None else Binary("+", expr, term)
        if b[i] != 0.0 or expr is None:
            expr = const(b[i]) if expr is None else Binary("+", expr, const(b[i]))
        comps.append(expr)
    return chart.with_components(comps, name or f"{chart.name}_moved")


def dilation(N: int, rho: float) -> np.ndarray:
    return rho * np.eye(N)


def boost(N: int, angle: float, plane=(0, 1)) -> np.ndarray:
    """Lorentz boost mixing the timelike axis plane[0] with a spacelike axis plane[1]."""
    i, j = plane
    M = np.eye(N)
    ch, sh = np.cosh(angle), np.sinh(angle)
    M[i, i] = M[j, j] = ch
    M[i, j] = M[j, i] = sh
    return M


def rotation(N: int, angle: float, plane=(1, 2)) -> np.ndarray:
    i, j = plane
    M = np.eye(N)
    co, si = np.cos(angle), np.sin(angle)
    M[i, i] = M[j, j] = co
    M[i, j], M[j, i] = -si, si
    return M


def invariance_probe(chart: ChartImmersion, matrix, offset=None, lam: float = 0.0,
                     points=None) -> float:
    """Max drift of sorted eig_A, eig_B (up to sign) and eig_D under x -> M x + b."""
    if points is None:
        from .isoparametric import sample_points
        points = sample_points(chart, 8, seed=7)
    moved = transform_chart(chart, matrix, offset)
    before = analyze(chart, points, lam, identities=False)
    after = analyze(moved, points, lam, identities=False)
    common = np.intersect1d(before.valid, after.valid)
    if len(common) == 0:
        raise ConformaError("no point survives on both charts")
    d0 = before.data.take(np.searchsorted(before.valid, common))
    d1 = after.data.take(np.searchsorted(after.valid, common))
    drift = np.abs(d0.eig_A - d1.eig_A).max()
    straight = np.abs(d0.eig_B - d1.eig_B).max(axis=-1)
    crossed = np.abs(d0.eig_B + d1.eig_B[..., ::-1]).max(axis=-1)
    drift = max(drift, np.minimum(straight, crossed).max())
    same = np.abs(d0.eig_D - d1.eig_D).max(axis=-1)
    other = np.abs(d0.eig_D - np.linalg.eigvalsh(d1.A - lam * d1.B)).max(axis=-1)
    drift = max(drift, np.minimum(same, other).max())
    return float(drift)
