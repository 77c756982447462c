"""Isometric layer: induced metric, timelike unit normal, second fundamental form.

The batched helpers work on arrays with a leading point axis; the public
single-point functions wrap them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .dsl import ChartImmersion, eval_chart
from .errors import DegenerateNormal, NotSpacelike

SPACELIKE_TOL = 1e-12
ORIENTATION_TOL = 1e-10
RANK_TOL = 1e-10


@dataclass
class FundamentalForms:
    """Pointwise isometric data (arrays may carry a leading batch axis)."""

    x: np.ndarray           # position, (N,)
    I_coord: np.ndarray     # induced metric in coordinates
    frame: np.ndarray       # columns: I-orthonormal frame in coordinates
    normal: np.ndarray      # timelike unit normal, <e,e>_s = -1
    II_coord: np.ndarray    # second fundamental form in coordinates
    h_onb: np.ndarray       # second fundamental form in the orthonormal frame
    H: np.ndarray
    principal: np.ndarray   # ascending
    christoffel: np.ndarray  # christoffel[k, i, j] = Gamma^k_ij of I
    norm2_II: np.ndarray


# value-level helpers ----------------------------------------------------------

def metric_from_tangents(T: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """I_ij = <x_i, x_j>_s for tangents T of shape (..., N, n)."""
    return np.einsum("...ai,a,...aj->...ij", T, eta, T)


def orthonormal_frame(I: np.ndarray) -> np.ndarray:
    """Gram-Schmidt in coordinate order, written as F = L^{-T} with I = L L^T."""
    L = np.linalg.cholesky(I)
    eye = np.broadcast_to(np.eye(I.shape[-1]), I.shape)
    return np.swapaxes(np.linalg.solve(L, eye), -1, -2)


def orient(e: np.ndarray) -> np.ndarray:
    """Flip each normal so its first component above tolerance is positive."""
    big = np.abs(e) > ORIENTATION_TOL
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(e, first[..., None], axis=-1)[..., 0]
    return e * np.where(lead < 0, -1.0, 1.0)[..., None]


def normal_from_span(T: np.ndarray, x: np.ndarray, eta: np.ndarray, curved: bool):
    """Null vector of the constraints <e, x_i> = 0 (and <e, x> = 0 if curved).

    Returns (normals normalised to <e,e> = -1 and oriented, per-point error or None).
    """
    rows = np.swapaxes(T, -1, -2) * eta
    if curved:
        rows = np.concatenate([rows, (x * eta)[..., None, :]], axis=-2)
    _, s, vh = np.linalg.svd(rows)
    e = vh[..., -1, :]
    norm2 = np.einsum("...a,a,...a->...", e, eta, e)
    errors = []
    for k in range(e.shape[0]):
        if s[k, -1] <= RANK_TOL * s[k, 0]:
            errors.append(DegenerateNormal("normal space is not one-dimensional",
                                           singular_values=s[k]))
        elif norm2[k] >= -RANK_TOL:
            errors.append(DegenerateNormal("normal vector is not timelike",
                                           norm2=float(norm2[k])))
        else:
            errors.append(None)
    scale = np.sqrt(np.abs(np.where(norm2 < 0, -norm2, 1.0)))
    return orient(e / scale[..., None]), errors


def _first_kind(dI: np.ndarray, coef_axis: str = "") -> np.ndarray:
    """d_i g_lj + d_j g_li - d_l g_ij arranged as [..., l, i, j] from dI[..., i, j, l] = d_l g_ij."""
    z = coef_axis
    return (np.einsum(f"...lji{z}->...lij{z}", dI) + dI
            - np.einsum(f"...ijl{z}->...lij{z}", dI))


def christoffel_values(I: np.ndarray, dI: np.ndarray) -> np.ndarray:
    """Gamma^k_ij from metric values and dI[..., i, j, l] = d_l I_ij."""
    return np.einsum("...kl,...lij->...kij", np.linalg.inv(I), 0.5 * _first_kind(dI))


# jet-level helpers ------------------------------------------------------------

def christoffel_jet(g: jets.Jet, g_inv: jets.Jet) -> jets.Jet:
    """Levi-Civita symbols Gamma^k_ij of a metric jet (order drops by one)."""
    dg = g.grad()
    lower = jets.Jet(0.5 * _first_kind(dg.coef, "Z"), dg.m, dg.order)
    return jets.contract("...kl,...lij->...kij", g_inv.truncate(lower.order), lower)


def riemann_values(gamma: jets.Jet, g: np.ndarray) -> np.ndarray:
    """Q[..., i, j, k, l] = g(R(d_i, d_j) d_l, d_k) from a Christoffel jet of order >= 1.

    With this index placement Q[i, j, i, j] is the sectional curvature numerator.
    """
    G = gamma.val
    dG = gamma.grad().val  # dG[..., m, a, b, i] = d_i Gamma^m_ab
    # R^m_{l i j} = d_i Gamma^m_jl - d_j Gamma^m_il + Gamma^m_ip Gamma^p_jl - Gamma^m_jp Gamma^p_il
    R = (np.einsum("...mjli->...mlij", dG) - np.einsum("...milj->...mlij", dG)
         + np.einsum("...mip,...pjl->...mlij", G, G)
         - np.einsum("...mjp,...pil->...mlij", G, G))
    return np.einsum("...km,...mlij->...ijkl", g, R)


# screening ----------------------------------------------------------------------

@dataclass
class Screen:
    """Value-level data for a batch of points plus per-point failures."""

    x: np.ndarray
    T: np.ndarray
    I: np.ndarray
    normal: np.ndarray
    errors: list


def screen(chart: ChartImmersion, X: jets.Jet, orientation=1.0) -> Screen:
    """Check spacelike-ness and the normal at every point of a batch."""
    eta = chart.ambient.metric_diag
    x = X.val
    T = X.d1
    I = metric_from_tangents(T, eta)
    min_eig = np.linalg.eigvalsh(I)[..., 0]
    normal, nerr = normal_from_span(T, x, eta, chart.ambient.c != 0)
    normal = normal * np.asarray(orientation, dtype=float)[..., None]
    errors = []
    for k in range(x.shape[0]):
        if min_eig[k] <= SPACELIKE_TOL:
            errors.append(NotSpacelike("induced metric is not positive definite",
                                       min_eigenvalue=float(min_eig[k])))
        else:
            errors.append(nerr[k])
    return Screen(x, T, I, normal, errors)


def fundamental_values(chart: ChartImmersion, X: jets.Jet, scr: Screen) -> FundamentalForms:
    """Value-level fundamental forms for a batch that passed screening."""
    eta = chart.ambient.metric_diag
    n = chart.n
    II = np.einsum("...aij,a,...a->...ij", X.d2, eta, scr.normal)
    F = orthonormal_frame(scr.I)
    h = np.swapaxes(F, -1, -2) @ II @ F
    H = np.trace(h, axis1=-2, axis2=-1) / n
    dI = (np.einsum("...ail,a,...aj->...ijl", X.d2, eta, scr.T)
          + np.einsum("...ai,a,...ajl->...ijl", scr.T, eta, X.d2))
    return FundamentalForms(
        x=scr.x, I_coord=scr.I, frame=F, normal=scr.normal, II_coord=II, h_onb=h, H=H,
        principal=np.linalg.eigvalsh(h), christoffel=christoffel_values(scr.I, dI),
        norm2_II=np.einsum("...ij,...ij->...", h, h))


# single-point API -----------------------------------------------------------------

def _single(chart, point):
    point = np.asarray(point, dtype=float)
    X = eval_chart(chart, point[None, :])
    return X, screen(chart, X)


def induced_metric(chart: ChartImmersion, point) -> np.ndarray:
    X, _ = _single(chart, point)
    I = metric_from_tangents(X.d1, chart.ambient.metric_diag)[0]
    lo = np.linalg.eigvalsh(I)[0]
    if lo <= SPACELIKE_TOL:
        raise NotSpacelike("induced metric is not positive definite",
                           point=np.asarray(point, dtype=float), min_eigenvalue=float(lo))
    return I


def unit_normal(chart: ChartImmersion, point, orientation: float = 1.0) -> np.ndarray:
    induced_metric(chart, point)
    X, scr = _single(chart, point)
    if scr.errors[0] is not None:
        err = scr.errors[0]
        err.details["point"] = np.asarray(point, dtype=float)
        raise err
    return scr.normal[0] * orientation


def second_form(chart: ChartImmersion, point, normal):
    """(h_onb, H, principal, christoffel) with respect to the given unit normal."""
    X, scr = _single(chart, point)
    scr.normal = np.asarray(normal, dtype=float)[None, :]
    ff = fundamental_values(chart, X, scr)
    return ff.h_onb[0], float(ff.H[0]), ff.principal[0], ff.christoffel[0]


def fundamental_forms(chart: ChartImmersion, point, orientation: float = 1.0) -> FundamentalForms:
    normal = unit_normal(chart, point, orientation)
    X, scr = _single(chart, point)
    scr.normal = normal[None, :]
    ff = fundamental_values(chart, X, scr)
    return FundamentalForms(**{k: (np.asarray(v)[0]) for k, v in ff.__dict__.items()})
