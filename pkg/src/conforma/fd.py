"""Finite-difference cross-check of jet derivatives."""

from __future__ import annotations

from collections import Counter
from itertools import combinations_with_replacement, product
from typing import Mapping, Sequence

import numpy as np

from . import jets
from .dsl import Node, eval_jet, eval_scalar

FD_STEP = 1e-2

# central stencils (offsets in units of h, weights, power of h in the denominator)
_STENCILS = {
    0: ((0,), (1.0,)),
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def _stencil(multi_index: Sequence[int], m: int):
    """Offsets (k, m) and weights (k,) of the tensor-product stencil for one partial."""
    counts = Counter(multi_index)
    per_axis = [_STENCILS[counts.get(i, 0)] for i in range(m)]
    offsets, weights = [], []
    for choice in product(*(range(len(s[0])) for s in per_axis)):
        off = [per_axis[i][0][c] for i, c in enumerate(choice)]
        w = np.prod([per_axis[i][1][c] for i, c in enumerate(choice)])
        offsets.append(off)
        weights.append(w)
    return np.array(offsets, dtype=float), np.array(weights)


def central_partials(f, point, order: int, h: float = FD_STEP, richardson: bool = True):
    """Central-difference estimates of every order-``order`` partial of ``f`` at ``point``.

    ``f`` maps an array of points (k, m) to values (k,); it receives long-double
    points and should keep that precision.  Returns a dict from sorted
    multi-index to estimate.
    """
    point = np.asarray(point, dtype=np.longdouble)
    m = point.size
    indices = list(combinations_with_replacement(range(m), order))
    stencils = [_stencil(idx, m) for idx in indices]
    h = np.longdouble(h)
    steps = (h, h / 2) if richardson else (h,)
    # every stencil point for both step sizes in one call, in extended precision
    blocks = [point + off.astype(np.longdouble) * step for step in steps for off, _ in stencils]
    sizes = [len(b) for b in blocks]
    values = np.asarray(f(np.concatenate(blocks)), dtype=np.longdouble)
    chunks = np.split(values, np.cumsum(sizes)[:-1])
    out = {}
    for k, idx in enumerate(indices):
        est = []
        for s, step in enumerate(steps):
            w = stencils[k][1].astype(np.longdouble)
            est.append(chunks[s * len(indices) + k] @ w / step**order)
        out[idx] = float((4 * est[1] - est[0]) / 3 if richardson else est[0])
    return out


def fd_check(expr: Node, point, order: int, variables: Sequence[str],
             params: Mapping[str, float] | None = None, h: float = FD_STEP) -> float:
    """max |jet - central difference| / (1 + |central difference|) over order-``order`` partials."""
    if not 1 <= order <= jets.MAX_ORDER:
        raise ValueError(f"order must be in 1..{jets.MAX_ORDER}")
    params = dict(params or {})
    point = np.asarray(point, dtype=float)
    seeds = {v: jets.Jet.seed(point, i) for i, v in enumerate(variables)}
    jet = eval_jet(expr, seeds, params)

    def f(pts):
        env = {v: pts[:, i] for i, v in enumerate(variables)}
        return np.broadcast_to(np.asarray(eval_scalar(expr, env, params), dtype=pts.dtype),
                               pts.shape[:1])

    worst = 0.0
    for idx, approx in central_partials(f, point, order, h).items():
        exact = float(jet.partial(*idx))
        worst = max(worst, abs(exact - approx) / (1.0 + abs(approx)))
    return worst


def fd_check_chart(chart, points, order, h: float = FD_STEP) -> float:
    """fd_check over every component of a chart at many points in one vectorised pass.

    ``order`` may be an int or a sequence of orders; the chart jet and all
    stencil values are then computed once for the lot.
    """
    from .dsl import eval_chart, eval_chart_values

    orders = [order] if isinstance(order, (int, np.integer)) else list(order)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    P, m = points.shape
    X = eval_chart(chart, points)
    plan = [(o, idx, *_stencil(idx, m)) for o in orders
            for idx in combinations_with_replacement(range(m), o)]
    # one evaluation for the union of stencil offsets; offsets are small integers
    rows: dict = {}
    for _, _, off, _ in plan:
        for row in off:
            rows.setdefault(tuple(row), len(rows))
    unique = np.array(list(rows), dtype=np.longdouble)
    # stencil values in extended precision: order-4 differences at h = 1e-2 lose
    # about eight digits to cancellation in double precision
    base = points.astype(np.longdouble)
    values = []
    for step in (np.longdouble(h), np.longdouble(h) / 2):
        shifted = base[:, None, :] + unique[None, :, :] * step
        vals = eval_chart_values(chart, shifted.reshape(-1, m), dtype=np.longdouble)
        values.append(vals.reshape(P, len(unique), -1))
    worst = 0.0
    for o, idx, off, w in plan:
        sel = [rows[tuple(row)] for row in off]
        wl = w.astype(np.longdouble)
        est = [np.einsum("psc,s->pc", v[:, sel], wl) / (step**o)
               for v, step in zip(values, (np.longdouble(h), np.longdouble(h) / 2))]
        approx = ((4 * est[1] - est[0]) / 3).astype(float)
        exact = X.partial(*idx)
        worst = max(worst, float(np.max(np.abs(exact - approx) / (1.0 + np.abs(approx)))))
    return worst
