"""Truncated multivariate Taylor arithmetic (total degree <= 4).

A :class:`Jet` stores Taylor coefficients ``c_alpha`` of
``f(u0 + du) = sum_alpha c_alpha du^alpha`` for every multi-index of total
degree at most four, one coefficient per monomial.  Because a monomial is
keyed by its *sorted* index tuple, the derivative arrays ``d2``, ``d3``,
``d4`` are symmetric by construction; they are expanded on access with the
``alpha!`` multiplicity factors.

Jets carry arbitrary leading array shape, so one object can hold a whole
tensor of jets (and a batch of base points).  ``order`` records the highest
degree that is still exact; differentiation lowers it by one and products
take the minimum of their operands.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np

from .errors import DegenerateEvaluation

MAX_ORDER = 4
MAX_VARS = 8
_COEF = "Z"  # einsum letter reserved for the coefficient axis
_PAIR = "Y"


@functools.lru_cache(maxsize=None)
def _basis(m: int):
    monos = []
    for d in range(MAX_ORDER + 1):
        for combo in itertools.combinations_with_replacement(range(m), d):
            alpha = [0] * m
            for i in combo:
                alpha[i] += 1
            monos.append(tuple(alpha))
    index = {a: k for k, a in enumerate(monos)}
    degree = np.array([sum(a) for a in monos], dtype=int)
    return monos, index, degree


def n_coefficients(m: int) -> int:
    return len(_basis(m)[0])


@functools.lru_cache(maxsize=None)
def _mul_table(m: int, order: int):
    monos, index, degree = _basis(m)
    ia, ib, ic = [], [], []
    for a, alpha in enumerate(monos):
        if degree[a] > order:
            break
        for b, beta in enumerate(monos):
            if degree[a] + degree[b] > order:
                break
            ia.append(a)
            ib.append(b)
            ic.append(index[tuple(x + y for x, y in zip(alpha, beta))])
    scatter = np.zeros((len(ia), len(monos)))
    scatter[np.arange(len(ia)), ic] = 1.0
    return np.array(ia), np.array(ib), scatter


@functools.lru_cache(maxsize=None)
def _diff_matrix(m: int) -> np.ndarray:
    """``D[i, src, dst]``: coefficient map of d/du_i."""
    monos, index, degree = _basis(m)
    K = len(monos)
    D = np.zeros((m, K, K))
    for dst, beta in enumerate(monos):
        if degree[dst] >= MAX_ORDER:
            continue
        for i in range(m):
            up = list(beta)
            up[i] += 1
            D[i, index[tuple(up)], dst] = beta[i] + 1
    return D


@functools.lru_cache(maxsize=None)
def _grad_matrix(m: int) -> np.ndarray:
    """All m derivative maps side by side, so one GEMM yields the gradient."""
    D = _diff_matrix(m)
    return np.ascontiguousarray(D.transpose(1, 0, 2).reshape(D.shape[1], -1))


@functools.lru_cache(maxsize=None)
def _expansion(m: int, d: int):
    """Index/factor arrays expanding degree-d coefficients to a full m^d tensor."""
    _, index, _ = _basis(m)
    idx = np.empty((m,) * d, dtype=int)
    fac = np.empty((m,) * d)
    for tup in itertools.product(range(m), repeat=d):
        alpha = [0] * m
        for i in tup:
            alpha[i] += 1
        idx[tup] = index[tuple(alpha)]
        fac[tup] = math.prod(math.factorial(a) for a in alpha)
    return idx, fac


@functools.lru_cache(maxsize=None)
def _degree_mask(m: int, order: int) -> np.ndarray:
    return _basis(m)[2] <= order


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Jet:
    """Array of order-4 Taylor jets in ``m`` variables."""

    __array_ufunc__ = None
    __slots__ = ("coef", "m", "order")

    def __init__(self, coef, m: int, order: int = MAX_ORDER):
        coef = np.asarray(coef, dtype=float)
        if not 1 <= m <= MAX_VARS:
            raise ValueError(f"jets support 1..{MAX_VARS} variables, got {m}")
        if coef.shape[-1] != n_coefficients(m):
            raise ValueError("coefficient axis does not match variable count")
        if order < MAX_ORDER:
            coef = coef * _degree_mask(m, order)
        self.coef = coef
        self.m = m
        self.order = order

    # construction -------------------------------------------------------
    @classmethod
    def seed(cls, point, index: int) -> "Jet":
        """Jet of the coordinate function ``u_index`` at ``point`` (shape (..., m))."""
        point = _as_array(point)
        m = point.shape[-1]
        if not 0 <= index < m:
            raise IndexError(f"seed index {index} out of range for {m} variables")
        coef = np.zeros(point.shape[:-1] + (n_coefficients(m),))
        coef[..., 0] = point[..., index]
        coef[..., 1 + index] = 1.0
        return cls(coef, m)

    @classmethod
    def constant(cls, value, m: int, order: int = MAX_ORDER) -> "Jet":
        value = _as_array(value)
        coef = np.zeros(value.shape + (n_coefficients(m),))
        coef[..., 0] = value
        return cls(coef, m, order)

    def _like(self, coef, order=None) -> "Jet":
        return Jet(coef, self.m, self.order if order is None else order)

    # array protocol -----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.coef.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coef.ndim - 1

    def __len__(self) -> int:
        return self.shape[0]

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise TypeError("Ellipsis indexing is not supported on jets")
        return self._like(self.coef[key + (slice(None),)])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def reshape(self, *shape) -> "Jet":
        return self._like(self.coef.reshape(tuple(shape) + (self.coef.shape[-1],)))

    def swapaxes(self, a: int, b: int) -> "Jet":
        a %= self.ndim
        b %= self.ndim
        return self._like(np.swapaxes(self.coef, a, b))

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return self._like(self.coef.sum(axis=axis))

    def truncate(self, order: int) -> "Jet":
        return self._like(self.coef, min(order, self.order))

    # derivative views ---------------------------------------------------
    @property
    def val(self) -> np.ndarray:
        return self.coef[..., 0]

    def _dtensor(self, d: int) -> np.ndarray:
        idx, fac = _expansion(self.m, d)
        return self.coef[..., idx] * fac

    @property
    def d1(self) -> np.ndarray:
        return self.coef[..., 1:1 + self.m]

    @property
    def d2(self) -> np.ndarray:
        return self._dtensor(2)

    @property
    def d3(self) -> np.ndarray:
        return self._dtensor(3)

    @property
    def d4(self) -> np.ndarray:
        return self._dtensor(4)

    def partial(self, *idx: int) -> np.ndarray:
        """Partial derivative d^|idx| f / du_idx[0] ... du_idx[-1]."""
        alpha = [0] * self.m
        for i in idx:
            alpha[i] += 1
        k = _basis(self.m)[1][tuple(alpha)]
        return self.coef[..., k] * math.prod(math.factorial(a) for a in alpha)

    def diff(self, i: int) -> "Jet":
        D = _diff_matrix(self.m)[i]
        return self._like(self.coef @ D, max(self.order - 1, 0))

    def grad(self) -> "Jet":
        """Gradient as a jet with a trailing axis of length m (order drops by one)."""
        K = self.coef.shape[-1]
        coef = (self.coef @ _grad_matrix(self.m)).reshape(self.coef.shape[:-1] + (self.m, K))
        return self._like(coef, max(self.order - 1, 0))

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.m != self.m:
                raise ValueError("jets over different variable counts")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is not None:
            return self._like(self.coef + o.coef, min(self.order, o.order))
        coef = self.coef.copy() if np.ndim(other) == 0 else np.broadcast_to(
            self.coef, np.broadcast_shapes(self.shape, np.shape(other)) + self.coef.shape[-1:]).copy()
        coef[..., 0] += other
        return self._like(coef)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coef)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return self._like(self.coef * _as_array(other)[..., None])
        order = min(self.order, o.order)
        ia, ib, scatter = _mul_table(self.m, order)
        return self._like((self.coef[..., ia] * o.coef[..., ib]) @ scatter, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            other = _as_array(other)
            if np.any(other == 0):
                raise DegenerateEvaluation("division by zero constant", function="div")
            return self._like(self.coef / other[..., None])
        return self * reciprocal(o)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            return int_power(self, int(exponent))
        return pow_const(self, float(exponent))

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, m={self.m}, order={self.order})"


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    first = jets[0]
    order = min(j.order for j in jets)
    if axis < 0:
        axis += first.ndim + 1
    return Jet(np.stack([j.coef for j in jets], axis=axis), first.m, order)


def broadcast_to(jet: Jet, shape: tuple) -> Jet:
    coef = np.broadcast_to(jet.coef, tuple(shape) + jet.coef.shape[-1:]).copy()
    return Jet(coef, jet.m, jet.order)


# unary composition -------------------------------------------------------

def _taylor_compose(a: Jet, derivs: list[np.ndarray]) -> Jet:
    """f(a) given f^(k)(a.val) for k = 0..a.order."""
    delta = a.coef.copy()
    delta[..., 0] = 0.0
    delta = a._like(delta)
    out = np.zeros_like(a.coef)
    out[..., 0] = derivs[0]
    power = None
    for k in range(1, a.order + 1):
        power = delta if power is None else power * delta
        out = out + power.coef * (derivs[k] / math.factorial(k))[..., None]
    return a._like(out)


def _check_domain(name: str, ok: np.ndarray, value: np.ndarray) -> None:
    if not np.all(ok):
        bad = np.asarray(value)[~np.asarray(ok)].ravel()
        raise DegenerateEvaluation(f"{name} outside its domain at value {bad[0]!r}",
                                   function=name, value=float(bad[0]))


def exp(a: Jet) -> Jet:
    e = np.exp(a.val)
    return _taylor_compose(a, [e] * (MAX_ORDER + 1))


def log(a: Jet) -> Jet:
    x = a.val
    _check_domain("log", x > 0, x)
    return _taylor_compose(a, [np.log(x), 1 / x, -1 / x**2, 2 / x**3, -6 / x**4])


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.val), np.cos(a.val)
    return _taylor_compose(a, [s, c, -s, -c, s])


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.val), np.cos(a.val)
    return _taylor_compose(a, [c, -s, -c, s, c])


def sinh(a: Jet) -> Jet:
    s, c = np.sinh(a.val), np.cosh(a.val)
    return _taylor_compose(a, [s, c, s, c, s])


def cosh(a: Jet) -> Jet:
    s, c = np.sinh(a.val), np.cosh(a.val)
    return _taylor_compose(a, [c, s, c, s, c])


def pow_const(a: Jet, p: float) -> Jet:
    """a**p for real p; needs a.val > 0 unless p is an integer."""
    x = a.val
    if float(p).is_integer():
        return int_power(a, int(p))
    _check_domain(f"pow({p})", x > 0, x)
    derivs = []
    coeff = 1.0
    for k in range(MAX_ORDER + 1):
        derivs.append(coeff * x ** (p - k))
        coeff *= p - k
    return _taylor_compose(a, derivs)


def sqrt(a: Jet) -> Jet:
    x = a.val
    _check_domain("sqrt", x > 0, x)
    return pow_const(a, 0.5)


def reciprocal(a: Jet) -> Jet:
    x = a.val
    if np.any(x == 0) or not np.all(np.isfinite(x)):
        raise DegenerateEvaluation("division by a jet with zero value", function="div",
                                   value=0.0)
    inv = 1.0 / x
    return _taylor_compose(a, [inv, -inv**2, 2 * inv**3, -6 * inv**4, 24 * inv**5])


def int_power(a: Jet, k: int) -> Jet:
    if k < 0:
        return reciprocal(int_power(a, -k))
    result = None
    base = a
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    if result is None:
        return a._like(np.zeros_like(a.coef)) + 1.0
    return result


UNARY = {
    "sin": sin,
    "cos": cos,
    "sinh": sinh,
    "cosh": cosh,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
}


def compose_unary(f: str, a: Jet, exponent: float | None = None) -> Jet:
    if f == "neg":
        return -a
    if f == "pow_const":
        return pow_const(a, exponent)
    return UNARY[f](a)


# tensor contractions ------------------------------------------------------

def contract(subscripts: str, *operands) -> Jet | np.ndarray:
    """``np.einsum`` over leading axes where at most two operands are jets.

    Plain arrays are treated as constants.  Use ``...`` for shared batch axes.
    """
    inputs, output = subscripts.replace(" ", "").split("->")
    specs = inputs.split(",")
    if len(specs) != len(operands):
        raise ValueError("subscript/operand count mismatch")
    jet_pos = [k for k, op in enumerate(operands) if isinstance(op, Jet)]
    if not jet_pos:
        return np.einsum(subscripts, *operands)
    if len(jet_pos) > 2:
        raise ValueError("contract handles at most two jet operands")
    m = operands[jet_pos[0]].m
    arrays = []
    new_specs = []
    if len(jet_pos) == 1:
        j = operands[jet_pos[0]]
        for k, (spec, op) in enumerate(zip(specs, operands)):
            if k == jet_pos[0]:
                arrays.append(op.coef)
                new_specs.append(spec + _COEF)
            else:
                arrays.append(op)
                new_specs.append(spec)
        coef = np.einsum(",".join(new_specs) + "->" + output + _COEF, *arrays)
        return Jet(coef, m, j.order)
    a, b = (operands[k] for k in jet_pos)
    order = min(a.order, b.order)
    ia, ib, scatter = _mul_table(m, order)
    for k, (spec, op) in enumerate(zip(specs, operands)):
        if k == jet_pos[0]:
            arrays.append(op.coef[..., ia])
            new_specs.append(spec + _PAIR)
        elif k == jet_pos[1]:
            arrays.append(op.coef[..., ib])
            new_specs.append(spec + _PAIR)
        else:
            arrays.append(op)
            new_specs.append(spec)
    pairs = np.einsum(",".join(new_specs) + "->" + output + _PAIR, *arrays,
                      optimize=len(operands) > 2)
    return Jet(pairs @ scatter, m, order)


def inv(a: Jet) -> Jet:
    """Inverse of a jet matrix over its last two axes (exact Neumann series)."""
    g0inv = np.linalg.inv(a.val)
    delta = a.coef.copy()
    delta[..., 0] = 0.0
    step = -contract("...ik,...kj->...ij", g0inv, a._like(delta))
    acc = step
    power = step
    for _ in range(2, a.order + 1):
        power = contract("...ik,...kj->...ij", power, step)
        acc = acc + power
    acc = acc + np.broadcast_to(np.eye(a.shape[-1]), a.shape)
    return contract("...ik,...kj->...ij", acc, g0inv)
