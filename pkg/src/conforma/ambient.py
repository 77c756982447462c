"""Lorentzian space forms and their flat embedding spaces R^N_s."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ChartError

KEYWORDS = {"flat1": 0, "desitter": 1, "antidesitter": -1}
_KEYWORD_OF = {v: k for k, v in KEYWORDS.items()}


@dataclass(frozen=True)
class AmbientForm:
    """M^{n+1}_1(c) for c in {-1, 0, 1}.

    c = 0 is R^{n+1}_1 itself; c = 1 is the de Sitter quadric <x,x>_1 = 1 in
    R^{n+2}_1; c = -1 is the anti-de Sitter quadric <x,x>_2 = -1 in R^{n+2}_2.
    """

    c: int
    n: int

    def __post_init__(self):
        if self.c not in (-1, 0, 1):
            raise ChartError(f"curvature must be -1, 0 or 1, got {self.c}")
        if self.n < 1:
            raise ChartError(f"hypersurface dimension must be positive, got {self.n}")

    @classmethod
    def from_keyword(cls, keyword: str, dim: int) -> "AmbientForm":
        if keyword not in KEYWORDS:
            raise ChartError(f"unknown ambient {keyword!r}; expected one of {sorted(KEYWORDS)}")
        return cls(KEYWORDS[keyword], dim - 1)

    @property
    def keyword(self) -> str:
        return _KEYWORD_OF[self.c]

    @property
    def dim(self) -> int:
        """Dimension of the space form itself (n + 1)."""
        return self.n + 1

    @property
    def embedding_dim(self) -> int:
        return self.n + 1 if self.c == 0 else self.n + 2

    @property
    def signature_index(self) -> int:
        return 2 if self.c == -1 else 1

    @property
    def metric_diag(self) -> np.ndarray:
        return signature_diag(self.embedding_dim, self.signature_index)


def signature_diag(N: int, s: int) -> np.ndarray:
    eta = np.ones(N)
    eta[:s] = -1.0
    return eta


def inner_s(X, Y, s: int) -> np.ndarray:
    """-sum_{i<=s} x_i y_i + sum_{i>s} x_i y_i, broadcasting over leading axes."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape[-1] != Y.shape[-1]:
        raise ValueError(f"length mismatch: {X.shape[-1]} vs {Y.shape[-1]}")
    if not 0 <= s <= X.shape[-1]:
        raise ValueError(f"signature index {s} out of range")
    prod = X * Y
    return prod[..., s:].sum(axis=-1) - prod[..., :s].sum(axis=-1)


def space_form_residual(chart, point) -> float:
    """|<x,x>_s - c| at ``point``; zero by convention for flat ambients."""
    from .dsl import eval_chart_values

    amb = chart.ambient
    if amb.c == 0:
        return 0.0
    x = eval_chart_values(chart, np.asarray(point, dtype=float))
    return float(abs(inner_s(x, x, amb.signature_index) - amb.c))
