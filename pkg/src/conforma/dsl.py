"""Chart definition language: lexer, recursive-descent parser, printer, evaluators.

A chart file looks like::

    chart ex1_n3_k1
    ambient flat1 dim 4
    vars u1 in [-1.0, 1.0], u2 in [-1.0, 1.0], u3 in [-1.0, 1.0]
    params a = 1.5
    x1 = a*cosh(u1)
    x2 = a*sinh(u1)
    x3 = u2
    x4 = u3

Expressions use ``+ - * / ^`` with precedence ``^`` > unary minus > ``* /`` >
``+ -``; ``^`` takes an integer literal exponent.  ``#`` starts a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

import numpy as np

from . import jets
from .ambient import AmbientForm
from .errors import (ArityError, ChartError, DegenerateEvaluation, DSLSyntaxError,
                     UnboundName)

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "exp", "log", "sqrt")
KEYWORDS = ("chart", "ambient", "dim", "vars", "in", "params")
_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")


# AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    fn: str  # one of FUNCTIONS or "neg"
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Power:
    child: "Node"
    exponent: int


Node = Union[Const, Var, Param, Unary, Binary, Power]


def const(value: float) -> Node:
    """Constant node; negative values become ``neg(Const)`` so they print and reparse."""
    value = float(value)
    if value < 0 or (value == 0 and math.copysign(1.0, value) < 0):
        return Unary("neg", Const(-value))
    return Const(value)


def names_in(node: Node) -> tuple[set, set]:
    """(variable names, parameter names) referenced by ``node``."""
    vs, ps = set(), set()
    stack = [node]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            vs.add(cur.name)
        elif isinstance(cur, Param):
            ps.add(cur.name)
        elif isinstance(cur, Unary):
            stack.append(cur.child)
        elif isinstance(cur, Power):
            stack.append(cur.child)
        elif isinstance(cur, Binary):
            stack.extend((cur.left, cur.right))
    return vs, ps


# lexer ------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),=\[\]])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # num, name, op, end
    text: str
    line: int
    col: int


def tokenize(text: str, line: int = 1) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError(line, pos + 1, "a token", text[pos])
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos + 1))
        pos = m.end()
    tokens.append(Token("end", "", line, len(text) + 1))
    return tokens


# parser -----------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[Token], variables, parameters):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables
        self.parameters = parameters

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def fail(self, expected: str):
        tok = self.tok
        raise DSLSyntaxError(tok.line, tok.col, expected, tok.text or "end of line")

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            self.fail(repr(text))
        return tok

    def expect_name(self) -> Token:
        tok = self.tok
        if tok.kind != "name":
            self.fail("a name")
        self.pos += 1
        return tok

    def signed_number(self) -> float:
        neg = self.accept("-")
        if not neg:
            self.accept("+")
        tok = self.tok
        if tok.kind != "num":
            self.fail("a number")
        self.pos += 1
        value = float(tok.text)
        return -value if neg else value

    def end(self):
        if self.tok.kind != "end":
            self.fail("end of line")

    # expression grammar
    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-"):
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.accept("^"):
            neg = self.accept("-")
            tok = self.tok
            if tok.kind != "num" or not tok.text.isdigit():
                self.fail("an integer exponent")
            self.pos += 1
            node = Power(node, -int(tok.text) if neg else int(tok.text))
        return node

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Const(float(tok.text))
        if tok.kind == "name":
            self.pos += 1
            if self.accept("("):
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if tok.text not in FUNCTIONS:
                    raise UnboundName(tok.text, tok.line, tok.col)
                if len(args) != 1:
                    raise ArityError(tok.text, len(args))
                return Unary(tok.text, args[0])
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in self.parameters:
                return Param(tok.text)
            raise UnboundName(tok.text, tok.line, tok.col)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail("a number, name or '('")


def parse_expression(text: str, variables=(), parameters=(), line: int = 1) -> Node:
    p = _Parser(tokenize(text, line), set(variables), set(parameters))
    node = p.expr()
    p.end()
    return node


# printer ----------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(value: float) -> str:
    return repr(float(value))


def _prec(node: Node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.fn == "neg":
        return 3
    if isinstance(node, Power):
        return 4
    if isinstance(node, Const) and node.value < 0:
        return 0
    return 5


def to_source(node: Node, min_prec: int = 0) -> str:
    if isinstance(node, Const):
        text = _fmt_number(node.value)
    elif isinstance(node, (Var, Param)):
        text = node.name
    elif isinstance(node, Unary):
        if node.fn == "neg":
            text = "-" + to_source(node.child, 3)
        else:
            text = f"{node.fn}({to_source(node.child)})"
    elif isinstance(node, Power):
        text = f"{to_source(node.child, 4)}^{node.exponent}"
    elif isinstance(node, Binary):
        p = _PREC[node.op]
        text = f"{to_source(node.left, p)}{node.op}{to_source(node.right, p + 1)}"
    else:
        raise TypeError(f"not an expression node: {node!r}")
    if _prec(node) < min_prec:
        return f"({text})"
    return text


# charts -----------------------------------------------------------------------

@dataclass(frozen=True)
class ChartImmersion:
    """Parametrised hypersurface u -> x(u) inside an ambient space form."""

    name: str
    ambient: AmbientForm
    variables: tuple
    domain_box: tuple
    parameters: Mapping[str, float] = field(default_factory=dict)
    components: tuple = ()

    def __post_init__(self):
        n = len(self.variables)
        if not 2 <= n <= jets.MAX_VARS:
            raise ChartError(f"intrinsic dimension must be in 2..{jets.MAX_VARS}, got {n}")
        if self.ambient.n != n:
            raise ChartError(f"ambient dim {self.ambient.dim} does not match {n} variables")
        if len(self.components) != self.ambient.embedding_dim:
            raise ChartError(f"expected {self.ambient.embedding_dim} components, "
                             f"got {len(self.components)}")
        if len(self.domain_box) != n:
            raise ChartError("one interval per variable is required")
        for name, (lo, hi) in zip(self.variables, self.domain_box):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ChartError(f"bad interval for {name}: [{lo}, {hi}]")
        for name, value in self.parameters.items():
            if not math.isfinite(value):
                raise ChartError(f"parameter {name} is not finite")
        declared_v, declared_p = set(self.variables), set(self.parameters)
        for comp in self.components:
            vs, ps = names_in(comp)
            for bad in sorted((vs - declared_v) | (ps - declared_p)):
                raise UnboundName(bad)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def N(self) -> int:
        return self.ambient.embedding_dim

    @property
    def source(self) -> str:
        return format_chart(self)

    def with_parameters(self, **values: float) -> "ChartImmersion":
        unknown = set(values) - set(self.parameters)
        if unknown:
            raise UnboundName(sorted(unknown)[0])
        params = dict(self.parameters)
        params.update({k: float(v) for k, v in values.items()})
        return replace(self, parameters=params)

    def with_components(self, components, name: str | None = None) -> "ChartImmersion":
        return replace(self, components=tuple(components), name=name or self.name)


def format_chart(chart: ChartImmersion) -> str:
    lines = [f"chart {chart.name}",
             f"ambient {chart.ambient.keyword} dim {chart.ambient.dim}"]
    lines.append("vars " + ", ".join(
        f"{v} in [{_fmt_number(lo)}, {_fmt_number(hi)}]"
        for v, (lo, hi) in zip(chart.variables, chart.domain_box)))
    if chart.parameters:
        lines.append("params " + ", ".join(
            f"{k} = {_fmt_number(v)}" for k, v in chart.parameters.items()))
    for i, comp in enumerate(chart.components, start=1):
        lines.append(f"x{i} = {to_source(comp)}")
    return "\n".join(lines) + "\n"


def _check_ident(tok: Token):
    if not _IDENT.match(tok.text) or tok.text in KEYWORDS or tok.text in FUNCTIONS:
        raise DSLSyntaxError(tok.line, tok.col, "an identifier [a-z][a-z0-9_]*", tok.text)


def parse_chart(source: str) -> ChartImmersion:
    name = None
    ambient = None
    variables: list[str] = []
    box: list[tuple] = []
    params: dict[str, float] = {}
    comp_lines: list[tuple[int, list, Token]] = []

    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0]
        if not text.strip():
            continue
        toks = tokenize(text, lineno)
        head = toks[0]
        p = _Parser(toks, set(), set())
        if head.kind == "name" and head.text == "chart":
            rest = text.strip()[len("chart"):].strip()
            if not rest or len(rest.split()) != 1:
                raise DSLSyntaxError(lineno, head.col + 6, "a chart name")
            name = rest
        elif head.kind == "name" and head.text == "ambient":
            p.pos = 1
            kind = p.expect_name()
            dim_kw = p.expect_name()
            if dim_kw.text != "dim":
                raise DSLSyntaxError(lineno, dim_kw.col, "'dim'", dim_kw.text)
            tok = p.tok
            if tok.kind != "num" or not tok.text.isdigit():
                p.fail("an integer dimension")
            p.pos += 1
            p.end()
            ambient = (kind.text, int(tok.text), kind)
        elif head.kind == "name" and head.text == "vars":
            p.pos = 1
            while True:
                tok = p.expect_name()
                _check_ident(tok)
                kw = p.expect_name()
                if kw.text != "in":
                    raise DSLSyntaxError(lineno, kw.col, "'in'", kw.text)
                p.expect("[")
                lo = p.signed_number()
                p.expect(",")
                hi = p.signed_number()
                p.expect("]")
                if tok.text in variables:
                    raise ChartError(f"variable {tok.text} declared twice")
                variables.append(tok.text)
                box.append((lo, hi))
                if not p.accept(","):
                    break
            p.end()
        elif head.kind == "name" and head.text == "params":
            p.pos = 1
            while True:
                tok = p.expect_name()
                _check_ident(tok)
                p.expect("=")
                if tok.text in params:
                    raise ChartError(f"parameter {tok.text} declared twice")
                params[tok.text] = p.signed_number()
                if not p.accept(","):
                    break
            p.end()
        elif head.kind == "name" and re.fullmatch(r"x\d+", head.text):
            if len(toks) < 2 or toks[1].text != "=":
                raise DSLSyntaxError(lineno, toks[1].col, "'='", toks[1].text)
            comp_lines.append((lineno, toks, head))
        else:
            raise DSLSyntaxError(lineno, head.col,
                                 "chart, ambient, vars, params or a component xK", head.text)

    if name is None:
        raise DSLSyntaxError(1, 1, "a 'chart' line")
    if ambient is None:
        raise DSLSyntaxError(1, 1, "an 'ambient' line")
    clash = set(variables) & set(params)
    if clash:
        raise ChartError(f"name used as both variable and parameter: {sorted(clash)[0]}")
    components = []
    for k, (lineno, toks, head) in enumerate(comp_lines, start=1):
        if head.text != f"x{k}":
            raise DSLSyntaxError(lineno, head.col, f"component x{k}", head.text)
        p = _Parser(toks, set(variables), set(params))
        p.pos = 2
        components.append(p.expr())
        p.end()
    kind, dim, tok = ambient
    return ChartImmersion(
        name=name,
        ambient=AmbientForm.from_keyword(kind, dim),
        variables=tuple(variables),
        domain_box=tuple(box),
        parameters=params,
        components=tuple(components),
    )


# evaluation -------------------------------------------------------------------

_NUMPY_FN = {
    "sin": np.sin, "cos": np.cos, "sinh": np.sinh, "cosh": np.cosh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
}
_DOMAIN = {"log": lambda x: x > 0, "sqrt": lambda x: x >= 0}


def eval_scalar(node: Node, env: Mapping[str, object], params: Mapping[str, float]):
    """Plain recursive evaluation; ``env`` values may be numpy arrays."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Param):
        return params[node.name]
    if isinstance(node, Unary):
        x = eval_scalar(node.child, env, params)
        if node.fn == "neg":
            return -x
        if node.fn in _DOMAIN:
            arr = np.asarray(x, dtype=float)
            ok = _DOMAIN[node.fn](arr)
            if not np.all(ok):
                bad = float(arr[~ok].ravel()[0]) if arr.ndim else float(arr)
                raise DegenerateEvaluation(f"{node.fn} outside its domain at value {bad!r}",
                                           function=node.fn, value=bad)
        return _NUMPY_FN[node.fn](x)
    if isinstance(node, Power):
        x = eval_scalar(node.child, env, params)
        if node.exponent < 0 and np.any(np.asarray(x) == 0):
            raise DegenerateEvaluation("negative power of zero", function="pow", value=0.0)
        return np.asarray(x) ** node.exponent
    if isinstance(node, Binary):
        a = eval_scalar(node.left, env, params)
        b = eval_scalar(node.right, env, params)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise DegenerateEvaluation("division by zero", function="div", value=0.0)
        return a / b
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(node: Node, seeds: Mapping[str, jets.Jet], params: Mapping[str, float],
             cache: dict | None = None) -> jets.Jet:
    """Jet evaluation with common-subexpression reuse through ``cache``."""
    if cache is None:
        cache = {}
    hit = cache.get(node)
    if hit is not None:
        return hit
    if isinstance(node, Var):
        out = seeds[node.name]
    elif isinstance(node, (Const, Param)):
        value = node.value if isinstance(node, Const) else params[node.name]
        any_seed = next(iter(seeds.values()))
        out = jets.Jet.constant(np.broadcast_to(value, any_seed.shape), any_seed.m)
    elif isinstance(node, Unary):
        x = eval_jet(node.child, seeds, params, cache)
        out = jets.compose_unary(node.fn, x)
    elif isinstance(node, Power):
        out = jets.int_power(eval_jet(node.child, seeds, params, cache), node.exponent)
    elif isinstance(node, Binary):
        a = eval_jet(node.left, seeds, params, cache)
        b = eval_jet(node.right, seeds, params, cache)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        else:
            out = a / b
    else:
        raise TypeError(f"not an expression node: {node!r}")
    cache[node] = out
    return out


def _seeds(chart: ChartImmersion, point) -> dict:
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != chart.n:
        raise ValueError(f"point has {point.shape[-1]} coordinates, chart needs {chart.n}")
    return {v: jets.Jet.seed(point, i) for i, v in enumerate(chart.variables)}


def eval_chart(chart: ChartImmersion, point) -> jets.Jet:
    """Order-4 jets of all N components; shape ``point.shape[:-1] + (N,)``.

    Iterating over the result yields the per-component jets.
    """
    seeds = _seeds(chart, point)
    cache: dict = {}
    comps = []
    for i, comp in enumerate(chart.components):
        try:
            comps.append(eval_jet(comp, seeds, chart.parameters, cache))
        except DegenerateEvaluation as err:
            raise DegenerateEvaluation(f"component x{i + 1}: {err.message}",
                                       component=i, **err.details) from None
    return jets.stack(comps, axis=-1)


def eval_chart_values(chart: ChartImmersion, point, dtype=float) -> np.ndarray:
    """Order-0 evaluation through the plain evaluator, shape ``point.shape[:-1] + (N,)``.

    ``dtype=np.longdouble`` keeps extended precision (used by finite differences).
    """
    point = np.asarray(point, dtype=dtype)
    env = {v: point[..., i] for i, v in enumerate(chart.variables)}
    out = []
    for i, comp in enumerate(chart.components):
        try:
            val = eval_scalar(comp, env, chart.parameters)
        except DegenerateEvaluation as err:
            raise DegenerateEvaluation(f"component x{i + 1}: {err.message}",
                                       component=i, **err.details) from None
        out.append(np.broadcast_to(np.asarray(val, dtype=dtype), point.shape[:-1]))
    return np.stack(out, axis=-1)
