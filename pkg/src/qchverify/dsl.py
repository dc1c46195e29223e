"""Chart definition language.

A chart file is line oriented::

    chart orthotoric
    coords xi eta t z
    params a=1 b=0 c=1 d=1
    let F = a*xi + b
    domain xi - eta ; F ; -(c*eta + d)
    orientation omega_J
    sample xi range 0.1, 5
    metric
      g[0,0] = (xi - eta) / F
      ...
    form omega_J
      w[0,2] = 1
    endo I
      e[3,0] = ...
    vector X1 = (0, 0, 1, 0)
    scalar phi1 = xi + eta
    end

``metric`` stores the upper triangle only; an entry written below the
diagonal is mirrored. ``form`` blocks hold 2-forms ``w[i,j]`` with
``i < j`` (a lower entry is stored negated). ``endo`` blocks hold
endomorphism components ``e[i,j] = E^i_j``, i.e. column ``j`` is the
image of the ``j``-th coordinate vector. ``let`` introduces a named
subexpression, ``orientation`` names the 2-form whose square fixes the
orientation, and ``sample`` describes the box used by the point sampler.
Indices may be integers or coordinate names. ``#`` starts a comment.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import ChartSyntaxError, DomainError, SingularEvaluationError, UnknownIdentifierError

FUNCTIONS = ("sqrt", "ln", "exp", "sin", "cos")
_KEYWORDS = {"chart", "coords", "params", "let", "domain", "orientation", "sample",
             "metric", "form", "endo", "vector", "scalar", "end"}


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Expr:
    """Expression node.

    ``kind`` is one of ``const``, ``coord``, ``param``, ``let``, ``add``,
    ``sub``, ``mul``, ``div``, ``neg``, ``pow``, ``call``. ``value`` holds
    the literal of a constant or the integer exponent of a power; ``name``
    the referenced identifier or called function.
    """

    kind: str
    children: tuple = ()
    value: float | int | None = None
    name: str | None = None

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def const(v) -> Expr:
    return Expr("const", value=float(v))


_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}
_SYM = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def _format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def print_expr(e: Expr) -> str:
    """Canonical infix form; parsing it back reproduces the same tree."""
    k = e.kind
    if k == "const":
        s = _format_number(e.value)
        return f"({s})" if e.value < 0 else s
    if k in ("coord", "param", "let"):
        return e.name
    if k == "call":
        return f"{e.name}({print_expr(e.children[0])})"
    p = _PREC[k]
    if k == "neg":
        c = e.children[0]
        inner = print_expr(c)
        if _PREC.get(c.kind, 5) <= p:
            inner = f"({inner})"
        return "-" + inner
    if k == "pow":
        c = e.children[0]
        inner = print_expr(c)
        if _PREC.get(c.kind, 5) <= p or (c.kind == "const" and c.value < 0):
            inner = f"({inner})"
        return f"{inner}^{e.value}"
    left, right = e.children
    ls, rs = print_expr(left), print_expr(right)
    if _PREC.get(left.kind, 5) < p:
        ls = f"({ls})"
    if _PREC.get(right.kind, 5) <= p:
        rs = f"({rs})"
    return f"{ls} {_SYM[k]} {rs}"


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],;=])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize_line(text: str, lineno: int) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ChartSyntaxError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    return tokens


class _Stream:
    def __init__(self, tokens, lineno, line_len):
        self.tokens = tokens
        self.i = 0
        self.lineno = lineno
        self.line_len = line_len

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            raise ChartSyntaxError("unexpected end of line", self.lineno, self.line_len + 1)
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            raise ChartSyntaxError(f"expected {text!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def accept(self, text):
        tok = self.peek()
        if tok is not None and tok.text == text:
            self.i += 1
            return tok
        return None

    def at_end(self):
        return self.i >= len(self.tokens)

    def finish(self):
        tok = self.peek()
        if tok is not None:
            raise ChartSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


class _ExprParser:
    """Recursive descent with the usual precedence; binary ops are left associative."""

    def __init__(self, stream: _Stream, resolve):
        self.s = stream
        self.resolve = resolve

    def parse(self) -> Expr:
        return self.additive()

    def additive(self):
        left = self.multiplicative()
        while True:
            tok = self.s.peek()
            if tok is not None and tok.text in "+-" and tok.kind == "op":
                self.s.next()
                right = self.multiplicative()
                left = Expr("add" if tok.text == "+" else "sub", (left, right))
            else:
                return left

    def multiplicative(self):
        left = self.unary()
        while True:
            tok = self.s.peek()
            if tok is not None and tok.text in ("*", "/"):
                self.s.next()
                right = self.unary()
                left = Expr("mul" if tok.text == "*" else "div", (left, right))
            else:
                return left

    def unary(self):
        if self.s.accept("-"):
            return Expr("neg", (self.unary(),))
        if self.s.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.s.accept("^"):
            sign = -1 if self.s.accept("-") else 1
            tok = self.s.next()
            if tok.kind != "number" or not re.fullmatch(r"\d+", tok.text):
                raise ChartSyntaxError("exponent must be an integer literal (use exp/ln for real powers)",
                                       tok.line, tok.col)
            base = Expr("pow", (base,), value=sign * int(tok.text))
        return base

    def atom(self):
        tok = self.s.next()
        if tok.kind == "number":
            return Expr("const", value=float(tok.text))
        if tok.text == "(":
            e = self.additive()
            self.s.expect(")")
            return e
        if tok.kind == "ident":
            if tok.text in FUNCTIONS and self.s.accept("("):
                arg = self.additive()
                self.s.expect(")")
                return Expr("call", (arg,), name=tok.text)
            kind = self.resolve(tok.text)
            if kind is None:
                raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.line, tok.col)
            return Expr(kind, name=tok.text)
        raise ChartSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)


# ---------------------------------------------------------------------------
# Chart specification


@dataclass(frozen=True)
class SampleRule:
    """Sampling box for one coordinate (``range``) or a pair (``polar``)."""

    coords: tuple
    mode: str
    low: Expr
    high: Expr


@dataclass(eq=False)
class ChartSpec:
    name: str
    coords: tuple
    params: dict = field(default_factory=dict)
    lets: tuple = ()
    domain: tuple = ()
    metric: dict = field(default_factory=dict)
    forms: dict = field(default_factory=dict)
    endos: dict = field(default_factory=dict)
    vector_fields: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    orientation: str | None = None
    samples: tuple = ()

    def __post_init__(self):
        self._cache = {}

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_cache"] = {}
        return state

    @property
    def dim(self) -> int:
        return len(self.coords)

    def to_text(self) -> str:
        return print_chart(self)

    @property
    def file_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def with_params(self, **overrides) -> "ChartSpec":
        unknown = set(overrides) - set(self.params)
        if unknown:
            raise UnknownIdentifierError(f"unknown parameter(s): {sorted(unknown)}")
        params = dict(self.params)
        params.update({k: float(v) for k, v in overrides.items()})
        return ChartSpec(self.name, self.coords, params, self.lets, self.domain, self.metric,
                         self.forms, self.endos, self.vector_fields, self.scalars,
                         self.orientation, self.samples)

    def compiled(self, expr: Expr):
        fn = self._cache.get(id(expr))
        if fn is None:
            fn = self._cache[id(expr)] = (_compile(expr), expr)
        return fn[0]

    def at(self, point, order: int = 2, check_domain: bool = True) -> "PointEvaluation":
        return PointEvaluation(self, point, order, check_domain)

    def param_value(self, expr: Expr) -> float:
        """Evaluate an expression that may reference parameters only."""
        env = dict(self.params)
        varying = set()
        for name, e in self.lets:
            if any(n.kind == "coord" or (n.kind == "let" and n.name in varying) for n in e.walk()):
                varying.add(name)
                continue
            env[name] = self.compiled(e)(env)
        return float(self.compiled(expr)(env))

    def domain_values(self, point) -> np.ndarray:
        ev = PointEvaluation(self, point, 0, check_domain=False)
        return np.array([float(np.real(ev.eval(e).value)) for e in self.domain])


def _div(a, b):
    if isinstance(b, jets.Jet):
        return a / b
    if b == 0:
        raise SingularEvaluationError("division by zero")
    return a / b


def _pow(a, n):
    if not isinstance(a, jets.Jet) and a == 0 and n < 0:
        raise SingularEvaluationError("zero to a negative power")
    return a ** n


def _call(name, a):
    if not isinstance(a, jets.Jet):
        if name in ("sqrt", "ln") and a <= 0:
            raise DomainError(f"{name} of non-positive value {a}")
        return {"sqrt": math.sqrt, "ln": math.log, "exp": math.exp,
                "sin": math.sin, "cos": math.cos}[name](a)
    return jets.jet_func(name, a)


def _compile(e: Expr):
    k = e.kind
    if k == "const":
        v = e.value
        return lambda env: v
    if k in ("coord", "param", "let"):
        name = e.name
        return lambda env: env[name]
    if k == "neg":
        f = _compile(e.children[0])
        return lambda env: -f(env)
    if k == "pow":
        f = _compile(e.children[0])
        n = e.value
        return lambda env: _pow(f(env), n)
    if k == "call":
        f = _compile(e.children[0])
        name = e.name
        return lambda env: _call(name, f(env))
    f, g = (_compile(c) for c in e.children)
    if k == "add":
        return lambda env: f(env) + g(env)
    if k == "sub":
        return lambda env: f(env) - g(env)
    if k == "mul":
        return lambda env: f(env) * g(env)
    if k == "div":
        return lambda env: _div(f(env), g(env))
    raise ValueError(f"unknown node kind {k}")


class PointEvaluation:
    """All chart quantities as jets at one point, with per-name caching."""

    def __init__(self, chart: ChartSpec, point, order: int = 2, check_domain: bool = True):
        point = np.asarray(point, dtype=float)
        if point.shape != (chart.dim,):
            raise DomainError(f"point must have {chart.dim} coordinates")
        self.chart = chart
        self.point = point
        self.order = order
        n = chart.dim
        if order == 0:
            env = {c: jets.constant(x, n, 0) for c, x in zip(chart.coords, point)}
        else:
            env = {c: jets.seed_variable(x, i, n, order)
                   for i, (c, x) in enumerate(zip(chart.coords, point))}
        env.update(chart.params)
        self.env = env
        for name, expr in chart.lets:
            env[name] = chart.compiled(expr)(env)
        self._memo = {}
        if check_domain:
            for i, expr in enumerate(chart.domain):
                v = float(np.real(self._as_jet(chart.compiled(expr)(env)).value))
                if not v > 0:
                    raise DomainError(
                        f"point {point.tolist()} violates domain constraint #{i} "
                        f"({print_expr(expr)} = {v:.3g})")

    def _as_jet(self, x):
        if isinstance(x, jets.Jet):
            return x
        return jets.constant(x, self.chart.dim, self.order)

    def eval(self, expr: Expr) -> jets.Jet:
        return self._as_jet(self.chart.compiled(expr)(self.env))

    def _cached(self, key, build):
        if key not in self._memo:
            self._memo[key] = build()
        return self._memo[key]

    def metric(self):
        def build():
            n = self.chart.dim
            zero = jets.constant(0.0, n, self.order)
            m = [[zero] * n for _ in range(n)]
            for (i, j), expr in self.chart.metric.items():
                m[i][j] = m[j][i] = self.eval(expr)
            return m
        return self._cached(("metric",), build)

    def _lookup(self, table: dict, kind: str, name: str):
        try:
            return table[name]
        except KeyError:
            raise UnknownIdentifierError(f"chart {self.chart.name!r} declares no {kind} {name!r}") from None

    def form(self, name: str) -> dict:
        entries = self._lookup(self.chart.forms, "form", name)
        return self._cached(("form", name), lambda: {ij: self.eval(e) for ij, e in entries.items()})

    def endo(self, name: str):
        def build():
            n = self.chart.dim
            zero = jets.constant(0.0, n, self.order)
            m = [[zero] * n for _ in range(n)]
            for (i, j), expr in self._lookup(self.chart.endos, "endo", name).items():
                m[i][j] = self.eval(expr)
            return m
        return self._cached(("endo", name), build)

    def vector(self, name: str):
        return self._cached(("vector", name),
                            lambda: [self.eval(e) for e in self._lookup(self.chart.vector_fields, "vector", name)])

    def scalar(self, name: str) -> jets.Jet:
        return self._cached(("scalar", name),
                            lambda: self.eval(self._lookup(self.chart.scalars, "scalar", name)))


def eval_expr(expr: Expr, chart: ChartSpec, point, order: int = 2) -> jets.Jet:
    """Jet of ``expr`` at ``point`` with every coordinate seeded as a variable."""
    return chart.at(point, order).eval(expr)


# ---------------------------------------------------------------------------
# Parser


class _ChartParser:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.name = None
        self.coords = None
        self.params = {}
        self.lets = []
        self.domain = []
        self.metric = {}
        self.forms = {}
        self.endos = {}
        self.vectors = {}
        self.scalars = {}
        self.orientation = None
        self.orientation_pos = None
        self.samples = []
        self.block = None
        self.ended = False

    def resolve(self, name):
        if self.coords and name in self.coords:
            return "coord"
        if name in self.params:
            return "param"
        if any(n == name for n, _ in self.lets):
            return "let"
        return None

    def taken(self, name):
        return self.resolve(name) is not None

    def expr(self, s: _Stream) -> Expr:
        return _ExprParser(s, self.resolve).parse()

    def index(self, s: _Stream) -> int:
        tok = s.next()
        if tok.kind == "number" and re.fullmatch(r"\d+", tok.text):
            idx = int(tok.text)
        elif tok.kind == "ident" and tok.text in self.coords:
            idx = self.coords.index(tok.text)
        else:
            raise ChartSyntaxError(f"bad index {tok.text!r}", tok.line, tok.col)
        if idx >= len(self.coords):
            raise ChartSyntaxError(
                f"index {idx} exceeds chart dimension {len(self.coords)}", tok.line, tok.col)
        return idx

    def run(self) -> ChartSpec:
        for lineno, raw in enumerate(self.lines, start=1):
            line = raw.split("#", 1)[0]
            if not line.strip():
                continue
            if self.ended:
                raise ChartSyntaxError("content after 'end'", lineno, 1)
            tokens = tokenize_line(line, lineno)
            s = _Stream(tokens, lineno, len(line))
            head = tokens[0]
            if head.kind == "ident" and head.text in _KEYWORDS:
                self.block = None
                s.next()
                self.statement(head, s)
            elif self.block is not None:
                self.block_entry(s)
            else:
                raise ChartSyntaxError(f"unexpected {head.text!r}", head.line, head.col)
        if not self.ended:
            raise ChartSyntaxError("missing 'end'", len(self.lines), None)
        if not self.metric:
            raise ChartSyntaxError("chart has no metric section")
        if self.orientation is not None and self.orientation not in self.forms:
            raise UnknownIdentifierError(f"orientation form {self.orientation!r} is not declared",
                                         *self.orientation_pos)
        return ChartSpec(self.name, tuple(self.coords), dict(self.params), tuple(self.lets),
                         tuple(self.domain), dict(self.metric), dict(self.forms), dict(self.endos),
                         dict(self.vectors), dict(self.scalars), self.orientation, tuple(self.samples))

    def need_header(self, tok):
        if self.name is None or self.coords is None:
            raise ChartSyntaxError("'chart' and 'coords' must come first", tok.line, tok.col)

    def new_name(self, s: _Stream, table=None):
        tok = s.next()
        if tok.kind != "ident" or tok.text in _KEYWORDS or tok.text in FUNCTIONS:
            raise ChartSyntaxError(f"bad name {tok.text!r}", tok.line, tok.col)
        if (table is not None and tok.text in table) or (table is None and self.taken(tok.text)):
            raise ChartSyntaxError(f"duplicate declaration of {tok.text!r}", tok.line, tok.col)
        return tok.text

    def statement(self, head: Token, s: _Stream):
        kw = head.text
        if kw == "chart":
            if self.name is not None:
                raise ChartSyntaxError("duplicate 'chart' line", head.line, head.col)
            tok = s.next()
            self.name = tok.text
            while not s.at_end():  # allow names like half-plane
                self.name += s.next().text
            return
        if kw == "coords":
            if self.name is None or self.coords is not None:
                raise ChartSyntaxError("'coords' must follow 'chart' exactly once", head.line, head.col)
            names = []
            while not s.at_end():
                tok = s.next()
                if tok.kind != "ident" or tok.text in _KEYWORDS or tok.text in FUNCTIONS:
                    raise ChartSyntaxError(f"bad coordinate name {tok.text!r}", tok.line, tok.col)
                if tok.text in names:
                    raise ChartSyntaxError(f"duplicate coordinate {tok.text!r}", tok.line, tok.col)
                names.append(tok.text)
            if len(names) not in (2, 4):
                raise ChartSyntaxError("coords must declare 2 or 4 names", head.line, head.col)
            self.coords = names
            return
        self.need_header(head)
        if kw == "params":
            while not s.at_end():
                name = self.new_name(s)
                s.expect("=")
                sign = -1.0 if s.accept("-") else 1.0
                tok = s.next()
                if tok.kind != "number":
                    raise ChartSyntaxError("parameter value must be a number", tok.line, tok.col)
                self.params[name] = sign * float(tok.text)
        elif kw == "let":
            name = self.new_name(s)
            s.expect("=")
            e = self.expr(s)
            s.finish()
            self.lets.append((name, e))
        elif kw == "domain":
            while True:
                self.domain.append(self.expr(s))
                if not s.accept(";"):
                    break
            s.finish()
        elif kw == "orientation":
            tok = s.next()
            self.orientation = tok.text
            self.orientation_pos = (tok.line, tok.col)
            s.finish()
        elif kw == "sample":
            names = []
            while s.peek() is not None and s.peek().text not in ("range", "polar"):
                tok = s.next()
                if tok.text not in self.coords:
                    raise UnknownIdentifierError(f"unknown coordinate {tok.text!r}", tok.line, tok.col)
                names.append(tok.text)
            mode = s.next().text
            if (mode == "range" and len(names) != 1) or (mode == "polar" and len(names) != 2):
                raise ChartSyntaxError(f"'{mode}' sampling takes {1 if mode == 'range' else 2} coordinate(s)",
                                       head.line, head.col)
            lo = self.expr(s)
            s.expect(",")
            hi = self.expr(s)
            s.finish()
            for e in (lo, hi):
                if any(n.kind == "coord" for n in e.walk()):
                    raise ChartSyntaxError("sampling bounds may not reference coordinates", head.line, head.col)
            self.samples.append(SampleRule(tuple(names), mode, lo, hi))
        elif kw == "metric":
            if self.metric:
                raise ChartSyntaxError("duplicate metric section", head.line, head.col)
            s.finish()
            self.block = ("metric", self.metric)
        elif kw in ("form", "endo"):
            table = self.forms if kw == "form" else self.endos
            name = self.new_name(s, table)
            s.finish()
            table[name] = {}
            self.block = (kw, table[name])
        elif kw == "vector":
            name = self.new_name(s, self.vectors)
            s.expect("=")
            s.expect("(")
            comps = [self.expr(s)]
            while s.accept(","):
                comps.append(self.expr(s))
            s.expect(")")
            s.finish()
            if len(comps) != len(self.coords):
                raise ChartSyntaxError(
                    f"vector {name!r} has {len(comps)} components, chart dimension is {len(self.coords)}",
                    head.line, head.col)
            self.vectors[name] = tuple(comps)
        elif kw == "scalar":
            name = self.new_name(s, self.scalars)
            s.expect("=")
            self.scalars[name] = self.expr(s)
            s.finish()
        elif kw == "end":
            s.finish()
            self.ended = True

    def block_entry(self, s: _Stream):
        kind, table = self.block
        first = s.next()
        if first.kind != "ident":
            raise ChartSyntaxError(f"expected an entry like g[i,j], found {first.text!r}", first.line, first.col)
        s.expect("[")
        i = self.index(s)
        s.expect(",")
        j = self.index(s)
        s.expect("]")
        s.expect("=")
        e = self.expr(s)
        s.finish()
        if kind == "metric":
            key = (min(i, j), max(i, j))
        elif kind == "form":
            if i == j:
                raise ChartSyntaxError("diagonal 2-form entry", first.line, first.col)
            if i > j:
                i, j, e = j, i, Expr("neg", (e,))
            key = (i, j)
        else:
            key = (i, j)
        if key in table:
            raise ChartSyntaxError(f"duplicate entry {key}", first.line, first.col)
        table[key] = e


def parse_chart(text: str) -> ChartSpec:
    """Parse chart text into a fully resolved :class:`ChartSpec`."""
    return _ChartParser(text).run()


def print_chart(chart: ChartSpec) -> str:
    """Canonical chart text. ``parse_chart(print_chart(c))`` prints identically."""
    out = [f"chart {chart.name}", "coords " + " ".join(chart.coords)]
    if chart.params:
        out.append("params " + " ".join(f"{k}={_format_number(v)}" for k, v in chart.params.items()))
    for name, e in chart.lets:
        out.append(f"let {name} = {print_expr(e)}")
    if chart.domain:
        out.append("domain " + " ; ".join(print_expr(e) for e in chart.domain))
    if chart.orientation:
        out.append(f"orientation {chart.orientation}")
    for rule in chart.samples:
        out.append(f"sample {' '.join(rule.coords)} {rule.mode} {print_expr(rule.low)}, {print_expr(rule.high)}")
    out.append("metric")
    for (i, j) in sorted(chart.metric):
        out.append(f"  g[{i},{j}] = {print_expr(chart.metric[i, j])}")
    for name, entries in chart.forms.items():
        out.append(f"form {name}")
        for (i, j) in sorted(entries):
            out.append(f"  w[{i},{j}] = {print_expr(entries[i, j])}")
    for name, entries in chart.endos.items():
        out.append(f"endo {name}")
        for (i, j) in sorted(entries):
            out.append(f"  e[{i},{j}] = {print_expr(entries[i, j])}")
    for name, comps in chart.vector_fields.items():
        out.append(f"vector {name} = (" + ", ".join(print_expr(c) for c in comps) + ")")
    for name, e in chart.scalars.items():
        out.append(f"scalar {name} = {print_expr(e)}")
    out.append("end")
    return "\n".join(out) + "\n"
