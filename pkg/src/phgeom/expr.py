"""Scalar expression trees over a four-coordinate chart.

Nodes are hash-consed: structurally equal trees are the same Python object, so
equality is identity and memo tables can be keyed on nodes directly. Only light
simplification happens at construction time (constant folding, 0/1 identities,
flattening of sums and products, collection of identical terms and factors).

Evaluation is vectorised with numpy: coordinate values may be arrays holding a
whole batch of sample points.
"""

from __future__ import annotations

import cmath
import hashlib
import math
import re as _re
import threading
import weakref
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

FUNCTIONS = ("exp", "ln", "sin", "cos", "sqrt", "conj", "re", "im", "abs")


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownSymbolError(ParseError):
    def __init__(self, symbol: str, offset: int):
        super().__init__(f"unknown symbol {symbol!r}", offset)
        self.symbol = symbol


class DomainError(ExprError, ArithmeticError):
    """Raised when an expression is evaluated outside its domain."""


class UnboundParameterError(ExprError, LookupError):
    pass


# ---------------------------------------------------------------------------
# nodes
# ---------------------------------------------------------------------------

_lock = threading.Lock()
_table: "weakref.WeakValueDictionary[tuple, Expr]" = weakref.WeakValueDictionary()


def _digest(cls, key) -> bytes:
    """Structural digest built from the children's digests (stable across runs)."""
    h = hashlib.blake2b(cls.__name__.encode(), digest_size=12)
    for item in key:
        for part in (item if isinstance(item, tuple) else (item,)):
            h.update(part.digest if isinstance(part, Expr) else repr(part).encode())
            h.update(b"|")
        h.update(b";")
    return h.digest()


def _intern(cls, key, **attrs):
    full_key = (cls, *key)
    with _lock:
        node = _table.get(full_key)
        if node is None:
            node = object.__new__(cls)
            for k, v in attrs.items():
                object.__setattr__(node, k, v)
            object.__setattr__(node, "digest", _digest(cls, key))
            _table[full_key] = node
    return node


def _canonical(nodes: list) -> tuple:
    """Constants first, then the remaining nodes ordered by digest."""
    head = [n for n in nodes if isinstance(n, Const)]
    tail = sorted((n for n in nodes if not isinstance(n, Const)), key=lambda n: n.digest)
    return tuple(head + tail)


class Expr:
    """Immutable expression node. Build nodes with the module functions."""

    __slots__ = ("is_real", "digest", "__weakref__")

    def __setattr__(self, name, value):
        raise AttributeError("expression nodes are immutable")

    def __new__(cls, *args, **kwargs):
        raise TypeError("use the constructor functions in phgeom.expr")

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self):
        return f"<{type(self).__name__} {to_text(self)}>"

    def __str__(self):
        return to_text(self)

    def __reduce__(self):
        raise TypeError("expression nodes are not picklable; use to_text")


class Const(Expr):
    __slots__ = ("value",)


class Coord(Expr):
    __slots__ = ("name",)


class Param(Expr):
    __slots__ = ("name",)


class Add(Expr):
    __slots__ = ("terms",)


class Mul(Expr):
    __slots__ = ("factors",)


class Pow(Expr):
    __slots__ = ("base", "exponent")


class Func(Expr):
    __slots__ = ("name", "arg")


def const(value) -> Const:
    v = complex(value)
    return _intern(Const, (v,), value=v, is_real=v.imag == 0)


ZERO = const(0)
ONE = const(1)
I = const(1j)


def coord(name: str) -> Coord:
    return _intern(Coord, (name,), name=name, is_real=True)


def param(name: str) -> Param:
    return _intern(Param, (name,), name=name, is_real=False)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def _is_int(n) -> bool:
    return float(n).is_integer()


def _norm_exponent(n):
    if isinstance(n, Const):
        if not n.is_real:
            raise ExprError("exponents must be real constants")
        n = n.value.real
    n = float(n)
    return int(n) if n.is_integer() else n


def _split_coefficient(term: Expr):
    if isinstance(term, Mul) and isinstance(term.factors[0], Const):
        rest = term.factors[1:]
        core = rest[0] if len(rest) == 1 else _intern(
            Mul, (rest,), factors=rest, is_real=all(f.is_real for f in rest))
        return term.factors[0].value, core
    return 1 + 0j, term


def add(*terms) -> Expr:
    total = 0j
    coeffs: dict[Expr, complex] = {}
    stack = list(reversed(terms))
    while stack:
        t = as_expr(stack.pop())
        if isinstance(t, Add):
            stack.extend(reversed(t.terms))
            continue
        if isinstance(t, Const):
            total += t.value
            continue
        c, core = _split_coefficient(t)
        coeffs[core] = coeffs.get(core, 0j) + c
    out = [] if total == 0 else [const(total)]
    for core, c in coeffs.items():
        if c == 0:
            continue
        out.append(core if c == 1 else mul(const(c), core))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    key = _canonical(out)
    return _intern(Add, (key,), terms=key, is_real=all(t.is_real for t in key))


def mul(*factors) -> Expr:
    coef = 1 + 0j
    powers: dict[Expr, float] = {}
    others: list[Expr] = []
    stack = list(reversed(factors))
    while stack:
        f = as_expr(stack.pop())
        if isinstance(f, Mul):
            stack.extend(reversed(f.factors))
            continue
        if isinstance(f, Const):
            coef *= f.value
            continue
        if isinstance(f, Pow) and isinstance(f.exponent, int):
            base, n = f.base, f.exponent
        else:
            base, n = f, 1
        if base not in powers:
            others.append(base)
            powers[base] = 0
        powers[base] += n
    if coef == 0:
        return ZERO
    out: list[Expr] = []
    for base in others:
        n = powers[base]
        if n == 0:
            continue
        p = base if n == 1 else power(base, n)
        if isinstance(p, Const):
            coef *= p.value
        elif isinstance(p, Mul):
            # integer power distributed over a product
            for g in p.factors:
                if isinstance(g, Const):
                    coef *= g.value
                else:
                    out.append(g)
        else:
            out.append(p)
    if coef != 1:
        out.insert(0, const(coef))
    if not out:
        return const(coef)
    if len(out) == 1:
        return out[0]
    key = _canonical(out)
    return _intern(Mul, (key,), factors=key, is_real=all(f.is_real for f in key))


def neg(x) -> Expr:
    return mul(const(-1), x)


def power(base, n) -> Expr:
    base = as_expr(base)
    n = _norm_exponent(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        v = base.value
        if v == 0:
            if n < 0:
                return _intern(Pow, (base, n), base=base, exponent=n, is_real=True)
            return ZERO
        if isinstance(n, int):
            return const(v ** n)
        if v.imag == 0 and v.real > 0:
            return const(v.real ** n)
        return const(cmath.exp(n * cmath.log(v)))
    if isinstance(n, int):
        if isinstance(base, Pow):
            return power(base.base, _norm_exponent(base.exponent * n))
        if isinstance(base, Mul):
            return mul(*(power(f, n) for f in base.factors))
    is_real = base.is_real and isinstance(n, int)
    return _intern(Pow, (base, n), base=base, exponent=n, is_real=is_real)


_REAL_PRESERVING = {"exp", "sin", "cos"}


def func(name: str, arg) -> Expr:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    a = as_expr(arg)
    if isinstance(a, Const):
        folded = _fold_const(name, a.value)
        if folded is not None:
            return const(folded)
    if name == "conj":
        if a.is_real:
            return a
        if isinstance(a, Add):
            return add(*(func("conj", t) for t in a.terms))
        if isinstance(a, Mul):
            return mul(*(func("conj", f) for f in a.factors))
        if isinstance(a, Pow) and isinstance(a.exponent, int):
            return power(func("conj", a.base), a.exponent)
        if isinstance(a, Func) and a.name in _REAL_PRESERVING:
            return func(a.name, func("conj", a.arg))
        if isinstance(a, Func) and a.name == "conj":
            return a.arg
    elif name == "re":
        if a.is_real:
            return a
        if isinstance(a, Add):
            return add(*(func("re", t) for t in a.terms))
        c, core = _split_coefficient(a)
        if core.is_real and core is not a:
            return mul(const(c.real), core)
        if isinstance(a, Func) and a.name == "conj":
            return func("re", a.arg)
    elif name == "im":
        if a.is_real:
            return ZERO
        if isinstance(a, Add):
            return add(*(func("im", t) for t in a.terms))
        c, core = _split_coefficient(a)
        if core.is_real and core is not a:
            return mul(const(c.imag), core)
        if isinstance(a, Func) and a.name == "conj":
            return neg(func("im", a.arg))
    if name in _REAL_PRESERVING:
        is_real = a.is_real
    elif name in ("ln", "re", "im", "abs"):
        is_real = True
    elif name == "conj":
        is_real = a.is_real
    else:
        is_real = False
    return _intern(Func, (name, a), name=name, arg=a, is_real=is_real)


def _fold_const(name: str, v: complex):
    if name == "exp":
        return cmath.exp(v)
    if name == "ln":
        if v.imag == 0 and v.real > 0:
            return math.log(v.real)
        return None
    if name == "sin":
        return cmath.sin(v)
    if name == "cos":
        return cmath.cos(v)
    if name == "sqrt":
        return cmath.sqrt(v)
    if name == "conj":
        return v.conjugate()
    if name == "re":
        return v.real
    if name == "im":
        return v.imag
    if name == "abs":
        return abs(v)
    return None


def exp(x):
    return func("exp", x)


def ln(x):
    return func("ln", x)


def sin(x):
    return func("sin", x)


def cos(x):
    return func("cos", x)


def sqrt(x):
    return func("sqrt", x)


def conj(x):
    return func("conj", x)


def re(x):
    return func("re", x)


def im(x):
    return func("im", x)


def abs_(x):
    return func("abs", x)


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, Add):
        return e.terms
    if isinstance(e, Mul):
        return e.factors
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Func):
        return (e.arg,)
    return ()


def _postorder(roots: Iterable[Expr]) -> list[Expr]:
    seen: set[int] = set()
    order: list[Expr] = []
    for root in roots:
        if id(root) in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for c in children(node):
                if id(c) not in seen:
                    stack.append((c, False))
    return order


def symbols(e: Expr) -> tuple[set[str], set[str]]:
    """Return (coordinate names, parameter names) used in ``e``."""
    coords, params = set(), set()
    for node in _postorder([e]):
        if isinstance(node, Coord):
            coords.add(node.name)
        elif isinstance(node, Param):
            params.add(node.name)
    return coords, params


def size(*roots: Expr) -> int:
    """Number of distinct nodes in the DAG spanned by ``roots``."""
    return len(_postorder(roots))


# ---------------------------------------------------------------------------
# chart
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """Four real coordinates, optional complex pairings and a domain predicate.

    ``complex_pairs`` holds ``(name, re_coord, im_coord)`` triples, e.g.
    ``("z", "x", "y")`` for z = x + i y. The predicate, when present, must be
    strictly positive at valid points.
    """

    coords: tuple[str, str, str, str]
    complex_pairs: tuple[tuple[str, str, str], ...] = ()
    domain: Expr | None = None

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "complex_pairs", tuple(tuple(p) for p in self.complex_pairs))
        if len(coords) != 4 or len(set(coords)) != 4:
            raise ValueError(f"a chart needs exactly 4 distinct coordinates, got {coords}")
        used: set[str] = set()
        names: set[str] = set()
        for name, a, b in self.complex_pairs:
            if a not in coords or b not in coords or a == b:
                raise ValueError(f"complex pairing {name}=({a},{b}) must use two chart coordinates")
            if a in used or b in used:
                raise ValueError("complex pairings must be disjoint")
            if name in coords or name in names or name in ("i", "pi") or name in FUNCTIONS:
                raise ValueError(f"complex coordinate name {name!r} clashes")
            used.update((a, b))
            names.add(name)
        for c in coords:
            if c in ("i", "pi") or c in FUNCTIONS:
                raise ValueError(f"reserved coordinate name {c!r}")
        if self.domain is not None:
            cs, ps = symbols(self.domain)
            if not cs <= set(coords) or ps:
                raise ValueError("domain predicate may only use chart coordinates")

    def index(self, name: str) -> int:
        try:
            return self.coords.index(name)
        except ValueError:
            raise ExprError(f"{name!r} is not a coordinate of this chart") from None

    def coord(self, k: int | str) -> Coord:
        return coord(self.coords[k] if isinstance(k, int) else self.coords[self.index(k)])

    def pairing(self, name: str) -> tuple[str, str]:
        for n, a, b in self.complex_pairs:
            if n == name:
                return a, b
        raise ExprError(f"unknown complex coordinate {name!r}")

    def complex_coord(self, name: str) -> Expr:
        a, b = self.pairing(name)
        return add(coord(a), mul(I, coord(b)))

    def with_domain(self, text: str) -> "Chart":
        return Chart(self.coords, self.complex_pairs, parse_expression(text, self))

    def env(self, points) -> dict[str, np.ndarray]:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != 4:
            raise ValueError(f"points must have trailing dimension 4, got {pts.shape}")
        return {name: pts[..., k] for k, name in enumerate(self.coords)}

    def in_domain(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.domain is None:
            return np.ones(pts.shape[:-1], dtype=bool)
        val = np.broadcast_to(evaluate_env(self.domain, self.env(pts)), pts.shape[:-1])
        return (np.abs(val.imag) <= 1e-12 * (1 + np.abs(val.real))) & (val.real > 0)

    def check_domain(self, points) -> None:
        ok = self.in_domain(points)
        if not np.all(ok):
            bad = np.asarray(points, dtype=float).reshape(-1, 4)[~ok.reshape(-1)][0]
            raise DomainError(f"point {bad.tolist()} violates the chart domain {to_text(self.domain)}")


@dataclass(frozen=True)
class ScalarField:
    expr: Expr
    chart: Chart

    def __post_init__(self):
        cs, _ = symbols(self.expr)
        extra = cs - set(self.chart.coords)
        if extra:
            raise ExprError(f"coordinates {sorted(extra)} are not in the chart")

    def evaluate(self, points, params: Mapping[str, complex] | None = None):
        return evaluate(self.expr, self.chart, points, params)

    def diff(self, c: str) -> "ScalarField":
        return ScalarField(differentiate(self.expr, c), self.chart)

    def wirtinger(self, z: str, conjugate: bool = False) -> "ScalarField":
        return ScalarField(wirtinger(self.expr, z, self.chart, conjugate), self.chart)


# ---------------------------------------------------------------------------
# parsing and printing
# ---------------------------------------------------------------------------

_TOKEN = _re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            off = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[off]!r}", _byte_offset(text, off))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("eof", "", len(text.encode("utf-8"))))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str, chart: Chart | None, params: Sequence[str]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.chart = chart
        self.params = set(params)
        self.complex = {n: (a, b) for n, a, b in (chart.complex_pairs if chart else ())}

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind == "eof":
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected token {val!r}", off)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms)

    def term(self) -> Expr:
        factors = [self.factor()]
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            f = self.factor()
            factors.append(f if op == "*" else power(f, -1))
        return mul(*factors)

    def factor(self) -> Expr:
        negate = False
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            negate = True
        a = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, off = self.take()
            if kind != "num":
                raise ParseError("exponent must be a number", off)
            a = power(a, float(val))
        return neg(a) if negate else a

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "id":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if val not in FUNCTIONS:
                    raise UnknownSymbolError(val, off)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != 1:
                    raise ParseError(f"{val} takes exactly one argument", off)
                return func(val, args[0])
            if val == "i":
                return I
            if val == "pi":
                return const(math.pi)
            if self.chart is not None and val in self.chart.coords:
                return coord(val)
            if val in self.complex:
                a, b = self.complex[val]
                return add(coord(a), mul(I, coord(b)))
            if val in self.params:
                return param(val)
            raise UnknownSymbolError(val, off)
        raise ParseError(f"unexpected {val or 'end of input'!r}", off)


def parse_expression(text: str, chart: Chart | None = None, params: Sequence[str] = ()) -> Expr:
    """Parse the textual DSL into an expression.

    Identifiers resolve to chart coordinates, complex coordinate names (expanded
    to ``re + i*im``), declared parameters, ``i`` and ``pi``.
    """
    return _Parser(text, chart, params).parse()


def _fmt_real(x: float) -> str:
    x = float(x)
    if x == 0:
        x = 0.0
    return repr(x)


def _fmt_const(v: complex) -> str:
    if v.imag == 0:
        return _fmt_real(v.real)
    if v.real == 0:
        return f"{_fmt_real(v.imag)}*i"
    return f"({_fmt_real(v.real)} + {_fmt_real(v.imag)}*i)"


def _fmt_exponent(n) -> str:
    return str(n) if isinstance(n, int) else _fmt_real(n)


def _is_atomic(e: Expr) -> bool:
    if isinstance(e, (Coord, Param, Func)):
        return True
    if isinstance(e, Const):
        return e.value.imag == 0 and e.value.real >= 0
    return False


def _atom_text(e: Expr) -> str:
    s = to_text(e)
    return s if _is_atomic(e) else f"({s})"


def _factor_text(e: Expr) -> str:
    """Text for ``e`` usable as an operand of ``*`` or ``/``."""
    if isinstance(e, Pow):
        return f"{_atom_text(e.base)}^{_fmt_exponent(e.exponent)}"
    if isinstance(e, (Add, Mul)) or (isinstance(e, Const) and not _is_atomic(e)):
        return f"({to_text(e)})"
    return to_text(e)


def _is_denominator(f: Expr) -> bool:
    return isinstance(f, Pow) and f.exponent < 0


def _denominator_text(f: Pow) -> str:
    n = -f.exponent
    n = int(n) if float(n).is_integer() else n
    if n == 1:
        return _factor_text(f.base) if not isinstance(f.base, Pow) else f"({to_text(f.base)})"
    return f"{_atom_text(f.base)}^{_fmt_exponent(n)}"


def to_text(e: Expr) -> str:
    """Print an expression in the DSL; ``parse_expression`` reads it back exactly."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, (Coord, Param)):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Pow):
        if e.exponent < 0:
            return f"1.0 / {_denominator_text(e)}"
        return _factor_text(e)
    if isinstance(e, Mul):
        factors = list(e.factors)
        parts: list[str] = []
        prefix = ""
        if isinstance(factors[0], Const):
            c = factors.pop(0).value
            if c == -1 and not _is_denominator(factors[0]):
                prefix = "-"
            else:
                parts.append(_fmt_const(c) if c.imag == 0 or c.real == 0 else f"({_fmt_const(c)})")
        out = parts[0] if parts else ""
        for f in factors:
            if _is_denominator(f):
                if not out:
                    out = "1.0"
                out += " / " + _denominator_text(f)
            else:
                out = f"{out} * {_factor_text(f)}" if out else _factor_text(f)
        if prefix:
            # "-" binds to the first atom only; a product needs no parentheses
            first = factors[0]
            if isinstance(first, Pow) or _is_atomic(first) or isinstance(first, (Add, Mul, Const)):
                out = "-" + out
        return out
    if isinstance(e, Add):
        out = to_text(e.terms[0])
        for t in e.terms[1:]:
            s = to_text(t)
            out += " - " + s[1:] if s.startswith("-") else " + " + s
        return out
    raise TypeError(type(e))


# ---------------------------------------------------------------------------
# calculus
# ---------------------------------------------------------------------------

def differentiate(e: Expr, c: str, _memo: dict | None = None) -> Expr:
    """Exact partial derivative with respect to the real coordinate ``c``."""
    memo = {} if _memo is None else _memo
    for node in _postorder([e]):
        if node in memo:
            continue
        memo[node] = _diff_node(node, c, memo)
    return memo[e]


def differentiate_many(exprs: Iterable[Expr], c: str) -> list[Expr]:
    memo: dict = {}
    return [differentiate(e, c, memo) for e in exprs]


def _diff_node(e: Expr, c: str, memo) -> Expr:
    if isinstance(e, Const) or isinstance(e, Param):
        return ZERO
    if isinstance(e, Coord):
        return ONE if e.name == c else ZERO
    if isinstance(e, Add):
        return add(*(memo[t] for t in e.terms))
    if isinstance(e, Mul):
        fs = e.factors
        terms = []
        for k, f in enumerate(fs):
            df = memo[f]
            if df is ZERO:
                continue
            terms.append(mul(*fs[:k], df, *fs[k + 1:]))
        return add(*terms)
    if isinstance(e, Pow):
        db = memo[e.base]
        if db is ZERO:
            return ZERO
        return mul(const(e.exponent), power(e.base, e.exponent - 1), db)
    if isinstance(e, Func):
        a = e.arg
        da = memo[a]
        if da is ZERO:
            return ZERO
        name = e.name
        if name == "exp":
            return mul(e, da)
        if name == "ln":
            return mul(da, power(a, -1))
        if name == "sin":
            return mul(cos(a), da)
        if name == "cos":
            return neg(mul(sin(a), da))
        if name == "sqrt":
            return mul(const(0.5), da, power(e, -1))
        if name in ("conj", "re", "im"):
            return func(name, da)
        if name == "abs":
            return mul(re(mul(conj(a), da)), power(e, -1))
    raise TypeError(type(e))


def wirtinger(e: Expr, z: str, chart: Chart, conjugate: bool = False) -> Expr:
    """d/dz = (d/dx - i d/dy)/2, d/dzbar = (d/dx + i d/dy)/2 for z = x + i y."""
    a, b = chart.pairing(z)
    da = differentiate(e, a)
    db = differentiate(e, b)
    s = 1 if conjugate else -1
    return mul(const(0.5), add(da, mul(const(s * 1j), db)))


def substitute(e: Expr, mapping: Mapping[str, Expr], _memo: dict | None = None) -> Expr:
    """Replace coordinates/parameters by name, simultaneously."""
    memo = {} if _memo is None else _memo
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    for node in _postorder([e]):
        if node in memo:
            continue
        if isinstance(node, (Coord, Param)):
            memo[node] = mapping.get(node.name, node)
        elif isinstance(node, Const):
            memo[node] = node
        elif isinstance(node, Add):
            memo[node] = add(*(memo[t] for t in node.terms))
        elif isinstance(node, Mul):
            memo[node] = mul(*(memo[f] for f in node.factors))
        elif isinstance(node, Pow):
            memo[node] = power(memo[node.base], node.exponent)
        else:
            memo[node] = func(node.name, memo[node.arg])
    return memo[e]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _domain_real(x, what: str):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        if np.any(np.abs(x.imag) > 1e-12 * (1 + np.abs(x.real))):
            raise DomainError(f"{what} of a non-real value")
        x = x.real
    return x


def _eval_node(node: Expr, vals, env):
    if isinstance(node, Const):
        v = node.value
        return v.real if v.imag == 0 else v
    if isinstance(node, Coord):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundParameterError(f"no value for coordinate {node.name!r}") from None
    if isinstance(node, Param):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundParameterError(f"parameter {node.name!r} is not bound") from None
    if isinstance(node, Add):
        it = iter(node.terms)
        acc = vals[id(next(it))]
        for t in it:
            acc = acc + vals[id(t)]
        return acc
    if isinstance(node, Mul):
        it = iter(node.factors)
        acc = vals[id(next(it))]
        for f in it:
            acc = acc * vals[id(f)]
        return acc
    if isinstance(node, Pow):
        b = vals[id(node.base)]
        n = node.exponent
        if n < 0 and np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        if isinstance(n, int):
            return b ** n if n > 0 else 1.0 / (b ** (-n))
        b = np.asarray(b)
        if not np.iscomplexobj(b) and np.any(b < 0):
            b = b.astype(complex)
        return b ** n
    a = vals[id(node.arg)]
    name = node.name
    if name == "exp":
        return np.exp(a)
    if name == "ln":
        r = _domain_real(a, "ln")
        if np.any(r <= 0):
            raise DomainError("ln of a non-positive value")
        return np.log(r)
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    if name == "sqrt":
        a = np.asarray(a)
        if not np.iscomplexobj(a) and np.any(a < 0):
            a = a.astype(complex)
        return np.sqrt(a)
    if name == "conj":
        return np.conj(a)
    if name == "re":
        return np.real(a)
    if name == "im":
        return np.imag(a)
    if name == "abs":
        return np.abs(a)
    raise TypeError(type(node))


def evaluate_many(exprs: Sequence[Expr], env: Mapping[str, object]) -> list:
    """Evaluate several expressions sharing common subexpressions.

    ``env`` maps coordinate and parameter names to scalars or arrays. Results
    are complex numpy values broadcast to the shape of the environment arrays.
    """
    vals: dict[int, object] = {}
    with np.errstate(all="ignore"):
        for node in _postorder(exprs):
            vals[id(node)] = _eval_node(node, vals, env)
    shape = np.broadcast_shapes(*(np.shape(v) for v in env.values())) if env else ()
    out = []
    for e in exprs:
        v = np.asarray(vals[id(e)], dtype=complex)
        if v.shape != shape:
            v = np.broadcast_to(v, shape).copy()
        out.append(v)
    return out


def evaluate_env(e: Expr, env: Mapping[str, object]):
    return evaluate_many([e], env)[0]


def evaluate(e: Expr, chart: Chart, point, params: Mapping[str, complex] | None = None):
    """Evaluate at one point (shape (4,)) or a batch (shape (n, 4)).

    Raises DomainError when a point violates the chart predicate or hits a
    singular operation, and UnboundParameterError for missing parameters.
    """
    chart.check_domain(point)
    env: dict[str, object] = dict(chart.env(point))
    for k, v in (params or {}).items():
        env[k] = complex(v)
    v = evaluate_env(e, env)
    if not np.all(np.isfinite(v)):
        raise DomainError("expression is not finite at the given point")
    return v[()] if v.ndim == 0 else v


def evaluate_batch(exprs: Sequence[Expr], chart: Chart, points,
                   params: Mapping[str, complex] | None = None) -> np.ndarray:
    """Evaluate many expressions at a batch of points.

    Returns a complex array of shape ``(len(points), len(exprs))``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    chart.check_domain(pts)
    env: dict[str, object] = dict(chart.env(pts))
    for k, v in (params or {}).items():
        env[k] = complex(v)
    if not exprs:
        return np.zeros((len(pts), 0), dtype=complex)
    vals = evaluate_many(list(exprs), env)
    out = np.stack(vals, axis=-1)
    if not np.all(np.isfinite(out)):
        raise DomainError("expression is not finite at a sample point")
    return out
