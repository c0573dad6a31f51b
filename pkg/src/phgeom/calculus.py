"""Differential forms on a four-dimensional chart.

A k-form is stored as a map from strictly increasing index tuples to
coefficient expressions in the real coordinate basis ``dx^{i1}^...^dx^{ik}``.
Coefficients may be complex, so complex forms such as ``dz ^ dw`` live in the
same representation as real ones. The complex frames (dz, dzbar, d/dz) are a
thin convenience layer on top.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from . import expr as E
from .expr import ONE, ZERO, Chart, Expr, add, as_expr, mul
from .symmat import det, inverse, minor_det, perm_sign

DIM = 4


class FormError(ValueError):
    pass


def basis_indices(k: int) -> list[tuple[int, ...]]:
    """Increasing index tuples of length k in lexicographic order."""
    return list(combinations(range(DIM), k))


def _merge(a: tuple[int, ...], b: tuple[int, ...]):
    """Sign and sorted tuple of dx^a ^ dx^b, or (0, None) when they overlap."""
    if set(a) & set(b):
        return 0, None
    seq = a + b
    return perm_sign(seq), tuple(sorted(seq))


class Form:
    """A differential form with expression coefficients."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping[tuple[int, ...], object] | None = None):
        if not 0 <= degree <= DIM:
            raise FormError(f"form degree must be in 0..4, got {degree}")
        clean: dict[tuple[int, ...], Expr] = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree or any(i >= j for i, j in zip(idx, idx[1:])) or any(not 0 <= i < DIM for i in idx):
                raise FormError(f"index {idx} is not a strictly increasing {degree}-tuple")
            c = as_expr(c)
            if c is not ZERO:
                clean[idx] = c
        self.chart = chart
        self.degree = degree
        self.coeffs = dict(sorted(clean.items()))

    # -- construction -----------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart, degree: int) -> "Form":
        return cls(chart, degree)

    @classmethod
    def function(cls, chart: Chart, f) -> "Form":
        return cls(chart, 0, {(): as_expr(f)})

    @classmethod
    def basis(cls, chart: Chart, *names) -> "Form":
        """``Form.basis(chart, 'x', 'u')`` is dx ^ du (any order, sign applied)."""
        idx = [chart.index(n) if isinstance(n, str) else int(n) for n in names]
        if len(set(idx)) != len(idx):
            return cls(chart, len(idx))
        return cls(chart, len(idx), {tuple(sorted(idx)): perm_sign(idx)})

    # -- algebra ---------------------------------------------------------
    def _check(self, other: "Form"):
        if not isinstance(other, Form):
            raise TypeError(f"expected a Form, got {type(other).__name__}")
        if other.chart != self.chart:
            raise FormError("forms live on different charts")

    def __add__(self, other):
        self._check(other)
        if other.degree != self.degree:
            raise FormError(f"cannot add forms of degree {self.degree} and {other.degree}")
        keys = dict.fromkeys(list(self.coeffs) + list(other.coeffs))
        return Form(self.chart, self.degree,
                    {k: add(self.coeffs.get(k, ZERO), other.coeffs.get(k, ZERO)) for k in keys})

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f) -> "Form":
        f = as_expr(f)
        return Form(self.chart, self.degree, {k: mul(f, c) for k, c in self.coeffs.items()})

    def __mul__(self, f):
        if isinstance(f, Form):
            return wedge(self, f)
        return self.scale(f)

    def __rmul__(self, f):
        return self.scale(f)

    def __xor__(self, other):
        return wedge(self, other)

    def map(self, fn) -> "Form":
        return Form(self.chart, self.degree, {k: fn(c) for k, c in self.coeffs.items()})

    def conj(self) -> "Form":
        return self.map(E.conj)

    def real(self) -> "Form":
        return self.map(E.re)

    def imag(self) -> "Form":
        return self.map(E.im)

    def __getitem__(self, idx) -> Expr:
        return self.coeffs.get(tuple(idx), ZERO)

    def component_list(self) -> list[Expr]:
        """Coefficients in the order of ``basis_indices(degree)``."""
        return [self.coeffs.get(i, ZERO) for i in basis_indices(self.degree)]

    def is_zero(self) -> bool:
        return not self.coeffs

    def evaluate(self, points, params: Mapping[str, complex] | None = None) -> np.ndarray:
        """Complex array of shape (n, C(4, k)) in ``basis_indices`` order."""
        return E.evaluate_batch(self.component_list(), self.chart, points, params)

    def __repr__(self):
        if not self.coeffs:
            return f"Form(0, degree={self.degree})"
        names = self.chart.coords
        parts = []
        for idx, c in self.coeffs.items():
            basis = "^".join("d" + names[i] for i in idx) or "1"
            parts.append(f"({E.to_text(c)}) {basis}")
        return " + ".join(parts)


def wedge(a: Form, b: Form) -> Form:
    a._check(b)
    k = a.degree + b.degree
    if k > DIM:
        raise FormError(f"wedge product of degree {k} exceeds the dimension")
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for ia, ca in a.coeffs.items():
        for ib, cb in b.coeffs.items():
            s, idx = _merge(ia, ib)
            if s == 0:
                continue
            acc.setdefault(idx, []).append(mul(s, ca, cb))
    return Form(a.chart, k, {i: add(*ts) for i, ts in acc.items()})


def exterior_derivative(a: Form) -> Form:
    if a.degree >= DIM:
        return Form(a.chart, DIM)
    names = a.chart.coords
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for idx, c in a.coeffs.items():
        for j in range(DIM):
            if j in idx:
                continue
            dc = E.differentiate(c, names[j])
            if dc is ZERO:
                continue
            s, new = _merge((j,), idx)
            acc.setdefault(new, []).append(mul(s, dc))
    return Form(a.chart, a.degree + 1, {i: add(*ts) for i, ts in acc.items()})


d = exterior_derivative


# ---------------------------------------------------------------------------
# vector fields and maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple[Expr, Expr, Expr, Expr]

    def __post_init__(self):
        comps = tuple(as_expr(c) for c in self.components)
        if len(comps) != DIM:
            raise FormError("a vector field needs 4 components")
        object.__setattr__(self, "components", comps)

    @classmethod
    def coordinate(cls, chart: Chart, name: str | int) -> "VectorField":
        k = chart.index(name) if isinstance(name, str) else name
        return cls(chart, tuple(ONE if i == k else ZERO for i in range(DIM)))

    @classmethod
    def zero(cls, chart: Chart) -> "VectorField":
        return cls(chart, (ZERO,) * DIM)

    def __add__(self, other: "VectorField"):
        return VectorField(self.chart, tuple(add(a, b) for a, b in zip(self.components, other.components)))

    def __sub__(self, other: "VectorField"):
        return self + other.scale(-1)

    def scale(self, f) -> "VectorField":
        return VectorField(self.chart, tuple(mul(f, c) for c in self.components))

    __rmul__ = scale

    def apply(self, f: Expr) -> Expr:
        """Directional derivative X(f)."""
        names = self.chart.coords
        return add(*(mul(c, E.differentiate(f, names[i])) for i, c in enumerate(self.components) if c is not ZERO))

    def evaluate(self, points, params=None) -> np.ndarray:
        return E.evaluate_batch(list(self.components), self.chart, points, params)


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """[X, Y]^k = X(Y^k) - Y(X^k)."""
    if X.chart != Y.chart:
        raise FormError("vector fields live on different charts")
    return VectorField(X.chart, tuple(add(X.apply(yc), mul(-1, Y.apply(xc)))
                                      for xc, yc in zip(X.components, Y.components)))


@dataclass(frozen=True)
class SmoothMap:
    """A map given by target coordinates as expressions of the source coordinates."""

    source: Chart
    target: Chart
    exprs: tuple[Expr, Expr, Expr, Expr]
    name: str = ""

    def __post_init__(self):
        exprs = tuple(as_expr(e) for e in self.exprs)
        if len(exprs) != DIM:
            raise FormError("a smooth map needs 4 target coordinate expressions")
        for e in exprs:
            cs, _ = E.symbols(e)
            if not cs <= set(self.source.coords):
                raise FormError(f"map uses coordinates {sorted(cs - set(self.source.coords))} outside its source")
        object.__setattr__(self, "exprs", exprs)

    @classmethod
    def from_complex(cls, chart: Chart, images: Mapping[str, Expr], name: str = "") -> "SmoothMap":
        """Build a self-map from complex coordinate images, e.g. {'z': z + 1, 'w': 2*w}."""
        exprs = [chart.coord(c) for c in chart.coords]
        for zname, img in images.items():
            a, b = chart.pairing(zname)
            exprs[chart.index(a)] = E.re(img)
            exprs[chart.index(b)] = E.im(img)
        return cls(chart, chart, tuple(exprs), name)

    def jacobian(self) -> list[list[Expr]]:
        return [[E.differentiate(f, c) for c in self.source.coords] for f in self.exprs]

    def substitution(self) -> dict[str, Expr]:
        return dict(zip(self.target.coords, self.exprs))

    def pull_function(self, f: Expr) -> Expr:
        return E.substitute(f, self.substitution())

    def apply(self, points) -> np.ndarray:
        vals = E.evaluate_batch(list(self.exprs), self.source, points)
        return vals.real

    def pushforward_values(self, points) -> np.ndarray:
        """Numeric Jacobian matrices (n, 4, 4) with [a, j] = dF^a/dx^j."""
        jac = self.jacobian()
        flat = [e for row in jac for e in row]
        return E.evaluate_batch(flat, self.source, points).real.reshape(-1, DIM, DIM)


def pullback(m: SmoothMap, a: Form) -> Form:
    if a.chart != m.target:
        raise FormError("form does not live on the map's target chart")
    jac = m.jacobian()
    sub = m.substitution()
    memo: dict = {}
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for idx, c in a.coeffs.items():
        cpull = E.substitute(c, sub, memo)
        for jdx in basis_indices(a.degree):
            mdet = minor_det(jac, idx, jdx)
            if mdet is ZERO:
                continue
            acc.setdefault(jdx, []).append(mul(cpull, mdet))
    return Form(m.source, a.degree, {i: add(*ts) for i, ts in acc.items()})


def interior_product(X: VectorField, a: Form) -> Form:
    if X.chart != a.chart:
        raise FormError("vector field and form live on different charts")
    if a.degree == 0:
        return Form(a.chart, 0)
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for idx, c in a.coeffs.items():
        for pos, i in enumerate(idx):
            xi = X.components[i]
            if xi is ZERO:
                continue
            rest = idx[:pos] + idx[pos + 1:]
            acc.setdefault(rest, []).append(mul((-1) ** pos, xi, c))
    return Form(a.chart, a.degree - 1, {i: add(*ts) for i, ts in acc.items()})


def lie_derivative(X: VectorField, a: Form) -> Form:
    """Coordinate formula: differentiate coefficients along X and each dx^i."""
    names = a.chart.coords
    result = Form(a.chart, a.degree, {idx: X.apply(c) for idx, c in a.coeffs.items()})
    dX = [Form(a.chart, 1, {(j,): E.differentiate(X.components[i], names[j]) for j in range(DIM)})
          for i in range(DIM)]
    for idx, c in a.coeffs.items():
        for pos, i in enumerate(idx):
            term = Form.function(a.chart, c)
            for q, jj in enumerate(idx):
                term = wedge(term, dX[i] if q == pos else Form.basis(a.chart, jj))
            result = result + term
    return result


def cartan_lie_derivative(X: VectorField, a: Form) -> Form:
    out = interior_product(X, exterior_derivative(a))
    if a.degree > 0:
        out = out + exterior_derivative(interior_product(X, a))
    return out


# ---------------------------------------------------------------------------
# complex frames
# ---------------------------------------------------------------------------

def dz(chart: Chart, name: str, conjugate: bool = False) -> Form:
    a, b = chart.pairing(name)
    return Form(chart, 1, {(chart.index(a),): ONE, (chart.index(b),): -1j if conjugate else 1j})


def dzbar(chart: Chart, name: str) -> Form:
    return dz(chart, name, conjugate=True)


def d_dz(chart: Chart, name: str, conjugate: bool = False) -> VectorField:
    """Complex vector field d/dz = (d/dx - i d/dy)/2 (or d/dzbar)."""
    a, b = chart.pairing(name)
    comps = [ZERO] * DIM
    comps[chart.index(a)] = E.const(0.5)
    comps[chart.index(b)] = E.const(0.5j if conjugate else -0.5j)
    return VectorField(chart, tuple(comps))


def i_ddbar(phi: Expr, chart: Chart) -> Form:
    """The real (1,1)-form i d d-bar phi = i sum phi_{z_a zbar_b} dz_a ^ dzbar_b."""
    out = Form(chart, 2)
    names = [p[0] for p in chart.complex_pairs]
    for za in names:
        fa = E.wirtinger(phi, za, chart)
        for zb in names:
            fab = E.wirtinger(fa, zb, chart, conjugate=True)
            if fab is ZERO:
                continue
            out = out + wedge(dz(chart, za), dzbar(chart, zb)).scale(mul(1j, fab))
    return out


# ---------------------------------------------------------------------------
# metric operations
# ---------------------------------------------------------------------------

def _entries(g) -> list[list[Expr]]:
    return [[as_expr(v) for v in row] for row in (g.entries if hasattr(g, "entries") else g)]


class _MetricData:
    """Inverse, determinant and volume factor of a metric, built once."""

    _cache: dict = {}

    def __init__(self, entries):
        self.g = entries
        self.ginv, self.det = inverse(entries)
        self.sqrt_abs_det = E.sqrt(E.abs_(self.det))
        self.sign = mul(self.det, E.power(E.abs_(self.det), -1))

    @classmethod
    def of(cls, g) -> "_MetricData":
        key = id(g)
        hit = cls._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        data = cls(_entries(g))
        if hasattr(g, "entries"):
            cls._cache[key] = (g, data)
        return data


def raise_indices(a: Form, g) -> dict[tuple[int, ...], Expr]:
    """Components a^I = sum_K det(g^{-1}[I, K]) a_K on increasing tuples."""
    data = _MetricData.of(g)
    out = {}
    for idx in basis_indices(a.degree):
        terms = [mul(minor_det(data.ginv, idx, kdx), c) for kdx, c in a.coeffs.items()]
        out[idx] = add(*terms)
    return out


def hodge_star(a: Form, g) -> Form:
    """Hodge star with a ^ *b = <a, b> vol and vol = sqrt|det g| dx^0123.

    With this convention ** = (-1)^{k(4-k)} sign(det g) on k-forms.
    """
    data = _MetricData.of(g)
    up = raise_indices(a, g)
    k = a.degree
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for idx, c in up.items():
        if c is ZERO:
            continue
        rest = tuple(j for j in range(DIM) if j not in idx)
        acc.setdefault(rest, []).append(mul(perm_sign(idx + rest), c))
    return Form(a.chart, DIM - k, {i: mul(data.sqrt_abs_det, add(*ts)) for i, ts in acc.items()})


def codifferential(a: Form, g) -> Form:
    """delta = -sign(det g) * d * on forms of positive degree in dimension 4."""
    if a.degree == 0:
        raise FormError("the codifferential of a function is zero by definition; pass a form of degree >= 1")
    data = _MetricData.of(g)
    return hodge_star(exterior_derivative(hodge_star(a, g)), g).scale(mul(-1, data.sign))


def inner_product_values(a: Form, b: Form, g, points, params=None) -> np.ndarray:
    """Pointwise <a, b> = sum_I a_I b^I (no conjugation)."""
    up = raise_indices(b, g)
    idx = basis_indices(a.degree)
    av = E.evaluate_batch([a[i] for i in idx], a.chart, points, params)
    bv = E.evaluate_batch([up[i] for i in idx], a.chart, points, params)
    return np.sum(av * bv, axis=1)


def metric_det_values(g, chart: Chart, points) -> np.ndarray:
    return E.evaluate_batch([det(_entries(g))], chart, points)[:, 0]


# ---------------------------------------------------------------------------
# almost complex structures on forms
# ---------------------------------------------------------------------------

def endo_on_form(a: Form, J) -> Form:
    """(J beta)(X1..Xk) = (-1)^k beta(J X1, ..., J Xk).

    J acts on vector components, (J X)^m = J[m][i] X^i. On 1-forms this is
    (J alpha)(X) = -alpha(J X).
    """
    mat = _entries(J)
    k = a.degree
    if k == 0:
        return a
    s = (-1) ** k
    acc: dict[tuple[int, ...], list[Expr]] = {}
    for kdx, c in a.coeffs.items():
        for idx in basis_indices(k):
            m = minor_det(mat, kdx, idx)
            if m is ZERO:
                continue
            acc.setdefault(idx, []).append(mul(s, c, m))
    return Form(a.chart, k, {i: add(*ts) for i, ts in acc.items()})


def check_almost_complex(J, chart: Chart, points, tol: float = 1e-9) -> float:
    """Max residual of J^2 + Id at the points; raises FormError beyond ``tol``."""
    mat = _entries(J)
    vals = E.evaluate_batch([x for row in mat for x in row], chart, points).reshape(-1, DIM, DIM)
    res = float(np.max(np.abs(vals @ vals + np.eye(DIM)))) if len(vals) else 0.0
    if res > tol:
        raise FormError(f"J^2 = -Id fails with residual {res:.3e}")
    return res


def dc_operator(a: Form, J, points=None, tol: float = 1e-9) -> Form:
    """d^c = -J^{-1} d J, so that d^c psi = -(d psi) o J on functions.

    J acts on k-forms by ``endo_on_form``; its inverse there is (-1)^k J.
    When ``points`` are given, J^2 = -Id is checked at them first.
    """
    if points is not None:
        check_almost_complex(J, a.chart, points, tol)
    if a.degree >= DIM:
        return Form(a.chart, DIM)
    k1 = a.degree + 1
    return endo_on_form(exterior_derivative(endo_on_form(a, J)), J).scale((-1) ** (k1 + 1))


def ddc(a: Form, J, points=None, tol: float = 1e-9) -> Form:
    return exterior_derivative(dc_operator(a, J, points, tol))


def form_residual(a: Form, b: Form | None, points, params=None, scale=None) -> tuple[float, int]:
    """Max absolute coefficient difference and the index of the worst point."""
    diff = a if b is None else a - b
    vals = diff.evaluate(points, params)
    per_point = np.max(np.abs(vals), axis=1) if vals.shape[1] else np.zeros(len(vals))
    if scale is not None:
        per_point = per_point / scale
    if per_point.size == 0:
        return 0.0, -1
    k = int(np.argmax(per_point))
    return float(per_point[k]), k


def num_components(k: int) -> int:
    return comb(DIM, k)
