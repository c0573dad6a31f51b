"""Pseudo-Riemannian tensor calculus over chart-based fields.

Metric and endomorphism entries are symbolic, and so are their first and
second derivatives. The metric inverse and everything built from it
(Christoffel symbols, curvature, covariant derivatives) is computed
numerically per sample point.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import expr as E
from . import symmat
from .calculus import DIM, VectorField, lie_bracket
from .expr import ZERO, Chart, Expr, add, as_expr, mul

__all__ = [
    "Connection", "EndomorphismField", "GeometryError", "MetricField", "Nijenhuis",
    "christoffel", "covariant_derivative", "curvature_tensors", "is_parallel_null",
    "lie_bracket", "lowered_riemann", "nijenhuis",
]


class GeometryError(ValueError):
    pass


def _matrix(entries) -> tuple[tuple[Expr, ...], ...]:
    rows = tuple(tuple(as_expr(v) for v in row) for row in entries)
    if len(rows) != DIM or any(len(r) != DIM for r in rows):
        raise GeometryError("expected a 4x4 matrix")
    return rows


class _MatrixField:
    chart: Chart
    entries: tuple[tuple[Expr, ...], ...]

    def flat_entries(self) -> list[Expr]:
        return [x for row in self.entries for x in row]

    def values(self, points, params=None) -> np.ndarray:
        """Complex array (n, 4, 4)."""
        return E.evaluate_batch(self.flat_entries(), self.chart, points, params).reshape(-1, DIM, DIM)

    @cached_property
    def _first(self) -> list[Expr]:
        names = self.chart.coords
        out = []
        for a in range(DIM):
            out.extend(E.differentiate_many(self.flat_entries(), names[a]))
        return out

    @cached_property
    def _second(self) -> list[Expr]:
        names = self.chart.coords
        first = self._first
        out = []
        for a in range(DIM):
            block = first[a * DIM * DIM:(a + 1) * DIM * DIM]
            for b in range(DIM):
                out.extend(E.differentiate_many(block, names[b]))
        return out

    def derivative_values(self, points, params=None) -> np.ndarray:
        """(n, a, i, j) = d_a M_ij."""
        return E.evaluate_batch(self._first, self.chart, points, params).reshape(-1, DIM, DIM, DIM)

    def second_derivative_values(self, points, params=None) -> np.ndarray:
        """(n, a, b, i, j) = d_b d_a M_ij."""
        return E.evaluate_batch(self._second, self.chart, points, params).reshape(-1, DIM, DIM, DIM, DIM)

    def map_entries(self, fn):
        return type(self)(self.chart, tuple(tuple(fn(x) for x in row) for row in self.entries))


@dataclass(frozen=True, eq=False)
class MetricField(_MatrixField):
    """Symmetric 4x4 matrix g_ij of expressions."""

    chart: Chart
    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = _matrix(self.entries)
        for i in range(DIM):
            for j in range(i):
                if rows[i][j] is not rows[j][i]:
                    raise GeometryError(f"metric entries ({i},{j}) and ({j},{i}) differ")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def diagonal(cls, chart: Chart, diag) -> "MetricField":
        return cls(chart, tuple(tuple(as_expr(diag[i]) if i == j else ZERO for j in range(DIM)) for i in range(DIM)))

    @classmethod
    def symmetrized(cls, chart: Chart, entries) -> "MetricField":
        """Build from any square matrix by taking (M + M^T)/2."""
        m = _matrix(entries)
        out = [list(row) for row in m]
        for i in range(DIM):
            for j in range(i + 1, DIM):
                if m[i][j] is not m[j][i]:
                    out[i][j] = out[j][i] = mul(0.5, add(m[i][j], m[j][i]))
        return cls(chart, out)

    def __call__(self, X: VectorField, Y: VectorField) -> Expr:
        return add(*(mul(self.entries[i][j], X.components[i], Y.components[j])
                     for i in range(DIM) for j in range(DIM)))

    def lower(self, X: VectorField) -> list[Expr]:
        """Components of the covector g(X, .)."""
        return [add(*(mul(X.components[i], self.entries[i][j]) for i in range(DIM))) for j in range(DIM)]

    def check_nondegenerate(self, points, threshold: float = 1e-8) -> float:
        """Smallest |det| of the row-scaled matrix; raises below ``threshold``."""
        vals = self.values(points).real
        scale = np.max(np.abs(vals), axis=2, keepdims=True)
        scale[scale == 0] = 1.0
        dets = np.abs(np.linalg.det(vals / scale))
        worst = float(np.min(dets)) if len(dets) else 1.0
        if worst <= threshold:
            raise GeometryError(f"metric is degenerate at a sample point (|det| = {worst:.3e})")
        return worst

    def signature(self, points) -> list[tuple[int, int]]:
        out = []
        for m in self.values(points).real:
            ev = np.linalg.eigvalsh(0.5 * (m + m.T))
            out.append((int(np.sum(ev > 0)), int(np.sum(ev < 0))))
        return out


@dataclass(frozen=True, eq=False)
class EndomorphismField(_MatrixField):
    """4x4 matrix A^i_j acting on vector components: (AX)^i = A^i_j X^j."""

    chart: Chart
    entries: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", _matrix(self.entries))

    @classmethod
    def identity(cls, chart: Chart) -> "EndomorphismField":
        return cls(chart, symmat.identity(DIM))

    @classmethod
    def constant(cls, chart: Chart, matrix) -> "EndomorphismField":
        return cls(chart, [[E.const(complex(v)) for v in row] for row in np.asarray(matrix)])

    def __matmul__(self, other: "EndomorphismField") -> "EndomorphismField":
        return EndomorphismField(self.chart, symmat.matmul([list(r) for r in self.entries],
                                                            [list(r) for r in other.entries]))

    def __add__(self, other: "EndomorphismField") -> "EndomorphismField":
        return EndomorphismField(self.chart, symmat.madd([list(r) for r in self.entries],
                                                          [list(r) for r in other.entries]))

    def __sub__(self, other: "EndomorphismField") -> "EndomorphismField":
        return self + other.scale(-1)

    def scale(self, c) -> "EndomorphismField":
        return self.map_entries(lambda x: mul(c, x))

    def transpose(self) -> "EndomorphismField":
        return EndomorphismField(self.chart, symmat.transpose([list(r) for r in self.entries]))

    def apply(self, X: VectorField) -> VectorField:
        return VectorField(self.chart, tuple(symmat.matvec([list(r) for r in self.entries], X.components)))

    def as_lists(self) -> list[list[Expr]]:
        return [list(r) for r in self.entries]


# ---------------------------------------------------------------------------
# Levi-Civita connection
# ---------------------------------------------------------------------------

class Connection:
    """Levi-Civita connection of a metric, evaluated numerically per point.

    ``gamma(points)[n, k, i, j]`` is Gamma^k_{ij}; it is symmetric in (i, j).
    """

    def __init__(self, g: MetricField):
        self.metric = g
        self.chart = g.chart

    def _parts(self, points):
        g = self.metric.values(points)
        dg = self.metric.derivative_values(points)
        ginv = np.linalg.inv(g)
        # C[n, l, i, j] = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
        c = 0.5 * (np.einsum("nilj->nlij", dg) + np.einsum("njli->nlij", dg) - dg)
        return g, dg, ginv, c

    def gamma(self, points) -> np.ndarray:
        _, _, ginv, c = self._parts(points)
        return np.einsum("nkl,nlij->nkij", ginv, c)

    def gamma_and_derivative(self, points):
        """Gamma[n,k,i,j] and dGamma[n,a,k,i,j] = d_a Gamma^k_{ij}."""
        g, dg, ginv, c = self._parts(points)
        ddg = self.metric.second_derivative_values(points)  # [n, a, b, i, j] = d_b d_a g_ij
        gam = np.einsum("nkl,nlij->nkij", ginv, c)
        # d_b C_lij
        dC = 0.5 * (np.einsum("niblj->nblij", ddg) + np.einsum("njbli->nblij", ddg) - np.einsum("nlbij->nblij", ddg))
        dginv = -np.einsum("nkp,nbpq,nql->nbkl", ginv, dg, ginv)
        dgam = np.einsum("nbkl,nlij->nbkij", dginv, c) + np.einsum("nkl,nblij->nbkij", ginv, dC)
        return gam, dgam


def christoffel(g: MetricField) -> Connection:
    return Connection(g)


def curvature_tensors(g: MetricField, points):
    """Return (Riemann, Ricci) at the points.

    Riemann[n, r, s, m, v] = R^r_{s m v}
        = d_m G^r_{v s} - d_v G^r_{m s} + G^r_{m l} G^l_{v s} - G^r_{v l} G^l_{m s};
    Ricci[n, s, v] = R^r_{s r v}.
    """
    conn = Connection(g)
    gam, dgam = conn.gamma_and_derivative(points)
    riem = (np.einsum("nmrvs->nrsmv", dgam) - np.einsum("nvrms->nrsmv", dgam)
            + np.einsum("nrml,nlvs->nrsmv", gam, gam) - np.einsum("nrvl,nlms->nrsmv", gam, gam))
    ricci = np.einsum("nrsrv->nsv", riem)
    return riem, ricci


def lowered_riemann(g: MetricField, points) -> np.ndarray:
    riem, _ = curvature_tensors(g, points)
    return np.einsum("nrk,nksmv->nrsmv", g.values(points), riem)


def covariant_derivative(conn: Connection, t, points) -> np.ndarray:
    """Numeric covariant derivative.

    * VectorField X: out[n, i, k] = nabla_i X^k
    * EndomorphismField A: out[n, i, k, j] = nabla_i A^k_j
    * MetricField h: out[n, i, j, k] = nabla_i h_jk
    """
    if t.chart != conn.chart:
        raise GeometryError("field and connection live on different charts")
    gam = conn.gamma(points)
    if isinstance(t, VectorField):
        names = t.chart.coords
        comps = t.components
        val = E.evaluate_batch(list(comps), t.chart, points)
        dval = E.evaluate_batch([E.differentiate(c, names[i]) for i in range(DIM) for c in comps],
                                t.chart, points).reshape(-1, DIM, DIM)
        return dval + np.einsum("nkij,nj->nik", gam, val)
    if isinstance(t, MetricField):
        val = t.values(points)
        dval = t.derivative_values(points)
        return dval - np.einsum("nmij,nmk->nijk", gam, val) - np.einsum("nmik,njm->nijk", gam, val)
    if isinstance(t, EndomorphismField):
        val = t.values(points)
        dval = t.derivative_values(points)
        return dval + np.einsum("nkim,nmj->nikj", gam, val) - np.einsum("nmij,nkm->nikj", gam, val)
    raise TypeError(f"cannot differentiate a {type(t).__name__}")


# ---------------------------------------------------------------------------
# Nijenhuis tensor
# ---------------------------------------------------------------------------

class Nijenhuis:
    """N_A(X,Y) = A^2[AX,AY] + [X,Y] - A[AX,Y] - A[X,AY].

    Calling the object on two vector fields gives the symbolic bracket
    expression; ``components`` evaluates N^k_{ij} = N_A(d_i, d_j)^k at points.
    """

    def __init__(self, A: EndomorphismField):
        self.A = A
        self.A2 = A @ A

    def __call__(self, X: VectorField, Y: VectorField) -> VectorField:
        A, A2 = self.A, self.A2
        AX, AY = A.apply(X), A.apply(Y)
        return (A2.apply(lie_bracket(AX, AY)) + lie_bracket(X, Y)
                - A.apply(lie_bracket(AX, Y)) - A.apply(lie_bracket(X, AY)))

    def check_square(self, points, tol: float = 1e-9) -> int:
        """Return +1 or -1 when A^2 = +-Id at the points; raise otherwise."""
        sq = self.A2.values(points)
        eye = np.eye(DIM)
        for s in (1, -1):
            if float(np.max(np.abs(sq - s * eye))) <= tol:
                return s
        raise GeometryError("A^2 is neither +Id nor -Id at the sample points")

    def components(self, points) -> np.ndarray:
        """Array (n, k, i, j)."""
        a = self.A.values(points)
        da = self.A.derivative_values(points)  # [n, c, m, j] = d_c A^m_j
        a2 = np.einsum("nkm,nmj->nkj", a, a)
        # [AX_i, AY_j]^m = A^c_i d_c A^m_j - A^c_j d_c A^m_i
        t = np.einsum("nci,ncmj->nmij", a, da)
        br = t - np.einsum("nmij->nmji", t)
        out = np.einsum("nkm,nmij->nkij", a2, br)
        # - A[A d_i, d_j] - A[d_i, A d_j] = A^k_m d_j A^m_i - A^k_m d_i A^m_j
        out += np.einsum("nkm,njmi->nkij", a, da) - np.einsum("nkm,nimj->nkij", a, da)
        return out

    def max_norm(self, points) -> tuple[float, int]:
        comps = np.abs(self.components(points)).reshape(len(np.atleast_2d(points)), -1)
        per = comps.max(axis=1)
        k = int(np.argmax(per))
        return float(per[k]), k


def nijenhuis(A: EndomorphismField, points=None, tol: float = 1e-9) -> Nijenhuis:
    n = Nijenhuis(A)
    if points is not None:
        n.check_square(points, tol)
    return n


def is_parallel_null(g: MetricField, X: VectorField, points, Y: VectorField | None = None,
                     tol: float = 1e-9) -> dict:
    """Residuals of nabla X and g(X, X); with Y also orthogonality and independence."""
    conn = Connection(g)
    rep: dict = {}
    nab = covariant_derivative(conn, X, points)
    rep["parallel_residual"] = float(np.max(np.abs(nab)))
    gxx = E.evaluate_batch([g(X, X)], g.chart, points)[:, 0]
    rep["null_residual"] = float(np.max(np.abs(gxx)))
    if Y is not None:
        nab_y = covariant_derivative(conn, Y, points)
        rep["parallel_residual"] = max(rep["parallel_residual"], float(np.max(np.abs(nab_y))))
        gyy = E.evaluate_batch([g(Y, Y), g(X, Y)], g.chart, points)
        rep["null_residual"] = max(rep["null_residual"], float(np.max(np.abs(gyy[:, 0]))))
        rep["orthogonal_residual"] = float(np.max(np.abs(gyy[:, 1])))
        xv, yv = X.evaluate(points), Y.evaluate(points)
        sv = [np.linalg.svd(np.stack([a, b]), compute_uv=False)[-1] for a, b in zip(xv, yv)]
        rep["independence_margin"] = float(np.min(sv))
    rep["parallel"] = rep["parallel_residual"] < tol
    rep["null"] = rep["null_residual"] < tol
    if Y is not None:
        rep["orthogonal"] = rep["orthogonal_residual"] < tol
        rep["independent"] = rep["independence_margin"] > 1e-8
    return rep

