"""Almost para-hypercomplex, para-hyperhermitian and para-hyperkaehler structures.

Conventions:

* An endomorphism A acts on vector components, (AX)^i = A^i_j X^j.
* A 2-form Omega corresponds to the antisymmetric matrix M[a, b] = Omega(e_a, e_b).
* The fundamental forms are Omega_1(X, Y) = g(IX, Y), Omega_2 = g(SX, Y),
  Omega_3 = g(TX, Y), so M_1 = I^T G, and likewise for S and T.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import expr as E
from . import symmat
from .calculus import (
    DIM, Form, VectorField, basis_indices, codifferential, exterior_derivative, wedge,
)
from .expr import ZERO, Chart, Expr, add, mul
from .geometry import EndomorphismField, MetricField, Nijenhuis, covariant_derivative, Connection
from .report import Check, lower_bound_check, residual_check

FLAT_G = np.diag([1.0, 1.0, -1.0, -1.0])
STANDARD_J = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
# S: e0 -> e2, e1 -> -e3, e2 -> e0, e3 -> -e1 (columns are images)
FLAT_S = np.array([[0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
FLAT_T = STANDARD_J @ FLAT_S

NONDEGENERACY_MARGIN = 1e-6


class StructureError(ValueError):
    pass


class Classification(str, enum.Enum):
    INVALID = "Invalid"
    ALMOST_ONLY = "AlmostOnly"
    PARA_HYPERCOMPLEX = "ParaHypercomplex"
    PARA_HYPERHERMITIAN = "ParaHyperhermitian"
    LCPHK = "lcPHK"
    PHK = "PHK"

    def __str__(self) -> str:
        return self.value


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PHTriple:
    I: EndomorphismField
    S: EndomorphismField
    T: EndomorphismField

    @property
    def chart(self) -> Chart:
        return self.I.chart

    def algebra_residuals(self, points) -> dict[str, np.ndarray]:
        """Per-point residuals of I^2=-Id, S^2=T^2=Id, T=IS=-SI."""
        i, s, t = (A.values(points) for A in (self.I, self.S, self.T))
        eye = np.eye(DIM)
        m = lambda x: np.max(np.abs(x), axis=(1, 2))  # noqa: E731
        return {
            "I^2=-Id": m(i @ i + eye),
            "S^2=Id": m(s @ s - eye),
            "T^2=Id": m(t @ t - eye),
            "T=IS": m(t - i @ s),
            "IS=-SI": m(i @ s + s @ i),
        }

    def nijenhuis_residuals(self, points) -> dict[str, np.ndarray]:
        n = len(np.atleast_2d(points))
        return {name: np.max(np.abs(Nijenhuis(A).components(points)).reshape(n, -1), axis=1)
                for name, A in (("N_I", self.I), ("N_S", self.S), ("N_T", self.T))}


@dataclass(frozen=True, eq=False)
class PHStructure:
    g: MetricField
    triple: PHTriple

    @property
    def chart(self) -> Chart:
        return self.g.chart

    def compatibility_residuals(self, points) -> dict[str, np.ndarray]:
        """g(IX,IY)=g(X,Y), g(SX,SY)=-g(X,Y), g(TX,TY)=-g(X,Y) as matrix residuals."""
        g = self.g.values(points)
        out = {}
        for name, A, sign in (("g(I.,I.)=g", self.triple.I, 1), ("g(S.,S.)=-g", self.triple.S, -1),
                              ("g(T.,T.)=-g", self.triple.T, -1)):
            a = A.values(points)
            out[name] = np.max(np.abs(np.swapaxes(a, 1, 2) @ g @ a - sign * g), axis=(1, 2))
        return out


@dataclass(frozen=True, eq=False)
class FormTriple:
    omega1: Form
    omega2: Form
    omega3: Form
    theta: Form | None = None

    @property
    def chart(self) -> Chart:
        return self.omega1.chart

    @property
    def omegas(self) -> tuple[Form, Form, Form]:
        return (self.omega1, self.omega2, self.omega3)

    def with_theta(self, theta: Form | None) -> "FormTriple":
        return FormTriple(self.omega1, self.omega2, self.omega3, theta)

    def lee_form(self) -> Form:
        return self.theta if self.theta is not None else lee_form_solve(self.omega2)


# ---------------------------------------------------------------------------
# matrices of forms
# ---------------------------------------------------------------------------

def form_matrix(omega: Form) -> list[list[Expr]]:
    """Antisymmetric matrix M[a][b] = Omega(e_a, e_b) of a 2-form."""
    if omega.degree != 2:
        raise StructureError("expected a 2-form")
    m = [[ZERO] * DIM for _ in range(DIM)]
    for (a, b), c in omega.coeffs.items():
        m[a][b] = c
        m[b][a] = mul(-1, c)
    return m


def matrix_form(chart: Chart, m) -> Form:
    """2-form with coefficients M[a][b] for a < b (M assumed antisymmetric)."""
    return Form(chart, 2, {(a, b): m[a][b] for a, b in basis_indices(2)})


def form_of_endomorphism(g: MetricField, A: EndomorphismField) -> Form:
    """Omega(X, Y) = g(AX, Y), i.e. M = A^T G."""
    m = symmat.matmul(symmat.transpose(A.as_lists()), [list(r) for r in g.entries])
    return matrix_form(g.chart, m)


def fundamental_forms(s: PHStructure) -> FormTriple:
    t = s.triple
    return FormTriple(form_of_endomorphism(s.g, t.I), form_of_endomorphism(s.g, t.S),
                      form_of_endomorphism(s.g, t.T))


def type_20_residual(omega: Form, I: EndomorphismField, points) -> np.ndarray:
    """Per-point residual of Omega(IX, Y) = i Omega(X, Y), i.e. I^T M - i M = 0."""
    m = omega.evaluate(points)
    mats = np.zeros((len(m), DIM, DIM), dtype=complex)
    for k, (a, b) in enumerate(basis_indices(2)):
        mats[:, a, b] = m[:, k]
        mats[:, b, a] = -m[:, k]
    iv = I.values(points)
    return np.max(np.abs(np.swapaxes(iv, 1, 2) @ mats - 1j * mats), axis=(1, 2))


# ---------------------------------------------------------------------------
# residual helpers
# ---------------------------------------------------------------------------

def _top(form: Form, points) -> np.ndarray:
    """Coefficient of dx^0123 of a 4-form, per point."""
    return form.evaluate(points)[:, 0]


def _scale(t: FormTriple, points) -> np.ndarray:
    """Pointwise scale max(1, |Omega_2|_inf)."""
    vals = np.abs(t.omega2.evaluate(points))
    return np.maximum(1.0, vals.max(axis=1) if vals.shape[1] else 0.0)


def _max_abs(vals: np.ndarray) -> np.ndarray:
    return np.max(np.abs(vals), axis=1) if vals.shape[1] else np.zeros(len(vals))


def verify_phe(t: FormTriple, points, tol: float = 1e-9) -> list[Check]:
    """Residual checks for the identities characterizing a para-hyperhermitian triple.

    4-form residuals are divided by s^2 and 3-form residuals by s, where
    s = max(1, |Omega_2|_inf) pointwise.
    """
    points = np.atleast_2d(points)
    s = _scale(t, points)
    o1, o2, o3 = t.omegas
    sq = {k: _top(wedge(a, b), points) for k, (a, b) in
          {"11": (o1, o1), "22": (o2, o2), "33": (o3, o3), "12": (o1, o2), "13": (o1, o3), "23": (o2, o3)}.items()}
    checks = [
        residual_check("phe: -Omega1^2 = Omega2^2", np.abs(sq["11"] + sq["22"]) / s**2, points, tol),
        residual_check("phe: Omega2^2 = Omega3^2", np.abs(sq["22"] - sq["33"]) / s**2, points, tol),
        residual_check("phe: Omega1^Omega2 = 0", np.abs(sq["12"]) / s**2, points, tol),
        residual_check("phe: Omega1^Omega3 = 0", np.abs(sq["13"]) / s**2, points, tol),
        residual_check("phe: Omega2^Omega3 = 0", np.abs(sq["23"]) / s**2, points, tol),
    ]
    margin = np.abs(sq["22"]) / s**2
    k = int(np.argmin(margin))
    checks.append(lower_bound_check("phe: nondegeneracy margin min|Omega2^2/vol|", float(margin[k]),
                                    NONDEGENERACY_MARGIN, tol, points[k].tolist()))
    theta = t.lee_form()
    for n, om in enumerate(t.omegas, 1):
        res = exterior_derivative(om) - wedge(theta, om)
        checks.append(residual_check(f"phe: dOmega{n} = theta^Omega{n}", _max_abs(res.evaluate(points)) / s,
                                     points, tol))
    return checks


def algebraic_phe_ok(checks: list[Check]) -> bool:
    return all(c.passed for c in checks if "theta" not in c.name)


# ---------------------------------------------------------------------------
# Lee forms
# ---------------------------------------------------------------------------

def _wedge_matrix(omega: Form) -> list[list[Expr]]:
    """L[J][i] = coefficient of the 3-form index J in dx^i ^ Omega."""
    idx3 = basis_indices(3)
    cols = []
    for i in range(DIM):
        w = wedge(Form.basis(omega.chart, i), omega)
        cols.append([w[j] for j in idx3])
    return [[cols[i][r] for i in range(DIM)] for r in range(len(idx3))]


def lee_form_solve(omega: Form, points=None) -> Form:
    """The unique 1-form theta with theta ^ Omega = d Omega, in closed form.

    When ``points`` are given, nondegeneracy of Omega is checked there first.
    """
    if points is not None:
        lee_form_values(omega, points)
    L = _wedge_matrix(omega)
    Linv, _ = symmat.inverse(L)
    rhs = exterior_derivative(omega).component_list()
    comps = symmat.matvec(Linv, rhs)
    return Form(omega.chart, 1, {(i,): c for i, c in enumerate(comps)})


def lee_form_values(omega: Form, points) -> np.ndarray:
    """Pointwise numeric solve of theta ^ Omega = d Omega; array (n, 4)."""
    L = _wedge_matrix(omega)
    flat = [x for row in L for x in row]
    lv = E.evaluate_batch(flat, omega.chart, points).reshape(-1, DIM, DIM)
    rhs = exterior_derivative(omega).evaluate(points)
    sq = _top(wedge(omega, omega), points)
    scale = np.maximum(1.0, _max_abs(omega.evaluate(points)))
    if np.any(np.abs(sq) / scale**2 <= NONDEGENERACY_MARGIN * 1e-3):
        raise StructureError("2-form is degenerate at a sample point")
    return np.linalg.solve(lv, rhs[..., None])[..., 0]


def _compose(alpha: Form, A: EndomorphismField) -> Form:
    """(alpha o A)(X) = alpha(AX): components sum_a alpha_a A^a_b."""
    ent = A.as_lists()
    comps = [add(*(mul(alpha[(a,)], ent[a][b]) for a in range(DIM))) for b in range(DIM)]
    return Form(alpha.chart, 1, {(b,): c for b, c in enumerate(comps)})


def lee_forms_via_codifferential(s: PHStructure) -> tuple[Form, Form, Form]:
    """theta_l = delta Omega_l o A_l^{-1} for (A_1, A_2, A_3) = (I, S, T).

    Since S and T are involutions this is delta Omega o S and delta Omega o T,
    while the first form uses I^{-1} = -I. With this choice all three agree
    with the theta of dOmega_l = theta ^ Omega_l.
    """
    ft = fundamental_forms(s)
    t = s.triple
    inverses = (t.I.scale(-1), t.S, t.T)
    return tuple(_compose(codifferential(om, s.g), A) for om, A in zip(ft.omegas, inverses))


def integrability_report(s: PHStructure, points, tol: float = 1e-8) -> list[Check]:
    """Nijenhuis residuals of I, S, T and the residual of theta_1 = theta_2 = theta_3."""
    points = np.atleast_2d(points)
    checks = [residual_check(f"integrability: {k} = 0", v, points, tol)
              for k, v in s.triple.nijenhuis_residuals(points).items()]
    th = [f.evaluate(points) for f in lee_forms_via_codifferential(s)]
    res = np.maximum(np.max(np.abs(th[0] - th[1]), axis=1), np.max(np.abs(th[1] - th[2]), axis=1))
    checks.append(residual_check("integrability: theta1 = theta2 = theta3", res, points, tol))
    return checks


# ---------------------------------------------------------------------------
# reconstruction and classification
# ---------------------------------------------------------------------------

def reconstruct_structure(o1: Form, o2: Form, o3: Form, points, tol: float = 1e-9) -> PHStructure:
    """Recover (g, I, S, T) from three 2-forms.

    S = M1^{-1} M3, G = S^T M2 (symmetrized), I = -G^{-1} M1, T = IS.
    The algebraic identities are checked at ``points`` first.
    """
    t = FormTriple(o1, o2, o3, Form(o1.chart, 1))
    for c in verify_phe(t, points, tol):
        if "theta" in c.name:
            continue
        if not c.passed:
            raise StructureError(f"{c.name} violated (residual {c.max_residual:.3e})")
    chart = o1.chart
    m1, m2, m3 = (form_matrix(o) for o in (o1, o2, o3))
    m1inv, _ = symmat.inverse(m1)
    S = symmat.matmul(m1inv, m3)
    G = symmat.matmul(symmat.transpose(S), m2)
    g = MetricField.symmetrized(chart, G)
    ginv, _ = symmat.inverse([list(r) for r in g.entries])
    I = symmat.scale(-1, symmat.matmul(ginv, m1))
    T = symmat.matmul(I, S)
    triple = PHTriple(EndomorphismField(chart, I), EndomorphismField(chart, S), EndomorphismField(chart, T))
    res = triple.algebra_residuals(points)["S^2=Id"]
    if res.size and float(res.max()) > max(tol, 1e-8) * 10:
        raise StructureError(f"reconstructed S fails S^2 = Id (residual {float(res.max()):.3e})")
    return PHStructure(g, triple)


def classify(obj, points, tol: float = 1e-9) -> Classification:
    """Invalid / AlmostOnly / ParaHypercomplex / ParaHyperhermitian / lcPHK / PHK."""
    points = np.atleast_2d(points)
    if isinstance(obj, PHTriple):
        alg = obj.algebra_residuals(points)
        if max(float(v.max()) for v in alg.values()) >= tol:
            return Classification.INVALID
        nij = obj.nijenhuis_residuals(points)
        if max(float(v.max()) for v in nij.values()) >= tol:
            return Classification.ALMOST_ONLY
        return Classification.PARA_HYPERCOMPLEX
    if isinstance(obj, PHStructure):
        alg = {**obj.triple.algebra_residuals(points), **obj.compatibility_residuals(points)}
        if max(float(v.max()) for v in alg.values()) >= tol:
            return Classification.INVALID
        obj = fundamental_forms(obj)
    if not isinstance(obj, FormTriple):
        raise TypeError(f"cannot classify a {type(obj).__name__}")
    try:
        checks = verify_phe(obj, points, tol)
    except (StructureError, E.DomainError, np.linalg.LinAlgError):
        return Classification.INVALID
    if not algebraic_phe_ok(checks):
        return Classification.INVALID
    if not all(c.passed for c in checks):
        return Classification.ALMOST_ONLY
    theta = obj.lee_form()
    if float(_max_abs(theta.evaluate(points)).max()) < tol:
        return Classification.PHK
    if float(_max_abs(exterior_derivative(theta).evaluate(points)).max()) < tol:
        return Classification.LCPHK
    return Classification.PARA_HYPERHERMITIAN


def conformal_rescale(t: FormTriple, u: Expr) -> FormTriple:
    """Omega_l -> e^{2u} Omega_l and theta -> theta + 2 du."""
    if not E.as_expr(u).is_real:
        raise StructureError("the conformal factor must be real-valued")
    f = E.exp(mul(2, u))
    du = exterior_derivative(Form.function(t.chart, u))
    return FormTriple(t.omega1.scale(f), t.omega2.scale(f), t.omega3.scale(f), t.lee_form() + du.scale(2))


# ---------------------------------------------------------------------------
# complex pairs
# ---------------------------------------------------------------------------

def to_complex_pair(t: PHTriple, p: float) -> tuple[EndomorphismField, EndomorphismField]:
    """I_1 = I, I_2 = -p I - sqrt(p^2 - 1) T."""
    if not abs(p) > 1:
        raise StructureError(f"|p| must exceed 1, got p = {p}")
    q = math.sqrt(p * p - 1)
    return t.I, t.I.scale(-p) - t.T.scale(q)


def from_complex_pair(I1: EndomorphismField, I2: EndomorphismField, points,
                      tol: float = 1e-9) -> tuple[PHTriple, float]:
    """Para-hypercomplex triple from two complex structures with I1 I2 + I2 I1 = 2p Id.

    I = I1, S = [I1, I2] / (2 sqrt(p^2-1)), T = IS = -(p I1 + I2) / sqrt(p^2-1).
    """
    a = (I1 @ I2 + I2 @ I1).values(points).real
    p_vals = a[:, 0, 0] / 2
    p = float(np.mean(p_vals))
    if float(np.max(np.abs(a - 2 * p * np.eye(DIM)))) > tol * max(1.0, abs(p)):
        raise StructureError("I1 I2 + I2 I1 is not a constant multiple of the identity")
    if not abs(p) > 1 + tol:
        regime = "hypercomplex" if abs(p) < 1 else "degenerate"
        raise StructureError(f"|p| = {abs(p):.6g} <= 1 ({regime} regime)")
    q = math.sqrt(p * p - 1)
    S = (I1 @ I2 - I2 @ I1).scale(1 / (2 * q))
    T = (I1.scale(p) + I2).scale(-1 / q)
    return PHTriple(I1, S, T), p


# ---------------------------------------------------------------------------
# Walker metrics and proper complex structures
# ---------------------------------------------------------------------------

def walker_metric(chart: Chart, a, b, c) -> MetricField:
    """Rows and columns ordered (x, y, u, v): [[0,0,1,0],[0,0,0,1],[1,0,a,c],[0,1,c,b]]."""
    a, b, c = (E.as_expr(v) for v in (a, b, c))
    return MetricField(chart, [[0, 0, 1, 0], [0, 0, 0, 1], [1, 0, a, c], [0, 1, c, b]])


def proper_complex_structure(g: MetricField, X: VectorField, Y: VectorField, points,
                             tol: float = 1e-9) -> EndomorphismField:
    """The g- and orientation-compatible J with JX = Y.

    Z and T solve g(X,Z)=1, g(Y,Z)=0, g(X,T)=0, g(Y,T)=1 with minimum
    coordinate norm; the orthogonal frame E_1..E_4 is then built from (X,Y,Z,T)
    and J is defined by J E_1 = E_2, J E_3 = E_4.
    """
    from .geometry import is_parallel_null  # local import keeps the module graph flat

    rep = is_parallel_null(g, X, points, Y, tol)
    if not rep["independent"]:
        raise StructureError("X and Y are not linearly independent")
    if not rep["null"]:
        raise StructureError(f"X, Y are not null (residual {rep['null_residual']:.3e})")
    if not rep["orthogonal"]:
        raise StructureError(f"X, Y are not orthogonal (residual {rep['orthogonal_residual']:.3e})")
    chart = g.chart
    A = [g.lower(X), g.lower(Y)]
    At = symmat.transpose(A)
    AAt_inv, _ = symmat.inverse(symmat.matmul(A, At))
    P = symmat.matmul(At, AAt_inv)  # 4x2
    Z = VectorField(chart, tuple(P[i][0] for i in range(DIM)))
    Tv = VectorField(chart, tuple(P[i][1] for i in range(DIM)))
    a, b, c = g(Z, Z), g(Tv, Tv), g(Z, Tv)
    half = E.const(0.5)
    E1 = X.scale(mul(half, add(1, mul(-1, a)))) + Z
    E2 = Y.scale(mul(half, add(1, mul(-1, b)))) + Tv - X.scale(c)
    E3 = X.scale(mul(-0.5, add(1, a))) + Z
    E4 = Y.scale(mul(-0.5, add(1, b))) + Tv - X.scale(c)
    frame = [[F.components[i] for F in (E1, E2, E3, E4)] for i in range(DIM)]
    finv, _ = symmat.inverse(frame)
    J0 = [[E.const(v) for v in row] for row in STANDARD_J]
    J = symmat.matmul(symmat.matmul(frame, J0), finv)
    return EndomorphismField(chart, J)


def kaehler_residual(g: MetricField, J: EndomorphismField, points) -> np.ndarray:
    """Per-point max |nabla J| for the Levi-Civita connection."""
    nab = covariant_derivative(Connection(g), J, points)
    return np.max(np.abs(nab).reshape(len(nab), -1), axis=1)


# ---------------------------------------------------------------------------
# flat model
# ---------------------------------------------------------------------------

def flat_structure(chart: Chart) -> PHStructure:
    """Left multiplication by split quaternions on R^4 with g = diag(1, 1, -1, -1)."""
    g = MetricField.diagonal(chart, [1, 1, -1, -1])
    mk = lambda m: EndomorphismField.constant(chart, m)  # noqa: E731
    return PHStructure(g, PHTriple(mk(STANDARD_J), mk(FLAT_S), mk(FLAT_T)))


def perturbed_structure(s: PHStructure, psi: Expr) -> PHStructure:
    """Rotate S into T by a position-dependent angle: S' = cos(psi) S + sin(psi) T, T' = IS'.

    The result is still an almost para-hyperhermitian structure for g, but
    S' is not integrable unless psi is constant along suitable directions.
    """
    t = s.triple
    S2 = t.S.scale(E.cos(psi)) + t.T.scale(E.sin(psi))
    return PHStructure(s.g, PHTriple(t.I, S2, t.I @ S2))
