"""Metrics, Levi-Civita connection, curvature and Nijenhuis tensors."""

import numpy as np
import pytest

from phgeom import expr as E
from phgeom.calculus import VectorField
from phgeom.geometry import (
    Connection, EndomorphismField, GeometryError, MetricField, Nijenhuis, covariant_derivative,
    curvature_tensors, is_parallel_null, lowered_riemann, nijenhuis,
)
from phgeom.structures import STANDARD_J, walker_metric
from randomexpr import PLAIN, random_expr, random_points

P = lambda s: E.parse_expression(s, PLAIN)  # noqa: E731

# a second complex structure anticommuting with STANDARD_J
K0 = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)


def random_split_metric(rng, eps=0.15):
    """diag(1, 1, -1, -1) plus a small symmetric random perturbation."""
    base = np.diag([1.0, 1.0, -1.0, -1.0])
    rows = [[E.const(base[i, j]) for j in range(4)] for i in range(4)]
    for i in range(4):
        for j in range(i, 4):
            bump = E.mul(eps, E.sin(random_expr(rng, 2)))
            rows[i][j] = E.add(rows[i][j], bump)
            rows[j][i] = rows[i][j]
    return MetricField(PLAIN, rows)


def rotated_structure(f):
    """A = cos f J0 + sin f K0, an almost complex structure for any function f."""
    c, s = E.cos(f), E.sin(f)
    return EndomorphismField(PLAIN, [[E.add(E.mul(c, STANDARD_J[i][j]), E.mul(s, K0[i][j])) for j in range(4)]
                                     for i in range(4)])


class TestMetric:
    def test_symmetry_enforced(self):
        with pytest.raises(GeometryError):
            MetricField(PLAIN, [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -1]])

    def test_symmetrized_is_symmetric(self):
        g = MetricField.symmetrized(PLAIN, [[P("x"), P("y*u"), 0, 0], [P("u*y + 1"), 1, 0, 0], [0, 0, -1, 0],
                                            [0, 0, 0, -1]])
        assert g.entries[0][1] is g.entries[1][0]

    def test_signature(self):
        g = walker_metric(PLAIN, P("sin(u)"), P("cos(v)"), P("u*v"))
        assert set(g.signature(random_points(np.random.default_rng(0), 5))) == {(2, 2)}

    def test_degenerate_metric_detected(self):
        g = MetricField.diagonal(PLAIN, [1, 1, -1, P("x")])
        with pytest.raises(GeometryError):
            g.check_nondegenerate(np.array([[0.0, 0.3, 0.1, 0.2]]))


class TestConnection:
    def test_metric_compatibility(self):
        rng = np.random.default_rng(1)
        g = random_split_metric(rng)
        pts = random_points(rng, 10)
        assert np.max(np.abs(covariant_derivative(Connection(g), g, pts))) < 1e-12

    def test_christoffel_symmetric(self):
        rng = np.random.default_rng(2)
        gam = Connection(random_split_metric(rng)).gamma(random_points(rng, 5))
        np.testing.assert_allclose(gam, np.swapaxes(gam, 2, 3), atol=1e-14)

    def test_christoffel_finite_difference(self):
        """d_a Gamma from the symbolic second derivatives against central differences."""
        rng = np.random.default_rng(3)
        g = random_split_metric(rng)
        conn = Connection(g)
        p = random_points(rng, 1)
        _, dgam = conn.gamma_and_derivative(p)
        h = 1e-5
        for a in range(4):
            e = np.zeros((1, 4))
            e[0, a] = h
            fd = (conn.gamma(p + e) - conn.gamma(p - e)) / (2 * h)
            np.testing.assert_allclose(dgam[0, a], fd[0], atol=1e-7)


class TestCurvature:
    def test_hyperbolic_block(self):
        """g = dx^2 + dy^2 - du^2 - e^{2u} dv^2: Ric = -du^2 - e^{2u} dv^2."""
        g = MetricField.diagonal(PLAIN, [1, 1, -1, E.mul(-1, P("exp(2*u)"))])
        pts = random_points(np.random.default_rng(4), 6)
        _, ric = curvature_tensors(g, pts)
        expected = np.zeros((len(pts), 4, 4))
        expected[:, 2, 2] = -1
        expected[:, 3, 3] = -np.exp(2 * pts[:, 2])
        np.testing.assert_allclose(ric.real, expected, atol=1e-12)

    def test_riemann_symmetries(self):
        rng = np.random.default_rng(5)
        g = random_split_metric(rng)
        R = lowered_riemann(g, random_points(rng, 6))
        np.testing.assert_allclose(R, -np.swapaxes(R, 1, 2), atol=1e-10)
        np.testing.assert_allclose(R, -np.swapaxes(R, 3, 4), atol=1e-10)
        np.testing.assert_allclose(R, R.transpose(0, 3, 4, 1, 2), atol=1e-10)
        bianchi = R + R.transpose(0, 1, 3, 4, 2) + R.transpose(0, 1, 4, 2, 3)
        assert np.max(np.abs(bianchi)) < 1e-10

    def test_flat_metric(self):
        g = MetricField.diagonal(PLAIN, [1, 1, -1, -1])
        riem, _ = curvature_tensors(g, random_points(np.random.default_rng(6), 3))
        assert np.max(np.abs(riem)) == 0


class TestWalker:
    @pytest.mark.parametrize("a, b, c", [("sin(u)", "cos(v)", "u*v"), ("u^2 + v", "exp(u*v)", "sin(u + v)")])
    def test_parallel_null_pair(self, a, b, c):
        g = walker_metric(PLAIN, P(a), P(b), P(c))
        X, Y = VectorField.coordinate(PLAIN, "x"), VectorField.coordinate(PLAIN, "y")
        rep = is_parallel_null(g, X, random_points(np.random.default_rng(7), 20), Y)
        assert rep["parallel"] and rep["null"] and rep["orthogonal"] and rep["independent"]

    def test_non_parallel_field_detected(self):
        g = walker_metric(PLAIN, P("sin(u)"), P("cos(v)"), P("u*v"))
        U = VectorField.coordinate(PLAIN, "u")
        rep = is_parallel_null(g, U, random_points(np.random.default_rng(8), 10))
        assert not rep["parallel"] and not rep["null"]


class TestNijenhuis:
    def test_constant_structure_integrable(self):
        A = EndomorphismField.constant(PLAIN, STANDARD_J)
        assert Nijenhuis(A).max_norm(random_points(np.random.default_rng(9), 4))[0] == 0

    def test_rotated_structure_square(self):
        A = rotated_structure(P("x*y + u"))
        assert nijenhuis(A, random_points(np.random.default_rng(10), 5)).check_square(
            random_points(np.random.default_rng(10), 5)) == -1

    def test_symbolic_matches_numeric(self):
        A = rotated_structure(P("x*y + sin(u)"))
        n = Nijenhuis(A)
        pts = random_points(np.random.default_rng(11), 6)
        comps = n.components(pts)
        assert np.max(np.abs(comps)) > 0.1
        for i in range(4):
            for j in range(4):
                sym = n(VectorField.coordinate(PLAIN, i), VectorField.coordinate(PLAIN, j))
                np.testing.assert_allclose(sym.evaluate(pts), comps[:, :, i, j], atol=1e-12)

    def test_antisymmetric(self):
        comps = Nijenhuis(rotated_structure(P("v^2 - x"))).components(random_points(np.random.default_rng(12), 4))
        np.testing.assert_allclose(comps, -np.swapaxes(comps, 2, 3), atol=1e-13)

    def test_square_check_rejects(self):
        A = EndomorphismField.constant(PLAIN, 2 * np.eye(4))
        with pytest.raises(GeometryError):
            nijenhuis(A, np.zeros((1, 4)))
