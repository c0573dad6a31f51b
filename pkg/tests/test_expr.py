"""Expression DSL: parsing, printing, differentiation and evaluation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phgeom import expr as E
from randomexpr import PLAIN, random_expr, random_points

ZW = E.Chart(("x", "y", "u", "v"), (("z", "x", "y"), ("w", "u", "v")))


def central_difference(e, chart, point, k, h=1e-5):
    p, m = np.array(point, float), np.array(point, float)
    p[k] += h
    m[k] -= h
    return (E.evaluate(e, chart, p) - E.evaluate(e, chart, m)) / (2 * h)


class TestParser:
    def test_sine_of_product(self):
        e = E.parse_expression("sin(2*pi*x)", ZW)
        assert isinstance(e, E.Func) and e.name == "sin"
        assert isinstance(e.arg, E.Mul)

    def test_complex_coordinate_expands(self):
        z = E.parse_expression("z", ZW)
        assert z is E.add(E.coord("x"), E.mul(1j, E.coord("y")))
        assert E.evaluate(E.parse_expression("z*conj(z)", ZW), ZW, [3, 4, 0, 0]) == pytest.approx(25)

    def test_constants(self):
        assert E.evaluate(E.parse_expression("exp(i*pi)", ZW), ZW, [0] * 4) == pytest.approx(-1)

    @pytest.mark.parametrize("text, offset", [("x +", 3), ("sin(x", 5), ("x*/y", 2), ("(x", 2), ("x^y", 2)])
    def test_syntax_error_offsets(self, text, offset):
        with pytest.raises(E.ParseError) as info:
            E.parse_expression(text, ZW)
        assert info.value.offset == offset

    def test_offset_counts_bytes(self):
        with pytest.raises(E.ParseError) as info:
            E.parse_expression("x + é", ZW)
        assert info.value.offset == 4
        with pytest.raises(E.ParseError) as info:
            E.parse_expression("é +", ZW)
        assert info.value.offset == 0

    def test_unknown_symbol_named(self):
        with pytest.raises(E.UnknownSymbolError) as info:
            E.parse_expression("x + q", ZW)
        assert info.value.symbol == "q"
        assert info.value.offset == 4

    def test_parameters(self):
        e = E.parse_expression("a*x + b", ZW, params=("a", "b"))
        assert E.evaluate(e, ZW, [2, 0, 0, 0], {"a": 3, "b": 1}) == pytest.approx(7)
        with pytest.raises(E.UnboundParameterError):
            E.evaluate(e, ZW, [2, 0, 0, 0], {"a": 3})

    def test_precedence(self):
        e = E.parse_expression("-x^2 + 2*y/4", ZW)
        assert E.evaluate(e, ZW, [3, 2, 0, 0]) == pytest.approx(-9 + 1)


class TestPrinter:
    @pytest.mark.parametrize("text", [
        "sin(2*pi*x)*cos(2*pi*y)", "1/(x^2 + y^2 + u^2 + v^2)", "x - y - u", "exp(-x)*ln(2 + v^2)",
        "conj(z)*w + re(z)^3", "sqrt(abs(x) + 1)", "-x^2", "(x + i*y)^3", "2.5e-3*x/y", "x/(y*u)",
    ])
    def test_round_trip(self, text):
        e = E.parse_expression(text, ZW)
        assert E.parse_expression(E.to_text(e), ZW) is e

    def test_round_trip_random(self):
        rng = np.random.default_rng(3)
        for _ in range(300):
            e = random_expr(rng, 4)
            printed = E.to_text(e)
            again = E.parse_expression(printed, PLAIN)
            assert again is e
            assert E.to_text(again) == printed


class TestDifferentiation:
    def test_finite_difference_oracle(self):
        """Symbolic derivative against central differences, 500 random cases."""
        rng = np.random.default_rng(20240)
        worst = 0.0
        for _ in range(500):
            e = random_expr(rng, 4)
            point = random_points(rng, 1)[0]
            k = int(rng.integers(4))
            sym = E.evaluate(E.differentiate(e, PLAIN.coords[k]), PLAIN, point)
            fd = central_difference(e, PLAIN, point, k)
            worst = max(worst, abs(sym - fd) / max(1.0, abs(sym)))
        assert worst < 1e-6

    def test_mixed_partials_commute(self):
        rng = np.random.default_rng(5)
        pts = random_points(rng, 20)
        for _ in range(50):
            e = random_expr(rng, 3)
            a, b = rng.choice(4, size=2, replace=False)
            ab = E.differentiate(E.differentiate(e, PLAIN.coords[a]), PLAIN.coords[b])
            ba = E.differentiate(E.differentiate(e, PLAIN.coords[b]), PLAIN.coords[a])
            np.testing.assert_allclose(E.evaluate_batch([ab], PLAIN, pts), E.evaluate_batch([ba], PLAIN, pts),
                                       rtol=1e-10, atol=1e-10)

    def test_wirtinger_of_holomorphic(self):
        e = E.parse_expression("z^3 + exp(z)", ZW)
        dzb = E.wirtinger(e, "z", ZW, conjugate=True)
        dz = E.wirtinger(e, "z", ZW)
        p = [0.3, -0.7, 0, 0]
        z = complex(0.3, -0.7)
        assert abs(E.evaluate(dzb, ZW, p)) < 1e-14
        assert E.evaluate(dz, ZW, p) == pytest.approx(3 * z**2 + np.exp(z))

    def test_wirtinger_of_modulus_squared(self):
        e = E.parse_expression("z*conj(z)", ZW)
        p = [0.3, -0.7, 0, 0]
        assert E.evaluate(E.wirtinger(e, "z", ZW), ZW, p) == pytest.approx(complex(0.3, 0.7))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        f, g = random_expr(rng, 3), random_expr(rng, 3)
        c = PLAIN.coords[int(rng.integers(4))]
        lhs = E.differentiate(E.add(E.mul(a, f), E.mul(b, g)), c)
        rhs = E.add(E.mul(a, E.differentiate(f, c)), E.mul(b, E.differentiate(g, c)))
        pts = random_points(rng, 5)
        np.testing.assert_allclose(E.evaluate_batch([lhs], PLAIN, pts), E.evaluate_batch([rhs], PLAIN, pts),
                                   rtol=1e-10, atol=1e-10)


class TestEvaluation:
    def test_ln_domain(self):
        e = E.parse_expression("ln(x)", ZW)
        with pytest.raises(E.DomainError):
            E.evaluate(e, ZW, [-1, 0, 0, 0])
        with pytest.raises(E.DomainError):
            E.evaluate(E.ln(E.parse_expression("z", ZW)), ZW, [1, 1, 0, 0])

    def test_division_by_zero(self):
        with pytest.raises(E.DomainError):
            E.evaluate(E.parse_expression("1/x", ZW), ZW, [0, 1, 1, 1])

    def test_chart_domain(self):
        half = ZW.with_domain("v")
        with pytest.raises(E.DomainError):
            E.evaluate_batch([E.coord("x")], half, [[0, 0, 0, -1]])

    def test_hash_consing(self):
        a = E.parse_expression("sin(x)*y + 1", ZW)
        b = E.add(1, E.mul(E.coord("y"), E.sin(E.coord("x"))))
        assert a is b

    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(11)
        exprs = [random_expr(rng, 3) for _ in range(5)]
        pts = random_points(rng, 7)
        batch = E.evaluate_batch(exprs, PLAIN, pts)
        for i, p in enumerate(pts):
            for j, e in enumerate(exprs):
                assert batch[i, j] == pytest.approx(E.evaluate(e, PLAIN, p), rel=1e-14, abs=1e-14)

    def test_substitute(self):
        e = E.parse_expression("x^2 + sin(y)", PLAIN)
        s = E.substitute(e, {"x": E.parse_expression("u + v", PLAIN), "y": E.const(math.pi / 2)})
        assert E.evaluate(s, PLAIN, [0, 0, 1, 2]) == pytest.approx(10)
