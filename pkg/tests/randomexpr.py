"""Seeded random expressions, forms and maps shared by the test modules."""

import numpy as np

from phgeom import expr as E
from phgeom.calculus import Form, SmoothMap, VectorField, basis_indices

PLAIN = E.Chart(("x", "y", "u", "v"))
COORDS = PLAIN.coords


def random_expr(rng: np.random.Generator, depth: int = 3, chart=PLAIN):
    """A smooth real expression that is finite on [-1, 1]^4."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return E.coord(chart.coords[rng.integers(4)])
        return E.const(float(np.round(rng.uniform(-2, 2), 3)))
    kind = rng.integers(8)
    a = random_expr(rng, depth - 1, chart)
    if kind == 0:
        return E.add(a, random_expr(rng, depth - 1, chart))
    if kind == 1:
        return E.mul(a, random_expr(rng, depth - 1, chart))
    if kind == 2:
        return E.sin(a)
    if kind == 3:
        return E.cos(a)
    if kind == 4:
        return E.exp(E.mul(0.3, E.sin(a)))
    if kind == 5:
        return E.power(a, int(rng.integers(2, 4)))
    if kind == 6:
        return E.sqrt(E.add(1.5, E.sin(a)))
    return E.ln(E.add(2, E.cos(a)))


def random_points(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n, 4))


def random_form(rng: np.random.Generator, degree: int, depth: int = 2, chart=PLAIN) -> Form:
    return Form(chart, degree, {idx: random_expr(rng, depth, chart) for idx in basis_indices(degree)
                                if rng.random() < 0.8})


def random_vector_field(rng: np.random.Generator, depth: int = 2, chart=PLAIN) -> VectorField:
    return VectorField(chart, tuple(random_expr(rng, depth, chart) for _ in range(4)))


def random_map(rng: np.random.Generator, chart=PLAIN) -> SmoothMap:
    """A near-identity diffeomorphism with polynomial and trigonometric corrections."""
    exprs = []
    for c in chart.coords:
        bump = E.mul(float(rng.uniform(-0.3, 0.3)), E.sin(random_expr(rng, 1, chart)))
        exprs.append(E.add(E.coord(c), bump))
    return SmoothMap(chart, chart, tuple(exprs), "F")
