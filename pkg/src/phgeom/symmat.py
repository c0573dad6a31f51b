"""Small symbolic matrix helpers (lists of lists of expressions)."""

from __future__ import annotations

from itertools import permutations

from .expr import ONE, ZERO, Expr, add, as_expr, mul, power

Matrix = list[list[Expr]]


def perm_sign(p) -> int:
    """Sign of a permutation given as a sequence of distinct integers."""
    p = list(p)
    sign = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def as_matrix(rows) -> Matrix:
    return [[as_expr(v) for v in row] for row in rows]


def identity(n: int) -> Matrix:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def transpose(m: Matrix) -> Matrix:
    return [list(col) for col in zip(*m)]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    n, k, p = len(a), len(b), len(b[0])
    return [[add(*(mul(a[i][r], b[r][j]) for r in range(k))) for j in range(p)] for i in range(n)]


def matvec(a: Matrix, v) -> list[Expr]:
    return [add(*(mul(row[r], v[r]) for r in range(len(v)))) for row in a]


def scale(c, m: Matrix) -> Matrix:
    return [[mul(c, x) for x in row] for row in m]


def madd(*ms: Matrix) -> Matrix:
    return [[add(*(m[i][j] for m in ms)) for j in range(len(ms[0][0]))] for i in range(len(ms[0]))]


def det(m: Matrix) -> Expr:
    """Leibniz expansion; fine for the 4x4 matrices used here."""
    n = len(m)
    if n == 0:
        return ONE
    if n == 1:
        return m[0][0]
    if n == 2:
        return add(mul(m[0][0], m[1][1]), mul(-1, m[0][1], m[1][0]))
    # cofactor expansion along the first row reuses 3x3 minors
    terms = []
    for j in range(n):
        if m[0][j] is ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        terms.append(mul((-1) ** j, m[0][j], det(minor)))
    return add(*terms)


def minor_det(m: Matrix, rows, cols) -> Expr:
    return det([[m[r][c] for c in cols] for r in rows])


def adjugate(m: Matrix) -> Matrix:
    n = len(m)
    if n == 1:
        return [[ONE]]
    adj = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            rows = [r for r in range(n) if r != j]
            cols = [c for c in range(n) if c != i]
            adj[i][j] = mul((-1) ** (i + j), minor_det(m, rows, cols))
    return adj


def inverse(m: Matrix) -> tuple[Matrix, Expr]:
    """Return (inverse, determinant); the inverse is adj(m)/det(m)."""
    d = det(m)
    inv_d = power(d, -1)
    return scale(inv_d, adjugate(m)), d


def leibniz_det(m: Matrix) -> Expr:
    n = len(m)
    return add(*(mul(perm_sign(p), *(m[i][p[i]] for i in range(n))) for p in permutations(range(n))))
