"""Acceptance suite: fourteen numbered criteria, one PASS/FAIL line each.

Every criterion gathers a list of measurements ``(label, value, ok)`` and
passes only if all of them are ok. Run standalone with
``python3 tests/test_acceptance.py`` or through pytest; in both cases a summary
line per criterion is printed.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from phgeom import catalog as C  # noqa: E402
from phgeom import cli  # noqa: E402
from phgeom import expr as E  # noqa: E402
from phgeom.calculus import (  # noqa: E402
    Form, SmoothMap, cartan_lie_derivative, exterior_derivative, lie_derivative, pullback, wedge,
)
from phgeom.report import dumps  # noqa: E402
from phgeom.structures import (  # noqa: E402
    FormTriple, StructureError, flat_structure, from_complex_pair, fundamental_forms, integrability_report,
    lee_form_solve, lee_form_values, perturbed_structure, reconstruct_structure, to_complex_pair, verify_phe,
)
from randomexpr import PLAIN, random_expr, random_form, random_map, random_points, random_vector_field  # noqa: E402

SAMPLES, SEED = 200, 42
ZW = E.Chart(("x", "y", "u", "v"), (("z", "x", "y"), ("w", "u", "v")))
FORM_FAMILIES = ("torus_ph", "torus_phk", "kodaira", "hopf", "inoue_splus", "elliptic")

CRITERIA = {}
RESULTS = {}


def criterion(number, title):
    def register(fn):
        CRITERIA[number] = (title, fn)
        return fn
    return register


def below(label, value, bound):
    return (label, float(value), bool(value < bound))


def above(label, value, bound):
    return (label, float(value), bool(value > bound))


def max_abs(form, pts):
    return float(np.max(np.abs(form.evaluate(pts)))) if form.coeffs else 0.0


def worst(checks, prefix=""):
    return max((c.max_residual for c in checks if c.name.startswith(prefix)), default=0.0)


def instance(name, **params):
    m = C.build(name, **params)
    return m, m.sample(SAMPLES, SEED)


@criterion(1, "exterior-calculus laws on 200 random forms")
def c01():
    rng = np.random.default_rng(1)
    pts = random_points(rng, 20, 0.8)
    dd = lb = nat = cartan = 0.0
    for i in range(50):
        a = random_form(rng, i % 3)
        dd = max(dd, max_abs(exterior_derivative(exterior_derivative(a)), pts))
    for i in range(50):
        k = i % 3
        a, b = random_form(rng, k), random_form(rng, 1)
        lhs = exterior_derivative(wedge(a, b))
        rhs = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scale((-1) ** k)
        lb = max(lb, max_abs(lhs - rhs, pts))
    for i in range(50):
        F, a = random_map(rng), random_form(rng, i % 3)
        nat = max(nat, max_abs(pullback(F, exterior_derivative(a)) - exterior_derivative(pullback(F, a)), pts))
    for i in range(50):
        X, a = random_vector_field(rng), random_form(rng, i % 4)
        cartan = max(cartan, max_abs(lie_derivative(X, a) - cartan_lie_derivative(X, a), pts))
    return [below("d(d a)", dd, 1e-9), below("Leibniz", lb, 1e-9), below("naturality", nat, 1e-9),
            below("Cartan", cartan, 1e-9)]


@criterion(2, "symbolic derivative against finite differences, 500 cases")
def c02():
    rng = np.random.default_rng(20240)
    h, rel = 1e-5, 0.0
    for _ in range(500):
        e = random_expr(rng, 4)
        p = random_points(rng, 1)[0]
        k = int(rng.integers(4))
        step = np.zeros(4)
        step[k] = h
        fd = (E.evaluate(e, PLAIN, p + step) - E.evaluate(e, PLAIN, p - step)) / (2 * h)
        sym = E.evaluate(E.differentiate(e, PLAIN.coords[k]), PLAIN, p)
        rel = max(rel, abs(sym - fd) / max(1.0, abs(sym)))
    return [below("max relative error", rel, 1e-6)]


@criterion(3, "torus family")
def c03():
    m, pts = instance("torus_ph", phi="sin(2*pi*x)*cos(2*pi*y)")
    return [below("phe", worst(verify_phe(m.forms, pts)), 1e-9),
            above("max |d theta|", max_abs(exterior_derivative(m.forms.theta), pts), 0.1),
            below("lee_form_solve vs closed form", max_abs(lee_form_solve(m.forms.omega2) - m.forms.theta, pts),
                  1e-9)]


@criterion(4, "Kodaira family")
def c04():
    m, pts = instance("kodaira", phi="sin(2*pi*x)*cos(2*pi*y)")
    inv, _ = C.invariance_check(m, pts)
    out = [below("phe", worst(verify_phe(m.forms, pts)), 1e-9),
           below("invariance under 4 generators", worst(inv), 1e-9),
           ("generator count", len(m.generators), len(m.generators) == 4),
           above("max |d theta|", max_abs(exterior_derivative(m.forms.theta), pts), 0.1)]
    k, kpts = instance("kodaira", mode="phk", f="sin(2*pi*x)")
    theta = max(float(np.max(np.abs(lee_form_values(o, kpts)))) for o in k.forms.omegas)
    out += [below("PHK phe", worst(verify_phe(k.forms, kpts)), 1e-9), below("PHK theta", theta, 1e-10)]
    return out


def _random_walker_function(rng):
    terms = [f"{rng.uniform(-1, 1):.3f}*sin({rng.integers(1, 4)}*u + {rng.integers(-2, 3)}*v)",
             f"{rng.uniform(-1, 1):.3f}*cos({rng.integers(1, 4)}*v)",
             f"{rng.uniform(-1, 1):.3f}*u^{rng.integers(1, 4)}*v^{rng.integers(0, 3)}"]
    return " + ".join(terms)


@criterion(5, "Walker metrics and proper J")
def c05():
    rng = np.random.default_rng(5)
    out = []
    for trial in range(3):
        abc = {k: _random_walker_function(rng) for k in "abc"}
        m, pts = instance("walker", **abc)
        checks = C.walker_checks(m, pts)
        out += [below(f"#{trial} parallel null pair", worst(checks, "walker:"), 1e-9),
                below(f"#{trial} proper J", worst(checks, "proper J:"), 1e-8),
                below(f"#{trial} Ricci", worst(checks, "curvature:"), 1e-8)]
    return out


@criterion(6, "Hopf family")
def c06():
    m, pts = instance("hopf", a=2)
    inv, _ = C.invariance_check(m, pts, 1e-12)
    out = [("normalization note", 1.0, any("1/2" in n for n in m.notes)),
           below("phe", worst(verify_phe(m.forms, pts)), 1e-9),
           below("generator invariance", worst(inv), 1e-12),
           below("max |d theta|", max_abs(exterior_derivative(m.forms.theta), pts), 1e-9)]
    try:
        d, dpts = instance("hopf", a=2, phi="z1*conj(z1)")
        dinv, _ = C.invariance_check(d, dpts)
        out += [below("deformation phi=|z1|^2: phe", worst(verify_phe(d.forms, dpts)), 1e-9),
                below("deformation phi=|z1|^2: invariance", worst(dinv), 1e-9)]
    except (C.CatalogError, StructureError) as exc:
        out.append((f"deformation phi=|z1|^2 rejected: {exc}", math.inf, False))
    return out


@criterion(7, "Inoue S+ family")
def c07():
    m, pts = instance("inoue_splus", N=[[2, 1], [1, 1]], p=0, q=0, r=1, t=[0, 1])
    d = m.data["inoue"]
    inv, _ = C.invariance_check(m, pts)
    names = {c.name.split("^*")[0] for c in inv}
    return [below("Im(c1, c2)", d.c_imag_max, 1e-12),
            below("structure equations", worst(C.inoue_structure_checks(m, pts)), 1e-9),
            below("phe", worst(verify_phe(m.forms, pts)), 1e-9),
            below("theta + alpha4", max_abs(m.forms.theta + m.extra_forms["alpha4"], pts), 1e-9),
            below("invariance g0..g3", worst(inv), 1e-9),
            ("all four generators checked", len(names), names == {f"invariance: g{k}" for k in range(4)}),
            below("max |d theta|", max_abs(exterior_derivative(m.forms.theta), pts), 1e-9)]


@criterion(8, "elliptic family")
def c08():
    m, pts = instance("elliptic", generators=[{"lambda": 2, "M": [[1, 1], [0, 1]]}])
    inv, _ = C.invariance_check(m, pts)
    h = E.parse_expression("im(x*conj(y))", m.chart)
    expected = exterior_derivative(Form.function(m.chart, E.ln(h))).scale(-1)
    return [below("phe", worst(verify_phe(m.forms, pts)), 1e-9),
            below("invariance", worst(inv), 1e-9),
            below("max |d theta|", max_abs(exterior_derivative(m.forms.theta), pts), 1e-9),
            below("theta + d ln Im(x conj y)", max_abs(m.forms.theta - expected, pts), 1e-10)]


@criterion(9, "Inoue S0 frame")
def c09():
    m, pts = instance("inoue_s0", A=[[0, 1, 0], [0, 0, 1], [1, 1, 0]])
    d = m.data["s0"]
    return [below("brackets, structure equations, d^c", worst(C.s0_checks(m, pts)), 1e-9),
            below("a + ln(c)/2", abs(d.a + 0.5 * math.log(d.c)), 1e-12)]


@criterion(10, "S0 obstruction")
def c10():
    m, pts = instance("inoue_s0")
    _, info = C.s0_ansatz_scan(m, pts)
    return [above("|exp(2ib) - 1|", info["invariance_defect"], 0.1),
            above("dist(b, pi Z)", info["dist_b_pi_Z"], 0.1),
            above("grid minimum of phe residual", info["grid_min"], 0.1)]


@criterion(11, "structure algebra and conversions")
def c11():
    out = []
    for name in FORM_FAMILIES + ("hyperelliptic_pch",):
        m, pts = instance(name)
        triple = m.triple if m.forms is None else m.structure.triple
        alg = max(float(np.max(v)) for v in triple.algebra_residuals(pts).values())
        out.append(below(f"{name} algebra", alg, 1e-10))
        if m.forms is not None:
            again = fundamental_forms(reconstruct_structure(*m.forms.omegas, pts))
            out.append(below(f"{name} reconstruct o fundamental_forms",
                             max(max_abs(a - b, pts) for a, b in zip(again.omegas, m.forms.omegas)), 1e-9))
    m, pts = instance("hopf")
    t = m.structure.triple
    pts = pts[:40]
    for p in (1.5, 2.0, 3.0):
        back, p_back = from_complex_pair(*to_complex_pair(t, p), pts)
        err = max(float(np.max(np.abs(a.values(pts) - b.values(pts))))
                  for a, b in zip((back.I, back.S, back.T), (t.I, t.S, t.T)))
        out.append(below(f"complex pair round trip p={p}", max(err, abs(p_back - p)), 1e-10))
    return out


@criterion(12, "dd^c theta = 0 on every para-hyperhermitian instance")
def c12():
    extra = [("kodaira", {"mode": "phk"}), ("elliptic", {"generators": [{"lambda": 3, "M": [[2, 1], [1, 1]]}]})]
    out = []
    for name, params in [(n, {}) for n in FORM_FAMILIES] + extra:
        m, pts = instance(name, **params)
        out.append(below(f"{name} {params or ''}".strip(), C.ddc_theta_check(m, pts).max_residual, 1e-9))
    return out


def _agreement(label, checks):
    """Nijenhuis (all N_A) and Lee-form (theta equality) criteria give the same verdict."""
    nij = all(c.passed for c in checks if c.name.startswith("integrability: N_"))
    lee = all(c.passed for c in checks if c.name.startswith("integrability: theta"))
    return (f"{label}: Nijenhuis {'pass' if nij else 'fail'}, Lee {'pass' if lee else 'fail'}", float(nij), nij == lee)


@criterion(13, "negative controls")
def c13():
    pts = np.random.default_rng(13).uniform(0, 1, (SAMPLES, 4))
    s = perturbed_structure(flat_structure(ZW), E.parse_expression("sin(2*pi*x) + 0.5*cos(2*pi*u)", ZW))
    rep = integrability_report(s, pts)
    out = [above("perturbed S: N_S", worst(rep, "integrability: N_S"), 1e-3), _agreement("perturbed S", rep)]

    m, mpts = instance("torus_ph")
    x, y, u, v = (E.coord(c) for c in m.chart.coords)
    m.generators = [SmoothMap(m.chart, m.chart, (E.add(x, 0.5), y, u, v), "wrong")]
    inv, _ = C.invariance_check(m, mpts)
    out += [above("wrong lattice vector: invariance", worst(inv), 1e-3),
            _agreement("wrong lattice vector", integrability_report(m.structure, mpts))]

    ft = fundamental_forms(flat_structure(ZW))
    bad = FormTriple(ft.omega1, ft.omega2.scale(2), ft.omega3)
    out.append(above("scaled Omega2: phe", worst(verify_phe(bad, pts), "phe: -Omega1^2"), 1e-3))
    try:
        reconstruct_structure(*bad.omegas, pts)
        out.append(("scaled Omega2: reconstruction unexpectedly succeeded", 0.0, False))
    except StructureError:
        # neither integrability criterion can be certified without a structure: both fail together
        out.append(("scaled Omega2: Nijenhuis fail, Lee fail (no structure)", 0.0, True))
    return out


@criterion(14, "deterministic reports")
def c14():
    out = []
    for name in C.FAMILIES:
        text = [dumps(cli.execute(cli.validate_config({"family": name}), "verify").to_json()) for _ in range(2)]
        out.append((f"{name} byte-identical", float(len(text[0])), text[0] == text[1]))
    return out


def run(number):
    title, fn = CRITERIA[number]
    results = fn()
    ok = all(r[2] for r in results)
    RESULTS[number] = (title, ok, results)
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
    print(line)
    for label, value, good in results:
        if not good:
            print(f"    failed: {label} (value {value:.3e})")
    return ok, results


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, results = run(number)
    assert ok, [r for r in results if not r[2]]


if __name__ == "__main__":
    passed = [run(n)[0] for n in sorted(CRITERIA)]
    sys.exit(0 if all(passed) else 1)
