import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from canard_lab import (
    PolyBranch,
    SystemSpec,
    corner_classify,
    eigenpair,
    equilibrium,
    fold_hopf,
    geometry,
    lambda_quantity,
    nonexistence_threshold,
    preset,
)
from canard_lab.bifurcation import classify_slopes
from canard_lab.errors import HypothesisNotSatisfied, NoFold, NotFocusFocus
from strategies import smooth_fold_specs


def test_fig6_unstable_node():
    eq = equilibrium(preset("fig6", 0.2, 0.1))
    assert eq.slope == pytest.approx(1.87, abs=1e-12)
    assert eq.mu_plus.real == pytest.approx(1.756, abs=1e-3)
    assert eq.mu_minus.real == pytest.approx(0.114, abs=1e-3)
    assert eq.kind == "unstable node"
    assert eq.strong_eigvec_slope == pytest.approx(0.2 / eq.mu_plus.real)


def test_degenerate_node():
    mp, mm = eigenpair(1.0, 0.25)
    assert mp == mm == 0.5
    spec = SystemSpec(0.25, 0.5, PolyBranch.of([0, -1]), PolyBranch.of([0, 2, -1]))
    assert equilibrium(spec).kind == "unstable degenerate node"


def test_fig4_node_at_one():
    eq = equilibrium(preset("fig4", 0.2, 1.0))
    assert eq.slope == pytest.approx(1.92, abs=1e-12)
    assert eq.mu_plus.real == pytest.approx(1.8095, abs=1e-4)
    assert eq.mu_minus.real == pytest.approx(0.1105, abs=1e-4)


def test_corner_reports_both_sides():
    eq = equilibrium(preset("fig4", 0.2, 0.0))
    assert set(eq.one_sided) == {"left", "right"}
    assert eq.one_sided["left"][3] == "stable node"
    assert eq.one_sided["right"][3] == "unstable focus"
    assert "one_sided" in eq.to_json()


def test_corner_examples():
    r = corner_classify(preset("fig4", 0.2))
    assert (r.kind, r.criticality) == ("HopfLike", "supercritical")
    r = corner_classify(preset("fig6", 0.2))
    assert (r.kind, r.criticality) == ("SuperExplosion", "supercritical")
    r = classify_slopes(-0.3, 0.5, 0.2)
    assert (r.kind, r.criticality) == ("HopfLike", "subcritical")
    assert r.thresholds["Lambda"] == pytest.approx(0.31816, abs=1e-5)
    assert "convention" in r.note


def test_fig8b_subcritical_super_explosion():
    r = corner_classify(preset("fig8b", 0.2))
    assert (r.kind, r.criticality) == ("SuperExplosion", "subcritical")


def test_degenerate_boundary():
    eps = 0.2
    assert classify_slopes(-2.0, 2 * math.sqrt(eps), eps).kind == "Degenerate"
    assert classify_slopes(-0.4, 0.4, eps).criticality == "degenerate"


def test_lambda_examples():
    assert lambda_quantity(-0.3, 0.5, 0.2) == pytest.approx(0.5 / math.sqrt(0.55) - 0.3 / math.sqrt(0.71))
    assert lambda_quantity(-0.5, 0.3, 0.2) == pytest.approx(-0.31816, abs=1e-5)
    assert lambda_quantity(-0.7, 0.7, 0.2) == 0.0
    with pytest.raises(NotFocusFocus):
        lambda_quantity(-2.0, 0.3, 0.2)


def test_fold_hopf_examples():
    r = fold_hopf(preset("fig4", 0.2))
    assert r.lambda_H == pytest.approx(1.6, abs=1e-12)
    assert r.criticality == "supercritical"
    r6 = fold_hopf(preset("fig6", 0.2))
    assert r6.lambda_H == pytest.approx(2 / 3, abs=1e-15)
    assert r6.h3_at_fold == pytest.approx(-6.0)
    assert r6.criticality == "supercritical"


def test_fold_hopf_needs_smooth_fold():
    spec = SystemSpec(0.1, 0.0, PolyBranch.of([0, -1]), PolyBranch.of([0, 1]), PolyBranch.of([2, -1]), 1.0)
    with pytest.raises(NoFold):
        fold_hopf(spec)


def test_subcritical_fold_hopf():
    # h = x - x^2 + x^3 / 3 ... needs h''' > 0 at a fold: h' = 1 - 2x + ax^2 with a root
    spec = SystemSpec(0.2, 0.0, PolyBranch.of([0, -1]), PolyBranch.of([0, 1, -1, Fraction(1, 6)]))
    r = fold_hopf(spec)
    assert r.h3_at_fold == pytest.approx(1.0)
    assert r.criticality == "subcritical"


def _generic_first_lyapunov(spec, xm):
    """Planar normal-form coefficient of x' = -w y + f, y' = w x + g, from all partials."""
    u, v = sympy.symbols("u v")
    w = sympy.sqrt(sympy.Rational(spec.epsilon))
    X = sympy.Symbol("X")
    h = spec.h.to_sympy().as_expr(X)
    Y = w * v  # y - h(x_M) in rotated coordinates
    du = h.subs(X, xm + u) - h.subs(X, xm) - Y
    dv = sympy.expand(spec.epsilon * u / w)
    f = sympy.expand(du + w * v)
    g = sympy.expand(dv - w * u)
    d = lambda e, *xs: sympy.diff(e, *xs).subs({u: 0, v: 0})
    a = (d(f, u, u, u) + d(f, u, v, v) + d(g, u, u, v) + d(g, v, v, v)) / 16 + (
        d(f, u, v) * (d(f, u, u) + d(f, v, v))
        - d(g, u, v) * (d(g, u, u) + d(g, v, v))
        - d(f, u, u) * d(g, u, u)
        + d(f, v, v) * d(g, v, v)
    ) / (16 * w)
    return float(a)


@settings(max_examples=15, deadline=None)
@given(smooth_fold_specs())
def test_lyapunov_coefficient_against_generic_formula(spec):
    fh = fold_hopf(spec)
    expected = _generic_first_lyapunov(spec, geometry(spec).x_M_exact)
    assert fh.lyapunov_coefficient == pytest.approx(expected, rel=1e-9, abs=1e-12)
    assert (fh.criticality == "supercritical") == (expected < 0)


def test_nonexistence_examples():
    nt = nonexistence_threshold(preset("fig6", 0.2))
    assert (nt.k, nt.m, nt.K) == (pytest.approx(2.0), pytest.approx(-2.0), pytest.approx(4 / 3))
    assert str(nt.K_exact) == "4/3"
    n4 = nonexistence_threshold(preset("fig4", 0.2))
    assert str(n4.K_exact) == "10/3"
    assert n4.k == pytest.approx(25 / 12) and n4.k_at == pytest.approx(23 / 30)
    assert str(nonexistence_threshold(preset("fig8b", 0.2)).K_exact) == "16/3"


def test_nonexistence_hypothesis_fails():
    spec = SystemSpec(0.2, 0.0, PolyBranch.of([0, -1, 0, 1]), preset("fig6").h)
    with pytest.raises(HypothesisNotSatisfied):
        nonexistence_threshold(spec)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10), st.floats(1e-4, 5))
def test_eigenvalue_oracle(slope, eps):
    mine = sorted(eigenpair(slope, eps), key=lambda z: (z.real, z.imag))
    ref = sorted(np.linalg.eigvals(np.array([[slope, -1.0], [eps, 0.0]])), key=lambda z: (z.real, z.imag))
    scale = max(1.0, abs(slope))
    assert max(abs(a - b) for a, b in zip(mine, ref)) <= 1e-12 * scale


@settings(max_examples=80, deadline=None)
@given(smooth_fold_specs())
def test_characteristic_polynomial(spec):
    eq = equilibrium(spec)
    assert abs(eq.mu_plus * eq.mu_minus - spec.epsilon) <= 1e-10 * max(1.0, eq.slope**2)
    assert abs(eq.mu_plus + eq.mu_minus - eq.slope) <= 1e-10 * max(1.0, abs(eq.slope))
    assert ("node" in eq.kind) == (eq.slope**2 >= 4 * spec.epsilon)


@settings(max_examples=80, deadline=None)
@given(smooth_fold_specs())
def test_eigenvalues_at_fold(spec):
    fh = fold_hopf(spec)
    eq = equilibrium(spec.with_lambda(fh.lambda_H))
    w = math.sqrt(spec.epsilon)
    assert abs(eq.mu_plus - 1j * w) <= 1e-10
    assert abs(eq.mu_minus + 1j * w) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0), st.floats(1e-3, 1.0))
def test_lambda_sign_matches_slopes(gs, hs, eps):
    assume(gs < 2 * math.sqrt(eps) - 1e-9 and hs < 2 * math.sqrt(eps) - 1e-9 and abs(gs - hs) > 1e-9)
    lam = lambda_quantity(-gs, hs, eps)
    assert np.sign(lam) == np.sign(hs**2 - gs**2)
    crit = classify_slopes(-gs, hs, eps).criticality
    assert (crit == "supercritical") == (lam < 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_kind_flips_once_in_eps(hs, gs):
    eps_grid = np.linspace(1e-3, 4.0, 400)
    kinds = [classify_slopes(-gs, hs, e).kind for e in eps_grid]
    flips = sum(a != b for a, b in zip(kinds, kinds[1:]) if "Degenerate" not in (a, b))
    assert flips <= 1
    for e, k in zip(eps_grid, kinds):
        if k != "Degenerate":
            assert (k == "HopfLike") == (hs < 2 * math.sqrt(e))


def test_supercritical_has_no_orbit_below_corner():
    from canard_lab import find_periodic_orbit
    from canard_lab.errors import NoOrbit

    spec = preset("fig4", 0.2)
    K = nonexistence_threshold(spec).K
    for lam in np.linspace(-K, 0, 6)[1:-1]:
        with pytest.raises(NoOrbit):
            find_periodic_orbit(spec.with_lambda(float(lam)))


def test_reports_serialize():
    import json

    spec = preset("fig4", 0.2, 0.3)
    for rep in (equilibrium(spec), corner_classify(spec), fold_hopf(spec), nonexistence_threshold(spec)):
        json.dumps(rep.to_json())
