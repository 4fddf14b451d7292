import numpy as np
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as hs

from thinstokes import profiles as pr

XI = sp.Symbol("xi")
coeff_lists = hs.lists(hs.integers(-20, 20), min_size=1, max_size=7)


def _sym(coeffs):
    return sum(sp.Rational(c) * XI**m for m, c in enumerate(coeffs))


def _same(poly, expr, pts=np.linspace(-0.5, 0.5, 9)):
    f = sp.lambdify(XI, expr, "numpy")
    ref = np.broadcast_to(np.asarray(f(pts), float), pts.shape)
    scale = max(1.0, float(np.max(np.abs(ref))))
    return np.max(np.abs(poly(pts) - ref)) <= 1e-12 * scale


def test_poiseuille_profile_identities():
    n1 = pr.n1()
    assert n1.deriv(2)(0.3) == 1.0
    assert n1(0.5) == 0.0 and n1(-0.5) == 0.0
    assert abs(pr.n2()(0.5) - (-1.0 / 12.0)) < 1e-15
    assert abs(pr.mean2(n1) + 1.0 / 12.0) < 1e-15


@given(coeff_lists)
def test_d_inv_against_sympy(coeffs):
    p = pr.TransversePoly(tuple(float(c) for c in coeffs))
    ref = sp.integrate(_sym(coeffs), (XI, -sp.Rational(1, 2), XI))
    assert _same(pr.d_inv(p), ref)


@given(coeff_lists)
def test_mean_and_tilde_against_sympy(coeffs):
    p = pr.TransversePoly(tuple(float(c) for c in coeffs))
    half = sp.Rational(1, 2)
    ref_mean = float(sp.integrate(_sym(coeffs), (XI, -half, half)))
    assert abs(pr.mean2(p) - ref_mean) <= 1e-12 * max(1.0, abs(ref_mean))
    t = pr.d_inv_tilde(p)
    assert abs(pr.mean2(t)) < 1e-12 * max(1.0, max(abs(c) for c in coeffs))
    assert np.allclose(t.deriv().array[: len(coeffs)], p.array, atol=1e-12)


@given(coeff_lists)
@settings(max_examples=50)
def test_d_inv2_solves_wall_problem(coeffs):
    p = pr.TransversePoly(tuple(float(c) for c in coeffs))
    q = pr.d_inv2(p)
    half = sp.Rational(1, 2)
    w = sp.integrate(sp.integrate(_sym(coeffs), (XI, -half, XI)), (XI, -half, XI))
    ref = w - (XI + half) * w.subs(XI, half)
    assert _same(q, ref)
    assert abs(q(0.5)) < 1e-12 and abs(q(-0.5)) < 1e-12


def test_r_constant_exact_value():
    # [DERIVED] sympy: D^-1 D^-2 (N1 - <N1>) at the upper wall
    half = sp.Rational(1, 2)
    g = (XI**2 - sp.Rational(1, 4)) / 2 + sp.Rational(1, 12)
    w = sp.integrate(sp.integrate(g, (XI, -half, XI)), (XI, -half, XI))
    w = w - (XI + half) * w.subs(XI, half)
    R = sp.integrate(w, (XI, -half, half))
    assert R == sp.Rational(1, 720)
    assert abs(pr.r_constant() - 1.0 / 720.0) < 1e-15


def test_polynomial_arithmetic():
    a = pr.TransversePoly((1.0, 2.0))
    b = pr.TransversePoly((0.0, 0.0, 3.0))
    assert (a * b).coeffs == (0.0, 0.0, 3.0, 6.0)
    assert (a + 1).coeffs == (2.0, 2.0)
    assert (a - a).is_zero()
    assert (2 * a).coeffs == (2.0, 4.0)
    assert pr.TransversePoly.monomial(3, 2.0).degree == 3
