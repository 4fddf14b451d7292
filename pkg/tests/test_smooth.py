import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as hs
from scipy.integrate import quad

from thinstokes import expr
from thinstokes import smooth as sm

x = sp.Symbol("x")

CASES = [
    ("2+0.5*sin(2*pi*x)", 2 + sp.Rational(1, 2) * sp.sin(2 * sp.pi * x)),
    ("exp(x)*cos(3*x)/(2+x^2)", sp.exp(x) * sp.cos(3 * x) / (2 + x**2)),
    ("sqrt(1+x)*log(2+x)", sp.sqrt(1 + x) * sp.log(2 + x)),
    ("(1+x)^2.5 - 3*x^3", (1 + x) ** sp.Rational(5, 2) - 3 * x**3),
    ("-x/(1+sin(x)^2)", -x / (1 + sp.sin(x) ** 2)),
]


@pytest.mark.parametrize("text,ref", CASES)
def test_jets_match_symbolic_derivatives(text, ref):
    f = expr.parse(text)
    pts = np.array([0.1, 0.37, 0.8])
    d = f.derivatives(pts, 8)
    for m in range(9):
        g = sp.lambdify(x, sp.diff(ref, x, m), "numpy")
        want = np.asarray(g(pts), float)
        assert np.allclose(d[m], want, rtol=1e-11, atol=1e-11 * math.factorial(m)), m


@given(hs.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_primitive_matches_adaptive_quadrature(b):
    f = expr.parse("exp(sin(3*x))/(1+x)")
    F = f.primitive(0.0, 1.0)
    ref, _ = quad(lambda t: math.exp(math.sin(3 * t)) / (1 + t), 0.0, b, epsabs=1e-14)
    assert abs(F(b) - ref) < 1e-13
    # derivative of the primitive is the integrand
    assert abs(F.eval_deriv(b, 1) - f(b)) < 1e-14


def test_smoothstep_is_a_flat_step():
    s = sm.smoothstep(0.2, 0.4)
    assert s(0.1) == 0.0 and s(0.5) == 1.0
    assert abs(s(0.3) - 0.5) < 1e-15
    d = s.derivatives(np.array([0.2, 0.4]), 6)
    scale = np.max(np.abs(s.derivatives(np.linspace(0.2, 0.4, 41), 6)), axis=1)
    assert np.all(np.abs(d[1:]).max(axis=1) <= 1e-13 * scale[1:])
    t = np.linspace(0.2, 0.4, 101)
    assert np.all(np.diff(s(t)) >= 0)


def test_derivative_node_and_affine():
    f = expr.parse("sin(x)")
    assert abs(f.d(2)(0.7) + math.sin(0.7)) < 1e-15
    g = f.affine(2.0, 1.0)
    assert abs(g(0.3) - math.sin(1.6)) < 1e-15
    assert abs(g.eval_deriv(0.3, 1) - 2 * math.cos(1.6)) < 1e-14


def test_sampled_spline_order_limit():
    xs = np.linspace(0, 1, 41)
    s = sm.Sampled(xs, np.sin(xs))
    assert abs(s(0.33) - math.sin(0.33)) < 1e-8
    with pytest.raises(sm.OrderOverflow):
        s.derivatives(np.array([0.5]), 6)


@pytest.mark.parametrize("bad", ["", "2+", "y*2", "foo(x)", "smoothstep(x,1,x)", "x[0]"])
def test_parse_errors(bad):
    with pytest.raises(expr.ExpressionError):
        expr.parse(bad)


def test_caret_is_power_and_constants():
    f = expr.parse("2^3 + pi*0 + e - e + x^2")
    assert f(2.0) == 12.0
