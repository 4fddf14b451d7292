import numpy as np
import pytest
from scipy.integrate import quad

from thinstokes import channel as ch
from thinstokes import expr
from thinstokes import profiles as pr

X1 = np.linspace(0.0, 1.0, 13)
XI = np.linspace(-0.5, 0.5, 7)


def random_periodic_data(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = rng.uniform(-0.8, 0.8, 4)
    phi = rng.uniform(0, 2 * np.pi)
    nu = f"2+{a:.6f}*sin(2*pi*x+{phi:.6f})+{0.3 * b:.6f}*cos(4*pi*x)"
    f1 = f"{1 + c:.6f}+{d:.6f}*cos(2*pi*x)+{0.5 * b:.6f}*sin(6*pi*x)"
    return nu, f1


def closed_form_q0(nu, f1, xs):
    """Periodic q0 from the explicit integral formula, via adaptive quadrature."""
    mf = quad(f1, 0, 1, epsabs=1e-14)[0]
    mn = quad(nu, 0, 1, epsabs=1e-14)[0]

    def g(t):
        return f1(t) - mf / mn * nu(t)

    def G(x):
        return quad(g, 0, x, epsabs=1e-14, epsrel=1e-13)[0]

    mean = quad(G, 0, 1, epsabs=1e-13)[0]
    return np.array([G(x) - mean for x in xs])


@pytest.mark.parametrize("seed", range(10))
def test_periodic_q0_closed_form(seed):
    nu_s, f1_s = random_periodic_data(seed)
    nu_f, f1_f = expr.parse(nu_s), expr.parse(f1_s)
    E = ch.build_expansion(ch.ViscosityProfile.from_function(nu_f), f1_f, 1, "periodic")
    ref = closed_form_q0(lambda t: float(nu_f(t)), lambda t: float(f1_f(t)), X1)
    assert np.max(np.abs(E.levels[0].q(X1) - ref)) < 1e-10
    assert E.levels[1].q.is_zero or np.max(np.abs(E.levels[1].q(X1))) < 1e-12
    # leading velocity: (2 / nu) (q0' - f1) N1
    q0p = E.levels[0].q.eval_deriv(X1, 1)
    u10 = E.levels[0].u1.evaluate(X1[:, None], XI[None, :])
    want = (2 / nu_f(X1) * (q0p - f1_f(X1)))[:, None] * pr.n1()(XI)[None, :]
    assert np.max(np.abs(u10 - want)) < 1e-12


def test_periodic_q2_corrected_form():
    # [DERIVED] level-2 Darcy balance gives q2 = -12 R <f1> nu' / <nu>
    nu = ch.ViscosityProfile.from_function(expr.parse("2+0.5*sin(2*pi*x)"))
    f1 = expr.parse("1+cos(2*pi*x)^2")
    E = ch.build_expansion(nu, f1, 2, "periodic")
    R = pr.r_constant()
    want = -12 * R * f1.integral() * nu.nu.eval_deriv(X1, 1) / nu.nu.integral()
    assert np.max(np.abs(E.levels[2].q(X1) - want)) < 1e-12
    printed = -12 * R * f1.integral() * (nu.nu(X1) / nu.nu.integral() - 1)
    assert np.max(np.abs(E.levels[2].q(X1) - printed)) > 1e-3


@pytest.fixture(scope="module")
def periodic_k3():
    nu = ch.ViscosityProfile.from_function(expr.parse("2+0.5*sin(2*pi*x)"))
    return ch.build_expansion(nu, expr.parse("1+cos(2*pi*x)^2"), 3, "periodic")


@pytest.fixture(scope="module")
def dirichlet_k2():
    nu = ch.ViscosityProfile.from_function(
        expr.parse("2+smoothstep(0.2,0.4,x)*smoothstep(0.2,0.4,1-x)"), rho=0.2)
    par = pr.TransversePoly((0.25, 0.0, -1.0))
    bc = ch.DirichletData(par * pr.TransversePoly((1.0, 0.0, 5.0)), par * 1.25)
    return ch.build_expansion(nu, expr.parse("0"), 2, "dirichlet", bc,
                              layer_options=dict(truncation_length=8, resolution=10))


@pytest.mark.parametrize("which", ["periodic_k3", "dirichlet_k2"])
def test_level_structure(which, request):
    E = request.getfixturevalue(which)
    X, Y = np.meshgrid(X1, XI, indexing="ij")
    for lev in E.levels:
        div = lev.u1.dx1() + lev.u2.dxi()
        assert div.is_zero or np.max(np.abs(div.evaluate(X, Y))) < 1e-10
        flux = lev.u1.mean2()
        vals = flux(X1) if not flux.is_zero else np.zeros_like(X1)
        assert np.max(np.abs(vals - lev.flux)) < 1e-10
        if not lev.p.is_zero:
            assert np.max(np.abs(lev.p.mean2()(X1))) < 1e-12
        # no-slip on the walls
        for wall in (-0.5, 0.5):
            for f in (lev.u1, lev.u2):
                if not f.is_zero:
                    assert np.max(np.abs(f.at(wall)(X1))) < 1e-12


@pytest.mark.parametrize("which", ["periodic_k3", "dirichlet_k2"])
def test_momentum_residual_vanishes_through_order_k(which, request):
    E = request.getfixturevalue(which)
    X, Y = np.meshgrid(X1, XI, indexing="ij")
    for n, (r1, r2) in ch.residual_series(E).items():
        if n > E.k:
            continue
        for r in (r1, r2):
            assert r.is_zero or np.max(np.abs(r.evaluate(X, Y))) < 1e-10, n


def test_dirichlet_layers_restore_end_data(dirichlet_k2):
    E = dirichlet_k2
    eps = 0.05
    h = eps / 10
    y = -eps / 2 + (np.arange(10) + 0.5) * h
    u1, _, _ = ch.evaluate(E, eps, np.zeros_like(y), y)
    want = eps**2 * E.bc.inflow(y / eps)
    # up to the uniform O(h^2) shift that makes the discrete inlet flux vanish
    assert np.max(np.abs(u1 - want)) < 5e-3 * np.max(want)
    assert np.ptp(u1 - want) < 1e-12
    m1, _ = E.mismatch(0, "left")
    assert abs(pr.mean2(m1)) < 1e-12


def test_dirichlet_flux_mismatch_rejected():
    nu = ch.ViscosityProfile.from_function(expr.parse("2"))
    par = pr.TransversePoly((0.25, 0.0, -1.0))
    with pytest.raises(ch.FluxMismatch):
        ch.build_expansion(nu, 0.0, 0, "dirichlet", ch.DirichletData(par, par * 2))


def test_rectangle_q0_closed_form():
    # [PAPER] q0(x1) = -x1 (x1 + 2) + 3
    E = ch.section4_rectangle(0)
    assert np.max(np.abs(E.levels[0].q(X1) - (-X1 * (X1 + 2) + 3))) < 1e-10


def test_order_overflow_for_sampled_viscosity():
    from thinstokes.smooth import OrderOverflow, Sampled

    xs = np.linspace(0, 1, 65)
    nu = ch.ViscosityProfile.from_function(Sampled(xs, 2 + np.sin(2 * np.pi * xs), True))
    with pytest.raises(OrderOverflow):
        ch.build_expansion(nu, 1.0, 2, "periodic")


def test_evaluate_rejects_points_outside(periodic_k3):
    with pytest.raises(ValueError):
        ch.evaluate(periodic_k3, 0.1, 0.5, 0.2)
