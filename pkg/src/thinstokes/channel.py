"""Order-k asymptotic expansion of variable-viscosity Stokes flow in a thin channel.

The channel is ``(0, 1) x (-eps/2, eps/2)`` with viscosity ``nu(x1)`` and body
force ``f1(x1) e1``.  With ``xi = x2 / eps`` the ansatz reads

    u1 = sum_j eps^(j+2) u1_j(x1, xi)
    u2 = sum_j eps^(j+3) u2_j(x1, xi)
    p  = sum_j eps^(j+1) p_j(x1, xi) + eps^j q_j(x1)

Each level is computed exactly in ``xi`` (polynomials) and exactly in ``x1``
up to the derivative graph of :mod:`thinstokes.smooth`.  The longitudinal
pressure ``q_j`` solves a Darcy-type equation fixed either by periodicity or
by the prescribed end flux.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import profiles as pr
from .fields import SeparableField
from .smooth import ZERO, Constant, OrderOverflow, SmoothFunction1D, X, _as_function


class FluxMismatch(ValueError):
    """Inflow and outflow fluxes differ."""


@dataclass
class ViscosityProfile:
    """``nu = nu0 + nu1(x1)`` bounded below by ``kappa``.

    ``nu1`` vanishes within ``rho`` of both channel ends (``rho = 0`` for
    periodic channels, where no flat margin is required).
    """

    nu0: float
    nu1: SmoothFunction1D = field(default_factory=lambda: ZERO)
    kappa: float | None = None
    rho: float = 0.0
    length: float = 1.0

    def __post_init__(self):
        self.nu1 = _as_function(self.nu1)
        if self.kappa is None:
            s = self.sample()
            self.kappa = float(0.5 * s.min())
        self.validate()

    @classmethod
    def from_function(cls, nu, rho: float = 0.0, length: float = 1.0, kappa=None):
        """Split a full viscosity function into constant and varying parts."""
        nu = _as_function(nu)
        nu0 = float(nu(0.0))
        return cls(nu0, nu - nu0, kappa=kappa, rho=rho, length=length)

    @property
    def nu(self) -> SmoothFunction1D:
        return self.nu1 + self.nu0

    def sample(self, n: int = 401) -> np.ndarray:
        return self.nu(np.linspace(0.0, self.length, n))

    def validate(self):
        vals = self.sample()
        if self.kappa <= 0 or vals.min() < self.kappa:
            raise ValueError(f"viscosity drops below kappa={self.kappa}")
        if self.rho > 0:
            t = np.concatenate(
                [np.linspace(0, self.rho, 21)[:-1], self.length - np.linspace(0, self.rho, 21)[:-1]]
            )
            if np.max(np.abs(self.nu1(t))) > 1e-12:
                raise ValueError("nu1 does not vanish on the flat margins")


@dataclass
class DirichletData:
    """End profiles of the leading velocity, ``u = eps^2 (phi(xi), 0)``."""

    inflow: pr.TransversePoly
    outflow: pr.TransversePoly

    def flux_in(self) -> float:
        return pr.mean2(self.inflow)

    def flux_out(self) -> float:
        return pr.mean2(self.outflow)


@dataclass
class Level:
    u1: SeparableField
    u2: SeparableField
    p: SeparableField
    q: SmoothFunction1D
    flux: float


@dataclass
class ExpansionSet:
    """All levels of the expansion plus optional end layers."""

    k: int
    case: str
    nu: ViscosityProfile
    f1: SmoothFunction1D
    levels: list
    bc: DirichletData | None = None
    layers: dict = field(default_factory=dict)
    length: float = 1.0

    def level(self, j: int) -> Level:
        if j < 0:
            return _ZERO_LEVEL
        return self.levels[j]

    def mismatch(self, j: int, end: str = "left"):
        """Velocity defect at an end that the layer of level ``j`` removes.

        Returned as transverse polynomials ``(m1, m2)`` in the layer frame,
        whose first axis points into the channel.
        """
        x = 0.0 if end == "left" else self.length
        m1 = -self.level(j).u1.section(x)
        m2 = -self.level(j - 1).u2.section(x)
        if j == 0 and self.bc is not None:
            m1 = m1 + (self.bc.inflow if end == "left" else self.bc.outflow)
        if end == "right":
            m1 = -m1
        return m1, m2


_ZERO_LEVEL = Level(SeparableField(), SeparableField(), SeparableField(), ZERO, 0.0)


def solve_qj(
    nu: ViscosityProfile,
    rhs: SmoothFunction1D | None,
    j: int,
    case: str,
    flux_constraint: float = 0.0,
    normalization=("mean",),
    f1: SmoothFunction1D = ZERO,
    rhs_primitive: SmoothFunction1D | None = None,
):
    """Solve ``-d/dx1 [ (q' - delta_j0 f1) / (6 nu) ] = rhs``.

    Returns ``(q, q_prime, flux)`` where ``flux`` is the constant ``Q`` with
    ``(q' - delta f1) / (6 nu) = -(G + Q)`` and ``G`` a primitive of ``rhs``
    (``rhs_primitive`` when supplied, otherwise computed by quadrature).
    In the periodic case ``Q`` follows from periodicity of ``q`` and ``q`` has
    zero mean.  Otherwise ``Q = flux_constraint`` and ``normalization`` is
    ``("pin", x, value)``.
    """
    L = nu.length
    nuf = nu.nu
    if rhs_primitive is None:
        rhs_primitive = ZERO if rhs is None or rhs.is_zero else rhs.primitive(0.0, L)
    G = rhs_primitive
    force = f1 if j == 0 else ZERO
    if case == "periodic":
        if rhs is not None and not rhs.is_zero:
            drift = G(L) - G(0.0)
            scale = max(1.0, float(np.max(np.abs(G(np.linspace(0, L, 33))))))
            if abs(drift) > 1e-10 * scale:
                raise ValueError(f"periodic rhs has nonzero integral {drift:.3e}")
        weighted = (nuf * G).integral(0.0, L) if not G.is_zero else 0.0
        Q = (force.integral(0.0, L) - 6.0 * weighted) / (6.0 * nuf.integral(0.0, L))
    else:
        Q = float(flux_constraint)
    qp = force - 6.0 * nuf * (G + Q)
    if isinstance(qp, Constant) or qp.is_zero:
        base = qp * X
    else:
        base = qp.primitive(0.0, L)
    if normalization[0] == "mean":
        q = base - base.integral(0.0, L) / L
    else:
        _, xp, val = normalization
        q = base - (float(base(xp)) - val)
    return q, qp, Q


def build_expansion(
    nu: ViscosityProfile,
    f1,
    k: int,
    case: str = "periodic",
    flux_or_bc: DirichletData | None = None,
    pin=None,
    layer_options: dict | None = None,
) -> ExpansionSet:
    """Compute levels ``0..k``.

    ``case`` is ``"periodic"`` or ``"dirichlet"``.  In the Dirichlet case
    ``flux_or_bc`` gives the end profiles; the pressure is pinned by
    ``q_j(pin[0]) = pin[1]`` (default ``q_j(L) = 0``), where ``pin[1]`` may be
    a per-level sequence.  End layers are solved
    when ``layer_options`` is given (see :mod:`thinstokes.layers`).
    """
    f1 = _as_function(f1)
    need = 2 * k + 2
    for fn in (nu.nu, f1):
        if fn.max_order < need:
            raise OrderOverflow(f"order {k} needs {need} derivatives, got {fn.max_order}")
    L = nu.length
    nuf = nu.nu
    if case == "dirichlet":
        if flux_or_bc is None:
            raise ValueError("dirichlet case needs boundary profiles")
        fin, fout = flux_or_bc.flux_in(), flux_or_bc.flux_out()
        if abs(fin - fout) > 1e-12:
            raise FluxMismatch(f"inflow flux {fin} != outflow flux {fout}")
        if pin is None:
            pin = (L, 0.0)
    elif case != "periodic":
        raise ValueError(f"unknown case {case!r}")

    exp = ExpansionSet(k, case, nu, f1, [], bc=flux_or_bc, length=L)
    n1 = pr.n1()
    for j in range(k + 1):
        lm1, lm2, lm3 = exp.level(j - 1), exp.level(j - 2), exp.level(j - 3)
        # transverse pressure from the second momentum equation
        src = (nuf * (lm1.u1.dxi() + lm3.u2.dx1())).dx1() * 0.5 + lm1.u2.dxi(2) * nuf
        p = src.d_inv_tilde()
        # first momentum equation, written as d_xi^2 u1_j = A_j + (2/nu)(q' - f)
        A = lm2.u2.dxi().dx1() + ((nuf * lm2.u1.dx1()).dx1() - lm1.p.dx1()) * (2.0 / nuf)
        B = A.d_inv2()
        G = B.mean2()
        if case == "periodic":
            q, qp, Q = solve_qj(nu, G.d(1), j, case, f1=f1, rhs_primitive=G)
        else:
            Q = flux_or_bc.flux_in() if j == 0 else 0.0
            target = pin[1][j] if np.ndim(pin[1]) else pin[1]
            q, qp, Q = solve_qj(
                nu, G.d(1), j, case, Q, ("pin", pin[0], target), f1=f1, rhs_primitive=G
            )
        u1 = -B + SeparableField.product(-12.0 * (G + Q), n1)
        u2 = -(u1.dx1().d_inv())
        exp.levels.append(Level(u1, u2, p, q, Q))

    if case == "dirichlet" and layer_options is not None:
        from .layers import attach_channel_layers

        attach_channel_layers(exp, **layer_options)
    return exp


def evaluate(expansion: ExpansionSet, eps: float, x1, x2, with_layers: bool = True):
    """Assembled ``(u1, u2, p)`` at physical points ``(x1, x2)``."""
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    if np.any(np.abs(x2) > 0.5 * eps * (1 + 1e-12)) or np.any(
        (x1 < -1e-12) | (x1 > expansion.length + 1e-12)
    ):
        raise ValueError("point outside the channel")
    xi = x2 / eps
    u1 = np.zeros(x1.shape)
    u2 = np.zeros(x1.shape)
    p = np.zeros(x1.shape)
    cache = {}
    for j, lev in enumerate(expansion.levels):
        u1 += eps ** (j + 2) * lev.u1.evaluate(x1, xi, cache)
        u2 += eps ** (j + 3) * lev.u2.evaluate(x1, xi, cache)
        p += eps ** (j + 1) * lev.p.evaluate(x1, xi, cache)
        p += eps**j * _eval_fn(lev.q, x1)
    if with_layers and expansion.layers:
        for (end, j), layer in expansion.layers.items():
            if end == "left":
                s1 = x1 / eps
                a, b, c = layer.evaluate(s1, xi)
            else:
                s1 = (expansion.length - x1) / eps
                a, b, c = layer.evaluate(s1, xi)
                a = -a
            u1 += eps ** (j + 2) * a
            u2 += eps ** (j + 2) * b
            p += eps ** (j + 1) * c
    return u1, u2, p


def _eval_fn(fn, x):
    if fn.is_zero:
        return np.zeros(np.shape(x))
    ux, inv = np.unique(np.ravel(x), return_inverse=True)
    return fn(ux)[inv].reshape(np.shape(x))


def residual_series(expansion: ExpansionSet):
    """PDE residual of the truncated regular fields, by powers of eps.

    Returns ``{n: (r1, r2)}`` with ``-div(nu D u) + grad p - f = sum eps^n (r1, r2)``.
    """
    nuf = expansion.nu.nu
    out = {}

    def add(n, comp, fld):
        if fld.is_zero:
            return
        r = out.setdefault(n, [SeparableField(), SeparableField()])
        r[comp] = r[comp] + fld

    for j, lev in enumerate(expansion.levels):
        add(j + 2, 0, -(nuf * lev.u1.dx1()).dx1())
        add(j, 0, -(lev.u1.dxi(2) * nuf) * 0.5)
        add(j + 2, 0, -(lev.u2.dxi().dx1() * nuf) * 0.5)
        add(j + 1, 0, lev.p.dx1())
        add(j, 0, SeparableField([lev.q.d(1)]))
        add(j + 3, 1, -(nuf * lev.u2.dx1()).dx1() * 0.5)
        add(j + 1, 1, -(nuf * lev.u1.dxi()).dx1() * 0.5)
        add(j + 1, 1, -(lev.u2.dxi(2) * nuf))
        add(j, 1, lev.p.dxi())
    add(0, 0, SeparableField([-expansion.f1]))
    return {n: tuple(v) for n, v in sorted(out.items())}


def residual_fk(expansion: ExpansionSet, k: int | None = None):
    """``F^k`` as a list of component pairs multiplying ``eps^0, eps^1, ...``.

    The truncated regular fields satisfy the momentum equations up to
    ``-eps^(k+1) * sum_i eps^i F_i``.
    """
    if k is None:
        k = expansion.k
    series = residual_series(expansion)
    top = max(series, default=k + 1)
    out = []
    for n in range(k + 1, max(top, k + 1) + 1):
        r1, r2 = series.get(n, (SeparableField(), SeparableField()))
        out.append((-r1, -r2))
    return out


def section4_rectangle(k: int = 0) -> ExpansionSet:
    """Rectangle of the first benchmark: ``nu = 2 x1 + 2``, unit parabola in/out."""
    nu = ViscosityProfile(2.0, 2.0 * X, kappa=1.0)
    # eta (1 - eta) with eta = xi + 1/2, in the centered variable
    par = pr.TransversePoly((0.25, 0.0, -1.0))
    bc = DirichletData(par, par)
    return build_expansion(nu, 0.0, k, "dirichlet", bc, pin=(1.0, 0.0))
