"""Thin tube structures: edges of width eps joined at one interior node.

Each edge ``e_j`` runs from the common node ``O0`` to an outer node ``O_j``
along an axis direction ``t_j``; local coordinates are ``s`` (distance from
``O0``) and ``r`` (along ``n_j``, the left normal).  On every edge the flow is
a Dirichlet channel expansion; the interior node and the outer ends carry
layers computed in stretched variables.  The global approximation glues them
with the cutoffs ``chi_eps`` (regular part), ``eta`` (layer truncation) and
``theta`` (node pressure constant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from . import layers as ly
from . import profiles as pr
from .smooth import ZERO, SmoothFunction1D, _as_function


@dataclass
class TubeEdge:
    """Edge leaving the interior node.

    ``outer_profile`` is the velocity at the outer end along ``t`` (outward
    from the interior node), as ``eps^2 * phi(xi)`` with ``xi`` the centred
    transverse variable along ``n``.
    """

    direction: tuple
    length: float
    nu: SmoothFunction1D
    outer_profile: pr.TransversePoly
    force: SmoothFunction1D = field(default_factory=lambda: ZERO)

    def __post_init__(self):
        self.nu = _as_function(self.nu)
        self.force = _as_function(self.force)

    @property
    def t(self):
        return np.asarray(self.direction, dtype=float)

    @property
    def n(self):
        t = self.t
        return np.array([-t[1], t[0]])

    @property
    def frame(self):
        """Gamma_j: columns are the local axes in global coordinates."""
        return np.column_stack([self.t, self.n])


@dataclass
class TubeSpec:
    origin: tuple
    edges: list
    eps: float
    beta: float
    d0hat: float = float(np.sqrt(2.0) / 2.0)
    node_force: object = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.validate()

    @property
    def nodes(self):
        return [self.origin] + [self.origin + e.length * e.t for e in self.edges]

    @property
    def nu0(self) -> float:
        return float(self.edges[0].nu(0.0))

    def validate(self, tol: float = 1e-12):
        for e in self.edges:
            G = e.frame
            if np.max(np.abs(G.T @ G - np.eye(2))) > 1e-14:
                raise ValueError("edge frame is not orthogonal")
        lmin = min(e.length for e in self.edges)
        if not self.beta < lmin / 4:
            raise ValueError("beta must be below min |e| / 4")
        if self.flux_residual() > tol:
            raise ch.FluxMismatch(f"net boundary flux {self.flux_residual():.3e}")
        for e in self.edges:
            s0 = np.linspace(0.0, self.beta, 11)
            s1 = e.length - s0
            for s in (s0, s1):
                if np.max(np.abs(e.nu.eval_deriv(s, 1))) > 1e-10:
                    raise ValueError("viscosity is not flat on the node margins")
                if np.max(np.abs(e.force(s))) > 1e-12:
                    raise ValueError("edge force does not vanish on the node margins")
            if abs(float(e.nu(0.0)) - self.nu0) > 1e-12:
                raise ValueError("edges disagree on the viscosity at the interior node")

    def flux_residual(self) -> float:
        return float(abs(sum(pr.mean2(e.outer_profile) for e in self.edges)))

    def rects(self):
        """Physical rectangles of the edges plus the node square."""
        out = []
        o = self.origin
        h = 0.5 * self.eps
        for e in self.edges:
            a = o
            b = o + e.length * e.t
            lo = np.minimum(a, b) - h * np.abs(e.n)
            hi = np.maximum(a, b) + h * np.abs(e.n)
            out.append((lo[0], hi[0], lo[1], hi[1]))
        out.append((o[0] - h, o[0] + h, o[1] - h, o[1] + h))
        return out

    # direct problem data ------------------------------------------------

    def local(self, j, x, y):
        e = self.edges[j]
        dx, dy = x - self.origin[0], y - self.origin[1]
        s = dx * e.t[0] + dy * e.t[1]
        r = dx * e.n[0] + dy * e.n[1]
        inside = (s >= -1e-12) & (s <= e.length + 1e-12) & (np.abs(r) <= 0.5 * self.eps + 1e-12)
        return s, r, inside

    def nu_global(self, x, y):
        out = np.full(np.shape(x), self.nu0)
        for j, e in enumerate(self.edges):
            s, _, inside = self.local(j, x, y)
            sel = inside & (s > 0.5 * self.eps)
            if sel.any():
                out[sel] = e.nu(s[sel])
        return out

    def force_global(self, x, y):
        f1 = np.zeros(np.shape(x))
        f2 = np.zeros(np.shape(x))
        for j, e in enumerate(self.edges):
            if e.force.is_zero:
                continue
            s, _, inside = self.local(j, x, y)
            sel = inside & (s > 0.5 * self.eps)
            val = np.zeros(np.shape(x))
            val[sel] = e.force(s[sel])
            f1 += val * e.t[0]
            f2 += val * e.t[1]
        if self.node_force is not None:
            a, b = self.node_force((x - self.origin[0]) / self.eps, (y - self.origin[1]) / self.eps)
            f1 = f1 + a
            f2 = f2 + b
        return f1, f2

    def bc(self, x, y):
        """Dirichlet data: outer profiles on the end segments, zero on walls."""
        g1 = np.zeros(np.shape(x))
        g2 = np.zeros(np.shape(x))
        eps = self.eps
        for j, e in enumerate(self.edges):
            s, r, inside = self.local(j, x, y)
            end = inside & (np.abs(s - e.length) < 1e-9)
            val = eps**2 * e.outer_profile(r / eps)
            g1 = np.where(end, val * e.t[0], g1)
            g2 = np.where(end, val * e.t[1], g2)
        return g1, g2


@dataclass
class CutoffFamily:
    spec: TubeSpec

    def chi_eps(self, j, s):
        """Regular-field cutoff on edge ``j`` (product of both end transitions)."""
        e = self.spec.edges[j]
        eps = self.spec.eps
        return ly.chi(s / eps, self.spec.d0hat) * ly.chi((e.length - s) / eps, self.spec.d0hat)

    def eta(self, j, s, end: str):
        """Layer truncation near one end of edge ``j``.

        Equal to 1 within ``a = max(beta, (d0hat + 2) eps)`` of the end, so that
        it covers the whole region where the regular cutoff is below 1, and 0
        in the middle quarter when the edge is long enough for that.
        """
        e = self.spec.edges[j]
        eps = self.spec.eps
        a = max(self.spec.beta, (self.spec.d0hat + 2.0) * eps)
        width = max(3.0 * e.length / 8.0 - a, eps)
        dist = s if end == "inner" else e.length - s
        return 1.0 - ly.quintic_step((dist - a) / width)

    def theta(self, i, x, y):
        lmin = min(e.length for e in self.spec.edges)
        o = self.spec.nodes[i]
        return (np.hypot(x - o[0], y - o[1]) <= lmin / 2).astype(float)


@dataclass
class TubeConstants:
    c: list
    c_hat: list
    d: list  # per level, per edge: q_l at the interior node
    d_hat: list  # per edge: q_0 at the outer node
    plateaus: dict


@dataclass
class TubeSolution:
    spec: TubeSpec
    k: int
    expansions: list
    inner_layer: ly.LayerSolution
    outer_layers: list
    constants: TubeConstants
    cutoffs: CutoffFamily

    def evaluate(self, x, y):
        return assemble_global(self)(x, y)


def edge_constants(spec: TubeSpec):
    """``(c_hat_j, c_j)`` from the outer profiles, with Kirchhoff residual."""
    c_hat, c = [], []
    for e in spec.edges:
        ch_, c_ = ly.outer_constants(-e.outer_profile)
        c_hat.append(ch_)
        c.append(c_)
    return c_hat, c


def build_tube(spec: TubeSpec, k: int = 0, truncation_length: float = 10.0,
               resolution: int = 10, d0: float = 0.0) -> TubeSolution:
    """Solve all layers, fix the constants and build the edge expansions."""
    eps = spec.eps
    c_hat, c = edge_constants(spec)
    nu0 = spec.nu0
    node = ly.JunctionProblem(
        nu0, [ly.Branch(tuple(e.t), cj, truncation_length) for e, cj in zip(spec.edges, c)],
        d0hat=spec.d0hat, resolution=resolution,
        force=None if spec.node_force is None else lambda a, b: spec.node_force(a, b),
    )
    inner = ly.solve_junction(node)
    plats = inner.pressure_plateaus
    d = [[d0] * len(spec.edges)]
    if k >= 1:
        d.append([plats[j] for j in range(len(spec.edges))])
    for _ in range(2, k + 1):
        d.append([0.0] * len(spec.edges))
    n1 = pr.n1()
    exps, outers, d_hat = [], [], []
    for j, e in enumerate(spec.edges):
        prof = ch.ViscosityProfile.from_function(e.nu, length=e.length)
        Q = pr.mean2(e.outer_profile)
        bc = ch.DirichletData(n1 * (-12.0 * Q), e.outer_profile)
        E = ch.build_expansion(prof, e.force, k, "dirichlet", bc,
                               pin=(0.0, [d[l][j] for l in range(k + 1)]))
        exps.append(E)
        d_hat.append(float(E.levels[0].q(e.length)))
        nu_end = float(e.nu(e.length))
        outer = ly.JunctionProblem(
            nu_end, [ly.Branch((1.0, 0.0), c_hat[j], truncation_length)],
            d0hat=spec.d0hat, resolution=resolution,
            inlet=(-1.0 * e.outer_profile, pr.TransversePoly()),
        )
        outers.append(ly.solve_junction(outer))
    consts = TubeConstants(c, c_hat, d, d_hat, plats)
    return TubeSolution(spec, k, exps, inner, outers, consts, CutoffFamily(spec))


def assemble_global(sol: TubeSolution):
    """Evaluator ``(x, y) -> (u1, u2, p)`` of the glued approximation."""
    spec = sol.spec
    eps = spec.eps
    cut = sol.cutoffs
    lmin = min(e.length for e in spec.edges)

    def evaluate(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        u1 = np.zeros(x.shape)
        u2 = np.zeros(x.shape)
        p = np.zeros(x.shape)
        chi_tot = np.zeros(x.shape)
        eta_inner = np.zeros(x.shape)
        for j, e in enumerate(spec.edges):
            s, r, inside = spec.local(j, x, y)
            w = np.where(inside, cut.chi_eps(j, s), 0.0)
            chi_tot = np.maximum(chi_tot, w)
            eta_inner = np.maximum(eta_inner, np.where(inside, cut.eta(j, s, "inner"), 0.0))
            sel = w > 0
            if sel.any():
                a, b, c = ch.evaluate(sol.expansions[j], eps, s[sel], r[sel], with_layers=False)
                u1[sel] += w[sel] * (a * e.t[0] + b * e.n[0])
                u2[sel] += w[sel] * (a * e.t[1] + b * e.n[1])
                p[sel] += w[sel] * c
            # outer layer in the reflected frame (inward axis, same normal)
            eta_o = np.where(inside, cut.eta(j, s, "outer"), 0.0)
            sh = (e.length - s) / eps
            near = inside & (sh <= sol.outer_layers[j].grid.nx * sol.outer_layers[j].grid.h1 + 1e-9)
            if near.any():
                a, b, c = sol.outer_layers[j].evaluate(sh[near], r[near] / eps)
                wo = eta_o[near]
                u1[near] += eps**2 * wo * (-a * e.t[0] + b * e.n[0])
                u2[near] += eps**2 * wo * (-a * e.t[1] + b * e.n[1])
                p[near] += eps * wo * c
                th = (np.hypot(x[near] - spec.nodes[j + 1][0], y[near] - spec.nodes[j + 1][1])
                      <= lmin / 2)
                p[near] += (1.0 - w[near]) * th * sol.constants.d_hat[j]
        # interior node: layer in global stretched coordinates
        xi1 = (x - spec.origin[0]) / eps
        xi2 = (y - spec.origin[1]) / eps
        in_patch = (np.abs(xi1) <= 0.5 + 1e-12) & (np.abs(xi2) <= 0.5 + 1e-12)
        eta_inner = np.where(in_patch, 1.0, eta_inner)
        a, b, c = sol.inner_layer.evaluate(xi1, xi2)
        u1 += eps**2 * eta_inner * a
        u2 += eps**2 * eta_inner * b
        p += eps * eta_inner * c
        theta0 = np.hypot(x - spec.origin[0], y - spec.origin[1]) <= lmin / 2
        p += (1.0 - chi_tot) * theta0 * sol.constants.d[0][0]
        return u1, u2, p

    return evaluate


def continuity_check(spec: TubeSpec, constants: TubeConstants, expansions=None) -> dict:
    """Residuals of node pressure continuity, Kirchhoff balance and end matching."""
    d0 = constants.d[0]
    cont = float(max(abs(v - d0[0]) for v in d0))
    kirch = float(abs(sum(-cj / 6.0 for cj in constants.c)))
    ends = 0.0
    for j, e in enumerate(spec.edges):
        ends = max(ends, abs(constants.c[j] + constants.c_hat[j]))
        # the outer constant of the edge pressure, c int nu + d
        ends = max(ends, abs(constants.c_hat[j] - 6.0 * pr.mean2(e.outer_profile)))
        if expansions is not None:
            q0 = expansions[j].levels[0].q
            pred = constants.c[j] * e.nu.integral(0.0, e.length) + d0[j]
            ends = max(ends, abs(float(q0(e.length)) - pred))
    return {"pressure_continuity": cont, "kirchhoff": kirch, "outer_matching": float(ends)}


def section4_tshape(eps: float = 0.1, beta: float = 0.1) -> TubeSpec:
    """T-shaped structure ``(-1, 0] x (0, eps)  U  (0, eps) x (-0.45, 0.55)``.

    Inflow ``3 eps^2 eta (1 - eta)`` on the left end; outflows
    ``eps^2 eta (1 - eta)`` at the top and ``2 eps^2 eta (1 - eta)`` at the
    bottom.  On each edge ``nu`` follows ``2 s + 2`` in the middle and is
    constant near both nodes.
    """
    from .smooth import X, smoothstep

    origin = (eps / 2, eps / 2)
    par = pr.TransversePoly((0.25, 0.0, -1.0))
    specs = [((-1.0, 0.0), 1.0 + eps / 2, -3.0), ((0.0, 1.0), 0.55 - eps / 2, 1.0),
             ((0.0, -1.0), 0.45 + eps / 2, 2.0)]
    edges = []
    for t, length, scale in specs:
        window = smoothstep(beta, 2 * beta, X) * smoothstep(beta, 2 * beta, length - X)
        ramp = window.primitive(0.0, length)
        nu = 2.0 + 2.0 * ramp
        edges.append(TubeEdge(t, length, nu, par * scale))
    return TubeSpec(origin, edges, eps, beta)
