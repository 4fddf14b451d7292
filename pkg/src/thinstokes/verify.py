"""Convergence studies and benchmark reports.

Every study compares an assembled asymptotic field with a direct MAC solve
on the same domain.  Runs are deterministic: meshes are fixed by the
resolution policy and no randomized algorithm is used.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channel as ch
from . import expr
from . import profiles as pr
from . import stokes as st
from . import tube as tb

CASES = ("periodic", "dirichlet", "tube")
# orders of the three rate bounds for k = 0
NOMINAL_SLOPE = {"periodic": 2.5, "dirichlet": 1.5, "tube": 0.5}


class MeshPolicyFailure(RuntimeError):
    """The direct mesh did not settle within the resolution budget."""


@dataclass
class MeshPolicy:
    """Cells per channel width: start, doubling until the norm settles.

    The run stops when the error changes by less than ``rel_change`` under
    one halving of ``h`` or when ``max_resolution`` would be exceeded.  With
    ``strict`` the latter raises :class:`MeshPolicyFailure`.
    """

    start: int = 10
    max_resolution: int = 40
    rel_change: float = 0.05
    strict: bool = False

    def resolutions(self):
        m = self.start
        while m <= self.max_resolution:
            yield m
            m *= 2


@dataclass
class ChannelCase:
    """Straight channel ``(0, length) x (-eps/2, eps/2)``."""

    case: str = "periodic"
    nu: str = "2+0.5*sin(2*pi*x)"
    f1: str = "1+cos(2*pi*x)^2"
    inflow: tuple = (0.25, 0.0, -1.0)
    outflow: tuple = (0.25, 0.0, -1.0)
    rho: float = 0.0
    length: float = 1.0
    truncation_length: float = 10.0

    def viscosity(self) -> ch.ViscosityProfile:
        return ch.ViscosityProfile.from_function(expr.parse(self.nu), rho=self.rho,
                                                 length=self.length)

    def data(self):
        if self.case == "periodic":
            return None
        return ch.DirichletData(pr.TransversePoly(tuple(self.inflow)),
                                pr.TransversePoly(tuple(self.outflow)))

    def expansion(self, k: int, resolution: int = 10) -> ch.ExpansionSet:
        opts = None
        if self.case == "dirichlet":
            opts = dict(truncation_length=self.truncation_length, resolution=resolution)
        return ch.build_expansion(self.viscosity(), expr.parse(self.f1), k, self.case,
                                  self.data(), layer_options=opts)

    def direct(self, eps: float, resolution: int) -> st.MacField:
        h = eps / resolution
        periodic = self.case == "periodic"
        grid = st.MacGrid([(0.0, self.length, -eps / 2, eps / 2)], h, h, periodic=periodic)
        nu = self.viscosity().nu
        f1 = expr.parse(self.f1)

        def force(x, y):
            return f1(x), np.zeros(np.shape(x))

        if periodic:
            return st.solve(grid, lambda x, y: nu(x), force, None)
        data = self.data()
        L = self.length

        def bc(x, y):
            xi = np.clip(y / eps, -0.5, 0.5)
            u = np.where(x < 1e-12, eps**2 * data.inflow(xi),
                         np.where(x > L - 1e-12, eps**2 * data.outflow(xi), 0.0))
            return u, np.zeros(np.shape(x))

        return st.solve(grid, lambda x, y: nu(x), force, bc, flux_correction=True)

    def error(self, eps: float, k: int, resolution: int) -> dict:
        expansion = self.expansion(k, resolution)
        field_ = self.direct(eps, resolution)
        return st.error_norms(field_, lambda x, y: ch.evaluate(expansion, eps, x, y))


@dataclass
class TubeCase:
    """T-shaped tube of the second benchmark, rebuilt for every eps."""

    beta: float = 0.1
    truncation_length: float = 10.0

    def error(self, eps: float, k: int, resolution: int) -> dict:
        field_, sol = tshape_pair(eps, k, resolution, self.beta, self.truncation_length)
        return st.error_norms(field_, tb.assemble_global(sol))


def tshape_pair(eps, k=0, resolution=10, beta=0.1, truncation_length=10.0):
    """Direct solve and asymptotic solution for the T-shape at one eps."""
    spec = tb.section4_tshape(eps, beta)
    sol = tb.build_tube(spec, k, truncation_length=truncation_length, resolution=resolution)
    h = eps / resolution
    grid = st.MacGrid(spec.rects(), h, h)
    field_ = st.solve(grid, spec.nu_global, spec.force_global, spec.bc)
    return field_, sol


def make_case(case: str, **overrides):
    if case == "tube":
        return TubeCase(**overrides)
    if case == "periodic":
        return ChannelCase("periodic", **overrides)
    if case == "dirichlet":
        base = dict(nu="2+smoothstep(0.2,0.4,x)*smoothstep(0.2,0.4,1-x)", f1="0",
                    inflow=(0.25, 0.0, 0.25, 0.0, -5.0),  # (1/4 - xi^2)(1 + 5 xi^2)
                    outflow=(0.3125, 0.0, -1.25), rho=0.2)
        base.update(overrides)
        return ChannelCase("dirichlet", **base)
    raise ValueError(f"unknown case {case!r}")


@dataclass
class ConvergenceStudy:
    case: str
    k: int
    eps_list: list
    norms: list = field(default_factory=list)
    resolutions: list = field(default_factory=list)
    mesh_settled: list = field(default_factory=list)
    mesh_history: list = field(default_factory=list)
    slope: float = float("nan")
    slope_band: float = float("nan")
    intercept: float = float("nan")

    def __post_init__(self):
        e = np.asarray(self.eps_list, float)
        if e.size < 4:
            raise ValueError("a rate study needs at least 4 eps values")
        if not np.allclose(e[:-1] / e[1:], 2.0, rtol=1e-12, atol=0):
            raise ValueError("eps_list must decrease with ratio 2")

    def fit(self):
        slope, intercept, band = fit_slope(self.eps_list, self.norms)
        self.slope, self.intercept, self.slope_band = slope, intercept, band
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "H1_error", "resolution", "mesh_settled"])
        for row in zip(self.eps_list, self.norms, self.resolutions, self.mesh_settled):
            w.writerow([repr(float(row[0])), repr(float(row[1])), row[2], int(row[3])])
        return buf.getvalue()


def fit_slope(eps_list, norms):
    """Least-squares slope of ``log norm`` against ``log eps``.

    Returns ``(slope, intercept, band)`` where ``band`` is two standard
    errors of the slope.
    """
    x = np.log(np.asarray(eps_list, float))
    y = np.log(np.asarray(norms, float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    band = float("nan")
    if x.size > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (x.size - 2)
        band = 2.0 * float(np.sqrt(s2 / np.sum((x - x.mean()) ** 2)))
    return float(coef[0]), float(coef[1]), band


def _settle(case_obj, eps, k, policy: MeshPolicy):
    history = []
    prev = None
    for m in policy.resolutions():
        val = case_obj.error(eps, k, m)["H1_velocity"]
        history.append((m, val))
        if prev is not None and abs(val - prev) <= policy.rel_change * abs(val):
            return val, m, True, history
        prev = val
    if policy.strict:
        raise MeshPolicyFailure(f"eps={eps}: H1 error did not settle, history {history}")
    return history[-1][1], history[-1][0], False, history


def max_workers(requested: int | None = None) -> int:
    """Worker count, capped by ``THINSTOKES_THREADS`` when set."""
    cap = os.environ.get("THINSTOKES_THREADS")
    n = requested or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def run_rate_study(case, k: int = 0, eps_list=(1 / 8, 1 / 16, 1 / 32, 1 / 64),
                   policy: MeshPolicy | None = None, workers: int | None = None,
                   **case_options) -> ConvergenceStudy:
    """H1 errors of the order-``k`` approximation over ``eps_list``."""
    policy = policy or MeshPolicy()
    name = case if isinstance(case, str) else getattr(case, "case", "tube")
    case_obj = make_case(case, **case_options) if isinstance(case, str) else case
    study = ConvergenceStudy(name, k, [float(e) for e in eps_list])
    n = max_workers(workers)
    if n > 1:
        with ProcessPoolExecutor(n) as pool:
            results = list(pool.map(_settle, [case_obj] * len(eps_list), study.eps_list,
                                    [k] * len(eps_list), [policy] * len(eps_list)))
    else:
        results = [_settle(case_obj, e, k, policy) for e in study.eps_list]
    for val, m, ok, hist in results:
        study.norms.append(float(val))
        study.resolutions.append(int(m))
        study.mesh_settled.append(bool(ok))
        study.mesh_history.append([[int(a), float(b)] for a, b in hist])
    return study.fit()


def _exponent(e_coarse, e_fine, eps_coarse, eps_fine):
    return float(np.log(e_coarse / e_fine) / np.log(eps_coarse / eps_fine))


def run_section4_rectangle(eps_list=(0.1, 0.05), resolutions=(10, 20)) -> dict:
    """First benchmark: rectangle with ``nu = 2 x1 + 2`` and parabolic ends."""
    expansion = ch.section4_rectangle(0)
    xs = np.linspace(0.0, 1.0, 201)
    q0_err = float(np.max(np.abs(expansion.levels[0].q(xs) - (-xs * (xs + 2) + 3))))
    runs = []
    for m in resolutions:
        for eps in eps_list:
            h = eps / m
            grid = st.MacGrid([(0.0, 1.0, -eps / 2, eps / 2)], h, h)

            def bc(x, y, eps=eps):
                eta = np.clip(y / eps + 0.5, 0.0, 1.0)
                end = (x < 1e-12) | (x > 1 - 1e-12)
                return np.where(end, eps**2 * eta * (1 - eta), 0.0), np.zeros(np.shape(x))

            field_ = st.solve(grid, lambda x, y: 2 * x + 2, None, bc)
            e = st.error_norms(field_, lambda x, y, eps=eps: ch.evaluate(expansion, eps, x, y))
            runs.append({"eps": float(eps), "resolution": int(m),
                         "max_velocity": e["max_velocity"], "max_pressure": e["max_pressure"],
                         "H1_velocity": e["H1_velocity"],
                         "log_ratio_velocity": float(np.log(e["max_velocity"]) / np.log(eps)),
                         "log_ratio_pressure": float(np.log(e["max_pressure"]) / np.log(eps))})
    exponents = {}
    for m in resolutions:
        rs = [r for r in runs if r["resolution"] == m]
        a, b = rs[0], rs[-1]
        exponents[str(m)] = {
            "velocity": _exponent(a["max_velocity"], b["max_velocity"], a["eps"], b["eps"]),
            "pressure": _exponent(a["max_pressure"], b["max_pressure"], a["eps"], b["eps"]),
        }
    return {"benchmark": "rectangle", "q0_closed_form_error": q0_err, "runs": runs,
            "exponents": exponents, "expected": {"velocity": 5.0, "pressure": 1.0}}


def _branch_mask(spec, x, y):
    """Points in the middle half of an edge, away from both nodes."""
    mask = np.zeros(np.shape(x), bool)
    for j, e in enumerate(spec.edges):
        s, _, inside = spec.local(j, x, y)
        mask |= inside & (s > 0.25 * e.length) & (s < 0.75 * e.length)
    return mask


def run_section4_tshape(eps: float = 0.1, scaling_eps=(0.1, 0.05), resolution: int = 10,
                        section_x2: float = 0.2) -> dict:
    """Second benchmark: T-shape with parabolic inflow and two outflows."""
    field_, sol = tshape_pair(eps, 0, resolution)
    spec = sol.spec
    ev = tb.assemble_global(sol)
    g = field_.grid
    xv, yv = g.v_positions()
    j = int(np.argmin(np.abs(yv[0] - section_x2)))
    col = np.isfinite(field_.u2[:, j]) & (xv[:, j] > 0) & (xv[:, j] < eps)
    direct = field_.u2[col, j]
    asym = ev(xv[col, j], yv[col, j])[1]
    rel = float(np.max(np.abs(direct - asym)) / np.max(np.abs(direct)))
    profile = [[float(a), float(b), float(c)] for a, b, c in zip(xv[col, j], direct, asym)]
    scaling = []
    for e in scaling_eps:
        f_e, s_e = tshape_pair(e, 0, resolution)
        ev_e = tb.assemble_global(s_e)
        ge = f_e.grid
        xu, yu = ge.u_positions()
        xv2, yv2 = ge.v_positions()
        du = np.abs(f_e.u1 - ev_e(xu, yu)[0])
        dv = np.abs(f_e.u2 - ev_e(xv2, yv2)[1])
        mu = _branch_mask(s_e.spec, xu, yu)
        mv = _branch_mask(s_e.spec, xv2, yv2)
        err = float(max(np.nanmax(np.where(mu, du, np.nan)), np.nanmax(np.where(mv, dv, np.nan))))
        scaling.append({"eps": float(e), "branch_max_velocity_error": err})
    exps = [_exponent(a["branch_max_velocity_error"], b["branch_max_velocity_error"],
                      a["eps"], b["eps"]) for a, b in zip(scaling[:-1], scaling[1:])]
    return {"benchmark": "tshape", "eps": float(eps), "section_x2": float(g.y0 + j * g.h2),
            "section_relative_error": rel, "section_profile": profile,
            "branch_scaling": scaling, "branch_exponents": exps,
            "boundary_flux": float(field_.info["net_flux"]),
            "kirchhoff": tb.continuity_check(spec, sol.constants)["kirchhoff"],
            "constants": {"c": [float(c) for c in sol.constants.c],
                          "plateaus": {str(a): float(b)
                                       for a, b in sol.constants.plateaus.items()}}}


def discrete_residual(expansion: ch.ExpansionSet, eps: float, resolution: int = 10) -> dict:
    """Discrete momentum operator applied to the periodic asymptotic fields.

    Compares the discrete residual with the continuous remainder
    ``-eps^(k+1) F^k`` sampled at the same faces.
    """
    if expansion.case != "periodic":
        raise ValueError("the residual cross-check uses the periodic channel")
    h = eps / resolution
    grid = st.MacGrid([(0.0, expansion.length, -eps / 2, eps / 2)], h, h, periodic=True)
    nu = expansion.nu.nu
    ops = st.operators(grid, lambda x, y: nu(x))
    xu, yu = grid.u_positions()
    xv, yv = grid.v_positions()
    xc, yc = grid.cell_centres()
    U = np.concatenate([ch.evaluate(expansion, eps, xu, yu)[0].ravel(),
                        ch.evaluate(expansion, eps, xv, yv)[1].ravel()])
    m = grid.masks()
    U[: ops.nU][~m["u_exists"].ravel()] = 0.0
    U[ops.nU:][~m["v_exists"].ravel()] = 0.0
    p = ch.evaluate(expansion, eps, xc, yc)[2][grid.active]
    f1 = expansion.f1
    fvec = np.concatenate([f1(xu.ravel()), np.zeros(xv.size)])
    r = ops.A @ U - ops.D[:, ops.rows].T @ p - fvec[ops.rows]
    area = grid.h1 * grid.h2
    disc = float(np.sqrt(np.sum(r**2) * area))
    # continuous remainder at the same faces
    series = ch.residual_series(expansion)
    cu = np.zeros(xu.shape)
    cv = np.zeros(xv.shape)
    for n, (r1, r2) in series.items():
        if not r1.is_zero:
            cu += eps**n * r1.evaluate(xu, yu / eps)
        if not r2.is_zero:
            cv += eps**n * r2.evaluate(xv, yv / eps)
    cont_full = np.concatenate([cu.ravel(), cv.ravel()])[ops.rows]
    cont = float(np.sqrt(np.sum(cont_full**2) * area))
    return {"eps": float(eps), "k": expansion.k, "discrete": disc, "continuous": cont,
            "ratio": disc / cont if cont > 0 else float("inf")}


def write_report(report: dict, directory, name: str = "report.json"):
    """Deterministic JSON (sorted keys, fixed float repr)."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")
