"""Boundary-layer Stokes problems in stretched variables.

Two families are solved on truncated domains with the MAC solver at
constant viscosity ``nu0``:

* half-strips ``(0, L) x (-1/2, 1/2)`` carrying the velocity defect of a
  channel expansion at an end (layer form: inlet = defect, zero far away);
* junctions: unions of unit-width branches around a node, solved for the
  total field with Poiseuille data at the branch ends.  The layer is the
  total field minus the cut-off regular field, and the far-field pressure
  offsets (plateaus) of the branches are read off the solution.

Layer velocities scale as ``eps^(l+2)`` and pressures as ``eps^(l+1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import distance_transform_edt

from . import profiles as pr
from . import stokes as st


def quintic_step(t):
    """``0`` for ``t <= 0``, ``1`` for ``t >= 1``, C2 quintic in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def chi(s, d0hat: float):
    """Junction cutoff in layer units: 0 below ``d0hat + 1``, 1 beyond ``d0hat + 2``."""
    return quintic_step(np.asarray(s, dtype=float) - (d0hat + 1.0))


def check_compatibility(mismatch) -> float:
    """Cross-section mean of the normal component of an inlet defect."""
    m1 = mismatch[0] if isinstance(mismatch, (tuple, list)) else mismatch
    return pr.mean2(m1)


class CompatibilityError(ValueError):
    pass


def _reflect_dead(arr, axis):
    """Fill dead entries with ``-u`` of the live neighbour along ``axis``.

    Tangential faces sit half a cell from the wall, so the linear interpolant
    then vanishes on the wall.  Other dead entries are set to zero.
    """
    arr = np.asarray(arr, float)
    live = np.isfinite(arr)
    val = np.where(live, arr, 0.0)
    ghost = np.zeros_like(val)
    count = np.zeros_like(val)
    n = arr.shape[axis]
    for step in (1, -1):
        nb_live = np.zeros_like(live)
        nb_val = np.zeros_like(val)
        src = [slice(None)] * 2
        dst = [slice(None)] * 2
        src[axis] = slice(1, n) if step == 1 else slice(0, n - 1)
        dst[axis] = slice(0, n - 1) if step == 1 else slice(1, n)
        nb_live[tuple(dst)] = live[tuple(src)]
        nb_val[tuple(dst)] = val[tuple(src)]
        use = ~live & nb_live
        ghost[use] -= nb_val[use]
        count[use] += 1
    return np.where(live, val, np.where(count > 0, ghost / np.maximum(count, 1), 0.0))


@dataclass
class LayerSolution:
    """Layer field sampled on a MAC grid in stretched coordinates."""

    grid: st.MacGrid
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray
    decay_rate: float = float("nan")
    pressure_plateaus: dict = field(default_factory=dict)
    total: st.MacField | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        g = self.grid
        xu, yu = g.u_positions()
        xv, yv = g.v_positions()
        xc, yc = g.cell_centres()

        y_lo, y_hi = g.y0, g.y0 + g.ny * g.h2
        x_lo, x_hi = g.x0, g.x0 + g.nx * g.h1

        def interp(xs, ys, arr):
            return RegularGridInterpolator((xs, ys), arr, bounds_error=False, fill_value=0.0)

        # tangential velocities vanish on the bounding walls
        u1 = np.pad(_reflect_dead(self.u1, 1), ((0, 0), (1, 1)))
        self._iu = interp(xu[:, 0], np.concatenate([[y_lo], yu[0], [y_hi]]), u1)
        u2 = np.pad(_reflect_dead(self.u2, 0), ((1, 1), (0, 0)))
        self._iv = interp(np.concatenate([[x_lo], xv[:, 0], [x_hi]]), yv[0], u2)
        # pressure: nearest active value fills dead cells, edges are extended
        p = np.asarray(self.p, float)
        dead = ~np.isfinite(p)
        if dead.any() and not dead.all():
            idx = distance_transform_edt(dead, return_distances=False, return_indices=True)
            p = p[tuple(idx)]
        p = np.pad(np.nan_to_num(p), 1, mode="edge")
        self._ip = interp(np.concatenate([[x_lo], xc[:, 0], [x_hi]]),
                          np.concatenate([[y_lo], yc[0], [y_hi]]), p)

    def evaluate(self, s1, s2):
        """Layer ``(u1, u2, p)`` at stretched points; zero outside the grid."""
        s1, s2 = np.broadcast_arrays(np.asarray(s1, float), np.asarray(s2, float))
        pts = np.stack([s1.ravel(), s2.ravel()], axis=-1)
        shape = s1.shape
        return (self._iu(pts).reshape(shape), self._iv(pts).reshape(shape),
                self._ip(pts).reshape(shape))

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.nanmax(np.abs(a)) <= tol for a in (self.u1, self.u2, self.p))


@dataclass
class HalfStripProblem:
    """Defect ``(m1, m2)`` at ``xi1 = 0`` of a strip of width 1."""

    nu0: float
    inlet_mismatch: tuple
    truncation_length: float = 10.0
    resolution: int = 10


def _fit_decay(s, energy):
    ok = energy > 1e-300
    if ok.sum() < 2:
        return float("inf")
    slope = np.polyfit(s[ok], np.log(energy[ok]), 1)[0]
    return float(-0.5 * slope)


def _section_energy(field: st.MacField, stations):
    g = field.grid
    xu, _ = g.u_positions()
    xs = xu[:, 0]
    out = []
    for s in stations:
        i = int(np.argmin(np.abs(xs - s)))
        col = np.nan_to_num(field.u1[i])
        ic = min(i, g.nx - 1)
        colv = np.nan_to_num(field.u2[ic])
        out.append(float(np.sum(col**2) * g.h2 + np.sum(colv**2) * g.h2))
    return np.array(out)


def solve_half_strip(problem: HalfStripProblem, tol: float = 1e-12) -> LayerSolution:
    """Decaying solution with Dirichlet data ``m`` at the inlet.

    The strip is truncated at ``L`` with homogeneous Dirichlet data there.
    The pressure is normalized to zero mean on the last cell column, which
    approximates the zero far-field pressure of the infinite strip.
    """
    m1, m2 = problem.inlet_mismatch
    m1 = pr.TransversePoly(m1.coeffs) if isinstance(m1, pr.TransversePoly) else m1
    if isinstance(m1, pr.TransversePoly):
        comp = check_compatibility(m1)
        if abs(comp) > tol:
            raise CompatibilityError(f"inlet defect carries flux {comp:.3e}")
    L = float(problem.truncation_length)
    M = int(problem.resolution)
    h = 1.0 / M
    grid = st.MacGrid([(0.0, L, -0.5, 0.5)], h, h)
    zero1 = _is_zero_profile(m1)
    zero2 = _is_zero_profile(m2)
    if zero1 and zero2:
        u1, u2, p = _blank(grid)
        return LayerSolution(grid, u1, u2, p, decay_rate=float("inf"))

    def bc(x, y):
        inlet = np.abs(x) < 1e-12
        a = np.where(inlet, _profile(m1, y), 0.0)
        b = np.where(inlet, _profile(m2, y), 0.0)
        return a, b

    last = np.zeros((grid.nx, grid.ny), bool)
    last[-1] = True
    fld = st.solve(grid, problem.nu0, None, bc, gauge=("pin", last), flux_correction=True)
    stations = np.arange(1.0, L - 0.5, 1.0)
    energy = _section_energy(fld, stations)
    rate = _fit_decay(stations[: max(2, len(stations) // 2)], energy[: max(2, len(stations) // 2)])
    sol = LayerSolution(grid, fld.u1, fld.u2, fld.p, decay_rate=rate, total=fld)
    sol.info = {"station_energy": energy.tolist(), "stations": stations.tolist(), **fld.info}
    return sol


def _blank(grid):
    m = grid.masks()
    return (np.where(m["u_exists"], 0.0, np.nan), np.where(m["v_exists"], 0.0, np.nan),
            np.where(grid.active, 0.0, np.nan))


def _is_zero_profile(m):
    if m is None:
        return True
    if isinstance(m, pr.TransversePoly):
        return m.is_zero()
    return False


def _profile(m, y):
    if m is None:
        return np.zeros(np.shape(y))
    return np.asarray(m(y), dtype=float) * np.ones(np.shape(y))


# ---------------------------------------------------------------------------
# junctions


@dataclass
class Branch:
    """Unit-width branch leaving the node along the axis direction ``t``."""

    direction: tuple
    c: float
    length: float = 10.0

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)

    @property
    def n(self) -> np.ndarray:
        t = self.t
        return np.array([-t[1], t[0]])

    @property
    def frame(self) -> np.ndarray:
        """Orthogonal matrix with columns ``t`` and ``n``."""
        return np.column_stack([self.t, self.n])

    def rect(self):
        t = self.t
        L = self.length
        if abs(abs(t[0]) - 1) < 1e-14 and abs(t[1]) < 1e-14:
            return (0.0, L, -0.5, 0.5) if t[0] > 0 else (-L, 0.0, -0.5, 0.5)
        if abs(abs(t[1]) - 1) < 1e-14 and abs(t[0]) < 1e-14:
            return (-0.5, 0.5, 0.0, L) if t[1] > 0 else (-0.5, 0.5, -L, 0.0)
        raise ValueError("branches must be axis aligned")


@dataclass
class JunctionProblem:
    """Node with branches; ``c`` per branch gives the Poiseuille data ``2 c N1 t``.

    ``inlet`` optionally replaces the node patch by an end: it is a pair
    ``(m1, m2)`` of profiles prescribed on the segment ``xi1 = 0`` of a single
    branch (outer nodes).  ``force`` is an optional body force in stretched
    coordinates supported near the node.
    """

    nu0: float
    branches: list
    d0hat: float = 0.0
    resolution: int = 10
    force: object = None
    inlet: tuple | None = None
    include_patch: bool = True

    def kirchhoff_residual(self) -> float:
        # outward flux of 2 c N1 across a unit section is -c / 6
        return float(abs(sum(-b.c / 6.0 for b in self.branches)))

    def rects(self):
        out = [b.rect() for b in self.branches]
        if self.include_patch and self.inlet is None:
            out.append((-0.5, 0.5, -0.5, 0.5))
        return out


class FluxImbalance(ValueError):
    pass


def regular_fields(problem: JunctionProblem, x, y, plateaus=None, cut: bool = True):
    """Cut-off regular field ``sum_j chi_j (2 c_j N1 t_j, nu0 c_j s_j + plateau_j)``."""
    n1 = pr.n1()
    u1 = np.zeros(np.shape(x))
    u2 = np.zeros(np.shape(x))
    p = np.zeros(np.shape(x))
    for j, b in enumerate(problem.branches):
        s = x * b.t[0] + y * b.t[1]
        r = x * b.n[0] + y * b.n[1]
        inside = (s >= 0.5 - 1e-12) & (np.abs(r) <= 0.5 + 1e-12)
        if problem.inlet is not None:
            inside = (s >= -1e-12) & (np.abs(r) <= 0.5 + 1e-12)
        w = np.where(inside, chi(s, problem.d0hat) if cut else 1.0, 0.0)
        prof = 2.0 * b.c * n1(r)
        u1 += w * prof * b.t[0]
        u2 += w * prof * b.t[1]
        plat = 0.0 if plateaus is None else plateaus.get(j, 0.0)
        p += w * (problem.nu0 * b.c * s + plat)
    return u1, u2, p


def solve_junction(problem: JunctionProblem, level: int = 0, tol: float = 1e-10) -> LayerSolution:
    """Total-field solve; returns the layer (total minus cut-off regular field).

    Plateaus are the cross-section means of ``P - nu0 c_j s`` at distance
    ``L - 1`` on each branch, shifted so that branch 0 has plateau 0.  The
    constants ``d_(l+1)`` of the edges are these plateaus.
    """
    if problem.kirchhoff_residual() > tol and problem.inlet is None:
        raise FluxImbalance(f"Kirchhoff residual {problem.kirchhoff_residual():.3e}")
    M = problem.resolution
    h = 1.0 / M
    grid = st.MacGrid(problem.rects(), h, h)
    n1 = pr.n1()
    has_source = any(b.c != 0.0 for b in problem.branches) or problem.force is not None
    if problem.inlet is not None:
        has_source = has_source or not all(_is_zero_profile(m) for m in problem.inlet)
    if level > 0 and problem.force is not None:
        has_source = any(b.c != 0.0 for b in problem.branches)
    if not has_source:
        u1, u2, p = _blank(grid)
        plats = {j: 0.0 for j in range(len(problem.branches))}
        return LayerSolution(grid, u1, u2, p, decay_rate=float("inf"), pressure_plateaus=plats)

    def bc(x, y):
        a = np.zeros(np.shape(x))
        b2 = np.zeros(np.shape(x))
        for br in problem.branches:
            s = x * br.t[0] + y * br.t[1]
            r = x * br.n[0] + y * br.n[1]
            end = (np.abs(s - br.length) < 1e-9) & (np.abs(r) <= 0.5 + 1e-12)
            prof = 2.0 * br.c * n1(r)
            a = np.where(end, prof * br.t[0], a)
            b2 = np.where(end, prof * br.t[1], b2)
        if problem.inlet is not None:
            br = problem.branches[0]
            s = x * br.t[0] + y * br.t[1]
            r = x * br.n[0] + y * br.n[1]
            end = (np.abs(s) < 1e-9) & (np.abs(r) <= 0.5 + 1e-12)
            m1 = _profile(problem.inlet[0], r)
            m2 = _profile(problem.inlet[1], r)
            # local (normal, tangential) -> global
            a = np.where(end, m1 * br.t[0] + m2 * br.n[0], a)
            b2 = np.where(end, m1 * br.t[1] + m2 * br.n[1], b2)
        return a, b2

    force = problem.force if level == 0 else None
    fld = st.solve(grid, problem.nu0, force, bc, flux_correction=problem.inlet is not None)
    xc, yc = grid.cell_centres()
    raw = {}
    for j, br in enumerate(problem.branches):
        s = xc * br.t[0] + yc * br.t[1]
        r = xc * br.n[0] + yc * br.n[1]
        target = br.length - 1.0
        col = grid.active & (np.abs(s - target) < 0.5 * h + 1e-12) & (np.abs(r) < 0.5)
        if not col.any():
            col = grid.active & (np.abs(s - target) <= h) & (np.abs(r) < 0.5)
        raw[j] = float(np.mean(fld.p[col] - problem.nu0 * br.c * s[col]))
    shift = raw[0]
    plats = {j: v - shift for j, v in raw.items()}
    total_p = fld.p - shift
    xu, yu = grid.u_positions()
    xv, yv = grid.v_positions()
    ru = regular_fields(problem, xu, yu, plats)[0]
    rv = regular_fields(problem, xv, yv, plats)[1]
    rp = regular_fields(problem, xc, yc, plats)[2]
    u1 = fld.u1 - ru
    u2 = fld.u2 - rv
    p = total_p - rp
    # decay of the layer along the first branch
    br = problem.branches[0]
    stations = np.arange(problem.d0hat + 3.0, br.length - 1.0, 1.0)
    energy = []
    for s0 in stations:
        sel = np.abs((xu * br.t[0] + yu * br.t[1]) - s0) < 0.5 * h
        sel &= np.abs(xu * br.n[0] + yu * br.n[1]) < 0.5
        sel2 = np.abs((xv * br.t[0] + yv * br.t[1]) - s0) < 0.5 * h
        sel2 &= np.abs(xv * br.n[0] + yv * br.n[1]) < 0.5
        energy.append(float(np.nansum(u1[sel] ** 2) + np.nansum(u2[sel2] ** 2)) * h)
    energy = np.array(energy)
    rate = _fit_decay(stations[:4], energy[:4]) if len(stations) >= 2 else float("nan")
    total = st.MacField(grid, fld.u1, fld.u2, total_p, bc=bc, info=fld.info)
    sol = LayerSolution(grid, u1, u2, p, decay_rate=rate, pressure_plateaus=plats, total=total)
    sol.info = {"raw_plateaus": raw, "kirchhoff_residual": problem.kirchhoff_residual(), **fld.info}
    return sol


def outer_constants(g_profile: pr.TransversePoly, level: int = 0):
    """``(c_hat, c)`` for an end with inward normal velocity profile ``g``.

    The regular field near the end is ``2 c_hat N1`` along the inward axis,
    so equal fluxes give ``c_hat = <g> / (2 <N1>) = -6 <g>``; the edge
    constant measured from the interior node is ``c = -c_hat``.
    """
    if level > 0:
        return 0.0, 0.0
    c_hat = pr.mean2(g_profile) / (2.0 * pr.mean2(pr.n1()))
    return c_hat, -c_hat


def attach_channel_layers(expansion, truncation_length: float = 10.0, resolution: int = 10,
                          tol: float = 1e-12):
    """Solve end layers for every level of a Dirichlet channel expansion."""
    nu = expansion.nu
    for end in ("left", "right"):
        x_end = 0.0 if end == "left" else expansion.length
        nu_end = float(nu.nu(x_end))
        for j in range(expansion.k + 1):
            m1, m2 = expansion.mismatch(j, end)
            comp = check_compatibility(m1)
            if abs(comp) > tol:
                raise CompatibilityError(f"level {j} {end} defect flux {comp:.3e}")
            if m1.is_zero() and m2.is_zero():
                continue
            if np.max(np.abs(m1.array)) < 1e-14 and np.max(np.abs(m2.array)) < 1e-14:
                continue
            prob = HalfStripProblem(nu_end, (m1, m2), truncation_length, resolution)
            expansion.layers[(end, j)] = solve_half_strip(prob, tol=tol)
    return expansion
