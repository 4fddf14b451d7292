import numpy as np
import pytest

from thinstokes import channel as ch
from thinstokes import expr
from thinstokes import profiles as pr
from thinstokes import stokes as st
from thinstokes import tube as tb
from thinstokes import verify as vf

PAR = pr.TransversePoly((0.25, 0.0, -1.0))


def straight(eps=0.05, beta=0.1, scale=1.0):
    edges = [tb.TubeEdge((-1, 0), 0.5, 2.0, PAR * -scale), tb.TubeEdge((1, 0), 0.5, 2.0, PAR)]
    return tb.TubeSpec((0.5, 0.0), edges, eps, beta)


def test_tshape_edge_constants():
    # [DERIVED] c_j = -c_hat_j with 2 c_hat N1 carrying the outer flux
    spec = tb.section4_tshape(0.1)
    c_hat, c = tb.edge_constants(spec)
    assert np.allclose(c, [3.0, -1.0, -2.0], atol=1e-13)
    assert abs(sum(c)) < 1e-13
    assert spec.flux_residual() < 1e-15


def test_tshape_continuity():
    spec = tb.section4_tshape(0.1)
    sol = tb.build_tube(spec, 1, truncation_length=8)
    res = tb.continuity_check(spec, sol.constants, sol.expansions)
    assert res["pressure_continuity"] == 0.0
    assert res["kirchhoff"] < 1e-13
    assert res["outer_matching"] < 1e-10
    assert len(sol.constants.d) == 2
    assert set(sol.constants.plateaus) == {0, 1, 2}


def test_spec_validation():
    with pytest.raises(ValueError):
        straight(beta=0.2)
    with pytest.raises(ch.FluxMismatch):
        straight(scale=1.5)
    bad = [tb.TubeEdge((-1, 0), 0.5, expr.parse("2+x"), PAR * -1), tb.TubeEdge((1, 0), 0.5, 2.0, PAR)]
    with pytest.raises(ValueError):
        tb.TubeSpec((0.5, 0.0), bad, 0.05, 0.1)


def test_eta_covers_regular_cutoff_gap():
    spec = tb.section4_tshape(0.1)
    cut = tb.CutoffFamily(spec)
    for j, e in enumerate(spec.edges):
        s = np.linspace(0.0, e.length, 2001)
        gap_in = (cut.chi_eps(j, s) < 1) & (s < e.length / 2)
        gap_out = (cut.chi_eps(j, s) < 1) & (s > e.length / 2)
        assert np.all(cut.eta(j, s[gap_in], "inner") == 1.0)
        assert np.all(cut.eta(j, s[gap_out], "outer") == 1.0)
    # the long edge switches the inner layer off in its middle
    assert cut.eta(0, np.array([spec.edges[0].length / 2]), "inner")[0] == 0.0


def test_straight_node_is_exact():
    # [DERIVED] a straight tube with constant nu carries exact Poiseuille flow
    spec = straight()
    sol = tb.build_tube(spec, 0, truncation_length=8)
    h = spec.eps / 10
    F = st.solve(st.MacGrid(spec.rects(), h, h), spec.nu_global, spec.force_global, spec.bc)
    xu, yu = F.grid.u_positions()
    a, b, _ = sol.evaluate(xu, yu)
    live = ~np.isnan(F.u1)
    assert np.max(np.abs(a[live] - F.u1[live])) < 1e-12
    assert np.max(np.abs(b[live])) < 1e-12


@pytest.mark.slow
def test_tshape_assembled_matches_direct():
    eps = 1 / 16
    F, sol = vf.tshape_pair(eps, 0, 10)
    xu, yu = F.grid.u_positions()
    a, _, _ = sol.evaluate(xu, yu)
    live = ~np.isnan(F.u1)
    scale = np.max(np.abs(F.u1[live]))
    assert np.max(np.abs(a[live] - F.u1[live])) < 1e-5
    assert np.max(np.abs(a[live] - F.u1[live])) < 0.01 * scale
