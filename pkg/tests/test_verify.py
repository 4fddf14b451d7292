import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from thinstokes import verify as vf

EPS4 = [1 / 8, 1 / 16, 1 / 32, 1 / 64]


@given(hs.floats(0.5, 6.0), hs.floats(-3.0, 3.0))
@settings(max_examples=25, deadline=None)
def test_fit_slope_recovers_power_law(rate, logc):
    norms = [np.exp(logc) * e**rate for e in EPS4]
    slope, intercept, band = vf.fit_slope(EPS4, norms)
    assert abs(slope - rate) < 1e-10
    assert abs(intercept - logc) < 1e-9
    assert band < 1e-8


def test_fit_slope_band_reflects_scatter():
    norms = [e**2 * f for e, f in zip(EPS4, (1.0, 1.3, 0.8, 1.1))]
    slope, _, band = vf.fit_slope(EPS4, norms)
    assert abs(slope - 2.0) < band
    assert band > 0.05


def test_study_validation_and_csv():
    with pytest.raises(ValueError):
        vf.ConvergenceStudy("periodic", 0, EPS4[:3])
    with pytest.raises(ValueError):
        vf.ConvergenceStudy("periodic", 0, [0.1, 0.05, 0.02, 0.01])
    s = vf.ConvergenceStudy("periodic", 0, EPS4, norms=[e**3 for e in EPS4],
                            resolutions=[10] * 4, mesh_settled=[True] * 4).fit()
    assert abs(s.slope - 3.0) < 1e-12
    rows = list(csv.reader(io.StringIO(s.csv())))
    assert rows[0] == ["eps", "H1_error", "resolution", "mesh_settled"]
    assert [float(r[0]) for r in rows[1:]] == EPS4
    json.dumps(s.to_dict())


def test_mesh_policy_budget(monkeypatch):
    assert list(vf.MeshPolicy().resolutions()) == [10, 20, 40]

    class Drifting:
        def error(self, eps, k, m):
            return {"H1_velocity": 1.0 / m}

    val, m, ok, hist = vf._settle(Drifting(), 0.1, 0, vf.MeshPolicy())
    assert not ok and m == 40 and len(hist) == 3
    with pytest.raises(vf.MeshPolicyFailure):
        vf._settle(Drifting(), 0.1, 0, vf.MeshPolicy(strict=True))
    monkeypatch.setenv("THINSTOKES_THREADS", "2")
    assert vf.max_workers(8) == 2


@pytest.mark.parametrize("k,resolution", [(0, 10), (1, 10), (2, 40)])
def test_discrete_residual_matches_continuous_remainder(k, resolution):
    # [DERIVED] the discrete operator on the asymptotic fields reproduces the
    # remainder of the continuous series once O(h^2) truncation is below it
    E = vf.make_case("periodic").expansion(k)
    r = vf.discrete_residual(E, 0.1, resolution)
    assert 1 / 1.1 < r["ratio"] < 1.1


def test_rectangle_report():
    rep = vf.run_section4_rectangle(eps_list=(0.1, 0.05), resolutions=(10,))
    assert rep["q0_closed_form_error"] < 1e-12
    assert len(rep["runs"]) == 2
    assert set(rep["exponents"]["10"]) == {"velocity", "pressure"}


@pytest.mark.slow
def test_tshape_report():
    rep = vf.run_section4_tshape(0.1, scaling_eps=(0.1, 0.05))
    assert rep["section_relative_error"] <= 0.02
    assert abs(rep["boundary_flux"]) <= 1e-11
    assert rep["kirchhoff"] <= 1e-12
    assert np.allclose(rep["constants"]["c"], [3.0, -1.0, -2.0])


def test_write_report_is_deterministic(tmp_path):
    rep = {"b": np.float64(1.5), "a": [np.int64(2)], "c": np.arange(2.0)}
    p1 = vf.write_report(rep, tmp_path / "one")
    p2 = vf.write_report(dict(reversed(list(rep.items()))), tmp_path / "two")
    assert open(p1).read() == open(p2).read()
