"""Command-line front end.

Usage: ``thinstokes COMMAND [options]`` or ``thinstokes --config run.json``.
Every run writes ``report.json`` (sorted keys, no timings, so identical
configurations give byte-identical reports) plus CSV tables into the output
directory.  Exit codes: 0 success, 2 invalid input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import channel as ch
from . import expr
from . import layers as ly
from . import profiles as pr
from . import stokes as st
from . import tube as tb
from . import verify as vf
from .smooth import OrderOverflow

COMMANDS = ("channel-periodic", "channel", "tube", "direct", "bl", "convergence", "section4")
EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

PROBLEM_DEFAULTS = {
    "channel-periodic": {"nu": "2+0.5*sin(2*pi*x)", "f1": "1"},
    "channel": {"nu": "2+smoothstep(0.2,0.4,x)*smoothstep(0.2,0.4,1-x)", "f1": "0",
                "inflow": [0.25, 0.0, 0.25, 0.0, -5.0], "outflow": [0.3125, 0.0, -1.25],
                "length": 1.0, "rho": 0.2},
    "tube": {"preset": "tshape", "beta": 0.1},
    "direct": {"kind": "periodic"},
    "bl": {"kind": "half-strip", "nu0": 2.0, "m1": [-0.0625, 0.0, 1.5, 0.0, -5.0],
           "m2": [0.0]},
    "convergence": {"case": "periodic"},
    "section4": {"benchmark": "rectangle"},
}
NUMERIC_DEFAULTS = {"k": 0, "eps": 0.1, "eps_list": [0.125, 0.0625, 0.03125, 0.015625],
                    "resolution": 10, "max_resolution": 40, "rel_change": 0.05,
                    "truncation_length": 10.0, "samples": 101, "compare_direct": False,
                    "strict_mesh": False, "workers": 1}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _number(value, path):
    if isinstance(value, bool):
        raise ConfigError(path, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(Fraction(str(value).strip()))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(path, f"not a number: {value!r}") from None


def _coeffs(value, path):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(path, "expected a non-empty coefficient list")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _expression(value, path):
    if not isinstance(value, str):
        raise ConfigError(path, "expected an expression string")
    try:
        expr.parse(value)
    except expr.ExpressionError as exc:
        raise ConfigError(path, str(exc)) from None
    return value


@dataclass
class RunConfig:
    command: str
    problem: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    output: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "expected an object")
        command = data.get("command")
        if command not in COMMANDS:
            raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}")
        problem = copy.deepcopy(PROBLEM_DEFAULTS[command])
        problem.update(data.get("problem") or {})
        numerics = copy.deepcopy(NUMERIC_DEFAULTS)
        numerics.update(data.get("numerics") or {})
        cfg = cls(command, problem, numerics, str(data.get("output", "out")))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {"command": self.command, "problem": copy.deepcopy(self.problem),
                "numerics": copy.deepcopy(self.numerics), "output": self.output}

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc}") from None
        return cls.from_dict(data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def validate(self):
        n = self.numerics
        k = n["k"]
        if isinstance(k, bool) or not isinstance(k, int) or k < 0:
            raise ConfigError("numerics.k", "expected an integer >= 0")
        n["eps"] = _number(n["eps"], "numerics.eps")
        if not 0.0 < n["eps"] < 0.5:
            raise ConfigError("numerics.eps", "must lie in (0, 1/2)")
        if isinstance(n["eps_list"], str):
            n["eps_list"] = [v for v in n["eps_list"].split(",") if v.strip()]
        n["eps_list"] = [_number(v, f"numerics.eps_list[{i}]")
                         for i, v in enumerate(n["eps_list"])]
        for i, e in enumerate(n["eps_list"]):
            if not 0.0 < e < 0.5:
                raise ConfigError(f"numerics.eps_list[{i}]", "must lie in (0, 1/2)")
        for key in ("resolution", "max_resolution", "samples", "workers"):
            if isinstance(n[key], bool) or not isinstance(n[key], int) or n[key] <= 0:
                raise ConfigError(f"numerics.{key}", "expected a positive integer")
        for key in ("rel_change", "truncation_length"):
            n[key] = _number(n[key], f"numerics.{key}")
            if n[key] <= 0:
                raise ConfigError(f"numerics.{key}", "must be positive")
        for key in ("compare_direct", "strict_mesh"):
            if not isinstance(n[key], bool):
                raise ConfigError(f"numerics.{key}", "expected true or false")
        p = self.problem
        for key in ("nu", "f1"):
            if key in p:
                _expression(p[key], f"problem.{key}")
        for key in ("inflow", "outflow", "m1", "m2"):
            if key in p:
                p[key] = _coeffs(p[key], f"problem.{key}")
        for key in ("length", "rho", "nu0", "beta"):
            if key in p:
                p[key] = _number(p[key], f"problem.{key}")
        if self.command == "convergence" and p["case"] not in vf.CASES:
            raise ConfigError("problem.case", f"expected one of {', '.join(vf.CASES)}")
        if self.command == "section4" and p["benchmark"] not in ("rectangle", "tshape"):
            raise ConfigError("problem.benchmark", "expected rectangle or tshape")
        if self.command == "direct" and p["kind"] not in ("periodic", "dirichlet", "tube"):
            raise ConfigError("problem.kind", "expected periodic, dirichlet or tube")
        if self.command == "bl" and p["kind"] not in ("half-strip", "junction"):
            raise ConfigError("problem.kind", "expected half-strip or junction")
        if self.command == "bl" and p["kind"] == "junction" and not p.get("branches"):
            raise ConfigError("problem.branches", "a junction needs branches")
        if self.command == "tube" or (self.command == "direct" and p["kind"] == "tube"):
            if p.get("preset", "tshape") != "tshape" and not p.get("edges"):
                raise ConfigError("problem.edges", "give edges or preset tshape")
        if self.command == "convergence" and len(n["eps_list"]) < 4:
            raise ConfigError("numerics.eps_list", "needs at least 4 values")


# ---------------------------------------------------------------- builders


def _channel_case(problem: dict, case: str) -> vf.ChannelCase:
    if case == "periodic":
        return vf.ChannelCase("periodic", nu=problem["nu"], f1=problem["f1"])
    return vf.ChannelCase("dirichlet", nu=problem["nu"], f1=problem["f1"],
                          inflow=tuple(problem["inflow"]), outflow=tuple(problem["outflow"]),
                          rho=problem.get("rho", 0.0), length=problem.get("length", 1.0))


def tube_spec(problem: dict, eps: float) -> tb.TubeSpec:
    """TubeSpec from a configuration mapping."""
    beta = problem.get("beta", 0.1)
    if problem.get("preset", "tshape") == "tshape" and not problem.get("edges"):
        return tb.section4_tshape(eps, beta)
    edges = []
    for i, e in enumerate(problem["edges"]):
        path = f"problem.edges[{i}]"
        try:
            edges.append(tb.TubeEdge(tuple(e["direction"]), _number(e["length"], path + ".length"),
                                     expr.parse(_expression(e["nu"], path + ".nu")),
                                     pr.TransversePoly(tuple(_coeffs(e["outflow"], path + ".outflow"))),
                                     expr.parse(e.get("force", "0"))))
        except KeyError as exc:
            raise ConfigError(path, f"missing {exc.args[0]}") from None
    origin = problem.get("origin", [0.0, 0.0])
    return tb.TubeSpec(tuple(origin), edges, eps, beta)


# ---------------------------------------------------------------- commands


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _levels_report(expansion, xs):
    out = []
    for j, lev in enumerate(expansion.levels):
        q = lev.q(xs) if not lev.q.is_zero else np.zeros_like(xs)
        out.append({"j": j, "flux": float(lev.flux), "q_max": float(np.max(np.abs(q)))})
    return out


def _q_table(expansion, xs):
    cols = [lev.q(xs) if not lev.q.is_zero else np.zeros_like(xs) for lev in expansion.levels]
    return [[x] + [c[i] for c in cols] for i, x in enumerate(xs)]


def _dump_sections(expansion, eps, xs, path):
    xi = np.linspace(-0.5, 0.5, 11)
    X, XI = np.meshgrid(xs, xi, indexing="ij")
    u1, u2, p = ch.evaluate(expansion, eps, X, XI * eps)
    rows = zip(X.ravel(), XI.ravel(), u1.ravel(), u2.ravel(), p.ravel())
    _write_csv(path, ["x1", "xi", "u1", "u2", "p"], rows)


def cmd_channel(cfg: RunConfig, case: str) -> dict:
    n, p = cfg.numerics, cfg.problem
    c = _channel_case(p, case)
    expansion = c.expansion(n["k"], n["resolution"])
    xs = np.linspace(0.0, c.length, n["samples"])
    _write_csv(os.path.join(cfg.output, "q_levels.csv"),
               ["x1"] + [f"q{j}" for j in range(n["k"] + 1)], _q_table(expansion, xs))
    _dump_sections(expansion, n["eps"], np.linspace(0.0, c.length, 21),
                   os.path.join(cfg.output, "expansion.csv"))
    report = {"levels": _levels_report(expansion, xs), "R": pr.r_constant()}
    if case == "periodic":
        report["residual_check"] = vf.discrete_residual(expansion, n["eps"], n["resolution"])
    else:
        report["layers"] = {f"{end}{j}": {"decay_rate": float(layer.decay_rate)}
                            for (end, j), layer in sorted(expansion.layers.items())}
    if n["compare_direct"]:
        report["direct_errors"] = c.error(n["eps"], n["k"], n["resolution"])
    return report


def cmd_tube(cfg: RunConfig) -> dict:
    n = cfg.numerics
    spec = tube_spec(cfg.problem, n["eps"])
    sol = tb.build_tube(spec, n["k"], truncation_length=n["truncation_length"],
                        resolution=n["resolution"])
    k = sol.constants
    report = {"constants": {"c": [float(v) for v in k.c], "c_hat": [float(v) for v in k.c_hat],
                            "d": [[float(v) for v in row] for row in k.d],
                            "d_hat": [float(v) for v in k.d_hat],
                            "plateaus": {str(a): float(b) for a, b in k.plateaus.items()}},
              "checks": tb.continuity_check(spec, k, sol.expansions)}
    if n["compare_direct"]:
        h = spec.eps / n["resolution"]
        field_ = st.solve(st.MacGrid(spec.rects(), h, h), spec.nu_global, spec.force_global,
                          spec.bc)
        report["direct_errors"] = st.error_norms(field_, tb.assemble_global(sol))
    return report


def cmd_direct(cfg: RunConfig) -> dict:
    n, p = cfg.numerics, cfg.problem
    eps, m = n["eps"], n["resolution"]
    if p["kind"] == "tube":
        spec = tube_spec(p, eps)
        h = eps / m
        field_ = st.solve(st.MacGrid(spec.rects(), h, h), spec.nu_global, spec.force_global,
                          spec.bc)
        section = float(spec.origin[0]) - 0.5
    else:
        base = PROBLEM_DEFAULTS["channel" if p["kind"] == "dirichlet" else "channel-periodic"]
        data = {**base, **p}
        field_ = _channel_case(data, p["kind"]).direct(eps, m)
        section = 0.5 * p.get("length", 1.0)
    field_.save(os.path.join(cfg.output, "field.npz"))
    with open(os.path.join(cfg.output, "section.csv"), "w") as fh:
        fh.write(field_.section_csv(section))
    return {"grid": field_.grid.describe(), "info": field_.info}


def cmd_bl(cfg: RunConfig) -> dict:
    n, p = cfg.numerics, cfg.problem
    if p["kind"] == "half-strip":
        m1 = pr.TransversePoly(tuple(p["m1"]))
        m2 = pr.TransversePoly(tuple(p["m2"]))
        sol = ly.solve_half_strip(ly.HalfStripProblem(p["nu0"], (m1, m2),
                                                      n["truncation_length"], n["resolution"]))
        return {"decay_rate": float(sol.decay_rate), "compatibility": ly.check_compatibility(m1)}
    branches = [ly.Branch(tuple(b["direction"]), _number(b["c"], f"problem.branches[{i}].c"),
                          n["truncation_length"]) for i, b in enumerate(p["branches"])]
    prob = ly.JunctionProblem(p["nu0"], branches, d0hat=p.get("d0hat", float(np.sqrt(2) / 2)),
                              resolution=n["resolution"])
    sol = ly.solve_junction(prob)
    return {"decay_rate": float(sol.decay_rate), "kirchhoff": prob.kirchhoff_residual(),
            "plateaus": {str(a): float(b) for a, b in sol.pressure_plateaus.items()}}


def cmd_convergence(cfg: RunConfig) -> dict:
    n, p = cfg.numerics, cfg.problem
    policy = vf.MeshPolicy(n["resolution"], n["max_resolution"], n["rel_change"],
                           n["strict_mesh"])
    case = p["case"]
    case_obj = vf.make_case("tube") if case == "tube" else (
        _channel_case({**PROBLEM_DEFAULTS["channel"], **p}, "dirichlet")
        if case == "dirichlet" else vf.ChannelCase("periodic", nu=p.get("nu", vf.ChannelCase.nu),
                                                   f1=p.get("f1", vf.ChannelCase.f1)))
    study = vf.run_rate_study(case_obj, n["k"], n["eps_list"], policy, n["workers"])
    study.case = case
    with open(os.path.join(cfg.output, "convergence.csv"), "w") as fh:
        fh.write(study.csv())
    out = study.to_dict()
    out["nominal_slope"] = vf.NOMINAL_SLOPE[case] + n["k"]
    return out


def cmd_section4(cfg: RunConfig) -> dict:
    n = cfg.numerics
    if cfg.problem["benchmark"] == "rectangle":
        rep = vf.run_section4_rectangle()
        _write_csv(os.path.join(cfg.output, "rectangle.csv"),
                   ["eps", "resolution", "max_velocity", "max_pressure", "H1_velocity"],
                   [[r["eps"], r["resolution"], r["max_velocity"], r["max_pressure"],
                     r["H1_velocity"]] for r in rep["runs"]])
        return rep
    rep = vf.run_section4_tshape(eps=n["eps"], resolution=n["resolution"])
    _write_csv(os.path.join(cfg.output, "tshape_section.csv"), ["x1", "direct_u2", "asymptotic_u2"],
               rep["section_profile"])
    return rep


def run(cfg: RunConfig) -> dict:
    os.makedirs(cfg.output, exist_ok=True)
    handler = {
        "channel-periodic": lambda c: cmd_channel(c, "periodic"),
        "channel": lambda c: cmd_channel(c, "dirichlet"),
        "tube": cmd_tube,
        "direct": cmd_direct,
        "bl": cmd_bl,
        "convergence": cmd_convergence,
        "section4": cmd_section4,
    }[cfg.command]
    body = handler(cfg)
    report = {"command": cfg.command, "config": cfg.to_dict(), "result": body}
    vf.write_report(report, cfg.output)
    return report


# ---------------------------------------------------------------- argv


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thinstokes", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("target", nargs="?", help="benchmark name for section4")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--nu")
    ap.add_argument("--f1")
    ap.add_argument("--k", type=int)
    ap.add_argument("--eps", help="eps value, or comma list for convergence")
    ap.add_argument("--case", choices=vf.CASES)
    ap.add_argument("--kind")
    ap.add_argument("--inflow", help="comma-separated xi coefficients")
    ap.add_argument("--outflow", help="comma-separated xi coefficients")
    ap.add_argument("--resolution", type=int)
    ap.add_argument("--max-resolution", type=int)
    ap.add_argument("--truncation-length")
    ap.add_argument("--compare-direct", action="store_true", default=None)
    ap.add_argument("--workers", type=int)
    return ap


def config_from_args(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("<file>", f"cannot read {args.config}: {exc}") from None
    if args.command:
        data["command"] = args.command
    problem = dict(data.get("problem") or {})
    numerics = dict(data.get("numerics") or {})
    for key in ("nu", "f1", "case", "kind", "inflow", "outflow"):
        if getattr(args, key) is not None:
            problem[key] = getattr(args, key)
    if args.target is not None:
        problem["benchmark"] = args.target
    if args.eps is not None:
        if data.get("command") == "convergence" or "," in args.eps:
            numerics["eps_list"] = args.eps
        else:
            numerics["eps"] = args.eps
    for key, attr in (("k", "k"), ("resolution", "resolution"),
                      ("max_resolution", "max_resolution"), ("workers", "workers"),
                      ("truncation_length", "truncation_length"),
                      ("compare_direct", "compare_direct")):
        if getattr(args, attr) is not None:
            numerics[key] = getattr(args, attr)
    data["problem"], data["numerics"] = problem, numerics
    if args.out is not None:
        data["output"] = args.out
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        run(cfg)
    except (st.SolverFailure, vf.MeshPolicyFailure, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ch.FluxMismatch, ly.CompatibilityError, st.IncompatibleFlux,
            expr.ExpressionError, OrderOverflow, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(os.path.join(cfg.output, "report.json"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
