"""``acx`` command line: one subcommand per module operation, JSON reports
with pass/fail checks, CSV plot data for sequence diagnostics."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fx
from .core import (ball_grid, c2_distance, check_structure, is_strictly_pseudoconvex,
                   levi_matrix, levi_min_on_tangent, normalize_chart)
from .disc import (DeformationTensor, Disc, PolarGrid, RiemannHilbertData, bishop_family,
                   cauchy_green, dbar_residual, linearized_rh_operator, reflect, seam_report,
                   solve_j_disc)
from .errors import AcxError, InputError, ParameterError
from .fields import BoxDomain, PushforwardStructure, j_standard, standard_structure
from .kobayashi import (MetricQuery, blowup_rate_fit, boundary_points, hopf_margin, kr_bracket,
                        tangent_map_anisotropy)
from .lift import (lift_grid, lift_invariance_check, lift_structure,
                   lifted_residual_on_grid, total_reality_test)
from .scaling import (DilationSpec, dilate_defining, dilate_structure, model_domain,
                      polydisc_samples, scaling_sequence)

DEFAULT_TRUNCATION = 16
LEVI_THRESHOLD = 1e-9


@dataclass
class RunConfig:
    subcommand: str
    inputs: dict
    params: dict
    report: str | None = None
    seed: int = 0

    def __post_init__(self):
        tol = self.params.get("tol")
        if tol is not None and not tol > 0:
            raise ParameterError("--tol must be positive")
        if self.params.get("truncation", DEFAULT_TRUNCATION) < 4:
            raise ParameterError("--truncation must be at least 4")
        grid = self.params.get("grid")
        if grid is not None and grid < 2:
            raise ParameterError("--grid must be at least 2")


@dataclass
class Report:
    subcommand: str
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    plot: list | None = None

    def check(self, name: str, value, threshold, relation: str = "<="):
        ok = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b, "<": lambda a, b: a < b,
              ">": lambda a, b: a > b, "==": lambda a, b: a == b}[relation](value, threshold)
        self.checks.append({"name": name, "value": value, "threshold": threshold,
                            "relation": relation, "pass": bool(ok)})

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> dict:
        return {"subcommand": self.subcommand, "checks": self.checks, "results": self.results,
                "pass": self.passed, "provenance": self.provenance}


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def render(doc: dict) -> str:
    return json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# input helpers

class Inputs:
    """Loads fixtures named on the command line and records their hashes."""

    def __init__(self):
        self.hashes: dict = {}

    def get(self, option: str, path, expect=None):
        obj, p, doc = fx.load(path, expect)
        self.hashes[option] = {"file": p.name, "sha256": fx.sha256(p)}
        return obj, doc

    def structure(self, path, dim: int):
        if path is None:
            return standard_structure(dim // 2)
        J, _ = self.get("structure", path, "structure")
        if J.dim != dim:
            raise InputError(f"structure acts on R^{J.dim}, expected R^{dim}")
        return J

    def domain(self, path, option: str = "domain") -> BoxDomain:
        return self.get(option, path, "domain")[0]

    def hypersurface(self, path, option: str = "hypersurface"):
        obj, doc = self.get(option, path, ("domain", "scalar"))
        if isinstance(obj, BoxDomain):
            return obj.defining_function, 0.5 * (obj.lo + obj.hi)
        return obj, np.zeros(obj.dim)


def _seed(args) -> int:
    try:
        return int(args.seed)
    except (TypeError, ValueError):
        return 0


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def _grid(args, default: int) -> int:
    return default if args.grid is None else args.grid


# ---------------------------------------------------------------------------
# handlers: each fills the report and returns it

def cmd_structure_check(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    if args.domain:
        dom = inp.domain(args.domain)
        pts = dom.grid(_grid(args, 5))
    else:
        pts = BoxDomain(J.dim, -args.radius, args.radius).grid(_grid(args, 5))
    r = check_structure(J, pts)
    rep.results.update(samples=len(pts), residual=r.max_residual)
    rep.check("max |J^2 + I|", r.max_residual, _tol(args, 1e-9))


def cmd_structure_normalize(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    p = fx.parse_vector(args.point, J.dim) if args.point else np.zeros(J.dim)
    res = normalize_chart(J, p, args.lam0, grid=_grid(args, 9))
    dev = float(np.max(np.abs(res.structure.matrix(np.zeros(J.dim)) - j_standard(J.n))))
    rep.results.update(scale=res.lam, chart_matrix=res.chart.A, chart_offset=res.chart.b,
                       c2_norm=res.c2_norm)
    rep.check("|J'(0) - J_st|", dev, _tol(args, 1e-10))
    rep.check("C2 distance on the unit ball", res.c2_norm, args.lam0)


def cmd_levi_eval(args, inp: Inputs, rep: Report):
    rho, _ = inp.hypersurface(args.hypersurface)
    J = inp.structure(args.structure, rho.dim)
    z = fx.parse_vector(args.point, rho.dim)
    M = levi_matrix(J, rho, z)
    rep.results.update(levi_matrix=M, on_tangent_min=levi_min_on_tangent(J, rho, z))
    if args.vector:
        v = fx.parse_vector(args.vector, rho.dim)
        rep.results["value"] = float(v @ M @ v)
    rep.check("|r(z)|", abs(float(rho(z))), _tol(args, 1e-8))


def cmd_levi_spc(args, inp: Inputs, rep: Report):
    rho, center = inp.hypersurface(args.hypersurface)
    J = inp.structure(args.structure, rho.dim)
    pts = (np.atleast_2d(fx.parse_vector(args.point, rho.dim)) if args.point
           else boundary_points(rho, center, args.points, _seed(args)))
    r = is_strictly_pseudoconvex(J, rho, pts)
    rep.results.update(samples=len(pts), minima=r.minima)
    rep.check("min Levi form on H", r.min_value, LEVI_THRESHOLD, ">")


_CG_FUNCTIONS = {
    "one": lambda z: np.ones_like(z),
    "zeta": lambda z: z,
    "zetabar": lambda z: np.conj(z),
    "exp-re": lambda z: np.exp(z.real),
}


def cmd_disc_cauchy(args, inp: Inputs, rep: Report):
    Nr = _grid(args, 64)
    grid = PolarGrid(Nr, 2 * Nr)
    g = _CG_FUNCTIONS[args.function]
    f = cauchy_green(g, args.truncation, grid)
    res = dbar_residual(f, g)
    rep.results.update(grid=[grid.Nr, grid.Ntheta], fit_residual=f.info["fit_residual"], disc=f.to_json())
    rep.check("|dbar(T g) - g|", res, _tol(args, 1e-4))


def _seed_disc(args, inp: Inputs, n: int, default) -> np.ndarray | Disc:
    if args.seed is not None and not str(args.seed).lstrip("-").isdigit():
        d, _ = inp.get("seed", args.seed, "disc")
        if d.n != n:
            raise InputError(f"seed disc has {d.n} components, expected {n}")
        return d
    return np.array(default, complex)


def cmd_disc_solve(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    q = DeformationTensor.from_structure(J, args.mode)
    h = _seed_disc(args, inp, J.n, [[0.0, 0.5]] * J.n)
    tol = _tol(args, 1e-8)
    f = solve_j_disc(q, args.lam, h, args.truncation, tol=tol)
    rep.results.update(iterations=f.info["iterations"], residual=f.info["residual"], disc=f.to_json())
    rep.check("converged", bool(f.info["converged"]), True, "==")
    rep.check("Beltrami residual", f.info["residual"], max(100 * tol, 1e-6))


def cmd_disc_bishop(args, inp: Inputs, rep: Report):
    data, _ = inp.get("rh", args.rh, "rh")
    if args.truncation != data.reference.N:
        data = RiemannHilbertData.torus(data.n, args.truncation)
    n = data.n
    if args.structure:
        J = inp.structure(args.structure, 2 * n)
        q = DeformationTensor.from_structure(J)
    else:
        q = DeformationTensor.zero(n)
    op = linearized_rh_operator(data, args.truncation)
    defect = op.rank_deficiency()
    t = fx.parse_vector(args.t, 3 * n) if args.t else np.zeros(3 * n)
    f = bishop_family(data, q, args.lam, t, N=args.truncation)
    rep.results.update(rank_deficiency=defect, boundary_residual=f.info["boundary_residual"],
                       disc=f.to_json())
    rep.check("rank deficiency", defect, 3 * n, "==")
    rep.check("boundary residual", f.info["boundary_residual"], _tol(args, 1e-6))


def cmd_disc_reflect(args, inp: Inputs, rep: Report):
    q, _ = inp.get("deformation", args.deformation, "deformation")
    h = _seed_disc(args, inp, q.n, [[0.0, 0.8, 0.1]] * q.n)
    g = solve_j_disc(q, args.lam, h, args.truncation, tol=1e-12)
    s = seam_report(reflect(g, q, args.lam))
    rep.results.update(s)
    tol = _tol(args, 1e-6)
    rep.check("residual (upper half)", s["residual_upper"], tol)
    rep.check("residual (lower half)", s["residual_lower"], tol)
    rep.check("one-sided derivative jump", s["derivative_jump"], 1e-4)


def _query(args, inp: Inputs) -> MetricQuery:
    dom = inp.domain(args.domain)
    J = inp.structure(args.structure, dom.dim)
    q = fx.parse_vector(args.point, dom.dim)
    v = fx.parse_vector(args.vector, dom.dim)
    return MetricQuery(dom, J, q, v)


def cmd_metric_bracket(args, inp: Inputs, rep: Report):
    Q = _query(args, inp)
    br = kr_bracket(Q, _tol(args, 1e-3), args.truncation)
    rep.results.update(br.to_json())
    rep.check("upper - lower", br.upper - br.lower, -1e-8, ">=")
    if args.expect is not None:
        rep.check("distance of expected value outside the bracket",
                  max(br.lower - args.expect, args.expect - br.upper, 0.0), 0.0)


def cmd_metric_rate(args, inp: Inputs, rep: Report):
    dom = inp.domain(args.domain)
    J = inp.structure(args.structure, dom.dim)
    b = fx.parse_vector(args.boundary_point, dom.dim)
    ks = range(args.k_min, args.k_max + 1)
    fit = blowup_rate_fit(dom, J, b, args.direction, ks, _tol(args, 1e-3))
    expect = args.expect if args.expect is not None else (-1.0 if args.direction == "normal" else -0.5)
    rep.results.update(slope=fit.slope, deltas=fit.deltas, midpoints=fit.values, ratios=fit.ratios)
    rep.plot = [{"k": k, "value": v} for k, v in zip(ks, fit.values)]
    rep.check("|slope - expected|", abs(fit.slope - expect), 0.1)


def cmd_metric_hopf(args, inp: Inputs, rep: Report):
    dom = inp.domain(args.domain)
    u = inp.get("u", args.u, ("scalar", "domain"))[0] if args.u else dom.defining_function
    if isinstance(u, BoxDomain):
        u = u.defining_function
    center = 0.5 * (dom.lo + dom.hi)
    h = hopf_margin(dom, u, [center], rays=args.rays, seed=_seed(args))
    rep.results.update(deltas=h.deltas, ratios=h.ratios, margin=h.margin)
    rep.plot = [{"k": k, "value": r} for k, r in enumerate(h.ratios)]
    rep.check("min |u| / dist", h.margin, 1e-3, ">")
    rep.check("finest / coarsest ratio", h.ratios[-1] / h.ratios[0], 0.5, ">=")


_ANISOTROPY_BOUNDS = [[-0.1, -0.6], [0.4, -0.1]]


def cmd_metric_anisotropy(args, inp: Inputs, rep: Report):
    f, _ = inp.get("map", args.map, "map")
    dom = inp.domain(args.domain)
    target = inp.domain(args.target, "target") if args.target else dom
    J = inp.structure(args.structure, dom.dim)
    Jp = J if args.target_structure is None else inp.get("target_structure", args.target_structure,
                                                         "structure")[0]
    b = fx.parse_vector(args.boundary_point, dom.dim)
    r = tangent_map_anisotropy(f, dom.defining_function, target.defining_function, J, Jp, b)
    rep.results.update(r.to_json())
    names = [["A11", "A12"], ["A21", "A22"]]
    for i in range(2):
        for j in range(2):
            rep.check(f"{names[i][j]} distance exponent", float(r.exponents[i, j]),
                      _ANISOTROPY_BOUNDS[i][j], ">=")


def cmd_lift_build(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    L = lift_structure(J, validate=False)
    xs, ps = lift_grid(J.dim, _grid(args, 5))
    res = lifted_residual_on_grid(L, xs, ps)
    rep.results.update(points=len(xs) * len(ps), residual=res)
    rep.check("max |J~^2 + I|", res, _tol(args, 1e-9))


def cmd_lift_invariance(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    f, _ = inp.get("map", args.map, "map")
    Jp = PushforwardStructure(J, f)
    xs, ps = lift_grid(J.dim, _grid(args, 3), x_radius=0.3)
    r = lift_invariance_check(f, J, Jp, xs, ps, tol=_tol(args, 1e-6))
    rep.results.update(residual=r.max_residual, precondition_residual=r.precondition_residual)
    rep.check("max |d f~ J~ - J~' d f~|", r.max_residual, r.threshold)


def cmd_lift_conormal(args, inp: Inputs, rep: Report):
    rho, center = inp.hypersurface(args.hypersurface)
    J = inp.structure(args.structure, rho.dim)
    pts = boundary_points(rho, center, args.points, _seed(args))
    tr = total_reality_test(rho, J, pts, tol=_tol(args, 1e-3))
    levi = np.array([abs(levi_min_on_tangent(J, rho, z)) for z in pts])
    nondeg = bool(np.all(levi > LEVI_THRESHOLD))
    rep.results.update(angles=tr.angles, levi=levi, totally_real=tr.passed, levi_nondegenerate=nondeg)
    rep.check("min principal angle", tr.min_angle, tr.threshold, ">")
    rep.check("agrees with Levi nondegeneracy", tr.passed == nondeg, True, "==")


def cmd_scale_dilate(args, inp: Inputs, rep: Report):
    J, _ = inp.get("structure", args.structure, "structure")
    spec = DilationSpec(args.kind, args.delta)
    Jd = dilate_structure(J, spec)
    pts = polydisc_samples(_grid(args, 9)) if J.dim == 4 else ball_grid(J.dim, _grid(args, 9))
    before, after = c2_distance(J, pts), c2_distance(Jd, pts)
    rep.results.update(c2_before=before, c2_after=after, structure=fx.dump(Jd, "structure"))
    if args.domain:
        dom = inp.domain(args.domain)
        rep.results["defining"] = dilate_defining(dom.defining_function, spec).to_json()
    rep.check("C2 distance to J_st after dilation", after, before)


def cmd_scale_run(args, inp: Inputs, rep: Report):
    dom = inp.domain(args.domain)
    J = inp.structure(args.structure, dom.dim)
    t = fx.parse_vector(args.boundary_point, 4) if args.boundary_point else np.zeros(4)
    ray = fx.parse_vector(args.ray, 4)
    ray = ray / np.linalg.norm(ray)
    pts = np.array([t + 2.0 ** -k * ray for k in range(1, args.steps + 1)])
    res = scaling_sequence(dom.defining_function, J, pts, t=t)
    rows = res.rows()
    rep.results.update(model=res.model.to_json(), steps=rows, rho_rate=res.rate())
    rep.plot = rows
    js = res.j_sup
    rep.check("J_hat sup distance increase", float(np.max(np.diff(js), initial=0.0)), 1e-12)
    rep.check("rho_hat C2 error (last / first)", float(res.rho_c2[-1] / max(res.rho_c2[0], 1e-300))
              if res.rho_c2[0] > 1e-12 else 0.0, 1.0)


def cmd_scale_model(args, inp: Inputs, rep: Report):
    dom = inp.domain(args.domain)
    J = inp.structure(args.structure, dom.dim)
    t = fx.parse_vector(args.boundary_point, 4) if args.boundary_point else np.zeros(4)
    m = model_domain(dom.defining_function, t, J)
    r = is_strictly_pseudoconvex(standard_structure(2), m.defining, [np.zeros(4)])
    rep.results.update(m.to_json())
    rep.results["defining"] = m.defining.to_json()
    rep.check("H(z1, 0) coefficient", m.h, 0.0, ">")
    rep.check("model Levi form at 0", r.min_value, LEVI_THRESHOLD, ">")


def cmd_corpus_list(args, inp: Inputs, rep: Report):
    idx = fx.corpus_index()
    rep.results.update(fixtures=idx, count=len(idx))


DISPATCH = {
    ("structure", "check"): cmd_structure_check,
    ("structure", "normalize"): cmd_structure_normalize,
    ("levi", "eval"): cmd_levi_eval,
    ("levi", "spc-test"): cmd_levi_spc,
    ("disc", "cauchy"): cmd_disc_cauchy,
    ("disc", "solve"): cmd_disc_solve,
    ("disc", "bishop"): cmd_disc_bishop,
    ("disc", "reflect"): cmd_disc_reflect,
    ("metric", "bracket"): cmd_metric_bracket,
    ("metric", "rate"): cmd_metric_rate,
    ("metric", "hopf"): cmd_metric_hopf,
    ("metric", "anisotropy"): cmd_metric_anisotropy,
    ("lift", "build"): cmd_lift_build,
    ("lift", "invariance"): cmd_lift_invariance,
    ("lift", "conormal"): cmd_lift_conormal,
    ("scale", "dilate"): cmd_scale_dilate,
    ("scale", "run"): cmd_scale_run,
    ("scale", "model"): cmd_scale_model,
    ("corpus", "list"): cmd_corpus_list,
}

# options holding fixture paths (echoed by file name only)
FILE_OPTIONS = ("structure", "domain", "hypersurface", "map", "target", "target_structure",
                "rh", "deformation", "u")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--tol", type=float, help="tolerance (default depends on the command)")
    g.add_argument("--grid", type=int, help="grid size (default depends on the command)")
    g.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION, help="disc truncation N")
    g.add_argument("--seed", help="random seed (integer); a disc fixture for disc solve/reflect")
    g.add_argument("--report", help="write the JSON report here")
    g.add_argument("--csv", help="write plot data (k, value columns) here")

    parser = argparse.ArgumentParser(prog="acx", description=__doc__)
    parser.add_argument("--version", action="version", version=f"acx {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, metavar="GROUP")

    def leaf(group, name, help_):
        return group.add_parser(name, parents=[common], help=help_)

    s = groups.add_parser("structure", help="almost complex structure fields").add_subparsers(
        dest="action", required=True)
    p = leaf(s, "check", "check J^2 = -I on a grid")
    p.add_argument("--structure", required=True)
    p.add_argument("--domain")
    p.add_argument("--radius", type=float, default=0.5)
    p = leaf(s, "normalize", "normalized chart at a point")
    p.add_argument("--structure", required=True)
    p.add_argument("--point")
    p.add_argument("--lam0", type=float, default=0.1)

    s = groups.add_parser("levi", help="Levi form").add_subparsers(dest="action", required=True)
    p = leaf(s, "eval", "Levi matrix at a point")
    p.add_argument("--hypersurface", "--domain", dest="hypersurface", required=True)
    p.add_argument("--structure")
    p.add_argument("--point", required=True)
    p.add_argument("--vector")
    p = leaf(s, "spc-test", "strict pseudoconvexity on boundary samples")
    p.add_argument("--hypersurface", "--domain", dest="hypersurface", required=True)
    p.add_argument("--structure")
    p.add_argument("--point")
    p.add_argument("--points", type=int, default=32)

    s = groups.add_parser("disc", help="J-holomorphic discs").add_subparsers(dest="action", required=True)
    p = leaf(s, "cauchy", "Cauchy-Green transform check")
    p.add_argument("--function", choices=sorted(_CG_FUNCTIONS), default="one")
    p = leaf(s, "solve", "Picard solve of the disc equation")
    p.add_argument("--structure", required=True)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--mode", choices=("scaled", "dilated"), default="scaled")
    p = leaf(s, "bishop", "Bishop disc attached to a torus")
    p.add_argument("--rh", required=True)
    p.add_argument("--structure")
    p.add_argument("--lam", type=float, default=0.02)
    p.add_argument("--t")
    p = leaf(s, "reflect", "reflection across the real segment")
    p.add_argument("--deformation", required=True)
    p.add_argument("--lam", type=float, default=0.1)

    s = groups.add_parser("metric", help="Kobayashi-Royden metric").add_subparsers(dest="action", required=True)
    p = leaf(s, "bracket", "two-sided metric bracket")
    p.add_argument("--domain", required=True)
    p.add_argument("--structure")
    p.add_argument("--point", required=True)
    p.add_argument("--vector", required=True)
    p.add_argument("--expect", type=float)
    p = leaf(s, "rate", "boundary blow-up exponent")
    p.add_argument("--domain", required=True)
    p.add_argument("--structure")
    p.add_argument("--boundary-point", required=True)
    p.add_argument("--direction", choices=("normal", "tangential"), required=True)
    p.add_argument("--k-min", type=int, default=3)
    p.add_argument("--k-max", type=int, default=7)
    p.add_argument("--expect", type=float)
    p = leaf(s, "hopf", "Hopf margin along inner normals")
    p.add_argument("--domain", required=True)
    p.add_argument("--u")
    p.add_argument("--rays", type=int, default=16)
    p = leaf(s, "anisotropy", "tangent map exponents near the boundary")
    p.add_argument("--map", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--target")
    p.add_argument("--structure")
    p.add_argument("--target-structure")
    p.add_argument("--boundary-point", required=True)

    s = groups.add_parser("lift", help="cotangent lift").add_subparsers(dest="action", required=True)
    p = leaf(s, "build", "lifted structure and its J~^2 residual")
    p.add_argument("--structure", required=True)
    p = leaf(s, "invariance", "naturality of the lift under a map")
    p.add_argument("--structure", required=True)
    p.add_argument("--map", required=True)
    p = leaf(s, "conormal", "total reality of the conormal bundle")
    p.add_argument("--hypersurface", "--domain", dest="hypersurface", required=True)
    p.add_argument("--structure")
    p.add_argument("--points", type=int, default=8)

    s = groups.add_parser("scale", help="non-isotropic scaling").add_subparsers(dest="action", required=True)
    p = leaf(s, "dilate", "dilated structure")
    p.add_argument("--structure", required=True)
    p.add_argument("--domain")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--kind", choices=("nonisotropic", "isotropic"), default="nonisotropic")
    p = leaf(s, "run", "normalization and scaling sequence")
    p.add_argument("--domain", required=True)
    p.add_argument("--structure")
    p.add_argument("--boundary-point")
    p.add_argument("--ray", default="0,-1")
    p.add_argument("--steps", type=int, default=7)
    p = leaf(s, "model", "model domain at a boundary point")
    p.add_argument("--domain", required=True)
    p.add_argument("--structure")
    p.add_argument("--boundary-point")

    s = groups.add_parser("corpus", help="shipped fixtures").add_subparsers(dest="action", required=True)
    leaf(s, "list", "index of the fixture corpus")
    return parser


def normalize_argv(argv: list[str]) -> list[str]:
    """``acx lift --structure f`` means ``lift build``; ``acx conormal test``
    is ``acx lift conormal``."""
    argv = list(argv)
    if argv[:2] == ["conormal", "test"]:
        return ["lift", "conormal"] + argv[2:]
    if argv and argv[0] == "lift" and (len(argv) == 1 or argv[1].startswith("--")) \
            and not set(argv[1:2]) & {"-h", "--help"}:
        return ["lift", "build"] + argv[1:]
    return argv


def make_config(args) -> RunConfig:
    ns = vars(args)
    inputs = {k: Path(ns[k]).name for k in FILE_OPTIONS if ns.get(k)}
    skip = set(FILE_OPTIONS) | {"group", "action", "report", "csv"}
    params = {k: v for k, v in sorted(ns.items()) if k not in skip}
    return RunConfig(f"{args.group} {args.action}", inputs, params, args.report, _seed(args))


def write_csv(path: str, rows: list[dict]) -> None:
    cols = list(rows[0]) if rows else ["k", "value"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in r.items()})


def run(args) -> tuple[dict, int]:
    sub = f"{args.group} {args.action}"
    inp = Inputs()
    rep = Report(sub)
    try:
        cfg = make_config(args)
        DISPATCH[(args.group, args.action)](args, inp, rep)
    except (AcxError, OSError, ValueError) as exc:
        doc = {"subcommand": sub, "pass": False,
               "error": {"type": type(exc).__name__, "message": str(exc)},
               "provenance": {"fixtures": inp.hashes, "version": __version__}}
        return doc, 2
    rep.provenance = {"fixtures": inp.hashes,
                      "config": {"inputs": cfg.inputs, "params": cfg.params, "seed": cfg.seed},
                      "version": __version__}
    if args.csv and rep.plot is not None:
        write_csv(args.csv, rep.plot)
    return rep.to_json(), 0 if rep.passed else 1


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(normalize_argv(argv))
    doc, code = run(args)
    text = render(doc)
    if args.report:
        Path(args.report).write_text(text)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
