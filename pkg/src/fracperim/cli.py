"""Command-line interface: ``fracperim {gen,energy,codim,minimize,hypfill,reproduce}``.

Exit status is 0 on success, 2 when an estimate is inconclusive or a recipe
fails a target, and 1 on errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FracPerimError
from .io import dumps, load_set, load_space, save_set, save_space, write_csv, write_json

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **self.params}


def _grid_arg(text: str) -> list[float]:
    """``LO:HI:STEP`` or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(round((hi - lo) / step))
            return [round(lo + k * step, 10) for k in range(n + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI:STEP or a comma list, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}") from None


def _fraction(text: str) -> Fraction:
    from .geometry import parse_fraction
    try:
        return parse_fraction(text)
    except FracPerimError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fracperim", description="Fractional perimeters, codimensions and nonlocal minimal surfaces "
                                               "on discretized metric measure spaces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--no-timing", action="store_true",
                   help="write null instead of wall-clock times, for byte-identical reports")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate test geometries")
    gs = g.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    c = gs.add_parser("cantor", help="fat Cantor set C_a")
    c.add_argument("--a", type=_fraction, required=True, help="removal ratio P/Q in (0, 1/3)")
    c.add_argument("--depth", type=int, required=True)
    c.add_argument("--raster", type=int, default=4096, help="grid cells on [0, 1] (default 4096)")
    k = gs.add_parser("koch", help="von Koch snowflake")
    k.add_argument("--depth", type=int, required=True)
    k.add_argument("--n", type=int, required=True, help="grid cells per side")
    gr = gs.add_parser("grid", help="uniform grid on the unit cube")
    gr.add_argument("--dim", type=int, choices=(1, 2), required=True)
    gr.add_argument("--n", type=int, required=True)
    for q in (c, k, gr):
        q.add_argument("--out", default="out", help="output prefix: PREFIX.space.json, PREFIX.set.json")

    e = sub.add_parser("energy", help="s-perimeter of a set")
    e.add_argument("--space", required=True)
    e.add_argument("--set", required=True)
    e.add_argument("--s", type=float, required=True)
    e.add_argument("--mode", choices=("metric-measure", "interval-1d"), default="metric-measure")
    e.add_argument("--form", choices=("two-sided", "kernel"), default="two-sided")
    e.add_argument("--out", help="JSON report path (default stdout)")

    d = sub.add_parser("codim", help="codimension brackets")
    d.add_argument("--space", required=True)
    d.add_argument("--set", required=True)
    d.add_argument("--what", choices=("mink", "haus", "frac", "chain"), required=True)
    d.add_argument("--t-grid", type=_grid_arg, default=_grid_arg("0:1:0.05"))
    d.add_argument("--s-grid", type=_grid_arg, default=_grid_arg("0.05:0.95:0.05"))
    d.add_argument("--scales", type=_grid_arg, help="LO,HI: dyadic scale range (default [8h, diam/8])")
    d.add_argument("--boundary-scales", type=_grid_arg,
                   help="LO,HI radii defining the boundary (default: same as --scales)")
    d.add_argument("--density-delta", type=float, default=0.2)
    d.add_argument("--family", choices=("cantor", "koch"),
                   help="truncation family for the fractional estimate (required for frac and chain)")
    d.add_argument("--a", type=_fraction, default=Fraction(1, 4), help="Cantor ratio for --family cantor")
    d.add_argument("--depths", type=_int_list, default=[8, 9, 10])
    d.add_argument("--out", help="JSON report path (default stdout)")
    d.add_argument("--csv", help="CSV of (t, scale, content) rows")

    m = sub.add_parser("minimize", help="exact minimizer of J_Omega^s")
    m.add_argument("--space", required=True)
    m.add_argument("--omega", required=True)
    m.add_argument("--exterior", required=True)
    m.add_argument("--s", type=float, required=True)
    m.add_argument("--mode", choices=("metric-measure", "interval-1d"), default="metric-measure")
    m.add_argument("--oracle", action="store_true", help="also run the exhaustive search and compare")
    m.add_argument("--gamma", type=float, default=0.02, help="density floor to check")
    m.add_argument("--porosity-c", type=float, default=64.0, help="porosity constant to check")
    m.add_argument("--out-set", help="write the minimizer as a set file")
    m.add_argument("--out", help="JSON report path (default stdout)")

    h = sub.add_parser("hypfill", help="hyperbolic filling")
    h.add_argument("--space", required=True)
    h.add_argument("--alpha", type=float, default=2.0)
    h.add_argument("--tau", type=float, default=2.0)
    h.add_argument("--beta-ratio", type=float, default=0.5)
    h.add_argument("--levels", type=int, required=True)
    h.add_argument("--verify", action="store_true", help="compute the codimension ratio table")
    h.add_argument("--samples", type=int, default=16)
    h.add_argument("--octaves", type=int, default=4)
    h.add_argument("--out", help="graph JSON path (default stdout)")
    h.add_argument("--csv", help="ratio-table CSV path")

    r = sub.add_parser("reproduce", help="run a pinned experiment")
    from .recipes import RECIPES
    r.add_argument("recipe", choices=sorted(RECIPES))
    r.add_argument("--out", help="JSON report path")
    return p


def _emit(report: dict, path: str | None) -> None:
    if path:
        write_json(report, path)
    else:
        sys.stdout.write(dumps(report))


def _report(cfg: RunConfig, body: dict) -> dict:
    return {"version": __version__, "config": cfg.to_dict(), **body}


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter()

    def ms(self):
        return round(1000 * (time.perf_counter() - self.t0), 3) if self.enabled else None


def _cmd_gen(args, cfg) -> int:
    from .geometry import (FatCantorSpec, build_fat_cantor, build_grid_space, build_koch_snowflake,
                           rasterize_interval_union)
    from .space import IndicatorSet
    out = Path(args.out)
    extra = {}
    if args.kind == "cantor":
        cs = build_fat_cantor(FatCantorSpec(args.a, args.depth))
        r = rasterize_interval_union(cs.remaining, args.raster)
        space, E = r.space, r.set
        extra = {"remaining_length": str(cs.remaining_length), "raster_mass_error": r.mass_error,
                 "remaining": [[str(I.lo), str(I.hi)] for I in cs.remaining]}
    elif args.kind == "koch":
        k = build_koch_snowflake(args.depth, args.n)
        space, E = k.space, k.set
        extra = {"vertices": int(len(k.polygon))}
    else:
        space = build_grid_space(args.dim, args.n)
        E = IndicatorSet.empty(space)
    sp_path, set_path = f"{out}.space.json", f"{out}.set.json"
    save_space(space, sp_path)
    save_set(E, set_path)
    _emit(_report(cfg, {"space": sp_path, "set": set_path, "points": space.n, "set_count": E.count,
                        "set_measure": E.measure(), **extra}), f"{out}.report.json")
    return EXIT_OK


def _cmd_energy(args, cfg, clock) -> int:
    from .kernels import KernelParams, s_perimeter
    space = load_space(args.space)
    E = load_set(args.set, space)
    val = s_perimeter(space, E, KernelParams(args.s, args.mode), form=args.form)
    pairs = 2 * E.count * (space.n - E.count)
    _emit(_report(cfg, {"perimeter": val, "pair_count": pairs, "runtime_ms": clock.ms()}), args.out)
    return EXIT_OK


def _energy_family(args):
    from .recipes import cantor_energy_fn, koch_energy_fn
    if args.family is None:
        raise FracPerimError("--family is required for fractional estimates")
    return cantor_energy_fn(args.a) if args.family == "cantor" else koch_energy_fn()


def _cmd_codim(args, cfg) -> int:
    from .boundary import (BoundarySpec, codim_chain_report, dyadic_scales, fractional_codimension,
                           hausdorff_codimension, measure_theoretic_boundary, minkowski_codimension,
                           regularized_boundary)
    space = load_space(args.space)
    E = load_set(args.set, space)
    rows, body, ok = [], {}, True
    if args.what != "frac":
        if args.scales:
            if len(args.scales) != 2:
                raise FracPerimError("--scales takes LO,HI")
            scales = dyadic_scales(*args.scales)
            lo, hi = args.scales
        else:
            spec0 = BoundarySpec.default(space, args.density_delta)
            lo, hi = spec0.scale_min, spec0.scale_max
            scales = spec0.radii()
        b = args.boundary_scales or [lo, hi]
        spec = BoundarySpec(b[0], b[1], args.density_delta)
    if args.what == "mink":
        est = minkowski_codimension(space, regularized_boundary(space, E, spec), args.t_grid, scales)
        body, ok = {"minkowski": est.to_dict()}, est.status == "ok"
        rows = [(t, r, c) for t, cs in zip(est.t_grid, est.contents) for r, c in zip(est.scales, cs)]
    elif args.what == "haus":
        est = hausdorff_codimension(space, measure_theoretic_boundary(space, E, spec), args.t_grid, scales)
        body, ok = {"hausdorff": est.to_dict()}, est.status == "ok"
        rows = [(t, r, c) for t, cs in zip(est.t_grid, est.contents) for r, c in zip(est.scales, cs)]
    elif args.what == "frac":
        fc = fractional_codimension(_energy_family(args), args.s_grid, args.depths)
        body, ok = {"fractional": fc.to_dict()}, fc.status == "ok"
        rows = [(s, J, e) for s, es in zip(fc.s_grid, fc.energies) for J, e in zip(fc.depths, es)]
    else:
        rep = codim_chain_report(space, E, spec, energy_fn=_energy_family(args), s_grid=args.s_grid,
                                 depths=args.depths, t_grid_mink=args.t_grid, t_grid_haus=args.t_grid,
                                 mink_scales=scales, haus_scales=scales)
        body, ok = {"chain": rep.to_dict()}, rep.status in ("pass", "fail")
        for name, est in (("minkowski", rep.minkowski), ("hausdorff", rep.hausdorff)):
            rows += [(t, r, c) for t, cs in zip(est.t_grid, est.contents) for r, c in zip(est.scales, cs)]
    _emit(_report(cfg, body), args.out)
    if args.csv:
        head = ["s", "depth", "energy"] if args.what == "frac" else ["t", "scale", "content"]
        write_csv(args.csv, head, rows)
    return EXIT_OK if ok else EXIT_INCONCLUSIVE


def _cmd_minimize(args, cfg) -> int:
    from .kernels import KernelParams
    from .minimizer import (MinimizationProblem, brute_force_minimizer, solve_exact, verify_porosity,
                            verify_uniform_density)
    space = load_space(args.space)
    omega = load_set(args.omega, space)
    ext = load_set(args.exterior, space)
    pr = MinimizationProblem(space, omega, ext, KernelParams(args.s, args.mode))
    sol = solve_exact(pr)
    body = {"energy": sol.energy, "certificate": sol.certificate, "set": sol.set.mask.astype(int).tolist()}
    if args.oracle:
        bf = brute_force_minimizer(pr)
        body["oracle"] = {"energy": bf.energy, "same_set": bool(bf.set == sol.set),
                          "relative_energy_difference": abs(bf.energy - sol.energy) / max(bf.energy, 1e-300)}
    dens = verify_uniform_density(space, omega, sol, args.gamma, args.s)
    por = verify_porosity(space, omega, sol, args.porosity_c)
    body["density"] = {"rows": dens.rows, "min_ratio": dens.min_ratio, "passed": dens.passed,
                       "no_admissible_balls": dens.empty, "gamma0_theory": dens.gamma0_theory,
                       "doubling_constant": dens.doubling_constant, "Q": dens.Q, "C_Q": dens.C_Q, "C_0": dens.C_0}
    body["porosity"] = {"rows": por.rows, "max_C": por.max_C, "passed": por.passed, "skipped": por.skipped}
    if args.out_set:
        save_set(sol.set, args.out_set)
    _emit(_report(cfg, body), args.out)
    if args.oracle and not body["oracle"]["same_set"]:
        return EXIT_ERROR
    return EXIT_OK


def _cmd_hypfill(args, cfg) -> int:
    from .filling import FillingParams, attachment_scale_radii, build_filling, verify_codim_relation
    space = load_space(args.space)
    f = build_filling(space, FillingParams(args.levels, args.alpha, args.tau, args.beta_ratio))
    body = {"filling": f.to_dict()}
    if args.verify:
        k = max(1, args.samples)
        zeta = np.unique(np.linspace(space.n // 4, max(space.n // 4, 3 * space.n // 4 - 1), k).astype(int))
        T = verify_codim_relation(f, zeta, attachment_scale_radii(f, args.octaves))
        body["codim_relation"] = T.to_dict()
        if args.csv:
            write_csv(args.csv, ["zeta", "r", "mu_beta", "nu", "ratio", "flagged"],
                      [(r["zeta"], r["r"], r["mu_beta"], r["nu"], r["ratio"], int(r["flagged"])) for r in T.rows])
    _emit(_report(cfg, body), args.out)
    return EXIT_OK


def _cmd_reproduce(args, cfg) -> int:
    from .recipes import run_recipe
    res = run_recipe(args.recipe)
    for line in res.summary_lines():
        print(line, file=sys.stderr)
    _emit(_report(cfg, res.to_dict()), args.out)
    return EXIT_OK if res.passed else EXIT_INCONCLUSIVE


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(args.subcommand, {k: (str(v) if isinstance(v, Fraction) else v)
                                      for k, v in sorted(vars(args).items()) if k != "subcommand"})
    clock = _Clock(not args.no_timing)
    try:
        if args.subcommand == "gen":
            return _cmd_gen(args, cfg)
        if args.subcommand == "energy":
            return _cmd_energy(args, cfg, clock)
        if args.subcommand == "codim":
            return _cmd_codim(args, cfg)
        if args.subcommand == "minimize":
            return _cmd_minimize(args, cfg)
        if args.subcommand == "hypfill":
            return _cmd_hypfill(args, cfg)
        return _cmd_reproduce(args, cfg)
    except (FracPerimError, OSError, ValueError) as exc:
        print(f"fracperim {args.subcommand}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
