"""Pinned end-to-end experiments with pass/fail summaries.

Each recipe returns a :class:`RecipeResult` whose ``checks`` list holds one
``(label, passed, detail)`` entry per quantitative target.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .boundary import (BoundarySpec, cluster_diameters, codim_chain_report, dyadic_scales,
                       fractional_codimension, hausdorff_content, measure_theoretic_boundary, minkowski_codimension,
                       regularized_boundary)
from .errors import ResourceLimitError
from .filling import FillingParams, attachment_scale_radii, build_filling, verify_codim_relation
from .geometry import (FatCantorSpec, build_fat_cantor, build_grid_space, build_koch_snowflake,
                       koch_polygon, rasterize_interval_union)
from .kernels import KernelParams, fat_cantor_energy, polygon_interaction
from .minimizer import (MinimizationProblem, brute_force_minimizer, check_supersolution, solve_exact,
                        verify_porosity, verify_uniform_density)
from .space import DiscreteSpace, IndicatorSet

KOCH_THRESHOLD = 2 - math.log(4) / math.log(3)


@dataclass
class RecipeResult:
    name: str
    checks: list[tuple[str, bool, str]] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    status: str = "ok"

    def check(self, label: str, passed: bool, detail: str = "") -> bool:
        self.checks.append((label, bool(passed), detail))
        return bool(passed)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(p for _, p, _ in self.checks)

    def summary_lines(self) -> list[str]:
        return [f"{'PASS' if p else 'FAIL'} {self.name}: {label}" + (f" ({detail})" if detail else "")
                for label, p, detail in self.checks]

    def to_dict(self) -> dict:
        return {"recipe": self.name, "passed": self.passed, "status": self.status,
                "checks": [{"label": l, "passed": p, "detail": d} for l, p, d in self.checks],
                "metrics": self.metrics, "config": self.config}


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 10) for k in range(n + 1)]


# ---------------------------------------------------------------------------
# Cantor energy
# ---------------------------------------------------------------------------

def cantor_energy(a=Fraction(1, 5), s_values=(0.2, 0.3), depths=range(6, 17), tol=0.02,
                  limit_bracket=(0.1, 10.0), stable_from=12, time_limit=60.0) -> RecipeResult:
    """Energy of the depth-``J`` fat Cantor set against ``sum_{j<=J} (2 a^(1-s))^j``."""
    a = Fraction(a)
    res = RecipeResult("cantor-energy", config={"a": str(a), "s_values": list(s_values),
                                                "depths": list(depths), "tol": tol})
    for s in s_values:
        q = 2 * float(a) ** (1 - s)
        ratios, times = [], []
        for J in depths:
            t0 = time.perf_counter()
            e = fat_cantor_energy(a, J, s)
            times.append(time.perf_counter() - t0)
            ratios.append(e / sum(q**j for j in range(1, J + 1)))
        steps = {J: ratios[k] / ratios[k - 1] for k, J in enumerate(depths) if k > 0}
        worst = max(abs(v - 1) for J, v in steps.items() if J >= stable_from)
        limit = ratios[-1]
        res.metrics[f"s={s}"] = {"ratios": ratios, "successive": steps, "seconds": times}
        res.check(f"s={s} successive ratios within {tol:.0%} for J>={stable_from}", worst <= tol,
                  f"max deviation {worst:.2e}")
        res.check(f"s={s} limit ratio in {list(limit_bracket)}",
                  limit_bracket[0] <= limit <= limit_bracket[1], f"{limit:.6g}")
        res.check(f"s={s} runtime at J={depths[-1]} < {time_limit:g} s", times[-1] < time_limit,
                  f"{times[-1]:.2f} s")
    return res


def cantor_energy_fn(a) -> Callable[[float, int], float]:
    a = Fraction(a)
    return lambda s, J: fat_cantor_energy(a, J, s)


def cantor_fractional(a=Fraction(1, 4), s_grid=None, depths=(12, 13, 14), max_width=0.06,
                      time_limit=120.0) -> RecipeResult:
    s_grid = s_grid or _grid(0.40, 0.60, 0.01)
    res = RecipeResult("cantor-fractional", config={"a": str(a), "s_grid": s_grid, "depths": list(depths)})
    t0 = time.perf_counter()
    fc = fractional_codimension(cantor_energy_fn(a), s_grid, depths)
    dt = time.perf_counter() - t0
    res.metrics = {"fractional": fc.to_dict(), "seconds": dt}
    res.status = "ok" if fc.status == "ok" else "inconclusive"
    res.check("bracket contains 1/2", fc.contains(0.5), str(fc.bracket))
    res.check(f"bracket width <= {max_width}", fc.width <= max_width + 1e-12, f"{fc.width:.3f}")
    res.check(f"runtime < {time_limit:g} s", dt < time_limit, f"{dt:.1f} s")
    return res


# ---------------------------------------------------------------------------
# Codimension chain on C_{1/4}
# ---------------------------------------------------------------------------

def cantor_raster(a=Fraction(1, 4), depth: int = 12, n: int = 2**14):
    cs = build_fat_cantor(FatCantorSpec(Fraction(a), depth))
    return rasterize_interval_union(cs.remaining, n)


def cantor_chain(a=Fraction(1, 4), n: int = 2**14, depth: int = 12) -> RecipeResult:
    r = cantor_raster(a, depth, n)
    sp, E = r.space, r.set
    h = sp.resolution_h
    spec = BoundarySpec(64 * h, 1 / 8)
    haus_spec = BoundarySpec(8 * h, 16 * h)
    # Hausdorff window: from the first dyadic multiple of h above the widest
    # cluster of the measure-theoretic boundary, three octaves up
    width = float(cluster_diameters(sp, measure_theoretic_boundary(sp, E, haus_spec)).max())
    floor = h * 2.0 ** math.ceil(math.log2(max(width, h) / h))
    cfg = {"a": str(a), "n": n, "depth": depth, "mink_spec": [64, "1/8"], "haus_spec_h": [8, 16],
           "haus_floor_h": floor / h, "haus_octaves": 3, "t_grid_mink": _grid(-0.2, 0.8, 0.05),
           "t_grid_haus": _grid(0.0, 1.5, 0.05), "s_grid": _grid(0.40, 0.60, 0.01), "depths": [12, 13, 14]}
    res = RecipeResult("cantor-chain", config=cfg)
    t0 = time.perf_counter()
    rep = codim_chain_report(sp, E, spec, energy_fn=cantor_energy_fn(a), s_grid=cfg["s_grid"],
                             depths=cfg["depths"], t_grid_mink=cfg["t_grid_mink"],
                             t_grid_haus=cfg["t_grid_haus"], haus_spec=haus_spec,
                             haus_scales=dyadic_scales(floor, 8 * floor), haus_r_min=floor)
    res.metrics = {"chain": rep.to_dict(), "seconds": time.perf_counter() - t0}
    res.status = "ok" if rep.status in ("pass", "fail") else "inconclusive"
    res.check("Minkowski bracket upper end <= 0.15", rep.minkowski.bracket[1] <= 0.15,
              str(rep.minkowski.bracket))
    res.check("fractional bracket contains 1/2", rep.fractional.contains(0.5), str(rep.fractional.bracket))
    res.check("Hausdorff bracket lower end >= 0.8", rep.hausdorff.bracket[0] >= 0.8,
              str(rep.hausdorff.bracket))
    res.check("chain ordering holds", rep.chain_holds, f"strict={rep.strict}")
    return res


def cantor_hausdorff_refinement(a=Fraction(1, 4), s: float = 0.3, depth: int = 14,
                                sizes=(2**10, 2**12, 2**14, 2**16), r_max_h: int = 64,
                                factor: float = 2.0) -> RecipeResult:
    """``H^{-s}`` greedy content of the finite-scale measure-theoretic boundary under 4x refinement."""
    cs = build_fat_cantor(FatCantorSpec(Fraction(a), depth))
    res = RecipeResult("cantor-hausdorff-refinement",
                       config={"a": str(a), "s": s, "depth": depth, "sizes": list(sizes),
                               "r_max_h": r_max_h, "haus_spec_h": [8, 16]})
    contents = []
    for n in sizes:
        r = rasterize_interval_union(cs.remaining, n)
        sp, E = r.space, r.set
        h = sp.resolution_h
        mt = measure_theoretic_boundary(sp, E, BoundarySpec(8 * h, 16 * h))
        contents.append(hausdorff_content(sp, mt, s, r_max_h * h).value)
    drops = [contents[k - 1] / contents[k] for k in range(1, len(contents))]
    res.metrics = {"contents": contents, "drops": drops}
    for n, d in zip(sizes[1:], drops):
        res.check(f"content drops by >= {factor:g} at n={n}", d >= factor, f"factor {d:.3f}")
    return res


# ---------------------------------------------------------------------------
# Koch snowflake
# ---------------------------------------------------------------------------

def koch_energy_fn() -> Callable[[float, int], float]:
    polys: dict[int, np.ndarray] = {}

    def fn(s: float, J: int) -> float:
        if J not in polys:
            polys[J] = koch_polygon(J)
        return polygon_interaction(polys[J], s)

    return fn


def koch_codim(depth: int = 6, n: int = 1024, s_grid=None, depths=(4, 5, 6), tol_mink=0.05,
               tol_frac=0.08, time_limit=600.0) -> RecipeResult:
    s_grid = s_grid or _grid(0.60, 0.90, 0.02)
    t_grid = _grid(0.5, 1.0, 0.025)
    res = RecipeResult("koch-codim", config={"depth": depth, "n": n, "t_grid": t_grid, "s_grid": s_grid,
                                             "depths": list(depths), "reg_scale_min_h": 4,
                                             "mink_scales_h": [8, 256]})
    t0 = time.perf_counter()
    k = build_koch_snowflake(depth, n)
    sp, E = k.space, k.set
    h = sp.resolution_h
    reg = regularized_boundary(sp, E, BoundarySpec(4 * h, 0.2))
    mk = minkowski_codimension(sp, reg, t_grid, dyadic_scales(8 * h, 256 * h))
    fc = fractional_codimension(koch_energy_fn(), s_grid, depths)
    dt = time.perf_counter() - t0
    res.metrics = {"minkowski": mk.to_dict(), "fractional": fc.to_dict(), "seconds": dt,
                   "threshold": KOCH_THRESHOLD}
    res.status = "ok" if mk.status == "ok" and fc.status == "ok" else "inconclusive"

    # a conclusive bracket whose distance to the threshold is at most tol
    res.metrics["minkowski_estimate"] = mk.estimate
    res.metrics["strict_containment"] = {"minkowski": mk.contains(KOCH_THRESHOLD),
                                         "fractional": fc.contains(KOCH_THRESHOLD)}
    res.check(f"Minkowski bracket contains 2-log4/log3 within +-{tol_mink}",
              mk.status == "ok" and mk.contains(KOCH_THRESHOLD, tol_mink),
              f"{mk.bracket}, estimate {mk.estimate:.3f}" if mk.estimate is not None else str(mk.bracket))
    res.check(f"fractional bracket contains 2-log4/log3 within +-{tol_frac}",
              fc.status == "ok" and fc.contains(KOCH_THRESHOLD, tol_frac), str(fc.bracket))
    res.check(f"runtime < {time_limit:g} s", dt < time_limit, f"{dt:.1f} s")
    return res


# ---------------------------------------------------------------------------
# Minimizers
# ---------------------------------------------------------------------------

def random_problem(rng: np.random.Generator, dim: int, s: float, max_omega: int = 16) -> MinimizationProblem:
    """Jittered-lattice space with random weights, random ``Omega`` and exterior data."""
    if dim == 1:
        n = int(rng.integers(6, 25))
        pts = (np.arange(n) + rng.uniform(-0.3, 0.3, n))[:, None]
    else:
        side = int(rng.integers(3, 6))
        g = np.stack(np.meshgrid(np.arange(side), np.arange(side), indexing="ij"), -1).reshape(-1, 2)
        pts = g + rng.uniform(-0.3, 0.3, g.shape)
        n = len(pts)
    w = rng.uniform(0.2, 2.0, n)
    space = DiscreteSpace(pts.astype(float), w, 0.4)
    k = int(rng.integers(1, min(max_omega, n - 1) + 1))
    om = np.zeros(n, dtype=bool)
    om[rng.choice(n, k, replace=False)] = True
    F = rng.random(n) < 0.5
    return MinimizationProblem(space, IndicatorSet(space, om), IndicatorSet(space, F), KernelParams(s))


def supersolution_subsets(rng: np.random.Generator, E: IndicatorSet, omega: IndicatorSet, count: int = 100):
    """All singletons of ``E ∩ Omega`` plus ``count`` random nonempty subsets."""
    pts = (E & omega).indices
    if pts.size == 0:
        return []
    out = [IndicatorSet.from_indices(E.space, [int(p)]) for p in pts]
    for _ in range(count):
        m = rng.random(pts.size) < rng.uniform(0.1, 0.9)
        if not m.any():
            m[rng.integers(pts.size)] = True
        out.append(IndicatorSet.from_indices(E.space, pts[m]))
    return out


def minimizer_oracle_sweep(count: int = 500, seed: int = 0, dims=(1, 2), s_values=(0.2, 0.5, 0.8),
                           supersolution: bool = True, name: str = "minimizer-oracle") -> RecipeResult:
    """``solve_exact`` against exhaustive search, plus the supersolution inequality on every output."""
    rng = np.random.default_rng(seed)
    res = RecipeResult(name, config={"count": count, "seed": seed, "dims": list(dims),
                                     "s_values": list(s_values)})
    energy_bad = set_bad = super_bad = super_checked = 0
    worst = 0.0
    t0 = time.perf_counter()
    for k in range(count):
        dim = dims[k % len(dims)]
        s = s_values[(k // len(dims)) % len(s_values)]
        pr = random_problem(rng, dim, s)
        a = solve_exact(pr)
        b = brute_force_minimizer(pr)
        rel = abs(a.energy - b.energy) / max(abs(b.energy), 1e-300)
        worst = max(worst, rel)
        energy_bad += rel > 1e-12
        set_bad += not (a.set == b.set)
        if supersolution:
            for A in supersolution_subsets(rng, a.set, pr.omega):
                super_checked += 1
                super_bad += not check_supersolution(pr.space, pr.omega, a.set, A, pr.params).holds
    dt = time.perf_counter() - t0
    res.metrics = {"energy_mismatches": energy_bad, "set_mismatches": set_bad, "max_rel_energy_diff": worst,
                   "supersolution_checked": super_checked, "supersolution_violations": super_bad,
                   "seconds": dt}
    res.check(f"energies agree to 1e-12 on {count} problems", energy_bad == 0, f"max rel diff {worst:.1e}")
    res.check(f"canonical sets agree on {count} problems", set_bad == 0, f"{set_bad} mismatches")
    if supersolution:
        res.check("supersolution inequality holds for all sampled A", super_bad == 0,
                  f"{super_checked} checked, {super_bad} violations")
    return res


def disk_problem(s: float, n: int = 64, radius: float = 0.25) -> MinimizationProblem:
    """Central disk ``Omega`` on an ``n x n`` grid of the unit square; exterior data ``{x < 1/2}``."""
    sp = build_grid_space(2, n)
    P = sp.points
    om = IndicatorSet(sp, np.hypot(P[:, 0] - 0.5, P[:, 1] - 0.5) < radius)
    F = IndicatorSet(sp, P[:, 0] < 0.5)
    return MinimizationProblem(sp, om, F, KernelParams(s))


def minimize_regularity(s_values=(0.3, 0.6), n: int = 64, gamma_floor: float = 0.02,
                        C_ceiling: float = 64.0) -> RecipeResult:
    res = RecipeResult("minimize-regularity", config={"s_values": list(s_values), "n": n,
                                                      "gamma_floor": gamma_floor, "C_ceiling": C_ceiling})
    for s in s_values:
        pr = disk_problem(s, n)
        sol = solve_exact(pr)
        dens = verify_uniform_density(pr.space, pr.omega, sol, gamma_floor, s)
        por = verify_porosity(pr.space, pr.omega, sol, C_ceiling)
        res.metrics[f"s={s}"] = {"energy": sol.energy, "certificate": sol.certificate,
                                 "balls": len(dens.rows), "min_density": dens.min_ratio,
                                 "gamma0_theory": dens.gamma0_theory, "doubling": dens.doubling_constant,
                                 "max_porosity_C": por.max_C}
        res.check(f"s={s} density ratios >= {gamma_floor} on {len(dens.rows)} admissible balls", dens.passed,
                  f"min {dens.min_ratio}")
        res.check(f"s={s} porosity witnesses with C <= {C_ceiling:g}", por.passed, f"max C {por.max_C}")
    return res


# ---------------------------------------------------------------------------
# Hyperbolic filling
# ---------------------------------------------------------------------------

def hypfill_verify(n: int = 512, levels: int = 7, beta_ratios=(0.5, 1.0), samples: int = 16,
                   octaves: int = 4, bound: float = 50.0, time_limit: float = 120.0) -> RecipeResult:
    res = RecipeResult("hypfill-verify", config={"n": n, "levels": levels, "alpha": 2.0, "tau": 2.0,
                                                 "beta_ratios": list(beta_ratios), "samples": samples,
                                                 "octaves": octaves, "bound": bound})
    t0 = time.perf_counter()
    base = build_grid_space(1, n)
    zeta = np.linspace(n // 4, 3 * n // 4 - 1, samples).astype(int)
    for br in beta_ratios:
        f = build_filling(base, FillingParams(levels, 2.0, 2.0, br))
        T = verify_codim_relation(f, zeta, attachment_scale_radii(f, octaves))
        res.metrics[f"beta/eps={br}"] = T.to_dict()
        res.check(f"beta/eps={br}: max/min ratio <= {bound:g}", T.spread is not None and T.spread <= bound,
                  f"{T.spread:.3f}")
    dt = time.perf_counter() - t0
    res.metrics["seconds"] = dt
    res.check(f"runtime < {time_limit:g} s", dt < time_limit, f"{dt:.2f} s")
    return res


RECIPES = {
    "cantor-energy": lambda: _merge("cantor-energy", cantor_energy(), cantor_fractional()),
    "cantor-chain": cantor_chain,
    "koch-codim": koch_codim,
    "minimize-1d": lambda: minimizer_oracle_sweep(250, seed=1, dims=(1,), name="minimize-1d"),
    "minimize-2d": lambda: _merge("minimize-2d",
                                  minimizer_oracle_sweep(250, seed=2, dims=(2,), name="minimize-2d"),
                                  minimize_regularity()),
    "hypfill-verify": hypfill_verify,
}


def _merge(name: str, *parts: RecipeResult) -> RecipeResult:
    out = RecipeResult(name)
    for p in parts:
        out.checks += [(f"[{p.name}] {l}", ok, d) for l, ok, d in p.checks]
        out.metrics[p.name] = p.metrics
        out.config[p.name] = p.config
        if p.status != "ok":
            out.status = p.status
    return out


def run_recipe(name: str) -> RecipeResult:
    try:
        fn = RECIPES[name]
    except KeyError:
        from .errors import ArgumentError
        raise ArgumentError(f"unknown recipe {name!r}; choose from {sorted(RECIPES)}") from None
    try:
        return fn()
    except ResourceLimitError as exc:
        res = RecipeResult(name, status="partial")
        res.check("completed within resource limits", False, str(exc))
        return res
