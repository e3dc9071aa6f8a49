"""Exact minimization of ``J_Omega^s`` with prescribed exterior data, plus regularity checks.

For labelings ``u`` that agree with the exterior data ``F`` off ``Omega``,

    J(u) = sum over unordered pairs {i, j} meeting Omega of w_ij [u_i != u_j],

with ``w_ij = K_s(i, j) w_i w_j``.  Pairs inside ``Omega`` become inner arcs of
an s-t graph; pairs between ``Omega`` and the exterior fold into terminal arcs.
The minimum cut is exactly the minimum of ``J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, ConstructionError, InternalError, ResourceLimitError
from .kernels import KernelParams, functional_J, interaction_L_s, weighted_kernel_block
from .maxflow import max_preflow
from .space import DiscreteSpace, IndicatorSet, doubling_estimate

PAIR_BUDGET = 10**6
BRUTE_LIMIT = 20
TIE_RTOL = 1e-12
GAP_RTOL = 1e-10


@dataclass(frozen=True)
class MinimizationProblem:
    """``space``, domain ``omega``, exterior data ``F`` and kernel parameters.

    Only ``F \\ Omega`` matters; the stored ``exterior_data`` is masked to the
    exterior.
    """

    space: DiscreteSpace
    omega: IndicatorSet
    exterior_data: IndicatorSet
    params: KernelParams

    def __post_init__(self):
        sp = self.space
        for E in (self.omega, self.exterior_data):
            if not isinstance(E, IndicatorSet) or E.space is not sp:
                raise ArgumentError("omega and exterior data must live on the problem's space")
        if self.omega.count == 0:
            raise ArgumentError("omega must be nonempty")
        if self.omega.count == sp.n:
            raise ArgumentError("omega must leave a nonempty exterior")
        if not isinstance(self.params, KernelParams):
            object.__setattr__(self, "params", KernelParams(float(self.params)))
        object.__setattr__(self, "exterior_data", self.exterior_data - self.omega)

    @property
    def s(self) -> float:
        return self.params.s

    def complemented(self) -> "MinimizationProblem":
        """Same problem with the exterior labels flipped."""
        return MinimizationProblem(self.space, self.omega, self.omega.complement() - self.exterior_data,
                                   self.params)

    def labeling(self, inner_mask) -> IndicatorSet:
        """The admissible set that equals ``inner_mask`` on ``Omega`` and ``F`` outside."""
        m = self.exterior_data.mask.copy()
        m[self.omega.indices] = np.asarray(inner_mask, dtype=bool)
        return IndicatorSet(self.space, m)


@dataclass
class CutGraph:
    nodes: np.ndarray          # point ids of Omega, in index order
    inner: np.ndarray          # symmetric inner capacities w_ij
    source_caps: np.ndarray    # interaction with exterior points of F
    sink_caps: np.ndarray      # interaction with exterior points outside F
    offset: float = 0.0

    def cut_value(self, inner_mask) -> float:
        """Cut capacity of the source side ``inner_mask`` (compensated sum)."""
        u = np.asarray(inner_mask, dtype=bool)
        terms = [self.inner[np.ix_(u, ~u)].ravel(), self.source_caps[~u], self.sink_caps[u]]
        return math.fsum(np.concatenate(terms).tolist()) + self.offset


@dataclass
class MinimizerResult:
    set: IndicatorSet
    energy: float
    certificate: dict = field(default_factory=dict)


def _row_fsum(M: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(row.tolist()) for row in M]) if M.shape[1] else np.zeros(M.shape[0])


def build_cut_graph(problem: MinimizationProblem, pair_budget: int = PAIR_BUDGET) -> CutGraph:
    sp, params = problem.space, problem.params
    nodes = problem.omega.indices
    m = nodes.size
    if m * (m - 1) // 2 > pair_budget:
        raise ResourceLimitError(f"{m * (m - 1) // 2} inner pairs exceed the budget {pair_budget}")
    ext1 = problem.exterior_data.indices
    ext0 = (problem.omega | problem.exterior_data).complement().indices
    inner = weighted_kernel_block(sp, nodes, nodes, params)
    inner = np.triu(inner, 1)
    inner = inner + inner.T
    a = _row_fsum(weighted_kernel_block(sp, nodes, ext1, params))
    b = _row_fsum(weighted_kernel_block(sp, nodes, ext0, params))
    if not (np.all(np.isfinite(inner)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ConstructionError("nonfinite capacity (coincident points?)")
    return CutGraph(nodes, inner, a, b, 0.0)


def solve_exact(problem: MinimizationProblem, pair_budget: int = PAIR_BUDGET) -> MinimizerResult:
    """Global minimizer with the smallest possible ``E ∩ Omega``.

    The max preflow is computed on the reversed network (terminals swapped),
    where the nodes that can still reach the terminal form the minimal
    source side of the original problem.
    """
    g = build_cut_graph(problem, pair_budget)
    pre = max_preflow(g.inner, g.sink_caps, g.source_caps)
    inner_mask = pre.sink_side
    E = problem.labeling(inner_mask)
    energy = functional_J(problem.space, problem.omega, E, problem.params)
    cut = g.cut_value(inner_mask)
    scale = max(energy, 1e-12 * (float(g.source_caps.sum()) + float(g.sink_caps.sum())), 1e-300)
    gap = abs(cut - pre.value)
    if gap > GAP_RTOL * scale:
        raise InternalError(f"duality gap {gap:g} exceeds {GAP_RTOL:g} x energy {energy:g}")
    cert = {"flow_value": pre.value, "cut_value": cut, "offset": g.offset, "duality_gap": gap,
            "energy_minus_cut": energy - cut, "pushes": pre.pushes, "relabels": pre.relabels,
            "omega_size": int(g.nodes.size)}
    return MinimizerResult(E, energy, cert)


def brute_force_minimizer(problem: MinimizationProblem) -> MinimizerResult:
    """Exhaustive search over all labelings of ``Omega``.

    Energies within a relative ``1e-12`` of the minimum count as ties; among
    them the labeling with fewest points in ``E``, then the lexicographically
    smallest membership vector, is returned.
    """
    sp, params = problem.space, problem.params
    nodes = problem.omega.indices
    m = nodes.size
    if m > BRUTE_LIMIT:
        raise ResourceLimitError(f"|Omega| = {m} exceeds the brute-force limit {BRUTE_LIMIT}")
    W = weighted_kernel_block(sp, nodes, nodes, params)
    ext = problem.omega.complement().indices
    F = problem.exterior_data.mask[ext]
    X = weighted_kernel_block(sp, nodes, ext, params)
    to_one = X[:, F].sum(axis=1)      # paid when the node is labelled 0
    to_zero = X[:, ~F].sum(axis=1)    # paid when the node is labelled 1
    bits = 1 << np.arange(m, dtype=np.int64)
    energies = np.empty(2**m)
    chunk = 1 << 12
    for lo in range(0, 2**m, chunk):
        codes = np.arange(lo, min(lo + chunk, 2**m), dtype=np.int64)
        U = (codes[:, None] & bits[None, :]) != 0
        Uf = U.astype(float)
        internal = np.einsum("ki,ij,kj->k", Uf, W, 1.0 - Uf)
        energies[lo:lo + codes.size] = internal + (1.0 - Uf) @ to_one + Uf @ to_zero
    best = energies.min()
    ties = np.flatnonzero(energies <= best + TIE_RTOL * max(abs(best), 1e-300))
    U = (ties[:, None] & bits[None, :]) != 0
    pop = U.sum(axis=1)
    cand = U[pop == pop.min()]
    # lexicographic order on membership vectors (False < True), index order
    order = np.lexsort(cand.T[::-1])
    inner_mask = cand[order[0]]
    E = problem.labeling(inner_mask)
    energy = functional_J(sp, problem.omega, E, params)
    return MinimizerResult(E, energy, {"enumerated": int(2**m), "ties": int(ties.size),
                                       "min_enumerated_energy": float(best)})


# ---------------------------------------------------------------------------
# regularity checks
# ---------------------------------------------------------------------------

@dataclass
class SupersolutionCheck:
    holds: bool
    lhs: float
    rhs: float


def check_supersolution(space: DiscreteSpace, omega: IndicatorSet, E: IndicatorSet, A: IndicatorSet,
                        params: KernelParams, rtol: float = 1e-10) -> SupersolutionCheck:
    """``L_s(A, X \\ E) <= L_s(E \\ A, A)`` for ``A ⊆ E ∩ Omega``.

    Holds for every ``A`` when ``E`` minimizes ``J``, because ``E \\ A`` is an
    admissible competitor.  Equality cases are accepted up to ``rtol``.
    """
    if not A.issubset(E & omega):
        raise ArgumentError("A must be a subset of E ∩ Omega")
    lhs = interaction_L_s(space, A, E.complement(), params)
    rhs = interaction_L_s(space, E - A, A, params)
    return SupersolutionCheck(lhs <= rhs + rtol * max(lhs, rhs), lhs, rhs)


def interface_points(space: DiscreteSpace, omega: IndicatorSet, E: IndicatorSet) -> np.ndarray:
    """Points of ``Omega`` with a point of the other label at distance ``< 2h``."""
    r = 2 * space.resolution_h
    inside = space.ball_mass_field(r, E.mask)
    total = space.ball_mass_field(r)
    mixed = np.where(E.mask, total - inside > 0, inside > 0)
    return np.flatnonzero(mixed & omega.mask)


def _admissible_balls(space: DiscreteSpace, omega: IndicatorSet, centers: np.ndarray, radii):
    """(center, R0) pairs with ``R0 >= 4h`` and ``B(center, 2 R0) ⊆ Omega``."""
    out = []
    for R in radii:
        if R < 4 * space.resolution_h * (1 - 1e-12):
            continue
        outside = space.ball_masses_at(centers, 2 * R, omega.complement().mask)
        out += [(int(c), float(R)) for c in centers[outside == 0]]
    return out


def _default_radii(space: DiscreteSpace, omega: IndicatorSet) -> list[float]:
    out = []
    R = 4 * space.resolution_h
    while R <= space.diameter / 2:
        out.append(R)
        R *= math.sqrt(2.0)
    return out


def _as_set(result) -> IndicatorSet:
    return result.set if isinstance(result, MinimizerResult) else result


@dataclass
class DensityReport:
    rows: list[dict]
    min_ratio: float | None
    gamma_probe: float
    passed: bool
    empty: bool
    gamma0_theory: float
    doubling_constant: float
    Q: float
    C_Q: float
    C_0: float


def gamma0_bound(C_mu: float, s: float, C_0: float = 1.0) -> tuple[float, float, float]:
    """``gamma_0 = 1 / (2^(Q+1) C_0^(Q/s) C_Q)`` with ``Q = max(1, log2 C_mu)`` and ``C_Q = C_mu^2``."""
    Q = max(1.0, math.log2(max(C_mu, 1.0)))
    C_Q = C_mu**2
    return 1.0 / (2 ** (Q + 1) * C_0 ** (Q / s) * C_Q), Q, C_Q


def verify_uniform_density(space: DiscreteSpace, omega: IndicatorSet, result, gamma_probe: float,
                           s: float, radii=None, C_0: float = 1.0) -> DensityReport:
    """Mass fractions of ``E`` and its complement in every admissible interface ball."""
    E = _as_set(result)
    centers = interface_points(space, omega, E)
    radii = _default_radii(space, omega) if radii is None else list(radii)
    balls = _admissible_balls(space, omega, centers, radii)
    rows = []
    for R in sorted({R for _, R in balls}):
        cs = np.array([c for c, RR in balls if RR == R], dtype=int)
        tot = space.ball_masses_at(cs, R)
        inE = space.ball_masses_at(cs, R, E.mask)
        for c, t, e in zip(cs, tot, inE):
            rows.append({"x0": int(c), "R0": R, "ratio_in": float(e / t), "ratio_out": float((t - e) / t)})
    scales = [r for r in radii if r <= space.diameter / 2] or [space.resolution_h]
    C_mu = doubling_estimate(space, scales, centers=omega.indices)
    g0, Q, C_Q = gamma0_bound(C_mu, s, C_0)
    mins = [min(r["ratio_in"], r["ratio_out"]) for r in rows]
    min_ratio = min(mins) if mins else None
    return DensityReport(rows, min_ratio, gamma_probe, bool(rows) and min_ratio >= gamma_probe, not rows,
                         g0, C_mu, Q, C_Q, C_0)


@dataclass
class PorosityReport:
    rows: list[dict]
    max_C: float | None
    C_probe: float
    passed: bool
    skipped: list[dict]


def _distance_to_complement(space: DiscreteSpace, S: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """For each target point, the distance to the nearest point not in ``S`` (mask)."""
    out_idx = np.flatnonzero(~S)
    if out_idx.size == 0:
        return np.full(targets.size, np.inf)
    if space.points is not None:
        return cKDTree(space.points[out_idx]).query(space.points[targets])[0]
    return np.array([space.distances_from(int(t), out_idx).min() for t in targets])


def verify_porosity(space: DiscreteSpace, omega: IndicatorSet, result, C_probe: float,
                    radii=None) -> PorosityReport:
    """Smallest ``C`` such that ``B(x0, R0)`` contains balls of radius ``R0 / C`` in ``E ∩ Omega`` and in ``Omega \\ E``.

    For each admissible interface ball, the best witness ``y`` maximizes the
    distance from ``y`` to the complement of ``E ∩ Omega`` over
    ``y ∈ B(x0, R0)``; likewise ``z`` for ``Omega \\ E``.  Balls with
    ``R0 < 4h`` are skipped and listed.
    """
    E = _as_set(result)
    centers = interface_points(space, omega, E)
    radii = _default_radii(space, omega) if radii is None else list(radii)
    skipped = [{"R0": float(R), "reason": "below 4h"} for R in radii
               if R < 4 * space.resolution_h * (1 - 1e-12)]
    balls = _admissible_balls(space, omega, centers, radii)
    in_set = (E & omega).mask
    out_set = (omega - E).mask
    depth_in = np.zeros(space.n)
    depth_out = np.zeros(space.n)
    depth_in[in_set] = _distance_to_complement(space, in_set, np.flatnonzero(in_set))
    depth_out[out_set] = _distance_to_complement(space, out_set, np.flatnonzero(out_set))
    rows = []
    tie = space.tie_eps
    for c, R in balls:
        d = space.distances_from(c)
        ball = d < R - tie
        yi = np.flatnonzero(ball & in_set)
        zi = np.flatnonzero(ball & out_set)
        if yi.size == 0 or zi.size == 0:
            rows.append({"x0": c, "R0": R, "C": math.inf, "y": None, "z": None})
            continue
        y = int(yi[np.argmax(depth_in[yi])])
        z = int(zi[np.argmax(depth_out[zi])])
        rho = min(depth_in[y], depth_out[z])
        rows.append({"x0": c, "R0": R, "C": float(R / rho), "y": y, "z": z,
                     "rho_in": float(depth_in[y]), "rho_out": float(depth_out[z])})
    max_C = max((r["C"] for r in rows), default=None)
    return PorosityReport(rows, max_C, C_probe, bool(rows) and max_C <= C_probe, skipped)
