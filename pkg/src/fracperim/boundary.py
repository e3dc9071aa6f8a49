"""Finite-scale boundaries, codimension contents and codimension estimators.

Contents are computed from explicit covers and are therefore upper bounds on
the infimum-defined quantities.  Codimensions are read off from the sign of
the log-log slope of content against scale: a content that stays bounded as
``r -> 0`` has slope ``>= 0``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError
from .space import DiscreteSpace, IndicatorSet

DEFAULT_DELTA = 0.2
RATIO_MARGIN = 0.02
SLOPE_TOL = 1e-9


@dataclass(frozen=True)
class BoundarySpec:
    scale_min: float
    scale_max: float
    density_delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not (0 < self.density_delta <= 0.5):
            raise ArgumentError("density_delta must lie in (0, 1/2]")
        if not (0 < self.scale_min < self.scale_max):
            raise ArgumentError("need 0 < scale_min < scale_max")

    def check(self, space: DiscreteSpace) -> None:
        h = space.resolution_h
        if self.scale_min < 4 * h * (1 - 1e-12):
            raise ArgumentError(f"scale_min={self.scale_min:g} below 4*resolution_h={4 * h:g}")
        if self.scale_max > space.diameter * (1 + 1e-12):
            raise ArgumentError(f"scale_max={self.scale_max:g} above the diameter {space.diameter:g}")

    @classmethod
    def default(cls, space: DiscreteSpace, density_delta: float = DEFAULT_DELTA) -> "BoundarySpec":
        """Scale range ``[8h, diameter/8]``."""
        return cls(8 * space.resolution_h, space.diameter / 8, density_delta)

    def radii(self) -> list[float]:
        """Dyadic radii ``scale_min * 2^k`` up to ``scale_max``, decreasing."""
        return dyadic_scales(self.scale_min, self.scale_max)


def dyadic_scales(lo: float, hi: float) -> list[float]:
    """Radii ``lo * 2^k <= hi`` in decreasing order."""
    out = []
    r = lo
    while r <= hi * (1 + 1e-12):
        out.append(r)
        r *= 2
    return out[::-1]


@dataclass
class CodimEstimate:
    """Slope-based codimension estimate over a grid of exponents ``t``.

    ``contents[k][i]`` is the content for ``t_grid[k]`` at ``scales[i]``
    (``scales`` strictly decreasing); ``slopes[k]`` the regression slope of
    ``log content`` on ``log r`` over the interior scales.
    """

    kind: str
    t_grid: list[float]
    scales: list[float]
    contents: list[list[float]]
    slopes: list[float]
    bracket: tuple[float, float]
    estimate: float | None
    status: str

    @property
    def slope(self) -> float:
        k = int(np.argmin(np.abs(np.asarray(self.t_grid) - (self.estimate or 0.0))))
        return self.slopes[k]

    def contains(self, value: float, tol: float = 0.0) -> bool:
        lo, hi = self.bracket
        return lo - tol <= value <= hi + tol

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t_grid": self.t_grid, "scales": self.scales,
                "contents": self.contents, "slopes": self.slopes, "bracket": list(self.bracket),
                "estimate": self.estimate, "status": self.status}


@dataclass
class ContentResult:
    """A content value together with the cover that realizes it."""

    value: float
    centers: np.ndarray
    radii: np.ndarray
    t: float

    def __float__(self) -> float:
        return self.value


def _check(space: DiscreteSpace, *sets: IndicatorSet) -> None:
    for E in sets:
        if not isinstance(E, IndicatorSet) or E.space is not space:
            raise ArgumentError("set does not belong to this space")


# ---------------------------------------------------------------------------
# boundaries
# ---------------------------------------------------------------------------

def regularized_boundary(space: DiscreteSpace, E: IndicatorSet, spec: BoundarySpec) -> IndicatorSet:
    """Points whose ``scale_min``-ball meets both ``E`` and its complement in positive mass."""
    _check(space, E)
    spec.check(space)
    inside = space.ball_mass_field(spec.scale_min, E.mask)
    total = space.ball_mass_field(spec.scale_min)
    return IndicatorSet(space, (inside > 0) & (total - inside > 1e-12 * total))


def density_profile(space: DiscreteSpace, E: IndicatorSet, radii: Sequence[float]) -> np.ndarray:
    """``theta_r(x) = mu(B(x, r) ∩ E) / mu(B(x, r))``, one row per radius."""
    return np.array([space.ball_mass_field(r, E.mask) / space.ball_mass_field(r) for r in radii])


def measure_theoretic_boundary(space: DiscreteSpace, E: IndicatorSet, spec: BoundarySpec) -> IndicatorSet:
    """Points where ``min(theta_r, 1 - theta_r) >= density_delta`` at some dyadic radius.

    Radii run over ``scale_min * 2^k <= scale_max``.  The result is
    intersected with the regularized boundary, so containment holds by
    construction.
    """
    _check(space, E)
    spec.check(space)
    theta = density_profile(space, E, spec.radii())
    score = np.max(np.minimum(theta, 1.0 - theta), axis=0)
    reg = regularized_boundary(space, E, spec)
    return IndicatorSet(space, (score >= spec.density_delta) & reg.mask)


# ---------------------------------------------------------------------------
# covers and contents
# ---------------------------------------------------------------------------

def _subset_tree(space: DiscreteSpace, idx: np.ndarray):
    if space.points is None:
        return None
    return cKDTree(space.points[idx])


def _neighbors(space: DiscreteSpace, idx: np.ndarray, tree, centers: np.ndarray, r: float) -> list[np.ndarray]:
    """Positions (into ``idx``) of the members of ``idx`` in each open ball ``B(c, r)``."""
    rr = r - space.tie_eps
    if tree is not None:
        return [np.asarray(h, dtype=int) for h in tree.query_ball_point(space.points[centers], rr)]
    return [np.flatnonzero(space.distances_from(int(c), idx) < rr) for c in centers]


def depth_in_set(space: DiscreteSpace, S: IndicatorSet) -> np.ndarray:
    """Distance from each point of ``S`` to the nearest point outside ``S`` (inf if ``S = X``)."""
    idx = S.indices
    out_idx = S.complement().indices
    if out_idx.size == 0:
        return np.full(idx.size, np.inf)
    if space.points is not None:
        return cKDTree(space.points[out_idx]).query(space.points[idx])[0]
    return np.array([space.distances_from(int(i), out_idx).min() for i in idx])


def greedy_net(space: DiscreteSpace, S: IndicatorSet, r: float) -> np.ndarray:
    """Maximal ``r``-separated subset of ``S``, chosen greedily.

    Points deepest inside ``S`` are considered first (ties in index order), so
    for a thickened curve the net runs along its middle.  Every point of ``S``
    lies in the open ``r``-ball of some chosen center.
    """
    idx = S.indices
    tree = _subset_tree(space, idx)
    order = np.lexsort((np.arange(idx.size), -depth_in_set(space, S)))
    covered = np.zeros(idx.size, dtype=bool)
    centers = []
    for pos in order:
        if covered[pos]:
            continue
        centers.append(idx[pos])
        covered[_neighbors(space, idx, tree, idx[pos:pos + 1], r)[0]] = True
    return np.asarray(centers, dtype=int)


def cluster_diameters(space: DiscreteSpace, S: IndicatorSet, link: float | None = None) -> np.ndarray:
    """Diameters of the single-linkage clusters of ``S`` at linking distance ``link`` (default ``2h``).

    Two points of ``S`` share a cluster when a chain of points of ``S`` with
    steps ``< link`` joins them.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    idx = S.indices
    if idx.size == 0:
        return np.zeros(0)
    link = 2 * space.resolution_h if link is None else link
    tree = _subset_tree(space, idx)
    if tree is not None:
        pairs = tree.query_pairs(link - space.tie_eps, output_type="ndarray")
    else:
        D = space.cross_distances(idx, idx)
        pairs = np.argwhere(np.triu(D < link - space.tie_eps, 1))
    G = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(idx.size, idx.size))
    k, labels = connected_components(G, directed=False)
    out = np.zeros(k)
    for c in range(k):
        members = idx[labels == c]
        if members.size > 1:
            out[c] = space.cross_distances(members, members).max()
    return out


def minkowski_content(space: DiscreteSpace, S: IndicatorSet, t: float, r: float) -> ContentResult:
    """``r^-t sum_i mu(B(x_i, r))`` over a greedy maximal ``r``-net of ``S``."""
    _check(space, S)
    if S.count == 0:
        raise ArgumentError("content of the empty set is undefined here")
    if r < 4 * space.resolution_h * (1 - 1e-12):
        raise ArgumentError(f"r={r:g} below 4*resolution_h")
    centers = greedy_net(space, S, r)
    mass = space.ball_masses_at(centers, r)
    return ContentResult(math.fsum(mass.tolist()) * r ** (-t), centers, np.full(centers.size, r), float(t))


class _CandidatePool:
    """Multi-scale candidate balls for greedy Hausdorff covers.

    At each dyadic radius ``r`` the centers form a greedy ``r/2``-net of ``S``,
    so every point of ``S`` is the center-side of at least one candidate per
    radius and each point sits in a bounded number of candidates.
    """

    def __init__(self, space: DiscreteSpace, S: IndicatorSet, radii: Sequence[float]):
        self.space = space
        self.idx = S.indices
        tree = _subset_tree(space, self.idx)
        self.radii, self.centers, self.members, self.masses = [], [], [], []
        for r in sorted(set(radii), reverse=True):
            c = greedy_net(space, S, r / 2) if r / 2 > space.resolution_h else self.idx
            self.radii.append(np.full(c.size, r))
            self.centers.append(c)
            self.members.extend(_neighbors(space, self.idx, tree, c, r))
            self.masses.append(space.ball_masses_at(c, r))
        self.radii = np.concatenate(self.radii)
        self.centers = np.concatenate(self.centers)
        self.masses = np.concatenate(self.masses)

    def cover(self, t: float, r_max: float, r_min: float = 0.0):
        ok = np.flatnonzero((self.radii <= r_max * (1 + 1e-12)) & (self.radii >= r_min * (1 - 1e-12)))
        cost = self.masses * self.radii ** (-t)
        covered = np.zeros(self.idx.size, dtype=bool)
        left = self.idx.size
        heap = [(cost[k] / self.members[k].size, int(k)) for k in ok if self.members[k].size]
        heapq.heapify(heap)
        chosen = []
        while left and heap:
            key, k = heapq.heappop(heap)
            fresh = int(np.count_nonzero(~covered[self.members[k]]))
            if fresh == 0:
                continue
            new_key = cost[k] / fresh
            if heap and new_key > heap[0][0] * (1 + 1e-12):
                heapq.heappush(heap, (new_key, k))
                continue
            chosen.append(k)
            covered[self.members[k]] = True
            left -= fresh
        chosen = np.asarray(chosen, dtype=int)
        return math.fsum(cost[chosen].tolist()), self.centers[chosen], self.radii[chosen]


def _candidate_radii(space: DiscreteSpace, r_max: float, r_min: float | None = None) -> list[float]:
    out = []
    r = r_max
    floor = max(space.resolution_h, r_min or 0.0)
    while r >= floor * (1 - 1e-12):
        out.append(r)
        r /= 2
    return out


def hausdorff_content(space: DiscreteSpace, S: IndicatorSet, t: float, r_max: float,
                      pool: _CandidatePool | None = None, r_min: float | None = None) -> ContentResult:
    """Upper bound on the codimension-``t`` Hausdorff ``r_max``-content of ``S``.

    Greedy weighted set cover over balls centered in ``S`` with dyadic radii
    ``r_max / 2^k >= h``, each costing ``mu(B) / rad^t``.  The result is the
    cheaper of that cover and the best single-scale net cover, so it never
    exceeds :func:`minkowski_content` at any of these radii.  ``r_min``
    excludes radii below it, which keeps covers of a finite discretization
    from bottoming out at the grid scale.
    """
    _check(space, S)
    if S.count == 0:
        raise ArgumentError("content of the empty set is undefined here")
    if r_max < 4 * space.resolution_h * (1 - 1e-12):
        raise ArgumentError(f"r_max={r_max:g} below 4*resolution_h")
    radii = _candidate_radii(space, r_max, r_min)
    if pool is None:
        pool = _CandidatePool(space, S, radii)
    value, centers, rads = pool.cover(t, r_max, radii[-1])
    for r in radii:
        if r < 4 * space.resolution_h * (1 - 1e-12):
            break
        m = minkowski_content(space, S, t, r)
        if m.value < value:
            value, centers, rads = m.value, m.centers, m.radii
    return ContentResult(value, centers, rads, float(t))


# ---------------------------------------------------------------------------
# codimension estimates
# ---------------------------------------------------------------------------

def _regression_slope(scales: np.ndarray, values: np.ndarray) -> float:
    x = np.log(scales)
    y = np.log(values)
    if x.size >= 4:
        x, y = x[1:-1], y[1:-1]
    return float(np.polyfit(x, y, 1)[0])


def estimate_codimension(t_grid: Sequence[float], scales: Sequence[float], contents,
                         kind: str = "generic", slope_tol: float = SLOPE_TOL,
                         finite_upto: float | None = None) -> CodimEstimate:
    """Locate the ``t`` at which the content slope changes sign.

    ``contents[k][i]`` belongs to ``t_grid[k]`` and ``scales[i]``.  Slopes are
    fitted over the interior scales (the extreme scale at each end is dropped).
    The bracket spans the neighbouring grid points around the sign change; a
    sign pattern that is not "nonnegative then negative" is inconclusive.
    Slopes within ``slope_tol`` of zero count as zero, since flat contents
    fit to slopes of order 1e-16 of either sign.  Exponents ``t <= finite_upto``
    are known to give bounded contents and count as finite whatever the fit
    says (for ball-cover contents, ``t <= 0`` is bounded by the cover overlap
    times ``mu(X)``).
    """
    t = np.asarray(t_grid, dtype=float)
    r = np.asarray(scales, dtype=float)
    C = np.asarray(contents, dtype=float)
    if r.size < 4:
        raise ArgumentError("need at least 4 scales")
    if np.any(np.diff(r) >= 0):
        raise ArgumentError("scales must be strictly decreasing")
    if np.any(np.diff(t) <= 0):
        raise ArgumentError("t_grid must be strictly increasing")
    if C.shape != (t.size, r.size):
        raise ArgumentError(f"contents shape {C.shape} != ({t.size}, {r.size})")
    if np.any(~(C > 0)):
        raise ArgumentError("contents must be positive")
    slopes = np.array([_regression_slope(r, C[k]) for k in range(t.size)])
    finite = slopes >= -slope_tol
    if finite_upto is not None:
        finite |= t <= finite_upto
    status = "ok"
    if finite.all():
        bracket, est, status = (float(t[-1]), math.inf), None, "above-grid"
    elif not finite.any():
        bracket, est, status = (-math.inf, float(t[0])), None, "below-grid"
    else:
        first_div = int(np.argmin(finite))
        if first_div == 0 or finite[first_div:].any():
            status, est = "inconclusive", None
            hi = int(np.flatnonzero(finite)[-1]) + 1
            bracket = (float(t[max(first_div - 1, 0)]), float(t[min(hi, t.size - 1)]))
        else:
            k = first_div - 1
            s0, s1 = slopes[k], slopes[k + 1]
            est = float(t[k] + (t[k + 1] - t[k]) * s0 / (s0 - s1)) if s0 > s1 else float(t[k])
            bracket = (float(t[k]), float(t[k + 1]))
            est = min(max(est, bracket[0]), bracket[1])
    return CodimEstimate(kind, t.tolist(), r.tolist(), C.tolist(), slopes.tolist(), bracket, est, status)


def minkowski_codimension(space: DiscreteSpace, S: IndicatorSet, t_grid: Sequence[float],
                          scales: Sequence[float]) -> CodimEstimate:
    scales = sorted(scales, reverse=True)
    base = [minkowski_content(space, S, 0.0, r).value for r in scales]
    contents = [[b * r ** (-t) for b, r in zip(base, scales)] for t in t_grid]
    return estimate_codimension(t_grid, scales, contents, kind="minkowski", finite_upto=0.0)


def hausdorff_codimension(space: DiscreteSpace, S: IndicatorSet, t_grid: Sequence[float],
                          scales: Sequence[float], r_min: float | None = None) -> CodimEstimate:
    """Slope estimate from greedy Hausdorff contents at each ``r_max`` in ``scales``.

    ``r_min`` (e.g. the smallest scale) bounds the cover radii from below.
    """
    scales = sorted(scales, reverse=True)
    pool = _CandidatePool(space, S, _candidate_radii(space, scales[0], r_min))
    contents = [[hausdorff_content(space, S, t, r, pool=pool, r_min=r_min).value for r in scales]
                for t in t_grid]
    return estimate_codimension(t_grid, scales, contents, kind="hausdorff", finite_upto=0.0)


@dataclass
class FractionalCodim:
    """Ratio-test classification of ``P_s`` along a depth sequence."""

    s_grid: list[float]
    ratios: list[float]
    classes: list[str]
    energies: list[list[float]]
    depths: list[int]
    bracket: tuple[float, float]
    status: str
    margin: float = RATIO_MARGIN

    def contains(self, value: float, tol: float = 0.0) -> bool:
        lo, hi = self.bracket
        return lo - tol <= value <= hi + tol

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]

    def to_dict(self) -> dict:
        return {"s_grid": self.s_grid, "ratios": self.ratios, "classes": self.classes,
                "energies": self.energies, "depths": self.depths, "bracket": list(self.bracket),
                "status": self.status, "margin": self.margin}


def classify_ratio(ratio: float, margin: float = RATIO_MARGIN) -> str:
    if ratio < 1 - margin:
        return "convergent"
    if ratio > 1 + margin:
        return "divergent"
    return "inconclusive"


def fractional_codimension(energy_fn: Callable[[float, int], float], s_grid: Sequence[float],
                           depths: Sequence[int], margin: float = RATIO_MARGIN) -> FractionalCodim:
    """Bracket ``sup{s : P_s(E) < inf}`` by a ratio test on truncated energies.

    ``energy_fn(s, J)`` is the energy of the depth-``J`` truncation.  With level
    contributions ``D_J = E_J - E_(J-1)``, the ratio ``|D_last / D_prev|``
    classifies ``s`` as convergent (``< 1 - margin``), divergent
    (``> 1 + margin``) or inconclusive.  The bracket runs from the largest
    convergent ``s`` to the smallest divergent ``s``; when no ``s`` diverges the
    upper end is 1, and when none converges the lower end is 0.  Grid points
    classified inconclusive simply widen the bracket; the status is
    inconclusive only when the classes are out of order or no point is
    classified at all.
    """
    s_grid = sorted(float(s) for s in s_grid)
    depths = sorted(int(d) for d in depths)
    if len(depths) < 3:
        raise ArgumentError("need at least three depths")
    if any(not (0 < s < 1) for s in s_grid):
        raise ArgumentError("s_grid must lie in (0, 1)")
    ratios, classes, energies = [], [], []
    for s in s_grid:
        e = [float(energy_fn(s, J)) for J in depths]
        energies.append(e)
        d_prev, d_last = e[-2] - e[-3], e[-1] - e[-2]
        ratio = abs(d_last / d_prev) if d_prev != 0 else math.inf
        ratios.append(ratio)
        classes.append(classify_ratio(ratio, margin))
    conv = [s for s, c in zip(s_grid, classes) if c == "convergent"]
    div = [s for s, c in zip(s_grid, classes) if c == "divergent"]
    lo = max(conv) if conv else 0.0
    hi = min(div) if div else 1.0
    status = "ok"
    if conv and div and max(conv) > min(div):
        status = "inconclusive"
        lo, hi = min(div), max(conv)
    elif not conv and not div:
        status = "inconclusive near threshold"
    return FractionalCodim(s_grid, ratios, classes, energies, depths, (lo, hi), status, margin)


def resolution_energy_fn(space_builder: Callable[[int], tuple[DiscreteSpace, IndicatorSet]],
                         mode: str = "metric-measure") -> Callable[[float, int], float]:
    """Energy sequence indexed by refinement level: ``J -> P_s`` of the level-``J`` discretization."""
    from .kernels import KernelParams, s_perimeter

    cache: dict[int, tuple[DiscreteSpace, IndicatorSet]] = {}

    def fn(s: float, J: int) -> float:
        if J not in cache:
            cache[J] = space_builder(J)
        sp, E = cache[J]
        return s_perimeter(sp, E, KernelParams(s, mode))

    return fn


@dataclass
class ChainReport:
    minkowski: CodimEstimate
    fractional: FractionalCodim
    hausdorff: CodimEstimate
    chain_holds: bool
    strict: bool
    status: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"minkowski": self.minkowski.to_dict(), "fractional": self.fractional.to_dict(),
                "hausdorff": self.hausdorff.to_dict(), "chain_holds": self.chain_holds,
                "strict": self.strict, "status": self.status, **self.details}


def chain_ordering(m: tuple[float, float], f: tuple[float, float], h: tuple[float, float]) -> tuple[bool, bool]:
    """Whether ``m <= f <= h`` is possible for values in the three brackets, and whether it is forced strictly."""
    holds = m[0] <= f[1] and max(m[0], f[0]) <= h[1]
    strict = m[1] < f[0] and f[1] < h[0]
    return holds, strict


def codim_chain_report(space: DiscreteSpace, E: IndicatorSet, spec: BoundarySpec, *,
                       energy_fn: Callable[[float, int], float], s_grid: Sequence[float],
                       depths: Sequence[int], t_grid_mink: Sequence[float],
                       t_grid_haus: Sequence[float], mink_scales: Sequence[float] | None = None,
                       haus_spec: BoundarySpec | None = None, haus_scales: Sequence[float] | None = None,
                       haus_r_min: float | None = None, margin: float = RATIO_MARGIN) -> ChainReport:
    """Brackets for the Minkowski codimension of the regularized boundary, the
    fractional codimension of ``E`` and the Hausdorff codimension of the
    measure-theoretic boundary, with a check of their ordering.

    ``spec`` defines the regularized boundary and the Minkowski scales;
    ``haus_spec`` (default ``spec``) the measure-theoretic boundary, and
    ``haus_r_min`` bounds the Hausdorff cover radii from below.
    """
    _check(space, E)
    if E.count == 0 or E.count == space.n:
        raise ArgumentError("E must be nontrivial")
    spec.check(space)
    haus_spec = haus_spec or spec
    reg = regularized_boundary(space, E, spec)
    mt = measure_theoretic_boundary(space, E, haus_spec)
    mink = minkowski_codimension(space, reg, t_grid_mink, mink_scales or spec.radii())
    if mt.count:
        haus = hausdorff_codimension(space, mt, t_grid_haus, haus_scales or haus_spec.radii(), haus_r_min)
    else:
        haus = CodimEstimate("hausdorff", list(t_grid_haus), [], [], [], (math.inf, math.inf), None, "empty")
    frac = fractional_codimension(energy_fn, s_grid, depths, margin)
    m_b = (max(mink.bracket[0], 0.0), mink.bracket[1])
    holds, strict = chain_ordering(m_b, frac.bracket, haus.bracket)
    partial = any(x.status not in ("ok",) for x in (mink, haus)) or frac.status != "ok"
    status = "partial" if partial else ("pass" if holds else "fail")
    return ChainReport(mink, frac, haus, holds, strict, status,
                       {"regularized_count": reg.count, "measure_theoretic_count": mt.count})
