"""Hyperbolic filling of a finite metric measure space and its uniformization.

Vertices are pairs ``(z, n)`` with ``z`` in a maximal ``alpha^-n``-separated
net ``A_n``.  Every edge is a unit interval; the uniformized length element
is ``exp(-eps * d_X(., v0))`` with ``eps = log(alpha)``, and the measure
``mu_beta`` spreads ``mu_hat(v) + mu_hat(w)`` uniformly (in ``d_X`` arc length)
over the edge ``[v, w]``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, dijkstra, shortest_path

from .errors import ArgumentError, ConstructionError, DomainError, ResourceLimitError
from .space import DiscreteSpace, IndicatorSet

DIAM_TARGET = 0.999
MAX_VERTICES = 20000


@dataclass(frozen=True)
class FillingParams:
    levels: int
    alpha: float = 2.0
    tau: float = 2.0
    beta_ratio: float = 0.5     # beta / eps

    def __post_init__(self):
        if isinstance(self.levels, bool) or int(self.levels) != self.levels or self.levels < 0:
            raise ArgumentError("levels must be a nonnegative integer")
        object.__setattr__(self, "levels", int(self.levels))
        for name in ("alpha", "tau", "beta_ratio"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ArgumentError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not self.alpha > 1:
            raise DomainError("alpha must be > 1")
        if not self.tau > 1:
            raise DomainError("tau must be > 1")
        if not 0 < self.beta_ratio <= 1:
            raise DomainError("beta / eps must lie in (0, 1]")

    @property
    def epsilon(self) -> float:
        return math.log(self.alpha)

    @property
    def beta(self) -> float:
        return self.beta_ratio * self.epsilon


@dataclass
class HyperbolicFilling:
    params: FillingParams
    base: DiscreteSpace
    scale: float                     # base distances are multiplied by this
    nets: list[np.ndarray]           # base point ids of A_n
    vertex_point: np.ndarray
    vertex_level: np.ndarray
    edges: np.ndarray                # (m, 2) vertex ids, i < j
    vertex_weight: np.ndarray        # mu_hat_beta
    root_dist: np.ndarray            # graph distance to the root
    edge_length: np.ndarray          # uniformized length of each edge
    _adj: object = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertex_point.size

    @property
    def attachment_radius(self) -> float:
        """``sum_{n >= N} e^(-eps n) (1 - e^(-eps)) / eps = e^(-eps N) / eps``."""
        eps = self.params.epsilon
        return math.exp(-eps * self.params.levels) / eps

    @property
    def edge_mass(self) -> np.ndarray:
        return self.vertex_weight[self.edges[:, 0]] + self.vertex_weight[self.edges[:, 1]]

    @property
    def total_mass(self) -> float:
        return math.fsum(self.edge_mass.tolist())

    def vertex_id(self, point: int, level: int) -> int:
        hit = np.flatnonzero((self.vertex_point == point) & (self.vertex_level == level))
        if hit.size != 1:
            raise ArgumentError(f"({point}, {level}) is not a vertex")
        return int(hit[0])

    def attach(self, base_index: int) -> int:
        """Vertex of the level-``N`` net point nearest to a base point (lowest index on ties)."""
        N = self.params.levels
        net = self.nets[N]
        d = self.base.distances_from(int(base_index), net)
        return self.vertex_id(int(net[int(np.argmin(d))]), N)

    def adjacency(self):
        if self._adj is None:
            m = self.n_vertices
            i, j = self.edges[:, 0], self.edges[:, 1]
            w = self.edge_length
            A = coo_matrix((np.concatenate([w, w]), (np.concatenate([i, j]), np.concatenate([j, i]))),
                           shape=(m, m))
            self._adj = A.tocsr()
        return self._adj

    def distances_from(self, vertices) -> np.ndarray:
        """Uniformized vertex distances, one row per source vertex."""
        return np.atleast_2d(dijkstra(self.adjacency(), directed=False, indices=vertices))

    def to_dict(self) -> dict:
        p = self.params
        return {"params": {"alpha": p.alpha, "tau": p.tau, "levels": p.levels, "beta_ratio": p.beta_ratio,
                           "epsilon": p.epsilon, "beta": p.beta},
                "base_scale": self.scale, "attachment_radius": self.attachment_radius,
                "vertices": [{"id": k, "point": int(z), "level": int(n), "weight": float(w)}
                             for k, (z, n, w) in enumerate(zip(self.vertex_point, self.vertex_level,
                                                               self.vertex_weight))],
                "edges": [{"u": int(a), "v": int(b), "length": float(L)}
                          for (a, b), L in zip(self.edges, self.edge_length)]}


def greedy_separated_net(space: DiscreteSpace, r: float, scale: float = 1.0) -> np.ndarray:
    """Maximal ``r``-separated net by greedy insertion in index order.

    A point joins the net unless some net point lies in its open ball of
    radius ``r`` (distances multiplied by ``scale``).
    """
    n = space.n
    mind = np.full(n, np.inf)
    thresh = r - space.tie_eps * scale
    net = []
    for i in range(n):
        if mind[i] >= thresh:
            net.append(i)
            np.minimum(mind, space.distances_from(i) * scale, out=mind)
    return np.asarray(net, dtype=int)


def edge_lengths(root_dist: np.ndarray, edges: np.ndarray, eps: float) -> np.ndarray:
    """Closed-form ``int_0^1 exp(-eps min(k_v + t, k_w + 1 - t)) dt`` per edge."""
    kv = root_dist[edges[:, 0]].astype(float)
    kw = root_dist[edges[:, 1]].astype(float)
    k = np.minimum(kv, kw)
    flat = kv == kw
    return np.where(flat, 2 * np.exp(-eps * k) * (-np.expm1(-eps / 2)) / eps,
                    np.exp(-eps * k) * (-np.expm1(-eps)) / eps)


def build_filling(base: DiscreteSpace, params: FillingParams) -> HyperbolicFilling:
    diam = base.diameter
    scale = 1.0 if diam < 1 else DIAM_TARGET / diam
    alpha, tau, N = params.alpha, params.tau, params.levels
    h = base.resolution_h * scale
    if alpha ** (-N) < 2 * h * (1 - 1e-12):
        raise ResourceLimitError(f"alpha^-N = {alpha ** -N:g} is below twice the resolution {2 * h:g}")
    nets = [np.array([0])]
    for n in range(1, N + 1):
        nets.append(greedy_separated_net(base, alpha ** (-n), scale))
    vp = np.concatenate(nets)
    vl = np.concatenate([np.full(a.size, n) for n, a in enumerate(nets)])
    if vp.size > MAX_VERTICES:
        raise ResourceLimitError(f"{vp.size} vertices exceed {MAX_VERTICES}")
    offsets = np.concatenate([[0], np.cumsum([a.size for a in nets])])
    tol = base.tie_eps * scale
    rows, cols = [], []
    for n in range(N + 1):
        A = nets[n]
        D = base.cross_distances(A, A) * scale
        i, j = np.nonzero(np.triu(D <= 2 * tau * alpha ** (-n) + tol, 1))
        rows.append(offsets[n] + i)
        cols.append(offsets[n] + j)
        if n < N:
            B = nets[n + 1]
            D = base.cross_distances(A, B) * scale
            i, j = np.nonzero(D <= alpha ** (-n) + alpha ** (-n - 1) + tol)
            rows.append(offsets[n] + i)
            cols.append(offsets[n + 1] + j)
    edges = np.column_stack([np.concatenate(rows), np.concatenate(cols)]).astype(int) if rows \
        else np.zeros((0, 2), dtype=int)
    m = vp.size
    G = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(m, m)).tocsr()
    order = breadth_first_order(G, 0, directed=False, return_predecessors=False)
    if order.size != m:
        raise ConstructionError(f"filling graph is disconnected ({m - order.size} unreachable vertices)")
    root_dist = shortest_path(G, directed=False, unweighted=True, indices=0).astype(int)
    eps = params.epsilon
    nu_ball = np.empty(m)
    for n in range(N + 1):
        sl = slice(offsets[n], offsets[n + 1])
        nu_ball[sl] = base.ball_masses_at(nets[n], alpha ** (-n) / scale)
    weight = np.exp(-params.beta * vl) * nu_ball
    return HyperbolicFilling(params, base, scale, nets, vp, vl, edges, weight, root_dist,
                             edge_lengths(root_dist, edges, eps))


def _resolve(filling: HyperbolicFilling, p) -> tuple[int, float]:
    """Vertex id and attachment offset for a vertex id or a ``("base", index)`` pair."""
    if isinstance(p, tuple) and len(p) == 2 and p[0] == "base":
        idx = int(p[1])
        if not 0 <= idx < filling.base.n:
            raise ArgumentError(f"base point {idx} out of range")
        return filling.attach(idx), filling.attachment_radius
    v = int(p)
    if not 0 <= v < filling.n_vertices:
        raise ArgumentError(f"vertex {v} out of range")
    return v, 0.0


def uniformized_distance(filling: HyperbolicFilling, p, q) -> float:
    """``d_eps`` between vertices (ints) or base points (``("base", index)``).

    A base point is its attached level-``N`` vertex plus the attachment
    radius; two equal base points are at distance 0.
    """
    if p == q:
        return 0.0
    v, a = _resolve(filling, p)
    w, b = _resolve(filling, q)
    # search from the smaller id so the value does not depend on argument order
    v, w = min(v, w), max(v, w)
    d = float(filling.distances_from(v)[0, w])
    if not math.isfinite(d):
        raise ConstructionError("vertices are not connected")
    return d + a + b


def _reach_fraction(x: np.ndarray, kp: np.ndarray, kq: np.ndarray, eps: float) -> np.ndarray:
    """Arc-length parameter ``t`` at which the uniformized length from endpoint ``p`` equals ``x``.

    The density along the edge is ``exp(-eps (kp + sigma(t)))`` with
    ``sigma = t`` (kq > kp), ``-t`` (kq < kp) or ``min(t, 1 - t)`` (kq == kp).
    Returns values clipped to ``[0, 1]``; ``x <= 0`` gives 0.
    """
    x = np.maximum(x, 0.0)
    y = eps * x * np.exp(eps * kp)
    t = np.empty_like(x)
    up, down, flat = kq > kp, kq < kp, kq == kp
    with np.errstate(divide="ignore", invalid="ignore"):
        t[up] = np.where(y[up] < 1, -np.log1p(-np.minimum(y[up], 1)) / eps, np.inf)
        t[down] = np.log1p(y[down]) / eps
        half = -np.expm1(-eps / 2)
        yf = y[flat]
        first = -np.log1p(-np.minimum(yf, half)) / eps
        arg = yf - half + math.exp(-eps / 2)
        second = 1 + np.log(np.maximum(arg, 1e-300)) / eps
        t[flat] = np.where(yf <= half, first, second)
    return np.clip(t, 0.0, 1.0)


def mu_beta_ball(filling: HyperbolicFilling, center, r: float, dist=None) -> float:
    """``mu_beta`` of the open uniformized ball ``B(center, r)``.

    ``center`` is a vertex id or ``("base", index)``; a base point is replaced
    by its attached vertex (error at most the attachment radius).
    """
    if not r > 0:
        raise ArgumentError("r must be > 0")
    v, _ = _resolve(filling, center)
    D = filling.distances_from(v)[0] if dist is None else dist
    return _ball_masses(filling, D, np.array([r]))[0]


def _ball_masses(filling: HyperbolicFilling, D: np.ndarray, radii: np.ndarray) -> np.ndarray:
    e = filling.edges
    eps = filling.params.epsilon
    k = filling.root_dist.astype(float)
    mass = filling.edge_mass
    out = []
    for r in radii:
        tp = _reach_fraction(r - D[e[:, 0]], k[e[:, 0]], k[e[:, 1]], eps)
        tq = _reach_fraction(r - D[e[:, 1]], k[e[:, 1]], k[e[:, 0]], eps)
        tp = np.where(D[e[:, 0]] < r, tp, 0.0)
        tq = np.where(D[e[:, 1]] < r, tq, 0.0)
        frac = np.minimum(tp + tq, 1.0)
        out.append(math.fsum((mass * frac).tolist()))
    return np.array(out)


def uniformized_diameter(filling: HyperbolicFilling) -> float:
    D = filling.distances_from(np.arange(filling.n_vertices))
    return float(D.max())


def diameter_bound(params: FillingParams) -> float:
    """``2 sum_n e^(-eps n) (1 - e^(-eps)) / eps = 2 / eps``."""
    return 2.0 / params.epsilon


def mu_beta_doubling(filling: HyperbolicFilling, centers, radii) -> float:
    """Largest ``mu_beta(B(c, 2r)) / mu_beta(B(c, r))`` over the given vertices and radii."""
    worst = 0.0
    radii = np.asarray(radii, dtype=float)
    for c in centers:
        D = filling.distances_from(int(c))[0]
        m1 = _ball_masses(filling, D, radii)
        m2 = _ball_masses(filling, D, 2 * radii)
        worst = max(worst, float(np.max(m2 / m1)))
    return worst


@dataclass
class CodimRelationTable:
    rows: list[dict]
    attachment_radius: float
    beta_ratio: float
    max_ratio: float | None
    min_ratio: float | None

    @property
    def spread(self) -> float | None:
        if self.max_ratio is None:
            return None
        return self.max_ratio / self.min_ratio

    def to_dict(self) -> dict:
        return {"rows": self.rows, "attachment_radius": self.attachment_radius,
                "beta_ratio": self.beta_ratio, "max_ratio": self.max_ratio,
                "min_ratio": self.min_ratio, "spread": self.spread}


def verify_codim_relation(filling: HyperbolicFilling, samples, radii) -> CodimRelationTable:
    """``rho(zeta, r) = mu_beta(B_eps(zeta, r)) r^(-beta/eps) / nu(B_Z(zeta, r))`` per sample and radius.

    Radii below twice the attachment radius are flagged and left out of the
    summary.
    """
    base = filling.base
    t = filling.params.beta_ratio
    a = filling.attachment_radius
    radii = np.asarray(sorted(float(r) for r in radii))
    if radii.size == 0 or not np.all(radii > 0):
        raise ArgumentError("radii must be positive")
    rows = []
    for z in samples:
        v = filling.attach(int(z))
        D = filling.distances_from(v)[0]
        mu = _ball_masses(filling, D, radii)
        for r, m in zip(radii, mu):
            nu = float(base.ball_masses_at(np.array([int(z)]), r / filling.scale)[0])
            flagged = bool(r < 2 * a)
            rows.append({"zeta": int(z), "vertex": v, "r": float(r), "mu_beta": float(m), "nu": nu,
                         "ratio": float(m * r**-t / nu), "flagged": flagged})
    good = [row["ratio"] for row in rows if not row["flagged"]]
    return CodimRelationTable(rows, a, t, max(good) if good else None, min(good) if good else None)


def attachment_scale_radii(filling: HyperbolicFilling, octaves: int = 4) -> list[float]:
    """Dyadic radii ``2a, 4a, ..., 2^octaves * 2a`` above the attachment radius ``a``."""
    a = filling.attachment_radius
    return [2 * a * 2.0**k for k in range(octaves + 1)]


@dataclass
class TraceReport:
    rows: list[dict]
    violations: int
    max_ratio: float | None
    bound: float
    passed: bool


def _greedy_filling_content(filling: HyperbolicFilling, pts: np.ndarray, t: float, delta: float,
                            Dv: np.ndarray, att: np.ndarray) -> float:
    """Greedy weighted set cover of base points by uniformized balls of radius ``<= delta``.

    Candidate centres are the attached vertices of ``pts``; radii halve from
    ``delta`` down to twice the attachment radius.  A ball covers a point when
    the attached vertex lies inside it.  The cost of a ball is
    ``mu_beta(B) / rad^t`` and balls are chosen by cost per newly covered
    ``nu``-mass.
    """
    nu = filling.base.weights[pts]
    a = filling.attachment_radius
    radii = []
    r = delta
    while r >= 2 * a * (1 - 1e-12):
        radii.append(r)
        r /= 2
    if not radii:
        radii = [delta]
    centers = np.unique(att)
    cand = []
    for ci, c in enumerate(centers):
        D = Dv[ci]
        masses = _ball_masses(filling, D, np.array(radii))
        for r, m in zip(radii, masses):
            cov = np.flatnonzero(D[att] < r)
            cand.append((m * r**-t, cov))
    covered = np.zeros(pts.size, dtype=bool)
    heap = [(cost / nu[cov].sum(), k) for k, (cost, cov) in enumerate(cand) if cov.size]
    heapq.heapify(heap)
    total = []
    while not covered.all() and heap:
        key, k = heapq.heappop(heap)
        cost, cov = cand[k]
        new = nu[cov[~covered[cov]]].sum()
        if new <= 0:
            continue
        fresh = cost / new
        if heap and fresh > heap[0][0] * (1 + 1e-12):
            heapq.heappush(heap, (fresh, k))
            continue
        covered[cov] = True
        total.append(cost)
    return math.fsum(total)


def boundary_trace_check(filling: HyperbolicFilling, subsets, deltas, bound: float = 1e3) -> TraceReport:
    """``nu(A) / H^{-beta/eps}_{mu_beta, delta}(A)`` for each subset ``A`` and scale ``delta``.

    The ratio should stay bounded above uniformly in ``delta``; a zero content
    with ``nu(A) > 0`` counts as a violation.
    """
    t = filling.params.beta_ratio
    rows, violations = [], 0
    for name, A in subsets:
        if not isinstance(A, IndicatorSet) or A.space is not filling.base:
            raise ArgumentError("subsets must be indicator sets on the base space")
        pts = A.indices
        if pts.size == 0:
            rows.append({"set": name, "skipped": True})
            continue
        att = np.array([filling.attach(int(z)) for z in pts])
        uniq = np.unique(att)
        Dv = filling.distances_from(uniq)
        nu = A.measure()
        for delta in deltas:
            content = _greedy_filling_content(filling, pts, t, float(delta), Dv, att)
            bad = content <= 0 and nu > 0
            violations += bool(bad)
            rows.append({"set": name, "delta": float(delta), "nu": nu, "content": content,
                         "ratio": (nu / content) if content > 0 else math.inf, "violation": bool(bad)})
    ratios = [r["ratio"] for r in rows if "ratio" in r]
    mx = max(ratios) if ratios else None
    return TraceReport(rows, violations, mx, bound, violations == 0 and (mx is None or mx <= bound))
