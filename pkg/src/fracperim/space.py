"""Finite weighted metric spaces standing in for doubling metric measure spaces.

A :class:`DiscreteSpace` approximates a continuum space by cells: each point
carries the measure of the cell it represents.  Balls are open everywhere,
``B(x, r) = {y : d(x, y) < r}``.  Distances within ``1e-9 * resolution_h`` of
the radius are treated as ties and excluded, so the ball predicate does not
depend on the last bit of a floating-point distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist, squareform

from ._parallel import blocks, map_ordered
from .errors import ArgumentError, ConstructionError, ResourceLimitError

DENSE_LIMIT = 4096
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class GridInfo:
    """Layout of a uniform cell-centred grid, enabling convolution fast paths."""

    shape: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...]


class DiscreteSpace:
    """Finite point cloud with a metric, positive weights and a resolution scale.

    Parameters
    ----------
    points : array_like, shape (n, dim), optional
        Coordinates; the metric is Euclidean.  Omit when ``distances`` is given.
    weights : array_like, shape (n,)
        Cell masses, all strictly positive.
    resolution_h : float
        Mesh scale.  No two points may be closer than ``resolution_h / 2``.
    distances : array_like, shape (n, n), optional
        Explicit distance table (the ``"table"`` metric).
    grid : GridInfo, optional
        Grid layout of ``points`` (row-major), used only for fast paths.
    """

    def __init__(self, points=None, weights=None, resolution_h: float = 0.0, *,
                 distances=None, grid: GridInfo | None = None, validate: bool = True):
        if weights is None:
            raise ArgumentError("weights are required")
        w = np.array(weights, dtype=float).reshape(-1)
        if points is None and distances is None:
            raise ArgumentError("either points or distances must be given")
        if points is not None:
            pts = np.array(points, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            if pts.ndim != 2 or pts.shape[0] != w.size:
                raise ArgumentError(f"points shape {pts.shape} does not match {w.size} weights")
            pts.setflags(write=False)
        else:
            pts = None
        if distances is not None:
            table = np.array(distances, dtype=float)
            if table.shape != (w.size, w.size):
                raise ArgumentError(f"distance table shape {table.shape} does not match {w.size} weights")
            table.setflags(write=False)
        else:
            table = None
        w.setflags(write=False)
        self._points = pts
        self._table = table
        self._weights = w
        self._h = float(resolution_h)
        self.grid = grid
        if validate:
            self._validate()

    # -- basic attributes -------------------------------------------------
    @property
    def n(self) -> int:
        return int(self._weights.size)

    def __len__(self) -> int:
        return self.n

    @property
    def points(self) -> np.ndarray | None:
        return self._points

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def resolution_h(self) -> float:
        return self._h

    @property
    def dim(self) -> int | None:
        return None if self._points is None else int(self._points.shape[1])

    @property
    def metric(self) -> str:
        return "table" if self._table is not None else "euclidean"

    @property
    def tie_eps(self) -> float:
        return TIE_RTOL * self._h

    @cached_property
    def total_mass(self) -> float:
        return float(np.sum(self._weights))

    @cached_property
    def uniform_weight(self) -> float | None:
        w0 = self._weights[0]
        return float(w0) if np.all(self._weights == w0) else None

    def __repr__(self) -> str:
        return f"DiscreteSpace(n={self.n}, metric={self.metric}, h={self._h:g})"

    # -- validation -------------------------------------------------------
    def _validate(self) -> None:
        w = self._weights
        if w.size == 0:
            raise ArgumentError("a space needs at least one point")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ArgumentError("all weights must be finite and > 0")
        if not (np.isfinite(self._h) and self._h > 0):
            raise ArgumentError("resolution_h must be > 0")
        if self._table is not None:
            self._validate_table()
        if self.n < 2:
            return
        if self.n <= DENSE_LIMIT:
            d = self.distance_matrix()
            off = d[~np.eye(self.n, dtype=bool)]
            dmin = float(off.min())
        elif self._points is not None:
            dmin = float(self.tree.query(self._points, k=2)[0][:, 1].min())
        else:
            dmin = float(np.min(self._table + np.diag(np.full(self.n, np.inf))))
        if dmin < self._h / 2:
            raise ArgumentError(
                f"points at distance {dmin:g} violate the resolution invariant (h/2 = {self._h / 2:g})")

    def _validate_table(self) -> None:
        d = self._table
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ArgumentError("distance table must be finite and nonnegative")
        if not np.array_equal(d, d.T):
            raise ArgumentError("distance table must be symmetric")
        if np.any(np.diag(d) != 0):
            raise ArgumentError("distance table must vanish on the diagonal")
        off = d + np.eye(self.n)
        if np.any(off <= 0):
            raise ArgumentError("distinct points must be at positive distance")
        tol = 1e-12 * float(d.max())
        if self.n <= 200:
            for k in range(self.n):
                if np.any(d > d[:, k:k + 1] + d[k:k + 1, :] + tol):
                    raise ArgumentError("distance table violates the triangle inequality")
        else:
            rng = np.random.default_rng(0)
            i, j, k = rng.integers(0, self.n, size=(3, 20000))
            if np.any(d[i, j] > d[i, k] + d[k, j] + tol):
                raise ArgumentError("distance table violates the triangle inequality")

    # -- metric access ----------------------------------------------------
    def _check_point(self, i) -> int:
        if isinstance(i, (bool, np.bool_)) or not isinstance(i, (int, np.integer)):
            raise ArgumentError(f"point id must be an integer, got {i!r}")
        if not 0 <= int(i) < self.n:
            raise ArgumentError(f"point id {i} out of range [0, {self.n})")
        return int(i)

    @cached_property
    def _dense(self) -> np.ndarray:
        if self._table is not None:
            return self._table
        if self.n > DENSE_LIMIT:
            raise ResourceLimitError(f"dense distance table refused for n={self.n} > {DENSE_LIMIT}")
        d = squareform(pdist(self._points)) if self.n > 1 else np.zeros((1, 1))
        d.setflags(write=False)
        return d

    def distance_matrix(self) -> np.ndarray:
        """Dense symmetric distance table (only for ``n <= DENSE_LIMIT`` or table metrics)."""
        return self._dense

    def has_dense(self) -> bool:
        return self._table is not None or self.n <= DENSE_LIMIT

    def distances_from(self, i: int, idx=None) -> np.ndarray:
        """Distances from point ``i`` to all points (or to the points ``idx``)."""
        i = self._check_point(i)
        if self.has_dense():
            row = self._dense[i]
            return row if idx is None else row[idx]
        pts = self._points if idx is None else self._points[idx]
        return np.sqrt(np.sum((pts - self._points[i]) ** 2, axis=1))

    def distance(self, i: int, j: int) -> float:
        j = self._check_point(j)
        return float(self.distances_from(i)[j])

    def cross_distances(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if self.has_dense():
            return self._dense[np.ix_(rows, cols)]
        a = self._points[rows]
        b = self._points[cols]
        return np.sqrt(np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2))

    @cached_property
    def tree(self) -> cKDTree:
        if self._points is None:
            raise ArgumentError("a k-d tree needs coordinates")
        return cKDTree(self._points)

    @cached_property
    def diameter(self) -> float:
        if self.n == 1:
            return 0.0
        if self.has_dense():
            return float(self._dense.max())
        pts = self._points
        if pts.shape[1] == 1:
            return float(pts.max() - pts.min())
        from scipy.spatial import ConvexHull

        hull = pts[ConvexHull(pts).vertices]
        return float(pdist(hull).max())

    # -- ball masses ------------------------------------------------------
    def ball_mass_field(self, r: float, mask=None) -> np.ndarray:
        """``mu(B(x, r) ∩ mask)`` for every point ``x`` of the space."""
        wm = self._weights if mask is None else np.where(mask, self._weights, 0.0)
        rr = r - self.tie_eps
        if rr <= 0:
            return np.zeros(self.n)
        if self.grid is not None and self.uniform_weight is not None:
            return self._grid_ball_field(rr, mask)
        if self.has_dense():
            d = self._dense
            out = np.empty(self.n)
            for lo, hi in blocks(self.n, 512):
                out[lo:hi] = (d[lo:hi] < rr) @ wm
            return out
        hits = self.tree.query_ball_point(self._points, rr)
        return np.array([wm[h].sum() for h in hits])

    def _stencil(self, rr: float) -> np.ndarray:
        g = self.grid
        k = int(np.floor(rr / g.spacing)) + 1
        ax = np.arange(-k, k + 1) * g.spacing
        grids = np.meshgrid(*([ax] * len(g.shape)), indexing="ij")
        dist = np.sqrt(sum(c * c for c in grids))
        return (dist < rr).astype(float)

    def _grid_ball_field(self, rr: float, mask) -> np.ndarray:
        g = self.grid
        img = np.ones(g.shape) if mask is None else np.asarray(mask, dtype=float).reshape(g.shape)
        stencil = self._stencil(rr)
        if stencil.size <= 9 * 9 or min(g.shape) < stencil.shape[0]:
            from scipy.ndimage import convolve

            counts = convolve(img, stencil, mode="constant", cval=0.0)
        else:
            counts = fftconvolve(img, stencil, mode="same")
        return np.rint(counts).reshape(-1) * self.uniform_weight

    def ball_masses_at(self, centers, r: float, mask=None) -> np.ndarray:
        """``mu(B(c, r) ∩ mask)`` for the listed centers only."""
        centers = np.asarray(centers, dtype=int)
        rr = r - self.tie_eps
        wm = self._weights if mask is None else np.where(mask, self._weights, 0.0)
        if rr <= 0:
            return np.zeros(centers.size)
        if self.has_dense():
            return (self._dense[centers] < rr) @ wm
        if self.grid is not None and self.uniform_weight is not None and centers.size > 64:
            return self._grid_ball_field(rr, mask)[centers]
        hits = self.tree.query_ball_point(self._points[centers], rr)
        return np.array([wm[h].sum() for h in hits])

    def pair_ball_masses(self, rows, cols) -> np.ndarray:
        """``M[a, b] = mu(B(rows[a], d(rows[a], cols[b])))``, the open ball through ``cols[b]``."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        w = self._weights
        eps = self.tie_eps

        def work(span):
            lo, hi = span
            out = np.empty((hi - lo, cols.size))
            for a in range(lo, hi):
                d = self.distances_from(int(rows[a]))
                order = np.argsort(d, kind="stable")
                cum = np.concatenate(([0.0], np.cumsum(w[order])))
                k = np.searchsorted(d[order], d[cols] - eps, side="left")
                out[a - lo] = cum[k]
            return out

        parts = map_ordered(work, blocks(rows.size, 256))
        return np.vstack(parts) if parts else np.empty((0, cols.size))


class IndicatorSet:
    """Subset of a :class:`DiscreteSpace`, stored as a read-only boolean mask."""

    __slots__ = ("space", "mask")

    def __init__(self, space: DiscreteSpace, mask):
        m = np.array(mask, dtype=bool).reshape(-1)
        if m.size != space.n:
            raise ArgumentError(f"membership has length {m.size}, space has {space.n} points")
        m.setflags(write=False)
        self.space = space
        self.mask = m

    @classmethod
    def from_indices(cls, space: DiscreteSpace, idx) -> "IndicatorSet":
        m = np.zeros(space.n, dtype=bool)
        m[np.asarray(idx, dtype=int)] = True
        return cls(space, m)

    @classmethod
    def empty(cls, space: DiscreteSpace) -> "IndicatorSet":
        return cls(space, np.zeros(space.n, dtype=bool))

    @classmethod
    def full(cls, space: DiscreteSpace) -> "IndicatorSet":
        return cls(space, np.ones(space.n, dtype=bool))

    def _same(self, other: "IndicatorSet") -> None:
        if not isinstance(other, IndicatorSet) or other.space is not self.space:
            raise ArgumentError("sets live on different spaces")

    def complement(self) -> "IndicatorSet":
        return IndicatorSet(self.space, ~self.mask)

    def __or__(self, other):
        self._same(other)
        return IndicatorSet(self.space, self.mask | other.mask)

    def __and__(self, other):
        self._same(other)
        return IndicatorSet(self.space, self.mask & other.mask)

    def __sub__(self, other):
        self._same(other)
        return IndicatorSet(self.space, self.mask & ~other.mask)

    def __eq__(self, other) -> bool:
        return (isinstance(other, IndicatorSet) and other.space is self.space
                and bool(np.array_equal(self.mask, other.mask)))

    def __hash__(self):
        return hash((id(self.space), self.mask.tobytes()))

    def issubset(self, other: "IndicatorSet") -> bool:
        self._same(other)
        return not bool(np.any(self.mask & ~other.mask))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    def measure(self) -> float:
        return float(np.sum(self.space.weights[self.mask]))

    def __repr__(self) -> str:
        return f"IndicatorSet({self.count}/{self.space.n})"


@dataclass(frozen=True)
class BallCover:
    """Centers of an ``radius``-net with the multiplicity of the doubled balls."""

    centers: tuple[int, ...]
    radius: float
    overlap_bound: int


def ball_measure(space: DiscreteSpace, center: int, r: float) -> float:
    """Mass of the open ball ``B(center, r)``."""
    c = space._check_point(center)
    if not r >= 0:
        raise ArgumentError("radius must be >= 0")
    return float(space.ball_masses_at([c], r)[0])


def doubling_estimate(space: DiscreteSpace, scales: Sequence[float], centers=None) -> float:
    """Empirical doubling constant ``max mu(B(x, 2r)) / mu(B(x, r))``.

    Every point is a center unless ``centers`` is given.
    """
    top = max(space.diameter, space.resolution_h)
    for r in scales:
        if r < space.resolution_h * (1 - 1e-12) or r > top * (1 + 1e-12):
            raise ArgumentError(f"scale {r:g} outside [h, diameter] = [{space.resolution_h:g}, {top:g}]")
    idx = np.arange(space.n) if centers is None else np.asarray(centers, dtype=int)
    best = 1.0
    for r in scales:
        small = space.ball_masses_at(idx, r)
        big = space.ball_masses_at(idx, 2 * r)
        best = max(best, float(np.max(big / small)))
    return best


def bounded_overlap_cover(space: DiscreteSpace, eps: float) -> BallCover:
    """Maximal ``eps``-separated net by greedy farthest-point insertion.

    The open ``eps``-balls cover the space and the ``eps/2``-balls are pairwise
    disjoint.  ``overlap_bound`` is the largest number of ``2 eps``-balls
    containing a single point.
    """
    if not eps >= 2 * space.resolution_h:
        raise ArgumentError(f"eps={eps:g} below 2*resolution_h={2 * space.resolution_h:g}")
    tie = space.tie_eps
    centers = [0]
    mind = np.array(space.distances_from(0), dtype=float)
    while True:
        j = int(np.argmax(mind))
        if mind[j] < eps - tie:
            break
        centers.append(j)
        np.minimum(mind, space.distances_from(j), out=mind)
    mult = np.zeros(space.n, dtype=int)
    for c in centers:
        mult += space.distances_from(c) < 2 * eps - tie
    return BallCover(tuple(centers), float(eps), int(mult.max()))


def partition_of_unity(space: DiscreteSpace, cover: BallCover) -> np.ndarray:
    """Normalised tent functions, one row per cover center.

    ``psi_i = max(0, 1 - max(0, d(x, c_i) - eps) / eps)`` equals 1 on the
    ``eps``-ball and vanishes outside the doubled ball.
    """
    eps = cover.radius
    psi = np.empty((len(cover.centers), space.n))
    for k, c in enumerate(cover.centers):
        d = space.distances_from(c)
        psi[k] = np.clip(1.0 - np.maximum(d - eps, 0.0) / eps, 0.0, 1.0)
    total = psi.sum(axis=0)
    if np.any(total <= 0):
        raise ConstructionError("cover leaves points uncovered")
    return psi / total


def discrete_convolution(space: DiscreteSpace, f, eps: float, cover: BallCover | None = None) -> np.ndarray:
    """``f_eps = sum_i (mean of f over B_i) * phi_i``."""
    f = np.asarray(f, dtype=float)
    if f.shape != (space.n,):
        raise ArgumentError(f"f must have shape ({space.n},)")
    if cover is None:
        cover = bounded_overlap_cover(space, eps)
    phi = partition_of_unity(space, cover)
    w = space.weights
    means = np.empty(len(cover.centers))
    for k, c in enumerate(cover.centers):
        inside = space.distances_from(c) < cover.radius - space.tie_eps
        means[k] = np.dot(w[inside], f[inside]) / np.sum(w[inside])
    return means @ phi
