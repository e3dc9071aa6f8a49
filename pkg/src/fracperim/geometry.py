"""Test geometries: exact fat Cantor sets, von Koch snowflakes and uniform grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ArgumentError, ConstructionError, ResourceLimitError
from .kernels import Interval, fat_cantor_lengths
from .space import DiscreteSpace, GridInfo, IndicatorSet

KOCH_MAX_DEPTH = 8
KOCH_MAX_N = 2048


def parse_fraction(text) -> Fraction:
    """Parse ``"P/Q"``, an integer or a decimal string into an exact rational."""
    if isinstance(text, Fraction):
        return text
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise ArgumentError(f"not a rational number: {text!r}") from None


@dataclass(frozen=True)
class FatCantorSpec:
    a: Fraction
    depth: int

    def __post_init__(self):
        a = parse_fraction(self.a)
        if not (0 < a < Fraction(1, 3)):
            raise ArgumentError(f"a must lie in (0, 1/3), got {a}")
        if isinstance(self.depth, bool) or int(self.depth) != self.depth or self.depth < 1:
            raise ArgumentError(f"depth must be a positive integer, got {self.depth!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "depth", int(self.depth))


@dataclass(frozen=True)
class FatCantorSet:
    """Depth-``J`` stage of the fat Cantor construction.

    ``removed[j - 1]`` holds the ``2^(j-1)`` open intervals of length ``a^j``
    removed at level ``j`` (stored by their closures); ``remaining`` the
    ``2^J`` closed intervals left over.
    """

    spec: FatCantorSpec
    removed: tuple[tuple[Interval, ...], ...]
    remaining: tuple[Interval, ...]

    @property
    def removed_flat(self) -> list[Interval]:
        return [I for level in self.removed for I in level]

    @property
    def remaining_length(self) -> Fraction:
        return sum((I.length for I in self.remaining), Fraction(0))

    @property
    def c(self) -> Fraction:
        return fat_cantor_lengths(self.spec.a, self.spec.depth)[-1]

    def truncated(self, depth: int) -> "FatCantorSet":
        return build_fat_cantor(FatCantorSpec(self.spec.a, depth))


def build_fat_cantor(spec: FatCantorSpec) -> FatCantorSet:
    """Remove a centred open interval of length ``a^j`` from every level-``(j-1)`` interval."""
    a = spec.a
    lengths = fat_cantor_lengths(a, spec.depth)
    remaining = [Interval(0, 1)]
    removed = []
    for j in range(1, spec.depth + 1):
        gap = a**j
        level, nxt = [], []
        for I in remaining:
            if not I.length > gap:
                raise ConstructionError(f"level {j}: gap {gap} does not fit in {I}")
            mid = (I.lo + I.hi) / 2
            R = Interval(mid - gap / 2, mid + gap / 2)
            level.append(R)
            nxt += [Interval(I.lo, R.lo), Interval(R.hi, I.hi)]
        removed.append(tuple(level))
        remaining = nxt
        if any(I.length != lengths[j] for I in remaining):
            raise ConstructionError(f"level {j}: interval lengths disagree with the closed form")
    return FatCantorSet(spec, tuple(removed), tuple(remaining))


class Raster(NamedTuple):
    space: DiscreteSpace
    set: IndicatorSet
    mass_error: float


def build_grid_space(dim: int, n: int, extent=1.0) -> DiscreteSpace:
    """Cell-centred uniform grid on ``[0, extent]^dim`` with cell-volume weights."""
    if dim not in (1, 2):
        raise ArgumentError("dim must be 1 or 2")
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ArgumentError("n must be an integer >= 2")
    n = int(n)
    ext = float(extent)
    if not ext > 0:
        raise ArgumentError("extent must be > 0")
    h = ext / n
    ax = (np.arange(n) + 0.5) * h
    if dim == 1:
        pts = ax[:, None]
    else:
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
    w = np.full(n**dim, ext**dim / n**dim)
    return DiscreteSpace(pts, w, h, grid=GridInfo((n,) * dim, h, (0.5 * h,) * dim), validate=False)


def rasterize_interval_union(intervals: Sequence[Interval], n: int) -> Raster:
    """Midpoint rasterization of a union of intervals in ``[0, 1]`` on an ``n``-cell grid.

    Cell ``i`` belongs to the set when its centre ``(2i + 1) / (2n)`` lies in
    some interval; the test is exact rational arithmetic on integers.
    """
    space = build_grid_space(1, n)
    mask = np.zeros(n, dtype=bool)
    exact = Fraction(0)
    for I in intervals:
        if I.lo < 0 or I.hi > 1:
            raise ArgumentError(f"interval {I} leaves [0, 1]")
        exact += I.length
        # centre (2i+1)/(2n) in [lo, hi]  <=>  lo*2n - 1 <= 2i <= hi*2n - 1
        lo = math.ceil((I.lo * 2 * n - 1) / 2)
        hi = math.floor((I.hi * 2 * n - 1) / 2)
        if hi >= lo:
            mask[max(lo, 0):min(hi, n - 1) + 1] = True
    E = IndicatorSet(space, mask)
    return Raster(space, E, abs(E.measure() - float(exact)))


def koch_polygon(depth: int) -> np.ndarray:
    """Counter-clockwise vertices of the side-1 von Koch snowflake after ``depth`` refinements.

    The initial triangle is ``(0, 0), (1, 0), (1/2, sqrt(3)/2)``; each edge
    ``a -> b`` becomes four edges with the new bump on its right-hand side,
    which is the outside for a counter-clockwise boundary.
    """
    if isinstance(depth, bool) or int(depth) != depth or depth < 0:
        raise ArgumentError("depth must be a nonnegative integer")
    if depth > KOCH_MAX_DEPTH:
        raise ResourceLimitError(f"depth {depth} exceeds {KOCH_MAX_DEPTH}")
    r3 = math.sqrt(3.0)
    poly = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, r3 / 2]])
    rot = np.array([[0.5, r3 / 2], [-r3 / 2, 0.5]])
    for _ in range(int(depth)):
        a = poly
        d = (np.roll(poly, -1, axis=0) - a) / 3.0
        p1 = a + d
        p2 = p1 + d @ rot.T
        p3 = a + 2.0 * d
        poly = np.stack([a, p1, p2, p3], axis=1).reshape(-1, 2)
    return poly


def scanline_fill(poly: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd membership of the grid points ``(xs[i], ys[j])``; returns a ``(len(xs), len(ys))`` mask."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    y0, y1 = a[:, 1], b[:, 1]
    ylo, yhi = np.minimum(y0, y1), np.maximum(y0, y1)
    rows, cross = [], []
    # half-open rule: a scanline at height y crosses the edge iff ylo <= y < yhi
    j0 = np.searchsorted(ys, ylo, side="left")
    j1 = np.searchsorted(ys, yhi, side="left")
    for k in np.flatnonzero(j1 > j0):
        js = np.arange(j0[k], j1[k])
        t = (ys[js] - y0[k]) / (y1[k] - y0[k])
        rows.append(js)
        cross.append(a[k, 0] + t * (b[k, 0] - a[k, 0]))
    mask = np.zeros((xs.size, ys.size), dtype=bool)
    if not rows:
        return mask
    rows = np.concatenate(rows)
    cross = np.concatenate(cross)
    order = np.lexsort((cross, rows))
    rows, cross = rows[order], cross[order]
    if rows.size % 2:
        raise ConstructionError("odd number of scanline crossings")
    r0, r1 = rows[0::2], rows[1::2]
    if np.any(r0 != r1):
        raise ConstructionError("unpaired scanline crossing")
    i_start = np.searchsorted(xs, cross[0::2], side="right")
    i_stop = np.searchsorted(xs, cross[1::2], side="left")
    diff = np.zeros((ys.size, xs.size + 1), dtype=np.int32)
    np.add.at(diff, (r0, i_start), 1)
    np.add.at(diff, (r0, np.maximum(i_stop, i_start)), -1)
    return (np.cumsum(diff[:, :-1], axis=1) > 0).T


class KochRaster(NamedTuple):
    space: DiscreteSpace
    set: IndicatorSet
    polygon: np.ndarray
    shape: tuple[int, int]


KOCH_BOX = 1.25


def build_koch_snowflake(depth: int, n: int) -> KochRaster:
    """Rasterize the depth-``depth`` snowflake on an ``n x n`` cell grid.

    The grid is the square of side ``KOCH_BOX`` centred on the snowflake's
    centre ``(1/2, sqrt(3)/6)``; cells are indexed row-major in ``(x, y)``.
    """
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ArgumentError("n must be an integer >= 2")
    if n > KOCH_MAX_N:
        raise ResourceLimitError(f"n={n} exceeds {KOCH_MAX_N}")
    poly = koch_polygon(depth)
    h = KOCH_BOX / n
    cx, cy = 0.5, math.sqrt(3.0) / 6.0
    ax = (np.arange(n) + 0.5) * h
    xs = cx - KOCH_BOX / 2 + ax
    ys = cy - KOCH_BOX / 2 + ax
    mask = scanline_fill(poly, xs, ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    space = DiscreteSpace(pts, np.full(n * n, h * h), h,
                          grid=GridInfo((n, n), h, (xs[0], ys[0])), validate=False)
    return KochRaster(space, IndicatorSet(space, mask.ravel()), poly, (n, n))


def interface_mask(mask2d: np.ndarray) -> np.ndarray:
    """Cells of a 2-D mask with a 4-neighbour of the other label."""
    m = np.asarray(mask2d, dtype=bool)
    out = np.zeros_like(m)
    dx = m[1:, :] != m[:-1, :]
    dy = m[:, 1:] != m[:, :-1]
    out[1:, :] |= dx
    out[:-1, :] |= dx
    out[:, 1:] |= dy
    out[:, :-1] |= dy
    return out


def box_counting_dimension(mask2d: np.ndarray, sizes: Sequence[int]) -> float:
    """Least-squares slope of ``log N(k)`` against ``log(1/k)`` for box sizes ``k`` (in cells)."""
    m = np.asarray(mask2d, dtype=bool)
    counts = []
    for k in sizes:
        nx, ny = -(-m.shape[0] // k), -(-m.shape[1] // k)
        pad = np.zeros((nx * k, ny * k), dtype=bool)
        pad[:m.shape[0], :m.shape[1]] = m
        counts.append(int(pad.reshape(nx, k, ny, k).any(axis=(1, 3)).sum()))
    x = -np.log(np.asarray(sizes, dtype=float))
    return float(np.polyfit(x, np.log(counts), 1)[0])
