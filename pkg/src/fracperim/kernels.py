"""Nonlocal kernels, interaction energies and closed-form interval interactions.

Two kernel modes are supported:

``metric-measure``
    ``K_s(x, y) = 2 / (d^s [mu(B(x, d)) + mu(B(y, d))])`` with ``d = d(x, y)``.
``interval-1d``
    the pure power kernel ``|x - y|^(-1-s)``.  On a uniform 1-D grid whose
    weights are the cell lengths, the kernel is averaged over the two cells,
    so that ``K(i, j) w_i w_j`` is the exact integral over the cell pair.

All pair sums are accumulated with :func:`math.fsum`, so a sum depends only on
the multiset of its terms and never on evaluation order or thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import chain
from typing import Iterable, Sequence

import numpy as np

from ._parallel import blocks, map_ordered
from .errors import ArgumentError, DomainError, ResourceLimitError
from .space import DiscreteSpace, IndicatorSet

MODES = ("metric-measure", "interval-1d")
PAIR_BUDGET = 4 * 10**8


@dataclass(frozen=True)
class KernelParams:
    s: float
    mode: str = "metric-measure"

    def __post_init__(self):
        s = float(self.s)
        if not (0.0 < s < 1.0):
            raise ArgumentError(f"s must lie in (0, 1), got {self.s!r}")
        if self.mode not in MODES:
            raise ArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        object.__setattr__(self, "s", s)


@dataclass(frozen=True, order=True)
class Interval:
    """Closed interval with exact rational endpoints."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ArgumentError(f"interval endpoints out of order: [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


# ---------------------------------------------------------------------------
# discrete kernels
# ---------------------------------------------------------------------------

def _check_sets(space: DiscreteSpace, *sets: IndicatorSet) -> None:
    for E in sets:
        if not isinstance(E, IndicatorSet) or E.space is not space:
            raise ArgumentError("set does not belong to this space")


def kernel_K_s(space: DiscreteSpace, x: int, y: int, params: KernelParams) -> float:
    x = space._check_point(x)
    y = space._check_point(y)
    if x == y:
        raise DomainError("the kernel is singular on the diagonal")
    return float(kernel_block(space, [x], [y], params)[0, 0])


def kernel_block(space: DiscreteSpace, rows, cols, params: KernelParams) -> np.ndarray:
    """Kernel values ``K[a, b] = K(rows[a], cols[b])``; entries with ``rows[a] == cols[b]`` are 0.

    The result is exactly symmetric: ``kernel_block(s, A, B)`` equals
    ``kernel_block(s, B, A).T`` bit for bit.
    """
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    d = space.cross_distances(rows, cols)
    same = rows[:, None] == cols[None, :]
    s = params.s
    with np.errstate(divide="ignore"):
        if params.mode == "interval-1d":
            K = _cell_averaged(space, d, s) if _is_cell_grid(space) else d ** (-1.0 - s)
        else:
            m_rc = space.pair_ball_masses(rows, cols)
            m_cr = space.pair_ball_masses(cols, rows).T
            K = 2.0 / (d ** s * (m_rc + m_cr))
    K[same] = 0.0
    return K


def _is_cell_grid(space: DiscreteSpace) -> bool:
    g = space.grid
    return g is not None and len(g.shape) == 1 and bool(np.all(space.weights == g.spacing))


def _cell_averaged(space: DiscreteSpace, d: np.ndarray, s: float) -> np.ndarray:
    """``h^-2 int int |x - y|^(-1-s)`` over two cells ``k = d / h`` apart."""
    h = space.grid.spacing
    k = np.rint(d / h)
    p = 1.0 - s
    with np.errstate(invalid="ignore"):
        sd = _second_difference(k.ravel(), 1.0, p).reshape(k.shape)
    return np.where(k > 0, sd * h ** (-1.0 - s) / (s * p), np.inf)


def weighted_kernel_block(space: DiscreteSpace, rows, cols, params: KernelParams) -> np.ndarray:
    """``K(i, j) * (w_i * w_j)``; the weight product is formed first so the block stays symmetric."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    w = space.weights
    return kernel_block(space, rows, cols, params) * (w[rows][:, None] * w[cols][None, :])


def _pair_terms(space: DiscreteSpace, rows, cols, params: KernelParams, block: int = 512):
    """Weighted kernel values over ``rows x cols`` in row blocks (used as an fsum stream)."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    if rows.size * cols.size > PAIR_BUDGET:
        raise ResourceLimitError(f"{rows.size * cols.size} pairs exceed the budget {PAIR_BUDGET}")
    if rows.size == 0 or cols.size == 0:
        return []
    spans = blocks(rows.size, block)
    parts = map_ordered(lambda sp: weighted_kernel_block(space, rows[sp[0]:sp[1]], cols, params).ravel(),
                        spans)
    return parts


def _fsum_parts(parts) -> float:
    return math.fsum(chain.from_iterable(p.tolist() for p in parts))


def interaction_L_s(space: DiscreteSpace, A: IndicatorSet, B: IndicatorSet, params: KernelParams) -> float:
    """``L_s(A, B) = sum_{i in A} sum_{j in B, j != i} K(i, j) w_i w_j``."""
    _check_sets(space, A, B)
    return _fsum_parts(_pair_terms(space, A.indices, B.indices, params))


def s_perimeter(space: DiscreteSpace, E: IndicatorSet, params: KernelParams, form: str = "two-sided") -> float:
    """Discrete s-perimeter of ``E``.

    ``form="two-sided"`` evaluates
    ``sum_{i != j} |chi_E(i) - chi_E(j)| w_i w_j / (d^s mu(B(i, d)))``;
    ``form="kernel"`` evaluates ``2 L_s(E, X \\ E)``.  In ``interval-1d`` mode
    both reduce to ``2 sum_{E x E^c} |x - y|^(-1-s) w_i w_j``.
    """
    _check_sets(space, E)
    if form not in ("two-sided", "kernel"):
        raise ArgumentError(f"unknown form {form!r}")
    inside, outside = E.indices, E.complement().indices
    if inside.size == 0 or outside.size == 0:
        return 0.0
    if form == "kernel" or params.mode == "interval-1d":
        return 2.0 * _fsum_parts(_pair_terms(space, inside, outside, params))
    # each cross pair contributes 1/(d^s M_ij) + 1/(d^s M_ji); the sum is the
    # same float for E and its complement
    w = space.weights
    s = params.s

    def work(span):
        r = inside[span[0]:span[1]]
        d = space.cross_distances(r, outside)
        m_io = space.pair_ball_masses(r, outside)
        m_oi = space.pair_ball_masses(outside, r).T
        ds = d ** s
        return ((1.0 / (ds * m_io) + 1.0 / (ds * m_oi)) * (w[r][:, None] * w[outside][None, :])).ravel()

    if inside.size * outside.size > PAIR_BUDGET:
        raise ResourceLimitError("pair budget exceeded")
    return _fsum_parts(map_ordered(work, blocks(inside.size, 512)))


def functional_J(space: DiscreteSpace, omega: IndicatorSet, E: IndicatorSet, params: KernelParams) -> float:
    """``J(E) = L_s(E ∩ Omega, X \\ E) + L_s(E \\ Omega, Omega \\ E)``."""
    _check_sets(space, omega, E)
    if omega.count == 0:
        raise ArgumentError("omega must be nonempty")
    if omega.count == space.n:
        raise ArgumentError("omega must leave a nonempty exterior")
    first = _pair_terms(space, (E & omega).indices, E.complement().indices, params)
    second = _pair_terms(space, (E - omega).indices, (omega - E).indices, params)
    return _fsum_parts(list(first) + list(second))


# ---------------------------------------------------------------------------
# interval interactions
# ---------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = (_GL_X + 1.0) / 2.0
_GL_W = _GL_W / 2.0


def _pair_values(g, l1, l2, s: float) -> np.ndarray:
    """``int_0^l1 int_0^l2 (g + x + y)^(-1-s) dy dx`` for arrays of gaps and lengths.

    Corner formula in general; tensor Gauss-Legendre when both intervals are
    short compared with the gap, where the corner sum would cancel.
    """
    g = np.asarray(g, dtype=float)
    l1 = np.asarray(l1, dtype=float)
    l2 = np.asarray(l2, dtype=float)
    g, l1, l2 = np.broadcast_arrays(g, l1, l2)
    p = 1.0 - s
    out = np.empty(g.shape)
    far = np.maximum(l1, l2) <= 0.5 * g
    near = ~far
    gn, an, bn = g[near], l1[near], l2[near]
    out[near] = ((gn + an) ** p + (gn + bn) ** p - gn ** p - (gn + an + bn) ** p) / (s * p)
    if np.any(far):
        gf, af, bf = g[far], l1[far], l2[far]
        x = gf[:, None, None] + af[:, None, None] * _GL_X[None, :, None] + bf[:, None, None] * _GL_X[None, None, :]
        vals = np.einsum("i,j,kij->k", _GL_W, _GL_W, x ** (-1.0 - s))
        out[far] = vals * af * bf
    return out


def interval_interaction_exact(I1: Interval, I2: Interval, s: float) -> float:
    """``int_{I1} int_{I2} |x - y|^(-1-s) dy dx`` for intervals with disjoint interiors."""
    if not (0.0 < float(s) < 1.0):
        raise ArgumentError("s must lie in (0, 1)")
    s = float(s)
    if I1.length == 0 or I2.length == 0:
        return 0.0
    if I1.lo > I2.lo:
        I1, I2 = I2, I1
    gap = I2.lo - I1.hi
    if gap < 0:
        raise DomainError(f"intervals {I1} and {I2} overlap; the integral diverges")
    return float(_pair_values(float(gap), float(I1.length), float(I2.length), s))


def _integer_grid(intervals: Sequence[Interval]) -> tuple[int, list[tuple[int, int]]]:
    den = 1
    for I in intervals:
        den = math.lcm(den, I.lo.denominator, I.hi.denominator)
    return den, [(int(I.lo * den), int(I.hi * den)) for I in intervals]


def _check_tiling(removed: Sequence[Interval], remaining: Sequence[Interval]) -> None:
    items = sorted(chain(removed, remaining), key=lambda I: (I.lo, I.hi))
    for a, b in zip(items, items[1:]):
        if b.lo < a.hi:
            raise DomainError(f"intervals {a} and {b} overlap")


def cantor_energy_exact(removed: Sequence[Interval], remaining: Sequence[Interval], s: float,
                        *, check: bool = True) -> float:
    """``2 sum_{R in removed} sum_{C in remaining} I(R, C)`` with closed-form pair values.

    Endpoint differences are formed in exact integer arithmetic before the
    conversion to floating point.  Cost is ``len(removed) * len(remaining)``;
    for deep fat Cantor sets use :func:`fat_cantor_energy`.
    """
    if not (0.0 < float(s) < 1.0):
        raise ArgumentError("s must lie in (0, 1)")
    s = float(s)
    removed = [I for I in removed if I.length > 0]
    remaining = [I for I in remaining if I.length > 0]
    if not removed or not remaining:
        return 0.0
    if len(removed) * len(remaining) > PAIR_BUDGET // 8:
        raise ResourceLimitError(f"{len(removed) * len(remaining)} interval pairs exceed the budget")
    if check:
        _check_tiling(removed, remaining)
    den, ints = _integer_grid(list(removed) + list(remaining))
    big = max(abs(v) for pair in ints for v in pair)
    dtype = np.int64 if big < 2**62 else object
    R = np.array(ints[:len(removed)], dtype=dtype)
    C = np.array(ints[len(removed):], dtype=dtype)
    parts = []
    for lo, hi in blocks(len(R), max(1, 2**20 // len(C))):
        r = R[lo:hi]
        left = r[:, None, 1] <= C[None, :, 0]
        gap = np.where(left, C[None, :, 0] - r[:, None, 1], r[:, None, 0] - C[None, :, 1])
        if np.any(gap < 0):
            raise DomainError("removed and remaining intervals overlap")
        lr = np.broadcast_to((r[:, 1] - r[:, 0])[:, None], gap.shape)
        lc = np.broadcast_to((C[:, 1] - C[:, 0])[None, :], gap.shape)
        to_f = (lambda a: np.asarray(a, dtype=float) / den) if dtype is np.int64 else \
            (lambda a: np.vectorize(lambda v: float(Fraction(int(v), den)))(a))
        parts.append(_pair_values(to_f(gap), to_f(lr), to_f(lc), s).ravel())
    return 2.0 * _fsum_parts(parts)


def fat_cantor_lengths(a: Fraction, depth: int) -> list[Fraction]:
    """``c_j = (1 - 3a + a (2a)^j) / (2^j (1 - 2a))`` for ``j = 0..depth``."""
    a = Fraction(a)
    return [(1 - 3 * a + a * (2 * a) ** j) / (2**j * (1 - 2 * a)) for j in range(depth + 1)]


@lru_cache(maxsize=None)
def _even_binomials(p: float, terms: int = 12) -> tuple[float, ...]:
    out = []
    c = 1.0
    for k in range(1, 2 * terms + 1):
        c *= (p - k + 1) / k
        if k % 2 == 0:
            out.append(c)
    return tuple(out)


def _second_difference(delta: np.ndarray, c: float, p: float) -> np.ndarray:
    """``2 phi(delta) - phi(delta - c) - phi(delta + c)`` with ``phi(z) = |z|^p``, cancellation free."""
    ad = np.abs(delta)
    out = np.empty_like(ad)
    far = ad > 10.0 * c
    near = ~far
    x = ad[near]
    out[near] = 2.0 * x ** p - np.abs(x - c) ** p - (x + c) ** p
    if np.any(far):
        x = ad[far]
        u2 = (c / x) ** 2
        acc = np.zeros_like(x)
        powk = np.ones_like(x)
        for b in _even_binomials(p):
            powk = powk * u2
            acc += b * powk
        out[far] = -2.0 * x ** p * acc
    return out


def fat_cantor_energy(a, depth: int, s: float, chunk_levels: int = 10) -> float:
    """Energy ``2 sum I(R, C)`` of the depth-``depth`` fat Cantor set with parameter ``a``.

    Uses the translation self-similarity of the construction: writing the
    signed endpoint measure of the remaining intervals as ``rho``, the energy
    equals ``2/(s(1-s)) [sum rho(y)(phi(y) - phi(1-y)) - sum rho(y) rho(z) phi(y-z)]``,
    and the autocorrelation unfolds level by level into ``3^depth`` leaf terms.
    Agrees with :func:`cantor_energy_exact` on the same construction.
    """
    a = Fraction(a)
    s = float(s)
    if not (0.0 < s < 1.0):
        raise ArgumentError("s must lie in (0, 1)")
    if not (0 < a < Fraction(1, 3)):
        raise ArgumentError("a must lie in (0, 1/3)")
    if depth < 0:
        raise ArgumentError("depth must be >= 0")
    if depth == 0:
        return 0.0
    if depth > 20:
        raise ResourceLimitError("depth above 20 needs more than 3^20 leaf terms")
    p = 1.0 - s
    c = fat_cantor_lengths(a, depth)
    shifts = [c[m + 1] + a ** (m + 1) for m in range(depth)]
    den = 1
    for f in shifts + [c[depth]]:
        den = math.lcm(den, f.denominator)
    T = [int(f * den) for f in shifts]
    cJ_int = int(c[depth] * den)
    cJ = cJ_int / den

    lefts = [0]
    for m in range(depth):
        lefts = lefts + [v + T[m] for v in lefts]
    first = math.fsum(
        (l / den) ** p - (1.0 - l / den) ** p - ((l + cJ_int) / den) ** p + (1.0 - (l + cJ_int) / den) ** p
        for l in lefts)

    L = min(depth, chunk_levels)
    top, bottom = T[:depth - L], T[depth - L:]

    def expand(levels):
        offs = [0]
        wts = [1]
        for t in levels:
            offs = [o + d for o in offs for d in (0, t, -t)]
            wts = [w * k for w in wts for k in (2, 1, 1)]
        return offs, wts

    b_off, b_w = expand(bottom)
    b_off = np.array([o / den for o in b_off])
    b_w = np.array(b_w, dtype=float)
    t_off, t_w = expand(top)

    def chunk(item):
        off, wt = item
        vals = _second_difference(off / den + b_off, cJ, p)
        return math.fsum((wt * b_w * vals).tolist())

    corr = math.fsum(map_ordered(chunk, list(zip(t_off, t_w))))
    return 2.0 / (s * p) * (first - corr)


# ---------------------------------------------------------------------------
# polygons in the plane
# ---------------------------------------------------------------------------

def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=1)
def _far_kernel():
    from numba import njit

    @njit(cache=True)
    def pair_int(ax, ay, ex, ey, bx, by, fx, fy, s, gx, gw, sub):
        tot = 0.0
        n = gx.shape[0]
        for p in range(sub):
            for q in range(sub):
                acc = 0.0
                for i in range(n):
                    t = (p + gx[i]) / sub
                    x = ax + t * ex
                    y = ay + t * ey
                    for j in range(n):
                        u = (q + gx[j]) / sub
                        dx = x - (bx + u * fx)
                        dy = y - (by + u * fy)
                        acc += gw[i] * gw[j] * (dx * dx + dy * dy) ** (-0.5 * s)
                tot += acc / (sub * sub)
        return tot

    @njit(cache=True)
    def far_sum(A, E, L, N, s, g2x, g2w, g4x, g4w, g8x, g8w):
        m = A.shape[0]
        out = np.zeros(m)
        for i in range(m):
            mix = A[i, 0] + 0.5 * E[i, 0]
            miy = A[i, 1] + 0.5 * E[i, 1]
            row = 0.0
            for k in range(i + 2, m):
                if i == 0 and k == m - 1:
                    continue
                mkx = A[k, 0] + 0.5 * E[k, 0]
                mky = A[k, 1] + 0.5 * E[k, 1]
                dm = np.sqrt((mix - mkx) ** 2 + (miy - mky) ** 2)
                lm = max(L[i], L[k])
                if dm > 8 * lm:
                    v = pair_int(A[i, 0], A[i, 1], E[i, 0], E[i, 1], A[k, 0], A[k, 1], E[k, 0], E[k, 1],
                                 s, g2x, g2w, 1)
                elif dm > 3 * lm:
                    v = pair_int(A[i, 0], A[i, 1], E[i, 0], E[i, 1], A[k, 0], A[k, 1], E[k, 0], E[k, 1],
                                 s, g4x, g4w, 1)
                else:
                    v = pair_int(A[i, 0], A[i, 1], E[i, 0], E[i, 1], A[k, 0], A[k, 1], E[k, 0], E[k, 1],
                                 s, g8x, g8w, 4)
                row += v * L[i] * L[k] * (N[i, 0] * N[k, 0] + N[i, 1] * N[k, 1])
            out[i] = row
        return out

    return far_sum


def polygon_area(poly) -> float:
    x, y = np.asarray(poly, dtype=float).T
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def polygon_interaction(poly, s: float) -> float:
    """``int_E int_{R^2 \\ E} |x - y|^(-2-s) dy dx`` for a simple polygon ``E``.

    Two applications of the divergence theorem turn the area integral into
    ``s^-2 sum_{e, f} (nu_e . nu_f) int_e int_f |x - y|^(-s)`` over edge pairs
    with outward normals ``nu``.  Equal edges use the closed form, edges that
    share a vertex a Duffy-type reduction to one dimension, and the rest tensor
    Gauss rules whose order grows as edges get close.
    """
    s = float(s)
    if not (0.0 < s < 1.0):
        raise ArgumentError("s must lie in (0, 1)")
    A = np.ascontiguousarray(poly, dtype=float)
    if A.ndim != 2 or A.shape[1] != 2 or A.shape[0] < 3:
        raise ArgumentError("a polygon needs at least 3 vertices in the plane")
    E = np.roll(A, -1, axis=0) - A
    L = np.linalg.norm(E, axis=1)
    if np.any(L == 0):
        raise ArgumentError("polygon has repeated vertices")
    orient = np.sign(polygon_area(A))
    N = np.stack([E[:, 1], -E[:, 0]], 1) / L[:, None] * orient
    m = A.shape[0]

    terms = [2.0 * L ** (2.0 - s) / ((1.0 - s) * (2.0 - s))]
    j = (np.arange(m) + 1) % m
    u = -E / L[:, None]
    v = E[j] / L[j][:, None]
    gy, gwy = _gauss(40)

    def corner(L1, u1, L2, v2):
        w = L1[:, None, None] * u1[:, None, :] - L2[:, None, None] * gy[None, :, None] * v2[:, None, :]
        return L1 * L2 / (2.0 - s) * np.sum(gwy * np.linalg.norm(w, axis=2) ** (-s), axis=1)

    adj = corner(L, u, L[j], v) + corner(L[j], v, L, u)
    terms.append(2.0 * adj * np.sum(N * N[j], axis=1))
    far = _far_kernel()(A, np.ascontiguousarray(E), L, np.ascontiguousarray(N), s,
                        *_gauss(2), *_gauss(4), *_gauss(8))
    terms.append(2.0 * far)
    return math.fsum(np.concatenate(terms).tolist()) / s**2


def interval_union_energy(intervals: Iterable[Interval], s: float) -> float:
    """``2 int_E int_{[0,1] \\ E} |x - y|^(-1-s)`` for a finite union ``E`` of intervals in ``[0, 1]``."""
    items = sorted((I for I in intervals if I.length > 0), key=lambda I: I.lo)
    gaps = []
    pos = Fraction(0)
    for I in items:
        if I.lo < pos:
            raise DomainError("intervals overlap")
        if I.lo > pos:
            gaps.append(Interval(pos, I.lo))
        pos = I.hi
    if pos > 1 or (items and items[0].lo < 0):
        raise DomainError("intervals must lie in [0, 1]")
    if pos < 1:
        gaps.append(Interval(pos, Fraction(1)))
    return cantor_energy_exact(gaps, items, s, check=False)
