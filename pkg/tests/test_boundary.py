import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracperim.boundary import (BoundarySpec, chain_ordering, classify_ratio, cluster_diameters, dyadic_scales,
                                estimate_codimension, fractional_codimension, greedy_net, hausdorff_codimension,
                                hausdorff_content, measure_theoretic_boundary, minkowski_codimension,
                                minkowski_content, regularized_boundary)
from fracperim.errors import ArgumentError
from fracperim.geometry import FatCantorSpec, build_fat_cantor, build_grid_space, rasterize_interval_union
from fracperim.kernels import fat_cantor_energy
from fracperim.space import IndicatorSet


@pytest.fixture(scope="module")
def line():
    return build_grid_space(1, 1024)


@pytest.fixture(scope="module")
def plane():
    return build_grid_space(2, 64)


@pytest.fixture(scope="module")
def cantor_raster():
    cs = build_fat_cantor(FatCantorSpec(Fraction(1, 4), 12))
    return rasterize_interval_union(cs.remaining, 2**14)


def longest_run(mask):
    best = cur = 0
    for v in mask:
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best


def test_spec_validation(line):
    with pytest.raises(ArgumentError):
        BoundarySpec(0.1, 0.05)
    with pytest.raises(ArgumentError):
        BoundarySpec(0.01, 0.1, 0.7)
    with pytest.raises(ArgumentError):
        BoundarySpec(line.resolution_h, 0.1).check(line)
    spec = BoundarySpec.default(line)
    assert spec.scale_min == pytest.approx(8 * line.resolution_h)
    assert dyadic_scales(1.0, 8.0) == [8.0, 4.0, 2.0, 1.0]


def test_empty_set_boundaries(line):
    spec = BoundarySpec.default(line)
    E = IndicatorSet.empty(line)
    assert regularized_boundary(line, E, spec).count == 0
    assert measure_theoretic_boundary(line, E, spec).count == 0


def test_half_line_regularized_boundary(line):
    x = line.points[:, 0]
    E = IndicatorSet(line, x < 0.5)
    spec = BoundarySpec(16 * line.resolution_h, 0.1)
    got = regularized_boundary(line, E, spec).mask
    # a cell is boundary iff its open ball reaches a cell centre on the other side
    h = line.resolution_h
    want = np.abs(x - 0.5) + h / 2 < spec.scale_min - 1e-9 * h
    assert np.array_equal(got, want)


def test_half_plane_measure_theoretic_strip(plane):
    x = plane.points[:, 0]
    E = IndicatorSet(plane, x < 0.5)
    spec = BoundarySpec(4 * plane.resolution_h, 0.25)
    mt = measure_theoretic_boundary(plane, E, spec)
    dist = np.abs(x[mt.mask] - 0.5)
    assert mt.count > 0
    assert dist.max() <= spec.scale_max
    # the strip is a union of full columns
    cols = np.unique(np.round(x[mt.mask], 9))
    assert mt.count == cols.size * 64


def test_cantor_boundaries(cantor_raster):
    sp, E = cantor_raster.space, cantor_raster.set
    h = sp.resolution_h
    run = longest_run(E.mask)
    spec = BoundarySpec(max(4, run + 1) * h, 0.125)
    reg = regularized_boundary(sp, E, spec)
    assert np.all(reg.mask[E.mask])
    mt = measure_theoretic_boundary(sp, E, BoundarySpec(8 * h, 16 * h))
    assert np.all(~mt.mask | regularized_boundary(sp, E, BoundarySpec(8 * h, 16 * h)).mask)
    assert 0 < mt.count < reg.count


@given(st.integers(0, 2**31), st.sampled_from([0.1, 0.2, 0.4]))
def test_containment_property(seed, delta):
    sp = build_grid_space(1, 256)
    rng = np.random.default_rng(seed)
    mask = np.repeat(rng.random(16) < 0.5, 16)
    E = IndicatorSet(sp, mask)
    spec = BoundarySpec(4 * sp.resolution_h, 0.25, delta)
    mt = measure_theoretic_boundary(sp, E, spec)
    reg = regularized_boundary(sp, E, spec)
    assert not np.any(mt.mask & ~reg.mask)


def test_single_point_contents(line):
    S = IndicatorSet.from_indices(line, [512])
    for r in (0.02, 0.05, 0.1):
        for t in (0.0, 0.5, 1.0):
            m = minkowski_content(line, S, t, r)
            assert m.value == pytest.approx(r**-t * line.ball_masses_at([512], r)[0], rel=1e-12)
    t, r_max = 0.5, 0.1
    hc = hausdorff_content(line, S, t, r_max)
    best = min(line.ball_masses_at([512], r)[0] * r**-t for r in
               [r_max / 2**k for k in range(10) if r_max / 2**k >= line.resolution_h])
    assert hc.value == pytest.approx(best, rel=1e-12)


def test_full_interval_minkowski(line):
    S = IndicatorSet.full(line)
    for r in (0.02, 0.05, 0.1):
        m = minkowski_content(line, S, 0.0, r)
        # a greedy r-net of [0, 1] has about 1/r members, each ball of mass about 2r
        assert 1.0 <= m.value <= 2.0 + 4 * r
        assert minkowski_content(line, S, 0.5, r).value == pytest.approx(m.value * r**-0.5, rel=1e-12)


def test_finite_set_resolution_floor(line):
    idx = [100, 400, 800]
    S = IndicatorSet.from_indices(line, idx)
    t = 0.5
    floor = 3 * line.weights.min() / (4 * line.resolution_h) ** t
    for r in (0.2, 0.1, 0.05, 0.02):
        assert hausdorff_content(line, S, t, r).value >= floor * (1 - 1e-12) / 4**t


@given(st.integers(0, 2**31))
def test_content_monotone_and_ordered(seed):
    sp = build_grid_space(1, 256)
    rng = np.random.default_rng(seed)
    S = IndicatorSet(sp, np.repeat(rng.random(32) < 0.4, 8))
    if S.count == 0:
        return
    ts = [0.0, 0.3, 0.6, 0.9]
    for r in (4 * sp.resolution_h, 0.05, 0.1):
        mk = [minkowski_content(sp, S, t, r).value for t in ts]
        hs = [hausdorff_content(sp, S, t, r).value for t in ts]
        # r < 1, so the weight r^-t grows with t
        assert all(a <= b for a, b in zip(mk, mk[1:]))
        assert all(a <= b * (1 + 1e-12) for a, b in zip(hs, hs[1:]))
        assert all(h <= m * (1 + 1e-12) for h, m in zip(hs, mk))


def test_greedy_net_covers(plane):
    S = IndicatorSet(plane, np.hypot(*(plane.points - 0.5).T) < 0.3)
    r = 0.07
    c = greedy_net(plane, S, r)
    D = plane.cross_distances(c, c)
    np.fill_diagonal(D, np.inf)
    assert D.min() >= r - plane.tie_eps
    assert np.all(plane.cross_distances(S.indices, c).min(axis=1) < r)


def test_cluster_diameters(line):
    S = IndicatorSet.from_indices(line, [10, 11, 12, 500, 900, 901])
    d = np.sort(cluster_diameters(line, S))
    h = line.resolution_h
    assert d == pytest.approx([0.0, h, 2 * h])


def test_estimate_codimension_synthetic():
    scales = [2.0**-k for k in range(3, 9)]
    ts = np.round(np.arange(0, 1.01, 0.1), 10)
    contents = [[r ** (0.55 - t) for r in scales] for t in ts]
    est = estimate_codimension(ts, scales, contents)
    assert est.status == "ok"
    assert est.bracket == (0.5, 0.6)
    assert est.estimate == pytest.approx(0.55)
    with pytest.raises(ArgumentError):
        estimate_codimension(ts, scales[:3], [c[:3] for c in contents])
    with pytest.raises(ArgumentError):
        estimate_codimension(ts, scales[::-1], contents)


def test_codim_full_grid_and_point(line):
    ts = np.round(np.arange(-0.2, 1.21, 0.1), 10)
    scales = dyadic_scales(8 * line.resolution_h, 0.25)
    full = minkowski_codimension(line, IndicatorSet.full(line), ts, scales)
    assert full.contains(0.0)
    point = minkowski_codimension(line, IndicatorSet.from_indices(line, [512]), ts, scales)
    assert point.contains(1.0)
    hp = hausdorff_codimension(line, IndicatorSet.from_indices(line, [512]), ts, scales, r_min=scales[-1])
    assert hp.contains(1.0)


def test_cantor_minkowski_codim_zero(cantor_raster):
    sp, E = cantor_raster.space, cantor_raster.set
    spec = BoundarySpec(64 * sp.resolution_h, 0.125)
    reg = regularized_boundary(sp, E, spec)
    est = minkowski_codimension(sp, reg, np.round(np.arange(-0.2, 0.81, 0.05), 10), spec.radii())
    assert est.bracket[1] <= 0.05


def test_ratio_classification():
    assert classify_ratio(0.9) == "convergent"
    assert classify_ratio(1.1) == "divergent"
    assert classify_ratio(1.01) == "inconclusive"
    with pytest.raises(ArgumentError):
        fractional_codimension(lambda s, J: 1.0, [0.5], [1, 2])


def test_fractional_synthetic_geometric():
    # E_J = sum_{j <= J} q(s)^j with q(s) = 2 a^(1-s): threshold 1 - ln2/ln(1/a)
    a = 0.25
    fn = lambda s, J: math.fsum((2 * a ** (1 - s)) ** j for j in range(1, J + 1))
    grid = np.round(np.arange(0.3, 0.71, 0.02), 10)
    fc = fractional_codimension(fn, grid, [8, 9, 10])
    assert fc.status == "ok"
    assert fc.contains(0.5)
    assert fc.width <= 0.06


def test_fat_cantor_convergent_below_threshold():
    # the level ratio of the exact energy tends to 2 a^(1-s)
    a = Fraction(1, 4)
    fc = fractional_codimension(lambda s, J: fat_cantor_energy(a, J, s), [0.2, 0.3, 0.4, 0.6, 0.7],
                                [10, 11, 12])
    assert fc.classes == ["convergent"] * 3 + ["divergent"] * 2


def test_chain_ordering():
    assert chain_ordering((0, 0.05), (0.48, 0.52), (1.0, 1.05)) == (True, True)
    assert chain_ordering((0.7, 0.75), (0.72, 0.78), (0.7, 0.8)) == (True, False)
    assert chain_ordering((0.6, 0.7), (0.2, 0.3), (0.9, 1.0))[0] is False
