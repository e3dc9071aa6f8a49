import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracperim.errors import ArgumentError, ResourceLimitError
from fracperim.geometry import (FatCantorSpec, box_counting_dimension, build_fat_cantor, build_grid_space,
                                build_koch_snowflake, interface_mask, koch_polygon, parse_fraction,
                                rasterize_interval_union)
from fracperim.kernels import Interval, fat_cantor_lengths, polygon_area


def closed_form_c(a, J):
    return (1 - 3 * a + a * (2 * a) ** J) / (2**J * (1 - 2 * a))


def test_cantor_depth_one():
    cs = build_fat_cantor(FatCantorSpec(Fraction(1, 4), 1))
    assert cs.removed_flat == [Interval(Fraction(3, 8), Fraction(5, 8))]
    assert list(cs.remaining) == [Interval(0, Fraction(3, 8)), Interval(Fraction(5, 8), 1)]
    assert cs.c == Fraction(3, 8)


def test_cantor_a_fifth_depth_three():
    a = Fraction(1, 5)
    cs = build_fat_cantor(FatCantorSpec(a, 3))
    assert len(cs.remaining) == 8
    c3 = closed_form_c(a, 3)
    assert all(I.length == c3 for I in cs.remaining)
    # constructive subtraction: halve what is left after each removal
    c = Fraction(1)
    for j in range(1, 4):
        c = (c - a**j) / 2
    assert c == c3


def test_cantor_limit_measure():
    # for a = 1/4 the excess over the limit 1/2 is the geometric tail 2^(-J-1)
    a = Fraction(1, 4)
    for J in (4, 8, 12):
        L = build_fat_cantor(FatCantorSpec(a, J)).remaining_length
        assert L - Fraction(1, 2) == Fraction(1, 2 ** (J + 1))


def assert_tiling(cs):
    pieces = sorted(cs.removed_flat + list(cs.remaining), key=lambda I: I.lo)
    assert pieces[0].lo == 0 and pieces[-1].hi == 1
    for p, q in zip(pieces, pieces[1:]):
        assert p.hi == q.lo
    a, J = cs.spec.a, cs.spec.depth
    assert cs.remaining_length == 1 - sum(2 ** (j - 1) * a**j for j in range(1, J + 1))
    assert cs.c == closed_form_c(a, J) == fat_cantor_lengths(a, J)[-1]
    for j, level in enumerate(cs.removed, start=1):
        assert len(level) == 2 ** (j - 1)
        assert all(I.length == a**j for I in level)


@given(st.integers(1, 30), st.integers(4, 97), st.integers(1, 8))
def test_cantor_exact_tiling(p, q, J):
    a = Fraction(p, q)
    if not 0 < a < Fraction(1, 3):
        with pytest.raises(ArgumentError):
            FatCantorSpec(a, J)
        return
    assert_tiling(build_fat_cantor(FatCantorSpec(a, J)))


def test_cantor_spec_errors():
    for bad in (Fraction(1, 3), Fraction(1, 2), 0):
        with pytest.raises(ArgumentError):
            FatCantorSpec(bad, 2)
    for depth in (0, -1, 1.5, True):
        with pytest.raises(ArgumentError):
            FatCantorSpec(Fraction(1, 4), depth)
    assert parse_fraction("2/9") == Fraction(2, 9)
    with pytest.raises(ArgumentError):
        parse_fraction("one quarter")


def test_raster_trivial():
    full = rasterize_interval_union([Interval(0, 1)], 16)
    assert full.set.count == 16
    empty = rasterize_interval_union([], 16)
    assert empty.set.count == 0
    assert np.allclose(full.space.weights, 1 / 16)
    with pytest.raises(ArgumentError):
        rasterize_interval_union([Interval(0, 2)], 16)


def test_raster_cantor_mass():
    cs = build_fat_cantor(FatCantorSpec(Fraction(1, 4), 2))
    r = rasterize_interval_union(cs.remaining, 4096)
    assert r.mass_error <= 2 / 4096


@given(st.integers(1, 10), st.integers(4, 41), st.integers(1, 6), st.integers(2, 3000))
def test_raster_mass_error_bound(p, q, J, n):
    a = Fraction(p, q)
    if not a < Fraction(1, 3):
        return
    cs = build_fat_cantor(FatCantorSpec(a, J))
    r = rasterize_interval_union(cs.remaining, n)
    assert r.mass_error <= 2 * len(cs.remaining) / n + 1e-12


def test_grid_examples():
    g = build_grid_space(1, 2)
    assert g.n == 2 and np.allclose(g.weights, 0.5)
    g = build_grid_space(2, 4)
    assert g.n == 16 and np.allclose(g.weights, 1 / 16)
    assert g.resolution_h == 0.25
    with pytest.raises(ArgumentError):
        build_grid_space(1, 1)
    with pytest.raises(ArgumentError):
        build_grid_space(3, 4)


@given(st.integers(1, 2), st.integers(2, 60), st.sampled_from([0.5, 1.0, 3.0]))
def test_grid_total_mass(dim, n, ext):
    g = build_grid_space(dim, n, ext)
    assert math.fsum(g.weights) == pytest.approx(ext**dim, rel=1e-12)


def test_koch_edges_and_area():
    for d in range(5):
        assert len(koch_polygon(d)) == 3 * 4**d
    assert len(koch_polygon(3)) == 192
    # snowflake area: sqrt(3)/4 * (8/5 - 3/5 (4/9)^d)
    for d in range(5):
        want = math.sqrt(3) / 4 * (1.6 - 0.6 * (4 / 9) ** d)
        assert polygon_area(koch_polygon(d)) == pytest.approx(want, rel=1e-12)


def test_koch_triangle_raster_area():
    for n in (128, 512):
        k = build_koch_snowflake(0, n)
        area = k.set.measure()
        assert abs(area - math.sqrt(3) / 4) <= 4 / n


def test_koch_box_dimension():
    k = build_koch_snowflake(5, 1024)
    m = interface_mask(k.set.mask.reshape(k.shape))
    est = box_counting_dimension(m, [4, 8, 16, 32, 64])
    assert abs(est - math.log(4) / math.log(3)) <= 0.05


def test_koch_limits():
    with pytest.raises(ResourceLimitError):
        koch_polygon(9)
    with pytest.raises(ResourceLimitError):
        build_koch_snowflake(2, 4096)
    with pytest.raises(ArgumentError):
        koch_polygon(-1)


def test_box_dimension_of_line():
    m = np.zeros((256, 256), dtype=bool)
    m[:, 100] = True
    assert box_counting_dimension(m, [1, 2, 4, 8, 16]) == pytest.approx(1.0, abs=0.02)
