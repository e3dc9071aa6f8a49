import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from fracperim.errors import ArgumentError, DomainError
from fracperim.geometry import FatCantorSpec, build_fat_cantor, build_grid_space, koch_polygon
from fracperim.kernels import (Interval, KernelParams, cantor_energy_exact, fat_cantor_energy, functional_J,
                               interaction_L_s, interval_interaction_exact, interval_union_energy, kernel_K_s,
                               polygon_area, polygon_interaction, s_perimeter)
from fracperim.space import DiscreteSpace, IndicatorSet, doubling_estimate

from test_space import spaces


def three_line():
    return DiscreteSpace([[0.0], [1.0], [2.0]], [1.0, 1.0, 1.0], 0.5)


def test_kernel_hand_values():
    two = DiscreteSpace([[0.0], [1.0]], [1.0, 1.0], 0.5)
    assert kernel_K_s(two, 0, 1, KernelParams(0.5)) == pytest.approx(1.0, rel=1e-15)
    sp = three_line()
    assert kernel_K_s(sp, 0, 2, KernelParams(0.5)) == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-15)
    A, B = IndicatorSet.from_indices(sp, [0]), IndicatorSet.from_indices(sp, [2])
    assert interaction_L_s(sp, A, B, KernelParams(0.5)) == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-15)
    assert interaction_L_s(sp, A, IndicatorSet.empty(sp), KernelParams(0.5)) == 0.0
    with pytest.raises(DomainError):
        kernel_K_s(sp, 1, 1, KernelParams(0.5))


def test_params_validation():
    with pytest.raises(ArgumentError):
        KernelParams(1.0)
    with pytest.raises(ArgumentError):
        KernelParams(0.5, "nope")


def test_interval_examples():
    s = 0.5
    assert interval_interaction_exact(Interval(0, Fraction(1, 4)), Interval(Fraction(1, 2), 1), s) == \
        pytest.approx(2 * math.sqrt(3) + 2 * math.sqrt(2) - 6, rel=1e-12)
    assert interval_interaction_exact(Interval(0, 1), Interval(Fraction(1, 2), Fraction(1, 2)), s) == 0.0
    for a in (Fraction(1, 4), Fraction(1, 3)):
        for s in (0.2, 0.7):
            p = 1 - s
            want = (float(a) ** p + (1 - float(a)) ** p - 1) / (s * p)
            assert interval_interaction_exact(Interval(0, a), Interval(a, 1), s) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        interval_interaction_exact(Interval(0, Fraction(1, 2)), Interval(Fraction(1, 4), 1), 0.5)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_interval_matches_quadrature(s):
    rng = np.random.default_rng(int(s * 100))
    for _ in range(100):
        cuts = np.sort(rng.choice(np.arange(1, 200), 3, replace=False))
        a0, a1, b0 = (Fraction(int(c), 200) for c in cuts)
        b1 = b0 + Fraction(int(rng.integers(1, 60)), 200)
        val = interval_interaction_exact(Interval(a0, a1), Interval(b0, b1), s)
        ref, _ = integrate.dblquad(lambda y, x: (y - x) ** (-1 - s), float(a0), float(a1),
                                   float(b0), float(b1), epsabs=0, epsrel=1e-11)
        assert val == pytest.approx(ref, rel=1e-8)


def test_interval_monotone_divergence():
    half = (Interval(0, Fraction(1, 2)), Interval(Fraction(1, 2), 1))
    vals = [interval_interaction_exact(*half, s) for s in np.linspace(0.05, 0.999, 40)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 100 * vals[0]


def test_cantor_energy_examples():
    assert cantor_energy_exact([], [Interval(0, 1)], 0.3) == 0.0
    a = Fraction(1, 4)
    cs = build_fat_cantor(FatCantorSpec(a, 1))
    R = cs.removed_flat[0]
    L, Rr = cs.remaining
    want = 2 * (interval_interaction_exact(R, L, 0.3) + interval_interaction_exact(R, Rr, 0.3))
    assert cantor_energy_exact(cs.removed_flat, cs.remaining, 0.3) == pytest.approx(want, rel=1e-14)
    with pytest.raises(DomainError):
        cantor_energy_exact([Interval(0, Fraction(1, 2))], [Interval(Fraction(1, 4), 1)], 0.3)


@pytest.mark.parametrize("a", [Fraction(1, 4), Fraction(1, 5), Fraction(2, 7)])
@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_fat_cantor_energy_matches_pairwise(a, s):
    for J in (1, 3, 6):
        cs = build_fat_cantor(FatCantorSpec(a, J))
        ref = cantor_energy_exact(cs.removed_flat, cs.remaining, s)
        assert fat_cantor_energy(a, J, s) == pytest.approx(ref, rel=1e-12)
        assert interval_union_energy(cs.remaining, s) == pytest.approx(ref, rel=1e-12)


def test_grid_perimeter_matches_interval_oracle():
    sp = build_grid_space(1, 256)
    E = IndicatorSet(sp, sp.points[:, 0] < 0.5)
    want = 2 * interval_interaction_exact(Interval(0, Fraction(1, 2)), Interval(Fraction(1, 2), 1), 0.5)
    got = s_perimeter(sp, E, KernelParams(0.5, "interval-1d"))
    assert abs(got - want) <= 0.05 * want


def test_trivial_perimeters():
    sp = build_grid_space(2, 8)
    p = KernelParams(0.4)
    assert s_perimeter(sp, IndicatorSet.empty(sp), p) == 0.0
    assert s_perimeter(sp, IndicatorSet.full(sp), p) == 0.0


def random_sets(sp, seed):
    rng = np.random.default_rng(seed)
    return [IndicatorSet(sp, rng.random(sp.n) < q) for q in (0.3, 0.5, 0.7)]


@given(spaces(), st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_symmetry_additivity_complement(sp, seed, s):
    p = KernelParams(s)
    A, B, C = random_sets(sp, seed)
    assert interaction_L_s(sp, A, B, p) == interaction_L_s(sp, B, A, p)
    A1, A2 = A - C, A & C
    lhs = interaction_L_s(sp, A1 | A2, B, p)
    rhs = interaction_L_s(sp, A1, B, p) + interaction_L_s(sp, A2, B, p)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)
    for form in ("two-sided", "kernel"):
        assert s_perimeter(sp, A, p, form) == s_perimeter(sp, A.complement(), p, form)
        assert s_perimeter(sp, A, p, form) >= 0


@given(spaces(), st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_kernel_form_comparability(sp, seed, s):
    p = KernelParams(s)
    E = random_sets(sp, seed)[1]
    if E.count in (0, sp.n):
        return
    one = s_perimeter(sp, E, p, "two-sided")
    two = s_perimeter(sp, E, p, "kernel")
    # B(i, d) sits inside B(j, 2d), so doubling at the pair distances bounds the ratio
    d = np.unique(sp.cross_distances(np.arange(sp.n), np.arange(sp.n)))
    C = doubling_estimate(sp, np.clip(d[d > 0], sp.resolution_h, sp.diameter))
    assert one / C <= two <= one * C


@given(spaces(max_n=12), st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_functional_J_double_loop(sp, seed, s):
    rng = np.random.default_rng(seed)
    om = rng.random(sp.n) < 0.5
    om[0], om[-1] = True, False
    E = rng.random(sp.n) < 0.5
    p = KernelParams(s)
    got = functional_J(sp, IndicatorSet(sp, om), IndicatorSet(sp, E), p)
    ref = 0.0
    for i in range(sp.n):
        for j in range(sp.n):
            if i == j:
                continue
            k = kernel_K_s(sp, i, j, p) * sp.weights[i] * sp.weights[j]
            if E[i] and om[i] and not E[j]:
                ref += k
            if E[i] and not om[i] and om[j] and not E[j]:
                ref += k
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)
    Ec = IndicatorSet(sp, ~E)
    assert functional_J(sp, IndicatorSet(sp, om), Ec, p) == pytest.approx(got, rel=1e-12, abs=1e-300)


def test_functional_J_trivial_and_errors():
    sp = three_line()
    p = KernelParams(0.5)
    om = IndicatorSet.from_indices(sp, [1])
    assert functional_J(sp, om, IndicatorSet.empty(sp), p) == 0.0
    assert functional_J(sp, om, IndicatorSet.full(sp), p) == 0.0
    with pytest.raises(ArgumentError):
        functional_J(sp, IndicatorSet.full(sp), IndicatorSet.empty(sp), p)


def test_polygon_homogeneity_and_rotation():
    poly = koch_polygon(1)
    s = 0.4
    base = polygon_interaction(poly, s)
    lam = 1.7
    assert polygon_interaction(lam * poly, s) == pytest.approx(lam ** (2 - s) * base, rel=1e-9)
    th = 0.3
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    assert polygon_interaction(poly @ R.T + 0.25, s) == pytest.approx(base, rel=1e-9)
    assert polygon_interaction(poly[::-1], s) == pytest.approx(base, rel=1e-12)
    assert polygon_area(poly) > 0

