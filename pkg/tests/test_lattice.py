import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from boundedtype import lattice, modular
from boundedtype.lattice import UnimodularMatrix


def test_stabilizer_of_i_has_four_elements():
    st = lattice.stabilizer_of_i()
    tuples = {m.as_tuple() for m in st}
    assert len(st) == 4
    assert ((1, 0), (0, 1)) in tuples
    assert ((0, -1), (1, 0)) in tuples


def test_no_fifth_stabilizer_element_up_to_five():
    assert len(lattice.stabilizer_of_i(bound=5)) == 4


def test_unimodular_rejects_bad_determinant():
    with pytest.raises(ValueError):
        UnimodularMatrix(1, 1, 1, 1)


def test_image_of_i_examples():
    assert UnimodularMatrix(1, 1, 0, 1).image_of_i() == (Fraction(1), Fraction(1))
    assert UnimodularMatrix(1, 0, 0, 1).image_of_i() == (Fraction(0), Fraction(1))


def test_coprime_pairs_small():
    cp = lattice.coprime_pairs(2)
    assert cp.count == 8
    assert set(cp) == {(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)}


def test_coprime_pairs_against_brute_force():
    X = 400
    brute = {(g, d) for g in range(-20, 21) for d in range(-20, 21)
             if 0 < g * g + d * d <= X and math.gcd(g, d) == 1}
    assert set(lattice.coprime_pairs(X)) == brute


def test_coprime_density_at_1e6():
    cp = lattice.coprime_pairs(1e6)
    assert abs(cp.count / (math.pi * 1e6) / (6 / math.pi ** 2) - 1) < 5e-3


def test_orbit_identity_and_half_height_points():
    orb = lattice.orbit_in_strip(0.05)
    pts = list(orb.points())
    assert all(p.check() for p in pts)
    assert all(p.matrix.alpha * p.matrix.delta - p.matrix.beta * p.matrix.gamma == 1 for p in pts)
    keys = {(p.re, p.im) for p in pts}
    assert (Fraction(0), Fraction(1)) in keys
    halves = [p for p in pts if p.im == Fraction(1, 2)]
    assert halves and all(abs(p.re) < 1 for p in halves)
    assert np.all(np.abs(orb.re) < 1) and np.all(orb.im >= 2 * 0.05)


def test_orbit_points_distinct():
    orb = lattice.orbit_in_strip(1e-3)
    key = set(zip(orb.num.tolist(), orb.den.tolist()))
    assert len(key) == len(orb)


def test_orbit_lambda_values_in_six_values_of_half():
    orb = lattice.orbit_in_strip(1e-3)
    rng = np.random.default_rng(7)
    idx = rng.choice(len(orb), 50, replace=False)
    vals = lattice.lambda_class_of_orbit(orb)[idx]
    allowed = np.array([0.5, 2.0, -1.0])
    assert np.all(np.min(np.abs(vals[:, None] - allowed[None, :]), axis=1) < 1e-8)


def test_lattice_sum_band_and_monotonicity():
    ys = [1e-2, 1e-3, 1e-4, 1e-5]
    sums = [lattice.lemmaC_lattice_sum(y) for y in ys]
    ratios = [r for _, r in sums]
    assert min(ratios) > 0 and max(ratios) / min(ratios) <= 2
    vals = [s for s, _ in sums]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert lattice.lemmaC_lattice_sum(0.1)[0] >= 1.0


def test_lemmaC_integral_positive_and_periodic():
    r = lattice.lemmaC_integral(1e-2)
    assert r.value > 0 and r.converged
    shifted = lattice.lemmaC_integral(1e-2, lo=-1.0)
    assert abs(shifted.value - r.value) < 1e-3


def test_lemmaC_tolerance_stability():
    a = lattice.lemmaC_integral(1e-3, atol=1e-4).value
    b = lattice.lemmaC_integral(1e-3, atol=2e-4).value
    assert abs(a - b) / a < 1e-2


def test_lemmaC_integral_range_guard():
    with pytest.raises(ValueError):
        lattice.lemmaC_integral(1e-6)


@pytest.mark.parametrize("y", [0.05, 0.02])
def test_jensen_consistency(y):
    chk = lattice.jensen_check(2.0, y)
    assert chk.rel_diff < 0.02
