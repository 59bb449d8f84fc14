import json
import math

import numpy as np
import pytest

from boundedtype import confmap as cm
from boundedtype.profiles import make_profile, tame_minorant


@pytest.fixture(scope="module")
def const_map():
    return cm.build_map(cm.GraphDomain(make_profile("0.5"), -1), N=256)


def test_constant_oracle_is_translation(const_map):
    z = cm.standard_probe_points(100)
    assert np.max(np.abs(const_map.forward(z) - (z - 0.5j))) < 1e-6
    assert np.max(np.abs(const_map.inverse(z - 0.5j) - z)) < 1e-6
    lo, hi = cm.deriv_bounds(const_map)
    assert lo == pytest.approx(1.0) and hi == pytest.approx(1.0)
    curve = cm.boundary_curve(const_map)
    assert np.allclose(curve.n, 0.5, rtol=1e-9)


def test_upper_sign_constant_oracle():
    cmap = cm.build_map(cm.GraphDomain(make_profile("0.25"), 1), N=256)
    z = cm.standard_probe_points(50)
    assert np.max(np.abs(cmap.forward(z) - (z + 0.25j))) < 1e-6


def test_round_trip_and_symmetry(minorant_map):
    z = cm.standard_probe_points(200)
    assert cm.round_trip_residual(minorant_map, z) < 1e-6
    w = minorant_map.forward(z)
    assert np.max(np.abs(minorant_map.forward(-z.conj()) + w.conj())) < 1e-8
    # w o W = id on the image side as well
    assert np.max(np.abs(minorant_map.forward(minorant_map.inverse(w)) - w)) < 1e-6


def test_forward_maps_into_domain(minorant_map, sqrt_minorant):
    z = cm.standard_probe_points(200)
    w = minorant_map.forward(z)
    assert np.all(w.imag > -sqrt_minorant(w.real))


def test_cauchy_riemann(minorant_map):
    z = cm.standard_probe_points(50, seed=3) + 0.5j
    h = 1e-5
    dx = (minorant_map.forward(z + h) - minorant_map.forward(z - h)) / (2 * h)
    dy = (minorant_map.forward(z + 1j * h) - minorant_map.forward(z - 1j * h)) / (2j * h)
    assert np.max(np.abs(dx - dy)) < 1e-6
    assert np.max(np.abs(dx - minorant_map.forward_deriv(z))) < 1e-6


def test_derivative_bounds_stable_under_doubling(sqrt_minorant, minorant_map):
    fine = cm.build_map(cm.GraphDomain(sqrt_minorant, -1), N=2048)
    a, b = cm.deriv_bounds(minorant_map)
    c, d = cm.deriv_bounds(fine)
    assert 0 < a <= b < math.inf
    assert abs(a - c) / c < 0.05 and abs(b - d) / d < 0.05
    z = cm.standard_probe_points(100)
    rel = np.abs(minorant_map.forward(z) - fine.forward(z)) / np.abs(fine.forward(z))
    assert np.max(rel) < 1e-4


def test_limit_at_infinity(minorant_map):
    assert abs(minorant_map.forward_deriv(np.array([1000j]))[0] - 1) < 1e-2


def test_kellogg_limits(sqrt_minorant):
    s = np.geomspace(1.0, 1e-4, 41)
    rep = cm.kellogg_H_check(sqrt_minorant, 2.0, s)
    last = rep["rows"][-1]
    assert abs(last.H1 - 1) < 1e-2
    assert abs(last.H2 + 4j) < 5e-2
    assert rep["ok"]


def test_kellogg_constant_closed_form():
    m = make_profile("0.5")
    rep = cm.kellogg_H_check(m, 2.0, np.array([1e-4]))
    # phi = 1 + i s (A - c) is linear, so H'' = -2i(A - c) / phi^3 exactly
    s, A, c = 1e-4, 2.0, 0.5
    phi = 1 + 1j * s * (A - c)
    assert rep["rows"][0].H2 == pytest.approx(-2j * (A - c) / phi ** 3, rel=1e-12)
    with pytest.raises(ValueError):
        cm.kellogg_H_check(m, 0.4, np.array([0.5]))


def test_cayley_chart_derivative(minorant_map):
    assert abs(cm.cayley_chart_derivative(minorant_map) - 0.5j) < 1e-3


def test_claims_two_and_three(minorant_map, majorant_map):
    for cmap in (minorant_map, majorant_map):
        c2 = cm.claim2_check(cmap)
        assert c2["ok"], c2
        curve = cm.boundary_curve(cmap)
        assert curve.symmetric and curve.monotone
        c3 = cm.claim3_check(cmap, curve)
        assert c3["ok"] and c3["points"] == 200


def test_boundary_curve_is_below_profile(minorant_map, sqrt_minorant):
    curve = cm.boundary_curve(minorant_map)
    pos = curve.x > 1
    # n(x) sits at the scale of m: within the claimed constant C
    ratio = curve.log_n[pos] - sqrt_minorant.log_eval(curve.x[pos])
    assert np.all(np.abs(ratio) < 2.0)


def test_json_round_trip(tmp_path, minorant_map):
    p = tmp_path / "map.json"
    minorant_map.to_json(p)
    back = cm.ConformalMapPair.from_json(p)
    z = cm.standard_probe_points(20)
    assert np.max(np.abs(back.forward(z) - minorant_map.forward(z))) < 1e-12
    assert json.loads(p.read_text())["sign"] == -1


def test_build_guards():
    with pytest.raises(ValueError):
        cm.build_map(cm.GraphDomain(make_profile("0.5"), -1), N=16)


def test_domain_membership(sqrt_minorant):
    dom = cm.GraphDomain(sqrt_minorant, -1)
    assert dom.contains(0.0 + 0j)
    assert not dom.contains(0.0 - 1j)


def test_inverse_near_numerical_boundary(majorant_map):
    rng = np.random.default_rng(0)
    U = rng.uniform(-200, 200, 500)
    z = majorant_map.forward(U + 0j) + 1j * 10.0 ** rng.uniform(-9, -3, 500)
    Z = majorant_map.inverse(z)
    assert np.all(Z.imag > 0)
    assert np.max(np.abs(majorant_map.forward(Z) - z)) < 1e-10
