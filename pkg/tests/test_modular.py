import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boundedtype import modular
from boundedtype.modular import DomainError

# 30-digit theta-series values (mpmath jtheta), frozen
THETA3_E_MINUS_PI = 1.0864348112133080
LAMBDA_ORACLE = [
    (0.3 + 1.2j, 0.23033038954636758 + 0.23682175433146684j, 0.84080439017690974),
    (-0.7 + 0.9j, -0.25046906586527119 - 1.2057480629747997j, 2.0439799414915558),
    (2j, 0.029437251522859414, 0.091027087773171793),
    (0.1 + 0.05j, 0.99994420407895006, 0.0070117178305900701),
]


def test_nome_values():
    q = math.exp(-math.pi)
    assert abs(modular.nome(1j) - q) < 1e-15
    assert abs(modular.nome(1 + 1j) + q) < 1e-15
    assert abs(modular.nome(0.5 + 2j) - 1j * math.exp(-2 * math.pi)) < 1e-16


def test_nome_rejects_lower_half_plane():
    with pytest.raises(DomainError):
        modular.nome(-1j)


def test_theta_at_zero_and_oracle():
    assert modular.theta3(0.0) == 1.0
    assert modular.theta2(0.0) == 0.0
    v = modular.theta3(math.exp(-math.pi))
    assert abs(v - THETA3_E_MINUS_PI) / THETA3_E_MINUS_PI < 1e-14


def test_lambda_at_i_is_fixed_point_of_one_minus():
    v = modular.lam(1j)
    assert abs(v - 0.5) < 1e-12
    assert abs((1 - v) - v) < 1e-12


@pytest.mark.parametrize("tau, value, rho", LAMBDA_ORACLE)
def test_lambda_against_series_oracle(tau, value, rho):
    assert abs(modular.lam(tau) - value) < 1e-12 * max(1, abs(value))
    assert abs(modular.spherical_derivative(tau) - rho) < 1e-10 * rho


def test_special_points():
    assert abs(modular.lam(1 + 1j) + 1) < 1e-12
    assert abs(modular.lam(0.5 + 0.5j) - 2) < 1e-11


def test_periodicity_example():
    t = 0.3 + 0.7j
    assert abs(modular.lam(t + 2) - modular.lam(t)) < 1e-12


def test_cusp_asymptotic():
    v = modular.lam(10j)
    lead = 16 * math.exp(-10 * math.pi)
    assert abs(v / lead - 1) < 1e-2


def test_reflection_symmetry_of_rho():
    t = 0.4 + 0.9j
    assert abs(modular.spherical_derivative(-t.conjugate()) - modular.spherical_derivative(t)) < 1e-10


def test_rho_times_height_bounded():
    x = np.linspace(-1, 1, 81)
    y = np.geomspace(1e-3, 1e2, 61)
    X, Y = np.meshgrid(x, y)
    tau = (X + 1j * Y).ravel()
    c = float(np.max(modular.spherical_derivative(tau) * tau.imag))
    assert np.isfinite(c) and 0 < c < 10


def test_composition_identity_with_finite_differences():
    # rho_{lambda o S}(i) = rho_lambda(S i) Im S(i) for S = (2z+1)/(z+1)
    S = lambda z: (2 * z + 1) / (z + 1)  # noqa: E731
    h = 1e-5
    z = 1j
    d = (modular.lam(S(z + h)) - modular.lam(S(z - h))) / (2 * h)
    lhs = abs(d) / (1 + abs(modular.lam(S(z))) ** 2)
    rhs = modular.spherical_derivative(S(z)) * S(z).imag
    assert abs(lhs - rhs) < 1e-8


def test_six_values_orbit_of_half():
    # anharmonic orbit: a, 1/a, 1-a, 1/(1-a), a/(a-1), (a-1)/a
    assert sorted(modular.six_values(0.5), key=lambda c: c.real) == \
        sorted([0.5, 2, 0.5, 2, -1, -1], key=float)
    assert sorted(modular.six_values(-1), key=lambda c: c.real) == \
        sorted([-1, -1, 2, 0.5, 0.5, 2], key=float)
    with pytest.raises(DomainError):
        modular.six_values(1)


def test_group_action_example():
    t = 0.2 + 0.8j
    Mt = modular.mobius(((1, 0), (2, 1)), t)
    v = modular.lam(Mt)
    assert min(abs(v - w) for w in modular.six_values(modular.lam(t))) < 1e-10


def test_domain_guard():
    with pytest.raises(DomainError):
        modular.lam(0.3 + 1e-8j)
    with pytest.raises(DomainError):
        modular.lam(0.3 - 1j)


def test_log_abs_matches_direct_and_survives_overflow():
    t = np.array([0.3 + 0.5j, -0.2 + 2j, 0.1 + 0.3j])
    assert np.allclose(modular.log_abs_lambda(t), np.log(np.abs(modular.lam(t))), atol=1e-12)
    # lambda(1 + i y) ~ -exp(pi/y)/16 near the cusp at 1
    la = modular.log_abs_lambda(1 + 1e-3j, min_im=None)
    assert np.isfinite(la) and abs(la - (math.pi / 1e-3 - math.log(16))) < 1e-6


taus = st.builds(complex, st.floats(-3, 3), st.floats(0.05, 10))


@settings(max_examples=100, deadline=None)
@given(taus)
def test_periodicity_property(t):
    assert abs(modular.lam(t + 2) - modular.lam(t)) < 1e-10 * max(1, abs(modular.lam(t)))


@settings(max_examples=60, deadline=None)
@given(taus)
def test_omitted_values(t):
    # 1 - lambda(t) = lambda(-1/t); in log space this never underflows
    la = modular.log_abs_lambda(t)
    la1 = modular.log_abs_lambda(-1 / t, min_im=None)
    assert np.isfinite(la) and np.isfinite(la1)
    d = abs(1 - modular.lam(t))
    if d > 1e-8:
        assert abs(math.log(d) - la1) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.builds(complex, st.floats(-1, 1), st.floats(0.2, 3)))
def test_derivative_against_central_difference(t):
    e = modular.lambda_eval(t)
    h = 1e-6 * t.imag
    fd = (modular.lam(t + h) - modular.lam(t - h)) / (2 * h)
    assert abs(fd - e.derivative) <= 1e-5 * abs(e.derivative) + 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5),
       st.builds(complex, st.floats(-1, 1), st.floats(0.5, 2)))
def test_group_action_property(a, b, c, t):
    # complete (a, c) to a unimodular matrix when possible
    if math.gcd(a, c) != 1:
        return
    # solve a d - b' c = 1
    for d in range(-20, 21):
        if c == 0 or (a * d - 1) % c == 0:
            bb = 0 if c == 0 else (a * d - 1) // c
            if a * d - bb * c == 1:
                break
    else:
        return
    M = ((a, bb), (c, d))
    Mt = modular.mobius(M, t)
    if Mt.imag < 1e-3:
        return
    v = modular.lam(Mt)
    assert min(abs(v - w) / max(1, abs(w)) for w in modular.six_values(modular.lam(t))) < 1e-8
