import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kaclab.kernels import (
    Deterministic,
    Discrete,
    InelasticKac,
    NoRootInRange,
    RateUndefined,
    Uniform,
    find_alpha,
    find_p0,
    find_p_bar,
    inelastic_kac_angle_map,
    parse_kernel,
    phi,
    rate_constant,
    s_derivative,
    s_function,
    spectral_profile,
    validate_h0,
)

R2 = 2**-0.5


def test_uniform_closed_form():
    for s in (0.5, 1, 2, 3, 5):
        assert abs(s_function(Uniform(), s) - (1 - s) / (1 + s)) <= 1e-12


def test_s_function_examples():
    assert s_function(Uniform(), 2) == pytest.approx(-1 / 3, abs=1e-15)
    for q in (0.3, 1, 4):
        assert s_function(Deterministic(1, 0), q) == 0
    assert abs(s_function(InelasticKac(1), 1)) < 1e-14


def test_zero_power_convention():
    # 0^0 = 0, so an atom at zero does not contribute at q = 0
    assert s_function(Deterministic(1, 0), 0) == 0
    assert s_function(Uniform(), 0) == 1


def test_phi_examples():
    assert phi(Uniform(), 2) == pytest.approx(-1 / 6, abs=1e-15)
    assert phi(Uniform(), 3) == pytest.approx(-1 / 6, abs=1e-15)
    assert phi(Uniform(), 1) == 0


def test_s_derivative_examples():
    assert s_derivative(Deterministic(R2, R2), 2) == pytest.approx(-math.log(2) / 2, rel=1e-12)
    assert s_derivative(Deterministic(1, 0), 3) == 0
    assert s_derivative(Uniform(), 2) == pytest.approx(-2 / 9, rel=1e-12)


@pytest.mark.parametrize(
    "kernel", [Uniform(), InelasticKac(0.5), Deterministic(0.6, 0.7), Discrete(((0.7, 0.7, 0.5), (0.5, 0.5, 0.5)))]
)
def test_s_derivative_matches_finite_difference(kernel):
    h = 1e-5
    for q in np.linspace(0.4, 5, 12):
        fd = (s_function(kernel, q + h) - s_function(kernel, q - h)) / (2 * h)
        assert s_derivative(kernel, q) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_find_alpha_examples():
    assert find_alpha(Uniform()) == pytest.approx(1, abs=1e-9)
    for d in (0.0, 0.5, 1, 3):
        assert find_alpha(InelasticKac(d)) == pytest.approx(2 / (d + 1), abs=1e-9)
    assert find_alpha(Deterministic(R2, R2)) == pytest.approx(2, abs=1e-9)
    assert find_alpha(Deterministic(0.4, 0.4)) == pytest.approx(math.log(2) / math.log(2.5), abs=1e-9)


def test_find_alpha_no_root():
    with pytest.raises(NoRootInRange):
        find_alpha(Deterministic(0.9, 0.9))  # S(2) = 0.62 > 0


def test_kac_closed_form_matches_quadrature():
    for d in (0.0, 1.0, 2.5):
        exact, quad = InelasticKac(d), inelastic_kac_angle_map(d)
        for q in (0.5, 1, 2, 3.7):
            assert abs(exact.power_moment(q) - quad.power_moment(q)) <= 1e-8
            assert abs(exact.mixed_moment(q, 1.3) - quad.mixed_moment(q, 1.3)) <= 1e-8


def test_p0_examples():
    assert find_p0(InelasticKac(1)) == pytest.approx(2.413, abs=0.002)
    assert find_p0(InelasticKac(0)) == pytest.approx(2 * find_p0(InelasticKac(1)), abs=0.004)


def test_p0_deterministic_half_matches_grid_scan():
    k = Deterministic(0.5, 0.5)
    grid = np.arange(1.0001, 12, 1e-4)
    vals = (2.0 ** (1 - grid) - 1) / grid
    assert find_p0(k) == pytest.approx(grid[np.argmin(vals)], abs=2e-4)


def test_p_bar():
    assert find_p_bar(Uniform()) == math.inf
    # phi < 0 for all q > alpha: L = R = 1/2 gives S(q) = 2^(1-q) - 1 < 0
    assert find_p_bar(Deterministic(0.5, 0.5)) == math.inf
    prof = spectral_profile(InelasticKac(1))
    assert prof.alpha == pytest.approx(1, abs=1e-9) and prof.p_bar == math.inf


def test_rate_examples():
    assert rate_constant(Uniform(), 2.5, "alpha_in_[1,2)").rate == pytest.approx(1 / 6, rel=1e-12)
    assert rate_constant(Uniform(), 4, "alpha_in_[1,2)").rate == pytest.approx(3 / 20, rel=1e-12)
    for regime in ("alpha_in_[1,2)", "wasserstein_low", "chi"):
        with pytest.raises(RateUndefined):
            rate_constant(Uniform(), 1.0, regime)
    assert rate_constant(Uniform(), 2, "wasserstein_low").rate == pytest.approx(1 / 6, rel=1e-12)


def test_rate_alpha_eq_2():
    k = Deterministic(R2, R2)
    r = rate_constant(k, 4, "alpha_eq_2")
    assert r.rate == pytest.approx(-max(phi(k, 4), phi(k, 3) / 12), rel=1e-12)
    assert r.rate == pytest.approx((1 - 2**-0.5) / 36, rel=1e-12)


def test_rate_monotonicity_on_dense_grid():
    k = Uniform()
    ref = phi(k, 2)
    for p in np.linspace(2.05, 8, 60):
        r = rate_constant(k, p, "alpha_in_[1,2)").rate
        ph = phi(k, p)
        # constant |phi(2)| where phi(p) <= phi(2), |phi(p)| where phi(p) > phi(2)
        expected = abs(ph) if ph > ref else abs(ref)
        assert r == pytest.approx(expected, rel=1e-12)


def test_equality_case_flags_log_correction():
    # phi(3) = phi(2) for the uniform kernel
    assert rate_constant(Uniform(), 3, "alpha_in_[1,2)").log_correction
    assert not rate_constant(Uniform(), 4, "alpha_in_[1,2)").log_correction


def test_validate_h0():
    rep = validate_h0(Uniform(), 2)
    assert rep.passed and rep.alpha == pytest.approx(1)
    bad = validate_h0(Deterministic(1, 0), 2)
    assert not bad.not_corner and not bad.passed
    k = validate_h0(Deterministic(0.4, 0.4), 1)
    assert k.passed and k.s_p == pytest.approx(-0.2)


def test_parse_roundtrip():
    for k in (Uniform(), InelasticKac(1.5), Deterministic(0.25, 0.5), Discrete(((0.5, 0.25, 0.75), (1.0, 0.0, 0.25)))):
        assert parse_kernel(k.to_spec()) == k
    with pytest.raises(ValueError):
        parse_kernel("nonsense")


kernels = st.sampled_from(
    [Uniform(), InelasticKac(0.3), InelasticKac(2.0), Deterministic(0.6, 0.7), Discrete(((0.9, 0.2, 0.5), (0.5, 0.5, 0.5)))]
)


@given(kernels, st.floats(0.1, 6), st.floats(0.1, 6), st.floats(0.05, 0.95))
def test_convexity(kernel, a, b, lam):
    q1, q3 = sorted((a, b))
    q2 = lam * q1 + (1 - lam) * q3
    interp = lam * s_function(kernel, q1) + (1 - lam) * s_function(kernel, q3)
    assert s_function(kernel, q2) <= interp + 1e-9


@given(kernels)
def test_root_consistency(kernel):
    assert abs(s_function(kernel, find_alpha(kernel))) <= 1e-9


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_deterministic_root(l, r):
    k = Deterministic(l, r)
    if s_function(k, 2) > 0 or s_function(k, 1e-6) < 0:
        return
    assert abs(s_function(k, find_alpha(k))) <= 1e-9
