"""Tests for generalized sines, distortion coefficients, and the defect bound."""

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from lorentz_synth.distortion import (
    InvalidInputError,
    KappaProfile,
    const_first_zero,
    const_sine,
    defect_bound,
    defect_constants,
    first_zero,
    generalized_sine,
    sigma_coeff,
    simpson_uniform,
    tau_coeff,
    ttilde_coeff,
)
from lorentz_synth.extreal import INF, is_inf

# values frozen from tests/oracles.py closed forms
SINH_ONE = 1.1752011936438014          # oracles.sine_closed(-1, 1)
TAU_HALF_UNIT = 0.5337354043260923     # sqrt(0.5 sin(0.5) / sin(1))
D_CONST_1_2_03 = 4.3838633618241225    # oracles.defect_constants_closed(1,2,2,0.3)[1]
OMEGA_1_2_03 = 443.6741142771788       # ... [2], = sin(0.3)^{-5}


def profile_const(kappa, length=2.0):
    return KappaProfile.constant(kappa, length)


# --- generalized sine --------------------------------------------------------

def test_flat_sine_is_identity():
    s = generalized_sine(profile_const(0.0, 1.0))
    assert abs(s(0.7) - 0.7) < 1e-12
    assert abs(s(0.0)) == 0.0


def test_unit_kappa_quarter_period():
    s = generalized_sine(profile_const(1.0))
    assert abs(s(math.pi / 2) - 1.0) < 1e-8


def test_sinh_value_frozen():
    s = generalized_sine(profile_const(-1.0))
    assert abs(s(1.0) - SINH_ONE) < 1e-8


@pytest.mark.parametrize("kappa", [-4.0, -1.0, 0.0, 1.0, 4.0])
def test_constant_kappa_matches_closed_form(kappa):
    L = 2.0
    s = generalized_sine(profile_const(kappa, L))
    hi = min(L, oracles.pi_closed(kappa) - 0.01)
    grid = np.linspace(0.0, hi, 1537)
    ref = np.array([oracles.sine_closed(kappa, x) for x in grid])
    assert np.max(np.abs(s(grid) - ref)) <= 1e-8


def test_derivative_samples_track_closed_form():
    s = generalized_sine(profile_const(4.0, 1.5))
    # u' = cos(2 theta) for kappa = 4
    assert np.max(np.abs(s.derivative_values - np.cos(2.0 * s.thetas))) < 1e-9


def test_first_zero_examples():
    assert abs(first_zero(profile_const(4.0)) - math.pi / 2) <= 1e-8
    assert is_inf(first_zero(profile_const(0.0)))
    assert is_inf(first_zero(profile_const(-2.5)))
    assert abs(first_zero(profile_const(1.0, 10.0)) - math.pi) <= 1e-8


def test_first_zero_variable_profile_against_adaptive_solver():
    prof = KappaProfile.from_samples([[0.0, 4.0], [1.0, 1.0], [3.0, 2.0]])
    want = oracles.first_zero_ode(prof, 3.0)
    assert abs(first_zero(prof) - want) < 1e-9


def test_invalid_profiles_rejected():
    with pytest.raises(InvalidInputError):
        KappaProfile(1.0, np.array([0.0, 0.5, 1.0]), np.array([1.0, math.nan, 1.0]))
    with pytest.raises(InvalidInputError):
        KappaProfile(1.0, np.array([0.0, 0.7, 0.5, 1.0]), np.ones(4))
    with pytest.raises(InvalidInputError):
        KappaProfile(-1.0, np.array([0.0, 1.0]), np.ones(2))
    with pytest.raises(InvalidInputError):
        KappaProfile(1.0, np.array([0.1, 1.0]), np.ones(2))


def test_profile_json_roundtrip():
    prof = KappaProfile.from_samples([[0.0, -1.0], [0.4, 2.0], [2.0, 0.5]])
    again = KappaProfile.from_json(prof.to_json())
    assert again == prof
    assert again(1.3) == prof(1.3)


# --- sigma / tau -------------------------------------------------------------

def test_sigma_flat_and_degenerate():
    assert sigma_coeff(profile_const(0.0, 6.0), 0.3, 5.0) == pytest.approx(0.3, abs=1e-10)
    assert sigma_coeff(profile_const(-3.0), 0.6, 0.0) == 0.6
    assert is_inf(sigma_coeff(profile_const(1.0, 4.0), 0.5, math.pi))
    assert is_inf(sigma_coeff(profile_const(1.0, 4.0), 0.5, 3.5))


@given(kappa=st.floats(-4.0, 4.0), t=st.floats(0.0, 1.0), frac=st.floats(0.05, 0.9))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_sigma_constant_matches_closed_form(kappa, t, frac):
    L = 2.0
    theta = frac * min(L, oracles.pi_closed(kappa))
    got = sigma_coeff(profile_const(kappa, L), t, theta)
    want = oracles.sigma_closed(kappa, t, theta)
    assert got == pytest.approx(want, abs=1e-8, rel=1e-8)


def test_tau_examples_frozen():
    assert tau_coeff(profile_const(0.0, 3.0), 3.0, 0.4, 2.0) == pytest.approx(0.4, abs=1e-10)
    assert tau_coeff(profile_const(2.0), 2.5, 1.0, 0.9) == pytest.approx(1.0, abs=1e-10)
    got = tau_coeff(profile_const(1.0), 2.0, 0.5, 1.0)
    assert got == pytest.approx(TAU_HALF_UNIT, abs=1e-6)


def test_tau_zero_time_convention():
    # 0 * inf = 0: at t = 0 the coefficient vanishes even past the first zero
    assert tau_coeff(profile_const(9.0, 4.0), 2.0, 0.0, 2.0) == 0.0
    assert is_inf(tau_coeff(profile_const(9.0, 4.0), 2.0, 0.5, 2.0))


affine_profiles = st.tuples(st.floats(-4.0, 4.0), st.floats(-4.0, 4.0),
                            st.floats(1.0, 2.5))


@given(base=affine_profiles, drop=st.tuples(st.floats(0.0, 3.0), st.floats(0.0, 3.0)),
       n_param=st.sampled_from([2.0, 3.0, 4.5]), t=st.floats(0.0, 1.0),
       frac=st.floats(0.05, 0.95))
@settings(max_examples=80, deadline=None, derandomize=True)
def test_monotone_in_kappa_and_tau_dominates(base, drop, n_param, t, frac):
    a, b, L = base
    hi = KappaProfile.from_samples([[0.0, a], [L, b]])
    lo = KappaProfile.from_samples([[0.0, a - drop[0]], [L, b - drop[1]]])
    theta = frac * L
    s_hi = sigma_coeff(hi.scaled(1.0 / n_param), t, theta)
    s_lo = sigma_coeff(lo.scaled(1.0 / n_param), t, theta)
    if not is_inf(s_hi):
        assert s_lo <= s_hi + 1e-10
    t_hi = tau_coeff(hi, n_param, t, theta)
    t_lo = tau_coeff(lo, n_param, t, theta)
    if not is_inf(t_hi):
        assert t_lo <= t_hi + 1e-10
    # tau_{k,N} >= sigma_{k/N} wherever both are defined
    if not is_inf(t_hi):
        assert t_hi >= s_hi - 1e-10


@given(base=affine_profiles, frac=st.floats(0.1, 0.8))
@settings(max_examples=40, deadline=None, derandomize=True)
def test_interpolated_sigma_satisfies_ode(base, frac):
    """sigma^{(t)}(theta) as a function of t solves v'' + kappa(t theta) theta^2 v = 0;
    checked by central second differences. Affine coefficients keep the fourth
    derivative bounded, so the stencil error stays well under tolerance."""
    a, b, L = base
    prof = KappaProfile.from_samples([[0.0, a], [L, b]])
    sine = generalized_sine(prof)
    theta = frac * min(L, 0.85 * sine.first_zero)
    assume(theta > 0.05)
    delta = 1.0 / 4096.0
    ts = np.arange(0.0, 1.0 + delta / 2, delta)
    v = sine(ts * theta) / sine(theta)
    resid = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / delta ** 2 \
        + prof(ts[1:-1] * theta) * theta ** 2 * v[1:-1]
    assert np.max(np.abs(resid)) <= 1e-5


def test_sigma_input_validation():
    with pytest.raises(InvalidInputError):
        sigma_coeff(profile_const(1.0), -0.1, 0.5)
    with pytest.raises(InvalidInputError):
        sigma_coeff(profile_const(1.0), 0.5, 2.5)
    with pytest.raises(InvalidInputError):
        tau_coeff(profile_const(1.0), 1.0, 0.5, 0.5)


# --- defect constants and bound ----------------------------------------------

def test_defect_constants_frozen():
    c = defect_constants(0.0, 2.0, 2.0, 0.5)
    assert c.c_np == pytest.approx(4.5, abs=1e-12)
    assert c.lam == 1.0 and c.omega == c.c_np and c.d_const == 1.0
    cneg = defect_constants(-1.0, 3.0, 2.5, 1.0)
    assert cneg.lam == 1.0 and cneg.omega == cneg.c_np

    cpos = defect_constants(1.0, 2.0, 2.0, 0.3)
    assert cpos.d_const == pytest.approx(D_CONST_1_2_03, rel=1e-9)
    assert cpos.omega == pytest.approx(OMEGA_1_2_03, rel=1e-9)
    assert cpos.lam == cpos.d_const
    assert cpos.omega >= cpos.c_np


def test_defect_constants_validation():
    with pytest.raises(InvalidInputError):
        defect_constants(1.0, 2.0, 2.0, 2.0)      # eta past half conjugate radius
    with pytest.raises(InvalidInputError):
        defect_constants(1.0, 1.5, 2.0, 0.1)      # N < 2
    with pytest.raises(InvalidInputError):
        defect_constants(1.0, 3.0, 1.2, 0.1)      # p <= N/2


def test_defect_bound_zero_when_no_undershoot():
    prof = profile_const(1.0)
    assert defect_bound(1.0, 2.0, 2.0, 0.3, prof, 0.5, 1.0) == 0.0
    tk = tau_coeff(profile_const(1.0, 2.0), 2.0, 0.5, 1.0)
    assert abs(tk - tau_coeff(prof, 2.0, 0.5, 1.0)) < 1e-12


def test_defect_bound_dominates_fixed_instance():
    K, N, p, eta, t, theta = 1.0, 2.0, 2.0, 0.3, 0.5, 1.0
    prof = profile_const(K - 0.5, 2.0)
    bound = defect_bound(K, N, p, eta, prof, t, theta)
    actual = tau_coeff(profile_const(K, 2.0), N, t, theta) - tau_coeff(prof, N, t, theta)
    assert bound >= actual
    assert bound >= 0.0
    # library Simpson agrees with the adaptive-quadrature reference route
    ref = oracles.defect_rhs_quad(K, N, p, eta, lambda x: K - 0.5, t, theta)
    assert bound == pytest.approx(ref, rel=1e-8)


@given(base=st.tuples(st.floats(-1.5, 0.5), st.floats(-1.5, 0.5)),
       t=st.floats(0.05, 0.95), frac=st.floats(0.1, 0.9),
       n_param=st.sampled_from([2.0, 3.0]), p=st.floats(2.0, 3.0))
@settings(max_examples=60, deadline=None, derandomize=True)
def test_defect_bound_dominates_random(base, t, frac, n_param, p):
    K, eta = 1.0, 0.3
    L = 2.0
    prof = KappaProfile.from_samples([[0.0, K + base[0]], [L, K + base[1]]])
    theta_max = min(L, const_first_zero(K / (n_param - 1.0)) - eta)
    theta = frac * theta_max
    assume(theta > 1e-3)
    bound = defect_bound(K, n_param, p, eta, prof, t, theta)
    tK = tau_coeff(KappaProfile.constant(K, L), n_param, t, theta)
    tk = tau_coeff(prof, n_param, t, theta)
    if is_inf(tk):
        return
    assert tK - tk <= bound + 1e-8


def test_defect_bound_range_validation():
    prof = profile_const(0.5)
    with pytest.raises(InvalidInputError):
        defect_bound(1.0, 2.0, 2.0, 0.3, prof, 0.0, 1.0)
    with pytest.raises(InvalidInputError):
        defect_bound(1.0, 2.0, 2.0, 0.3, prof, 0.5, math.pi - 0.3)
    with pytest.raises(InvalidInputError):
        defect_bound(1.0, 2.0, 2.0, 0.3, prof, 0.5, 0.0)


def test_simpson_matches_polynomial():
    xs = np.linspace(0.0, 2.0, 513)
    assert simpson_uniform(xs ** 3, 0.0, 2.0) == pytest.approx(4.0, abs=1e-12)
    with pytest.raises(InvalidInputError):
        simpson_uniform(np.ones(4), 0.0, 1.0)


# --- model coefficient for the wave-operator comparison ----------------------

def test_ttilde_values():
    assert ttilde_coeff(0.0, 2.0, 0.7) == 1.0
    assert ttilde_coeff(1.0, 2.0, 0.0) == 1.0
    got = ttilde_coeff(1.0, 2.0, 1.0)
    assert got == pytest.approx(0.5 + 0.5 / math.tan(1.0), rel=1e-12)
    goth = ttilde_coeff(-1.0, 2.0, 1.0)
    assert goth == pytest.approx(0.5 + 0.5 / math.tanh(1.0), rel=1e-12)
    # continuity at theta -> 0
    assert ttilde_coeff(1.0, 3.0, 1e-6) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(InvalidInputError):
        ttilde_coeff(1.0, 2.0, math.pi + 0.1)
