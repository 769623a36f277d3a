import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from rmfchaos.dickman import (
    c_eps_delta,
    c_eps_limit,
    default_table,
    dickman_laplace,
    dickman_rho,
    integrate_rho,
    rho_closed_form,
    truncation_K,
)
from rmfchaos.errors import PrecisionError, RangeError

# classical Dickman function values
RHO1 = {2.0: 1 - math.log(2), 3.0: 0.0486083882911316, 4.0: 0.00491092564776083, 5.0: 0.000354724700456}


def test_rho1_closed_form_at_two():
    assert float(rho_closed_form(1.0, 2.0)) == pytest.approx(1 - math.log(2), abs=1e-12)
    np.testing.assert_allclose(rho_closed_form(1.0, [0.2, 1.0]), 1.0)


@pytest.mark.parametrize("t", [3.0, 4.0, 5.0])
def test_rho1_tabulated_values(t):
    tab = default_table(1.0)
    assert float(tab.rho(t)) == pytest.approx(RHO1[t], abs=1e-6)


def test_closed_form_initial_branch():
    th = 0.3
    t = np.array([0.1, 0.5, 1.0])
    np.testing.assert_allclose(rho_closed_form(th, t), t ** (th - 1) / special.gamma(th))
    with pytest.raises(RangeError):
        rho_closed_form(th, 2.5)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.3, 0.5, 0.8, 1.0]), st.floats(1.01, 2.0))
def test_closed_form_solves_delay_equation(theta, t):
    # t rho(t) = theta * int_{t-1}^{t} rho, by independent quadrature
    f = lambda v: float(rho_closed_form(theta, np.array(v)))
    lo = t - 1.0
    a, _ = integrate.quad(lambda v: v ** (theta - 1) / special.gamma(theta), lo, 1.0, epsabs=1e-12)
    b, _ = integrate.quad(f, 1.0, t, epsabs=1e-12)
    assert t * f(t) == pytest.approx(theta * (a + b), abs=1e-9)


def test_continuity_at_two():
    for th in (0.3, 0.5, 1.0):
        tab = dickman_rho(th, 3.0)
        left = float(rho_closed_form(th, 2.0))
        assert float(tab.rho(2.0 + tab.h)) == pytest.approx(left, abs=5e-3 * left + 1e-3)


def test_delay_residual_halves_quadratically():
    res = [dickman_rho(0.5, 6.0, h).delay_residual()[1].max() for h in (1e-3, 5e-4, 2.5e-4)]
    for a, b in zip(res, res[1:]):
        assert 3.0 < a / b < 5.0


def test_step_size_validation():
    with pytest.raises(ValueError):
        dickman_rho(0.5, 5.0, 2e-3)
    with pytest.raises(ValueError):
        dickman_rho(0.5, 5.0, 3e-4)
    with pytest.raises(ValueError):
        dickman_rho(1.5, 5.0)


@pytest.mark.parametrize("theta", [0.3, 0.5, 1.0])
@pytest.mark.parametrize("r", [0.0, 1.0, 2.0])
def test_laplace_identity(theta, r):
    lhs, rhs = dickman_laplace(theta, r)
    assert lhs == pytest.approx(rhs, abs=1e-4)


def test_total_mass_is_exp_gamma_theta():
    lhs, _ = dickman_laplace(1.0, 0.0)
    assert lhs == pytest.approx(math.exp(0.5772156649015329), abs=1e-6)


def test_integrate_rho_small_table_tail_error():
    tab = dickman_rho(0.5, 3.0)
    with pytest.raises(PrecisionError):
        integrate_rho(tab, lambda v: 1.0, 0.0, 10.0)


def test_integrate_rho_matches_cumulative():
    tab = default_table(0.5)
    # int_0^1 rho_theta = 1/Gamma(theta + 1)
    assert integrate_rho(tab, lambda v: 1.0, 0.0, 1.0) == pytest.approx(1 / special.gamma(1.5), rel=1e-10)


@pytest.mark.parametrize("theta", [0.3, 0.5, 0.7])
def test_c_eps_limit_near_one(theta):
    assert abs(c_eps_limit(theta, 0.02) - 1.0) <= 5e-3


def test_c_eps_delta_regression():
    # frozen at the tabulated default (h = 1e-3)
    assert c_eps_delta(0.5, 0.2, 0.3) == pytest.approx(0.8851, abs=1e-4)


def test_truncation_K():
    assert truncation_K(0.2, 0.3) == 2
    assert truncation_K(0.4, 0.3) == 2  # exact multiple guarded against round-off
    assert truncation_K(0.1, 0.5) == 1
