import math

import numpy as np
import pytest

from rmfchaos.chaos import (
    ChaosParams,
    Grid,
    cross_two_point,
    default_spacing,
    density_factorization_check,
    direct_euler_product,
    euler_product,
    find_y0,
    g_values,
    interval_masses,
    log_nu_normalizer,
    m_density,
    m_measure,
    modified_second_moment,
    multifractal_bound,
    nu_density,
    nu_measure,
    prime_power_cap,
    second_moment_normalizer,
    sigma_of,
    two_point_normalizer,
    two_point_quadrature,
)
from rmfchaos.multfunc import f_values, make_divisor_family, make_two_squares_indicator
from rmfchaos.primes import smooth_numbers
from rmfchaos.steinhaus import ConstantRealization, SteinhausRealization, angle_values, prime_angle_array, replicate_seeds
from scipy import special

DIV = make_divisor_family(math.sqrt(0.5))


def test_sigma_and_params():
    assert sigma_of(math.inf) == 0.5
    assert sigma_of(math.e**10) == pytest.approx(0.55)
    with pytest.raises(ValueError):
        sigma_of(2.0)
    with pytest.raises(ValueError):
        ChaosParams(1.5)
    with pytest.raises(ValueError):
        ChaosParams(10, factor_mode="bogus")


def test_grid_midpoints():
    g = Grid.with_spacing(0.0, 1.0, 0.3)
    assert g.n == 4
    np.testing.assert_allclose(g.nodes, [0.125, 0.375, 0.625, 0.875])
    assert default_spacing(math.e) == 0.25


def test_prime_power_cap_tail():
    p = np.array([2, 3, 101])
    k = prime_power_cap(p, 0.5)
    assert np.all(p ** (-k * 0.5) < 1e-14)
    assert np.all(p ** (-(k - 1) * 0.5) >= 1e-14)


def test_euler_product_matches_smooth_sum(table):
    # A_5(sigma + is) as a Dirichlet series over 5-smooth n
    r = SteinhausRealization(3)
    params = ChaosParams(5, 3.0)
    s = np.array([0.0, 0.7, -2.0])
    n = smooth_numbers(1e6, 5, table)
    fv = f_values(DIV, table, int(n[-1]))[n].real
    ang = angle_values(prime_angle_array(r, table, int(n[-1])), table, int(n[-1]))[n]
    direct = np.array([np.sum(np.exp(1j * ang) * fv * n ** (-(params.sigma + 1j * si))) for si in s])
    np.testing.assert_allclose(euler_product(r, DIV, params, s, table), direct, rtol=2e-3)


def test_log_and_direct_products_agree(small_table):
    params = ChaosParams(200, 1e4)
    s = np.linspace(-3, 3, 7)
    r = SteinhausRealization(11)
    np.testing.assert_allclose(euler_product(r, DIV, params, s, small_table), direct_euler_product(r, DIV, params, s, small_table), rtol=1e-10)


def test_exp_linear_mode(small_table):
    params = ChaosParams(50, math.inf, factor_mode="exp_linear")
    r = SteinhausRealization(5)
    s = np.array([0.0, 1.0])
    a = euler_product(r, DIV, params, s, small_table)
    g = g_values(r, DIV, ChaosParams(50), s, small_table)[0]
    np.testing.assert_allclose(2 * np.log(np.abs(a)), g, atol=1e-12)


def test_second_moment_normalizer_against_smooth_sum(small_table):
    F = make_two_squares_indicator()
    sigma = 1.0
    n = smooth_numbers(10_000, 5, small_table)
    fv = f_values(F, small_table, 10_000).real
    direct = math.fsum(fv[n] ** 2 * n ** (-2 * sigma))
    assert second_moment_normalizer(F, 5, sigma, small_table) == pytest.approx(direct, abs=1e-6)


def test_constant_realization_density(small_table):
    # alpha = 1: A_y(sigma) is the deterministic Euler product
    F = make_two_squares_indicator()
    params = ChaosParams(13, 100.0)
    sg = params.sigma
    prod = 1.0
    for p in small_table.primes_upto(13).tolist():
        if p == 2 or p % 4 == 1:
            prod *= 1 / (1 - p**-sg)
        else:
            prod *= 1 / (1 - p ** (-2 * sg))
    dens, flags = m_density(ConstantRealization(0.0), F, params, [0.0], small_table)
    assert not flags.any()
    assert dens[0, 0] == pytest.approx(prod**2 / second_moment_normalizer(F, 13, sg, small_table), rel=1e-12)


def test_nu_normalizer_bessel_product(small_table):
    params = ChaosParams(50, math.e**10)
    b = [abs(DIV.at(p, 1)) * p ** -params.sigma for p in small_table.primes_upto(50).tolist()]
    assert log_nu_normalizer(DIV, params, small_table) == pytest.approx(sum(math.log(special.i0(2 * x)) for x in b), rel=1e-13)


def test_measures_mass_and_integrate(small_table):
    g = Grid.with_spacing(0.0, 1.0, 0.01)
    r = SteinhausRealization(1)
    m = m_measure(r, DIV, ChaosParams(20), g, small_table)
    nu = nu_measure(r, DIV, ChaosParams(20), g, small_table)
    assert m.mass > 0 and nu.mass > 0
    assert m.integrate(lambda s: np.ones_like(s)) == pytest.approx(m.mass)


def test_density_factorization(table):
    params = ChaosParams(50, math.e**10)
    s = np.random.default_rng(0).uniform(-20, 20, 40)
    chk = density_factorization_check(SteinhausRealization(9), DIV, params, s, table)
    assert chk.residual.max() <= 1e-8
    assert np.ptp(chk.x0) <= 1e-10
    assert chk.y0 == find_y0(DIV, table)


def test_two_point_normalizer_against_circle_quadrature(small_table):
    params = ChaosParams(7, 50.0)
    s1, s2 = 0.3, 1.9
    u = np.exp(2j * np.pi * np.arange(512) / 512)
    val = 1.0
    for p in small_table.primes_upto(7).tolist():
        fp = float(DIV.at(p, 1))
        g1 = 2 * (fp * u * p ** -(params.sigma + 1j * s1)).real
        g2 = 2 * (fp * u * p ** -(params.sigma + 1j * s2)).real
        val *= np.mean(np.exp(g1 + g2)) / (np.mean(np.exp(g1)) * np.mean(np.exp(g2)))
    assert float(two_point_normalizer(DIV, params, s1, s2, small_table)) == pytest.approx(val, rel=1e-12)
    same = cross_two_point(DIV, params, params, [s1], [s2], small_table)[0]
    assert same == pytest.approx(val, rel=1e-12)


def test_nu_mean_is_lebesgue(small_table):
    g = Grid.with_spacing(0.0, 0.5, 0.02)
    masses = interval_masses(replicate_seeds(4, 4000), DIV, ChaosParams(20), g, small_table)
    se = masses.std(ddof=1) / math.sqrt(masses.size)
    assert abs(masses.mean() - 0.5) < 3 * se
    sq = masses**2
    ref = two_point_quadrature(DIV, ChaosParams(20), g, small_table)
    assert abs(sq.mean() - ref) < 3 * sq.std(ddof=1) / math.sqrt(sq.size)


def test_multifractal_bound_requires_q_prime():
    assert multifractal_bound(0.1, 1.0, 1.5, 0.5, 100, math.inf) == pytest.approx(0.1 * math.log(100) ** 0.25)
    with pytest.raises(ValueError):
        multifractal_bound(0.1, 2.0, 1.5, 0.5, 100, math.inf)


def test_modified_second_moment_small_case(small_table):
    # K huge: plain second moment, expanded with two-point normalizers
    y, ycap = 5, 25
    grid = Grid.with_spacing(0.0, 1.0, 0.05)
    h = 1.0 + 0.5 * np.cos(2 * np.pi * grid.nodes)
    est = modified_second_moment(DIV, y, ycap, h, 1e9, 4000, 77, small_table, grid=grid)
    p1, p2 = ChaosParams(y), ChaosParams(ycap, y)
    si, sj = np.meshgrid(grid.nodes, grid.nodes, indexing="ij")
    c11 = cross_two_point(DIV, p1, p1, si.ravel(), sj.ravel(), small_table)
    c22 = cross_two_point(DIV, p2, p2, si.ravel(), sj.ravel(), small_table)
    c12 = cross_two_point(DIV, p1, p2, si.ravel(), sj.ravel(), small_table)
    hh = np.outer(h, h).ravel()
    exact = grid.spacing**2 * math.fsum(hh * (c11 - 2 * c12 + c22))
    assert abs(est.mean - exact) < 3 * est.se


def test_zero_test_function_gives_zero(small_table):
    grid = Grid.with_spacing(0.0, 1.0, 0.05)
    est = modified_second_moment(DIV, 5, 25, np.zeros(grid.n), 1.0, 50, 1, small_table, grid=grid)
    assert est.mean == 0.0
