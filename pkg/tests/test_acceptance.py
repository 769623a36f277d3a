"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np
import pytest

from oracles import brute_bracket, brute_truncated
from rmfchaos import dickman, experiments
from rmfchaos.chaos import (
    ChaosParams,
    Grid,
    density_factorization_check,
    g_values,
    interval_masses,
    m_density,
    nu_normalizer,
    second_moment_normalizer,
    two_point_quadrature,
)
from rmfchaos.multfunc import make_divisor_family, make_two_squares_indicator
from rmfchaos.steinhaus import SteinhausRealization, TiltedCircleLaw, girsanov_coupling, orthogonality_estimate, replicate_seeds
from rmfchaos.sums import StepWeight, TruncationScheme, bracket_T, plancherel_check, truncated_sum

DIV_HALF = make_divisor_family(math.sqrt(0.5))


def mse(v):
    v = np.asarray(v, dtype=float)
    return v.mean(), v.std(ddof=1) / math.sqrt(v.size)


def test_criterion_01_orthogonality(table, report):
    N = 100_000
    rng = np.random.default_rng(1)
    worst = 0.0
    pairs = 0
    while pairs < 20:
        n, m = (int(v) for v in rng.integers(1, 1001, 2))
        if n == m:
            continue
        worst = max(worst, abs(orthogonality_estimate(n, m, N, 1000 + pairs, table).mean))
        pairs += 1
    diag = all(orthogonality_estimate(n, n, N, 7, table).mean == 1.0 for n in (1, 6, 360, 997))
    ok = worst <= 4 / math.sqrt(N) and diag
    report(1, ok, f"max |mean| over 20 pairs = {worst:.5f} (bound {4 / math.sqrt(N):.5f}); diagonal exact = {diag}")
    assert ok


def test_criterion_02_second_moment(table, report):
    params = ChaosParams(50, math.e**10)
    exact = second_moment_normalizer(DIV_HALF, 50, params.sigma, table)
    seeds = replicate_seeds(2, 10_000)
    dens, _ = m_density(seeds, DIV_HALF, params, [0.0, 0.5, 3.0], table)
    parts, ok = [], True
    for j, s in enumerate((0.0, 0.5, 3.0)):
        m, se = mse(dens[:, j] * exact)
        ok &= abs(m - exact) <= 3 * se
        parts.append(f"s={s:g}: {m:.4f}+-{se:.4f}")
    report(2, ok, f"E|A|^2 vs exact {exact:.4f}; " + ", ".join(parts))
    assert ok


def test_criterion_03_nu_normalizer_and_factorization(table, report):
    params = ChaosParams(50, math.e**10)
    seeds = replicate_seeds(3, 10_000)
    eg = np.exp(g_values(seeds, DIV_HALF, params, [0.0], table)[:, 0])
    m, se = mse(eg)
    ref = nu_normalizer(DIV_HALF, params, table)
    s = np.random.default_rng(3).uniform(-50, 50, 100)
    res = density_factorization_check(SteinhausRealization(33), DIV_HALF, params, s, table).residual.max()
    ok = abs(m - ref) <= 3 * se and res <= 1e-8
    report(3, ok, f"E exp G(0) = {m:.4f}+-{se:.4f} vs Bessel product {ref:.4f}; factorization residual {res:.2e}")
    assert ok


def test_criterion_04_dickman(report):
    r2 = abs(float(dickman.rho_closed_form(1.0, 2.0)) - (1 - math.log(2)))
    lap = max(abs(l - r) for th in (0.3, 0.5, 1.0) for l, r in [dickman.dickman_laplace(th, rr) for rr in (0.0, 1.0, 2.0)])
    res = [dickman.dickman_rho(0.5, 6.0, h).delay_residual()[1].max() for h in (1e-3, 5e-4, 2.5e-4)]
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok = r2 <= 1e-6 and lap <= 1e-4 and all(3.0 <= q <= 5.0 for q in ratios)
    report(4, ok, f"|rho_1(2) - (1 - log 2)| = {r2:.1e}; max Laplace gap {lap:.1e}; residual ratios {ratios[0]:.3f}, {ratios[1]:.3f}")
    assert ok


def test_criterion_05_c_eps_limit(report):
    vals = {th: dickman.c_eps_limit(th, 0.02) for th in (0.3, 0.5, 0.7)}
    ok = all(0.995 <= v <= 1.005 for v in vals.values())
    report(5, ok, "C limit at eps=0.02: " + ", ".join(f"theta={k}: {v:.6f}" for k, v in vals.items()))
    assert ok


def test_criterion_06_plancherel(report):
    gaps = {}
    for lo in (0.0, 0.5):
        chk = plancherel_check(StepWeight.indicator(lo, 1.0))
        gaps[lo] = abs(chk.total - chk.norm2)
    ok = all(g <= 1e-3 for g in gaps.values())
    report(6, ok, "Plancherel gaps: " + ", ".join(f"1_[{k:g},1]: {v:.1e}" for k, v in gaps.items()))
    assert ok


def test_criterion_07_multifractal(table, report):
    params = ChaosParams(20)
    seeds = replicate_seeds(7, 4000)
    ok, parts = True, []
    for eps in (0.2, 0.05):
        grid = Grid.with_spacing(0.0, eps, eps / 16)
        masses = interval_masses(seeds, DIV_HALF, params, grid, table)
        m1, s1 = mse(masses)
        m2, s2 = mse(masses**2)
        ref = two_point_quadrature(DIV_HALF, params, grid, table)
        ok &= abs(m1 - eps) <= 3 * s1 and abs(m2 - ref) <= 3 * s2
        parts.append(f"eps={eps:g}: E nu = {m1:.4f}+-{s1:.4f}, E nu^2 = {m2:.5f}+-{s2:.5f} vs {ref:.5f}")
    report(7, ok, "; ".join(parts))
    assert ok


def test_criterion_08_coupling(report):
    ok, parts = True, []
    for i, a in enumerate((0.1, 0.5, 1.0)):
        u, ua = girsanov_coupling(a, np.random.default_rng([8, i]), 100_000)
        d = ua - u
        shift, se = mse(d.real)
        oracle = TiltedCircleLaw((a, 0.0)).mean.real
        e1 = np.abs(d).mean()
        e2 = (np.abs(d) ** 2).mean()
        ok &= abs(shift - oracle) <= 3 * se and e1 <= 2.5 * a and e2 <= 2 * e1
        parts.append(f"|a|={a:g}: shift {shift:.4f} vs {oracle:.4f}, E|d| {e1:.4f}")
    report(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_clt(report):
    cfg = experiments.base_config("clt")
    rec = experiments.run_clt(cfg)
    s = rec.summary
    ratios = {q: s["moment_ratios"][repr(q)] for q in (0.25, 0.5, 1.0)}
    ok_a = 0.9 <= s["mean_abs_S2"] <= 1.1
    ok_b = s["ks_re"] <= 0.06 and s["ks_im"] <= 0.06
    ok_c = all(0.85 <= r <= 1.15 for r in ratios.values())
    ok = ok_a and ok_b and ok_c
    report(
        9,
        ok,
        f"E|S|^2 = {s['mean_abs_S2']:.4f}; KS re/im = {s['ks_re']:.4f}/{s['ks_im']:.4f}; "
        + "ratios "
        + ", ".join(f"q={q:g}: {r:.3f}" for q, r in ratios.items()),
    )
    assert ok


def test_criterion_10_chaos_convergence(report):
    rec = experiments.run_chaos_convergence(experiments.base_config("chaos-convergence"))
    trend = [c for c in rec.checks if "non-increasing" in c.name]
    ok = len(trend) == 2 and all(c.passed for c in trend)
    report(10, ok, "; ".join(f"{c.name.split(' non')[0]}: first {c.reference:.4f} -> last {c.value:.4f} (slack {c.tolerance:.4f})" for c in trend))
    assert ok


def test_criterion_11_truncation_bookkeeping(small_table, report):
    F = make_two_squares_indicator()
    phi = StepWeight.indicator(0.0, 1.0)
    sc = TruncationScheme(0.2, 0.3)
    r = SteinhausRealization(11)
    alpha = lambda p: complex(r.alpha_p([p])[0])
    kept, _, _ = brute_truncated(200.0, 0.2, 0.3, phi.breakpoints, phi.values, F, alpha)
    T_ref = brute_bracket(200.0, 0.2, 0.3, phi.breakpoints, phi.values, F, alpha)
    got = truncated_sum(r, F, 200.0, phi, sc, small_table)
    T, _ = bracket_T(r, F, 200.0, phi, sc, small_table)
    e1 = abs(got.total - kept) / max(abs(kept), 1e-300)
    e2 = abs(T - T_ref) / T_ref
    ok = e1 <= 1e-12 and e2 <= 1e-12 and sc.K_limit == 2 and got.K == 2
    report(11, ok, f"truncated sum rel err {e1:.1e}; bracket rel err {e2:.1e}; K = {sc.K_limit}")
    assert ok
