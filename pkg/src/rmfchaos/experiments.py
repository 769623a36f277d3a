"""Experiment drivers: replicate scheduling, summaries, checks and output files.

Every driver returns a :class:`ResultRecord`. Replicates are processed in
seed-ordered chunks, optionally on a process pool; chunk results are merged
in submission order so the record does not depend on completion order.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special, stats

from . import chaos, dickman, multfunc, sums
from .chaos import ChaosParams, Grid
from .config import ExperimentConfig
from .errors import RMFError
from .primes import PrimeTable, build_prime_table
from .steinhaus import TiltedCircleLaw, girsanov_coupling, replicate_seeds

# ---------------------------------------------------------------------------
# records


@dataclass
class Check:
    name: str
    value: float
    reference: float
    tolerance: float
    passed: bool
    note: str = ""

    def __post_init__(self):
        self.value = _clean(self.value)
        self.reference = _clean(self.reference)
        self.tolerance = _clean(self.tolerance)
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "reference": self.reference,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "note": self.note,
        }


@dataclass
class ResultRecord:
    """Rows, summary and checks of one experiment run with its configuration echo."""

    experiment: str
    config: dict
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def experiment_id(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode()
        return f"{self.experiment}-{hashlib.sha256(blob).hexdigest()[:12]}"

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def summary_json(self) -> str:
        doc = {
            "experiment_id": self.experiment_id,
            "experiment": self.experiment,
            "config": self.config,
            "summary": _clean(self.summary),
            "checks": [c.to_dict() for c in self.checks],
            "all_passed": self.all_passed,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = out / f"{self.experiment}_rows.csv"
        summ = out / f"{self.experiment}_summary.json"
        rows.write_text(self.rows_csv())
        summ.write_text(self.summary_json())
        return rows, summ


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def mean_se(values) -> tuple[float, float]:
    """Compensated mean and standard error."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    m = math.fsum(v) / n
    se = math.sqrt(math.fsum((v - m) ** 2) / (n - 1) / n) if n > 1 else math.nan
    return m, se


def _within(value, ref, se, k=3.0) -> bool:
    return abs(value - ref) <= k * se


# ---------------------------------------------------------------------------
# scheduling


@functools.lru_cache(maxsize=4)
def get_table(limit: int) -> PrimeTable:
    return build_prime_table(int(limit))


def family_of(cfg: ExperimentConfig) -> multfunc.MultiplicativeFunction:
    return multfunc.family_by_name(cfg.family, cfg.theta)


def phi_of(cfg: ExperimentConfig) -> sums.StepWeight:
    return sums.StepWeight(tuple(cfg.phi_breakpoints), tuple(cfg.phi_values))


def map_chunks(fn, cfg: ExperimentConfig, seeds: np.ndarray, *extra) -> list:
    """Apply ``fn(cfg, seed_chunk, *extra)`` to consecutive seed chunks, preserving order."""
    chunks = [seeds[a : a + cfg.batch] for a in range(0, seeds.size, cfg.batch)]
    if cfg.workers <= 1 or len(chunks) <= 1:
        return [fn(cfg, c, *extra) for c in chunks]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [pool.submit(fn, cfg, c, *extra) for c in chunks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# central limit theorem


def _clt_chunk(cfg: ExperimentConfig, seeds: np.ndarray):
    F, Phi = family_of(cfg), phi_of(cfg)
    table = get_table(cfg.table_limit)
    y = cfg.x**cfg.y_exponent
    grid = Grid.with_spacing(cfg.grid_lo, cfg.grid_hi, cfg.grid_spacing)
    S = sums.partial_sums(seeds, F, cfg.x, Phi, table)
    V = sums.v_hat(seeds, F, y, cfg.r, Phi, grid, table)
    T = sums.bracket_terms(seeds, F, cfg.x, Phi, sums.TruncationScheme(cfg.eps, cfg.delta), table).total
    return S, V, T


def ks_distance(sample) -> tuple[float, float]:
    """KS statistic against the standard normal and its exact p-value."""
    res = stats.kstest(np.asarray(sample), "norm", method="exact")
    return float(res.statistic), float(res.pvalue)


def run_clt(cfg: ExperimentConfig) -> ResultRecord:
    """Paired ``(S_x, V_hat)`` replicates and the CLT summaries."""
    F, Phi = family_of(cfg), phi_of(cfg)
    table = get_table(cfg.table_limit)
    seeds = replicate_seeds(cfg.seed, cfg.n_mc)
    parts = map_chunks(_clt_chunk, cfg, seeds)
    S = np.concatenate([p[0] for p in parts])
    V = np.concatenate([p[1] for p in parts])
    T = np.concatenate([p[2] for p in parts])
    y = cfg.x**cfg.y_exponent

    fv = multfunc.f_values(F, table, int(math.floor(Phi.support_end * cfg.x)))
    n = np.arange(fv.size)
    w = np.abs(fv * Phi.at_integers(n, cfg.x)) ** 2
    w[0] = 0.0
    exact = math.fsum(w) / math.fsum(np.abs(fv[1 : int(cfg.x) + 1]) ** 2)

    abs2 = np.abs(S) ** 2
    m2, se2 = mean_se(abs2)
    z = S / np.sqrt(V)
    ks_re, p_re = ks_distance(z.real * math.sqrt(2))
    ks_im, p_im = ks_distance(z.imag * math.sqrt(2))
    ratios = {}
    for q in cfg.q_list:
        num = math.fsum(abs2**q) / abs2.size
        den = special.gamma(1 + q) * math.fsum(V**q) / V.size
        ratios[repr(float(q))] = num / den
    mT, seT = mean_se(T)
    mV, seV = mean_se(V)

    checks = [
        Check("mean |S|^2 within 3 SE of exact value", m2, exact, 3 * se2, _within(m2, exact, se2)),
        Check("mean |S|^2 in [0.9, 1.1]", m2, 1.0, 0.1, abs(m2 - 1.0) <= 0.1),
        Check("KS distance Re(S/sqrt(V))", ks_re, 0.0, 0.06, ks_re <= 0.06),
        Check("KS distance Im(S/sqrt(V))", ks_im, 0.0, 0.06, ks_im <= 0.06),
    ]
    for q, r in ratios.items():
        checks.append(Check(f"moment ratio q={q}", r, 1.0, 0.15, abs(r - 1.0) <= 0.15))

    rows = [[int(s), cfg.x, y, cfg.r, S[i].real, S[i].imag, V[i], T[i]] for i, s in enumerate(seeds)]
    summary = {
        "mean_abs_S2": m2,
        "se_abs_S2": se2,
        "exact_abs_S2": exact,
        "mean_V_hat": mV,
        "se_V_hat": seV,
        "mean_T_bracket": mT,
        "se_T_bracket": seT,
        "ks_re": ks_re,
        "ks_re_pvalue": p_re,
        "ks_im": ks_im,
        "ks_im_pvalue": p_im,
        "moment_ratios": ratios,
    }
    cols = ["seed", "x", "y", "r", "S_re", "S_im", "V_hat", "T_bracket"]
    return ResultRecord("clt", cfg.to_dict(), cols, rows, summary, checks)


# ---------------------------------------------------------------------------
# chaos convergence


def test_function(cfg: ExperimentConfig):
    """Fixed continuous test function on the interval."""
    lo, hi = cfg.interval_lo, cfg.interval_hi
    return lambda s: 1.0 + 0.5 * np.cos(2 * np.pi * (np.asarray(s) - lo) / (hi - lo))


def _chaos_grid(cfg: ExperimentConfig, y: float) -> Grid:
    spacing = cfg.chaos_spacing or chaos.default_spacing(y)
    return Grid.with_spacing(cfg.interval_lo, cfg.interval_hi, spacing)


def _chaos_chunk(cfg: ExperimentConfig, seeds: np.ndarray, y: float):
    F = family_of(cfg)
    table = get_table(cfg.table_limit)
    grid = _chaos_grid(cfg, y)
    h = test_function(cfg)(grid.nodes)
    y_cap = min(y**cfg.ycap_exponent, table.limit)
    p_y = ChaosParams(y, math.inf)
    p_cap = ChaosParams(y_cap, y)
    m1 = chaos.m_density(seeds, F, p_y, grid.nodes, table)[0] @ h * grid.spacing
    m2 = chaos.m_density(seeds, F, p_cap, grid.nodes, table)[0] @ h * grid.spacing
    n1 = chaos.nu_density(seeds, F, p_y, grid.nodes, table)
    n2 = chaos.nu_density(seeds, F, p_cap, grid.nodes, table)
    nd = (n1 - n2) @ h * grid.spacing
    mass = n1.sum(axis=1) * grid.spacing
    damped = np.abs(nd) ** 2 * np.exp(-mass / cfg.K)
    return m1, m2, damped


def run_chaos_convergence(cfg: ExperimentConfig) -> ResultRecord:
    """Sweep ``y`` and compare ``m_{y,inf}(h)`` with ``m_{Ycap,y}(h)`` on shared realizations."""
    table = get_table(cfg.table_limit)
    hfun = test_function(cfg)
    seeds = replicate_seeds(cfg.seed, cfg.n_mc)
    rows, per_y = [], {}
    checks = []
    for y in cfg.y_list:
        grid = _chaos_grid(cfg, y)
        h_int = grid.spacing * math.fsum(hfun(grid.nodes))
        parts = map_chunks(_chaos_chunk, cfg, seeds, y)
        m1 = np.concatenate([p[0] for p in parts])
        m2 = np.concatenate([p[1] for p in parts])
        dm = np.concatenate([p[2] for p in parts])
        y_cap = min(y**cfg.ycap_exponent, table.limit)
        diff = np.abs(m1 - m2)
        l1, l1_se = mean_se(diff)
        e1, e1_se = mean_se(m1)
        e2, e2_se = mean_se(m2)
        ms, ms_se = mean_se(dm)
        per_y[repr(float(y))] = {
            "y_cap": y_cap,
            "l1_diff": l1,
            "l1_diff_se": l1_se,
            "mean_m_y_inf": e1,
            "mean_m_y_inf_se": e1_se,
            "mean_m_cap_y": e2,
            "mean_m_cap_y_se": e2_se,
            "integral_h": h_int,
            "modified_second_moment": ms,
            "modified_second_moment_se": ms_se,
        }
        checks.append(Check(f"E m_(y,inf)(h) = int h at y={y:g}", e1, h_int, 3 * e1_se, _within(e1, h_int, e1_se)))
        checks.append(Check(f"E m_(Ycap,y)(h) = int h at y={y:g}", e2, h_int, 3 * e2_se, _within(e2, h_int, e2_se)))
        for i, s in enumerate(seeds):
            rows.append([int(s), y, y_cap, m1[i], m2[i], diff[i], dm[i]])

    first, last = per_y[repr(float(cfg.y_list[0]))], per_y[repr(float(cfg.y_list[-1]))]
    for key, label in (("l1_diff", "L1 difference"), ("modified_second_moment", "modified second moment")):
        slack = 2 * math.hypot(first[key + "_se"], last[key + "_se"])
        checks.append(
            Check(
                f"{label} non-increasing first to last (2 SE)",
                last[key],
                first[key],
                slack,
                last[key] <= first[key] + slack,
            )
        )
    cols = ["seed", "y", "y_cap", "m_y_inf_h", "m_cap_y_h", "abs_diff", "damped_nu_diff_sq"]
    return ResultRecord("chaos-convergence", cfg.to_dict(), cols, rows, {"per_y": per_y}, checks)


# ---------------------------------------------------------------------------
# multifractal moments


def _mf_chunk(cfg: ExperimentConfig, seeds: np.ndarray, eps: float):
    F = family_of(cfg)
    table = get_table(cfg.table_limit)
    params = ChaosParams(cfg.y, cfg.t)
    return chaos.interval_masses(seeds, F, params, _mf_grid(cfg, eps), table)


def _mf_grid(cfg: ExperimentConfig, eps: float) -> Grid:
    spacing = cfg.chaos_spacing or chaos.default_spacing(cfg.y)
    return Grid.with_spacing(0.0, eps, min(spacing, eps / 8))


def run_multifractal(cfg: ExperimentConfig) -> ResultRecord:
    """Moments ``E nu([0, eps])^q`` over an ``eps`` sweep, with exact and bound references."""
    F = family_of(cfg)
    table = get_table(cfg.table_limit)
    params = ChaosParams(cfg.y, cfg.t)
    seeds = replicate_seeds(cfg.seed, cfg.n_mc)
    rows, est, checks = [], {}, []
    for eps in cfg.eps_list:
        masses = np.concatenate(map_chunks(_mf_chunk, cfg, seeds, eps))
        grid = _mf_grid(cfg, eps)
        rows.extend([int(s), eps, masses[i]] for i, s in enumerate(seeds))
        for q in cfg.q_list:
            m, se = mean_se(masses**q)
            entry = {"mean": m, "se": se}
            if 1.0 <= q < cfg.q_prime:
                entry["bound"] = chaos.multifractal_bound(eps, q, cfg.q_prime, F.theta, cfg.y, cfg.t)
            if q == 1.0:
                checks.append(Check(f"E nu([0,{eps:g}]) = eps", m, eps, 3 * se, _within(m, eps, se)))
            if q == 2.0:
                ref = chaos.two_point_quadrature(F, params, grid, table)
                entry["two_point_oracle"] = ref
                checks.append(Check(f"E nu([0,{eps:g}])^2 two-point oracle", m, ref, 3 * se, _within(m, ref, se)))
            est[f"eps={eps!r},q={float(q)!r}"] = entry
    slopes = {}
    for q in cfg.q_list:
        if not 1.0 < q < cfg.q_prime or len(cfg.eps_list) < 2:
            continue
        le = np.log(np.asarray(cfg.eps_list))
        lm = np.log([est[f"eps={e!r},q={float(q)!r}"]["mean"] for e in cfg.eps_list])
        slope = float(np.polyfit(le, lm, 1)[0])
        ref = q - F.theta * q * (cfg.q_prime - 1.0)
        slopes[repr(float(q))] = slope
        checks.append(Check(f"log-log slope q={q:g} >= q - theta q (q'-1) - 0.2", slope, ref, 0.2, slope >= ref - 0.2))
    summary = {"estimates": est, "slopes": slopes}
    return ResultRecord("multifractal", cfg.to_dict(), ["seed", "eps", "mass"], rows, summary, checks)


# ---------------------------------------------------------------------------
# coupling


def run_coupling(cfg: ExperimentConfig) -> ResultRecord:
    """Sweep ``|a|`` and report the coupling distance, mean shift and mismatch rate."""
    rows, checks = [], []
    pos = []
    for i, a in enumerate(cfg.a_list):
        rng = np.random.default_rng([cfg.seed, i])
        u, ua = girsanov_coupling(a, rng, cfg.n_samples)
        law = TiltedCircleLaw((float(a), 0.0))
        d = ua - u
        dist = np.abs(d)
        m1, s1 = mean_se(dist)
        m2, s2 = mean_se(dist**2)
        shift, shift_se = mean_se(d.real)
        oracle = law.mean.real
        neq, neq_se = mean_se((u != ua).astype(float))
        tv = law.tv_from_uniform()
        rows.append([float(a), m1, s1, m2, s2, shift, shift_se, oracle, neq, neq_se, tv])
        if a == 0:
            checks.append(Check("a=0 coupling is the identity", m1, 0.0, 0.0, m1 == 0.0))
            continue
        pos.append((abs(a), m1))
        checks.append(Check(f"mean shift at |a|={a:g}", shift, oracle, 3 * shift_se, _within(shift, oracle, shift_se)))
        checks.append(Check(f"E|U_a-U| <= 2.5|a| at |a|={a:g}", m1, 2.5 * abs(a), 0.0, m1 <= 2.5 * abs(a)))
        checks.append(Check(f"E|U_a-U|^2 <= 2E|U_a-U| at |a|={a:g}", m2, 2 * m1, 0.0, m2 <= 2 * m1))
        checks.append(Check(f"P(U != U_a) = TV at |a|={a:g}", neq, tv, 3 * neq_se, _within(neq, tv, max(neq_se, 1e-15))))
    summary = {}
    small = [(a, m) for a, m in pos if a <= 0.5]
    if len(small) >= 3:
        fit = stats.linregress([a for a, _ in small], [m for _, m in small])
        half = stats.t.ppf(0.975, len(small) - 2) * fit.stderr
        summary["slope"] = fit.slope
        summary["slope_ci95"] = [fit.slope - half, fit.slope + half]
        summary["intercept"] = fit.intercept
    cols = ["a", "mean_abs", "se_abs", "mean_sq", "se_sq", "shift", "shift_se", "shift_oracle", "p_neq", "p_neq_se", "tv"]
    return ResultRecord("coupling", cfg.to_dict(), cols, rows, summary, checks)


# ---------------------------------------------------------------------------
# deterministic analytics


def _guard(name, fn, checks):
    try:
        fn()
    except RMFError as exc:
        checks.append(Check(name, math.nan, math.nan, math.nan, False, note=f"{type(exc).__name__}: {exc}"))


def run_analytics(cfg: ExperimentConfig) -> ResultRecord:
    """Deterministic identities and asymptotic comparisons, one check each."""
    checks: list[Check] = []
    table = get_table(cfg.table_limit)
    F = family_of(cfg)

    def mertens():
        ys = [y for y in (1e2, 1e3, 1e4, 1e5, 1e6) if y <= table.limit]
        for s in (0.0, 0.5):
            diffs = [multfunc.mertens_sum(F, y, math.inf, 0.0, s, table) - multfunc.mertens_main_term(F.theta, y, math.inf, s) for y in ys]
            spread = max(diffs) - min(diffs)
            checks.append(Check(f"Mertens sum minus main term bounded (s={s:g})", max(map(abs, diffs)), 0.0, 1.0, max(map(abs, diffs)) <= 1.0, note=f"spread {spread:.3g}"))

    def wirsing():
        cg = multfunc.euler_constant_Cg(F, table.limit, table)
        r1 = multfunc.wirsing_sum(F, table.limit // 10, table, cg)[1]
        r2 = multfunc.wirsing_sum(F, table.limit, table, cg)[1]
        checks.append(Check("Wirsing ratio stable within 10%", r2, r1, 0.1 * abs(r1), abs(r2 - r1) <= 0.1 * abs(r1)))

    def laplace():
        rho2 = float(dickman.rho_closed_form(1.0, 2.0))
        checks.append(Check("rho_1(2) = 1 - log 2", rho2, 1 - math.log(2), 1e-6, abs(rho2 - 1 + math.log(2)) <= 1e-6))
        for th in (0.3, 0.5, 1.0):
            for r in (0.0, 1.0, 2.0):
                lhs, rhs = dickman.dickman_laplace(th, r)
                checks.append(Check(f"Dickman Laplace theta={th:g} r={r:g}", lhs, rhs, 1e-4, abs(lhs - rhs) <= 1e-4))

    def residual():
        res = [dickman.dickman_rho(0.5, 6.0, h).delay_residual()[1].max() for h in (1e-3, 5e-4, 2.5e-4)]
        ratios = [res[0] / res[1], res[1] / res[2]]
        ok = all(3.0 <= q <= 5.0 for q in ratios)
        checks.append(Check("delay residual ratio under h -> h/2", min(ratios), 4.0, 1.0, ok, note=f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}"))

    def c_limit():
        for th in (0.3, 0.5, 0.7):
            v = dickman.c_eps_limit(th, 0.02)
            checks.append(Check(f"C_eps limit theta={th:g} eps=0.02", v, 1.0, 1e-3, abs(v - 1.0) <= 1e-3))
        k = dickman.truncation_K(0.2, 0.3)
        checks.append(Check("K = floor((1-eps)/delta) at eps=0.2, delta=0.3", k, 2, 0, k == 2))

    def plancherel():
        for lo in (0.0, 0.5):
            pc = sums.plancherel_check(sums.StepWeight.indicator(lo, 1.0))
            checks.append(Check(f"Plancherel for 1_[{lo:g},1]", pc.total, pc.norm2, 1e-3, abs(pc.total - pc.norm2) <= 1e-3))

    for name, fn in (
        ("Mertens", mertens),
        ("Wirsing", wirsing),
        ("Dickman Laplace", laplace),
        ("Dickman residual", residual),
        ("C_eps limit", c_limit),
        ("Plancherel", plancherel),
    ):
        _guard(name, fn, checks)
    rows = [[c.name, c.value, c.reference, c.tolerance, int(c.passed)] for c in checks]
    return ResultRecord("analytics", cfg.to_dict(), ["check", "value", "reference", "tolerance", "pass"], rows, {}, checks)


def run_dickman_table(cfg: ExperimentConfig) -> ResultRecord:
    """Tabulate ``rho_theta`` on the grid ``t = h, 2h, ..., t_max``."""
    tab = dickman.dickman_rho(cfg.theta, cfg.t_max, cfg.h)
    rows = [[float(t), float(v)] for t, v in zip(tab.t[1:], tab.values[1:])]
    t, res = tab.delay_residual()
    summary = {"max_delay_residual": float(res.max()) if res.size else 0.0}
    return ResultRecord("dickman-table", cfg.to_dict(), ["t", "rho"], rows, summary, [])


RUNNERS = {
    "clt": run_clt,
    "chaos-convergence": run_chaos_convergence,
    "multifractal": run_multifractal,
    "coupling": run_coupling,
    "analytics": run_analytics,
    "dickman-table": run_dickman_table,
}

# per-kind defaults applied beneath any config file
KIND_DEFAULTS = {
    "clt": {},
    "chaos-convergence": {"family": "divisor", "theta": 0.5, "n_mc": 256, "batch": 32},
    "multifractal": {"family": "divisor", "theta": 0.5, "q_list": (1.0, 1.2, 2.0), "t": math.inf, "batch": 250},
    "coupling": {"a_list": (0.0, 0.05, 0.1, 0.2, 0.5, 1.0)},
    "analytics": {},
    "dickman-table": {},
}


def base_config(kind: str) -> ExperimentConfig:
    return ExperimentConfig(experiment=kind, **KIND_DEFAULTS[kind])


def run(cfg: ExperimentConfig) -> ResultRecord:
    return RUNNERS[cfg.experiment](cfg)
