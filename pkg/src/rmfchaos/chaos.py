"""Random Euler products and the two chaos-measure approximations on grids.

For a realization ``alpha`` and a multiplicative ``f`` the local Euler factor
at ``p`` is ``L_p(z) = sum_k alpha(p)^k f(p^k) p^(-k z)``. The measure
``m_{y,t}`` has density ``|prod_{p<=y} L_p(sigma_t + is)|^2`` divided by its
expectation, and ``nu_{y,t}`` has density ``exp(G_{y,t}(s))`` divided by its
expectation, with ``G_{y,t}(s) = sum_{p<=y} 2 Re f(p) alpha(p) p^(-sigma_t - is)``.

Most functions take a ``source`` that is either a single realization or a
1-d array of replicate seeds; batched results have shape
``(replicates, nodes)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ModelError
from .multfunc import MultiplicativeFunction, _local_factor_sum, prime_values
from .primes import PrimeTable
from .steinhaus import (
    ConstantRealization,
    MCEstimate,
    SteinhausRealization,
    bessel_i0_series,
    hash_angles,
    replicate_seeds,
)

log = logging.getLogger(__name__)

LOCAL_TAIL_TOL = 1e-14
SINGULAR_TOL = 1e-8
_CHUNK_ELEMS = 2**21


def sigma_of(t: float) -> float:
    """``sigma_t = (1 + 1/log t)/2``; ``sigma_inf = 1/2``."""
    if math.isinf(t):
        return 0.5
    if t < 3:
        raise ValueError(f"t must be >= 3 or inf, got {t}")
    return 0.5 * (1.0 + 1.0 / math.log(t))


@dataclass(frozen=True)
class ChaosParams:
    """Prime cutoff ``y``, abscissa parameter ``t`` (may be ``inf``) and local-factor mode.

    ``factor_mode`` is ``"full"`` for the complete local Euler factor or
    ``"exp_linear"`` for ``exp(alpha(p) f(p) p^(-z))``. ``prime_power_cap``
    of ``None`` chooses the cap per prime from :data:`LOCAL_TAIL_TOL`.
    """

    y: float
    t: float = math.inf
    factor_mode: str = "full"
    prime_power_cap: int | None = None

    def __post_init__(self):
        if self.y < 2:
            raise ValueError(f"y must be >= 2, got {self.y}")
        sigma_of(self.t)
        if self.factor_mode not in ("full", "exp_linear"):
            raise ValueError(f"unknown factor_mode {self.factor_mode!r}")

    @property
    def sigma(self) -> float:
        return sigma_of(self.t)


def prime_power_cap(p, sigma: float, bound: float = 1.0, tol: float = LOCAL_TAIL_TOL) -> np.ndarray:
    """Smallest ``k`` with ``bound * p^(-k sigma) < tol``."""
    p = np.asarray(p, dtype=np.float64)
    k = np.floor(math.log(max(bound, 1e-300) / tol) / (sigma * np.log(p))) + 1
    return np.maximum(k, 1).astype(np.int64)


@dataclass(frozen=True)
class Grid:
    """Midpoint grid of ``n`` cells on ``[lo, hi]``."""

    lo: float
    hi: float
    n: int

    @classmethod
    def with_spacing(cls, lo: float, hi: float, spacing: float) -> "Grid":
        if hi <= lo or spacing <= 0:
            raise ValueError("need lo < hi and spacing > 0")
        return cls(lo, hi, max(1, int(math.ceil((hi - lo) / spacing - 1e-9))))

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.spacing


def default_spacing(y: float) -> float:
    return 1.0 / (4.0 * math.log(y))


@dataclass(frozen=True)
class GridMeasure:
    """Measure ``density(s) ds`` sampled at midpoint nodes."""

    interval: tuple[float, float]
    spacing: float
    nodes: np.ndarray
    density: np.ndarray
    flags: np.ndarray | None = field(default=None, compare=False)

    @property
    def mass(self) -> float:
        return self.spacing * math.fsum(self.density)

    def integrate(self, h) -> float:
        hv = h(self.nodes) if callable(h) else np.asarray(h)
        return self.spacing * math.fsum(hv * self.density)


@dataclass(frozen=True)
class FieldSlice:
    nodes: np.ndarray
    values: np.ndarray


def _prime_angles(source, primes: np.ndarray) -> np.ndarray:
    if isinstance(source, (SteinhausRealization, ConstantRealization)):
        return source.angles(primes)[None, :]
    return hash_angles(np.asarray(source, dtype=np.uint64), primes)


def _prime_data(F: MultiplicativeFunction, params: ChaosParams, table: PrimeTable):
    primes = table.primes_upto(params.y)
    fp = prime_values(F, primes).astype(np.complex128)
    logp = np.log(primes.astype(np.float64))
    return primes, fp, logp


def _chunks(count: int, per: int):
    per = max(1, per)
    for a in range(0, count, per):
        yield a, min(count, a + per)


def log_euler_product(source, F: MultiplicativeFunction, params: ChaosParams, s, table: PrimeTable):
    """``sum_p Log L_p(sigma_t + is)`` and a flag for near-zero local factors.

    The product is accumulated as a sum of principal logarithms; since only
    ``exp`` of the sum is used, the branch of the sum is immaterial.
    Returns ``(logA, flags)`` with shape ``(replicates, len(s))``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    primes, fp, logp = _prime_data(F, params, table)
    ang = _prime_angles(source, primes)
    R, S = ang.shape[0], s.size
    sigma = params.sigma
    logA = np.zeros((R, S), dtype=np.complex128)
    flags = np.zeros((R, S), dtype=bool)
    if primes.size == 0:
        return logA, flags
    if params.prime_power_cap is not None:
        caps = np.full(primes.size, int(params.prime_power_cap))
    else:
        caps = prime_power_cap(primes, sigma, F.power_bound)
    phase_s = np.exp(-1j * np.outer(logp, s))  # (P, S)
    scale = np.exp(-sigma * logp)
    # caps are non-increasing in p, so equal caps form contiguous runs
    bounds = np.flatnonzero(np.diff(caps)) + 1
    starts = np.concatenate([[0], bounds])
    ends = np.concatenate([bounds, [primes.size]])
    for g0, g1 in zip(starts, ends):
        cap = int(caps[g0])
        for a, b in _chunks(g1 - g0, _CHUNK_ELEMS // (R * S * max(1, cap // 4))):
            sl = slice(g0 + a, g0 + b)
            w = (np.exp(1j * ang[:, sl]) * scale[sl])[:, :, None] * phase_s[None, sl, :]
            if params.factor_mode == "exp_linear":
                logA += np.sum(fp[sl][None, :, None] * w, axis=1)
                continue
            k = np.arange(1, cap + 1)
            coeff = F.at(primes[sl][:, None], k[None, :]).astype(np.complex128)  # (Pc, cap)
            L = np.broadcast_to(coeff[:, cap - 1][None, :, None], w.shape).copy()
            for j in range(cap - 2, -1, -1):
                L *= w
                L += coeff[:, j][None, :, None]
            L *= w
            L += 1.0
            small = np.abs(L) < SINGULAR_TOL
            if small.any():
                flags |= small.any(axis=1)
                log.warning("local Euler factor within %g of zero at %d nodes", SINGULAR_TOL, int(small.sum()))
            with np.errstate(divide="ignore"):
                logA += np.sum(np.log(L), axis=1)
    return logA, flags


def direct_euler_product(realization, F: MultiplicativeFunction, params: ChaosParams, s, table: PrimeTable) -> np.ndarray:
    """``A_y(sigma_t + is)`` as a plain product of truncated local series."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    primes, fp, logp = _prime_data(F, params, table)
    alpha = np.exp(1j * _prime_angles(realization, primes)[0])
    out = np.ones(s.size, dtype=np.complex128)
    caps = prime_power_cap(primes, params.sigma, F.power_bound)
    for i, p in enumerate(primes):
        z = alpha[i] * np.exp(-(params.sigma + 1j * s) * logp[i])
        if params.factor_mode == "exp_linear":
            out *= np.exp(fp[i] * z)
            continue
        k = np.arange(1, int(caps[i]) + 1)
        coeff = F.at(np.full(k.size, p), k)
        out *= 1.0 + np.sum(coeff[None, :] * z[:, None] ** k[None, :], axis=1)
    return out


def euler_product(realization, F: MultiplicativeFunction, params: ChaosParams, grid, table: PrimeTable) -> np.ndarray:
    """``A_y(sigma_t + is)`` at each node, evaluated in log space."""
    s = grid.nodes if isinstance(grid, Grid) else np.asarray(grid, dtype=np.float64)
    logA, flags = log_euler_product(realization, F, params, s, table)
    out = np.exp(logA[0])
    if flags[0].any():
        idx = np.flatnonzero(flags[0])
        out[idx] = direct_euler_product(realization, F, params, s[idx], table)
    return out


def second_moment_normalizer(F: MultiplicativeFunction, y: float, sigma: float, table: PrimeTable) -> float:
    """``E|A_y(sigma + is)|^2 = sum_{P(n)<=y} |f(n)|^2 n^(-2 sigma)``.

    Evaluated as the Euler product of the local series
    ``sum_k |f(p^k)|^2 p^(-2k sigma)``, each summed until its terms fall
    below 1e-17.
    """
    primes = table.primes_upto(y)
    return math.exp(math.fsum(math.log(_local_factor_sum(F, int(p), float(p) ** (-2.0 * sigma))) for p in primes))


def log_second_moment(F: MultiplicativeFunction, params: ChaosParams, table: PrimeTable) -> float:
    """``log E|A_y|^2`` for either factor mode."""
    if params.factor_mode == "exp_linear":
        return log_nu_normalizer(F, params, table)
    return math.log(second_moment_normalizer(F, params.y, params.sigma, table))


def m_density(source, F: MultiplicativeFunction, params: ChaosParams, s, table: PrimeTable):
    """``|A_y|^2 / E|A_y|^2`` at nodes ``s``; returns ``(density, flags)``."""
    logA, flags = log_euler_product(source, F, params, s, table)
    dens = np.exp(2.0 * logA.real - log_second_moment(F, params, table))
    if flags.any():
        for r, j in zip(*np.nonzero(flags)):
            if isinstance(source, (SteinhausRealization, ConstantRealization)):
                real = source
            else:
                real = SteinhausRealization(int(np.asarray(source, dtype=np.uint64)[r]))
            a = direct_euler_product(real, F, params, np.atleast_1d(s)[j], table)[0]
            dens[r, j] = abs(a) ** 2 / math.exp(log_second_moment(F, params, table))
    return dens, flags


def m_measure(realization, F: MultiplicativeFunction, params: ChaosParams, grid: Grid, table: PrimeTable) -> GridMeasure:
    dens, flags = m_density(realization, F, params, grid.nodes, table)
    return GridMeasure((grid.lo, grid.hi), grid.spacing, grid.nodes, dens[0], flags[0])


def log_nu_normalizer(F: MultiplicativeFunction, params: ChaosParams, table: PrimeTable) -> float:
    """``log prod_{p<=y} I0(2 |f(p)| p^(-sigma_t))``."""
    primes, fp, logp = _prime_data(F, params, table)
    b = np.abs(fp) * np.exp(-params.sigma * logp)
    return math.fsum(np.log(bessel_i0_series(2.0 * b)))


def nu_normalizer(F: MultiplicativeFunction, params: ChaosParams, table: PrimeTable) -> float:
    return math.exp(log_nu_normalizer(F, params, table))


def g_values(source, F: MultiplicativeFunction, params: ChaosParams, s, table: PrimeTable) -> np.ndarray:
    """``G_{y,t}(s)`` with shape ``(replicates, len(s))``."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    primes, fp, logp = _prime_data(F, params, table)
    ang = _prime_angles(source, primes)
    R = ang.shape[0]
    out = np.zeros((R, s.size))
    coef = 2.0 * fp * np.exp(-params.sigma * logp)
    for a, b in _chunks(primes.size, _CHUNK_ELEMS // max(R, s.size)):
        z = np.exp(1j * ang[:, a:b]) * coef[a:b]
        out += (z @ np.exp(-1j * np.outer(logp[a:b], s))).real
    return out


def g_field(realization, F: MultiplicativeFunction, params: ChaosParams, grid: Grid, table: PrimeTable) -> FieldSlice:
    return FieldSlice(grid.nodes, g_values(realization, F, params, grid.nodes, table)[0])


def nu_density(source, F: MultiplicativeFunction, params: ChaosParams, s, table: PrimeTable) -> np.ndarray:
    return np.exp(g_values(source, F, params, s, table) - log_nu_normalizer(F, params, table))


def nu_measure(realization, F: MultiplicativeFunction, params: ChaosParams, grid: Grid, table: PrimeTable) -> GridMeasure:
    dens = nu_density(realization, F, params, grid.nodes, table)[0]
    return GridMeasure((grid.lo, grid.hi), grid.spacing, grid.nodes, dens)


def cap_tail_variance(theta: float, sigma: float, y_cap: float) -> float:
    """First-order estimate of ``sum_{p > y_cap} |f(p)|^2 p^(-2 sigma)``.

    With ``pi_g(t) ~ theta t/log t`` the sum is ``theta E1((2 sigma - 1) log y_cap)``;
    it is infinite at ``sigma = 1/2``.
    """
    if sigma <= 0.5:
        return math.inf
    return theta * float(special.exp1((2.0 * sigma - 1.0) * math.log(y_cap)))


# ---------------------------------------------------------------------------
# density factorization


def find_y0(F: MultiplicativeFunction, table: PrimeTable) -> int:
    """Smallest prime ``y0`` with ``|f(p)|/sqrt(p) + |f(p^2)|/p <= 1/2`` for all ``p >= y0`` in the table."""
    p = table.primes
    val = np.abs(F.at(p, np.ones_like(p))) / np.sqrt(p) + np.abs(F.at(p, np.full_like(p, 2))) / p
    bad = np.flatnonzero(val > 0.5)
    if bad.size == 0:
        return int(p[0])
    if bad[-1] + 1 >= p.size:
        raise ModelError("no y0 found within the prime table")
    return int(p[bad[-1] + 1])


@dataclass(frozen=True)
class FactorizationCheck:
    y0: int
    s: np.ndarray
    m_density: np.ndarray
    nu_density: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.x0 * self.x1 * self.x2 * self.x3

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.m_density - self.x * self.nu_density) / self.m_density


def _circle_mean(fn, n_nodes: int = 256) -> np.ndarray:
    """Mean over ``u = e^{i phi}`` with the trapezoid rule (exact for low-degree trigonometric polynomials)."""
    u = np.exp(2j * math.pi * np.arange(n_nodes) / n_nodes)
    return fn(u).mean(axis=-1)


def density_factorization_check(realization, F: MultiplicativeFunction, params: ChaosParams, s_points, table: PrimeTable) -> FactorizationCheck:
    """Split the ``m``-density into ``X0 X1 X2 X3`` times the ``nu``-density.

    ``X0`` is the ratio of the two normalizers, computed prime by prime as
    circle averages at each ``s`` so that its ``s``-independence is an
    actual check. ``X1`` covers primes ``p <= min(y0, y)``; ``X2`` swaps the
    degree-two truncation of each remaining local factor for the full one;
    ``X3`` swaps ``exp(G_p)`` for the degree-two truncation.
    """
    if params.factor_mode != "full":
        raise ValueError("factorization applies to full local factors")
    s = np.atleast_1d(np.asarray(s_points, dtype=np.float64))
    y0 = find_y0(F, table)
    primes, fp, logp = _prime_data(F, params, table)
    sigma = params.sigma
    alpha = np.exp(1j * _prime_angles(realization, primes)[0])
    caps = prime_power_cap(primes, sigma, F.power_bound)
    kmax = int(caps.max()) if primes.size else 1
    k = np.arange(1, kmax + 1)
    coeff = F.at(primes[:, None], k[None, :]).astype(np.complex128) * (k[None, :] <= caps[:, None])
    z = np.exp(-(sigma + 1j * s[None, :]) * logp[:, None])  # (P, S), p^{-sigma-is}

    def local(u, upto):
        # u: (P, S, ...) unit multiplier; returns 1 + sum_{k<=upto} u^k f(p^k) z^k
        w = u * z[..., None] if u.ndim == 3 else u * z
        tot = np.ones_like(w)
        powk = np.ones_like(w)
        for j in range(min(upto, kmax)):
            powk = powk * w
            c = coeff[:, j]
            tot = tot + (c[:, None, None] if w.ndim == 3 else c[:, None]) * powk
        return tot

    def gp(u):
        w = u * z[..., None] if u.ndim == 3 else u * z
        f1 = fp[:, None, None] if w.ndim == 3 else fp[:, None]
        return 2.0 * (f1 * w).real

    a = alpha[:, None]
    full = local(a, kmax)
    quad = local(a, 2)
    G = gp(a)
    low = primes <= y0

    u = np.exp(2j * math.pi * np.arange(256) / 256)[None, None, :]
    e_exp = np.mean(np.exp(gp(u)), axis=-1)  # (P, S)
    e_abs2 = np.mean(np.abs(local(u, kmax)) ** 2, axis=-1)
    x0 = np.exp(np.sum(np.log(e_exp) - np.log(e_abs2), axis=0))
    x1 = np.exp(np.sum((-G + 2.0 * np.log(np.abs(full)))[low], axis=0))
    hi = ~low
    x2 = np.exp(np.sum((2.0 * np.log(np.abs(full)) - 2.0 * np.log(np.abs(quad)))[hi], axis=0))
    x3 = np.exp(np.sum((-G + 2.0 * np.log(np.abs(quad)))[hi], axis=0))

    m = m_density(realization, F, params, s, table)[0][0]
    nu = nu_density(realization, F, params, s, table)[0]
    return FactorizationCheck(y0, s, m, nu, x0, x1, x2, x3)


# ---------------------------------------------------------------------------
# two-point statistics and moments


def _tilt_magnitudes(F: MultiplicativeFunction, params: ChaosParams, table: PrimeTable):
    primes, fp, logp = _prime_data(F, params, table)
    return np.abs(fp) * np.exp(-params.sigma * logp), logp


def two_point_normalizer(F: MultiplicativeFunction, params: ChaosParams, s1, s2, table: PrimeTable) -> np.ndarray:
    """``E[e^{G(s1)+G(s2)}] / (E e^{G(s1)} E e^{G(s2)})``.

    Per prime the combined tilt has modulus ``2 b_p |p^{-i s1} + p^{-i s2}| =
    4 b_p |cos((s1 - s2) log p / 2)|`` with ``b_p = |f(p)| p^{-sigma}``, so only
    ``|s1 - s2|`` enters.
    """
    b, logp = _tilt_magnitudes(F, params, table)
    d = np.abs(np.asarray(s1, dtype=np.float64) - np.asarray(s2, dtype=np.float64))
    shape = d.shape
    d = d.reshape(-1)
    lg0 = np.log(bessel_i0_series(2.0 * b))
    out = np.empty(d.size)
    for a0, a1 in _chunks(d.size, _CHUNK_ELEMS // max(1, b.size)):
        c = np.abs(np.cos(0.5 * np.outer(d[a0:a1], logp)))
        out[a0:a1] = np.sum(np.log(bessel_i0_series(4.0 * b[None, :] * c)) - 2.0 * lg0[None, :], axis=1)
    return np.exp(out).reshape(shape)


def cross_two_point(F: MultiplicativeFunction, params1: ChaosParams, params2: ChaosParams, s1, s2, table: PrimeTable) -> np.ndarray:
    """``E[e^{G1(s1)+G2(s2)}] / (E e^{G1(s1)} E e^{G2(s2)})`` for two fields on one realization."""
    b1, logp1 = _tilt_magnitudes(F, params1, table)
    b2, logp2 = _tilt_magnitudes(F, params2, table)
    n = max(b1.size, b2.size)
    logp = logp1 if b1.size == n else logp2
    b1 = np.pad(b1, (0, n - b1.size))
    b2 = np.pad(b2, (0, n - b2.size))
    s1 = np.atleast_1d(np.asarray(s1, dtype=np.float64))
    s2 = np.atleast_1d(np.asarray(s2, dtype=np.float64))
    z = b1[None, :] * np.exp(-1j * np.outer(s1, logp)) + b2[None, :] * np.exp(-1j * np.outer(s2, logp))
    val = np.log(bessel_i0_series(2.0 * np.abs(z))) - np.log(bessel_i0_series(2.0 * b1)) - np.log(bessel_i0_series(2.0 * b2))
    return np.exp(val.sum(axis=1))


def two_point_quadrature(F: MultiplicativeFunction, params: ChaosParams, grid: Grid, table: PrimeTable) -> float:
    """``spacing^2 sum_{i,j} C(s_i, s_j)``, the exact second moment of the grid mass."""
    s = grid.nodes
    lag = np.arange(s.size) * grid.spacing
    c = two_point_normalizer(F, params, 0.0, lag, table)
    # C depends on |i - j| only: weight each lag by its multiplicity
    mult = np.where(np.arange(s.size) == 0, s.size, 2 * (s.size - np.arange(s.size)))
    return grid.spacing**2 * math.fsum(c * mult)


def _seed_batches(seeds: np.ndarray, batch: int):
    for a in range(0, seeds.size, batch):
        yield seeds[a : a + batch]


def _mean_se(values: np.ndarray) -> MCEstimate:
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    mean = math.fsum(v) / n
    se = math.sqrt(math.fsum((v - mean) ** 2) / (n - 1) / n) if n > 1 else math.nan
    return MCEstimate(mean, se, n)


def interval_masses(seeds, F: MultiplicativeFunction, params: ChaosParams, grid: Grid, table: PrimeTable, kind: str = "nu", batch: int = 256) -> np.ndarray:
    """Grid masses ``mu(I)`` per replicate for ``mu`` = ``nu`` or ``m``."""
    out = []
    for chunk in _seed_batches(np.asarray(seeds, dtype=np.uint64), batch):
        if kind == "nu":
            d = nu_density(chunk, F, params, grid.nodes, table)
        else:
            d = m_density(chunk, F, params, grid.nodes, table)[0]
        out.append(grid.spacing * d.sum(axis=1))
    return np.concatenate(out)


def multifractal_moment(F: MultiplicativeFunction, params: ChaosParams, eps: float, q: float, N_mc: int, master_seed: int, table: PrimeTable, min_nodes: int = 8) -> MCEstimate:
    """Monte Carlo ``E[nu_{y,t}([0, eps])^q]`` with its standard error."""
    grid = Grid.with_spacing(0.0, eps, min(default_spacing(params.y), eps / min_nodes))
    if grid.n < min_nodes:
        raise ValueError("eps must be resolved by at least 8 nodes")
    masses = interval_masses(replicate_seeds(master_seed, N_mc), F, params, grid, table)
    return _mean_se(masses**q)


def multifractal_bound(eps: float, q: float, q_prime: float, theta: float, y: float, t: float) -> float:
    """``eps^q delta^(-theta q (q' - 1))`` with ``delta = 1/log min(y, t)``."""
    if q_prime <= q:
        raise ValueError("need q' > q")
    delta = 1.0 / math.log(min(y, t))
    return eps**q * delta ** (-theta * q * (q_prime - 1.0))


def modified_second_moment(
    F: MultiplicativeFunction,
    y: float,
    y_cap: float,
    h_weights,
    K: float,
    N_mc: int,
    master_seed: int,
    table: PrimeTable,
    grid: Grid | None = None,
    batch: int = 64,
) -> MCEstimate:
    """``E[|nu_{y,inf}(h) - nu_{Ycap,y}(h)|^2 exp(-nu_{y,inf}(I)/K)]`` on a shared realization.

    ``h_weights`` is a callable on the grid nodes or an array of node values.
    """
    grid = Grid.with_spacing(0.0, 1.0, default_spacing(y)) if grid is None else grid
    h = h_weights(grid.nodes) if callable(h_weights) else np.asarray(h_weights, dtype=np.float64)
    if y_cap < y * y:
        log.info("Ycap=%g below y^2=%g; bias from the capped product is larger", y_cap, y * y)
    p1 = ChaosParams(y, math.inf)
    p2 = ChaosParams(min(y_cap, table.limit), y)
    log.info("cap tail variance at Ycap=%g: %.3e", p2.y, cap_tail_variance(F.theta, p2.sigma, p2.y))
    vals = []
    for chunk in _seed_batches(replicate_seeds(master_seed, N_mc), batch):
        d1 = nu_density(chunk, F, p1, grid.nodes, table)
        d2 = nu_density(chunk, F, p2, grid.nodes, table)
        diff = grid.spacing * ((d1 - d2) @ h)
        mass = grid.spacing * d1.sum(axis=1)
        vals.append(np.abs(diff) ** 2 * np.exp(-mass / K))
    return _mean_se(np.concatenate(vals))
