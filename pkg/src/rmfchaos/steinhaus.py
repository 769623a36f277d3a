"""Steinhaus random multiplicative functions and tilted circle laws.

A realization assigns each prime ``p`` the angle derived from a 64-bit hash
of ``(seed, p)``. No random stream is consumed, so the value at ``p`` never
depends on which other primes are in play, and replicates need no
coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import SamplingError
from .primes import PrimeTable, factor

TWO_PI = 2.0 * math.pi
_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_M1 = _U64(0xBF58476D1CE4E5B9)
_M2 = _U64(0x94D049BB133111EB)
_REPLICATE_SALT = _U64(0xD1B54A32D192ED03)


def mix64(z) -> np.ndarray:
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    shape = z.shape
    z = np.atleast_1d(z) + _GOLDEN
    z = (z ^ (z >> _U64(30))) * _M1
    z = (z ^ (z >> _U64(27))) * _M2
    return (z ^ (z >> _U64(31))).reshape(shape)


def _as_u64(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype.kind == "i":
        return arr.astype(np.int64).view(np.uint64) if arr.ndim else np.uint64(int(arr) % 2**64)
    return arr.astype(np.uint64)


def hash_angles(seeds, primes) -> np.ndarray:
    """Angles in ``[0, 2 pi)`` for every (seed, prime) pair, shape ``seeds x primes``."""
    s = mix64(_as_u64(seeds))[..., None]
    p = np.asarray(primes, dtype=np.uint64)
    bits = mix64(s ^ mix64(p * _REPLICATE_SALT))
    return (bits >> _U64(11)).astype(np.float64) * (TWO_PI / 2.0**53)


def replicate_seeds(master_seed: int, count: int, start: int = 0) -> np.ndarray:
    """Disjoint per-replicate seeds derived from a master seed."""
    r = np.arange(start, start + count, dtype=np.uint64)
    return mix64(mix64(np.uint64(master_seed % 2**64)) ^ (r * _GOLDEN + _U64(1)))


@dataclass(frozen=True)
class SteinhausRealization:
    """``alpha(p) = exp(i * angle(seed, p))``."""

    seed: int

    def angles(self, primes) -> np.ndarray:
        return hash_angles(np.uint64(self.seed % 2**64), primes)

    def alpha_p(self, primes) -> np.ndarray:
        return np.exp(1j * self.angles(primes))


@dataclass(frozen=True)
class ConstantRealization:
    """Deterministic stand-in with ``alpha(p) = exp(i * angle)`` for every prime."""

    angle: float = 0.0

    def angles(self, primes) -> np.ndarray:
        return np.full(np.shape(primes), float(self.angle))

    def alpha_p(self, primes) -> np.ndarray:
        return np.exp(1j * self.angles(primes))


def alpha_p(seed: int, p) -> np.ndarray:
    return SteinhausRealization(seed).alpha_p(p)


def alpha_n(realization, n: int, table: PrimeTable) -> complex:
    """``alpha(n) = prod alpha(p)**a_p`` over the factorization of ``n``."""
    fac = factor(n, table)
    if not len(fac):
        return 1.0 + 0.0j
    ps = np.array([p for p, _ in fac])
    ks = np.array([a for _, a in fac], dtype=np.float64)
    return complex(np.exp(1j * np.sum(ks * realization.angles(ps))))


def angle_values(prime_angles: np.ndarray, table: PrimeTable, n_max: int) -> np.ndarray:
    """Angles of ``alpha(n)`` for ``0 <= n <= n_max`` along the last axis.

    ``prime_angles[..., p]`` must hold the angle of ``alpha(p)`` at prime
    indices ``p <= n_max``; other entries are ignored.
    """
    lead = prime_angles.shape[:-1]
    out = np.zeros(lead + (n_max + 1,))
    lo = 2
    while lo <= n_max:
        hi = min(2 * lo, n_max + 1)
        rest = np.arange(lo, hi, dtype=np.int64) // table.ppow[lo:hi]
        out[..., lo:hi] = table.pexp[lo:hi] * prime_angles[..., table.spf[lo:hi]] + out[..., rest]
        lo = hi
    return out


def prime_angle_array(realizations_or_seeds, table: PrimeTable, n_max: int) -> np.ndarray:
    """Scatter prime angles into a dense ``(..., n_max + 1)`` array."""
    primes = table.primes_upto(n_max)
    if isinstance(realizations_or_seeds, (SteinhausRealization, ConstantRealization)):
        ang = realizations_or_seeds.angles(primes)
    else:
        ang = hash_angles(realizations_or_seeds, primes)
    out = np.zeros(ang.shape[:-1] + (n_max + 1,))
    out[..., primes] = ang
    return out


@dataclass(frozen=True)
class MCEstimate:
    mean: complex | float
    se: float
    n: int


def orthogonality_estimate(n: int, m: int, N_mc: int, seed0: int, table: PrimeTable) -> MCEstimate:
    """Mean of ``alpha(n) conj(alpha(m))`` over ``N_mc`` independent realizations."""
    fn = dict(factor(n, table).entries)
    fm = dict(factor(m, table).entries)
    ps = sorted(set(fn) | set(fm))
    seeds = replicate_seeds(seed0, N_mc)
    if not ps:
        return MCEstimate(1.0 + 0.0j, 1.0 / math.sqrt(N_mc), N_mc)
    w = np.array([fn.get(p, 0) - fm.get(p, 0) for p in ps], dtype=np.float64)
    ang = hash_angles(seeds, np.array(ps))
    vals = np.exp(1j * (ang @ w))
    return MCEstimate(complex(vals.mean()), 1.0 / math.sqrt(N_mc), N_mc)


def bessel_i0_series(x) -> np.ndarray:
    """``sum_k (x^2/4)^k / (k!)^2`` elementwise, summed to relative 1e-17."""
    return _bessel_series(np.asarray(x, dtype=np.float64), 0)


def bessel_i1_series(x) -> np.ndarray:
    """``sum_k (x/2)^(2k+1) / (k! (k+1)!)`` elementwise."""
    return _bessel_series(np.asarray(x, dtype=np.float64), 1)


def _bessel_series(x: np.ndarray, order: int) -> np.ndarray:
    q = 0.25 * x * x
    term = np.ones_like(x) if order == 0 else 0.5 * x
    total = term.copy()
    for k in range(1, 1000):
        term = term * q / (k * (k + order))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return total


def tilted_mgf(a) -> float:
    """``E exp(<a, U>)`` for ``U`` uniform on the unit circle."""
    return float(bessel_i0_series(np.hypot(*_as_vector(a))))


def _as_vector(a) -> np.ndarray:
    if np.iscomplexobj(a):
        return np.array([np.real(a), np.imag(a)], dtype=np.float64)
    v = np.asarray(a, dtype=np.float64).reshape(-1)
    if v.size == 1:
        return np.array([v[0], 0.0])
    return v[:2]


@dataclass(frozen=True)
class TiltedCircleLaw:
    """Law on the unit circle with density ``exp(<a, u>)/I0(|a|)`` against uniform."""

    a: tuple[float, float]

    @property
    def norm(self) -> float:
        return math.hypot(*self.a)

    @property
    def normalizer(self) -> float:
        return tilted_mgf(self.a)

    @property
    def mean(self) -> complex:
        """``grad_a log I0(|a|) = I1/I0(|a|) * a/|a|``."""
        r = self.norm
        if r == 0:
            return 0.0j
        ratio = float(bessel_i1_series(r) / bessel_i0_series(r))
        return ratio * complex(*self.a) / r

    def density(self, u: np.ndarray) -> np.ndarray:
        return np.exp(self.a[0] * u.real + self.a[1] * u.imag) / self.normalizer

    def tv_from_uniform(self) -> float:
        """``(1/2) int |density - 1| d eta`` by adaptive quadrature."""
        phi0 = math.atan2(self.a[1], self.a[0])
        r, z = self.norm, self.normalizer
        val, _ = integrate.quad(lambda ph: abs(math.exp(r * math.cos(ph - phi0)) / z - 1.0), 0.0, TWO_PI, epsabs=1e-13, limit=200)
        return 0.5 * val / TWO_PI


MAX_TILT = 4.0


def girsanov_coupling(a, rng: np.random.Generator, size: int = 1, max_rounds: int = 10_000):
    """Maximal coupling of the uniform and ``a``-tilted circle laws.

    ``U`` is uniform. ``U_a = U`` with probability ``min(1, density(U))``;
    otherwise ``U_a`` is drawn from the normalized residual
    ``(density - 1)^+`` by rejection from the uniform law, so that
    ``P(U != U_a)`` equals the total-variation distance.

    Returns complex arrays ``(U, U_a)`` of length ``size``.
    """
    law = TiltedCircleLaw(tuple(_as_vector(a)))
    r = law.norm
    if r > MAX_TILT:
        raise ValueError(f"|a| = {r} exceeds the safety bound {MAX_TILT}")
    u = np.exp(1j * rng.uniform(0.0, TWO_PI, size))
    dens = law.density(u)
    keep = rng.uniform(size=size) < np.minimum(1.0, dens)
    ua = u.copy()
    todo = np.flatnonzero(~keep)
    env = math.exp(r) / law.normalizer - 1.0
    rounds = 0
    while todo.size:
        rounds += 1
        if rounds > max_rounds:
            raise SamplingError(f"residual sampler exceeded {max_rounds} rounds at |a|={r}")
        prop = np.exp(1j * rng.uniform(0.0, TWO_PI, todo.size))
        acc = rng.uniform(size=todo.size) * env < law.density(prop) - 1.0
        ua[todo[acc]] = prop[acc]
        todo = todo[~acc]
    return u, ua
