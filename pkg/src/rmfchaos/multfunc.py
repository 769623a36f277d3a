"""Deterministic multiplicative functions and their prime-sum asymptotics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from .errors import ModelError, RangeError
from .primes import PrimeTable, factor

log = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)

PrimePowerRule = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MultiplicativeFunction:
    """A multiplicative function given by its values on prime powers.

    ``prime_power_rule(p, k)`` must accept integer arrays of equal shape with
    ``k >= 1`` and return ``f(p**k)`` elementwise. ``theta`` is the mean value
    of ``|f(p)|**2`` over primes. ``power_bound`` is an upper bound for
    ``|f(p**k)|`` used to size truncated local Euler factors.
    """

    name: str
    theta: float
    prime_power_rule: PrimePowerRule
    power_bound: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ModelError(f"theta must lie in [0, 1], got {self.theta}")

    def at(self, p, k) -> np.ndarray:
        p = np.asarray(p, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        return np.asarray(self.prime_power_rule(p, k))

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.at(np.array([2]), np.array([1])))


def make_two_squares_indicator() -> MultiplicativeFunction:
    """Indicator of integers that are a sum of two squares (theta = 1/2)."""

    def rule(p, k):
        keep = (p == 2) | (p % 4 == 1) | (k % 2 == 0)
        return keep.astype(np.float64)

    return MultiplicativeFunction("two_squares", 0.5, rule)


def make_divisor_family(z: float) -> MultiplicativeFunction:
    """``d_z(n)``, the coefficients of ``zeta(s)**z`` (theta = z**2)."""
    if not 0.0 < z < 1.0:
        raise ModelError(f"divisor family needs 0 < z < 1, got {z}")

    def rule(p, k):
        return special.binom(z + k - 1.0, k.astype(np.float64)) + 0.0 * p

    return MultiplicativeFunction(f"divisor_{z:g}", z * z, rule)


def make_omega_family(theta: float, counted_with_multiplicity: bool = True) -> MultiplicativeFunction:
    """``theta**(Omega(n)/2)`` or, without multiplicity, ``theta**(omega(n)/2)``."""
    if not 0.0 < theta < 1.0:
        raise ModelError(f"omega family needs 0 < theta < 1, got {theta}")
    root = math.sqrt(theta)

    if counted_with_multiplicity:
        def rule(p, k):
            return root ** k.astype(np.float64) + 0.0 * p
        name = f"big_omega_{theta:g}"
    else:
        def rule(p, k):
            return np.full(np.broadcast(p, k).shape, root)
        name = f"small_omega_{theta:g}"
    return MultiplicativeFunction(name, theta, rule)


def make_constant_family(value: float = 1.0, theta: float | None = None) -> MultiplicativeFunction:
    """``f(p**k) = value`` for every prime power; used for diagnostics."""
    th = value * value if theta is None else theta

    def rule(p, k):
        return np.full(np.broadcast(p, k).shape, float(value))

    return MultiplicativeFunction(f"constant_{value:g}", min(th, 1.0), rule, max(abs(value), 1.0))


def family_by_name(name: str, theta: float) -> MultiplicativeFunction:
    """Build a built-in family from a config name and mean value."""
    if name == "two_squares":
        if abs(theta - 0.5) > 1e-12:
            raise ModelError("two_squares has theta = 1/2")
        return make_two_squares_indicator()
    if name == "divisor":
        return make_divisor_family(math.sqrt(theta))
    if name == "big_omega":
        return make_omega_family(theta, True)
    if name == "small_omega":
        return make_omega_family(theta, False)
    raise ModelError(f"unknown family {name!r}")


def eval_f(F: MultiplicativeFunction, n: int, table: PrimeTable) -> complex:
    """``f(n)`` as the product of prime-power values over ``factor(n)``."""
    out = 1.0 + 0.0j
    for p, a in factor(n, table):
        out *= complex(F.at(np.array([p]), np.array([a]))[0])
    return out


def f_values(F: MultiplicativeFunction, table: PrimeTable, n_max: int | None = None) -> np.ndarray:
    """Array ``v`` with ``v[n] = f(n)`` for ``0 <= n <= n_max`` (``v[0] = 0``).

    Filled over dyadic blocks using ``f(n) = f(p**k) f(n / p**k)`` with
    ``p = spf(n)``; the cofactor is at most ``n/2`` and so already known.
    """
    n_max = table.limit if n_max is None else int(n_max)
    if n_max > table.limit:
        raise RangeError(f"f values up to {n_max} requested but table limit is {table.limit}")
    dtype = np.float64 if F.is_real() else np.complex128
    vals = np.zeros(n_max + 1, dtype=dtype)
    if n_max >= 1:
        vals[1] = 1.0
    lo = 2
    while lo <= n_max:
        hi = min(2 * lo, n_max + 1)
        rest = np.arange(lo, hi, dtype=np.int64) // table.ppow[lo:hi]
        vals[lo:hi] = F.at(table.spf[lo:hi], table.pexp[lo:hi]) * vals[rest]
        lo = hi
    return vals


def prime_values(F: MultiplicativeFunction, primes: np.ndarray) -> np.ndarray:
    return F.at(primes, np.ones_like(primes))


@dataclass(frozen=True)
class PThetaReport:
    """Prime-sum profile of ``g = |f|**2``.

    ``error_profile[i] = pi_g(t_i) - theta * t_i / log t_i``; the ``li_profile``
    uses ``theta * Li(t)`` instead as the main term.
    """

    samples: np.ndarray
    pi_values: np.ndarray
    theta_hat: float
    error_profile: np.ndarray
    li_profile: np.ndarray
    integral_bound: float


def chebyshev_pi_g(F: MultiplicativeFunction, x_samples, table: PrimeTable) -> PThetaReport:
    """Evaluate ``pi_g(t) = sum_{p <= t} |f(p)|**2`` at each sample point."""
    t = np.asarray(x_samples, dtype=np.float64)
    if t.ndim != 1 or t.size == 0 or np.any(t < 2) or np.any(np.diff(t) <= 0):
        raise ValueError("x_samples must be ascending and >= 2")
    t_max = int(math.floor(t[-1]))
    primes = table.primes_upto(t_max)
    g = np.abs(prime_values(F, primes)) ** 2
    cum = np.cumsum(g)
    idx = np.searchsorted(primes, np.floor(t), side="right")
    pi = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
    main = t / np.log(t)
    li = special.expi(np.log(t)) - special.expi(math.log(2.0))
    theta = F.theta
    err = pi - theta * main
    theta_hat = float(np.dot(pi, main) / np.dot(main, main))

    # integral of |E(u)|/u^2 over [2, t_max], with pi_g constant on [n, n+1)
    n = np.arange(2, t_max + 1, dtype=np.float64)
    step = np.zeros(t_max + 1)
    step[primes] = g
    pi_n = np.cumsum(step)[2:]
    upper = np.minimum(n + 1.0, t_max)
    mid = 0.5 * (n + upper)
    e_n = np.abs(pi_n - theta * mid / np.log(mid))
    bound = float(np.sum(e_n * (1.0 / n - 1.0 / upper)))
    return PThetaReport(t, pi, theta_hat, err, pi - theta * li, bound)


def mertens_sum(F: MultiplicativeFunction, y: float, t: float, c: float, s: float, table: PrimeTable) -> float:
    """``sum_{p <= y} |f(p)|**2 p**(-1 - c/log t) cos(s log p)``; ``t`` may be ``inf``."""
    if y < 3 or t < 3:
        raise ValueError("mertens_sum needs y, t >= 3")
    if c < 0:
        raise ValueError("c must be >= 0")
    p = table.primes_upto(y).astype(np.float64)
    g = np.abs(prime_values(F, table.primes_upto(y))) ** 2
    lp = np.log(p)
    shift = 0.0 if math.isinf(t) else c / math.log(t)
    return math.fsum(g * np.exp(-(1.0 + shift) * lp) * np.cos(s * lp))


def mertens_main_term(theta: float, y: float, t: float, s: float) -> float:
    """``theta * log min(1/|s|, log y, log t)`` with ``1/0 = inf``."""
    scale = min(math.inf if s == 0 else 1.0 / abs(s), math.log(y), math.log(t))
    return theta * math.log(scale)


def _local_factor_sum(F: MultiplicativeFunction, p: int, weight: float, tol: float = 1e-17) -> float:
    """``sum_{i >= 0} |f(p**i)|**2 weight**i`` with a divergence check."""
    bound2 = F.power_bound**2
    if weight >= 1.0:
        k_cap = 200
    else:
        k_cap = max(1, min(200, math.ceil(math.log(tol / max(bound2, 1e-300)) / math.log(weight))))
    k = np.arange(1, k_cap + 1)
    terms = np.abs(F.at(np.full(k_cap, p), k)) ** 2 * weight ** k.astype(np.float64)
    if not np.all(np.isfinite(terms)) or terms[-1] > 1e-12 * (1.0 + terms.sum()):
        raise ModelError(f"local factor sum_i |f({p}^i)|^2 / {p}^i does not converge")
    return 1.0 + math.fsum(terms)


def euler_constant_Cg(
    F: MultiplicativeFunction,
    prime_cutoff: float,
    table: PrimeTable,
    tail_correction: bool = True,
) -> float:
    """``C_g = prod_p (sum_i g(p^i)/p^i) (1 - 1/p)^theta`` for ``g = |f|**2``.

    The product over ``p <= prime_cutoff`` is exact. With ``tail_correction``
    the primes above the cutoff contribute ``exp(sum_{p>X} (g(p) - theta)/p)``,
    whose leading term by partial summation is
    ``-(pi_g(X) - theta * pi(X)) / X``.
    """
    if prime_cutoff < 2:
        raise ValueError("prime_cutoff must be >= 2")
    primes = table.primes_upto(prime_cutoff)
    theta = F.theta
    log_c = math.fsum(
        math.log(_local_factor_sum(F, int(p), 1.0 / p)) + theta * math.log1p(-1.0 / p) for p in primes
    )
    if tail_correction:
        g = np.abs(prime_values(F, primes)) ** 2
        tail = -(math.fsum(g) - theta * primes.size) / float(prime_cutoff)
        log.info("C_g tail correction at X=%g: %.3e", prime_cutoff, tail)
        log_c += tail
    return math.exp(log_c)


def wirsing_sum(F: MultiplicativeFunction, x: float, table: PrimeTable, cg: float | None = None):
    """Exact ``sum_{n <= x} |f(n)|**2`` and its ratio to ``C_g/Gamma(theta) x (log x)^(theta-1)``.

    The ratio is ``nan`` for ``x < 2``.
    """
    n = int(math.floor(x))
    if n > table.limit:
        raise RangeError(f"x={x} exceeds table limit {table.limit}")
    total = math.fsum(np.abs(f_values(F, table, n)[1:]) ** 2)
    if n < 2:
        return total, float("nan")
    if cg is None:
        cg = euler_constant_Cg(F, table.limit, table)
    theta = F.theta
    ref = cg / special.gamma(theta) * x * math.log(x) ** (theta - 1.0)
    return total, total / ref


def ein(r: float) -> float:
    """``int_0^r (1 - e^{-s})/s ds`` by adaptive quadrature."""
    if r == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: -math.expm1(-s) / s if s > 0 else 1.0, 0.0, r, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def smooth_euler_sum(F: MultiplicativeFunction, y: float, exponent: float, table: PrimeTable) -> float:
    """``sum_{P(n) <= y} |f(n)|**2 n**(-exponent)`` as an exact Euler product (``exponent > 0``)."""
    return math.exp(
        math.fsum(math.log(_local_factor_sum(F, int(p), float(p) ** -exponent)) for p in table.primes_upto(y))
    )


def tshift_ratio(F: MultiplicativeFunction, y: float, t: float, table: PrimeTable, cg: float | None = None):
    """Both sides of the shifted smooth-sum asymptotic.

    ``lhs = sum_{P(n) <= y} g(n) n^(-1 - t/log y)`` (exact Euler product) and
    ``rhs = C_g exp(theta*gamma - theta*Ein(t)) (log y)^theta``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    lhs = smooth_euler_sum(F, y, 1.0 + t / math.log(y), table)
    if cg is None:
        cg = euler_constant_Cg(F, table.limit, table)
    theta = F.theta
    rhs = cg * math.exp(theta * EULER_GAMMA - theta * ein(t)) * math.log(y) ** theta
    return lhs, rhs
