"""Weighted partial sums of random multiplicative functions.

Weights are step functions ``Phi`` on ``[0, A]``. Pieces are right-closed,
``Phi(u) = v_j`` for ``b_{j-1} < u <= b_j``, so that ``Phi = 1_[0,1]`` keeps
exactly the ``n <= x``. Comparisons of ``n`` against ``b_j x`` use a relative
slack of 1e-12 so that exact integer boundaries are not lost to round-off.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .chaos import ChaosParams, Grid, m_density
from .dickman import truncation_K
from .errors import PrecisionError, RangeError
from .multfunc import MultiplicativeFunction, f_values
from .primes import PrimeTable
from .steinhaus import ConstantRealization, MCEstimate, SteinhausRealization, angle_values, prime_angle_array

log = logging.getLogger(__name__)

_SLACK = 1.0 + 1e-12


@dataclass(frozen=True)
class StepWeight:
    """Step function with ``breakpoints[0] = 0 < ... < breakpoints[-1] = A`` and one value per piece."""

    breakpoints: tuple[float, ...]
    values: tuple[complex, ...]

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        if b.size < 2 or b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if len(self.values) != b.size - 1:
            raise ValueError("need one value per piece")

    @classmethod
    def indicator(cls, lo: float, hi: float) -> "StepWeight":
        """``1_[lo, hi]`` (up to the endpoint convention)."""
        if lo == 0.0:
            return cls((0.0, hi), (1.0,))
        return cls((0.0, lo, hi), (0.0, 1.0))

    @property
    def support_end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.breakpoints, dtype=np.float64)

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.complex128)

    def is_real(self) -> bool:
        return bool(np.all(self.v.imag == 0))

    def scaled(self, c: complex) -> "StepWeight":
        return StepWeight(self.breakpoints, tuple(c * v for v in self.values))

    def norm2(self) -> float:
        """``||Phi||_2^2``."""
        return float(np.sum(np.abs(self.v) ** 2 * np.diff(self.b)))

    def __call__(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        j = np.searchsorted(self.b, u, side="left")
        return np.concatenate([[0.0], self.v, [0.0]])[j]

    def at_integers(self, n, x: float) -> np.ndarray:
        """``Phi(n/x)`` for integer ``n >= 1``."""
        n = np.asarray(n)
        j = np.searchsorted(self.b * x * _SLACK, n, side="left")
        vals = np.concatenate([[0.0], self.v, [0.0]])
        return vals[j]

    def breakpoint_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """``K_Phi(s) = sum_b c_b b^s / s``: distinct breakpoints ``b > 0`` and coefficients ``c_b``."""
        v = self.v
        c = np.concatenate([[0.0], v]) - np.concatenate([v, [0.0]])
        b = self.b
        keep = (b > 0) & (np.abs(c) > 0)
        return b[keep], c[keep]


def mellin_K(Phi: StepWeight, s) -> np.ndarray:
    """``K_Phi(s) = int_0^inf Phi(x) x^(s-1) dx = sum_j v_j (b_j^s - b_{j-1}^s)/s``."""
    s = np.asarray(s, dtype=np.complex128)
    if np.any(s.real <= 0):
        raise ValueError("Mellin transform needs Re s > 0")
    b, c = Phi.breakpoint_weights()
    return np.sum(c[:, None] * b[:, None] ** s.reshape(1, -1), axis=0).reshape(s.shape) / s


def mellin_tail_weight(Phi: StepWeight, S: float) -> float:
    """Approximate ``(1/2pi) int_{|s|>S} |K_Phi(1/2 + is)|^2 ds``.

    For large ``|s|`` the cross terms between breakpoints oscillate away,
    leaving ``sum_b |c_b|^2 b / s^2``, which integrates to ``sum_b |c_b|^2 b / (pi S)``.
    """
    b, c = Phi.breakpoint_weights()
    return float(np.sum(np.abs(c) ** 2 * b)) / (math.pi * S)


@dataclass(frozen=True)
class PlancherelCheck:
    quadrature: float
    tail: float
    norm2: float

    @property
    def total(self) -> float:
        return self.quadrature + self.tail


def plancherel_check(Phi: StepWeight, S: float = 40.0, step: float = 1e-3) -> PlancherelCheck:
    """Composite Simpson on ``[-S, S]`` plus the analytic tail, against ``||Phi||_2^2``."""
    n = int(math.ceil(2 * S / step))
    n += n % 2
    s = np.linspace(-S, S, n + 1)
    k2 = np.abs(mellin_K(Phi, 0.5 + 1j * s)) ** 2
    quad = float(integrate.simpson(k2, x=s)) / (2 * math.pi)
    return PlancherelCheck(quad, mellin_tail_weight(Phi, S), Phi.norm2())


@dataclass(frozen=True)
class TruncationScheme:
    """Levels ``x_k = x^(eps + k delta)`` and prime ranges ``I_k = (x_k, x_{k+1}]``."""

    eps: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0 or not 0.0 < self.delta < 1.0:
            raise ValueError("eps and delta must lie in (0, 1)")

    @property
    def K_limit(self) -> int:
        return truncation_K(self.eps, self.delta)

    def K(self, x: float, A: float = 1.0) -> int:
        """Smallest ``K >= 0`` with ``x_{K+1} >= A x``."""
        need = 1.0 + math.log(A) / math.log(x) - self.eps
        k = math.ceil(need / self.delta - 1e-12) - 1
        return max(0, k)

    def threshold(self, A: float = 1.0) -> float:
        """``x`` above which :meth:`K` equals ``floor((1 - eps)/delta)``."""
        gap = self.eps + (self.K_limit + 1) * self.delta - 1.0
        return 1.0 if A <= 1.0 else A ** (1.0 / gap)

    def levels(self, x: float, A: float = 1.0) -> np.ndarray:
        """``x_0, ..., x_{K+1}``."""
        k = np.arange(self.K(x, A) + 2)
        return x ** (self.eps + k * self.delta)


def _angles_upto(source, table: PrimeTable, n_max: int) -> np.ndarray:
    """Angles of ``alpha(n)`` for ``n <= n_max``, shape ``(replicates, n_max + 1)``."""
    pa = prime_angle_array(source, table, n_max)
    if pa.ndim == 1:
        pa = pa[None, :]
    return angle_values(pa, table, n_max)


def _is_single(source) -> bool:
    return isinstance(source, (SteinhausRealization, ConstantRealization))


def _support(x: float, Phi: StepWeight, table: PrimeTable) -> int:
    n_max = int(math.floor(Phi.support_end * x * _SLACK))
    if n_max > table.limit:
        raise RangeError(f"A*x = {Phi.support_end * x} exceeds table limit {table.limit}")
    return n_max


def _norm(fv: np.ndarray, x: float) -> float:
    return math.sqrt(math.fsum(np.abs(fv[1 : int(math.floor(x)) + 1]) ** 2))


def partial_sums(source, F: MultiplicativeFunction, x: float, Phi: StepWeight, table: PrimeTable, fv: np.ndarray | None = None) -> np.ndarray:
    """``S_x^Phi`` for every replicate of ``source`` (array of shape ``(replicates,)``)."""
    n_max = _support(x, Phi, table)
    fv = f_values(F, table, n_max) if fv is None else fv[: n_max + 1]
    n = np.arange(n_max + 1)
    w = fv * Phi.at_integers(n, x)
    w[0] = 0.0
    nz = np.flatnonzero(w)
    ang = _angles_upto(source, table, n_max)[:, nz]
    return (np.exp(1j * ang) @ w[nz]) / _norm(fv, x)


def partial_sum(realization, F: MultiplicativeFunction, x: float, Phi: StepWeight, table: PrimeTable) -> complex:
    """``S_x^Phi = (sum_{n<=x} |f(n)|^2)^(-1/2) sum_n alpha(n) f(n) Phi(n/x)``."""
    return complex(partial_sums(realization, F, x, Phi, table)[0])


def s_ty(realization, F: MultiplicativeFunction, t: float, y: float, Phi: StepWeight, table: PrimeTable) -> complex:
    """``t^(-1/2) sum_{P(n) <= y} alpha(n) f(n) Phi(n/t)``."""
    n_max = _support(t, Phi, table)
    fv = f_values(F, table, n_max)
    n = np.arange(n_max + 1)
    w = fv * Phi.at_integers(n, t) * (table.largest[: n_max + 1] <= y)
    w[0] = 0.0
    nz = np.flatnonzero(w)
    ang = _angles_upto(realization, table, n_max)[0, nz]
    return complex(np.sum(np.exp(1j * ang) * w[nz]) / math.sqrt(t))


@dataclass(frozen=True)
class TruncatedSum:
    """Kept part of ``S_x^Phi`` and its split by largest prime factor."""

    total: complex
    discarded: complex
    primes: np.ndarray
    per_prime: np.ndarray
    K: int


def _kept_mask(table: PrimeTable, n_max: int, levels: np.ndarray) -> np.ndarray:
    P = table.largest[: n_max + 1].astype(np.float64)
    Q = table.second[: n_max + 1].astype(np.float64)
    k = np.searchsorted(levels, P, side="left") - 1  # P in (x_k, x_{k+1}]
    K = levels.size - 2
    ok = (k >= 0) & (k <= K)
    xk = levels[np.clip(k, 0, K)]
    keep = ok & (Q <= xk)
    keep[:2] = False
    return keep


def truncated_sum(realization, F: MultiplicativeFunction, x: float, Phi: StepWeight, scheme: TruncationScheme, table: PrimeTable) -> TruncatedSum:
    """Keep ``n`` with ``P(n) in I_k`` for some ``0 <= k <= K`` and ``P(n/P(n)) <= x_k``.

    ``per_prime[i]`` is the sum over kept ``n`` with ``P(n) = primes[i]``;
    every prime up to ``A x`` is listed, so primes outside all ``I_k`` carry 0.
    """
    n_max = _support(x, Phi, table)
    fv = f_values(F, table, n_max)
    n = np.arange(n_max + 1)
    w = fv * Phi.at_integers(n, x)
    w[0] = 0.0
    terms = np.exp(1j * _angles_upto(realization, table, n_max)[0]) * w / _norm(fv, x)
    levels = scheme.levels(x, Phi.support_end)
    keep = _kept_mask(table, n_max, levels)
    primes = table.primes_upto(n_max) if n_max >= 2 else np.zeros(0, dtype=np.int64)
    largest = table.largest[: n_max + 1]
    kept = np.flatnonzero(keep)
    per = np.zeros(n_max + 1, dtype=np.complex128)
    np.add.at(per, largest[kept], terms[kept])
    total = complex(np.sum(terms[kept]))
    discarded = complex(np.sum(terms[~keep]))
    return TruncatedSum(total, discarded, primes, per[primes], levels.size - 2)


@dataclass(frozen=True)
class Bracket:
    total: np.ndarray
    per_k: np.ndarray  # (replicates, K + 1)


def bracket_terms(source, F: MultiplicativeFunction, x: float, Phi: StepWeight, scheme: TruncationScheme, table: PrimeTable) -> Bracket:
    """Bracket ``T_{x,eps,delta}`` and its per-range parts for every replicate.

    For primes ``p`` in ``I_k`` the inner sum
    ``sum_{P(m) <= x_k} f(m) alpha(m) Phi(m p / x)`` is a combination of prefix
    sums over ``m`` evaluated at ``floor(b_j x / p)``, so all primes of a range
    are handled at once.
    """
    A = Phi.support_end
    n_max = _support(x, Phi, table)
    fv = f_values(F, table, n_max)
    denom = _norm(fv, x) ** 2
    levels = scheme.levels(x, A)
    K = levels.size - 2
    ang = _angles_upto(source, table, n_max)
    R = ang.shape[0]
    c_all = np.exp(1j * ang) * fv[None, :]
    c_all[:, 0] = 0.0
    b, v = Phi.b, Phi.v
    per_k = np.zeros((R, K + 1))
    for k in range(K + 1):
        lo, hi = levels[k], levels[k + 1]
        p = table.primes[(table.primes > lo) & (table.primes <= min(hi, n_max))]
        if p.size == 0:
            continue
        m_max = int(math.floor(A * x * _SLACK / p[0]))
        smooth = table.largest[: m_max + 1] <= lo
        c = np.where(smooth[None, :], c_all[:, : m_max + 1], 0.0)
        pref = np.cumsum(c, axis=1)  # pref[:, m] = sum_{1 <= m' <= m}
        idx = np.minimum(np.floor(b[:, None] * x * _SLACK / p[None, :]).astype(np.int64), m_max)  # (J+1, P)
        inner = np.zeros((R, p.size), dtype=np.complex128)
        for j in range(1, b.size):
            inner += v[j - 1] * (pref[:, idx[j]] - pref[:, idx[j - 1]])
        gp = np.abs(fv[p]) ** 2
        per_k[:, k] = (np.abs(inner) ** 2 @ gp) / denom
    return Bracket(per_k.sum(axis=1), per_k)


def bracket_T(realization, F: MultiplicativeFunction, x: float, Phi: StepWeight, scheme: TruncationScheme, table: PrimeTable) -> tuple[float, np.ndarray]:
    """``T_{x,eps,delta}`` for one realization with its per-``k`` breakdown."""
    br = bracket_terms(realization, F, x, Phi, scheme, table)
    return float(br.total[0]), br.per_k[0]


def v_hat(source, F: MultiplicativeFunction, y: float, r: float, Phi: StepWeight, grid: Grid, table: PrimeTable, tail_tol: float = 1e-2, batch: int = 16) -> np.ndarray:
    """``(1/2pi) int |K_Phi(1/2 + is)|^2 m_{y, y^(1/r)}(ds)`` per replicate, plus the weight beyond the grid.

    The weight outside the grid is added with density 1, its expectation.
    """
    if abs(grid.lo + grid.hi) > 1e-12:
        raise ValueError("grid must be symmetric about 0")
    tail = mellin_tail_weight(Phi, grid.hi)
    if tail > tail_tol:
        raise PrecisionError(f"Mellin tail weight {tail:.3e} beyond |s| > {grid.hi} exceeds {tail_tol}")
    log.debug("Mellin tail weight %.3e", tail)
    s = grid.nodes
    wk = np.abs(mellin_K(Phi, 0.5 + 1j * s)) ** 2 * grid.spacing / (2 * math.pi)
    t = y ** (1.0 / r)
    params = ChaosParams(y, t if t >= 3 else 3.0)
    if _is_single(source):
        dens = m_density(source, F, params, s, table)[0]
        return dens @ wk + tail
    seeds = np.asarray(source, dtype=np.uint64)
    out = np.empty(seeds.size)
    for a in range(0, seeds.size, batch):
        dens = m_density(seeds[a : a + batch], F, params, s, table)[0]
        out[a : a + batch] = dens @ wk + tail
    return out


def v_infty_estimator(realization, F: MultiplicativeFunction, y: float, r: float, Phi: StepWeight, grid: Grid, table: PrimeTable, tail_tol: float = 1e-2) -> float:
    return float(v_hat(realization, F, y, r, Phi, grid, table, tail_tol)[0])


def lindeberg_fourth(seeds, F: MultiplicativeFunction, x: float, Phi: StepWeight, scheme: TruncationScheme, table: PrimeTable) -> MCEstimate:
    """Monte Carlo ``sum_{p > x^eps} E|Z'_{x,p}|^4`` over the given replicate seeds."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    vals = np.array(
        [np.sum(np.abs(truncated_sum(SteinhausRealization(int(s)), F, x, Phi, scheme, table).per_prime) ** 4) for s in seeds]
    )
    n = vals.size
    mean = math.fsum(vals) / n
    se = math.sqrt(math.fsum((vals - mean) ** 2) / (n - 1) / n) if n > 1 else math.nan
    return MCEstimate(mean, se, n)
