"""The theta-Dickman function and the analytic constants built from it.

``rho_theta`` solves ``t rho(t) = theta * int_{t-1}^t rho(v) dv`` for ``t > 1``
with ``rho(t) = t**(theta-1)/Gamma(theta)`` on ``(0, 1]``. On ``[1, 2]`` the
equation is a linear first-order ODE for ``u(t) = int_1^t rho`` whose solution
is closed form in terms of a Gauss hypergeometric function; beyond ``t = 2``
the delay equation is stepped with the trapezoidal rule.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import PrecisionError, RangeError
from .multfunc import EULER_GAMMA, ein


def _check_theta(theta: float) -> None:
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")


def rho_closed_form(theta: float, t) -> np.ndarray:
    """``rho_theta(t)`` for ``0 < t <= 2`` in closed form."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0) or np.any(t > 2.0 + 1e-12):
        raise RangeError("closed form covers 0 < t <= 2")
    out = np.empty_like(t)
    low = t <= 1.0
    out[low] = t[low] ** (theta - 1.0) / special.gamma(theta)
    tt = t[~low]
    out[~low] = (theta * _u(theta, tt) + (1.0 - (tt - 1.0) ** theta) / special.gamma(theta)) / tt
    return out


def _u(theta: float, t: np.ndarray) -> np.ndarray:
    """``int_1^t rho_theta`` for ``1 <= t <= 2``."""
    z = 1.0 - 1.0 / t
    j = z ** (theta + 1.0) / (theta + 1.0) * special.hyp2f1(1.0, theta + 1.0, theta + 2.0, z)
    return t**theta / special.gamma(theta) * (-np.expm1(-theta * np.log(t)) / theta - j)


def _cumulative_closed_form(theta: float, t: np.ndarray) -> np.ndarray:
    """``int_0^t rho_theta`` for ``0 <= t <= 2``."""
    t = np.asarray(t, dtype=np.float64)
    g1 = special.gamma(theta + 1.0)
    return np.where(t <= 1.0, t**theta / g1, 1.0 / g1 + _u(theta, np.maximum(t, 1.0)))


@dataclass(frozen=True, eq=False)
class DickmanTable:
    """``rho_theta`` sampled at ``t_n = n h`` for ``n = 1..N``.

    ``cumulative[n]`` holds ``int_0^{t_n} rho_theta``; index 0 corresponds to
    ``t = 0`` and ``values[0]`` is a placeholder.
    """

    theta: float
    h: float
    t: np.ndarray
    values: np.ndarray
    cumulative: np.ndarray

    @property
    def steps_per_unit(self) -> int:
        return int(round(1.0 / self.h))

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def rho(self, t) -> np.ndarray:
        """Evaluate ``rho_theta``: exact on ``(0, 2]``, linear interpolation beyond."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t > self.t_max * (1 + 1e-12)):
            raise RangeError(f"t beyond table range {self.t_max}")
        out = np.empty_like(t)
        low = t <= 2.0
        if np.any(low):
            out[low] = rho_closed_form(self.theta, t[low])
        out[~low] = np.interp(t[~low], self.t, self.values)
        return out

    def tail_bound(self, T: float) -> float:
        """Upper bound for ``int_T^inf rho_theta`` (valid for ``T > theta``).

        Integrating the delay equation over ``[T, inf)`` gives
        ``(T - theta) int_T^inf rho <= theta int_{T-1}^T rho = T rho(T)``.
        """
        return float(self.rho(T)) / (1.0 - self.theta / T)

    def delay_residual(self) -> tuple[np.ndarray, np.ndarray]:
        """``|t rho(t) - theta int_{t-1}^t rho|`` at grid points ``t >= 2``.

        The window integral uses exact values below 2 and composite Simpson
        above, so it is accurate well beyond the ``O(h^2)`` of the stepping.
        Only points an even number of steps past 2 are returned.
        """
        M = self.steps_per_unit
        n0 = 2 * M
        v = self.values[n0:]
        simpson_cum = np.zeros(v.size)
        # Simpson cumulative at even offsets from t = 2
        pair = (v[:-2:2] + 4.0 * v[1:-1:2] + v[2::2]) * (self.h / 3.0)
        simpson_cum[2::2] = np.cumsum(pair)
        c2 = float(_cumulative_closed_form(self.theta, np.array(2.0)))
        idx = np.arange(n0, self.t.size, 2)
        upper = c2 + simpson_cum[idx - n0]
        lower_idx = idx - M
        lower = np.where(
            lower_idx <= n0,
            _cumulative_closed_form(self.theta, np.minimum(self.t[lower_idx], 2.0)),
            c2 + simpson_cum[np.maximum(lower_idx - n0, 0)],
        )
        res = np.abs(self.t[idx] * self.values[idx] - self.theta * (upper - lower))
        return self.t[idx], res


def dickman_rho(theta: float, t_max: float, h: float = 1e-3) -> DickmanTable:
    """Tabulate ``rho_theta`` on ``(0, t_max]`` with step ``h``.

    ``1/h`` must be an even integer so that windows of length one and Simpson
    panels align with the grid.
    """
    _check_theta(theta)
    if h > 1e-3 + 1e-15:
        raise ValueError(f"step h must be <= 1e-3, got {h}")
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    M = int(round(1.0 / h))
    if abs(M * h - 1.0) > 1e-9 or M % 2:
        raise ValueError("1/h must be an even integer")
    h = 1.0 / M
    N = int(math.ceil(t_max * M - 1e-9))
    t = np.arange(N + 1) * h

    vals = np.empty(N + 1)
    cum = np.empty(N + 1)
    vals[0] = np.inf if theta < 1 else 1.0
    cum[0] = 0.0
    head = min(N, 2 * M)
    vals[1 : head + 1] = rho_closed_form(theta, t[1 : head + 1])
    cum[1 : head + 1] = _cumulative_closed_form(theta, t[1 : head + 1])

    if N > 2 * M:
        v = vals.tolist()
        c = cum.tolist()
        half = 0.5 * h
        for n in range(2 * M + 1, N + 1):
            r = theta * (c[n - 1] + half * v[n - 1] - c[n - M]) / (t[n] - theta * half)
            v[n] = r
            c[n] = c[n - 1] + half * (v[n - 1] + r)
        vals = np.array(v)
        cum = np.array(c)

    for arr in (t, vals, cum):
        arr.setflags(write=False)
    return DickmanTable(theta, h, t, vals, cum)


@functools.lru_cache(maxsize=16)
def default_table(theta: float, t_max: float = 24.0, h: float = 1e-3) -> DickmanTable:
    return dickman_rho(theta, t_max, h)


def integrate_rho(table: DickmanTable, weight, lo: float, hi: float, tail_tol: float = 1e-12) -> float:
    """``int_lo^hi rho_theta(v) weight(v) dv`` for a bounded weight with ``0 <= weight <= 1`` beyond ``t_max``.

    The power singularity at 0 is integrated with an algebraic quadrature
    weight; ``[1, 2]`` uses the closed form and ``[2, hi]`` interpolated values.
    Mass beyond the table end is bounded by :meth:`DickmanTable.tail_bound`.
    """
    theta = table.theta
    if lo < 0 or hi < lo:
        raise ValueError("need 0 <= lo <= hi")
    total = 0.0
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    if lo < 1.0:
        b = min(hi, 1.0)
        if lo == 0.0:
            val, _ = integrate.quad(lambda v: weight(v), 0.0, b, weight="alg", wvar=(theta - 1.0, 0.0), **opts)
            total += val / special.gamma(theta)
        else:
            val, _ = integrate.quad(lambda v: weight(v) * v ** (theta - 1.0), lo, b, **opts)
            total += val / special.gamma(theta)
    if hi > 1.0 and lo < 2.0:
        a, b = max(lo, 1.0), min(hi, 2.0)
        val, _ = integrate.quad(lambda v: weight(v) * float(rho_closed_form(theta, np.array(v))), a, b, **opts)
        total += val
    if hi > 2.0:
        a, b = max(lo, 2.0), min(hi, table.t_max)
        if b > a:
            grid = np.linspace(a, b, max(3, int(math.ceil((b - a) / table.h)) + 1))
            w = np.vectorize(weight, otypes=[float])(grid)
            total += float(integrate.simpson(table.rho(grid) * w, x=grid))
        if hi > table.t_max:
            tail = table.tail_bound(table.t_max)
            if tail > tail_tol:
                raise PrecisionError(f"rho tail beyond t_max={table.t_max} is {tail:.2e} > {tail_tol:.0e}")
    return total


def dickman_laplace(theta: float, r: float, table: DickmanTable | None = None, tail_tol: float = 1e-12):
    """Both sides of ``int_0^inf e^{-rv} rho_theta(v) dv = exp(theta*gamma - theta*Ein(r))``.

    Returns ``(lhs, rhs)``; ``lhs`` is by quadrature against the table and
    ``rhs`` by quadrature of the exponent.
    """
    _check_theta(theta)
    if r < 0:
        raise ValueError("r must be >= 0")
    table = default_table(theta) if table is None else table
    tail = math.exp(-r * table.t_max) * table.tail_bound(table.t_max)
    if tail > tail_tol:
        raise PrecisionError(f"Laplace tail beyond t_max={table.t_max} is {tail:.2e} > {tail_tol:.0e}")
    head = 1.0 / special.gamma(theta + 1.0) if r == 0 else special.gammainc(theta, r) / r**theta
    rest = integrate_rho(table, lambda v: math.exp(-r * v), 1.0, table.t_max)
    lhs = head + rest
    rhs = math.exp(theta * EULER_GAMMA - theta * ein(r))
    return lhs, rhs


def truncation_K(eps: float, delta: float) -> int:
    """``floor((1 - eps)/delta)``, guarded against round-off at exact multiples."""
    q = (1.0 - eps) / delta
    k = math.floor(q)
    if abs(q - round(q)) < 1e-12:
        k = int(round(q))
    return int(k)


def c_k(theta: float, eps: float, delta: float, k: int, table: DickmanTable | None = None) -> float:
    """Contribution of the ``k``-th prime range to the bracket limit constant."""
    table = default_table(theta) if table is None else table
    a = eps + k * delta
    lo = max((1.0 - (a + delta)) / a, 0.0)
    hi = max((1.0 - a) / a, 0.0)
    if hi <= lo:
        return 0.0
    if 1.0 - a * hi <= 0:
        raise RuntimeError("integrand singular inside the integration range")
    val = integrate_rho(table, lambda v: 1.0 / (1.0 - a * v), lo, hi)
    return special.gamma(theta + 1.0) * a**theta * val


def c_eps_delta(theta: float, eps: float, delta: float, table: DickmanTable | None = None) -> float:
    """Sum of :func:`c_k` over ``k = 0..K``."""
    _check_theta(theta)
    if not 0.0 < eps < 1.0 or not 0.0 < delta < 1.0 - eps:
        raise ValueError("need 0 < eps < 1 and 0 < delta < 1 - eps")
    return math.fsum(c_k(theta, eps, delta, k, table) for k in range(truncation_K(eps, delta) + 1))


def c_eps_limit(theta: float, eps: float, table: DickmanTable | None = None) -> float:
    """``Gamma(theta+1) int_0^{1/eps - 1} rho_theta(v) (1+v)^(-theta) dv``."""
    _check_theta(theta)
    if not 0.0 < eps < 1.0:
        raise ValueError("need 0 < eps < 1")
    table = default_table(theta) if table is None else table
    hi = 1.0 / eps - 1.0
    val = integrate_rho(table, lambda v: (1.0 + v) ** (-theta), 0.0, hi)
    return special.gamma(theta + 1.0) * val
