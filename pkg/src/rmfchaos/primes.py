"""Prime tables, factorization and smooth-number enumeration.

A :class:`PrimeTable` stores the smallest prime factor of every integer up to
its limit together with a few arrays derived from it (largest prime factor,
second largest prime factor counted with multiplicity, the exact power of the
smallest prime). Every other module indexes these arrays instead of factoring
integers one by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import RangeError, ResourceError

INT64_MAX = 2**63 - 1
DEFAULT_MEMORY_BUDGET = 4 * 1024**3  # bytes
_BYTES_PER_ENTRY = 4 * 4 + 1  # spf, ppow, largest, second (int32) + pexp (int8)


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """Sieve output for ``2 <= n <= limit``.

    Attributes:
        limit: Largest integer covered.
        primes: Ascending int64 array of all primes ``<= limit``.
        spf: ``spf[n]`` is the smallest prime factor of ``n`` (``spf[1] = 1``).
        ppow: ``ppow[n]`` is the largest power of ``spf[n]`` dividing ``n``.
        pexp: exponent of ``spf[n]`` in ``n``.
        largest: ``largest[n] = P(n)``, the largest prime factor (``P(1) = 1``).
        second: ``second[n] = P(n / P(n))``.
    """

    limit: int
    primes: np.ndarray
    spf: np.ndarray
    ppow: np.ndarray
    pexp: np.ndarray
    largest: np.ndarray
    second: np.ndarray

    def primes_upto(self, y: float) -> np.ndarray:
        if y > self.limit:
            raise RangeError(f"primes up to {y} requested but table limit is {self.limit}")
        return self.primes[: np.searchsorted(self.primes, math.floor(y), side="right")]

    def check(self, n: int) -> None:
        if n > INT64_MAX:
            raise RangeError(f"{n} exceeds the 64-bit integer range")
        if n < 1 or n > self.limit:
            raise RangeError(f"n={n} outside table range [1, {self.limit}]")


@dataclass(frozen=True)
class Factorization:
    """Prime factorization as ascending ``(p, a_p)`` pairs."""

    entries: tuple[tuple[int, int], ...]

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def value(self) -> int:
        out = 1
        for p, a in self.entries:
            out *= p**a
        return out


def _smallest_prime_factors(n_max: int) -> np.ndarray:
    spf = np.zeros(n_max + 1, dtype=np.int32)
    for p in range(2, math.isqrt(n_max) + 1):
        if spf[p] == 0:
            block = spf[p * p :: p]
            block[block == 0] = p
    idx = np.flatnonzero(spf == 0)
    spf[idx] = idx
    spf[0] = 0
    spf[1] = 1
    return spf


def build_prime_table(n_max: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> PrimeTable:
    """Sieve smallest prime factors up to ``n_max`` and derive factor tables.

    The derived arrays are filled block by block over dyadic ranges
    ``[2^j, 2^{j+1})``: for ``n`` in such a block the cofactor ``n // spf[n]``
    lies below ``2^j`` and is already known, so each block is one vectorised
    step.

    Raises:
        RangeError: if ``n_max < 2`` or exceeds the 64-bit range.
        ResourceError: if the tables would not fit in ``memory_budget`` bytes.
    """
    if n_max > INT64_MAX:
        raise RangeError(f"N_max={n_max} exceeds the 64-bit integer range")
    if n_max < 2:
        raise RangeError(f"N_max must be >= 2, got {n_max}")
    need = (n_max + 1) * _BYTES_PER_ENTRY
    if need > memory_budget or n_max >= 2**31 - 1:
        raise ResourceError(
            f"prime table up to {n_max} needs ~{need} bytes, over the memory budget of {memory_budget} bytes"
        )

    spf = _smallest_prime_factors(n_max)
    size = n_max + 1
    ppow = np.ones(size, dtype=np.int32)
    pexp = np.zeros(size, dtype=np.int8)
    largest = np.ones(size, dtype=np.int32)
    second = np.ones(size, dtype=np.int32)

    lo = 2
    while lo <= n_max:
        hi = min(2 * lo, size)
        n = np.arange(lo, hi, dtype=np.int64)
        p = spf[lo:hi].astype(np.int64)
        q = n // p
        same = spf[q] == p
        ppow[lo:hi] = np.where(same, ppow[q].astype(np.int64) * p, p)
        pexp[lo:hi] = np.where(same, pexp[q] + 1, 1)
        unit = q == 1
        largest[lo:hi] = np.where(unit, p, largest[q])
        second[lo:hi] = np.where(unit, 1, np.maximum(p, second[q]))
        lo = hi

    primes = np.flatnonzero(spf == np.arange(size)).astype(np.int64)
    primes = primes[primes >= 2]
    for arr in (primes, spf, ppow, pexp, largest, second):
        arr.setflags(write=False)
    return PrimeTable(n_max, primes, spf, ppow, pexp, largest, second)


def factor(n: int, table: PrimeTable) -> Factorization:
    """Factor ``1 <= n <= table.limit`` by repeated smallest-prime lookup."""
    table.check(n)
    entries = []
    n = int(n)
    while n > 1:
        p = int(table.spf[n])
        a = int(table.pexp[n])
        entries.append((p, a))
        n //= int(table.ppow[n])
    return Factorization(tuple(entries))


def smooth_numbers(x: float, y: float, table: PrimeTable) -> np.ndarray:
    """All ``n <= x`` whose prime factors are ``<= y``, ascending.

    Built by multiplying the running set by successive powers of each prime,
    so the cost is proportional to the output size.
    """
    if x < 1:
        raise RangeError(f"x must be >= 1, got {x}")
    if y < 2:
        raise RangeError(f"y must be >= 2, got {y}")
    xi = math.floor(x)
    if xi > INT64_MAX:
        raise RangeError(f"x={x} exceeds the 64-bit integer range")
    out = np.ones(1, dtype=np.int64)
    for p in table.primes_upto(min(y, xi)) if min(y, xi) >= 2 else ():
        p = int(p)
        parts = [out]
        cur = out[out <= xi // p]
        while cur.size:
            cur = cur * p
            parts.append(cur)
            cur = cur[cur <= xi // p]
        out = np.concatenate(parts)
    out.sort()
    return out
