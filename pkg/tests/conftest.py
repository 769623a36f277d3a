import math

import numpy as np
import pytest

from rmfchaos.primes import build_prime_table


@pytest.fixture(scope="session")
def table():
    return build_prime_table(1_000_000)


@pytest.fixture(scope="session")
def small_table():
    return build_prime_table(10_000)


def trial_primes(n):
    return [k for k in range(2, n + 1) if all(k % d for d in range(2, int(math.isqrt(k)) + 1))]


def trial_factor(n):
    out, d = [], 2
    while d * d <= n:
        a = 0
        while n % d == 0:
            n //= d
            a += 1
        if a:
            out.append((d, a))
        d += 1
    if n > 1:
        out.append((n, 1))
    return out


def largest_prime(n):
    f = trial_factor(n)
    return f[-1][0] if f else 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    def _report(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
