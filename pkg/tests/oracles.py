"""Exhaustive-enumeration references for the truncated sum and the bracket."""

import math

from conftest import largest_prime, trial_factor


def step_value(breakpoints, values, u):
    for j in range(1, len(breakpoints)):
        if breakpoints[j - 1] < u <= breakpoints[j] * (1 + 1e-12):
            return values[j - 1]
    return 0.0


def alpha_of(n, prime_alpha):
    out = 1.0 + 0.0j
    for p, a in trial_factor(n):
        out *= prime_alpha(p) ** a
    return out


def f_of(n, F):
    out = 1.0 + 0.0j
    for p, a in trial_factor(n):
        out *= complex(F.at(p, a))
    return out


def brute_truncated(x, eps, delta, bps, vals, F, prime_alpha):
    A = bps[-1]
    n_max = int(math.floor(A * x * (1 + 1e-12)))
    norm = math.sqrt(sum(abs(f_of(n, F)) ** 2 for n in range(1, int(x) + 1)))
    K = 0
    while x ** (eps + (K + 1) * delta) < A * x:
        K += 1
    levels = [x ** (eps + k * delta) for k in range(K + 2)]
    kept = dropped = 0.0
    for n in range(1, n_max + 1):
        term = alpha_of(n, prime_alpha) * f_of(n, F) * step_value(bps, vals, n / x) / norm
        keep = False
        if n > 1:
            P = largest_prime(n)
            Q = largest_prime(n // P)
            for k in range(K + 1):
                if levels[k] < P <= levels[k + 1] and Q <= levels[k]:
                    keep = True
        if keep:
            kept += term
        else:
            dropped += term
    return kept, dropped, K


def brute_bracket(x, eps, delta, bps, vals, F, prime_alpha):
    A = bps[-1]
    n_max = int(math.floor(A * x * (1 + 1e-12)))
    denom = sum(abs(f_of(n, F)) ** 2 for n in range(1, int(x) + 1))
    K = 0
    while x ** (eps + (K + 1) * delta) < A * x:
        K += 1
    levels = [x ** (eps + k * delta) for k in range(K + 2)]
    total = 0.0
    for k in range(K + 1):
        for p in range(2, n_max + 1):
            if largest_prime(p) != p or not levels[k] < p <= levels[k + 1]:
                continue
            inner = 0.0
            for m in range(1, n_max // p + 1):
                if largest_prime(m) <= levels[k]:
                    inner += f_of(m, F) * alpha_of(m, prime_alpha) * step_value(bps, vals, m * p / x)
            total += abs(complex(F.at(p, 1))) ** 2 * abs(inner) ** 2
    return total / denom
