"""Straight-line mpmath transcriptions of the bound formulas.

Kept independent of the package: no imports from gibbs_bounds.
"""

from mpmath import mp, mpf, sqrt, log, exp, e, ceil

mp.dps = 50


def eps_hat(m, n, j, d):
    m, n, j, d = mpf(m), mpf(n), mpf(j), mpf(d)
    if d == 0:
        return mpf(1)
    arg = m / d if j <= 1 else m / (d * j)
    if arg <= 1:
        return mpf(0)
    return min(sqrt(log(arg) / (2 * n)), mpf(1))


def telescoping(m, n, s, js, ds):
    s = mpf(s)
    t = len(js)
    total = sum(mpf(j) for j in js)
    value = (1 - total / s) * eps_hat(m, n, total, ds[0])
    for h in range(t):
        rest = sum(mpf(j) for j in js[h + 1 :])
        value += mpf(js[h]) / s * eps_hat(m, n, rest, ds[h + 1])
    return value


def epsilon_star(m, n, s, delta, c):
    c, delta = mpf(c), mpf(delta)
    t = max(1, int(ceil(log(2 * mpf(n)) / (2 * c))))
    value = sum(
        exp(-c * (i - 1)) * eps_hat(m, n, mpf(s) / exp(c * i), (e - 1) * delta / exp(i))
        for i in range(1, t + 1)
    )
    return value + exp(-c * t)


def analytic(m, n, s, delta, c):
    c = mpf(c)
    k = exp(c) / (exp(c) - 1)
    return (sqrt(log(mpf(m) / s) + log(1 / mpf(delta))) * k + sqrt(c + 1) * k**2 + 1) / sqrt(
        2 * mpf(n)
    )
