"""Wigner 3j and 6j symbols from the Racah factorial sums.

Sums are carried out in exact rational arithmetic; the only rounding happens in
the final square root. Arguments may be ints, floats or Fractions as long as
they are integers or half-integers.
"""

from fractions import Fraction
from functools import lru_cache
from math import factorial, sqrt


def _twice(x):
    t = 2 * Fraction(x).limit_denominator(4)
    if t.denominator != 1:
        raise ValueError(f"{x!r} is not an integer or half-integer")
    return int(t)


def _triangle_ok(a, b, c):
    # doubled arguments
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


def _delta(a, b, c):
    """Triangle coefficient for doubled arguments, as an exact Fraction."""
    return Fraction(
        factorial((a + b - c) // 2) * factorial((a - b + c) // 2) * factorial((-a + b + c) // 2),
        factorial((a + b + c) // 2 + 1),
    )


def _signed_sqrt(square, sign):
    value = sqrt(square.numerator) / sqrt(square.denominator)
    return value if sign > 0 else -value


@lru_cache(maxsize=65536)
def _w3j(j1, j2, j3, m1, m2, m3):
    if m1 + m2 + m3 != 0:
        return 0.0
    if not _triangle_ok(j1, j2, j3):
        return 0.0
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        if abs(m) > j or (j + m) % 2:
            return 0.0
    # everything below is in plain (undoubled) integers
    a = (j1 + j2 - j3) // 2
    b = (j1 - m1) // 2
    c = (j2 + m2) // 2
    d = (j3 - j2 + m1) // 2
    e = (j3 - j1 - m2) // 2
    tmin = max(0, -d, -e)
    tmax = min(a, b, c)
    total = Fraction(0)
    for t in range(tmin, tmax + 1):
        den = (factorial(t) * factorial(d + t) * factorial(e + t)
               * factorial(a - t) * factorial(b - t) * factorial(c - t))
        total += Fraction((-1) ** t, den)
    if total == 0:
        return 0.0
    pref = _delta(j1, j2, j3)
    for j, m in ((j1, m1), (j2, m2), (j3, m3)):
        pref *= factorial((j + m) // 2) * factorial((j - m) // 2)
    phase = (j1 - j2 - m3) // 2
    sign = (-1) ** phase * (1 if total > 0 else -1)
    return _signed_sqrt(pref * total * total, sign)


@lru_cache(maxsize=65536)
def _w6j(j1, j2, j3, j4, j5, j6):
    triads = ((j1, j2, j3), (j1, j5, j6), (j4, j2, j6), (j4, j5, j3))
    if not all(_triangle_ok(*t) for t in triads):
        return 0.0
    s = [sum(t) // 2 for t in triads]
    q = [(j1 + j2 + j4 + j5) // 2, (j2 + j3 + j5 + j6) // 2, (j3 + j1 + j6 + j4) // 2]
    total = Fraction(0)
    for t in range(max(s), min(q) + 1):
        den = factorial(t - s[0]) * factorial(t - s[1]) * factorial(t - s[2]) * factorial(t - s[3])
        den *= factorial(q[0] - t) * factorial(q[1] - t) * factorial(q[2] - t)
        total += Fraction((-1) ** t * factorial(t + 1), den)
    if total == 0:
        return 0.0
    pref = Fraction(1)
    for t in triads:
        pref *= _delta(*t)
    return _signed_sqrt(pref * total * total, 1 if total > 0 else -1)


def wigner3j(j1, j2, j3, m1, m2, m3):
    """3j symbol (j1 j2 j3; m1 m2 m3). Selection-rule violations give 0.0."""
    return _w3j(*(_twice(v) for v in (j1, j2, j3, m1, m2, m3)))


def wigner6j(j1, j2, j3, j4, j5, j6):
    """6j symbol {j1 j2 j3; j4 j5 j6}. Triangle violations give 0.0."""
    return _w6j(*(_twice(v) for v in (j1, j2, j3, j4, j5, j6)))


def clebsch_gordan(j1, m1, j2, m2, j, m):
    """<j1 m1; j2 m2 | j m> in the Condon-Shortley convention."""
    phase = _twice(j1 - j2 + m) // 2
    return (-1) ** phase * sqrt(2 * j + 1) * wigner3j(j1, j2, j, m1, m2, -m)
