"""Shared plumbing: exceptions, interval/lattice helpers, summation."""

import math
from fractions import Fraction

# Absolute tolerance used everywhere a strict inequality meets binary64
# data (real weights, float thresholds).  Exact code paths ignore it.
STRICT_TOL = 1e-12

DEFAULT_BUDGET = 10 ** 9


class ValidationError(ValueError):
    """Bad user input: malformed file, out-of-range index, bad flag."""


class BudgetExceededError(RuntimeError):
    """An enumeration would visit more points than the configured budget."""

    def __init__(self, needed, budget, what="enumeration"):
        super().__init__(
            f"{what} needs ~{needed:.3g} points, budget is {budget:.3g}")
        self.needed = needed
        self.budget = budget


def parse_rational(tok):
    """Parse 'p/q' or a plain integer/decimal into a Fraction."""
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"bad rational {tok!r}") from exc


def open_sym_bound(B):
    """Largest integer magnitude strictly inside (-B, B).

    Integer B=3 gives 2; B=2.5 gives 2.  B <= 1 admits only 0.
    """
    B = Fraction(B) if not isinstance(B, Fraction) else B
    c = math.ceil(B)
    return c - 1 if c == B else math.floor(B)


def scaled_interval_range(lo, hi, P):
    """Integer n with lo <= n/P <= hi, for exact rational lo/hi and P > 0.

    Returns (nmin, nmax); empty interval encodes as nmin > nmax.
    """
    Pf = Fraction(P)
    nmin = math.ceil(lo * Pf)
    nmax = math.floor(hi * Pf)
    return nmin, nmax


def dist_to_int_fraction(x):
    """Distance to the nearest integer, exact for Fractions.

    Ties at half-integers round half-to-even, so dist(1/2) = 1/2 either way.
    """
    x = Fraction(x)
    fl = x - math.floor(x)
    return min(fl, 1 - fl)


def dist_to_int_float(x):
    r = x - round(x)  # round-half-even
    return abs(r)


class KahanComplex:
    """Compensated accumulator for complex sums."""

    __slots__ = ("re", "im", "cre", "cim")

    def __init__(self):
        self.re = self.im = 0.0
        self.cre = self.cim = 0.0

    def add(self, z):
        yr = z.real - self.cre
        tr = self.re + yr
        self.cre = (tr - self.re) - yr
        self.re = tr
        yi = z.imag - self.cim
        ti = self.im + yi
        self.cim = (ti - self.im) - yi
        self.im = ti

    def value(self):
        return complex(self.re, self.im)


def primes_up_to(n):
    if n < 2:
        return []
    sieve = bytearray([1]) * (n + 1)
    sieve[0] = sieve[1] = 0
    for i in range(2, int(n ** 0.5) + 1):
        if sieve[i]:
            sieve[i * i::i] = bytearray(len(sieve[i * i::i]))
    return [i for i in range(2, n + 1) if sieve[i]]


def is_prime(n):
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True
