"""Directed-rounding arithmetic helpers.

Every estimated quantity in this package is produced with a stated rounding
direction: values feeding an upper bound are rounded up, values feeding a
lower bound are rounded down.  Rational expressions are evaluated exactly;
irrational ones (x^e with fractional e, exp, log) are bracketed between two
rationals whose gap is a few parts in 2^96, via integer k-th roots or mpmath
at escalating precision.
"""

from __future__ import annotations

import math
import sys
from fractions import Fraction
from typing import Callable, Tuple

import gmpy2
import mpmath

Interval = Tuple[Fraction, Fraction]

#: scale denominator for rational-power brackets (granularity 2^-96 relative)
_POW_SCALE_BITS = 96


def ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


def iroot_floor(n: int, k: int) -> int:
    """Largest t >= 0 with t**k <= n (n >= 0, k >= 1)."""
    if n < 0:
        raise ValueError("iroot_floor needs n >= 0")
    if k == 1:
        return n
    root, _exact = gmpy2.iroot(gmpy2.mpz(n), k)
    return int(root)


def iroot_ceil(n: int, k: int) -> int:
    """Smallest t >= 0 with t**k >= n."""
    if n <= 0:
        return 0
    root, exact = gmpy2.iroot(gmpy2.mpz(n), k)
    return int(root) if exact else int(root) + 1


def ceil_rat_pow(x: Fraction, e: Fraction) -> int:
    """Exact ceil(x**e) for rational x > 0 and rational e > 0.

    Minimal integer t with t**w >= x**u (e = u/w): integer arithmetic only,
    so modulus breakpoints like (1/0.01)^4 = 10^8 come out exact.
    """
    if x <= 0 or e <= 0:
        raise ValueError("ceil_rat_pow needs x > 0 and e > 0")
    u, w = e.numerator, e.denominator
    p = x**u  # Fraction, exact
    c = ceil_frac(p)
    t = iroot_ceil(c, w)
    # minimality: (t-1)**w is an integer <= c-1 < x**u whenever p > c-1
    return t


def pow_frac_up(x: Fraction, e: Fraction) -> Fraction:
    """Rational upper bound on x**e (x > 0), tight to ~2^-96 relative."""
    lo, hi = pow_frac_bracket(x, e)
    return hi


def pow_frac_down(x: Fraction, e: Fraction) -> Fraction:
    lo, hi = pow_frac_bracket(x, e)
    return lo


def pow_frac_bracket(x: Fraction, e: Fraction) -> Interval:
    """Certified rational bracket of x**e for rational x > 0, any rational e."""
    if x <= 0:
        raise ValueError("pow_frac_bracket needs x > 0")
    if e == 0:
        return Fraction(1), Fraction(1)
    if e < 0:
        lo, hi = pow_frac_bracket(x, -e)
        return 1 / hi, 1 / lo
    u, w = e.numerator, e.denominator
    p = x**u
    if w == 1:
        return p, p
    # (num/den)^(1/w) scaled by S = 2^_POW_SCALE_BITS
    s = 1 << _POW_SCALE_BITS
    num = p.numerator * s**w
    den = p.denominator
    q_lo = num // den
    t_hi = iroot_ceil(q_lo + 1, w)  # q_lo+1 > num/den, so t_hi^w > exact value
    t_lo = iroot_floor(q_lo, w)
    return Fraction(t_lo, s), Fraction(t_hi, s)


def _frac_from_mpf(v) -> Fraction:
    """Exact Fraction value of an mpmath mpf (dyadic rational)."""
    sign, man, exp, _bc = v._mpf_
    if man == 0:
        if exp == 0:
            return Fraction(0)
        raise ValueError("non-finite mpf")
    m = int(man) if sign == 0 else -int(man)
    if exp >= 0:
        return Fraction(m << exp)
    return Fraction(m, 1 << -exp)


def _mp_bracket(fn: Callable, x: Fraction, prec: int) -> Interval:
    """Bracket fn(x) by evaluating at precision prec and padding 4 ulps."""
    with mpmath.workprec(prec):
        xv = mpmath.mpf(x.numerator) / mpmath.mpf(x.denominator)
        v = fn(xv)
        pad = abs(v) * mpmath.mpf(2) ** (8 - prec) + mpmath.mpf(2) ** (-prec)
        lo = _frac_from_mpf(v - pad)
        hi = _frac_from_mpf(v + pad)
    return lo, hi


def exp_bracket(x: Fraction) -> Interval:
    """Certified rational bracket of e**x for rational x."""
    if x == 0:
        return Fraction(1), Fraction(1)
    # precision must cover the integer part of the result
    int_bits = max(0, int(float(x) * 1.4427)) + 16
    if int_bits > 4_000_000:
        raise OverflowError("exp_bracket: result too large to bracket exactly")
    return _mp_bracket(mpmath.exp, x, int_bits + 128)


def ln_bracket(x: Fraction) -> Interval:
    """Certified rational bracket of ln(x), exact 0 at x == 1."""
    if x <= 0:
        raise ValueError("ln_bracket needs x > 0")
    if x == 1:
        return Fraction(0), Fraction(0)
    nbits = x.numerator.bit_length() + x.denominator.bit_length()
    if nbits > 100_000:
        # split off a power of two: ln(m * 2^s) = ln m + s ln 2
        return _ln_big_bracket(x)
    return _mp_bracket(mpmath.log, x, 192 + int(math.log2(nbits + 1)) * 8)


def _ln_big_bracket(x: Fraction) -> Interval:
    num_lo, num_hi = _ln_int_bracket(x.numerator)
    if x.denominator == 1:
        return num_lo, num_hi
    den_lo, den_hi = _ln_int_bracket(x.denominator)
    return num_lo - den_hi, num_hi - den_lo


def _ln_int_bracket(n: int) -> Interval:
    """Bracket ln(n) for a (possibly huge) positive integer."""
    if n <= 0:
        raise ValueError("ln of nonpositive integer")
    if n.bit_length() <= 4096:
        return _mp_bracket(mpmath.log, Fraction(n), 256)
    top = 256
    s = n.bit_length() - top
    m = n >> s  # n in [m*2^s, (m+1)*2^s)
    m_lo, _ = _mp_bracket(mpmath.log, Fraction(m), 384)
    _, m1_hi = _mp_bracket(mpmath.log, Fraction(m + 1), 384)
    ln2_lo, ln2_hi = _mp_bracket(mpmath.log, Fraction(2), 384)
    return m_lo + s * ln2_lo, m1_hi + s * ln2_hi


def ceil_bracket(lo: Fraction, hi: Fraction) -> int:
    """Ceil of a bracketed real; raises if the bracket straddles an integer."""
    c_lo, c_hi = ceil_frac(lo), ceil_frac(hi)
    if c_lo == c_hi:
        return c_lo
    raise ArithmeticError(f"bracket [{float(lo)}, {float(hi)}] straddles an integer")


def ceil_up(hi: Fraction) -> int:
    """Ceil of an upper bound: a sound over-approximation of the true ceil."""
    return ceil_frac(hi)


# ---------------------------------------------------------------------------
# Directed float helpers for magnitude-mode values.  math.log/exp on glibc are
# within a couple of ulps of correctly rounded; 8 ulps of padding covers that
# with a wide margin.


def _ulps_up(x: float, n: int = 8) -> float:
    for _ in range(n):
        x = math.nextafter(x, math.inf)
    return x


def _ulps_down(x: float, n: int = 8) -> float:
    for _ in range(n):
        x = math.nextafter(x, -math.inf)
    return x


def fadd_up(*xs: float) -> float:
    s = 0.0
    for x in xs:
        s = _ulps_up(s + x, 1)
    return s


def fmul_up(a: float, b: float) -> float:
    return _ulps_up(a * b, 1)


def fln_up(x: float) -> float:
    if x <= 0:
        raise ValueError("fln_up needs x > 0")
    return _ulps_up(math.log(x))


def fln_down(x: float) -> float:
    if x <= 0:
        raise ValueError("fln_down needs x > 0")
    return _ulps_down(math.log(x))


def fexp_up(x: float) -> float:
    try:
        v = math.exp(x)
    except OverflowError:
        return math.inf
    return math.inf if v == math.inf else _ulps_up(v)


def fexp_down(x: float) -> float:
    try:
        v = math.exp(x)
    except OverflowError:
        return sys.float_info.max
    return _ulps_down(v)
