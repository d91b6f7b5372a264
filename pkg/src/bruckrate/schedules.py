"""Parameter sequences, the subsequence f, its discrete inverse k*, and the
quantitative acceptably-paired moduli, including both worked families.

Family 1: lambda_n = n^-p, theta_n = n^-q with 0 < q < min{p, 1-p}; the
subsequence is f(n) = ceil(n^(d/(1-p))) for a derived exponent d > 1.
Family 2: lambda_n = 1/n, theta_n = 1/log log n (clamped into [0,1]) from
n = 3, zero before; f(n) = n^n.

Every modulus is evaluated in exact rational arithmetic when its exponents
are integral, else with upward-directed rounding before the ceiling; audits
report certified margins (rational lower/upper brackets), never bare floats.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import gmpy2
import numpy as np

from . import magnitude as mg
from .magnitude import Bound, MonotoneMap, PolyGrowth, TowerGrowth, promote
from .roundmath import (
    ceil_frac,
    ceil_rat_pow,
    exp_bracket,
    iroot_ceil,
    iroot_floor,
    ln_bracket,
    pow_frac_bracket,
)

Interval = tuple  # (Fraction lo, Fraction hi)


class ParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# certified window sums


def _sum_rel_envelope(terms: int) -> Fraction:
    # pairwise numpy summation + per-term pow error: about
    # (log2(n) + c) ulps of relative error, generously enveloped
    return Fraction(int(math.log2(max(terms, 2))) + 64, 2**53)


def _direct_pow_sum(a: int, b: int, exponent: float) -> Interval:
    """Certified bracket of sum_{j=a}^{b} j**exponent (exponent < 0)."""
    chunk = 4_000_000
    s = 0.0
    for lo in range(a, b + 1, chunk):
        hi = min(lo + chunk - 1, b)
        j = np.arange(lo, hi + 1, dtype=np.float64)
        s += float(np.sum(j**exponent))
    rel = _sum_rel_envelope(b - a + 1)
    sf = Fraction(s)
    return sf * (1 - rel), sf * (1 + rel)


def _exact_recip_sum(a: int, b: int, power: int) -> Fraction:
    """Exact sum_{j=a}^{b} 1/j**power via divide-and-conquer on gmpy2.mpq."""

    def rec(lo: int, hi: int):
        if hi - lo < 16:
            s = gmpy2.mpq(0)
            for j in range(lo, hi + 1):
                s += gmpy2.mpq(1, j**power)
            return s
        mid = (lo + hi) // 2
        return rec(lo, mid) + rec(mid + 1, hi)

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10_000))
    try:
        v = rec(a, b)
    finally:
        sys.setrecursionlimit(old)
    return Fraction(v.numerator, v.denominator)


# ---------------------------------------------------------------------------
# the pack interface


class ModuliPack:
    """Schedules (lambda_n), (theta_n), subsequence f, and the moduli
    (phi1, phi2, phi3, n0, delta) witnessing acceptable pairing."""

    family_tag: str = "abstract"
    n0: int = 1
    delta: Fraction = Fraction(0)
    f_start: int = 0
    omega: Optional[Callable[[Fraction], Fraction]] = None
    f_growth: mg.Growth = PolyGrowth.of(1, 2)
    f_affine: Optional[tuple] = None

    # schedules -------------------------------------------------------------
    def lam(self, n: int) -> float:
        raise NotImplementedError

    def theta(self, n: int) -> float:
        raise NotImplementedError

    def f(self, n: int) -> int:
        raise NotImplementedError

    # moduli ---------------------------------------------------------------
    def phi1(self, eps: Fraction) -> Bound:
        raise NotImplementedError

    def phi2(self, eps: Fraction) -> Bound:
        raise NotImplementedError

    def phi3(self, eps: Fraction) -> Bound:
        raise NotImplementedError

    # certified evaluations --------------------------------------------------
    def theta_interval(self, n: int) -> Interval:
        raise NotImplementedError

    def theta_threshold(self, eps: Fraction) -> Optional[int]:
        """Minimal n with theta_m <= eps for all m >= n, when computable."""
        return None

    def lam_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        """Certified bracket of sum lambda_j over [a, b]; None if infeasible."""
        raise NotImplementedError

    def lam_sq_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        raise NotImplementedError

    # magnitude-mode support -------------------------------------------------
    def f_bound_apply(self, b: Bound) -> Bound:
        return mg._apply_growth_mag(self.f_growth, b, b.provenance)

    def kstar_bound_apply(self, b: Bound) -> Bound:
        raise NotImplementedError

    def f_map(self) -> MonotoneMap:
        return MonotoneMap(
            f"f[{self.family_tag}]",
            self.f,
            self.f_growth,
            affine=self.f_affine,
            bound_apply=self.f_bound_apply,
            audit_monotone=False,
        )

    def f_max_index_for_digits(self, digit_cap: int) -> Optional[int]:
        """Largest n whose f(n) stays materializable, when bounded."""
        return None

    # misc -------------------------------------------------------------------
    def feasible_start(self, scan_limit: int = 100_000) -> Optional[int]:
        """First index from which lambda_n (1 + theta_n) <= 1 holds on the
        scanned prefix, or None if a violation persists to scan_limit."""
        last_bad = 0
        for n in range(1, scan_limit + 1):
            if self.lam(n) * (1.0 + self.theta(n)) > 1.0 + 1e-12:
                last_bad = n
            elif n > 2 * last_bad + 16:
                break
        return last_bad + 1 if last_bad < scan_limit else None

    def family_config(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# family 1


def derive_power_exponent(p: Fraction, q: Fraction) -> Fraction:
    """The exponent d > 1 for the power family: min of the two admissible
    branches, dropping the first when its denominator is nonpositive."""
    r = (p + q) / 2
    second = Fraction(3, 2) / (1 - q / (1 - p))
    first_den = 1 - r - p
    if first_den > 0:
        d = min((1 - p) / first_den, second)
    else:
        d = second
    lower = 1 / (1 - q / (1 - p))
    if not (lower < d < 2 * lower):
        raise ParameterError(f"derived exponent {d} outside the admissible interval")
    if p < Fraction(1, 2) and not d < (1 - p) / (1 - 2 * p):
        raise ParameterError("derived exponent violates the p < 1/2 ceiling")
    if d <= 1:
        raise ParameterError("degenerate exponent d <= 1")
    return d


@dataclass(frozen=True)
class Ex1Params:
    p: Fraction
    q: Fraction
    r: Fraction = field(init=False)
    d_exp: Fraction = field(init=False)

    def __post_init__(self):
        p, q = self.p, self.q
        if not (0 < q < min(p, 1 - p)):
            raise ParameterError("need 0 < q < min{p, 1-p}")
        object.__setattr__(self, "r", (p + q) / 2)
        object.__setattr__(self, "d_exp", derive_power_exponent(p, q))


class Ex1Pack(ModuliPack):
    """lambda_n = n^-p, theta_n = n^-q, f(n) = ceil(n^(d/(1-p)))."""

    def __init__(self, p, q, omega: Optional[Callable] = None):
        params = Ex1Params(Fraction(p), Fraction(q))
        self.params = params
        self.p, self.q = params.p, params.q
        self.d_exp = params.d_exp
        self.alpha = self.d_exp / (1 - self.p)  # f exponent, > 1
        self.n0 = 1
        self.delta = self.d_exp * (1 - self.q) / (1 - self.p) - 1
        self.f_start = 0
        self.omega = omega
        self.family_tag = f"ex1(p={self.p},q={self.q})"
        self._p_f = float(self.p)
        self._q_f = float(self.q)
        a, b = self.alpha.numerator, self.alpha.denominator
        self._alpha_nd = (a, b)
        self.f_growth = PolyGrowth.of(a / b * (1 + 1e-12), 2.0)
        self.f_affine = None

    # schedules
    def lam(self, n: int) -> float:
        return float(n) ** (-self._p_f)

    def theta(self, n: int) -> float:
        return float(n) ** (-self._q_f)

    def f(self, n: int) -> int:
        if n < 0:
            raise ValueError("f defined on naturals")
        if n == 0:
            return 0
        a, b = self._alpha_nd
        return iroot_ceil(n**a, b)

    # moduli
    def phi1(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        return promote(max(1, ceil_rat_pow(1 / eps, 1 / self.q)), note="phi1")

    def phi2(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        d, p, q = self.d_exp, self.p, self.q
        if d.denominator == 1:
            two_d = Fraction(2**d.numerator)
        else:
            two_d = pow_frac_bracket(Fraction(2), d)[1]
        base = two_d * d * q * (d + 1 - p) / (eps * (1 - p) ** 2)
        return promote(ceil_frac(base**2) + 1, note="phi2")

    def phi3(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        d, p = self.d_exp, self.p
        half = Fraction(1, 2)
        if p > half:
            inner = pow_frac_bracket((2 * p - 1) * eps, 1 / (1 - 2 * p))[1]
            val = pow_frac_bracket(inner + 1, (1 - p) / d)[1]
            return promote(max(1, ceil_frac(val)), note="phi3")
        if p == half:
            expo = 2 * d / (1 - p)
            two_pow = (
                Fraction(2**expo.numerator)
                if expo.denominator == 1
                else pow_frac_bracket(Fraction(2), expo)[1]
            )
            e_eps_lo = exp_bracket(eps)[0]
            val = d * two_pow / ((1 - p) * (e_eps_lo - 1)) + 1
            return promote(ceil_frac(val), note="phi3")
        # p < 1/2; the first branch uses the derivation's (positive) exponent
        b1 = pow_frac_bracket(2 * d / ((1 - p) * eps), (1 - p) / (1 - p - d * (1 - 2 * p)))[1]
        b2_inner = pow_frac_bracket(2 / eps, 1 / (2 * p))[1]
        b2 = pow_frac_bracket(b2_inner + 1, (1 - p) / d)[1]
        return promote(ceil_frac(max(b1, b2) + 1), note="phi3")

    # certified evaluations
    def theta_interval(self, n: int) -> Interval:
        if n < 1:
            raise ValueError("theta defined from n = 1")
        return pow_frac_bracket(Fraction(1, n), self.q)

    def theta_threshold(self, eps: Fraction) -> Optional[int]:
        eps = Fraction(eps)
        if eps >= 1:
            return 1
        return max(1, ceil_rat_pow(1 / eps, 1 / self.q))

    def _pow_sum(self, a: int, b: int, expo: Fraction, budget: int) -> Optional[Interval]:
        """sum_{j=a}^{b} j**(-expo), certified."""
        terms = b - a + 1
        if terms <= budget and b <= 2**53:
            return _direct_pow_sum(a, b, -float(expo))
        # integral bracket for the decreasing summand
        if expo == 1:
            low = ln_bracket(Fraction(b + 1, a))[0]
            high = Fraction(1, a) + ln_bracket(Fraction(b, a))[1]
            return low, high
        c = 1 - expo  # != 0; integral of j^-expo is j^c / c
        if c > 0:
            lo_i = (pow_frac_bracket(Fraction(b + 1), c)[0] - pow_frac_bracket(Fraction(a), c)[1]) / c
            hi_i = (pow_frac_bracket(Fraction(b), c)[1] - pow_frac_bracket(Fraction(a), c)[0]) / c
        else:
            lo_i = (pow_frac_bracket(Fraction(a), c)[0] - pow_frac_bracket(Fraction(b + 1), c)[1]) / -c
            hi_i = (pow_frac_bracket(Fraction(a), c)[1] - pow_frac_bracket(Fraction(b), c)[0]) / -c
        head = pow_frac_bracket(Fraction(1, a), expo)[1]
        return lo_i, hi_i + head

    def lam_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        return self._pow_sum(a, b, self.p, budget)

    def lam_sq_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        return self._pow_sum(a, b, 2 * self.p, budget)

    # magnitude support
    def f_bound_apply(self, b: Bound) -> Bound:
        af = float(self.alpha)
        if b.is_exact:
            return mg.apply_monotone(self.f_map(), b)
        if b.level == 1:
            # ln f(N) <= alpha ln N + ln 2
            hi = b.hi * af * (1 + 1e-14) + math.log(2.0) + 1e-9
            lo = None if b.lo is None else b.lo * af * (1 - 1e-14)
            return mg._normalize(1, hi, lo, b.provenance)
        bump = max(math.log(af) * (1 + 1e-12), 0.0) + 1e-9
        return mg._normalize(b.level, b.hi + bump, b.lo, b.provenance)  # f(N) >= N

    def kstar_bound_apply(self, k: Bound) -> Bound:
        inv = 1.0 / float(self.alpha)
        if k.is_exact:
            return promote(k_star(self, k.exact), note="kstar")
        if k.level == 1:
            hi = k.hi * inv * (1 + 1e-14) + 1e-9
            lo = None if k.lo is None else max(k.lo * inv * (1 - 1e-14) - 1.0, 0.0)
            return mg._normalize(1, hi, lo, k.provenance)
        return mg._normalize(k.level, k.hi, k.lo, k.provenance)  # k* <= k

    def f_max_index_for_digits(self, digit_cap: int) -> Optional[int]:
        # digits(f(n)) ~ alpha * log10 n
        expo = digit_cap / float(self.alpha) * 0.999
        return 10**18 if expo > 18 else int(10**expo)

    def kstar_exact(self, k: int) -> int:
        # ceil(n^(a/b)) <= k  <=>  n^a <= k^b for integer k
        a, b = self._alpha_nd
        return iroot_floor(k**b if b > 1 else k, a)

    def family_config(self) -> dict:
        return {"name": "ex1", "p": str(self.p), "q": str(self.q)}


# ---------------------------------------------------------------------------
# family 2


class Ex2Pack(ModuliPack):
    """lambda_n = 1/n, theta_n = min(1, 1/log log n) from n = 3, f(n) = n^n."""

    def __init__(self, omega: Optional[Callable] = None):
        self.n0 = 3
        self.delta = Fraction(1, 2)
        self.f_start = 1
        self.omega = omega
        self.family_tag = "ex2"
        self.f_growth = TowerGrowth(0.0, 1.0)
        self.f_affine = None

    def lam(self, n: int) -> float:
        return 0.0 if n < 3 else 1.0 / n

    def theta(self, n: int) -> float:
        if n < 3:
            return 0.0
        return min(1.0, 1.0 / math.log(math.log(n)))

    def f(self, n: int) -> int:
        if n < 1:
            raise ValueError("f defined from n = 1 for this family")
        return n**n

    def phi1(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        x = 1 / eps
        xf = float(x)
        cap_ln = mg.DEFAULT_DIGIT_CAP * math.log(10.0)
        if xf <= math.log(cap_ln):
            inner_lo, inner_hi = exp_bracket(x)
            hi = exp_bracket(inner_hi)[1]
            return promote(max(1, ceil_frac(hi)), note="phi1")
        if xf <= 690.0:
            v = math.exp(xf)  # ln N = e^x
            return Bound(None, 1, v * (1 + 1e-9), v * (1 - 1e-9), ("phi1",))
        return Bound(None, 2, xf * (1 + 1e-12), xf * (1 - 1e-12), ("phi1",))

    def phi2(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        y = (1 / eps) ** 2 - 1
        e4_hi = exp_bracket(Fraction(4))[1]
        if y <= 0:
            return promote(ceil_frac(e4_hi), note="phi2")
        yf = float(y)
        cap_ln = mg.DEFAULT_DIGIT_CAP * math.log(10.0)
        if yf <= cap_ln:
            hi = exp_bracket(y)[1]
            return promote(max(1, ceil_frac(max(e4_hi, hi - 1))), note="phi2")
        # exp(y) - 1 in [exp(y)/2, exp(y)]: ln brackets y - 1 and y
        return Bound(None, 1, yf * (1 + 1e-12), yf * (1 - 1e-12) - 1.0, ("phi2",))

    def phi3(self, eps: Fraction) -> Bound:
        eps = Fraction(eps)
        if eps <= 0:
            raise ParameterError("moduli need eps > 0")
        val = max(Fraction(3), ln_bracket(2 / eps + 1)[1])
        return promote(ceil_frac(val), note="phi3")

    def theta_interval(self, n: int) -> Interval:
        if n < 3:
            return Fraction(0), Fraction(0)
        ln_lo, ln_hi = ln_bracket(Fraction(n))
        lnln_lo, lnln_hi = ln_bracket(ln_lo)[0], ln_bracket(ln_hi)[1]
        if lnln_lo <= 0:
            return (1 / lnln_hi if lnln_hi > 0 else Fraction(1)), Fraction(1)
        return min(Fraction(1), 1 / lnln_hi), min(Fraction(1), 1 / lnln_lo)

    def theta_threshold(self, eps: Fraction) -> Optional[int]:
        eps = Fraction(eps)
        if eps >= 1:
            return 1
        inner_lo, inner_hi = exp_bracket(1 / eps)
        try:
            hi = exp_bracket(inner_hi)[1]
        except OverflowError:
            return None
        n = ceil_frac(hi)
        while n > 3 and self.theta_interval(n - 1)[1] <= eps:
            n -= 1
        return n

    def _recip_sum(self, a: int, b: int, power: int, budget: int) -> Optional[Interval]:
        a = max(a, 3)  # lambda vanishes below 3
        if a > b:
            return Fraction(0), Fraction(0)
        terms = b - a + 1
        if terms <= min(budget, 2_000_000):
            s = _exact_recip_sum(a, b, power)
            return s, s
        if terms <= budget and b <= 2**53:
            return _direct_pow_sum(a, b, -float(power))
        if power == 1:
            low = ln_bracket(Fraction(b + 1, a))[0]
            high = Fraction(1, a) + ln_bracket(Fraction(b, a))[1]
            return low, high
        # power == 2: exact integral brackets, no transcendentals
        low = Fraction(1, a) - Fraction(1, b + 1)
        high = Fraction(1, a**2) + Fraction(1, a) - Fraction(1, b)
        return low, high

    def lam_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        return self._recip_sum(a, b, 1, budget)

    def lam_sq_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        return self._recip_sum(a, b, 2, budget)

    def f_bound_apply(self, b: Bound) -> Bound:
        if b.is_exact:
            return mg.apply_monotone(self.f_map(), b)
        if b.level == 1:
            hi = b.hi + math.log(max(b.hi, 1.0)) * (1 + 1e-12) + 1e-9
            lo = None
            if b.lo is not None and b.lo > 1.0:
                lo = b.lo + math.log(b.lo) * (1 - 1e-12) - 1e-9
            return mg._normalize(2, hi, lo, b.provenance)
        return mg._normalize(b.level + 1, b.hi + 1e-9, b.lo, b.provenance)

    def kstar_bound_apply(self, k: Bound) -> Bound:
        if k.is_exact:
            return promote(k_star(self, k.exact), note="kstar")
        # k* <= max(3, ln k): drop one level
        if k.level == 1:
            return mg._normalize(1, math.log(max(k.hi, 3.0)) * (1 + 1e-12) + 1e-9, None, k.provenance)
        return mg._normalize(k.level - 1, k.hi, None, k.provenance)

    def f_max_index_for_digits(self, digit_cap: int) -> Optional[int]:
        n = 2
        while (n + 1) * math.log10(n + 1) <= digit_cap:
            n += max(1, n // 8)
        return n

    def kstar_exact(self, k: int) -> int:
        # n^n <= k: bracket by ln, exact power only at the boundary
        if k < 4:
            return 1
        from .magnitude import _ln_int_bracket_f

        lnk_lo, lnk_hi = _ln_int_bracket_f(k)

        def le(n: int) -> bool:
            v = n * math.log(n)
            if v * (1 + 1e-12) + 1e-9 < lnk_lo:
                return True
            if v * (1 - 1e-12) - 1e-9 > lnk_hi:
                return False
            return n**n <= k

        lo, hi = 1, max(int(lnk_hi) + 3, 4)  # n* <= ln k for n >= 3
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if le(mid):
                lo = mid
            else:
                hi = mid
        return lo

    def family_config(self) -> dict:
        return {"name": "ex2"}


# ---------------------------------------------------------------------------
# synthetic packs


class SyntheticPack(ModuliPack):
    """A hand-assembled pack for pipeline tests: explicit f, constant-valued
    moduli callables, and optional schedules."""

    def __init__(
        self,
        tag: str,
        f: Callable[[int], int],
        phi1: Callable[[Fraction], int],
        phi2: Callable[[Fraction], int],
        phi3: Callable[[Fraction], int],
        n0: int,
        delta,
        lam: Optional[Callable[[int], float]] = None,
        theta: Optional[Callable[[int], float]] = None,
        omega: Optional[Callable] = None,
        f_growth: mg.Growth = PolyGrowth.of(1, 2),
        f_affine: Optional[tuple] = None,
        f_start: int = 0,
    ):
        self.family_tag = f"synthetic({tag})"
        self._tag = tag
        self._f = f
        self._phi1, self._phi2, self._phi3 = phi1, phi2, phi3
        self.n0 = n0
        self.delta = Fraction(delta)
        self._lam, self._theta = lam, theta
        self.omega = omega
        self.f_growth = f_growth
        self.f_affine = f_affine
        self.f_start = f_start

    def lam(self, n: int) -> float:
        if self._lam is None:
            raise NotImplementedError("synthetic pack has no lambda schedule")
        return self._lam(n)

    def theta(self, n: int) -> float:
        if self._theta is None:
            raise NotImplementedError("synthetic pack has no theta schedule")
        return self._theta(n)

    def f(self, n: int) -> int:
        return self._f(n)

    def phi1(self, eps: Fraction) -> Bound:
        return promote(self._phi1(Fraction(eps)), note="phi1")

    def phi2(self, eps: Fraction) -> Bound:
        return promote(self._phi2(Fraction(eps)), note="phi2")

    def phi3(self, eps: Fraction) -> Bound:
        return promote(self._phi3(Fraction(eps)), note="phi3")

    def theta_interval(self, n: int) -> Interval:
        v = Fraction(str(self.theta(n)))
        return v, v

    def lam_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        if self._lam is None or b - a + 1 > budget:
            return None
        s = Fraction(0)
        for j in range(a, b + 1):
            s += Fraction(str(self._lam(j)))
        return s, s

    def lam_sq_window_sum(self, a: int, b: int, budget: int) -> Optional[Interval]:
        if self._lam is None or b - a + 1 > budget:
            return None
        s = Fraction(0)
        for j in range(a, b + 1):
            s += Fraction(str(self._lam(j))) ** 2
        return s, s

    def kstar_bound_apply(self, k: Bound) -> Bound:
        if k.is_exact:
            return promote(k_star(self, k.exact), note="kstar")
        return mg._normalize(k.level, k.hi, k.lo, k.provenance)  # k* <= k

    def family_config(self) -> dict:
        return {"name": "synthetic", "tag": self._tag}


def doubling_pack(delta=2, lam=None, theta=None, omega=None) -> SyntheticPack:
    """The reference synthetic pack: f(n) = 2n, all moduli constant 1."""
    return SyntheticPack(
        "doubling",
        lambda n: 2 * n,
        lambda e: 1,
        lambda e: 1,
        lambda e: 1,
        n0=1,
        delta=delta,
        lam=lam,
        theta=theta,
        omega=omega,
        f_growth=PolyGrowth.of(1, 2),
        f_affine=(2, 0),
        f_start=0,
    )


def ex1_pack(p, q, omega=None) -> Ex1Pack:
    return Ex1Pack(p, q, omega=omega)


def ex2_pack(omega=None) -> Ex2Pack:
    return Ex2Pack(omega=omega)


def pack_from_family_config(cfg: dict) -> ModuliPack:
    name = cfg.get("name")
    if name == "ex1":
        return ex1_pack(Fraction(cfg["p"]), Fraction(cfg["q"]))
    if name == "ex2":
        return ex2_pack()
    if name == "synthetic":
        if cfg.get("tag", "doubling") != "doubling":
            raise ParameterError("only the doubling synthetic pack is config-constructible")
        return doubling_pack()
    raise ParameterError(f"unknown family {name!r}")


# ---------------------------------------------------------------------------
# the star function


def k_star(pack: ModuliPack, k: int) -> int:
    """max{n : f(n) <= k}, the discrete inverse of the subsequence.

    Generic route: doubling then binary search on the monotone f.  Packs with
    closed-form inverses (integer roots for the power family, a log-scale
    bracket for n^n) provide kstar_exact, which computes the same value in a
    handful of integer-root operations; the f(k*) <= k < f(k*+1) sandwich is
    re-verified either way.
    """
    start = pack.f_start
    if k < pack.f(start):
        raise ValueError(f"k = {k} below f({start}) = {pack.f(start)}")
    fast = getattr(pack, "kstar_exact", None)
    if fast is not None:
        n = max(fast(k), start)
        while pack.f(n) > k:
            n -= 1
        while pack.f(n + 1) <= k:
            n += 1
        return n
    hi = max(start, 1)
    while pack.f(hi) <= k:
        hi *= 2
    lo = start  # f(lo) <= k < f(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pack.f(mid) <= k:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# the audit


@dataclass
class ConditionResult:
    name: str
    status: str  # pass | fail | skipped | vacuous
    mode: str = "direct"
    checked: int = 0
    first_violation: Optional[tuple] = None
    min_margin: Optional[float] = None
    skipped_ranges: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "status": self.status,
            "mode": self.mode,
            "checked": self.checked,
            "min_margin": self.min_margin,
        }
        if self.first_violation is not None:
            n, lhs, rhs = self.first_violation
            out["first_violation"] = {"n": n, "lhs": lhs, "rhs": rhs}
        if self.skipped_ranges:
            out["skipped_ranges"] = self.skipped_ranges
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass
class AuditReport:
    family: str
    n_max: int
    eps_grid: list
    conditions: dict
    lambda_feasible_from: Optional[int] = None

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.conditions.values())

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "n_max": self.n_max,
            "eps_grid": [str(e) for e in self.eps_grid],
            "passed": self.passed,
            "lambda_feasible_from": self.lambda_feasible_from,
            "conditions": {k: v.to_json() for k, v in self.conditions.items()},
        }


def _window_points(start: int, n_max: int, cap: int = 512) -> list:
    if n_max < start:
        return []
    count = n_max - start + 1
    if count <= cap:
        return list(range(start, n_max + 1))
    dense = list(range(start, start + cap // 2))
    sparse = sorted(
        {start + int((n_max - start) * (i / (cap // 2)) ** 1.5) for i in range(cap // 2 + 1)}
    )
    return sorted(set(dense) | set(sparse))


def audit_acceptably_paired(
    pack: ModuliPack,
    n_max: int,
    eps_grid: list,
    budget: int = 10**8,
    prefix_limit: int = 10_000,
) -> AuditReport:
    """Check Definition-style conditions (i)-(v) at the pack's own moduli.

    Per-window sums are materialized directly while they fit the budget and
    bracketed by certified integrals beyond it; windows with neither route
    are reported as skipped, never silently passed.
    """
    eps_grid = [Fraction(e) for e in eps_grid]
    conditions: dict = {}

    # preamble: theta nonincreasing from n0 on the scanned prefix
    res = ConditionResult("theta_nonincreasing", "pass", mode="exact")
    prev = pack.theta_interval(pack.n0)
    for n in range(pack.n0, min(n_max, prefix_limit)):
        cur = pack.theta_interval(n + 1)
        res.checked += 1
        if cur[0] > prev[1]:
            res.status = "fail"
            res.first_violation = (n, float(prev[1]), float(cur[0]))
            break
        prev = cur
    conditions["theta_nonincreasing"] = res

    # condition (i): theta reaches eps by phi1(eps), verified structurally
    res = ConditionResult("i_theta_decay", "pass", mode="structural")
    for eps in eps_grid:
        thr = pack.theta_threshold(eps)
        p1 = pack.phi1(eps)
        res.checked += 1
        if thr is None:
            res.skipped_ranges.append(f"eps={eps}: threshold beyond exact range")
            continue
        if p1.is_exact:
            margin = p1.exact - thr
            if margin < 0:
                res.status = "fail"
                res.first_violation = (thr, float(eps), float(eps))
                res.notes.append(f"phi1({eps}) = {p1.exact} < first index {thr} with theta <= eps")
                break
            res.min_margin = min(res.min_margin, margin) if res.min_margin is not None else margin
        else:
            cmp = mg.compare(promote(thr), p1)
            if cmp == "gt":
                res.status = "fail"
                break
            res.notes.append(f"eps={eps}: phi1 in magnitude mode, compared conservatively")
    conditions["i_theta_decay"] = res

    # condition (ii): f strictly increasing
    res = ConditionResult("ii_f_strictly_increasing", "pass", mode="exact")
    prev_f = pack.f(pack.f_start)
    for n in range(pack.f_start, min(n_max, 1000)):
        cur_f = pack.f(n + 1)
        res.checked += 1
        if cur_f < prev_f + 1:
            res.status = "fail"
            res.first_violation = (n, prev_f, cur_f)
            break
        prev_f = cur_f
    conditions["ii_f_strictly_increasing"] = res

    f_digit_limit = pack.f_max_index_for_digits(mg.DEFAULT_DIGIT_CAP // 10) or n_max

    def window(n: int):
        return pack.f(n), pack.f(n + 1)

    # condition (iii): theta_{f(n)} * sum lambda >= delta for n >= n0
    res = ConditionResult("iii_delta_lower", "pass")
    modes = set()
    for n in _window_points(pack.n0, min(n_max, f_digit_limit)):
        a, b = window(n)
        s = pack.lam_window_sum(a, b, budget)
        if s is None:
            res.skipped_ranges.append(f"n={n}: window sum infeasible within budget")
            continue
        th = pack.theta_interval(a)
        lhs_lo = th[0] * s[0]
        margin = lhs_lo - pack.delta
        res.checked += 1
        modes.add("direct" if b - a + 1 <= budget else "analytic")
        fm = float(margin)
        res.min_margin = fm if res.min_margin is None else min(res.min_margin, fm)
        if margin < 0:
            res.status = "fail"
            res.first_violation = (n, float(lhs_lo), float(pack.delta))
            break
    res.mode = "+".join(sorted(modes)) if modes else "none"
    if n_max > f_digit_limit:
        res.skipped_ranges.append(f"n in ({f_digit_limit}, {n_max}]: f beyond digit budget")
    conditions["iii_delta_lower"] = res

    # conditions (iv) and (v): remainder terms below eps from their moduli
    for name, start_fn, sum_fn, diff_mode in (
        ("iv_theta_gap_decay", pack.phi2, pack.lam_window_sum, True),
        ("v_lambda_sq_decay", pack.phi3, pack.lam_sq_window_sum, False),
    ):
        res = ConditionResult(name, "pass")
        modes = set()
        for eps in eps_grid:
            p = start_fn(eps)
            if not p.is_exact:
                res.skipped_ranges.append(f"eps={eps}: modulus beyond exact range")
                continue
            start = max(p.exact, pack.f_start if not diff_mode else pack.f_start)
            if start > n_max:
                res.notes.append(f"eps={eps}: modulus {start} beyond n_max (vacuous)")
                continue
            if start < 1:
                start = 1
            for n in _window_points(start, min(n_max, f_digit_limit)):
                a, b = window(n)
                s = sum_fn(a, b, budget)
                if s is None:
                    res.skipped_ranges.append(f"eps={eps}, n={n}: window infeasible")
                    continue
                if diff_mode:
                    th_a = pack.theta_interval(a)
                    th_b = pack.theta_interval(b)
                    lhs_hi = max(th_a[1] - th_b[0], Fraction(0)) * s[1]
                else:
                    lhs_hi = s[1]
                res.checked += 1
                modes.add("direct" if b - a + 1 <= budget else "analytic")
                margin = float(eps - lhs_hi)
                res.min_margin = margin if res.min_margin is None else min(res.min_margin, margin)
                if lhs_hi > eps:
                    res.status = "fail"
                    res.first_violation = (n, float(lhs_hi), float(eps))
                    break
            if res.status == "fail":
                break
        res.mode = "+".join(sorted(modes)) if modes else "none"
        conditions[name] = res

    feasible = None
    try:
        feasible = pack.feasible_start(min(prefix_limit, 100_000))
    except NotImplementedError:
        pass
    return AuditReport(pack.family_tag, n_max, eps_grid, conditions, feasible)
