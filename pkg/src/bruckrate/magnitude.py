"""Exact-or-estimated natural-number arithmetic for rate bounds.

A Bound is either an exact arbitrary-precision natural (while its digit count
stays under a configurable cap) or a magnitude summary (level, value) meaning
"a natural N with ln applied `level` times to N at most `value`".  All
magnitude arithmetic rounds upward, so a magnitude Bound is always a sound
over-estimate — and any over-estimate of a metastability rate is a rate.
Lower values are carried where they are cheap, so some comparisons stay
determinate; the rest honestly report "indeterminate".

The absorption lemma used throughout: for c >= 0 and x with e^x >= 1,
exp(x + c) = e^x e^c >= e^x + c, so adding c at the TOP tower value
over-estimates adding c at any depth below.  Normalized magnitudes keep
value > 700 at levels >= 2, so every inner tower value exceeds 1.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

# exact bounds near the digit cap must serialize as decimal strings;
# lift CPython's conversion guard well past the default cap
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(max(sys.get_int_max_str_digits(), 2_000_000))

from .roundmath import (
    fadd_up,
    fexp_down,
    fexp_up,
    fln_down,
    fln_up,
    fmul_up,
    _ulps_down,
    _ulps_up,
)

DEFAULT_DIGIT_CAP = 100_000
PROVENANCE_CAP = 1000

_LOG2_10 = math.log2(10.0)


class MagnitudeOverflowError(OverflowError):
    """The requested quantity cannot be represented even in magnitude mode
    (e.g. a tower whose height is itself a level-2 magnitude)."""


def _bits_cap(digit_cap: int) -> int:
    return int(digit_cap * _LOG2_10) + 4


def _merge_prov(note: str, *parents: "Bound") -> tuple:
    items: list = []
    for p in parents:
        items.extend(p.provenance)
    items.append(note)
    if len(items) > PROVENANCE_CAP:
        keep = PROVENANCE_CAP // 2
        items = items[:keep] + ["...[provenance truncated]..."] + items[-keep:]
    return tuple(items)


def _ln_int_bracket_f(n: int) -> tuple[float, float]:
    """Directed float bracket of ln(n) for a positive int of any size."""
    if n <= 0:
        raise ValueError("ln of nonpositive int")
    bl = n.bit_length()
    if bl <= 900:
        v = math.log(n)
        return _ulps_down(v), _ulps_up(v)
    s = bl - 64
    m = n >> s
    ln2 = math.log(2.0)
    lo = _ulps_down(math.log(m) + s * _ulps_down(ln2, 2), 4)
    hi = _ulps_up(math.log(m + 1) + s * _ulps_up(ln2, 2), 4)
    return lo, hi


def _float_up(n: int) -> float:
    return _ulps_up(float(n), 2)


@dataclass(frozen=True)
class Bound:
    """exact natural | magnitude(level, value) with upward-safe arithmetic."""

    exact: Optional[int] = None
    level: int = 0
    hi: float = 0.0
    lo: Optional[float] = None
    provenance: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.exact is not None:
            if self.exact < 0:
                raise ValueError("Bound represents naturals")
        elif self.level < 1:
            raise ValueError("magnitude Bound needs level >= 1")

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def upper_only(self) -> bool:
        return self.exact is None and self.lo is None

    def as_int(self) -> int:
        if self.exact is None:
            raise MagnitudeOverflowError("Bound is in magnitude mode")
        return self.exact

    def with_prov(self, note: str, *parents: "Bound") -> "Bound":
        return Bound(self.exact, self.level, self.hi, self.lo, _merge_prov(note, *parents, self))

    def to_json(self) -> dict:
        if self.is_exact:
            return {"exact": str(self.exact)}
        out = {"level": self.level, "value": self.hi, "upper_only": self.upper_only}
        if self.lo is not None:
            out["value_lower"] = self.lo
        return out

    def describe(self) -> str:
        if self.is_exact:
            s = str(self.exact)
            return s if len(s) <= 40 else f"{s[:12]}...({len(s)} digits)"
        tag = "up-only" if self.upper_only else f"lo={self.lo:.6g}"
        return f"magnitude(level={self.level}, value<={self.hi:.6g}, {tag})"

    def __repr__(self):
        return f"Bound<{self.describe()}>"


def _iter_ln(lo: float, hi: float, times: int) -> tuple[float, float]:
    """Apply directed ln `times` times.  Any float drops below 0 within a few
    iterations, so the loop is capped; deeper requests collapse to -inf."""
    if times > 8:
        return -math.inf, -math.inf
    for _ in range(times):
        hi = fln_up(hi) if hi > 0 else -math.inf
        lo = fln_down(lo) if lo > 0 else -math.inf
        if hi == -math.inf:
            return -math.inf, -math.inf
    return lo, hi


def _iter_exp(lo: float, hi: float, times: int) -> tuple[float, float]:
    for _ in range(min(times, 8)):
        hi = fexp_up(hi)
        lo = fexp_down(lo) if lo > -math.inf else -math.inf
    if times > 8:
        hi = math.inf  # the capped upper no longer dominates; the lower does
    return lo, hi


def _brackets(x: Bound, level: int) -> tuple[float, float]:
    """(lo, hi) float bracket of ln^level(N); lo may be -inf, hi may be +inf."""
    if x.is_exact:
        if x.exact == 0:
            return (-math.inf, -math.inf) if level else (0.0, 0.0)
        if level == 0:
            if x.exact.bit_length() > 1000:
                return math.inf, math.inf
            return float(x.exact), _float_up(x.exact)
        lo, hi = _ln_int_bracket_f(x.exact)
        return _iter_ln(lo, hi, level - 1)
    lo = x.lo if x.lo is not None else -math.inf
    hi = x.hi
    if level >= x.level:
        return _iter_ln(lo, hi, level - x.level)
    return _iter_exp(lo, hi, x.level - level)


def _normalize(level: int, hi: float, lo: Optional[float], prov: tuple) -> Bound:
    """Keep the level minimal with the value still in safe float range."""
    while level > 1 and hi <= 700.0:
        hi = fexp_up(hi)
        lo = fexp_down(lo) if lo is not None else None
        level -= 1
    return Bound(None, level, hi, lo, prov)


def promote(n: int, digit_cap: Optional[int] = None, note: str = "promote") -> Bound:
    """Exact if the digit count fits the cap, else a level-1 magnitude
    (two-sided, since both ln bounds of a concrete integer are known)."""
    cap = DEFAULT_DIGIT_CAP if digit_cap is None else digit_cap
    if n < 0:
        raise ValueError("naturals only")
    if n.bit_length() <= _bits_cap(cap):
        return Bound(exact=n, provenance=(f"{note}({_short(n)})",))
    lo, hi = _ln_int_bracket_f(n)
    return Bound(None, 1, hi, lo, (f"{note}(int with {n.bit_length()} bits)",))


def _short(n: int) -> str:
    if n.bit_length() <= 128:
        s = str(n)
        if len(s) <= 24:
            return s
    return f"~10^{int(n.bit_length() * 0.30103)}"


def power_bound(base: int, exp: Union[int, "Bound"], digit_cap: Optional[int] = None) -> Bound:
    """The Bound for base**exp without materializing it when huge."""
    cap = DEFAULT_DIGIT_CAP if digit_cap is None else digit_cap
    if base < 2:
        raise ValueError("power_bound needs base >= 2")
    if isinstance(exp, int):
        exp = Bound(exact=exp, provenance=(f"const({exp})",))
    prov = _merge_prov(f"pow(base={base})", exp)
    if exp.is_exact:
        bits = exp.exact * math.log2(base)
        if bits <= _bits_cap(cap):
            out = promote(base**exp.exact, digit_cap=cap)
            return Bound(out.exact, out.level, out.hi, out.lo, prov)
        hi = fmul_up(_float_up(exp.exact), fln_up(float(base)))
        lo = _ulps_down(float(exp.exact) * fln_down(float(base)), 4)
        return _normalize(1, hi, lo, prov)
    # ln N = E ln(base); lnln N = ln E + ln(ln base)
    lnb_hi = fln_up(float(base))
    lnb_lo = fln_down(float(base))
    if exp.level == 1:
        hi = fadd_up(exp.hi, fln_up(lnb_hi)) if lnb_hi > 1.0 else exp.hi
        lo = None
        if exp.lo is not None and lnb_lo > 0:
            lo = _ulps_down(exp.lo + math.log(lnb_lo), 4)
        return _normalize(2, hi, lo, prov)
    bump = fln_up(1.0 + max(math.log(max(lnb_hi, 1.0)), 0.0))
    return _normalize(exp.level + 1, fadd_up(exp.hi, bump), None, prov)


# ---------------------------------------------------------------------------
# ordering


def compare(a: Bound, b: Bound) -> str:
    """'lt' | 'eq' | 'gt' | 'indeterminate', conservative on magnitudes."""
    if a.is_exact and b.is_exact:
        if a.exact < b.exact:
            return "lt"
        return "eq" if a.exact == b.exact else "gt"
    level = max(a.level, b.level, 1)
    a_lo, a_hi = _brackets(a, level)
    b_lo, b_hi = _brackets(b, level)
    if a_hi < b_lo:
        return "lt"
    if a_lo > b_hi:
        return "gt"
    return "indeterminate"


def max_join(*bounds: Bound) -> Bound:
    """A Bound >= every argument (equal to the max when determinate)."""
    if not bounds:
        raise ValueError("max_join needs at least one Bound")
    best = bounds[0]
    for b in bounds[1:]:
        c = compare(best, b)
        if c == "lt":
            best = b
        elif c in ("gt", "eq"):
            continue
        else:
            best = _join_two(best, b)
    return best


def _join_two(a: Bound, b: Bound) -> Bound:
    level = max(a.level, b.level, 1)
    a_lo, a_hi = _brackets(a, level)
    b_lo, b_hi = _brackets(b, level)
    hi = max(a_hi, b_hi)
    lo_candidates = [v for v in (a_lo, b_lo) if v > -math.inf]
    lo = max(lo_candidates) if lo_candidates else None
    return _normalize(level, hi, lo, _merge_prov("max", a, b))


# ---------------------------------------------------------------------------
# addition


def add(a: Bound, b: Bound, digit_cap: Optional[int] = None) -> Bound:
    cap = DEFAULT_DIGIT_CAP if digit_cap is None else digit_cap
    if a.is_exact and b.is_exact:
        s = a.exact + b.exact
        out = promote(s, digit_cap=cap)
        return Bound(out.exact, out.level, out.hi, out.lo, _merge_prov("add", a, b))
    # A + B <= 2 max(A, B): ln2 at the top (absorption lemma)
    level = max(a.level, b.level, 1)
    a_lo, a_hi = _brackets(a, level)
    b_lo, b_hi = _brackets(b, level)
    hi = fadd_up(max(a_hi, b_hi), math.log(2.0))
    lo_candidates = [v for v in (a_lo, b_lo) if v > -math.inf]
    lo = max(lo_candidates) if lo_candidates else None  # A + B >= max(A, B)
    return _normalize(level, hi, lo, _merge_prov("add", a, b))


def add_const(a: Bound, c: int, digit_cap: Optional[int] = None) -> Bound:
    if c < 0:
        raise ValueError("add_const takes a natural constant")
    return add(a, Bound(exact=c, provenance=(f"const({c})",)), digit_cap=digit_cap)


def truncated_subtract_upper(a: Bound, note: str = "minus") -> Bound:
    """Upper bound for a - b with b >= 0: a itself, lower value dropped."""
    if a.is_exact:
        return a
    return Bound(None, a.level, a.hi, None, _merge_prov(note, a))


# ---------------------------------------------------------------------------
# value space: reals v known via ln^depth(v) <= hi, used by closed forms


@dataclass(frozen=True)
class _Val:
    depth: int
    hi: float


def _val_normalize(depth: int, hi: float) -> _Val:
    while depth > 0 and hi <= 700.0:
        hi = fexp_up(hi)
        depth -= 1
    return _Val(depth, hi)


def _val_at_depth(v: _Val, d: int) -> float:
    hi = v.hi
    for _ in range(min(d - v.depth, 8)):
        hi = fln_up(max(hi, 1.0))
    return hi  # ln(max(.,1)) is >= the true iterated ln, so capping is sound


def _val_ln_of_bound(b: Bound, add_before: float = 0.0) -> _Val:
    """ln(N + add_before) as a _Val (add_before >= 0)."""
    if b.is_exact:
        n = max(b.exact, 1)
        if n.bit_length() <= 900:
            return _Val(0, fln_up(float(n) + add_before + 1.0))
        _, hi = _ln_int_bracket_f(n)
        return _Val(0, fadd_up(hi, 1e-9))
    if b.level == 1:
        hi = b.hi
        if add_before > 0:
            hi = fadd_up(hi, add_before / max(fexp_down(min(hi, 700.0)), 1.0))
        return _Val(0, hi) if hi <= 1e308 else _Val(1, fln_up(hi))
    return _val_normalize(b.level - 1, b.hi)


def _val_ln(v: _Val) -> _Val:
    if v.depth == 0:
        return _Val(0, fln_up(max(v.hi, 1.0)))
    return _val_normalize(v.depth - 1, v.hi)


def _val_add_float(v: _Val, c: float) -> _Val:
    if c <= 0:
        return v
    return _Val(v.depth, fadd_up(v.hi, c))  # absorption lemma


def _val_add(a: _Val, b: _Val) -> _Val:
    d = max(a.depth, b.depth)
    a_hi, b_hi = _val_at_depth(a, d), _val_at_depth(b, d)
    if d == 0 and a_hi + b_hi < 1e308:
        return _Val(0, fadd_up(a_hi, b_hi))
    return _val_normalize(d, fadd_up(max(a_hi, b_hi), math.log(2.0)))


def _val_mul_bound(count: Bound, c: float) -> _Val:
    """count * c as a _Val (c > 0)."""
    if count.is_exact:
        v = _float_up(count.exact) * c
        if v < 1e308:
            return _Val(0, _ulps_up(v, 4))
        _, lh = _ln_int_bracket_f(count.exact)
        return _Val(1, fadd_up(lh, fln_up(c)))
    if count.level == 1:
        return _Val(1, fadd_up(count.hi, fln_up(max(c, 1.0))))
    bump = fln_up(1.0 + max(math.log(max(c, 1.0)), 0.0))
    return _Val(count.level, fadd_up(count.hi, bump))


def _bound_from_val(v: _Val, extra_depth: int, prov: tuple) -> Bound:
    """The Bound N with ln^extra_depth(N) <= v."""
    level = extra_depth + v.depth
    if level == 0:
        return Bound(exact=int(math.ceil(v.hi)), provenance=prov)
    return _normalize(level, v.hi, None, prov)


# ---------------------------------------------------------------------------
# growth descriptors and monotone maps


def ln_of_nat(n: int) -> float:
    """Upper float bound on ln(max(n, 1)) for an int of any size."""
    if n <= 1:
        return 0.0
    return _ln_int_bracket_f(n)[1]


@dataclass(frozen=True)
class PolyGrowth:
    """h(n) <= exp(ln_coeff) * n**degree for all n >= 1.

    Coefficients are kept in log space so that compositions with huge exact
    constants never overflow floats."""

    degree: float
    ln_coeff: float = 0.0

    def __post_init__(self):
        if self.degree < 1 or self.ln_coeff < 0:
            raise ValueError("PolyGrowth needs degree >= 1 and ln_coeff >= 0")

    @staticmethod
    def of(degree: float, coeff: float = 1.0) -> "PolyGrowth":
        return PolyGrowth(degree, max(fln_up(coeff), 0.0) if coeff > 1 else 0.0)


@dataclass(frozen=True)
class TowerGrowth:
    """ln h(n) <= exp(ln_coeff) * n**degree * max(ln n, 1) for all n >= 2
    (the n^n family and anything containing it)."""

    ln_coeff: float = 0.0
    degree: float = 1.0


Growth = Union[PolyGrowth, TowerGrowth]

_LN2 = math.log(2.0)


def compose_growth(outer: Growth, inner: Growth) -> Growth:
    """Growth of n -> outer(inner(n))."""
    if isinstance(outer, PolyGrowth) and isinstance(inner, PolyGrowth):
        return PolyGrowth(
            outer.degree * inner.degree,
            fadd_up(outer.ln_coeff, fmul_up(outer.degree, inner.ln_coeff)),
        )
    ol = getattr(outer, "ln_coeff", 0.0)
    il = getattr(inner, "ln_coeff", 0.0)
    od = getattr(outer, "degree", 1.0)
    idg = getattr(inner, "degree", 1.0)
    return TowerGrowth(fadd_up(ol, _LN2, fmul_up(od, il + _LN2)), od * idg)


def growth_add(a: Growth, b: Growth, extra_coeff: float = 1.0) -> Growth:
    """Growth of a pointwise sum h_a(n) + h_b(n) + const: the coefficients
    add, bounded by 3 * max, i.e. ln-space max + ln 3."""
    extra_ln = max(fln_up(extra_coeff), 0.0) if extra_coeff > 1 else 0.0
    joined = fadd_up(max(a.ln_coeff, b.ln_coeff, extra_ln), math.log(3.0))
    degs = max(getattr(a, "degree", 1.0), getattr(b, "degree", 1.0))
    if isinstance(a, PolyGrowth) and isinstance(b, PolyGrowth):
        return PolyGrowth(degs, joined)
    return TowerGrowth(joined, degs)


@dataclass(frozen=True)
class MonotoneMap:
    """A registered nondecreasing map usable on Bounds.

    eval_int evaluates exactly; growth drives magnitude-mode estimates;
    affine (a, b) unlocks the exact closed form for iteration; bound_apply,
    when set, overrides the generic growth law (pack f and k* use it).
    """

    name: str
    eval_int: Optional[Callable[[int], int]]
    growth: Growth
    affine: Optional[tuple] = None
    bound_apply: Optional[Callable[[Bound], Bound]] = None
    audit_monotone: bool = True

    def __post_init__(self):
        if self.eval_int is not None and self.audit_monotone:
            prev = None
            for n in range(0, 65):
                v = self.eval_int(n)
                if prev is not None and v < prev:
                    raise ValueError(f"map {self.name!r} is not monotone at n={n - 1}")
                prev = v


def successor_map() -> MonotoneMap:
    return MonotoneMap("successor", lambda n: n + 1, PolyGrowth.of(1, 2), affine=(1, 1))


def add_const_map(c: int) -> MonotoneMap:
    return MonotoneMap(f"add{c}", lambda n: n + c, PolyGrowth(1, ln_of_nat(1 + c)), affine=(1, c))


def mul_const_map(c: int) -> MonotoneMap:
    if c < 1:
        raise ValueError("mul_const_map needs c >= 1")
    return MonotoneMap(f"mul{c}", lambda n: n * c, PolyGrowth(1, ln_of_nat(c)), affine=(c, 0))


def _poly_digits_bound(g: PolyGrowth, n: int) -> float:
    if n <= 1:
        return 1 + g.ln_coeff / math.log(10.0)
    return g.degree * (n.bit_length() * 0.30103) + g.ln_coeff / math.log(10.0) + 1


def _tower_ln_bound(g: TowerGrowth, n: int) -> float:
    if n <= 1:
        return max(g.ln_coeff, 0.0) + 1.0
    if n.bit_length() > 500 or g.ln_coeff > 600.0:
        return math.inf
    return fmul_up(math.exp(g.ln_coeff) * float(n) ** g.degree, max(fln_up(float(n)), 1.0))


def apply_monotone(m: MonotoneMap, b: Bound, digit_cap: Optional[int] = None) -> Bound:
    """Evaluate a registered monotone map at a Bound: exact-in/exact-out when
    the result fits the cap, else an upper magnitude estimate (upper_only)."""
    cap = DEFAULT_DIGIT_CAP if digit_cap is None else digit_cap
    if b.is_exact:
        n = b.exact
        if m.eval_int is not None:
            digits = (
                _poly_digits_bound(m.growth, n)
                if isinstance(m.growth, PolyGrowth)
                else _tower_ln_bound(m.growth, n) / math.log(10.0)
            )
            if digits <= cap:
                out = promote(m.eval_int(n), digit_cap=cap)
                return Bound(out.exact, out.level, out.hi, out.lo, _merge_prov(m.name, b))
        return _apply_growth_exact(m.growth, n, _merge_prov(f"{m.name}[mag]", b))
    if m.bound_apply is not None:
        out = m.bound_apply(b)
        return Bound(out.exact, out.level, out.hi, out.lo, _merge_prov(m.name, b))
    return _apply_growth_mag(m.growth, b, _merge_prov(f"{m.name}[mag]", b))


def _apply_growth_exact(g: Growth, n: int, prov: tuple) -> Bound:
    if isinstance(g, PolyGrowth):
        _, ln_hi = _ln_int_bracket_f(max(n, 1))
        hi = fadd_up(fmul_up(g.degree, ln_hi), g.ln_coeff)
        return _normalize(1, hi, None, prov)
    hi = _tower_ln_bound(g, n)
    if hi < math.inf:
        return _normalize(1, hi, None, prov)
    _, ln_hi = _ln_int_bracket_f(max(n, 2))
    lnln_hi = fadd_up(g.ln_coeff, fmul_up(g.degree, ln_hi), fln_up(ln_hi))
    return _normalize(2, lnln_hi, None, prov)


def _apply_growth_mag(g: Growth, b: Bound, prov: tuple) -> Bound:
    if isinstance(g, PolyGrowth):
        if b.level == 1:
            hi = fadd_up(fmul_up(g.degree, b.hi), g.ln_coeff)
            if hi < math.inf:
                return _normalize(1, hi, None, prov)
            return _normalize(2, fadd_up(fln_up(b.hi), fln_up(g.degree + 1.0)), None, prov)
        bump = fadd_up(fln_up(g.degree + 1.0), fln_up(1.0 + g.ln_coeff))
        return _normalize(b.level, fadd_up(b.hi, bump), None, prov)
    if b.level == 1:
        # lnln h <= ln_coeff + degree*ln N + lnln N
        hi = fadd_up(fmul_up(g.degree, b.hi), fln_up(max(b.hi, 1.0)), g.ln_coeff)
        return _normalize(2, hi, None, prov)
    # ln^3 h <= ln^2 N + ln(ln_coeff + degree + 2), absorbed at the top value
    bump = fln_up(g.ln_coeff + g.degree + 2.0)
    return _normalize(b.level + 1, fadd_up(b.hi, bump), None, prov)


# ---------------------------------------------------------------------------
# iteration


def iterate_fn(
    m: MonotoneMap,
    start: Bound,
    count: Union[int, Bound],
    digit_cap: Optional[int] = None,
    loop_limit: int = 1_000_000,
) -> Bound:
    """count-fold composition of m starting at start.

    Exact while every intermediate fits the cap; afterwards the remaining
    steps are bounded in closed form from the registered growth (digits
    multiply by at most the growth degree per step).
    """
    cap = DEFAULT_DIGIT_CAP if digit_cap is None else digit_cap
    if isinstance(count, int):
        count = Bound(exact=count, provenance=(f"count({count})",))
    prov = _merge_prov(f"iterate({m.name})", start, count)
    if m.eval_int is not None:
        for n in range(1, 33):
            try:
                v = m.eval_int(n)
            except Exception:
                break
            if v < n + 1:
                raise ValueError(f"iterate_fn: map {m.name!r} below successor at n={n}")
    if count.is_exact and count.exact == 0:
        return Bound(start.exact, start.level, start.hi, start.lo, prov)
    if m.affine is not None:
        return _affine_closed_form(m.affine[0], m.affine[1], start, count, cap, prov)
    current = start
    remaining = count
    if count.is_exact and m.eval_int is not None:
        done = 0
        while done < count.exact and current.is_exact and done < loop_limit:
            current = apply_monotone(m, current, digit_cap=cap)
            done += 1
        remaining = Bound(exact=count.exact - done)
        if remaining.exact == 0:
            return Bound(current.exact, current.level, current.hi, current.lo, prov)
    elif current.is_exact:
        # symbolic count: one application leaves the exact regime, the rest
        # is covered by the closed form with the full count (sound upper)
        current = apply_monotone(m, current, digit_cap=cap)
    return _closed_form_tail(m.growth, current, remaining, cap, prov)


def _affine_closed_form(a: int, b_off: int, start: Bound, count: Bound, cap: int, prov: tuple) -> Bound:
    if count.is_exact:
        k = count.exact
        if a == 1:
            if start.is_exact:
                out = promote(start.exact + k * b_off, digit_cap=cap)
                return Bound(out.exact, out.level, out.hi, out.lo, prov)
            return add(start, Bound(exact=k * b_off), digit_cap=cap).with_prov("affine-tail")
        bits = k * math.log2(a) + 8
        if start.is_exact and bits + start.exact.bit_length() <= _bits_cap(cap):
            ak = a**k
            out = promote(ak * start.exact + b_off * (ak - 1) // (a - 1), digit_cap=cap)
            return Bound(out.exact, out.level, out.hi, out.lo, prov)
    # ln N_K <= K ln(a+b) + ln(start + 1)  (a >= 1, so a+b >= the per-step factor)
    factor = float(a + b_off) if a > 1 or b_off > 0 else 2.0
    t1 = _val_mul_bound(count, fln_up(factor))
    t2 = _val_ln_of_bound(start, add_before=1.0)
    return _bound_from_val(_val_add(t1, t2), 1, prov)


def _closed_form_tail(g: Growth, current: Bound, remaining: Bound, cap: int, prov: tuple) -> Bound:
    if remaining.is_exact and remaining.exact == 0:
        return Bound(current.exact, current.level, current.hi, current.lo, prov)
    if isinstance(g, PolyGrowth):
        if g.degree == 1.0:
            t1 = _val_mul_bound(remaining, max(g.ln_coeff, _LN2))
            t2 = _val_ln_of_bound(current, add_before=1.0)
            return _bound_from_val(_val_add(t1, t2), 1, prov)
        # L_{k+1} <= deg L_k + ln c  =>  lnln N_K <= K ln(deg) + ln(ln N_0 + c')
        ln0 = _val_ln_of_bound(current, add_before=g.ln_coeff / (g.degree - 1.0) + 1.0)
        t1 = _val_mul_bound(remaining, _ulps_up(math.log(g.degree), 4))
        t2 = _val_ln(ln0)
        return _bound_from_val(_val_add(t1, t2), 2, prov)
    # tower: each application adds one level; the height must materialize
    if remaining.is_exact:
        k = remaining.exact
    elif remaining.level == 1 and remaining.hi <= _bits_cap(cap) * math.log(2.0):
        k = int(math.ceil(fexp_up(remaining.hi)))
    else:
        raise MagnitudeOverflowError(
            "tower height is itself beyond exact range; cannot represent the level"
        )
    if current.is_exact:
        _, hi = _ln_int_bracket_f(max(current.exact, 2))
        cur = _normalize(1, hi, None, prov)
    else:
        cur = current
    bump = fln_up(g.ln_coeff + g.degree + 2.0)
    return _normalize(cur.level + k, fadd_up(cur.hi, bump), None, prov)
