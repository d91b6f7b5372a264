import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bruckrate import magnitude as mg
from bruckrate.magnitude import (
    Bound,
    MonotoneMap,
    PolyGrowth,
    TowerGrowth,
    add,
    add_const_map,
    apply_monotone,
    compare,
    iterate_fn,
    max_join,
    mul_const_map,
    power_bound,
    promote,
    successor_map,
)

# --- independent oracle, written before exercising iterate_fn: the affine
# recurrence n_{k+1} = a n_k + b from n_0 has the closed form
# n_k = a^k n_0 + b (a^k - 1) / (a - 1) for a >= 2, n_0 + k b for a == 1.


def affine_orbit_oracle(a: int, b: int, n0: int, k: int) -> int:
    if a == 1:
        return n0 + k * b
    return a**k * n0 + b * (a**k - 1) // (a - 1)


def test_promote_small():
    b = promote(7)
    assert b.is_exact and b.exact == 7 and not b.upper_only


def test_promote_symbolic_power_level1():
    n = 10 ** (10**6)
    b = promote(n)  # one million digits > default cap
    assert not b.is_exact and b.level == 1
    assert b.hi == pytest.approx(10**6 * math.log(10), rel=1e-9)
    assert b.lo is not None and b.lo <= 10**6 * math.log(10) <= b.hi


def test_power_bound_tower_level2():
    e1 = power_bound(2, 2**100)  # 2^(2^100): level 1
    assert e1.level == 1 and e1.hi == pytest.approx(2**100 * math.log(2), rel=1e-9)
    e2 = power_bound(2, e1)  # 2^(2^(2^100)): level >= 2
    assert not e2.is_exact and e2.level >= 2


def test_apply_monotone_exact_within_cap():
    f6 = MonotoneMap("n^6", lambda n: n**6, PolyGrowth(6))
    out = apply_monotone(f6, promote(10**9))
    assert out.exact == 10**54
    fnn = MonotoneMap("n^n", lambda n: n**n, TowerGrowth(), audit_monotone=False)
    assert apply_monotone(fnn, promote(4)).exact == 256


def test_apply_monotone_tower_level_shift():
    fnn = MonotoneMap("n^n", lambda n: n**n, TowerGrowth(), audit_monotone=False)
    b = Bound(None, 1, 1000.0, 999.0, ("t",))
    out = apply_monotone(fnn, b)
    # lnln(n^n) = ln(n ln n) = ln n + lnln n = v + ln v
    assert out.level == 2
    assert out.hi >= 1000.0 + math.log(1000.0)
    assert out.hi <= 1000.0 + math.log(1000.0) + 1.0


def test_apply_monotone_rejects_nonmonotone():
    with pytest.raises(ValueError):
        MonotoneMap("bad", lambda n: (n - 5) ** 2, PolyGrowth(2))


def test_iterate_trivial_successor():
    out = iterate_fn(successor_map(), promote(1), 5)
    assert out.exact == 6


def test_iterate_affine_matches_oracle():
    step = MonotoneMap("2n+10", lambda n: 2 * n + 10, PolyGrowth.of(1, 12), affine=(2, 10))
    out = iterate_fn(step, promote(1), 161)
    assert out.exact == affine_orbit_oracle(2, 10, 1, 161) == 11 * 2**161 - 10


def test_iterate_affine_huge_count_exact():
    step = add_const_map(3)
    out = iterate_fn(step, promote(5), 10**8)
    assert out.exact == 5 + 3 * 10**8


def test_iterate_poly_growth_accounting():
    # step n -> f(n + 6) with f = n^6: digits multiply by ~6 per step
    step = MonotoneMap("f(n+6)", lambda n: (n + 6) ** 6, PolyGrowth.of(6, 2**6))
    out = iterate_fn(step, promote(1), 10**5)
    assert not out.is_exact and out.level == 2
    # lnln N ~ K ln 6: within a factor accounting for the +6 coefficient
    assert out.hi >= 10**5 * math.log(6) * 0.99
    assert out.hi <= 10**5 * math.log(6) * 1.5
    # the first materializable steps agree with the digit-growth claim
    v = 1
    digits_prev = 1
    for _ in range(5):
        v = (v + 6) ** 6
        digits = int(v.bit_length() * 0.30103) + 1
        assert digits <= 6 * digits_prev + 6
        digits_prev = digits


def test_iterate_rejects_below_successor():
    lazy = MonotoneMap("floor-half", lambda n: n // 2 + 1, PolyGrowth(1))
    with pytest.raises(ValueError):
        iterate_fn(lazy, promote(1), 10)


def test_compare_exact_and_magnitude():
    assert compare(promote(3), promote(5)) == "lt"
    assert compare(promote(5), promote(5)) == "eq"
    big = promote(10 ** (10**6))
    assert compare(promote(12), big) == "lt"
    assert compare(big, promote(12)) == "gt"
    up_only = Bound(None, 1, 50.0, None, ("x",))
    # value could be anything <= e^50; a small exact stays indeterminate
    assert compare(promote(12), up_only) == "indeterminate"
    assert compare(promote(10**30), up_only) == "gt"  # e^50 < 10^30


@given(st.integers(min_value=0, max_value=10**12), st.integers(min_value=0, max_value=10**12))
@settings(max_examples=200, deadline=None)
def test_monotonicity_of_apply(a, b):
    """b1 <= b2 implies apply(f, b1) <= apply(f, b2), never reversed."""
    f = MonotoneMap("n^2+n", lambda n: n * n + n, PolyGrowth.of(2, 2))
    lo, hi = sorted((a, b))
    fa = apply_monotone(f, promote(lo), digit_cap=20)
    fb = apply_monotone(f, promote(hi), digit_cap=20)
    assert compare(fa, fb) in (("lt", "eq", "indeterminate") if lo < hi else ("eq", "indeterminate"))


def test_max_join_and_add():
    assert max_join(promote(3), promote(9), promote(6)).exact == 9
    assert add(promote(3), promote(9)).exact == 12
    m = Bound(None, 2, 1000.0, 900.0, ("m",))
    j = max_join(promote(5), m)
    assert not j.is_exact and j.level == 2
    s = add(m, promote(5))
    assert s.level == 2 and s.hi >= m.hi


def test_upper_only_soundness_near_cap():
    """Forced-magnitude results dominate the exact values they estimate."""
    f = MonotoneMap("n^3", lambda n: n**3, PolyGrowth(3))
    rng_vals = [10**15 + k * 7919 for k in range(100)]
    for v in rng_vals:
        exact = apply_monotone(f, promote(v))  # default cap: exact
        assert exact.exact == v**3
        forced = apply_monotone(f, promote(v, digit_cap=10), digit_cap=10)
        assert not forced.is_exact
        # estimate >= exact
        assert forced.hi >= math.log(v**3) - 1e-9


def test_exact_magnitude_consistency_promote():
    for k in range(100):
        n = 10**20 + k * 104729
        b = promote(n, digit_cap=5)
        assert b.level == 1
        assert b.lo <= math.log(n) <= b.hi


def test_iterate_magnitude_count_tower_overflow():
    fnn = MonotoneMap("n^n", lambda n: max(n**n, n + 1), TowerGrowth(), audit_monotone=False)
    count = Bound(None, 2, 1e9, None, ("huge",))
    with pytest.raises(mg.MagnitudeOverflowError):
        iterate_fn(fnn, promote(3), count)


def test_provenance_deterministic_and_capped():
    a = iterate_fn(mul_const_map(2), promote(1), 10)
    b = iterate_fn(mul_const_map(2), promote(1), 10)
    assert a == b  # includes provenance equality
    assert len(a.provenance) <= mg.PROVENANCE_CAP


def test_serialization_shapes():
    assert promote(7).to_json() == {"exact": "7"}
    m = Bound(None, 2, 12.5, None, ())
    assert m.to_json() == {"level": 2, "value": 12.5, "upper_only": True}
    m2 = Bound(None, 1, 12.5, 11.5, ())
    assert m2.to_json()["upper_only"] is False


@given(
    st.integers(min_value=2, max_value=10**18),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=4),
)
@settings(max_examples=200, deadline=None)
def test_bracket_containment_across_levels(n, power, level):
    """Brackets of ln^level taken from an exact value contain the reference
    iterated logarithm wherever it is defined."""
    v = n**power
    b = promote(v, digit_cap=10**6)
    lo, hi = mg._brackets(b, level)
    ref = float(v) if v < 10**300 else None
    if ref is None:
        ref = power * math.log(n)  # ln of v
        start = 1
    else:
        start = 0
    for _ in range(level - start):
        if ref <= 0:
            ref = -math.inf
            break
        ref = math.log(ref)
    if ref == -math.inf:
        assert lo == -math.inf
    else:
        assert lo <= ref * (1 + 1e-12) + 1e-9
        assert hi >= ref * (1 - 1e-12) - 1e-9


@given(st.integers(min_value=1, max_value=10**9), st.integers(min_value=2, max_value=40))
@settings(max_examples=100, deadline=None)
def test_power_bound_vs_exact(base_exp, base):
    """power_bound's magnitude route brackets the true logarithm."""
    b = power_bound(base, base_exp, digit_cap=3)
    ref_ln = base_exp * math.log(base)
    if b.is_exact:
        assert b.exact == base**base_exp
    else:
        assert b.level == 1
        assert b.hi >= ref_ln * (1 - 1e-12)
        if b.lo is not None:
            assert b.lo <= ref_ln * (1 + 1e-12)


def test_normalize_reduces_levels():
    b = mg._normalize(3, 2.5, 1.5, ())
    # exp twice: still comfortably in float range, level collapses to 1
    assert b.level == 1
    assert b.hi == pytest.approx(math.exp(math.exp(2.5)), rel=1e-9)
    assert b.lo == pytest.approx(math.exp(math.exp(1.5)), rel=1e-9)
    big = mg._normalize(3, 1000.0, None, ())
    assert big.level == 3 and big.hi == 1000.0
