import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bruckrate import schedules as sc


# --- family 1 pins (independently derived in the module docstrings below) ---
# p = 1/2, q = 1/4: r = 3/8; branch 1 = (1-p)/(1-r-p) = (1/2)/(1/8) = 4;
# branch 2 = (3/2)(1 - (1/4)/(1/2))^-1 = 3; d = min(4, 3) = 3;
# delta = 3 (3/4)/(1/2) - 1 = 7/2; f(n) = ceil(n^(3/(1/2))) = n^6.


def test_ex1_derived_values(ex1_half_quarter):
    p = ex1_half_quarter
    assert p.d_exp == 3
    assert p.delta == Fraction(7, 2)
    assert [p.f(n) for n in (1, 2, 3)] == [1, 64, 729]
    assert p.n0 == 1


def test_ex1_phi2_pin(ex1_half_quarter):
    # (2^3 * 3 * 1/4 * (3 + 1/2)) / (1 * (1/2)^2) = 84; 84^2 = 7056; +1
    assert ex1_half_quarter.phi2(Fraction(1)).as_int() == 7057


def test_ex1_phi1_pin(ex1_half_quarter):
    assert ex1_half_quarter.phi1(Fraction(1, 100)).as_int() == 10**8


def test_ex1_parameter_validation():
    with pytest.raises(sc.ParameterError):
        sc.ex1_pack(Fraction(1, 2), Fraction(1, 2))  # q = p not allowed
    with pytest.raises(sc.ParameterError):
        sc.ex1_pack(Fraction(3, 4), Fraction(1, 2))  # q >= 1 - p


def test_ex1_exponent_interval_many_params():
    for p_num in range(1, 10):
        p = Fraction(p_num, 10)
        for q_num in range(1, 10):
            q = Fraction(q_num, 40)
            if not (0 < q < min(p, 1 - p)):
                continue
            pk = sc.ex1_pack(p, q)
            lower = 1 / (1 - q / (1 - p))
            assert lower < pk.d_exp < 2 * lower
            if p < Fraction(1, 2):
                assert pk.d_exp < (1 - p) / (1 - 2 * p)


def test_ex1_p_above_half_phi3_is_finite_and_valid():
    pk = sc.ex1_pack(Fraction(7, 10), Fraction(1, 5))
    v = pk.phi3(Fraction(1, 10))
    assert v.is_exact and v.as_int() >= 1
    # the modulus does certify its condition on a sampled range
    n = v.as_int()
    if n < 50:
        a, b = pk.f(n), pk.f(n + 1)
        s = pk.lam_sq_window_sum(a, b, 10**7)
        assert s[1] <= Fraction(1, 10)


def test_ex1_p_below_half_phi3():
    pk = sc.ex1_pack(Fraction(3, 10), Fraction(1, 5))
    v = pk.phi3(Fraction(1, 2))
    assert v.is_exact and v.as_int() >= 1
    n = v.as_int()
    if n < 200:
        a, b = pk.f(n), pk.f(n + 1)
        s = pk.lam_sq_window_sum(a, b, 10**7)
        assert s[1] <= Fraction(1, 2)


# --- family 2 pins ---


def test_ex2_f_values(ex2):
    assert ex2.f(3) == 27 and ex2.f(4) == 256


def test_ex2_phi_pins(ex2):
    assert ex2.phi1(Fraction(1, 2)).as_int() == 1619  # ceil(e^(e^2))
    assert ex2.phi3(Fraction(1, 2)).as_int() == 3  # max(3, ln 5)
    assert ex2.phi2(Fraction(1, 6)).as_int() == 1586013452313430  # ceil(e^35 - 1)


def test_ex2_schedule_values(ex2):
    assert ex2.lam(1) == ex2.lam(2) == 0.0
    assert ex2.theta(1) == ex2.theta(2) == 0.0
    assert ex2.lam(3) == pytest.approx(1 / 3)
    # theta clamps into [0, 1]: raw 1/loglog n > 1 up to n = 15
    assert ex2.theta(3) == 1.0 and ex2.theta(15) == 1.0
    assert ex2.theta(16) < 1.0
    assert ex2.theta(16) == pytest.approx(1 / math.log(math.log(16)))


def test_ex2_lambda_feasible_everywhere(ex2):
    assert ex2.feasible_start() == 1
    for n in range(1, 2000):
        assert ex2.lam(n) * (1 + ex2.theta(n)) <= 1.0 + 1e-15


def test_ex1_feasible_start(ex1_half_quarter):
    # lambda_n (1 + theta_n) > 1 for n <= 3 at these parameters
    p = ex1_half_quarter
    assert p.feasible_start() == 4
    for n in range(4, 5000):
        assert p.lam(n) * (1 + p.theta(n)) <= 1.0 + 1e-15


# --- the star function ---


def test_k_star_pins(ex1_half_quarter, ex2):
    assert sc.k_star(ex2, 27) == 3
    assert sc.k_star(ex2, 255) == 3
    assert sc.k_star(ex2, 256) == 4
    assert sc.k_star(ex1_half_quarter, 100) == 2  # f(2)=64 <= 100 < f(3)=729


def test_k_star_inverse_laws(ex1_half_quarter, ex2, doubling):
    for pack in (ex1_half_quarter, ex2, doubling):
        for n in list(range(max(pack.f_start, 1), 40)) + [123, 1009]:
            assert sc.k_star(pack, pack.f(n)) == n  # (f(k))* = k
        for k in range(pack.f(max(pack.f_start, 1)), 500, 7):
            n = sc.k_star(pack, k)
            assert pack.f(n) <= k < pack.f(n + 1)


def test_k_star_below_domain_errors(ex2):
    with pytest.raises(ValueError):
        sc.k_star(ex2, 0)


@given(k=st.integers(min_value=1, max_value=10**30))
@settings(max_examples=200, deadline=None)
def test_k_star_fast_path_vs_generic(ex1_half_quarter, k):
    """The integer-root inverse agrees with doubling + binary search."""
    pack = ex1_half_quarter
    fast = sc.k_star(pack, k)

    hi = 1
    while pack.f(hi) <= k:
        hi *= 2
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pack.f(mid) <= k:
            lo = mid
        else:
            hi = mid
    assert fast == lo


# --- certified window sums ---


def test_ex2_window_sum_exact_matches_float(ex2):
    lo, hi = ex2.lam_window_sum(27, 256, 10**6)
    assert lo == hi  # exact rational
    ref = sum(1 / j for j in range(27, 257))
    assert float(lo) == pytest.approx(ref, rel=1e-12)


def test_ex1_window_sum_direct_vs_analytic(ex1_half_quarter):
    p = ex1_half_quarter
    a, b = 729, 4096
    d_lo, d_hi = p.lam_window_sum(a, b, 10**6)  # direct
    a_lo, a_hi = p.lam_window_sum(a, b, 10)  # forced analytic
    assert a_lo <= d_lo <= d_hi <= a_hi
    ref = float(np.sum(np.arange(a, b + 1, dtype=float) ** -0.5))
    assert float(d_lo) <= ref <= float(d_hi)


def test_theta_intervals_certified(ex1_half_quarter, ex2):
    th = ex1_half_quarter.theta_interval(10_000)
    assert float(th[0]) <= 0.1 <= float(th[1])
    th2 = ex2.theta_interval(27)
    ref = 1 / math.log(math.log(27))
    assert float(th2[0]) <= ref <= float(th2[1])


# --- audits ---


def test_audit_ex2_condition_iii_exact(ex2):
    report = sc.audit_acceptably_paired(ex2, 6, [Fraction(1, 2)], budget=10**7)
    cond = report.conditions["iii_delta_lower"]
    assert cond.status == "pass"
    assert cond.min_margin >= 0.0
    assert report.passed


def test_audit_ex1_all_conditions(ex1_half_quarter):
    report = sc.audit_acceptably_paired(
        ex1_half_quarter, 50, [Fraction(1), Fraction(1, 10)], budget=10**7
    )
    assert report.conditions["ii_f_strictly_increasing"].status == "pass"
    assert report.conditions["iii_delta_lower"].status == "pass"
    assert report.conditions["theta_nonincreasing"].status == "pass"
    assert report.conditions["i_theta_decay"].status == "pass"
    assert report.lambda_feasible_from == 4
    assert report.passed


def test_audit_detects_broken_delta():
    bad = sc.SyntheticPack(
        "bad-delta",
        lambda n: 2 * n,
        lambda e: 1, lambda e: 1, lambda e: 1,
        n0=1, delta=Fraction(99),
        lam=lambda n: 1.0 / (n + 1), theta=lambda n: 1.0 / (n + 1),
        f_affine=(2, 0),
    )
    report = sc.audit_acceptably_paired(bad, 8, [Fraction(1)], budget=10**6)
    assert report.conditions["iii_delta_lower"].status == "fail"
    assert not report.passed


def test_audit_detects_nonmonotone_theta():
    wavy = sc.SyntheticPack(
        "wavy",
        lambda n: 2 * n,
        lambda e: 1, lambda e: 1, lambda e: 1,
        n0=1, delta=Fraction(1, 100),
        lam=lambda n: 0.5, theta=lambda n: 0.5 + 0.1 * (n % 2),
        f_affine=(2, 0),
    )
    report = sc.audit_acceptably_paired(wavy, 10, [Fraction(1)], budget=10**6)
    assert report.conditions["theta_nonincreasing"].status == "fail"


def test_audit_report_json_shape(ex2):
    js = sc.audit_acceptably_paired(ex2, 5, [Fraction(1, 2)], budget=10**6).to_json()
    assert js["family"] == "ex2"
    assert set(js["conditions"]) >= {
        "theta_nonincreasing", "i_theta_decay", "ii_f_strictly_increasing",
        "iii_delta_lower", "iv_theta_gap_decay", "v_lambda_sq_decay",
    }


# --- the power-family intermediate bound: theta_{f(n)} sum > d(1-q)/(1-p) - 1
# for all n >= 1, i.e. condition (iii) already from n = 1 with n0 = 1.


def test_ex1_intermediate_bound_from_one(ex1_half_quarter):
    p = ex1_half_quarter
    target = p.delta  # d(1-q)/(1-p) - 1
    for n in range(1, 12):
        a, b = p.f(n), p.f(n + 1)
        s_lo = p.lam_window_sum(a, b, 10**7)[0]
        th_lo = p.theta_interval(a)[0]
        assert th_lo * s_lo > target


# --- Taylor bracketing oracle: for x > 0, r != 1 there is xi in (x, x+1)
# with (x+1)^r = x^r + r xi^(r-1); bracketing by the endpoint powers.


def _taylor_two_sided(x: float, r: float):
    lo_end = min(x ** (r - 1), (x + 1) ** (r - 1))
    hi_end = max(x ** (r - 1), (x + 1) ** (r - 1))
    val = (x + 1) ** r
    base = x**r
    if r > 0:
        return base + r * lo_end, val, base + r * hi_end
    return base + r * hi_end, val, base + r * lo_end


@given(
    st.floats(min_value=1.0001, max_value=1e6),
    st.floats(min_value=-3, max_value=3).filter(lambda r: abs(r - 1) > 1e-3 and abs(r) > 1e-3),
)
@settings(max_examples=400, deadline=None)
def test_taylor_bracketing_oracle(x, r):
    lo, val, hi = _taylor_two_sided(x, r)
    slack = 1e-12 * max(1.0, abs(val))
    assert lo - slack <= val <= hi + slack


@given(
    st.floats(min_value=2.0, max_value=1e6),
    st.floats(min_value=-3, max_value=3).filter(lambda r: abs(r - 1) > 1e-3 and abs(r) > 1e-3),
)
@settings(max_examples=200, deadline=None)
def test_taylor_backward_bracketing_oracle(x, r):
    # (x-1)^r = x^r - r nu^(r-1) for nu in (x-1, x)
    lo_end = min(x ** (r - 1), (x - 1) ** (r - 1))
    hi_end = max(x ** (r - 1), (x - 1) ** (r - 1))
    val = (x - 1) ** r
    base = x**r
    slack = 1e-12 * max(1.0, abs(val))
    if r > 0:
        assert base - r * hi_end - slack <= val <= base - r * lo_end + slack
    else:
        assert base - r * lo_end - slack <= val <= base - r * hi_end + slack


def test_log_inequality_oracle():
    """log(1+x) <= x / sqrt(1+x) for 10^4 sampled x >= 0."""
    rng = np.random.default_rng(2024)
    xs = np.concatenate([rng.uniform(0, 10, 5000), rng.uniform(0, 1e6, 5000)])
    slack = np.log1p(xs) - xs / np.sqrt(1.0 + xs)
    assert float(np.max(slack)) <= 1e-12


def test_fractional_exponent_family():
    """p = 2/5, q = 1/5 gives d = 2 and a genuinely fractional f exponent
    10/3.  The ceiling is pinned by its defining property in exact integer
    arithmetic: f(n)^3 >= n^10 > (f(n)-1)^3.  Note f(8) = 1024 exactly
    (8^(10/3) = 2^10), the case a rounded-exponent evaluation gets wrong."""
    pk = sc.ex1_pack(Fraction(2, 5), Fraction(1, 5))
    assert pk.d_exp == 2 and pk.alpha == Fraction(10, 3)
    assert pk.f(8) == 1024
    for n in range(1, 60):
        t = pk.f(n)
        assert t**3 >= n**10
        assert (t - 1) ** 3 < n**10
    for k in (1, 5, 11, 100, 1000, pk.f(9) - 1, pk.f(9), pk.f(9) + 1):
        n = sc.k_star(pk, k)
        assert pk.f(n) <= k < pk.f(n + 1)


def test_ex2_audit_analytic_mode_at_moduli(ex2):
    """With a tiny direct budget every window goes through the certified
    integral brackets; conditions (iv) and (v) are then audited at their
    actual moduli (phi2(1) = 55) instead of being skipped."""
    report = sc.audit_acceptably_paired(ex2, 60, [Fraction(1)], budget=10**4)
    iv = report.conditions["iv_theta_gap_decay"]
    v = report.conditions["v_lambda_sq_decay"]
    assert iv.status == "pass" and iv.checked >= 5 and iv.min_margin > 0.9
    assert v.status == "pass" and v.min_margin > 0.9
    assert "analytic" in iv.mode
    assert report.passed
