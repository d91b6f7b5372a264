"""Acceptance criteria, one test per criterion, each printing a pass/fail
line with its measured margin.  Run with `pytest tests/test_acceptance.py -v -s`
to see the lines as they pass."""

import math
import time
from fractions import Fraction

import numpy as np

from bruckrate import hilbert as hb
from bruckrate import iterate as it
from bruckrate import magnitude as mg
from bruckrate import rates as rt
from bruckrate import schedules as sc
from bruckrate import verify as vf


def _line(name: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_criterion_ex2_condition_iii_exact(ex2):
    """theta_{f(n)} * sum of lambda over [f(n), f(n+1)] >= 1/2 for n = 3..6,
    with exact rational summation (tolerance 0), inside 10 s."""
    t0 = time.time()
    worst = None
    for n in range(3, 7):
        a, b = ex2.f(n), ex2.f(n + 1)
        s_lo, s_hi = ex2.lam_window_sum(a, b, 10**7)
        assert s_lo == s_hi  # exact rational summation
        th_lo = ex2.theta_interval(a)[0]
        margin = th_lo * s_lo - Fraction(1, 2)
        worst = margin if worst is None else min(worst, margin)
        assert margin >= 0
    elapsed = time.time() - t0
    _line(
        "ex2 condition (iii), n=3..6, exact sums",
        worst >= 0 and elapsed < 10.0,
        f"min margin {float(worst):.4f} over 1/2, {elapsed:.2f}s",
    )


def test_criterion_ex1_audit_conditions_iii_iv_v(ex1_half_quarter):
    """Conditions (iii)-(v) at the computed moduli for eps in {1, 0.1},
    nonnegative certified margins, summation budget 10^8, inside 60 s."""
    t0 = time.time()
    report = sc.audit_acceptably_paired(
        ex1_half_quarter, 706_000, [Fraction(1), Fraction(1, 10)], budget=10**8
    )
    elapsed = time.time() - t0
    margins = {}
    ok = True
    for cond in ("iii_delta_lower", "iv_theta_gap_decay", "v_lambda_sq_decay"):
        c = report.conditions[cond]
        margins[cond] = c.min_margin
        ok = ok and c.status == "pass" and c.checked > 0 and c.min_margin >= 0
    _line(
        "ex1(1/2,1/4) conditions (iii)-(v) at computed moduli",
        ok and elapsed < 60.0,
        f"margins {{iii: {margins['iii_delta_lower']:.3f}, "
        f"iv: {margins['iv_theta_gap_decay']:.3f}, "
        f"v: {margins['v_lambda_sq_decay']:.4f}}}, {elapsed:.1f}s",
    )


def test_criterion_path_solver_vs_cubic_oracle():
    """Solver vs bisection on y^3 + theta y - theta z = 0: 20-point theta
    grid in [0.01, 1] and z in {0, 0.5, 1}, agreement within 1e-9."""

    def oracle(theta, z):
        a, b = -1.0, 1.0
        for _ in range(200):
            m = 0.5 * (a + b)
            if m**3 + theta * m - theta * z > 0:
                b = m
            else:
                a = m
        return 0.5 * (a + b)

    op = hb.OperatorSpec("cubic_decay")
    dom = hb.unit_box(1)
    worst = 0.0
    for theta in np.linspace(0.01, 1.0, 20):
        for z in (0.0, 0.5, 1.0):
            y = it.solve_path_point(op, dom, float(theta), hb.Point([z]), tol=1e-12)
            worst = max(worst, abs(y.y.coords[0] - oracle(float(theta), z)))
    _line("path solver vs cubic oracle (60 grid points)", worst <= 1e-9,
          f"worst |solver - oracle| = {worst:.2e}")


def test_criterion_descent_inequality_audit(ex1_half_quarter):
    """The squared-distance descent bound on 100 sampled (n, i) pairs of a
    10^4-step cubic run, violation at most 1e-8 over the documented slack."""
    op = hb.OperatorSpec("cubic_decay")
    dom = hb.unit_box(1)
    z = hb.Point([0.5])
    traj = it.run_bruck(op, dom, ex1_half_quarter, hb.Point([0.9]), z, 10_000)
    rng = np.random.default_rng(42)
    pairs = []
    for _ in range(100):
        i = int(rng.integers(1, 10_000))
        pairs.append((int(rng.integers(i, 10_001)), i))
    pts = {i: it.solve_path_point(op, dom, ex1_half_quarter.theta(i), z, index=i)
           for i in {i for _, i in pairs}}
    rep = it.audit_descent_inequality(traj, pts, ex1_half_quarter, 2.0, pairs)
    _line("descent inequality, 100 pairs over 10^4 steps",
          rep.max_violation <= 1e-8,
          f"max violation {rep.max_violation:.2e} (slack {rep.slack:.1e})")


def test_criterion_exact_pipeline_regression(doubling):
    """Doubling pack at eps=8, M=1, g=const 0: the rate equals
    2 (11*2^161 - 10 + 4) exactly, cross-checked against the hand-derived
    linear-recurrence closed form."""

    def orbit(a, b, n0, k):  # independent closed form (derived by hand)
        return a**k * n0 + b * (a**k - 1) // (a - 1)

    expected = 2 * (orbit(2, 10, 1, 161) + 4)
    assert expected == 2 * (11 * 2**161 - 10 + 4)
    got = rt.phi(8, rt.const_cf(0), doubling, 1)
    _line("exact pipeline regression (doubling pack)",
          got.is_exact and got.exact == expected,
          f"phi = {str(got.exact)[:24]}... ({len(str(got.exact))} digits), equal: "
          f"{got.exact == expected}")


def test_criterion_lemma_semantic_tests():
    """Window-transform and star-transform semantics, 50 randomized
    instances each, brute force over n <= 10^3."""
    rng = np.random.default_rng(7)

    def random_g():
        k = rng.integers(0, 3)
        if k == 0:
            return rt.const_cf(int(rng.integers(0, 25)))
        if k == 1:
            return rt.identity_cf()
        return rt.affine_cf(int(rng.integers(1, 3)), int(rng.integers(0, 12)))

    sub_ok = 0
    for _ in range(50):
        eps = float(rng.uniform(0.004, 0.9))
        g = random_g()
        rate = math.ceil(1 / eps)  # rate for a_n = 1/n, unchanged by g_f
        found = False
        for n in range(1, min(rate, 1000) + 1):
            end = n + g(n)
            vals = [1.0 / i**2 for i in range(n, end + 1)]  # a_{f(i)}, f = n^2
            if max(vals) - min(vals) <= eps:
                found = True
                break
        sub_ok += found

    pk = sc.SyntheticPack("sq", lambda n: n * n, lambda e: 1, lambda e: 1,
                          lambda e: 1, n0=1, delta=1,
                          f_growth=mg.PolyGrowth(2), f_start=1)
    star_ok = 0
    for _ in range(50):
        g = random_g()
        k0_thr = int(rng.integers(0, 40))
        gt = rt.transform_gtilde(pk, g)
        good = True
        for n in range(1, 101):
            if all(k >= k0_thr for k in range(n, n + gt(n) + 1)):
                m = n * n
                if not all(math.isqrt(k) >= k0_thr for k in range(m, m + g(m) + 1)):
                    good = False
        star_ok += good

    _line("lemma semantic tests (50 + 50 randomized)",
          sub_ok == 50 and star_ok == 50,
          f"subsequence {sub_ok}/50, star {star_ok}/50")


def test_criterion_empirical_metastability(ex1_half_quarter):
    """cubic_decay, x1=0.9, z=0.5, eps=0.05, g=id: a path_tracking witness exists
    within 10^6 and sits below the Phi'' upper estimate.  The bound itself is
    astronomical by design; acceptance is witness existence plus a sound
    upper comparison."""
    op = hb.OperatorSpec("cubic_decay")
    dom = hb.unit_box(1)
    run = vf.TrajectoryRun(op, dom, ex1_half_quarter, hb.Point([0.9]), hb.Point([0.5]))
    paths = vf.PathCache(op, dom, ex1_half_quarter, hb.Point([0.5]))
    res = vf.find_witness(run, paths, vf.PredicateSet("path_tracking", Fraction(1, 20)),
                          rt.identity_cf(), 10**6)
    bound = rt.phi_double_prime(Fraction(1, 20), rt.identity_cf(), ex1_half_quarter, 2)
    cmp_out = vf.check_against_bound(res.witness, bound)
    ok = (
        res.witness is not None
        and res.witness <= 10**6
        and cmp_out["comparison"] in ("le_by_estimate", "witness_le_bound")
    )
    _line("empirical metastability + bound comparison",
          ok,
          f"witness n={res.witness}, bound level={bound.level} "
          f"(value<={bound.hi:.3g}), comparison: {cmp_out['comparison']}")


def test_criterion_pseudocontractivity_scans():
    """Catalog operators stay within 1e-10 worst gap over 10^4 seeded pairs;
    the injected expansion x -> 2x shows a gap of at least 0.9."""
    worst = -math.inf
    for dim in (1, 2, 4):
        for op, dom in hb.catalog(dim):
            worst = max(worst, hb.pseudocontractivity_scan(op, dom, 10_000, seed=5))
    gap = hb.pseudocontractivity_scan(hb.OperatorSpec("scale", factor=2.0),
                                      hb.unit_box(1), 10_000, seed=5)
    _line("pseudocontractivity scans",
          worst <= 1e-10 and gap >= 0.9,
          f"catalog worst gap {worst:.2e}, injected x->2x gap {gap:.3f}")


def test_criterion_log_inequality_oracle():
    """log(1+x) <= x/sqrt(1+x) on 10^4 samples of x in [0, 10^6], half of
    them packed near 0 where the two sides touch."""
    rng = np.random.default_rng(1234)
    xs = np.concatenate([rng.uniform(0.0, 2.0, 5_000), rng.uniform(0.0, 1e6, 5_000)])
    slack = xs / np.sqrt(1.0 + xs) - np.log1p(xs)
    worst = float(np.min(slack))
    _line("log inequality oracle", worst >= -1e-12, f"min slack {worst:.3e}")
