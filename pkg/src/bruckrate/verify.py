"""Empirical metastability oracles: witness search over trajectory windows,
comparison against computed rate bounds, and the scenario suite runner."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import magnitude as mg
from . import rates as rt
from .hilbert import DomainSpec, OperatorSpec, Point
from .iterate import (
    DomainEscapeError,
    PathPoint,
    SolverDidNotConvergeError,
    Trajectory,
    audit_descent_inequality,
    extend_bruck,
    run_bruck,
    solve_path_point,
)
from .magnitude import Bound
from .rates import Counterfunction
from .schedules import ModuliPack, audit_acceptably_paired, k_star

PREDICATE_KINDS = ("cauchy", "path_pairing", "path_tracking", "asymptotic_regularity")


@dataclass(frozen=True)
class PredicateSet:
    """Which window predicates to check, at accuracy eps.

    cauchy:  ||x_i - x_j|| <= eps on the window
    path_pairing:   ||x_i - y_{f(i*)}|| <= eps and ||y_{f(i*)} - y_{f(j*)}|| <= eps
    path_tracking:   ||x_i - x_j|| <= eps, ||x_i - y_i|| <= eps, ||y_i - T y_i|| <= eps
    asymptotic_regularity:   ||x_i - x_j|| <= eps and ||x_i - T x_i|| <= eps
    All comparisons use <= (strictness differences sit below solver slack).
    """

    kind: str
    eps: Fraction

    def __post_init__(self):
        if self.kind not in PREDICATE_KINDS:
            raise ValueError(f"unknown predicate kind {self.kind!r}")
        if self.eps <= 0:
            raise ValueError("eps > 0 required")

    @property
    def needs_path(self) -> bool:
        return self.kind in ("path_pairing", "path_tracking")

    @property
    def needs_tx(self) -> bool:
        return self.kind == "asymptotic_regularity"


class TrajectoryRun:
    """A trajectory that grows on demand, together with its scenario data."""

    def __init__(self, op: OperatorSpec, domain: DomainSpec, pack: ModuliPack,
                 x1: Point, z: Point, extend_block: int = 100_000,
                 memory_window: int = 1_000_000, escape_tol: float = 1e-9):
        self.op = op
        self.domain = domain
        self.pack = pack
        self.extend_block = extend_block
        self.escape_tol = escape_tol
        self.traj = run_bruck(op, domain, pack, x1, z, 1,
                              escape_tol=escape_tol, memory_window=memory_window)

    def ensure(self, n: int) -> Trajectory:
        if len(self.traj) < n:
            target = ((n // self.extend_block) + 1) * self.extend_block
            extend_bruck(self.traj, self.op, self.domain, self.pack, target,
                         escape_tol=self.escape_tol)
        return self.traj


class PathCache:
    """Lazily solved path points keyed by trajectory index (theta_i > 0)."""

    def __init__(self, op: OperatorSpec, domain: DomainSpec, pack: ModuliPack,
                 z: Point, tol: float = 1e-10, max_iter: int = 1_000_000):
        self.op = op
        self.domain = domain
        self.pack = pack
        self.z = z
        self.tol = tol
        self.max_iter = max_iter
        self._cache: dict = {}
        self.solves = 0

    def get(self, i: int) -> PathPoint:
        pp = self._cache.get(i)
        if pp is None:
            th = self.pack.theta(i)
            if th <= 0:
                raise SolverDidNotConvergeError(
                    f"theta_{i} = 0: the path point is not defined at this index", math.inf
                )
            pp = solve_path_point(self.op, self.domain, th, self.z,
                                  tol=self.tol, max_iter=self.max_iter, index=i)
            self._cache[i] = pp
            self.solves += 1
        return pp


@dataclass
class WitnessResult:
    witness: Optional[int]
    search_limit: int
    margins: dict = field(default_factory=dict)
    scanned_to: int = 0
    per_index_rejections: int = 0
    window_rejections: int = 0
    error: Optional[str] = None


def _window_diameter(block: np.ndarray, eps: float):
    """(definitely_leq, definitely_gt) for max pairwise distance vs eps."""
    lo = block.min(axis=0)
    hi = block.max(axis=0)
    ranges = hi - lo
    upper = float(np.sqrt(np.sum(ranges * ranges)))  # diam <= coordinate box diagonal
    lower = float(np.max(ranges)) if ranges.size else 0.0
    if upper <= eps:
        return True, False, upper
    if lower > eps:
        return False, True, lower
    # gray zone: exact pairwise sweep
    worst = 0.0
    for a in range(block.shape[0]):
        d = block[a + 1 :] - block[a]
        if d.size:
            worst = max(worst, float(np.max(np.sqrt(np.sum(d * d, axis=1)))))
    return worst <= eps, worst > eps, worst


def _argmax_pair_1d(block: np.ndarray) -> tuple:
    flat = block[:, 0]
    return int(np.argmin(flat)), int(np.argmax(flat))


def find_witness(
    run: TrajectoryRun,
    paths: Optional[PathCache],
    preds: PredicateSet,
    g: Counterfunction,
    search_limit: int = 1_000_000,
) -> WitnessResult:
    """Smallest n <= search_limit with the predicates holding over
    [n; n + g(n)], solving path points lazily at the indices that need them.

    On a per-index failure at i the scan resumes at i + 1 (no window through
    a failing index can succeed); on a pairwise failure with nondecreasing g
    it resumes past the earlier element of a violating pair.
    """
    eps = float(preds.eps)
    pack = run.pack
    result = WitnessResult(None, search_limit)
    if preds.needs_path and g.eval_int is None:
        raise ValueError("witness search needs an exactly evaluable counterfunction")

    per_index_ok: dict = {}

    def index_ok(i: int) -> bool:
        ok = per_index_ok.get(i)
        if ok is None:
            ok = _per_index_predicate(run, paths, preds, i, eps)
            per_index_ok[i] = ok
        return ok

    n = 1
    if preds.needs_path:
        # skip indices whose theta vanishes: the path is undefined there
        while pack.theta(n) <= 0:
            n += 1
    while n <= search_limit:
        end = n + g(n)
        traj = run.ensure(end)
        result.scanned_to = max(result.scanned_to, end)
        bad = None
        if preds.kind != "cauchy":
            for i in range(n, end + 1):
                if not index_ok(i):
                    bad = i
                    break
        if bad is not None:
            result.per_index_rejections += 1
            n = bad + 1
            continue
        if preds.kind == "path_pairing":
            ok = _path_pairing_pairwise(run, paths, n, end, eps)
        else:
            block = traj.x_range(n, end)
            leq, gt, _ = _window_diameter(block, eps)
            ok = leq
            if not ok and g.nondecreasing and block.shape[1] == 1:
                a, b = _argmax_pair_1d(block)
                jump = n + min(a, b) + 1
                if jump > n:
                    result.window_rejections += 1
                    n = jump
                    continue
        if ok:
            result.witness = n
            result.margins = _margins_at(run, paths, preds, n, end, eps)
            return result
        result.window_rejections += 1
        n += 1
    return result


def _per_index_predicate(run, paths, preds, i, eps) -> bool:
    if preds.kind == "cauchy":
        return True
    traj = run.ensure(i)
    xi = traj.x(i)
    if preds.kind == "asymptotic_regularity":
        txi = run.op.apply_array(xi)
        return float(np.linalg.norm(xi - txi)) <= eps
    if preds.kind == "path_tracking":
        pp = paths.get(i)
        y = pp.y.coords
        if float(np.linalg.norm(xi - y)) > eps:
            return False
        ty = run.op.apply_array(y)
        return float(np.linalg.norm(y - ty)) <= eps
    # path_pairing: ||x_i - y_{f(i*)}||
    idx = _f_istar(run.pack, i)
    pp = paths.get(idx)
    return float(np.linalg.norm(xi - pp.y.coords)) <= eps


def _f_istar(pack: ModuliPack, i: int) -> int:
    return pack.f(k_star(pack, i))


def _path_pairing_pairwise(run, paths, n, end, eps) -> bool:
    idxs = sorted({_f_istar(run.pack, i) for i in range(n, end + 1)})
    ys = [paths.get(j).y.coords for j in idxs]
    for a in range(len(ys)):
        for b in range(a + 1, len(ys)):
            if float(np.linalg.norm(ys[a] - ys[b])) > eps:
                return False
    return True


def _margins_at(run, paths, preds, n, end, eps) -> dict:
    traj = run.ensure(end)
    out: dict = {"eps": eps, "window": [n, end]}
    if preds.kind in ("cauchy", "path_tracking", "asymptotic_regularity"):
        block = traj.x_range(n, end)
        _, _, diam = _window_diameter(block, eps)
        out["pairwise_x"] = eps - diam
    if preds.kind == "path_tracking":
        worst_xy = max(
            float(np.linalg.norm(traj.x(i) - paths.get(i).y.coords)) for i in range(n, end + 1)
        )
        worst_ty = max(
            float(np.linalg.norm(paths.get(i).y.coords - run.op.apply_array(paths.get(i).y.coords)))
            for i in range(n, end + 1)
        )
        out["x_minus_y"] = eps - worst_xy
        out["y_residual"] = eps - worst_ty
    if preds.kind == "asymptotic_regularity":
        worst = max(
            float(np.linalg.norm(traj.x(i) - run.op.apply_array(traj.x(i))))
            for i in range(n, end + 1)
        )
        out["x_minus_Tx"] = eps - worst
    if preds.kind == "path_pairing":
        worst = max(
            float(np.linalg.norm(traj.x(i) - paths.get(_f_istar(run.pack, i)).y.coords))
            for i in range(n, end + 1)
        )
        out["x_minus_y_fstar"] = eps - worst
    return out


# ---------------------------------------------------------------------------
# bound comparison


def check_against_bound(witness: Optional[int], bound: Bound) -> dict:
    """Compare a found witness against a rate Bound.

    Exact bounds give exact verdicts.  Magnitude bounds compare against the
    upper estimate ('<= by estimate') and never claim a violation: an upper
    estimate alone cannot falsify the rate."""
    if witness is None:
        return {"comparison": "no_witness_within_search_limit", "claim_tested": False}
    w = mg.promote(witness)
    if bound.is_exact:
        c = mg.compare(w, bound)
        return {
            "comparison": "witness_le_bound" if c in ("lt", "eq") else "witness_gt_bound",
            "claim_tested": True,
        }
    upper = Bound(None, bound.level, bound.hi, bound.hi, ("upper-estimate",))
    if mg.compare(w, upper) in ("lt", "eq"):
        out = {"comparison": "le_by_estimate", "claim_tested": True}
        if bound.lo is not None:
            lower = Bound(None, bound.level, bound.lo, bound.lo, ("lower-estimate",))
            if mg.compare(w, lower) in ("lt", "eq"):
                out["below_lower_estimate"] = True  # w <= lower <= true bound
        return out
    return {
        "comparison": "indeterminate",
        "claim_tested": False,
        "note": "witness exceeds the upper estimate; no violation is claimed from an estimate",
    }


# ---------------------------------------------------------------------------
# scenario suite


@dataclass
class Scenario:
    name: str
    op: OperatorSpec
    domain: DomainSpec
    pack: ModuliPack
    x1: Point
    z: Point
    preds: PredicateSet
    g: Counterfunction
    search_limit: int = 1_000_000
    seed: int = 0
    path_tol: float = 1e-10
    functional: Optional[str] = None  # default chosen from preds.kind
    d_const_policy: str = "M"
    audit_nmax: int = 6
    descent_pairs: int = 50
    digit_cap: Optional[int] = None

    def bound_functional(self) -> str:
        if self.functional:
            return self.functional
        return {
            "cauchy": "phi_prime",
            "path_pairing": "phi",
            "path_tracking": "phi_double_prime",
            "asymptotic_regularity": "delta",
        }[self.preds.kind]


@dataclass
class VerificationReport:
    scenario: str
    status: str  # pass | fail | error
    witness: Optional[int]
    search_limit: int
    bound: Optional[dict]
    bound_comparison: Optional[dict]
    margins: dict
    audits: dict
    runtime: dict
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "witness": self.witness,
            "search_limit": self.search_limit,
            "bound": self.bound,
            "bound_comparison": self.bound_comparison,
            "margins": self.margins,
            "audits": self.audits,
            "runtime": self.runtime,
            "error": self.error,
        }


def _compute_bound(s: Scenario) -> tuple:
    m = s.domain.diameter_bound
    kind = s.bound_functional()
    if kind == "phi":
        pipe = rt.phi_pipeline(s.preds.eps, s.g, s.pack, m, d_const_policy=s.d_const_policy,
                               digit_cap=s.digit_cap)
        return pipe.bound, pipe.to_json()
    if kind == "phi_prime":
        pipe = rt.phi_pipeline(Fraction(s.preds.eps) / 3, s.g, s.pack, m,
                               d_const_policy=s.d_const_policy, digit_cap=s.digit_cap)
        return pipe.bound, pipe.to_json()
    if kind == "phi_double_prime":
        pipe = rt.phi_double_prime_pipeline(s.preds.eps, s.g, s.pack, m,
                                            d_const_policy=s.d_const_policy, digit_cap=s.digit_cap)
        return pipe.bound, pipe.to_json()
    if kind == "delta":
        omega = s.pack.omega or (lambda e: Fraction(e) / Fraction(str(s.op.default_lipschitz())))
        res = rt.delta_bound_pipeline(s.preds.eps, s.g, s.pack, m, omega=omega,
                                      d_const_policy=s.d_const_policy, digit_cap=s.digit_cap)
        return res.bound, res.to_json()
    raise ValueError(f"unknown functional {kind!r}")


def asymptotic_regularity_horizon(run: TrajectoryRun, threshold: float = 0.05,
                                  limit: int = 20_000) -> Optional[int]:
    """First index with ||x_n - T x_n|| below the threshold (empirical)."""
    traj = run.ensure(min(max(len(run.traj), 2000), limit))
    upto = min(len(traj), limit)
    step = 4096
    for lo in range(1, upto + 1, step):
        hi = min(lo + step - 1, upto)
        block = traj.x_range(lo, hi)
        res = np.linalg.norm(block - run.op.apply_array(block), axis=1)
        idx = np.nonzero(res < threshold)[0]
        if idx.size:
            return lo + int(idx[0])
    return None


def run_scenario(s: Scenario) -> VerificationReport:
    t0 = time.time()
    audits: dict = {}
    margins: dict = {}
    try:
        run = TrajectoryRun(s.op, s.domain, s.pack, s.x1, s.z)
        paths = PathCache(s.op, s.domain, s.pack, s.z, tol=s.path_tol)
        wit = find_witness(run, paths, s.preds, s.g, s.search_limit)
        margins = wit.margins
        margins["asymptotic_regularity_horizon"] = asymptotic_regularity_horizon(run)
        bound, bound_json = _compute_bound(s)
        comparison = check_against_bound(wit.witness, bound)
        audits["acceptably_paired"] = audit_acceptably_paired(
            s.pack, s.audit_nmax, [s.preds.eps], budget=10**7
        ).to_json()
        audits["descent"] = _descent_audit(s, run, paths).to_json()
        t1 = time.time()
        status = "pass"
        if wit.witness is None:
            status = "fail"
        if not audits["acceptably_paired"]["passed"] or not audits["descent"]["passed"]:
            status = "fail"
        if comparison["comparison"] == "witness_gt_bound":
            status = "fail"
        return VerificationReport(
            s.name, status, wit.witness, s.search_limit, bound_json, comparison,
            margins, audits,
            {"seconds": round(t1 - t0, 3), "trajectory_points": len(run.traj),
             "path_solves": paths.solves, "scanned_to": wit.scanned_to},
        )
    except (DomainEscapeError, SolverDidNotConvergeError, rt.RateParameterError,
            mg.MagnitudeOverflowError, ValueError) as exc:
        return VerificationReport(
            s.name, "fail", None, s.search_limit, None, None, margins, audits,
            {"seconds": round(time.time() - t0, 3)},
            error=f"{type(exc).__name__}: {exc}",
        )


def _descent_audit(s: Scenario, run: TrajectoryRun, paths: PathCache):
    horizon = min(max(len(run.traj), 1000), 5000)
    traj = run.ensure(horizon)
    rng = np.random.default_rng(s.seed)
    pairs = []
    for _ in range(s.descent_pairs):
        start = 1
        while s.pack.theta(start) <= 0:
            start += 1
        i = int(rng.integers(start, horizon))
        n = int(rng.integers(i, horizon + 1))
        pairs.append((n, i))
    pts = {i: paths.get(i) for _, i in pairs}
    return audit_descent_inequality(
        traj, pts, s.pack, float(s.domain.diameter_bound), pairs, path_tol=s.path_tol
    )


def run_suite(scenarios: list, workers: int = 1) -> list:
    """One report per scenario, merged in input order; failures are contained
    per scenario and never abort the suite."""
    if workers <= 1:
        return [run_scenario(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_scenario, scenarios))


def reports_to_json(reports: list) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2)
