"""The Bruck iteration and the implicit resolvent path, with residual audits.

x_{n+1} = (1 - l_n) x_n + l_n T x_n + l_n t_n (z - x_n)  for n >= 1, and the
path points y solving y = (1/(1+theta)) T y + (theta/(1+theta)) z.  Long
trajectories stream older chunks to disk so multi-million-step runs stay
cheap on memory.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hilbert import DomainSpec, OperatorSpec, Point, lipschitz_estimate
from .schedules import ModuliPack

CHUNK = 100_000


class DomainEscapeError(RuntimeError):
    """An iterate left the domain beyond tolerance: the operator/domain/pack
    combination violates the scheme's self-mapping hypotheses."""


class SolverDidNotConvergeError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


class Trajectory:
    """Iterates x_1 .. x_N (1-based) plus the lambda/theta values used.

    Data lives in fixed-size chunks; chunks older than `memory_window` points
    are flushed to a spill file and memory-mapped back on demand.
    """

    def __init__(self, dim: int, x1: Point, z: Point, memory_window: int = 1_000_000,
                 spill_dir: Optional[str] = None):
        self.dim = dim
        self.x1 = x1
        self.z = z
        self.memory_window = max(memory_window, 2 * CHUNK)
        self._spill_dir = spill_dir
        self._chunks: dict = {}
        self._spilled: dict = {}
        self._spill_file = None
        self._length = 0
        self._lam = []
        self._theta = []
        self._lam_prefix = [0.0]  # prefix sums over used lambda (index 0 empty)
        self._lam_sq_prefix = [0.0]
        self._append(x1.coords)

    # -- storage -------------------------------------------------------------

    def _chunk_of(self, i: int) -> tuple:
        return (i - 1) // CHUNK, (i - 1) % CHUNK

    def _append(self, coords: np.ndarray):
        ci, off = self._chunk_of(self._length + 1)
        if ci not in self._chunks and ci not in self._spilled:
            self._chunks[ci] = np.empty((CHUNK, self.dim), dtype=np.float64)
            self._maybe_spill(active=ci)
        self._chunks[ci][off] = coords
        self._length += 1

    def _maybe_spill(self, active: int):
        live = [k for k in self._chunks if k != active]
        max_live = max(self.memory_window // CHUNK, 1)
        if len(live) <= max_live:
            return
        live.sort()
        for k in live[:-max_live]:
            self._spill_chunk(k)

    def _spill_chunk(self, k: int):
        if self._spill_file is None:
            fd, path = tempfile.mkstemp(
                suffix=".traj.bin", dir=self._spill_dir, prefix="bruckrate."
            )
            os.close(fd)
            self._spill_file = path
        offset_bytes = k * CHUNK * self.dim * 8
        with open(self._spill_file, "r+b" if os.path.getsize(self._spill_file) else "wb") as fh:
            fh.seek(offset_bytes)
            fh.write(self._chunks[k].tobytes())
        self._spilled[k] = offset_bytes
        del self._chunks[k]

    def _load_chunk(self, k: int) -> np.ndarray:
        if k in self._chunks:
            return self._chunks[k]
        mm = np.memmap(self._spill_file, dtype=np.float64, mode="r",
                       offset=self._spilled[k], shape=(CHUNK, self.dim))
        return mm

    def close(self):
        if self._spill_file is not None and os.path.exists(self._spill_file):
            os.unlink(self._spill_file)
            self._spill_file = None

    # -- access ---------------------------------------------------------------

    def __len__(self) -> int:
        return self._length

    def x(self, i: int) -> np.ndarray:
        if not (1 <= i <= self._length):
            raise IndexError(f"index {i} outside 1..{self._length}")
        ci, off = self._chunk_of(i)
        return np.array(self._load_chunk(ci)[off])

    def x_range(self, i: int, j: int) -> np.ndarray:
        """Rows x_i .. x_j inclusive."""
        if not (1 <= i <= j <= self._length):
            raise IndexError(f"range {i}..{j} outside 1..{self._length}")
        out = np.empty((j - i + 1, self.dim))
        pos = i
        while pos <= j:
            ci, off = self._chunk_of(pos)
            take = min(CHUNK - off, j - pos + 1)
            out[pos - i : pos - i + take] = self._load_chunk(ci)[off : off + take]
            pos += take
        return out

    def point(self, i: int) -> Point:
        return Point(self.x(i))

    def lam_used(self, n: int) -> float:
        return self._lam[n - 1]

    def theta_used(self, n: int) -> float:
        return self._theta[n - 1]

    def lam_window(self, i: int, n: int) -> float:
        """sum of lambda_j for j in [i, n-1] (used values)."""
        return self._lam_prefix[n - 1] - self._lam_prefix[i - 1]

    def lam_sq_window(self, i: int, n: int) -> float:
        return self._lam_sq_prefix[n - 1] - self._lam_sq_prefix[i - 1]


def run_bruck(
    op: OperatorSpec,
    domain: DomainSpec,
    pack: ModuliPack,
    x1: Point,
    z: Point,
    steps: int,
    escape_tol: float = 1e-9,
    memory_window: int = 1_000_000,
    spill_dir: Optional[str] = None,
) -> Trajectory:
    """Run the iteration for `steps` steps, yielding x_1 .. x_{steps+1}."""
    if steps < 1:
        raise ValueError("steps >= 1")
    for pt, name in ((x1, "x1"), (z, "z")):
        if not domain.contains(pt, tol=1e-12):
            raise DomainEscapeError(f"{name} outside the domain")
    traj = Trajectory(domain.dim, x1, z, memory_window=memory_window, spill_dir=spill_dir)
    extend_bruck(traj, op, domain, pack, steps + 1, escape_tol=escape_tol)
    return traj


def extend_bruck(
    traj: Trajectory,
    op: OperatorSpec,
    domain: DomainSpec,
    pack: ModuliPack,
    target_len: int,
    escape_tol: float = 1e-9,
) -> None:
    """Grow a trajectory in place until it holds target_len points."""
    if target_len <= len(traj):
        return
    scal = op.scalar() if traj.dim == 1 else None
    z = traj.z.coords
    lam_p = traj._lam_prefix
    lsq_p = traj._lam_sq_prefix
    if scal is not None:
        lo, hi = domain.interval()
        xv = float(traj.x(len(traj))[0])
        zv = float(z[0])
        for n in range(len(traj), target_len):
            lam = pack.lam(n)
            th = pack.theta(n)
            xv = (1.0 - lam) * xv + lam * scal(xv) + lam * th * (zv - xv)
            if xv < lo - escape_tol or xv > hi + escape_tol:
                raise DomainEscapeError(
                    f"iterate x_{n + 1} = {xv} escaped [{lo}, {hi}] (operator/domain misconfiguration)"
                )
            traj._lam.append(lam)
            traj._theta.append(th)
            lam_p.append(lam_p[-1] + lam)
            lsq_p.append(lsq_p[-1] + lam * lam)
            traj._append(np.array([xv]))
        return
    xv = traj.x(len(traj))
    for n in range(len(traj), target_len):
        lam = pack.lam(n)
        th = pack.theta(n)
        tx = op.apply_array(xv)
        xv = (1.0 - lam) * xv + lam * tx + lam * th * (z - xv)
        pt = Point(xv)
        esc = domain.escape_distance(pt)
        if esc > escape_tol:
            raise DomainEscapeError(
                f"iterate x_{n + 1} escaped the domain by {esc} (operator/domain misconfiguration)"
            )
        traj._lam.append(lam)
        traj._theta.append(th)
        lam_p.append(lam_p[-1] + lam)
        lsq_p.append(lsq_p[-1] + lam * lam)
        traj._append(xv)


def recurrence_residual(traj: Trajectory, op: OperatorSpec, n: int) -> float:
    """||x_{n+1} - [(1-l)x_n + l T x_n + l t (z - x_n)]|| recomputed."""
    xn = traj.x(n)
    lam, th = traj.lam_used(n), traj.theta_used(n)
    expected = (1.0 - lam) * xn + lam * op.apply_array(xn) + lam * th * (traj.z.coords - xn)
    return float(np.linalg.norm(traj.x(n + 1) - expected))


# ---------------------------------------------------------------------------
# the implicit path


@dataclass(frozen=True)
class PathPoint:
    index: Optional[int]
    theta: float
    y: Point
    residual: float
    solver_iterations: int


def _path_residual(op: OperatorSpec, theta: float, z: np.ndarray, y: np.ndarray) -> float:
    ty = op.apply_array(y)
    return float(np.linalg.norm(y - ty / (1.0 + theta) - theta / (1.0 + theta) * z))


def solve_path_point(
    op: OperatorSpec,
    domain: DomainSpec,
    theta: float,
    z: Point,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    index: Optional[int] = None,
) -> PathPoint:
    """Solve y = (1/(1+theta)) T y + (theta/(1+theta)) z.

    1-d domains use bisection on the strictly increasing map
    h(y) = (1+theta) y - T y - theta z; higher dimensions use the damped
    fixed-point iteration y <- y - a (y - F y) with a = mu / L^2 for the
    strong-monotonicity constant mu = theta/(1+theta) and Lipschitz constant
    L = 1 + L_T/(1+theta).
    """
    if theta <= 0:
        raise ValueError("theta > 0 required (the path degenerates at 0)")
    if tol <= 0:
        raise ValueError("tol > 0 required")
    if not domain.contains(z, tol=1e-12):
        raise ValueError("z outside domain")
    zc = z.coords
    if domain.dim == 1:
        lo, hi = domain.interval()
        t_apply = op.scalar() or (lambda t: float(op.apply_array(np.array([t]))[0]))

        def h(y: float) -> float:
            return (1.0 + theta) * y - t_apply(y) - theta * float(zc[0])

        iters = 0
        a, b = lo, hi
        best = 0.5 * (a + b)
        while iters < max_iter:
            mid = 0.5 * (a + b)
            iters += 1
            if h(mid) > 0.0:
                b = mid
            else:
                a = mid
            best = 0.5 * (a + b)
            if _path_residual(op, theta, zc, np.array([best])) <= tol:
                y = Point(np.array([best]))
                return PathPoint(index, theta, y, _path_residual(op, theta, zc, y.coords), iters)
            if b - a < 1e-300:
                break
        res = _path_residual(op, theta, zc, np.array([best]))
        raise SolverDidNotConvergeError(
            f"bisection stalled at residual {res} after {iters} iterations", res
        )
    lip = op.default_lipschitz()
    if op.lipschitz_hint is None and op.kind == "affine_nonexpansive":
        lip = max(lip, lipschitz_estimate(op, domain, 2000, seed=0))
    mu = theta / (1.0 + theta)
    big_l = 1.0 + lip / (1.0 + theta)
    alpha = mu / (big_l * big_l)
    y = np.array(zc, dtype=np.float64)
    best_res = math.inf
    for it in range(1, max_iter + 1):
        fy = (op.apply_array(y) + theta * zc) / (1.0 + theta)
        y = y - alpha * (y - fy)
        if it % 16 == 0 or it < 64:
            res = _path_residual(op, theta, zc, y)
            best_res = min(best_res, res)
            if res <= tol:
                return PathPoint(index, theta, Point(y), res, it)
    res = _path_residual(op, theta, zc, y)
    raise SolverDidNotConvergeError(
        f"damped iteration reached max_iter with residual {res}", min(res, best_res)
    )


# ---------------------------------------------------------------------------
# the descent-inequality audit


@dataclass
class DescentAuditRow:
    n: int
    i: int
    lhs: float
    rhs: float

    @property
    def violation(self) -> float:
        return self.lhs - self.rhs


@dataclass
class DescentAuditReport:
    rows: list
    slack: float
    max_violation: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "pairs": len(self.rows),
            "slack": self.slack,
            "max_violation": self.max_violation,
            "passed": self.passed,
        }


def audit_descent_inequality(
    traj: Trajectory,
    paths: dict,
    pack: ModuliPack,
    m_diam: float,
    pairs: list,
    path_tol: float = 1e-10,
) -> DescentAuditReport:
    """Check, for each (n, i) with n >= i,

        ||x_n - y_i||^2 <= exp(-2 t_i sum_{j=i}^{n-1} l_j) ||x_i - y_i||^2
                           + 2 M^2 (t_i - t_n) sum l_j + 4 M^2 sum l_j^2.

    The solved y_i carries residual <= path_tol, which perturbs both sides by
    at most 4*M*path_tol + path_tol^2 (documented slack).
    """
    slack = 4.0 * m_diam * path_tol + path_tol * path_tol + 1e-12
    rows = []
    worst = -math.inf
    for n, i in pairs:
        if n < i:
            raise ValueError("pairs need n >= i")
        y = paths[i].y.coords
        xi = traj.x(i)
        xn = traj.x(n)
        th_i = pack.theta(i)
        th_n = pack.theta(n)
        s1 = traj.lam_window(i, n)
        s2 = traj.lam_sq_window(i, n)
        lhs = float(np.dot(xn - y, xn - y))
        rhs = (
            math.exp(-2.0 * th_i * s1) * float(np.dot(xi - y, xi - y))
            + 2.0 * m_diam * m_diam * (th_i - th_n) * s1
            + 4.0 * m_diam * m_diam * s2
        )
        rows.append(DescentAuditRow(n, i, lhs, rhs))
        worst = max(worst, lhs - rhs)
    return DescentAuditReport(rows, slack, worst, worst <= slack)


def subsequence_descent_audit(
    traj: Trajectory,
    paths: dict,
    pack: ModuliPack,
    m_diam: float,
    k_values: list,
    path_tol: float = 1e-10,
) -> DescentAuditReport:
    """The subsequence form: for k with f(k+1) inside the trajectory,

        ||x_{f(k+1)} - y_{f(k)}||^2 <= exp(-2 t_{f(k)} S) exp(2 t_{f(k)} l_{f(k+1)})
            ||x_{f(k)} - y_{f(k)}||^2 + 2 M^2 (t_{f(k)} - t_{f(k+1)}) S + 4 M^2 S_2,

    with S, S_2 the lambda and lambda^2 sums over [f(k), f(k+1)] inclusive.
    """
    slack = 4.0 * m_diam * path_tol + path_tol * path_tol + 1e-12
    rows = []
    worst = -math.inf
    for k in k_values:
        a, b = pack.f(k), pack.f(k + 1)
        y = paths[a].y.coords
        xa = traj.x(a)
        xb = traj.x(b)
        th_a, th_b = pack.theta(a), pack.theta(b)
        s1 = traj.lam_window(a, b) + pack.lam(b)  # inclusive of f(k+1)
        s2 = traj.lam_sq_window(a, b) + pack.lam(b) ** 2
        lhs = float(np.dot(xb - y, xb - y))
        rhs = (
            math.exp(-2.0 * th_a * s1)
            * math.exp(2.0 * th_a * pack.lam(b))
            * float(np.dot(xa - y, xa - y))
            + 2.0 * m_diam * m_diam * (th_a - th_b) * s1
            + 4.0 * m_diam * m_diam * s2
        )
        rows.append(DescentAuditRow(b, a, lhs, rhs))
        worst = max(worst, lhs - rhs)
    return DescentAuditReport(rows, slack, worst, worst <= slack)
