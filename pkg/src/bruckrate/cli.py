"""Command-line entry point: scenario configuration, the counterfunction DSL,
and CSV/JSON artifact emission.

Subcommands: moduli (evaluate/audit a pack), iterate (trajectory CSV), path
(path-point CSV), bound (rate-functional JSON), verify (scenario suite),
plotdata (long-format residual CSV).  Exit codes: 0 success, 1 verification
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import magnitude as mg
from . import rates as rt
from . import schedules as sc
from . import verify as vf
from .hilbert import DomainSpec, OperatorSpec, Point, unit_ball, unit_box
from .iterate import run_bruck, solve_path_point
from .rates import Counterfunction

DIGIT_CAP_ENV = "BRUCKRATE_DIGIT_CAP"

FMT = "%.17g"  # enough digits to reproduce float64 bitwise


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# counterfunction DSL


@dataclass(frozen=True)
class CounterfunctionExpr:
    """Parsed form of the DSL: const NAT | id | affine NAT NAT | pow NAT |
    table PATH.  parse -> print -> parse is the identity."""

    form: str
    args: tuple

    def print(self) -> str:
        if self.form == "id":
            return "id"
        return " ".join([self.form, *map(str, self.args)])

    def build(self) -> Counterfunction:
        if self.form == "const":
            return rt.const_cf(self.args[0])
        if self.form == "id":
            return rt.identity_cf()
        if self.form == "affine":
            return rt.affine_cf(*self.args)
        if self.form == "pow":
            return rt.power_cf(self.args[0])
        values = _read_table(self.args[0])
        return rt.table_cf(values, source=f"table {self.args[0]}")


def _read_table(path: str) -> list:
    try:
        with open(path) as fh:
            tokens = fh.read().replace(",", " ").split()
    except OSError as exc:
        raise ConfigError(f"cannot read table file {path!r}: {exc}") from exc
    if not tokens:
        raise ConfigError(f"empty table file {path!r}")
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ConfigError(f"table file {path!r} has a non-natural entry: {exc}") from exc


def parse_counterfunction(text: str) -> CounterfunctionExpr:
    """Parse the DSL, reporting the offending token position on error."""
    tokens = text.split()
    if not tokens:
        raise ConfigError("empty counterfunction expression")

    def nat(i: int) -> int:
        if i >= len(tokens):
            raise ConfigError(f"{text!r}: missing argument at position {i}")
        try:
            v = int(tokens[i])
        except ValueError:
            raise ConfigError(f"{text!r}: expected a natural at token {i}, got {tokens[i]!r}")
        if v < 0:
            raise ConfigError(f"{text!r}: expected a natural at token {i}, got {v}")
        return v

    head = tokens[0]
    if head == "const":
        expr = CounterfunctionExpr("const", (nat(1),))
        extra = 2
    elif head == "id":
        expr = CounterfunctionExpr("id", ())
        extra = 1
    elif head == "affine":
        expr = CounterfunctionExpr("affine", (nat(1), nat(2)))
        extra = 3
    elif head == "pow":
        v = nat(1)
        if v < 1:
            raise ConfigError(f"{text!r}: pow needs exponent >= 1")
        expr = CounterfunctionExpr("pow", (v,))
        extra = 2
    elif head == "table":
        if len(tokens) < 2:
            raise ConfigError(f"{text!r}: table needs a file path")
        expr = CounterfunctionExpr("table", (tokens[1],))
        extra = 2
    else:
        raise ConfigError(f"{text!r}: unknown form {head!r} at token 0")
    if len(tokens) > extra:
        raise ConfigError(f"{text!r}: trailing tokens from position {extra}")
    return expr


# ---------------------------------------------------------------------------
# scenario configuration


@dataclass
class ScenarioConfig:
    """The flat configuration document; CLI flags override file values."""

    operator: dict
    family: dict
    domain: Optional[dict] = None
    dim: int = 1
    x1: Optional[list] = None
    z: Optional[list] = None
    eps: str = "1/20"
    g: str = "id"
    preds: str = "path_tracking"
    steps: int = 1000
    search_limit: int = 1_000_000
    seed: int = 0
    tol: float = 1e-10
    digit_cap: Optional[int] = None
    d_const_policy: str = "M"
    name: Optional[str] = None

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        known = {f for f in ScenarioConfig.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "operator" not in d or "family" not in d:
            raise ConfigError("config needs at least 'operator' and 'family'")
        return ScenarioConfig(**d)

    def to_dict(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        return out

    def build(self) -> vf.Scenario:
        errors = []
        try:
            op = OperatorSpec.from_config(self.operator)
        except (ValueError, KeyError) as exc:
            errors.append(f"operator: {exc}")
            op = None
        try:
            pack = sc.pack_from_family_config(self.family)
        except (ValueError, KeyError) as exc:
            errors.append(f"family: {exc}")
            pack = None
        if self.domain is not None:
            try:
                domain = DomainSpec.from_config(self.domain)
            except (ValueError, KeyError) as exc:
                errors.append(f"domain: {exc}")
                domain = None
        else:
            domain = _default_domain(op, self.dim) if op else None
        try:
            g = parse_counterfunction(self.g).build()
        except ConfigError as exc:
            errors.append(str(exc))
            g = None
        try:
            preds = vf.PredicateSet(self.preds, Fraction(self.eps))
        except (ValueError, ZeroDivisionError) as exc:
            errors.append(f"preds/eps: {exc}")
            preds = None
        x1 = Point(self.x1) if self.x1 is not None else _default_x1(domain)
        z = Point(self.z) if self.z is not None else (
            Point(domain.center.coords) if domain else None
        )
        if domain is not None:
            for pt, nm in ((x1, "x1"), (z, "z")):
                if pt is not None and not domain.contains(pt, tol=1e-12):
                    errors.append(f"{nm} outside the configured domain")
        if errors:
            raise ConfigError("; ".join(errors))
        name = self.name or f"{op.kind}/{pack.family_tag}/{self.preds}/eps={self.eps}"
        return vf.Scenario(
            name, op, domain, pack, x1, z, preds, g,
            search_limit=self.search_limit, seed=self.seed, path_tol=self.tol,
            d_const_policy=self.d_const_policy, digit_cap=self.digit_cap,
        )


def _default_domain(op: Optional[OperatorSpec], dim: int) -> DomainSpec:
    if op is not None and op.kind == "rotation":
        return unit_ball(max(dim, 2))
    return unit_box(dim)


def _default_x1(domain: Optional[DomainSpec]) -> Optional[Point]:
    if domain is None:
        return None
    c = np.array(domain.center.coords, copy=True)
    c[0] += 0.9 * domain.radius_or_halfwidth
    return Point(c)


def _pack_from_args(args) -> sc.ModuliPack:
    fam = {"name": args.family}
    if args.family == "ex1":
        if args.p is None or args.q is None:
            raise ConfigError("ex1 needs --p and --q")
        fam["p"], fam["q"] = args.p, args.q
    return sc.pack_from_family_config(fam)


def _operator_from_args(args) -> OperatorSpec:
    kw = {}
    if args.angle is not None:
        kw["angle"] = args.angle
    if args.factor is not None:
        kw["factor"] = args.factor
    if args.lipschitz is not None:
        kw["lipschitz_hint"] = args.lipschitz
    return OperatorSpec(args.op, **kw)


def _parse_points(text: str) -> Point:
    return Point([float(t) for t in text.split(",")])


# ---------------------------------------------------------------------------
# subcommands


def _cmd_moduli(args) -> int:
    pack = _pack_from_args(args)
    eps_grid = [Fraction(e) for e in (args.eps or ["1", "1/10"])]
    out = {
        "family": pack.family_tag,
        "n0": pack.n0,
        "delta": str(pack.delta),
        "f_prefix": [pack.f(n) for n in range(max(pack.f_start, 0), max(pack.f_start, 0) + 8)],
        "lambda_feasible_from": pack.feasible_start(),
        "moduli": {
            str(e): {
                "phi1": pack.phi1(e).to_json(),
                "phi2": pack.phi2(e).to_json(),
                "phi3": pack.phi3(e).to_json(),
            }
            for e in eps_grid
        },
    }
    if args.audit:
        report = sc.audit_acceptably_paired(pack, args.nmax, eps_grid, budget=args.budget)
        out["audit"] = report.to_json()
        _emit(args, out)
        return 0 if report.passed else 1
    _emit(args, out)
    return 0


def _cmd_iterate(args) -> int:
    pack = _pack_from_args(args)
    op = _operator_from_args(args)
    domain = _domain_from_args(args, op)
    x1 = _parse_points(args.x1) if args.x1 else _default_x1(domain)
    z = _parse_points(args.z) if args.z else Point(domain.center.coords)
    traj = run_bruck(op, domain, pack, x1, z, args.steps)
    lines = [",".join(["n", "lambda", "theta"] + [f"x_{c}" for c in range(domain.dim)])]
    for n in range(1, len(traj) + 1):
        lam = traj.lam_used(n) if n < len(traj) else pack.lam(n)
        th = traj.theta_used(n) if n < len(traj) else pack.theta(n)
        coords = ",".join(FMT % v for v in traj.x(n))
        lines.append(f"{n},{FMT % lam},{FMT % th},{coords}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_path(args) -> int:
    op = _operator_from_args(args)
    domain = _domain_from_args(args, op)
    z = _parse_points(args.z) if args.z else Point(domain.center.coords)
    if args.thetas:
        thetas = [(None, float(Fraction(t))) for t in args.thetas.split(",")]
    elif args.indices:
        pack = _pack_from_args(args)
        thetas = [(int(i), pack.theta(int(i))) for i in args.indices.split(",")]
    else:
        raise ConfigError("path needs --thetas or --indices")
    lines = [",".join(["i", "theta"] + [f"y_{c}" for c in range(domain.dim)] + ["residual", "iters"])]
    for idx, th in thetas:
        pp = solve_path_point(op, domain, th, z, tol=args.tol, index=idx)
        coords = ",".join(FMT % v for v in pp.y.coords)
        lines.append(
            f"{'' if idx is None else idx},{FMT % th},{coords},{FMT % pp.residual},{pp.solver_iterations}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_bound(args) -> int:
    pack = _pack_from_args(args)
    g = parse_counterfunction(args.g).build()
    eps = Fraction(args.eps)
    m = Fraction(args.M)
    cap = args.digit_cap
    if args.functional == "psi":
        value = rt.psi_default(eps, g, Fraction(args.D), digit_cap=cap)
        _emit(args, {"functional": "psi", "eps": str(eps), "g": args.g,
                     "D": str(args.D), "bound": value.to_json(),
                     "provenance": list(value.provenance)[-40:]})
        return 0
    if args.functional == "phi":
        pipe = rt.phi_pipeline(eps, g, pack, m, d_const_policy=args.d_const_policy, digit_cap=cap)
    elif args.functional == "phi_prime":
        pipe = rt.phi_pipeline(eps / 3, g, pack, m, d_const_policy=args.d_const_policy, digit_cap=cap)
    elif args.functional == "phi_double_prime":
        pipe = rt.phi_double_prime_pipeline(eps, g, pack, m, d_const_policy=args.d_const_policy,
                                            digit_cap=cap)
    elif args.functional == "delta":
        omega = None
        if args.omega_lipschitz is not None:
            lip = Fraction(args.omega_lipschitz)
            omega = lambda e: Fraction(e) / lip
        res = rt.delta_bound_pipeline(eps, g, pack, m, omega=omega,
                                      d_const_policy=args.d_const_policy, digit_cap=cap)
        _emit(args, {"functional": "delta", "eps": str(eps), "M": str(m), "g": args.g,
                     **res.to_json()})
        return 0
    else:
        raise ConfigError(f"unknown functional {args.functional!r}")
    _emit(args, {"functional": args.functional, "eps": str(eps), "M": str(m),
                 "g": args.g, **pipe.to_json()})
    return 0


def _cmd_verify(args) -> int:
    configs = []
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        raw_list = raw if isinstance(raw, list) else [raw]
        configs = [ScenarioConfig.from_dict(d) for d in raw_list]
    else:
        cfg = ScenarioConfig(
            operator={"kind": args.op},
            family={"name": args.family, **({"p": args.p, "q": args.q}
                                            if args.family == "ex1" else {})},
        )
        configs = [cfg]
    # explicit flags override file values, scenario by scenario
    for cfg in configs:
        if args.eps is not None:
            cfg.eps = args.eps
        if args.g is not None:
            cfg.g = args.g
        if args.preds is not None:
            cfg.preds = args.preds
        if args.x1 is not None:
            cfg.x1 = [float(t) for t in args.x1.split(",")]
        if args.z is not None:
            cfg.z = [float(t) for t in args.z.split(",")]
        if args.search_limit is not None:
            cfg.search_limit = args.search_limit
        if args.digit_cap is not None:
            cfg.digit_cap = args.digit_cap
    scenarios = [c.build() for c in configs]
    reports = vf.run_suite(scenarios, workers=args.workers)
    # each report carries the effective config so runs are reproducible
    _emit(args, [{"config": c.to_dict(), **r.to_json()}
                 for c, r in zip(configs, reports)])
    return 0 if all(r.status == "pass" for r in reports) else 1


def _cmd_plotdata(args) -> int:
    pack = _pack_from_args(args)
    op = _operator_from_args(args)
    domain = _domain_from_args(args, op)
    x1 = _parse_points(args.x1) if args.x1 else _default_x1(domain)
    z = _parse_points(args.z) if args.z else Point(domain.center.coords)
    traj = run_bruck(op, domain, pack, x1, z, args.steps)
    lines = ["n,series,value"]
    for n in range(1, len(traj) + 1):
        x = traj.x(n)
        res = float(np.linalg.norm(x - op.apply_array(x)))
        lines.append(f"{n},res_T,{FMT % res}")
    every = max(args.path_every, 1)
    for n in range(1, len(traj) + 1):
        if n % every:
            continue
        th = pack.theta(n)
        if th <= 0:
            continue
        pp = solve_path_point(op, domain, th, z, tol=args.tol, index=n)
        d = float(np.linalg.norm(traj.x(n) - pp.y.coords))
        lines.append(f"{n},dist_path,{FMT % d}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _domain_from_args(args, op) -> DomainSpec:
    if args.domain == "box":
        return unit_box(args.dim)
    if args.domain == "ball":
        return unit_ball(args.dim)
    return _default_domain(op, args.dim)


def _write_text(path: Optional[str], text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _emit(args, obj):
    _write_text(getattr(args, "out", None), json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# argument parsing


def _add_family_args(p):
    p.add_argument("--family", choices=["ex1", "ex2", "synthetic"], default="ex1")
    p.add_argument("--p", help="ex1 exponent p (exact rational or decimal string)")
    p.add_argument("--q", help="ex1 exponent q")


def _add_operator_args(p):
    p.add_argument("--op", choices=["identity", "cubic_decay", "rotation",
                                    "affine_nonexpansive", "scale"], default="cubic_decay")
    p.add_argument("--angle", type=float)
    p.add_argument("--factor", type=float)
    p.add_argument("--lipschitz", type=float)
    p.add_argument("--domain", choices=["box", "ball"])
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--x1", help="comma-separated coordinates")
    p.add_argument("--z", help="comma-separated coordinates")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bruckrate",
        description="Bruck iteration, implicit path, and metastability-rate toolkit",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moduli", help="evaluate or audit a moduli pack")
    _add_family_args(p)
    p.add_argument("--eps", action="append", help="epsilon (repeatable)")
    p.add_argument("--audit", action="store_true")
    p.add_argument("--nmax", type=int, default=6)
    p.add_argument("--budget", type=int, default=10**8)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_moduli)

    p = sub.add_parser("iterate", help="emit a trajectory CSV")
    _add_family_args(p)
    _add_operator_args(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_iterate)

    p = sub.add_parser("path", help="emit implicit-path points CSV")
    _add_family_args(p)
    _add_operator_args(p)
    p.add_argument("--thetas", help="comma-separated theta values")
    p.add_argument("--indices", help="comma-separated indices (theta from the pack)")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_path)

    p = sub.add_parser("bound", help="evaluate a rate functional")
    _add_family_args(p)
    p.add_argument("--functional", choices=["phi", "phi_prime", "phi_double_prime",
                                            "delta", "psi"], default="phi")
    p.add_argument("--eps", required=True)
    p.add_argument("--M", default="2")
    p.add_argument("--D", default="1", help="D constant for the psi functional")
    p.add_argument("--g", default="const 0")
    p.add_argument("--d-const-policy", choices=["M", "max_m_drate"], default="M",
                   dest="d_const_policy")
    p.add_argument("--omega-lipschitz", help="omega(e) = e / L for the delta functional")
    p.add_argument("--digit-cap", type=int, dest="digit_cap")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bound)

    p = sub.add_parser("verify", help="run scenario suite and emit JSON reports")
    p.add_argument("--config", help="JSON file: one scenario object or a list")
    _add_family_args(p)
    p.add_argument("--op", default="cubic_decay")
    p.add_argument("--preds", choices=list(vf.PREDICATE_KINDS))
    p.add_argument("--eps")
    p.add_argument("--g")
    p.add_argument("--x1")
    p.add_argument("--z")
    p.add_argument("--search-limit", type=int, dest="search_limit")
    p.add_argument("--digit-cap", type=int, dest="digit_cap")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("plotdata", help="long-format CSV of residual series")
    _add_family_args(p)
    _add_operator_args(p)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--path-every", type=int, default=10, dest="path_every")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_plotdata)
    return ap


def main(argv: Optional[list] = None) -> int:
    env_cap = os.environ.get(DIGIT_CAP_ENV)
    if env_cap:
        try:
            mg.DEFAULT_DIGIT_CAP = int(env_cap)
        except ValueError:
            sys.stderr.write(f"ignoring non-integer {DIGIT_CAP_ENV}={env_cap!r}\n")
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, sc.ParameterError, rt.RateParameterError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return 2
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
