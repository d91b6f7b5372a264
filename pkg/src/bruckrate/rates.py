"""Counterfunction transforms and the rate-of-metastability functionals.

The pipeline composes four ingredients: the window transform
g_f(n) = f(n + g(n)) - n (subsequence lemma), the star transform
g~(n) = (f(n) + g(f(n)))* - n and its +1 variant, the derived constant block
(c, eps~, k0, d, n1, ...), and the default iteration rate
Psi(eps, g) = step^(ceil(16 D^2/eps^2))(1) with step(n) = n + 1 + g(n + 1).
Everything evaluates exactly while digits fit the cap and as upward-safe
magnitudes beyond it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from . import magnitude as mg
from .magnitude import (
    Bound,
    MonotoneMap,
    PolyGrowth,
    TowerGrowth,
    add,
    add_const,
    apply_monotone,
    compose_growth,
    growth_add,
    iterate_fn,
    max_join,
    promote,
    truncated_subtract_upper,
)
from .roundmath import ceil_frac, exp_bracket, ln_bracket
from .schedules import ModuliPack, k_star


class RateParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# counterfunctions


@dataclass(frozen=True)
class Counterfunction:
    """A total map g: N -> N with enough structure to evaluate on Bounds.

    const_value / affine record exact shape when known (they unlock closed
    forms); growth is a global upper envelope h(n) <= coeff * n^degree (or
    the tower variant) driving magnitude-mode estimates.
    """

    descr: str
    eval_int: Optional[Callable[[int], int]]
    growth: mg.Growth
    bound_apply: Optional[Callable[[Bound], Bound]] = None
    const_value: Optional[int] = None
    affine: Optional[tuple] = None
    nondecreasing: bool = True

    def __call__(self, n: int) -> int:
        if self.eval_int is None:
            raise RateParameterError(f"{self.descr}: no exact evaluator (magnitude-only)")
        return self.eval_int(n)

    def on_bound(self, b: Bound, digit_cap: Optional[int] = None) -> Bound:
        if b.is_exact and self.eval_int is not None:
            return apply_monotone(self.as_map(audit=False), b, digit_cap=digit_cap)
        if self.bound_apply is not None:
            return self.bound_apply(b)
        return mg._apply_growth_mag(self.growth, b, b.provenance)

    def as_map(self, audit: bool = True) -> MonotoneMap:
        return MonotoneMap(
            self.descr,
            self.eval_int,
            self.growth,
            affine=self.affine,
            bound_apply=self.bound_apply,
            audit_monotone=audit and self.nondecreasing,
        )


def const_cf(k: int) -> Counterfunction:
    if k < 0:
        raise RateParameterError("counterfunctions are natural-valued")
    return Counterfunction(
        f"const {k}", lambda n: k, PolyGrowth(1, mg.ln_of_nat(k)), const_value=k,
    )


def identity_cf() -> Counterfunction:
    return Counterfunction("id", lambda n: n, PolyGrowth(1), affine=(1, 0))


def affine_cf(a: int, b: int) -> Counterfunction:
    if a < 0 or b < 0:
        raise RateParameterError("affine counterfunction needs naturals")
    if a == 0:
        return const_cf(b)
    return Counterfunction(
        f"affine {a} {b}", lambda n: a * n + b, PolyGrowth(1, mg.ln_of_nat(a + b)),
        affine=(a, b),
    )


def power_cf(k: int) -> Counterfunction:
    if k < 1:
        raise RateParameterError("pow needs exponent >= 1")
    if k == 1:
        return identity_cf()
    return Counterfunction(f"pow {k}", lambda n: n**k, PolyGrowth(k))


def table_cf(values: list, source: str = "table") -> Counterfunction:
    if not values:
        raise RateParameterError("empty table")
    vals = tuple(int(v) for v in values)
    if any(v < 0 for v in vals):
        raise RateParameterError("table values must be naturals")
    top = max(vals)

    def ev(n: int) -> int:
        return vals[n] if n < len(vals) else vals[-1]

    nondec = all(vals[i] <= vals[i + 1] for i in range(len(vals) - 1))
    return Counterfunction(
        source, ev, PolyGrowth(1, mg.ln_of_nat(top)), nondecreasing=nondec,
    )


def pack_f_cf(pack: ModuliPack) -> Counterfunction:
    """The pack's subsequence f wrapped as a counterfunction-style map."""
    return Counterfunction(
        f"f[{pack.family_tag}]",
        pack.f,
        pack.f_growth,
        bound_apply=pack.f_bound_apply,
        affine=pack.f_affine,
    )


# ---------------------------------------------------------------------------
# transforms


def _audit_f_dominates_identity(f: Counterfunction, start: int = 0, upto: int = 64):
    prev = None
    for n in range(start, upto):
        try:
            v = f.eval_int(n)
        except Exception:
            return
        if v < n:
            raise RateParameterError(f"{f.descr}: needs f(n) >= n, violated at n={n}")
        if prev is not None and v < prev:
            raise RateParameterError(f"{f.descr}: needs f nondecreasing, violated at n={n}")
        prev = v


def transform_gf(f: Counterfunction, g: Counterfunction, f_start: int = 0) -> Counterfunction:
    """g_f(n) = f(n + g(n)) - n, the window transform of the subsequence
    lemma; requires f nondecreasing with f(n) >= n."""
    if f.eval_int is not None:
        _audit_f_dominates_identity(f, start=f_start)
    descr = f"gf[{f.descr};{g.descr}]"
    ev = None
    if f.eval_int is not None and g.eval_int is not None:
        def ev(n: int, _f=f.eval_int, _g=g.eval_int) -> int:
            return _f(n + _g(n)) - n

    affine = None
    const = None
    if f.affine is not None:
        af, bf = f.affine
        if g.const_value is not None:
            a2, b2 = af - 1, af * g.const_value + bf
            if a2 == 0:
                const = b2
            elif a2 > 0:
                affine = (a2, b2)
        elif g.affine is not None:
            a_g, b_g = g.affine
            a2 = af * (1 + a_g) - 1
            b2 = af * b_g + bf
            if a2 == 0:
                const = b2
            elif a2 > 0:
                affine = (a2, b2)

    def bound_apply(b: Bound, _f=f, _g=g) -> Bound:
        inner = add(b, _g.on_bound(b))
        return truncated_subtract_upper(_f.on_bound(inner), note=descr)

    gl = g.growth.ln_coeff
    gd = getattr(g.growth, "degree", 1.0)
    inner_ln = max(gl, 0.0) + math.log(2.0)  # n + g(n) <= (1 + coeff) n^deg
    inner_growth = (
        PolyGrowth(gd, inner_ln) if isinstance(g.growth, PolyGrowth) else TowerGrowth(inner_ln, gd)
    )
    growth = compose_growth(f.growth, inner_growth)
    if const is not None:
        growth = PolyGrowth(1, mg.ln_of_nat(const))
    elif affine is not None:
        growth = PolyGrowth(1, mg.ln_of_nat(affine[0] + affine[1]))
    return Counterfunction(
        descr,
        ev,
        growth,
        bound_apply=bound_apply,
        const_value=const,
        affine=affine,
        nondecreasing=g.nondecreasing,
    )


def transform_gtilde(pack: ModuliPack, g: Counterfunction) -> Counterfunction:
    """g~(n) = (f(n) + g(f(n)))* - n; equals 0 when g == 0 since (f(n))* = n."""
    return _star_transform(pack, g, plus_one=0)


def transform_ghat(pack: ModuliPack, g: Counterfunction) -> Counterfunction:
    """g^(n) = (f(n) + g(f(n)))* - n + 1."""
    return _star_transform(pack, g, plus_one=1)


def _star_transform(pack: ModuliPack, g: Counterfunction, plus_one: int) -> Counterfunction:
    descr = f"g{'hat' if plus_one else 'tilde'}[{pack.family_tag};{g.descr}]"
    ev = None
    if g.eval_int is not None:
        def ev(n: int, _g=g.eval_int) -> int:
            fn = pack.f(n)
            return k_star(pack, fn + _g(fn)) - n + plus_one

    const = None
    affine = None
    if g.const_value == 0:
        const = plus_one
    elif g.const_value is not None and pack.f_affine is not None:
        af, bf = pack.f_affine
        const = g.const_value // af + plus_one  # (af n + bf + c - bf) // af - n

    def bound_apply(b: Bound, _g=g) -> Bound:
        fb = pack.f_bound_apply(b) if not b.is_exact else pack_f_cf(pack).on_bound(b)
        inner = add(fb, _g.on_bound(fb))
        star = pack.kstar_bound_apply(inner)
        out = truncated_subtract_upper(star, note=descr)
        return add_const(out, plus_one) if plus_one else out

    # k* <= id, so the transform is dominated by f(n) + g(f(n)) + 1
    growth = growth_add(
        pack.f_growth, compose_growth(g.growth, pack.f_growth), extra_coeff=1.0 + plus_one
    )
    if const is not None:
        growth = PolyGrowth(1, mg.ln_of_nat(const))
    return Counterfunction(
        descr, ev, growth, bound_apply=bound_apply, const_value=const,
        affine=affine, nondecreasing=g.nondecreasing,
    )


def shift_plus_cf(offset: Bound, g: Counterfunction, descr: str) -> Counterfunction:
    """n -> offset + g(n + offset), the g_d / g_b construction.

    The polynomial envelope uses the asymptotic law (valid once the orbit has
    passed `offset`, which the first exact/bound application guarantees):
    offset + g(n + offset) <= n + g(2n) for n >= offset.
    """
    ev = None
    const = None
    if offset.is_exact and g.eval_int is not None:
        off = offset.exact

        def ev(n: int, _g=g.eval_int, _o=off) -> int:
            return _o + _g(n + _o)

        if g.const_value is not None:
            const = off + g.const_value

    def bound_apply(b: Bound, _g=g) -> Bound:
        inner = add(b, offset)
        return add(offset, _g.on_bound(inner))

    growth = growth_add(PolyGrowth.of(1, 2), compose_growth(g.growth, PolyGrowth.of(1, 2)))
    if const is not None:
        growth = PolyGrowth(1, mg.ln_of_nat(const))
    return Counterfunction(
        descr, ev, growth, bound_apply=bound_apply, const_value=const,
        nondecreasing=g.nondecreasing,
    )


def psi_step_cf(g: Counterfunction) -> Counterfunction:
    """step(n) = n + 1 + g(n + 1), the iterator inside the default Psi."""
    descr = f"psi-step[{g.descr}]"
    ev = None
    if g.eval_int is not None:
        def ev(n: int, _g=g.eval_int) -> int:
            return n + 1 + _g(n + 1)

    affine = None
    if g.const_value is not None:
        affine = (1, 1 + g.const_value)
    elif g.affine is not None:
        a, b = g.affine
        affine = (1 + a, 1 + a + b)

    def bound_apply(b: Bound, _g=g) -> Bound:
        n1 = add_const(b, 1)
        return add(n1, _g.on_bound(n1))

    growth = growth_add(PolyGrowth.of(1, 2), compose_growth(g.growth, PolyGrowth.of(1, 2)))
    return Counterfunction(
        descr, ev, growth, bound_apply=bound_apply, affine=affine,
        nondecreasing=g.nondecreasing,
    )


# ---------------------------------------------------------------------------
# derived constants


@dataclass(frozen=True)
class DerivedConstants:
    eps: Fraction
    m_diam: Fraction
    c_lo: Fraction
    c_hi: Fraction
    eps_tilde_lo: Fraction
    eps_tilde_hi: Fraction
    k0: Bound
    d_rate: Bound
    n1: Bound
    n1_hat: Bound
    b: Bound
    log_branch: int
    log_branch_clamped: bool
    notes: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "eps": str(self.eps),
            "M": str(self.m_diam),
            "c": [float(self.c_lo), float(self.c_hi)],
            "eps_tilde": [float(self.eps_tilde_lo), float(self.eps_tilde_hi)],
            "k0": self.k0.to_json(),
            "d_rate": self.d_rate.to_json(),
            "n1": self.n1.to_json(),
            "n1_hat": self.n1_hat.to_json(),
            "b": self.b.to_json(),
            "log_branch": self.log_branch,
            "log_branch_clamped": self.log_branch_clamped,
            "notes": list(self.notes),
        }


def derived_constants(
    eps, m_diam, pack: ModuliPack, digit_cap: Optional[int] = None
) -> DerivedConstants:
    """The constant block: c = exp(-delta/2), eps~ = (1-c) eps / 16,
    k0, d, n1 (the sound max over every stated variant), n1^, and b."""
    eps = Fraction(eps)
    m = Fraction(m_diam)
    if eps <= 0:
        raise RateParameterError("eps > 0 required")
    if m < 1:
        raise RateParameterError("M >= 1 required")
    notes = []
    c_lo, c_hi = exp_bracket(-pack.delta / 2)
    et_lo = (1 - c_hi) * eps / 16
    et_hi = (1 - c_lo) * eps / 16
    if et_lo <= 0:
        raise RateParameterError("degenerate eps~ <= 0 (delta must be positive)")
    k0 = max_join(pack.phi2(eps**2 / (6 * m**2)), pack.phi3(eps**2 / (12 * m**2)))
    if eps >= 8 * m:
        log_branch = 0
        clamped = True
        notes.append("log_c(eps/8M) <= 0 clamped to 0")
    else:
        clamped = False
        log_branch = ceil_frac(ln_bracket(8 * m / eps)[1] * 2 / pack.delta)
    f_map = pack.f_map()
    d_rate = max_join(
        apply_monotone(f_map, k0, digit_cap=digit_cap), promote(max(log_branch, 0))
    )
    n1 = max_join(
        promote(pack.n0),
        pack.phi1(pack.delta / 2),
        pack.phi2(et_lo / (4 * m**2)),
        pack.phi2(et_lo**2 / (4 * m**2)),
        pack.phi3(et_lo**2 / (8 * m**2)),
        pack.phi3(et_lo**2 / (2 * m**2)),
    )
    n1_hat = max_join(n1, pack.phi1(eps / m))
    b = apply_monotone(
        f_map,
        add_const(pack.kstar_bound_apply(pack.phi1(eps / (3 * m))), 1),
        digit_cap=digit_cap,
    )
    return DerivedConstants(
        eps, m, c_lo, c_hi, et_lo, et_hi, k0, d_rate, n1, n1_hat, b,
        log_branch, clamped, tuple(notes),
    )


# ---------------------------------------------------------------------------
# Psi and the Phi pipeline


def _psi_count(eps_lo: Fraction, d_const: Union[Fraction, Bound]) -> Bound:
    if isinstance(d_const, Bound) and not d_const.is_exact:
        extra = float(16 / eps_lo**2)
        if d_const.level == 1:
            hi = 2 * d_const.hi + math.log(extra) * (1 + 1e-12) + 1e-9
            return mg._normalize(1, hi, None, ("psi-count",))
        return mg._normalize(d_const.level, d_const.hi + 1.0, None, ("psi-count",))
    d = Fraction(d_const.exact) if isinstance(d_const, Bound) else Fraction(d_const)
    return promote(ceil_frac(16 * d**2 / eps_lo**2), note="psi-count")


def psi_default(
    eps,
    g: Counterfunction,
    d_const: Union[Fraction, int, Bound] = 1,
    digit_cap: Optional[int] = None,
) -> Bound:
    """Psi(eps, g) = step^(ceil(16 D^2 / eps^2))(1), step(n) = n + 1 + g(n+1)."""
    eps = Fraction(eps)
    if eps <= 0:
        raise RateParameterError("eps > 0 required")
    if not isinstance(d_const, Bound):
        d_const = Fraction(d_const)
        if d_const <= 0:
            raise RateParameterError("D > 0 required")
    count = _psi_count(eps, d_const)
    step = psi_step_cf(g)
    return iterate_fn(step.as_map(audit=False), promote(1, note="start"), count, digit_cap=digit_cap)


@dataclass(frozen=True)
class PipelineResult:
    bound: Bound
    constants: DerivedConstants
    psi_value: Bound
    psi_count: Bound
    variant: str
    d_const_policy: str
    notes: tuple = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {
            "bound": self.bound.to_json(),
            "variant": self.variant,
            "d_const_policy": self.d_const_policy,
            "psi": self.psi_value.to_json(),
            "psi_count": self.psi_count.to_json(),
            "constants": self.constants.to_json(),
            "notes": list(self.notes),
            "provenance": list(self.bound.provenance)[-40:],
        }


def _resolve_d_const(policy: str, m: Fraction, dc: DerivedConstants):
    if policy == "M":
        return m, "M"
    if policy == "max_m_drate":
        if dc.d_rate.is_exact:
            return max(m, Fraction(dc.d_rate.exact)), "max{M,d_rate}"
        return dc.d_rate, "max{M,d_rate}(magnitude)"
    raise RateParameterError(f"unknown D-const policy {policy!r}")


def phi_pipeline(
    eps,
    g: Counterfunction,
    pack: ModuliPack,
    m_diam,
    psi: Optional[Callable] = None,
    d_const_policy: str = "M",
    hat: bool = False,
    outer_eps: Optional[Fraction] = None,
    digit_cap: Optional[int] = None,
) -> PipelineResult:
    """The full evaluation pipeline behind Phi (hat=False) and Phi-hat.

    Order: star-transform g into g~ (or g^), shift by n1 + d + 1 to get g_d,
    window-transform through f, evaluate Psi at eps~, add n1 + d + 1, apply f.
    """
    eps = Fraction(eps)
    m = Fraction(m_diam)
    dc = derived_constants(eps, m, pack, digit_cap=digit_cap)
    notes = []
    if hat:
        g2 = transform_ghat(pack, g)
        n_sel = dc.n1_hat
        if outer_eps is not None:
            n_sel = max_join(dc.n1, pack.phi1(Fraction(outer_eps) / m))
            notes.append("n1_hat taken at the outer eps per the hat-variant statement")
    else:
        g2 = transform_gtilde(pack, g)
        n_sel = dc.n1
    shift = add_const(add(n_sel, dc.d_rate, digit_cap=digit_cap), 1, digit_cap=digit_cap)
    g_d = shift_plus_cf(shift, g2, descr=f"g_d[{g2.descr}]")
    gd_f = transform_gf(pack_f_cf(pack), g_d, f_start=pack.f_start)
    d_const, d_desc = _resolve_d_const(d_const_policy, m, dc)
    count = _psi_count(dc.eps_tilde_lo, d_const)
    if psi is not None:
        psi_value = psi(dc.eps_tilde_lo, gd_f)
    else:
        psi_value = psi_default(dc.eps_tilde_lo, gd_f, d_const, digit_cap=digit_cap)
    inner = add_const(add(psi_value, n_sel, digit_cap=digit_cap), 1, digit_cap=digit_cap)
    inner = add(inner, dc.d_rate, digit_cap=digit_cap)
    bound = apply_monotone(pack.f_map(), inner, digit_cap=digit_cap)
    bound = bound.with_prov(f"phi[{'hat' if hat else 'plain'}](eps={eps})")
    return PipelineResult(
        bound, dc, psi_value, count, "phi_hat" if hat else "phi", d_desc, tuple(notes)
    )


def phi(eps, g, pack, m_diam, psi=None, d_const_policy="M", digit_cap=None) -> Bound:
    """Rate for the conclusion pairing iterates with path points."""
    return phi_pipeline(
        eps, g, pack, m_diam, psi=psi, d_const_policy=d_const_policy, digit_cap=digit_cap
    ).bound


def phi_prime(eps, g, pack, m_diam, psi=None, d_const_policy="M", digit_cap=None) -> Bound:
    """Cauchy-metastability rate: phi at eps/3."""
    return phi(Fraction(eps) / 3, g, pack, m_diam, psi=psi,
               d_const_policy=d_const_policy, digit_cap=digit_cap)


def phi_double_prime_pipeline(
    eps, g, pack, m_diam, psi=None, d_const_policy="M", digit_cap=None
) -> PipelineResult:
    """The hat pipeline at eps/3 with n1^ = max{n1, phi1(eps/M)} (outer eps)."""
    eps = Fraction(eps)
    return phi_pipeline(
        eps / 3, g, pack, m_diam, psi=psi, d_const_policy=d_const_policy,
        hat=True, outer_eps=eps, digit_cap=digit_cap,
    )


def phi_double_prime(eps, g, pack, m_diam, psi=None, d_const_policy="M", digit_cap=None) -> Bound:
    return phi_double_prime_pipeline(
        eps, g, pack, m_diam, psi=psi, d_const_policy=d_const_policy, digit_cap=digit_cap
    ).bound


@dataclass(frozen=True)
class DeltaResult:
    bound: Bound
    b: Bound
    inner_eps: Fraction
    pipeline: PipelineResult

    def to_json(self) -> dict:
        return {
            "bound": self.bound.to_json(),
            "b": self.b.to_json(),
            "inner_eps": str(self.inner_eps),
            "pipeline": self.pipeline.to_json(),
        }


def delta_bound_pipeline(
    eps, g, pack, m_diam, omega=None, psi=None, d_const_policy="M", digit_cap=None
) -> DeltaResult:
    """Asymptotic-regularity rate under a uniform-continuity modulus:
    Delta(g, eps) = Phi(min{eps/3, omega(eps/3M)}, g_b) + b with
    b = f((phi1(eps/3M))* + 1) and g_b(n) = b + g(n + b)."""
    eps = Fraction(eps)
    m = Fraction(m_diam)
    w = omega if omega is not None else pack.omega
    if w is None:
        raise RateParameterError("delta_bound needs a uniform-continuity modulus omega")
    inner_eps = min(eps / 3, Fraction(w(eps / (3 * m))))
    if inner_eps <= 0:
        raise RateParameterError("omega must return positive values")
    b = apply_monotone(
        pack.f_map(),
        add_const(pack.kstar_bound_apply(pack.phi1(eps / (3 * m))), 1),
        digit_cap=digit_cap,
    )
    g_b = shift_plus_cf(b, g, descr=f"g_b[{g.descr}]")
    pipe = phi_pipeline(
        inner_eps, g_b, pack, m, psi=psi, d_const_policy=d_const_policy, digit_cap=digit_cap
    )
    total = add(pipe.bound, b, digit_cap=digit_cap).with_prov("delta=phi+b")
    return DeltaResult(total, b, inner_eps, pipe)


def delta_bound(eps, g, pack, m_diam, omega=None, psi=None, d_const_policy="M", digit_cap=None) -> Bound:
    return delta_bound_pipeline(
        eps, g, pack, m_diam, omega=omega, psi=psi,
        d_const_policy=d_const_policy, digit_cap=digit_cap,
    ).bound


FUNCTIONALS = {
    "phi": phi,
    "phi_prime": phi_prime,
    "phi_double_prime": phi_double_prime,
    "delta": delta_bound,
    "psi": None,  # handled specially by the CLI
}
