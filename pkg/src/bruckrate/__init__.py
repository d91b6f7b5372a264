"""Bruck iteration for pseudocontractions with computable metastability rates.

Library surface: Hilbert-space primitives and the operator catalog
(`hilbert`), parameter schedules and acceptably-paired moduli (`schedules`),
the iteration and implicit path (`iterate`), exact/magnitude bound arithmetic
(`magnitude`), the rate functionals (`rates`), empirical verification
(`verify`), and the CLI (`cli`).
"""

from .hilbert import (
    DomainSpec,
    OperatorSpec,
    Point,
    apply,
    catalog,
    inner,
    lipschitz_estimate,
    norm,
    pseudocontractivity_scan,
    unit_ball,
    unit_box,
)
from .iterate import (
    DomainEscapeError,
    PathPoint,
    SolverDidNotConvergeError,
    Trajectory,
    audit_descent_inequality,
    run_bruck,
    solve_path_point,
)
from .magnitude import Bound, MagnitudeOverflowError, apply_monotone, compare, iterate_fn, promote
from .rates import (
    Counterfunction,
    DerivedConstants,
    delta_bound,
    derived_constants,
    phi,
    phi_double_prime,
    phi_prime,
    psi_default,
    transform_gf,
    transform_ghat,
    transform_gtilde,
)
from .schedules import (
    AuditReport,
    ModuliPack,
    audit_acceptably_paired,
    doubling_pack,
    ex1_pack,
    ex2_pack,
    k_star,
)
from .verify import (
    PredicateSet,
    Scenario,
    VerificationReport,
    check_against_bound,
    find_witness,
    run_suite,
)

__version__ = "0.1.0"
