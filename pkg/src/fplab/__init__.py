"""Finite-precision computation laboratory.

Floating-point systems over exact rationals, algebraic circuits under exact,
rounded, adversarial and interval semantics, certified condition brackets,
and the grid-search feasibility decider.
"""

__version__ = "0.1.0"

from .errors import (
    ArityMismatch,
    CapExceeded,
    CircuitSyntaxError,
    DomainError,
    FplabError,
    ForwardReference,
    FpOverflow,
    FpUnderflow,
    InvalidParameter,
    MissingOutput,
    PreconditionViolated,
)
from .fp_system import (
    FpFormat,
    FpNumber,
    SizeInfo,
    binary_format,
    fk_format,
    fl,
    fp_apply,
    gamma_bound,
    magnitude,
    round_to_format,
    size_of,
)
from .interval import Interval
from .circuit import (
    Circuit,
    CircuitBuilder,
    Corner,
    EvalOutcome,
    Exact,
    IntervalRelative,
    RandomRelative,
    Replay,
    RoundNearest,
    Verdict,
    eval_exact,
    eval_interval,
    eval_rounded,
    parse_circuit,
    serialize_circuit,
    validate,
)
from .condition import (
    ConditionBracket,
    FeasibilityConditionEstimate,
    feasibility_condition_estimate,
    mu_eval,
    rho_eval_bracket,
)
from .feasibility import (
    CoordCode,
    Decision,
    DecisionRecord,
    GridSpec,
    decide_feasible_grid,
    decide_sign_change_1d,
    decode_grid_point,
    enumerate_grid,
)
from .showcase import (
    HeroRun,
    HierarchyInstance,
    hero_sqrt,
    hierarchy_condition,
    hierarchy_decide,
    hierarchy_witness,
)

__all__ = [
    "ArityMismatch",
    "CapExceeded",
    "Circuit",
    "CircuitBuilder",
    "CircuitSyntaxError",
    "ConditionBracket",
    "CoordCode",
    "Corner",
    "Decision",
    "DecisionRecord",
    "DomainError",
    "EvalOutcome",
    "Exact",
    "FeasibilityConditionEstimate",
    "ForwardReference",
    "FpFormat",
    "FpNumber",
    "FpOverflow",
    "FpUnderflow",
    "FplabError",
    "GridSpec",
    "HeroRun",
    "HierarchyInstance",
    "Interval",
    "IntervalRelative",
    "InvalidParameter",
    "MissingOutput",
    "PreconditionViolated",
    "RandomRelative",
    "Replay",
    "RoundNearest",
    "SizeInfo",
    "Verdict",
    "binary_format",
    "decide_feasible_grid",
    "decide_sign_change_1d",
    "decode_grid_point",
    "enumerate_grid",
    "eval_exact",
    "eval_interval",
    "eval_rounded",
    "feasibility_condition_estimate",
    "fk_format",
    "fl",
    "fp_apply",
    "gamma_bound",
    "hero_sqrt",
    "hierarchy_condition",
    "hierarchy_decide",
    "hierarchy_witness",
    "magnitude",
    "mu_eval",
    "parse_circuit",
    "rho_eval_bracket",
    "round_to_format",
    "serialize_circuit",
    "size_of",
    "validate",
]
