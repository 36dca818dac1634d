"""Two worked finite-precision algorithms.

* Hero's square-root iteration with argument reduction and a precision
  schedule tied to the requested relative accuracy.
* The repeated-squaring membership problem
  ``{(n, x) : x >= 0 and x**(2**T(length)) >= 1/2}``, whose condition is
  known in closed form, so undecidability at low precision can be exhibited
  by explicit adversarial inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import mpmath

from .errors import InvalidParameter, PreconditionViolated
from .fp_system import (
    INF,
    FpFormat,
    FpNumber,
    as_rational,
    binary_format,
    ceil_log2,
    floor_log2,
    fl,
    fp_mul,
    fp_number_ge,
    round_to_format,
    size_of,
)

C_DEFAULT = 8
ORACLE_DPS = 64


# -- Hero's method ----------------------------------------------------------------

def hero_iterations(epsilon) -> int:
    """ceil(-log2 epsilon) + 2."""
    return ceil_log2(1 / as_rational(epsilon)) + 2


def hero_format(epsilon, C: int = C_DEFAULT) -> FpFormat:
    """Binary format with unit roundoff at most epsilon / (2C)."""
    target = as_rational(epsilon) / (2 * C)
    return binary_format(ceil_log2(1 / target))


@dataclass(frozen=True)
class HeroRun:
    a: Fraction
    epsilon: Fraction
    b: Fraction
    q: int
    iterations: int
    u_mach_used: Optional[Fraction]
    result: Fraction
    iterates: tuple[Fraction, ...]
    reciprocal: bool = False

    def relative_error(self, dps: int = ORACLE_DPS) -> mpmath.mpf:
        """|result - sqrt(a)| / sqrt(a) against a ``dps``-digit oracle."""
        with mpmath.workdps(dps):
            root = mpmath.sqrt(mpmath.mpf(self.a.numerator) / self.a.denominator)
            r = mpmath.mpf(self.result.numerator) / self.result.denominator
            return abs(r - root) / root


def hero_sqrt(a, epsilon, fmt: Optional[FpFormat] = None, C: int = C_DEFAULT) -> HeroRun:
    """Approximate sqrt(a) to relative accuracy ``epsilon``.

    ``a`` is reduced to ``b * 4**q`` with ``b`` in [1, 4) (inputs below 1 go
    through the reciprocal), Hero's map ``x -> (x + b/x) / 2`` is iterated
    from ``x0 = 5/2`` for :func:`hero_iterations` steps, and the result is
    rescaled.  With ``fmt`` every operation is rounded into it; ``fmt=None``
    runs in exact arithmetic.
    """
    a, epsilon = as_rational(a), as_rational(epsilon)
    if a <= 0:
        raise InvalidParameter(f"a must be positive, got {a}")
    if not 0 < epsilon < 1:
        raise InvalidParameter(f"epsilon must lie in (0, 1), got {epsilon}")
    if fmt is not None:
        if fmt.base != 2:
            raise InvalidParameter("argument reduction assumes a binary format")
        if fmt.unit_roundoff > epsilon / (2 * C):
            raise PreconditionViolated(
                f"unit roundoff {fmt.unit_roundoff} exceeds epsilon/(2C) = {epsilon / (2 * C)}")

    def rnd(v: Fraction) -> Fraction:
        return v if fmt is None else fl(v, fmt)

    a_in = rnd(a)
    reciprocal = a_in < 1
    a_w = rnd(1 / a_in) if reciprocal else a_in
    q = floor_log2(a_w) // 2
    b = a_w / Fraction(4) ** q               # exact: power-of-two scaling
    iterations = hero_iterations(epsilon)
    x = rnd(Fraction(5, 2))
    iterates = [x]
    for _ in range(iterations):
        x = rnd(rnd(x + rnd(b / x)) / 2)
        iterates.append(x)
    result = x * Fraction(2) ** q
    if reciprocal:
        result = rnd(1 / result)
    return HeroRun(a, epsilon, b, q, iterations, None if fmt is None else fmt.unit_roundoff,
                   result, tuple(iterates), reciprocal)


# -- precision hierarchy problem ----------------------------------------------------

def _cost_fn(name: str):
    if name == "linear":
        return lambda L: L
    if name == "quadratic":
        return lambda L: L * L
    if name == "exp":
        return lambda L: 2**L
    if name.startswith("const:"):
        c = int(name.split(":", 1)[1])
        if c < 0:
            raise InvalidParameter("constant cost must be natural")
        return lambda L: c
    raise InvalidParameter(f"unknown cost family {name!r}")


def _precision_slope(name: str) -> Fraction:
    """P2(s) = slope * s for the supported families."""
    if name == "identity":
        return Fraction(1)
    if name.startswith("linear:"):
        c = as_rational(name.split(":", 1)[1])
        if c <= 0:
            raise InvalidParameter("precision slope must be positive")
        return c
    raise InvalidParameter(f"unknown precision family {name!r}")


@dataclass(frozen=True)
class HierarchyInstance:
    n: int
    x: Fraction
    T: str = "linear"
    P2: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "x", as_rational(self.x))
        if self.n < 0:
            raise InvalidParameter("n must be natural")
        if self.x < 0:
            raise InvalidParameter("x must be nonnegative")
        _cost_fn(self.T)
        _precision_slope(self.P2)

    @property
    def length(self) -> int:
        """Bits of n plus one real coordinate."""
        return max(1, self.n.bit_length()) + 1

    @property
    def squarings(self) -> int:
        return _cost_fn(self.T)(self.length)

    @property
    def slope(self) -> Fraction:
        return _precision_slope(self.P2)

    def boundary(self, prec: int = 256) -> mpmath.mpf:
        """(1/2) ** (2 ** -t), the membership threshold for x."""
        with mpmath.workprec(prec):
            return mpmath.power(2, -mpmath.power(2, -self.squarings))


def in_hierarchy_set(t: int, x) -> bool:
    """Certified test of ``x >= 0 and x**(2**t) >= 1/2``.

    Works on ``2**t * log2(x) >= -1`` with interval arithmetic, raising the
    working precision until the sign is resolved.
    """
    x = as_rational(x)
    if x < 0 or x == 0:
        return False
    if x >= 1:
        return True
    if t == 0:
        return x >= Fraction(1, 2)
    xf = float(x)
    if xf > 0 and t < 900:
        # float pass with a generous error bound; falls through when too close
        l2 = math.log2(xf)
        s = math.ldexp(l2, t) + 1
        if abs(s) > math.ldexp(1e-12 * (abs(l2) + 1), t):
            return s > 0
    # exact tie would need x = 2**(-2**-t), irrational for t >= 1
    prec =64 + t + x.numerator.bit_length() + x.denominator.bit_length()
    iv = mpmath.iv
    for _ in range(12):
        with mpmath.workprec(prec):
            iv.prec = prec
            xv = iv.mpf(x.numerator) / iv.mpf(x.denominator)
            s = iv.log(xv) / iv.log(iv.mpf(2)) * iv.mpf(2) ** t + 1
            if s.a >= 0:
                return True
            if s.b < 0:
                return False
        prec *= 2
    raise ArithmeticError("membership undecided at maximal working precision")


def _to_fraction(v: mpmath.mpf) -> Fraction:
    man, exp = mpmath.mpf(v).man_exp
    return Fraction(man) * Fraction(2) ** exp


@dataclass(frozen=True)
class HierarchyCondition:
    xi: Fraction
    mu: Union[Fraction, float]
    log2_mu: Union[Fraction, float]

    @property
    def ill_posed(self) -> bool:
        return self.xi == 0


def hierarchy_condition(inst: HierarchyInstance, prec: int = 256) -> HierarchyCondition:
    """Closed-form flip radius ``xi = min(1, |x_b/x - 1|)`` and ``mu = 2**(P2^-1(log2 1/xi))``.

    ``xi`` is returned as a dyadic approximation with ``prec`` bits.
    """
    x, t, c = inst.x, inst.squarings, inst.slope
    if x == 0:
        return HierarchyCondition(Fraction(1), Fraction(1), Fraction(0))
    if t == 0:
        xi = min(Fraction(1), abs(Fraction(1, 2) / x - 1))
        if xi == 0:
            return HierarchyCondition(xi, INF, INF)
    else:
        with mpmath.workprec(prec):
            xb = inst.boundary(prec)
            r = abs(xb / (mpmath.mpf(x.numerator) / x.denominator) - 1)
            xi = min(Fraction(1), _to_fraction(r))
    with mpmath.workprec(prec):
        log2_mu = mpmath.log(1 / mpmath.mpf(xi.numerator) * xi.denominator, 2) / (
            mpmath.mpf(c.numerator) / c.denominator)
        mu = _to_fraction(mpmath.power(2, log2_mu))
    return HierarchyCondition(xi, max(Fraction(1), mu), _to_fraction(log2_mu))


def hierarchy_size(inst: HierarchyInstance):
    cond = hierarchy_condition(inst)
    if cond.ill_posed:
        return size_of(inst.length, INF)
    return size_of(inst.length, cond.mu)


def hierarchy_k_mach(inst: HierarchyInstance) -> int:
    """P2(size) + 3, rounded up to an integer."""
    s = hierarchy_size(inst)
    if s.ill_posed:
        raise PreconditionViolated("ill-posed instance: no finite precision suffices")
    return math.ceil(inst.slope * s.size) + 3


@dataclass(frozen=True)
class HierarchyDecision:
    accept: bool
    k_mach: int
    cost: int
    computed: Optional[FpNumber]


def hierarchy_decide(inst: HierarchyInstance, k_mach: int) -> HierarchyDecision:
    """Round x at unit roundoff 2**-k_mach, square t times, accept iff the result >= 1/2."""
    if k_mach < 1:
        raise InvalidParameter("k_mach must be >= 1")
    fmt = binary_format(k_mach)
    t = inst.squarings
    if inst.x < 0:
        return HierarchyDecision(False, k_mach, 0, None)
    v = round_to_format(inst.x, fmt)
    for _ in range(t):
        v = fp_mul(v, v)
    return HierarchyDecision(fp_number_ge(v, Fraction(1, 2)), k_mach, t, v)


def hierarchy_witness(inst: HierarchyInstance, u) -> Optional[Fraction]:
    """A delta with |delta| < u whose exact decision on x(1+delta) differs from that on x.

    None when ``u <= xi`` (no such delta exists).
    """
    u = as_rational(u)
    if not 0 < u < 1:
        raise InvalidParameter("u must lie in (0, 1)")
    xi = hierarchy_condition(inst).xi
    if u <= xi:
        return None
    t = inst.squarings
    inside = in_hierarchy_set(t, inst.x)
    mag = (xi + u) / 2
    delta = -mag if inside else mag
    if in_hierarchy_set(t, inst.x * (1 + delta)) == inside:
        # xi is an approximation; push to the edge of the allowed band
        mag = u * (1 - Fraction(1, 2**40))
        delta = -mag if inside else mag
        if in_hierarchy_set(t, inst.x * (1 + delta)) == inside:
            return None
    return delta


HERO_CSV_HEADER = ("a", "epsilon", "b", "q", "iterations", "k_mach", "u_mach", "result",
                   "rel_error", "bound")
HIERARCHY_CSV_HEADER = ("n", "x", "T", "P2", "k_mach", "u_mach", "cost", "verdict", "expected",
                        "xi", "mu")
