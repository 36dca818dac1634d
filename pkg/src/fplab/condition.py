"""Certified brackets for the evaluation condition of a circuit at a point.

``rho`` is the largest relative perturbation level at which every
epsilon-evaluation agrees with the exact membership verdict, and
``mu = max(1, 1/rho)``.  Computing ``rho`` exactly is out of reach in
general, so a bracket ``[rho_lo, rho_hi]`` is returned:

* ``rho_lo`` is certified by interval enclosures found by bisection;
* ``rho_hi`` is witnessed by a recorded perturbation that flips the verdict
  (or is 1 when the search finds none).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .circuit import (
    SHRINK,
    Circuit,
    Interval,
    Replay,
    Verdict,
    eval_exact,
    eval_interval_boxes,
    eval_rounded,
    random_delta,
    validate,
)
from .errors import DomainError, InvalidParameter
from .fp_system import INF, as_rational, format_rational, magnitude

DEFAULT_TOL = Fraction(1, 2**20)
EPS_FLOOR = Fraction(1, 2**64)


@dataclass(frozen=True)
class ConditionBracket:
    rho_lo: Fraction
    rho_hi: Fraction
    verdict: Verdict
    witness: Optional[Replay] = None
    certified_lo: bool = True
    malformed: bool = False

    @property
    def mu_lo(self) -> Fraction:
        return max(Fraction(1), 1 / self.rho_hi)

    @property
    def mu_hi(self):
        if self.rho_lo == 0:
            return INF
        return max(Fraction(1), 1 / self.rho_lo)

    @property
    def ill_posed(self) -> bool:
        return self.rho_lo == 0

    @property
    def width(self) -> Fraction:
        return self.rho_hi - self.rho_lo

    def flags(self) -> str:
        out = []
        if self.malformed:
            out.append("malformed")
        if self.ill_posed:
            out.append("ill-posed")
        if self.witness is not None:
            out.append("witness")
        return "|".join(out)


def _flips(exact: Verdict, value: Fraction) -> bool:
    return value < 0 if exact is Verdict.IN else value >= 0


def _objective(exact: Verdict, value: Fraction) -> Fraction:
    # smaller is closer to a flip
    return value if exact is Verdict.IN else -value


def certifies(c: Circuit, x: Sequence[Fraction], epsilon: Fraction, exact: Verdict,
              bits: Optional[int] = None) -> bool:
    """Whether the enclosure at ``epsilon`` (closed factors, epsilon <= 1) pins the exact verdict."""
    boxes = [Interval.point(v) for v in x]
    out = eval_interval_boxes(c, boxes, epsilon, bits, closed_one=True)
    return out.verdict is exact


def certified_rho_lo(c: Circuit, x: Sequence[Fraction], exact: Verdict,
                     tol: Fraction = DEFAULT_TOL, floor: Fraction = EPS_FLOOR,
                     bits: Optional[int] = None) -> tuple[Fraction, Fraction]:
    """(lo, hi): lo certified (0 if nothing above ``floor`` is), hi the first failure."""
    one = Fraction(1)
    if certifies(c, x, one, exact, bits):
        return one, one
    lo, hi = one / 2, one
    while not certifies(c, x, lo, exact, bits):
        hi = lo
        lo /= 2
        if lo < floor:
            return Fraction(0), hi
    # relative bisection: stop once log2(hi/lo) < tol
    while hi - lo > tol * lo / 2:
        mid = (lo + hi) / 2
        if certifies(c, x, mid, exact, bits):
            lo = mid
        else:
            hi = mid
    return lo, hi


def _eval_with(c: Circuit, x, deltas: dict[int, Fraction]) -> Optional[Fraction]:
    try:
        return eval_rounded(c, x, Replay(tuple(deltas.items()))).value
    except DomainError:
        return None


def find_flip(c: Circuit, x: Sequence[Fraction], exact: Verdict, epsilon: Fraction,
              budget: int = 64, seed: int = 0) -> Optional[Replay]:
    """Search for an epsilon-evaluation contradicting ``exact``.

    Corner directions are first chosen greedily per site toward the flipping
    sign and refined by coordinate descent; then ``budget`` random restarts
    (alternating random corners and uniform deltas) are tried.
    """
    sites = c.sites
    mag = epsilon * SHRINK

    def score(deltas):
        v = _eval_with(c, x, deltas)
        if v is None:
            return None, False
        return _objective(exact, v), _flips(exact, v)

    signs = {}
    for s in sites:
        best, best_sign = None, 1
        for sg in (1, -1):
            val, hit = score({s: sg * mag})
            if hit:
                return Replay(((s, sg * mag),))
            if val is not None and (best is None or val < best):
                best, best_sign = val, sg
        signs[s] = best_sign

    current = {s: signs[s] * mag for s in sites}
    cur_val, hit = score(current)
    if hit:
        return Replay(tuple(current.items()))
    for _ in range(2):
        improved = False
        for s in sites:
            trial = dict(current)
            trial[s] = -trial[s]
            val, hit = score(trial)
            if hit:
                return Replay(tuple(trial.items()))
            if val is not None and (cur_val is None or val < cur_val):
                current, cur_val, improved = trial, val, True
        if not improved:
            break

    rng = np.random.default_rng([seed, len(sites)])
    for trial_no in range(budget):
        if trial_no % 2 == 0:
            pattern = rng.integers(0, 2, size=len(sites))
            deltas = {s: (mag if b else -mag) for s, b in zip(sites, pattern)}
        else:
            deltas = {s: random_delta(seed, ("flip", trial_no, s), epsilon) for s in sites}
        _, hit = score(deltas)
        if hit:
            return Replay(tuple(deltas.items()))
    return None


def rho_eval_bracket(c: Circuit, x: Sequence, tol=DEFAULT_TOL, flip_budget: int = 64,
                     search_flip: bool = True, bits: Optional[int] = None,
                     seed: int = 0) -> ConditionBracket:
    """Bracket ``[rho_lo, rho_hi]`` for the evaluation condition of ``c`` at ``x``."""
    tol = as_rational(tol)
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    x = [as_rational(v) for v in x]
    exact = eval_exact(c, x).verdict
    lo, hi_cert = certified_rho_lo(c, x, exact, tol, bits=bits)
    if not search_flip or lo == 1:
        return ConditionBracket(lo, Fraction(1), exact)

    # climb from the first uncertified level toward 1 until a flip shows up
    level, witness = hi_cert, None
    while True:
        witness = find_flip(c, x, exact, level, flip_budget, seed)
        if witness is not None or level >= 1 - tol:
            break
        level = min(1 - tol / 2, 2 * level) if level < Fraction(1, 2) else (1 + level) / 2
    if witness is None:
        return ConditionBracket(lo, Fraction(1), exact)
    hi = level
    if lo > 0:
        f_lo = lo
        while hi - f_lo > tol * f_lo / 2:
            mid = (f_lo + hi) / 2
            w = find_flip(c, x, exact, mid, flip_budget, seed)
            if w is not None:
                hi, witness = mid, w
            else:
                f_lo = mid
    return ConditionBracket(lo, hi, exact, witness)


def mu_eval(c: Circuit, x: Sequence, tol=DEFAULT_TOL, flip_budget: int = 64) -> ConditionBracket:
    """mu view of :func:`rho_eval_bracket`; malformed (c, x) pairs get mu = 1, verdict Out."""
    if validate(c) or len(x) != c.n_inputs:
        one = Fraction(1)
        return ConditionBracket(one, one, Verdict.OUT, malformed=True)
    return rho_eval_bracket(c, x, tol, flip_budget)


def replay_flips(c: Circuit, x: Sequence, bracket: ConditionBracket) -> bool:
    """Replay the bracket's witness and report whether it contradicts the exact verdict."""
    if bracket.witness is None:
        return False
    out = eval_rounded(c, [as_rational(v) for v in x], bracket.witness)
    return out.verdict is not bracket.verdict and _flips(bracket.verdict, out.value)


# -- feasibility conditions ---------------------------------------------------------

UPPER_BOUND_ON_MU = "UpperBoundOnMu"
LOWER_BOUND_ON_MU = "LowerBoundOnMu"


@dataclass(frozen=True)
class PointScore:
    point: tuple[Fraction, ...]
    rho_lo: Fraction
    magnitude: int

    @property
    def bounded_score(self) -> Fraction:
        return self.rho_lo / 2**self.magnitude


@dataclass(frozen=True)
class FeasibilityConditionEstimate:
    direction: str
    value: object
    bounded_variant: bool
    samples_used: int
    partial: bool = False
    best_point: Optional[tuple[Fraction, ...]] = None
    scores: tuple[PointScore, ...] = ()


def _mu_from_rho(rho: Fraction):
    return INF if rho == 0 else max(Fraction(1), 1 / rho)


def feasibility_condition_estimate(c: Circuit, k: int, bounded: bool = False, tol=DEFAULT_TOL,
                                   max_points: int = 2**14, flip_budget: int = 16
                                   ) -> FeasibilityConditionEstimate:
    """One-sided estimate of mu_feas (or mu_Bfeas when ``bounded``) from the grid F_k^n.

    If some grid point is feasible the result is a certified upper bound on
    mu; otherwise a heuristic lower bound from flip searches.
    """
    from .feasibility import GridSpec, enumerate_grid

    tol = as_rational(tol)
    spec = GridSpec(k, c.n_inputs)
    partial = spec.total > max_points
    scores: list[PointScore] = []
    best, best_point = None, None
    out_points: list[tuple[Fraction, ...]] = []
    used = 0
    for _, point in enumerate_grid(spec, cap=None):
        if used >= max_points:
            break
        used += 1
        try:
            exact = eval_exact(c, point).verdict
        except DomainError:
            continue
        if exact is Verdict.IN:
            lo, _ = certified_rho_lo(c, point, exact, tol)
            ps = PointScore(tuple(point), lo, magnitude(list(point)))
            scores.append(ps)
            s = ps.bounded_score if bounded else ps.rho_lo
            if best is None or s > best:         # strict: first (smallest code) wins ties
                best, best_point = s, tuple(point)
        else:
            out_points.append(tuple(point))
    if best is not None:
        return FeasibilityConditionEstimate(UPPER_BOUND_ON_MU, _mu_from_rho(best), bounded, used,
                                            partial, best_point, tuple(scores))
    rho_min = Fraction(1)
    for point in out_points:
        br = rho_eval_bracket(c, point, tol, flip_budget)
        rho_min = min(rho_min, br.rho_hi)
    return FeasibilityConditionEstimate(LOWER_BOUND_ON_MU, _mu_from_rho(rho_min), bounded, used,
                                        partial)


ESTIMATE_CSV_HEADER = ("circuit", "point", "rho_lo", "rho_hi", "mu_lo", "mu_hi", "flags")


def _fmt_ext(v) -> str:
    return "inf" if v == INF else format_rational(v)


def bracket_csv_row(name: str, x: Sequence, br: ConditionBracket) -> list[str]:
    return [name, ";".join(format_rational(as_rational(v)) for v in x),
            format_rational(br.rho_lo), format_rational(br.rho_hi),
            _fmt_ext(br.mu_lo), _fmt_ext(br.mu_hi), br.flags()]
