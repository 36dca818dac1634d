import math
from fractions import Fraction

import numpy as np
import pytest

from fplab.circuit import (
    CircuitBuilder,
    RandomRelative,
    Verdict,
    eval_exact,
    eval_rounded,
    parse_circuit,
    random_circuit,
)
from fplab.condition import (
    LOWER_BOUND_ON_MU,
    UPPER_BOUND_ON_MU,
    bracket_csv_row,
    feasibility_condition_estimate,
    mu_eval,
    replay_flips,
    rho_eval_bracket,
)
from fplab.errors import DomainError, InvalidParameter
from fplab.fp_system import magnitude

from conftest import comparison_circuit, identity_circuit, neg_one_minus_square, square_circuit

TOL = Fraction(1, 2**20)


def closed_form_rho(x, c):
    """Flip radius of x - c: min(1, |x - c| / (|x| + |c|))."""
    if x == c:
        return Fraction(0)
    return min(Fraction(1), abs(x - c) / (abs(x) + abs(c)))


def test_identity_at_one():
    br = rho_eval_bracket(identity_circuit(), [1])
    assert br.rho_lo == 1 and br.rho_hi == 1
    assert br.mu_lo == 1 and br.mu_hi == 1 and br.witness is None


def test_sub_at_two():
    c = comparison_circuit(1)
    br = rho_eval_bracket(c, [2], TOL)
    assert br.rho_lo <= Fraction(1, 3) <= br.rho_hi
    assert br.width <= TOL
    assert br.mu_lo <= 3 <= br.mu_hi
    assert replay_flips(c, [2], br)


def test_sub_at_boundary_is_ill_posed():
    br = rho_eval_bracket(comparison_circuit(1), [1])
    assert br.rho_lo == 0 and br.mu_hi == math.inf and br.ill_posed
    assert br.verdict is Verdict.IN


def test_mu_eval_examples():
    assert mu_eval(identity_circuit(), [1]).mu_hi == 1
    br = mu_eval(comparison_circuit(1), [2])
    assert abs(float(br.mu_lo) - 3) < 1e-4 and abs(float(br.mu_hi) - 3) < 1e-4


def test_mu_eval_malformed_input():
    br = mu_eval(comparison_circuit(1), [1, 2])
    assert br.malformed and br.mu_lo == 1 and br.mu_hi == 1 and br.verdict is Verdict.OUT
    bad = parse_circuit("inputs 1\nnode 0 input 0\nnode 1 select 0 0\noutput 1\n", strict=False)
    assert mu_eval(bad, [1]).malformed


def test_domain_error_propagates():
    b = CircuitBuilder(1)
    x = b.input(0)
    with pytest.raises(DomainError):
        rho_eval_bracket(b.build(b.div(x, x)), [0])


def test_bad_tol():
    with pytest.raises(InvalidParameter):
        rho_eval_bracket(identity_circuit(), [1], tol=0)


def test_comparison_closed_form_random():
    rng = np.random.default_rng(31)
    for _ in range(20):
        x = Fraction(int(rng.integers(-200, 201)), int(rng.integers(1, 17)))
        c = Fraction(int(rng.integers(-200, 201)), int(rng.integers(1, 17)))
        br = rho_eval_bracket(comparison_circuit(c), [x], TOL)
        rho = closed_form_rho(x, c)
        assert br.rho_lo <= rho <= br.rho_hi
        assert br.width <= Fraction(1, 2**18)
        if br.witness is not None:
            assert replay_flips(comparison_circuit(c), [x], br)


def test_out_verdict_bracket():
    # x < c: exact verdict Out; flipping needs a nonnegative perturbed value
    c = comparison_circuit(3)
    br = rho_eval_bracket(c, [1], TOL)
    assert br.verdict is Verdict.OUT
    assert br.rho_lo <= Fraction(1, 2) <= br.rho_hi
    assert replay_flips(c, [1], br)


def test_monotone_refinement():
    c = comparison_circuit(Fraction(7, 3))
    coarse = rho_eval_bracket(c, [5], Fraction(1, 2**8))
    fine = rho_eval_bracket(c, [5], Fraction(1, 2**20))
    assert coarse.rho_lo <= fine.rho_lo <= fine.rho_hi <= coarse.rho_hi


def test_rho_lo_is_sound_fuzz():
    """Random evaluations at level rho_lo never flip the exact verdict."""
    rng = np.random.default_rng(77)
    trials = 0
    while trials < 1000:
        c = random_circuit(rng, 2, int(rng.integers(4, 21)), max_degree=4)
        x = [Fraction(int(rng.integers(-16, 17)), int(rng.integers(1, 5))) for _ in range(2)]
        try:
            exact = eval_exact(c, x).verdict
        except DomainError:
            continue
        br = rho_eval_bracket(c, x, Fraction(1, 2**10), search_flip=False, bits=64)
        if br.rho_lo == 0:
            continue
        eps = min(br.rho_lo, Fraction(1) - Fraction(1, 2**30))
        for s in range(5):
            try:
                out = eval_rounded(c, x, RandomRelative(eps, s))
            except DomainError:
                raise AssertionError("division by zero inside a certified level")
            assert out.verdict is exact
            trials += 1


def test_witnesses_replay_on_random_circuits():
    rng = np.random.default_rng(78)
    found = 0
    for _ in range(60):
        c = random_circuit(rng, 1, 8, allow_div=False, max_degree=3)
        x = [Fraction(int(rng.integers(-8, 9)), 2)]
        br = rho_eval_bracket(c, x, Fraction(1, 2**12), flip_budget=16)
        assert br.rho_lo <= br.rho_hi
        if br.witness is not None:
            found += 1
            assert replay_flips(c, x, br)
            assert br.witness.max_abs < br.rho_hi
    assert found > 0


def test_bracket_csv_row():
    br = rho_eval_bracket(comparison_circuit(1), [1])
    row = bracket_csv_row("sub1", [1], br)
    assert row[0] == "sub1" and row[2] == "0" and row[5] == "inf" and "ill-posed" in row[6]


# -- feasibility condition estimates -------------------------------------------------

def test_estimate_infeasible_circuit():
    est = feasibility_condition_estimate(neg_one_minus_square(), 2)
    assert est.direction == LOWER_BOUND_ON_MU and est.value == 1
    assert est.samples_used == 89


def test_estimate_square_feasible():
    est = feasibility_condition_estimate(square_circuit(), 2)
    assert est.direction == UPPER_BOUND_ON_MU and est.value == 1


def brute_force_bounded_score(k):
    """max over nonzero y in F_3 of min(1, (y-1)/(y+1)) * 2^-mgt(y), y >= 1."""
    from fplab.fp_system import fk_format
    best = Fraction(0)
    for y in fk_format(k).elements():
        if y >= 1:
            best = max(best, min(Fraction(1), (y - 1) / (y + 1)) / 2 ** magnitude(y))
    return best


def test_estimate_bounded_sub1_k3():
    est = feasibility_condition_estimate(comparison_circuit(1), 3, bounded=True)
    best = brute_force_bounded_score(3)
    assert best == Fraction(5, 14)
    assert est.direction == UPPER_BOUND_ON_MU
    assert est.best_point == (Fraction(6),)
    assert 1 / best <= est.value <= 1 / best * (1 + Fraction(1, 2**18))
    assert abs(float(est.value) - 2.8) < 1e-4


def test_pointwise_bounded_below_unbounded():
    est = feasibility_condition_estimate(comparison_circuit(1), 2, bounded=True)
    for s in est.scores:
        assert s.bounded_score <= s.rho_lo
