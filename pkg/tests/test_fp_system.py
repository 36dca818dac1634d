import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fplab.errors import FpOverflow, FpUnderflow, InvalidParameter, PreconditionViolated
from fplab.fp_system import (
    FpFormat,
    FpNumber,
    binary_format,
    ceil_log2,
    fk_format,
    fl,
    floor_log,
    floor_log2,
    fp_apply,
    fp_mul,
    fp_number_ge,
    gamma_bound,
    magnitude,
    round_to_format,
    size_of,
)


def nearest_by_enumeration(x, fmt):
    """Reference rounding: scan all elements, ties to even mantissa."""
    elems = list(fmt.elements())
    best = min(abs(e - x) for e in elems)
    cands = [e for e in elems if abs(e - x) == best]
    if len(cands) == 1:
        return cands[0]
    t = fmt.precision
    for e in cands:
        exp = floor_log2(e) + 1
        m = abs(e) * Fraction(2) ** (t - exp)
        if m.denominator == 1 and m.numerator % 2 == 0:
            return e
    raise AssertionError("no even candidate")


# -- formats ------------------------------------------------------------------

def test_fk_format_k5():
    f = fk_format(5)
    assert (f.base, f.precision, f.emin, f.emax) == (2, 6, -31, 63)
    assert f.unit_roundoff == Fraction(1, 2**6)


def test_fk_format_k1_range():
    f = fk_format(1)
    assert f.min_positive == Fraction(1, 4)
    assert f.max_positive == 6


def test_fk_format_k2_count_by_enumeration():
    f = fk_format(2)
    triples = [(s, e, m) for s in (1, -1) for e in range(f.emin, f.emax + 1)
               for m in range(2 ** (f.precision - 1), 2**f.precision)]
    assert len(triples) == 88
    assert len({s * m * Fraction(2) ** (e - f.precision) for s, e, m in triples}) == 88


def test_fk_format_rejects_k0():
    with pytest.raises(InvalidParameter):
        fk_format(0)


@pytest.mark.parametrize("kw", [dict(base=1, precision=3), dict(base=2, precision=1),
                                dict(base=2, precision=3, emin=4, emax=2)])
def test_format_invariants(kw):
    with pytest.raises(InvalidParameter):
        FpFormat(**kw)


def test_format_text_roundtrip():
    for f in (FpFormat(2, 3, -4, 4), FpFormat(10, 5), FpFormat(2, 8, None, 12)):
        assert FpFormat.parse(f.serialize()) == f
    assert FpFormat(2, 3).serialize() == "fp 2 3 * *"


def test_k_mach():
    assert binary_format(7).k_mach == 7
    assert FpFormat(10, 4).k_mach == math.ceil(math.log2(2000))


# -- rounding -------------------------------------------------------------------

def test_round_one_tenth():
    assert fl(Fraction(1, 10), FpFormat(2, 3, -4, 4)) == Fraction(3, 32)


def test_round_saturates_overflow():
    r = round_to_format(2**100, FpFormat(2, 3, -4, 4))
    assert (r.mantissa, r.exponent) == (7, 4) and r.value == 14


def test_round_saturates_underflow_to_nearest_nonzero():
    f = FpFormat(2, 3, -4, 4)
    assert fl(Fraction(1, 10**6), f) == f.min_positive
    assert fl(Fraction(-1, 10**6), f) == -f.min_positive


def test_round_error_mode():
    f = FpFormat(2, 3, -4, 4)
    with pytest.raises(FpOverflow):
        round_to_format(15, f, "error")
    with pytest.raises(FpUnderflow):
        round_to_format(Fraction(1, 64), f, "error")
    assert fl(14, f, "error") == 14


def test_ties_to_even():
    f = FpFormat(2, 3)
    # 9/8 lies between 1 (m=4) and 5/4 (m=5)
    assert fl(Fraction(9, 8), f) == 1
    # 11/8 between 5/4 (m=5) and 3/2 (m=6)
    assert fl(Fraction(11, 8), f) == Fraction(3, 2)


def test_round_renormalizes_carry():
    f = FpFormat(2, 3)
    assert fl(Fraction(15, 8) + Fraction(1, 100), f) == 2


def test_decimal_format():
    f = FpFormat(10, 3)
    assert fl(Fraction(12345, 1000), f) == Fraction(1230, 100)
    assert fl(Fraction(2), f) == 2
    assert floor_log(Fraction(999), 10) == 2 and floor_log(Fraction(1000), 10) == 3


rationals = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**6)


@given(rationals)
def test_round_idempotent_and_odd(x):
    f = FpFormat(2, 5, -20, 20)
    r = fl(x, f)
    assert fl(r, f) == r
    assert fl(-x, f) == -r


@given(rationals, rationals)
def test_round_monotone(x, y):
    f = FpFormat(2, 4, -20, 20)
    if x > y:
        x, y = y, x
    assert fl(x, f) <= fl(y, f)


@given(st.fractions(min_value=Fraction(1, 10**5), max_value=10**5, max_denominator=10**7),
       st.integers(2, 12))
def test_relative_error_below_unit_roundoff(x, t):
    f = FpFormat(2, t)
    assert abs(fl(x, f) - x) / abs(x) < f.unit_roundoff


def test_matches_enumeration_oracle_small_formats():
    rng = np.random.default_rng(11)
    for t in (2, 3, 4):
        for emin, emax in ((-6, 6), (-2, 3)):
            f = FpFormat(2, t, emin, emax)
            lo, hi = f.min_positive, f.max_positive
            for _ in range(60):
                num = int(rng.integers(-(2**30), 2**30))
                x = hi * Fraction(num, 2**30)
                if x != 0 and abs(x) < lo:
                    continue
                assert fl(x, f) == nearest_by_enumeration(x, f), (x, f)


def test_fp_number_normalization():
    f = FpFormat(2, 3)
    with pytest.raises(InvalidParameter):
        FpNumber(1, 3, 0, f)
    n = round_to_format(Fraction(3, 32), FpFormat(2, 3, -4, 4))
    assert n.digits() == [1, 1, 0] and n.value == Fraction(3, 32)


# -- standard model ---------------------------------------------------------------

def test_fp_apply_absorbs_small_addend():
    assert fp_apply("+", 1, Fraction(1, 2**10), FpFormat(2, 3)) == 1


def test_fp_apply_exact_product():
    assert fp_apply("*", 2, 3, fk_format(3)) == 6


def test_fp_apply_divide_by_zero():
    from fplab.errors import DomainError
    with pytest.raises(DomainError):
        fp_apply("/", 1, 0, FpFormat(2, 3))


@settings(max_examples=200)
@given(st.sampled_from(["+", "-", "*", "/"]),
       st.fractions(min_value=-100, max_value=100, max_denominator=1000),
       st.fractions(min_value=-100, max_value=100, max_denominator=1000),
       st.integers(2, 10))
def test_standard_model(op, a, b, t):
    f = FpFormat(2, t)
    if op == "/" and b == 0:
        return
    exact = {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else 0}[op]
    r = fp_apply(op, a, b, f)
    if exact == 0:
        assert r == 0
    else:
        assert abs(r - exact) / abs(exact) < Fraction(1, 2) * Fraction(2) ** (1 - t)


@given(st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=10**4),
       st.fractions(min_value=Fraction(1, 1000), max_value=1000, max_denominator=10**4))
def test_fp_mul_matches_rational_path(a, b):
    f = FpFormat(2, 7)
    ra, rb = round_to_format(a, f), round_to_format(b, f)
    assert fp_mul(ra, rb).value == fl(ra.value * rb.value, f)


def test_fp_number_ge_extreme_exponent():
    f = binary_format(10)
    tiny = FpNumber(1, 2**9, -10**9, f)
    huge = FpNumber(1, 2**9, 10**9, f)
    assert not fp_number_ge(tiny, Fraction(1, 2))
    assert fp_number_ge(huge, Fraction(1, 2))
    assert fp_number_ge(round_to_format(Fraction(1, 2), f), Fraction(1, 2))


# -- gamma bound ------------------------------------------------------------------

def test_gamma_values():
    assert gamma_bound(2, Fraction(1, 8)) == Fraction(1, 3)
    assert gamma_bound(0, Fraction(1, 8)) == 0
    with pytest.raises(PreconditionViolated):
        gamma_bound(8, Fraction(1, 8))


def test_gamma_dominates_products_small_sample():
    rng = np.random.default_rng(2)
    u = Fraction(1, 2**16)
    for _ in range(2000):
        n = int(rng.integers(1, 101))
        prod = Fraction(1)
        for _ in range(n):
            d = u * Fraction(int(rng.integers(-(2**20), 2**20 + 1)), 2**20)
            prod *= (1 + d) if rng.integers(2) else 1 / (1 + d)
        assert abs(prod - 1) <= gamma_bound(n, u)


def test_gamma_tight_at_n1_reciprocal():
    u = Fraction(1, 2**16)
    assert abs(1 / (1 - u) - 1) == gamma_bound(1, u)


# -- magnitude, size -------------------------------------------------------------

@pytest.mark.parametrize("x,k", [(0, 1), (1, 1), (10, 2), (6, 1), (Fraction(1, 4), 1),
                                 (Fraction(1, 5), 2), (7, 2), (112, 2), (113, 3),
                                 (Fraction(1, 16), 2), (Fraction(1, 17), 3)])
def test_magnitude_values(x, k):
    assert magnitude(x) == k


@given(st.fractions(min_value=-10**12, max_value=10**12, max_denominator=10**12))
def test_magnitude_is_minimal(x):
    k = magnitude(x)
    assert fk_format(k).in_range(x)
    assert k == 1 or not fk_format(k - 1).in_range(x)


def test_magnitude_vector_takes_max():
    assert magnitude([1, 10, Fraction(1, 2)]) == 2


def test_size_of():
    assert size_of(5, 1).size == 5
    assert size_of(3, 8).size == 6
    s = size_of(3, math.inf)
    assert s.size == math.inf and s.ill_posed
    assert size_of(2, Fraction(9, 8)).size == 3
    with pytest.raises(InvalidParameter):
        size_of(3, Fraction(1, 2))


def test_log_helpers():
    assert floor_log2(Fraction(1, 3)) == -2
    assert ceil_log2(Fraction(8)) == 3 and ceil_log2(Fraction(9)) == 4
