"""Floating-point number systems emulated over exact rationals.

A format is ``(base, precision, emin, emax)``; a nonzero element is
``sign * m * base**(e - precision)`` with ``base**(precision-1) <= m < base**precision``.
Either exponent bound may be ``None`` (unrestricted exponents).

Every value handled here is a :class:`fractions.Fraction`, so the
standard-model inequalities can be checked exactly.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Literal, Optional, Sequence, Union

from .errors import DomainError, FpOverflow, FpUnderflow, InvalidParameter, PreconditionViolated

RationalLike = Union[int, Fraction, str]
OverflowMode = Literal["saturate", "error"]

INF = math.inf


def as_rational(x: RationalLike) -> Fraction:
    """Coerce ints, Fractions and text literals ("0.125", "3/32", "1e-6")."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidParameter(f"not a rational literal: {x!r}") from exc
    if isinstance(x, numbers.Rational):
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, float):
        if not math.isfinite(x):
            raise InvalidParameter(f"non-finite value {x!r}")
        return Fraction(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as a rational")


def format_rational(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# -- exact integer logarithms -------------------------------------------------

def floor_log2(x: Fraction) -> int:
    """Largest b with 2**b <= |x| (x != 0)."""
    x = abs(Fraction(x))
    if x == 0:
        raise InvalidParameter("floor_log2 of zero")
    n, d = x.numerator, x.denominator
    b = n.bit_length() - d.bit_length()
    # 2**b <= x  <=>  n >= d << b
    if (n << -b if b < 0 else n) < (d << b if b >= 0 else d):
        b -= 1
    return b


def ceil_log2(x: Fraction) -> int:
    """Smallest c with |x| <= 2**c (x != 0)."""
    b = floor_log2(x)
    x = abs(Fraction(x))
    exact = x == (Fraction(2) ** b)
    return b if exact else b + 1


def _ge_power(x: Fraction, base: int, j: int) -> bool:
    """x >= base**j for x > 0, exactly."""
    if j >= 0:
        return x.numerator >= x.denominator * base**j
    return x.numerator * base ** (-j) >= x.denominator


def floor_log(x: Fraction, base: int) -> int:
    """Largest j with base**j <= |x|."""
    x = abs(Fraction(x))
    if x == 0:
        raise InvalidParameter("floor_log of zero")
    if base == 2:
        return floor_log2(x)
    approx = (x.numerator.bit_length() - x.denominator.bit_length()) / math.log2(base)
    j = math.floor(approx)
    while not _ge_power(x, base, j):
        j -= 1
    while _ge_power(x, base, j + 1):
        j += 1
    return j


def _round_half_even(num: int, den: int) -> int:
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q % 2 == 1):
        q += 1
    return q


# -- formats --------------------------------------------------------------------

@dataclass(frozen=True)
class FpFormat:
    base: int
    precision: int
    emin: Optional[int] = None
    emax: Optional[int] = None

    def __post_init__(self):
        if self.base < 2:
            raise InvalidParameter(f"base must be >= 2, got {self.base}")
        if self.precision < 2:
            raise InvalidParameter(f"precision must be >= 2, got {self.precision}")
        if self.emin is not None and self.emax is not None and self.emin > self.emax:
            raise InvalidParameter(f"emin {self.emin} > emax {self.emax}")

    @property
    def bounded(self) -> bool:
        return self.emin is not None or self.emax is not None

    @property
    def unit_roundoff(self) -> Fraction:
        return Fraction(1, 2) * Fraction(self.base) ** (1 - self.precision)

    @property
    def k_mach(self) -> int:
        """ceil(log2(1/u)), the precision in bits."""
        return ceil_log2(1 / self.unit_roundoff)

    @property
    def min_positive(self) -> Optional[Fraction]:
        if self.emin is None:
            return None
        return Fraction(self.base) ** (self.emin - 1)

    @property
    def max_positive(self) -> Optional[Fraction]:
        if self.emax is None:
            return None
        return Fraction(self.base) ** self.emax * (1 - Fraction(self.base) ** -self.precision)

    def in_range(self, x: RationalLike) -> bool:
        x = abs(as_rational(x))
        if x == 0:
            return True
        if self.emin is not None and x < self.min_positive:
            return False
        if self.emax is not None and x > self.max_positive:
            return False
        return True

    def elements(self) -> Iterator[Fraction]:
        """All elements (ascending), only for bounded formats."""
        if self.emin is None or self.emax is None:
            raise InvalidParameter("cannot enumerate a format with unbounded exponents")
        b, t = self.base, self.precision
        positives = [
            Fraction(m) * Fraction(b) ** (e - t)
            for e in range(self.emin, self.emax + 1)
            for m in range(b ** (t - 1), b**t)
        ]
        yield from (-p for p in reversed(positives))
        yield Fraction(0)
        yield from positives

    def cardinality(self) -> int:
        if self.emin is None or self.emax is None:
            raise InvalidParameter("unbounded format is infinite")
        b, t = self.base, self.precision
        return 2 * (self.emax - self.emin + 1) * (b**t - b ** (t - 1)) + 1

    def serialize(self) -> str:
        lo = "*" if self.emin is None else str(self.emin)
        hi = "*" if self.emax is None else str(self.emax)
        return f"fp {self.base} {self.precision} {lo} {hi}"

    @classmethod
    def parse(cls, text: str) -> "FpFormat":
        parts = text.split()
        if len(parts) != 5 or parts[0] != "fp":
            raise InvalidParameter(f"expected 'fp <base> <precision> <emin|*> <emax|*>', got {text!r}")
        try:
            base, prec = int(parts[1]), int(parts[2])
            emin = None if parts[3] == "*" else int(parts[3])
            emax = None if parts[4] == "*" else int(parts[4])
        except ValueError as exc:
            raise InvalidParameter(f"bad format line {text!r}") from exc
        return cls(base, prec, emin, emax)

    def __str__(self) -> str:
        return self.serialize()


def fk_format(k: int) -> FpFormat:
    """The binary testing-grid system F_k: t = k+1, e in [-2**k + 1, 2**(k+1) - 1]."""
    if not isinstance(k, int) or k < 1:
        raise InvalidParameter(f"k must be an integer >= 1, got {k!r}")
    return FpFormat(2, k + 1, -(2**k) + 1, 2 ** (k + 1) - 1)


def binary_format(k_mach: int, emin: Optional[int] = None, emax: Optional[int] = None) -> FpFormat:
    """Binary format whose unit roundoff is 2**-k_mach.

    Precision is at least 2, so ``k_mach=1`` yields the finer u = 1/4.
    """
    if k_mach < 1:
        raise InvalidParameter(f"k_mach must be >= 1, got {k_mach}")
    return FpFormat(2, max(2, k_mach), emin, emax)


# -- numbers and rounding -------------------------------------------------------

@dataclass(frozen=True)
class FpNumber:
    sign: int
    mantissa: int
    exponent: int
    fmt: FpFormat

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidParameter("sign must be +1 or -1")
        b, t = self.fmt.base, self.fmt.precision
        if self.mantissa == 0:
            if self.exponent != 0 or self.sign != 1:
                raise InvalidParameter("zero must be encoded as (+1, 0, 0)")
            return
        if not b ** (t - 1) <= self.mantissa < b**t:
            raise InvalidParameter(f"mantissa {self.mantissa} not normalized for {self.fmt}")
        if self.fmt.emin is not None and self.exponent < self.fmt.emin:
            raise InvalidParameter(f"exponent {self.exponent} below emin")
        if self.fmt.emax is not None and self.exponent > self.fmt.emax:
            raise InvalidParameter(f"exponent {self.exponent} above emax")

    @classmethod
    def zero(cls, fmt: FpFormat) -> "FpNumber":
        return cls(1, 0, 0, fmt)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    @property
    def value(self) -> Fraction:
        if self.mantissa == 0:
            return Fraction(0)
        return self.sign * self.mantissa * Fraction(self.fmt.base) ** (self.exponent - self.fmt.precision)

    def digits(self) -> list[int]:
        """d_1..d_t in base ``fmt.base``."""
        b, t = self.fmt.base, self.fmt.precision
        m, out = self.mantissa, []
        for _ in range(t):
            m, d = divmod(m, b)
            out.append(d)
        return out[::-1]

    def __float__(self) -> float:
        return float(self.value)


def _saturate(sign: int, fmt: FpFormat, overflow: bool) -> FpNumber:
    b, t = fmt.base, fmt.precision
    if overflow:
        return FpNumber(sign, b**t - 1, fmt.emax, fmt)
    return FpNumber(sign, b ** (t - 1), fmt.emin, fmt)


def _finish(sign: int, m: int, e: int, fmt: FpFormat, overflow_mode: OverflowMode,
            exact_value=None) -> FpNumber:
    """Renormalize a rounded mantissa and apply the exponent range."""
    b, t = fmt.base, fmt.precision
    if m == b**t:
        m, e = b ** (t - 1), e + 1
    if fmt.emax is not None and e > fmt.emax:
        # only reachable for inputs above max_positive (rounding cannot cross it)
        if overflow_mode == "error":
            raise FpOverflow(f"|x| = {exact_value} exceeds the largest element of {fmt}")
        return _saturate(sign, fmt, True)
    return FpNumber(sign, m, e, fmt)


def round_to_format(x: RationalLike, fmt: FpFormat, overflow: OverflowMode = "saturate") -> FpNumber:
    """Nearest element of ``fmt`` (ties to even mantissa).

    Out-of-range inputs saturate to the nearest nonzero element, or raise
    :class:`FpOverflow` / :class:`FpUnderflow` with ``overflow="error"``.
    """
    x = as_rational(x)
    if x == 0:
        return FpNumber.zero(fmt)
    sign = 1 if x > 0 else -1
    a = abs(x)
    if fmt.emax is not None and a > fmt.max_positive:
        if overflow == "error":
            raise FpOverflow(f"|x| = {a} > {fmt.max_positive}, the upper bound of {fmt}")
        return _saturate(sign, fmt, True)
    if fmt.emin is not None and a < fmt.min_positive:
        if overflow == "error":
            raise FpUnderflow(f"0 < |x| = {a} < {fmt.min_positive}, the lower bound of {fmt}")
        return _saturate(sign, fmt, False)
    b, t = fmt.base, fmt.precision
    e = floor_log(a, b) + 1
    shift = t - e
    if shift >= 0:
        num, den = a.numerator * b**shift, a.denominator
    else:
        num, den = a.numerator, a.denominator * b ** (-shift)
    m = _round_half_even(num, den)
    return _finish(sign, m, e, fmt, overflow, a)


def fl(x: RationalLike, fmt: FpFormat, overflow: OverflowMode = "saturate") -> Fraction:
    """Value of :func:`round_to_format`."""
    return round_to_format(x, fmt, overflow).value


def fp_apply(op: str, a: RationalLike, b: RationalLike, fmt: FpFormat,
             overflow: OverflowMode = "saturate") -> Fraction:
    """Standard-model operation: exact result, then one rounding."""
    a, b = as_rational(a), as_rational(b)
    if op in ("+", "add"):
        exact = a + b
    elif op in ("-", "sub"):
        exact = a - b
    elif op in ("*", "x", "mul"):
        exact = a * b
    elif op in ("/", "div"):
        if b == 0:
            raise DomainError("division by exact zero")
        exact = a / b
    else:
        raise InvalidParameter(f"unknown operation {op!r}")
    return fl(exact, fmt, overflow)


def fp_mul(a: FpNumber, b: FpNumber, overflow: OverflowMode = "saturate") -> FpNumber:
    """Rounded product computed on (mantissa, exponent) pairs.

    Avoids materializing huge rationals, which matters for long chains of
    squarings whose exponents grow geometrically.
    """
    fmt = a.fmt
    if b.fmt != fmt:
        raise InvalidParameter("operands belong to different formats")
    if a.is_zero or b.is_zero:
        return FpNumber.zero(fmt)
    base, t = fmt.base, fmt.precision
    sign = a.sign * b.sign
    prod = a.mantissa * b.mantissa           # has 2t-1 or 2t digits
    e = a.exponent + b.exponent              # value = prod * base**(e - 2t)
    if prod >= base ** (2 * t - 1):
        shift = t
    else:
        shift = t - 1
        e -= 1
    m = _round_half_even(prod, base**shift)
    if fmt.emin is not None and e < fmt.emin:
        if overflow == "error":
            raise FpUnderflow(f"product underflows {fmt}")
        return _saturate(sign, fmt, False)
    return _finish(sign, m, e, fmt, overflow, "product")


def fp_number_ge(x: FpNumber, q: Fraction) -> bool:
    """x >= q for q > 0, without materializing x when its exponent is extreme."""
    q = Fraction(q)
    if x.is_zero or x.sign < 0:
        return False
    fmt = x.fmt
    # x in [base**(e-1), base**e)
    lo_exp = x.exponent - 1
    qlog = floor_log(q, fmt.base)
    if lo_exp > qlog:
        return True
    if x.exponent <= qlog:
        return False
    return x.value >= q


# -- error accumulation, magnitude, size ----------------------------------------

def gamma_bound(n: int, u: RationalLike) -> Fraction:
    """gamma_n = n u / (1 - n u), the bound on |theta_n| for n factors (1+delta)^{+-1}."""
    u = as_rational(u)
    if n < 0:
        raise InvalidParameter("n must be a natural number")
    if n * u >= 1:
        raise PreconditionViolated(f"n*u = {n * u} >= 1")
    return n * u / (1 - n * u)


def _fk_max_exponent(k: int) -> int:
    return 2 ** (k + 1) - 1


def magnitude(x: Union[RationalLike, Sequence[RationalLike]]) -> int:
    """Smallest k >= 1 with x in Range(F_k); max over coordinates for vectors."""
    if isinstance(x, (list, tuple)):
        return max((magnitude(xi) for xi in x), default=1)
    x = abs(as_rational(x))
    if x == 0:
        return 1
    b = floor_log2(x)                        # 2**b <= x < 2**(b+1)
    k = 1
    if b < 0:
        # lower end 2**(-2**k) is a power of two: need 2**k >= -b
        k = max(k, (-b - 1).bit_length())
    # need b <= 2**(k+1) - 2 (the boundary case is settled below)
    if b > 0:
        k = max(k, (b + 1).bit_length() - 1)
    while not fk_format(k).in_range(x):
        k += 1
    return k


@dataclass(frozen=True)
class SizeInfo:
    length: int
    log_mu: Union[int, float]
    size: Union[int, float]

    @property
    def ill_posed(self) -> bool:
        return self.size == INF


def size_of(length: int, mu: Union[RationalLike, float]) -> SizeInfo:
    """size = length + ceil(log2 mu); infinite for ill-posed inputs (mu = inf)."""
    if length < 0:
        raise InvalidParameter("length must be natural")
    if isinstance(mu, float) and math.isinf(mu):
        if mu < 0:
            raise InvalidParameter("mu must be >= 1")
        return SizeInfo(length, INF, INF)
    mu = as_rational(mu)
    if mu < 1:
        raise InvalidParameter(f"mu must be >= 1, got {mu}")
    log_mu = ceil_log2(mu) if mu > 1 else 0
    return SizeInfo(length, log_mu, length + log_mu)
