"""Closed rational intervals with conservative arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import InvalidParameter
from .fp_system import floor_log2


def _round_directed(x: Fraction, bits: int, up: bool) -> Fraction:
    """Dyadic with ``bits`` significant bits, rounded toward +inf (up) or -inf."""
    if x == 0:
        return x
    shift = bits - 1 - floor_log2(x)
    if shift >= 0:
        num, den = x.numerator << shift, x.denominator
    else:
        num, den = x.numerator, x.denominator << -shift
    q = -((-num) // den) if up else num // den
    return Fraction(q) / (Fraction(2) ** shift)


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidParameter(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x) -> "Interval":
        x = Fraction(x)
        return cls(x, x)

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        if self.lo == self.hi and other.lo == other.hi:
            p = self.lo * other.lo
            return Interval(p, p)
        ps = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(ps), max(ps))

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def __truediv__(self, other: "Interval") -> "Interval":
        if other.contains_zero():
            raise ZeroDivisionError("divisor interval contains zero")
        return self * Interval(1 / other.hi, 1 / other.lo)

    def scale(self, epsilon: Fraction) -> "Interval":
        """Product with [1 - epsilon, 1 + epsilon] (0 <= epsilon <= 1)."""
        return self * Interval(1 - epsilon, 1 + epsilon)

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def outward(self, bits: Optional[int]) -> "Interval":
        """Widen to dyadic endpoints with ``bits`` significant bits (None: no-op)."""
        if bits is None:
            return self
        return Interval(_round_directed(self.lo, bits, False), _round_directed(self.hi, bits, True))

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"
