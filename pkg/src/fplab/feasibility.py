"""Testing grids F_k^n, grid-point decoding, and the grid-search feasibility decider.

Packed code layout, per coordinate (most significant first)::

    zero-flag (1) | sign (1) | e + 2**k - 1 (k+2) | d_2 .. d_{k+1} (k)

so a coordinate occupies ``2k + 4`` bits and a point concatenates its
coordinates with coordinate 0 most significant.  ``d_1`` is implicit (1 for
nonzero values).
"""

from __future__ import annotations

import enum
import itertools
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union

from gmpy2 import mpq

from .circuit import (
    Circuit,
    Exact,
    Interval,
    RandomRelative,
    SHRINK,
    RoundNearest,
    Verdict,
    eval_exact,
    eval_interval_boxes,
    eval_rounded,
    random_delta_q,
)
from .errors import CapExceeded, DomainError, InvalidParameter
from .fp_system import FpFormat, as_rational, binary_format, fl

DEFAULT_CAP = int(os.environ.get("FPLAB_GRID_CAP", 2**24))


class Decision(str, enum.Enum):
    YES = "Yes"
    NO = "No"
    UNSURE = "Unsure"

    def __str__(self) -> str:
        return self.value


# -- codes ------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class CoordCode:
    """One coordinate of a grid point: ``sign * 0.d_1...d_{k+1} * 2**e`` or zero."""
    zero: bool
    sign: int = 1
    e: int = 0
    digits: tuple[int, ...] = ()

    @classmethod
    def zero_code(cls) -> "CoordCode":
        return cls(True)

    @classmethod
    def from_mantissa(cls, sign: int, e: int, m: int, k: int) -> "CoordCode":
        digits = tuple(int(ch) for ch in format(m, f"0{k + 1}b"))
        return cls(False, sign, e, digits)

    def check(self, k: int) -> None:
        if self.zero:
            return
        if self.sign not in (1, -1):
            raise InvalidParameter("sign must be +1 or -1")
        if not -(2**k) + 1 <= self.e <= 2 ** (k + 1) - 1:
            raise InvalidParameter(f"exponent {self.e} outside F_{k}")
        if len(self.digits) != k + 1 or any(d not in (0, 1) for d in self.digits):
            raise InvalidParameter(f"need {k + 1} binary digits, got {self.digits}")
        if self.digits[0] != 1:
            raise InvalidParameter("leading digit must be 1 for nonzero codes")

    def exact_value(self, k: int) -> Fraction:
        self.check(k)
        if self.zero:
            return Fraction(0)
        m = int("".join(map(str, self.digits)), 2)
        return self.sign * m * Fraction(2) ** (self.e - (k + 1))

    def pack(self, k: int) -> int:
        self.check(k)
        if self.zero:
            return 1 << (2 * k + 3)
        sign_bit = 0 if self.sign > 0 else 1
        tail = int("".join(map(str, self.digits[1:])), 2) if k > 0 else 0
        return (sign_bit << (2 * k + 2)) | ((self.e + 2**k - 1) << k) | tail

    @classmethod
    def unpack(cls, word: int, k: int) -> "CoordCode":
        if word >> (2 * k + 3):
            if word != 1 << (2 * k + 3):
                raise InvalidParameter(f"zero-flagged code {word:#x} has payload bits")
            return cls.zero_code()
        sign = -1 if (word >> (2 * k + 2)) & 1 else 1
        e = ((word >> k) & ((1 << (k + 2)) - 1)) - (2**k - 1)
        tail = word & ((1 << k) - 1)
        code = cls.from_mantissa(sign, e, (1 << k) | tail, k)
        code.check(k)
        return code


def pack_point(codes: Sequence[CoordCode], k: int) -> int:
    w = 2 * k + 4
    word = 0
    for cc in codes:
        word = (word << w) | cc.pack(k)
    return word


def unpack_point(word: int, k: int, n: int) -> tuple[CoordCode, ...]:
    w = 2 * k + 4
    mask = (1 << w) - 1
    return tuple(CoordCode.unpack((word >> (w * (n - 1 - i))) & mask, k) for i in range(n))


@dataclass(frozen=True)
class GridSpec:
    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 1:
            raise InvalidParameter(f"grid needs k >= 1 and n >= 1, got k={self.k}, n={self.n}")

    @property
    def per_coordinate(self) -> int:
        return 2 * (3 * 2**self.k - 1) * 2**self.k + 1

    @property
    def total(self) -> int:
        return self.per_coordinate**self.n


def coordinate_codes(k: int) -> list[CoordCode]:
    """All codes of F_k in increasing packed order."""
    out = []
    for sign in (1, -1):
        for e in range(-(2**k) + 1, 2 ** (k + 1)):
            for m in range(2**k, 2 ** (k + 1)):
                out.append(CoordCode.from_mantissa(sign, e, m, k))
    out.append(CoordCode.zero_code())
    return out


def enumerate_grid(spec: GridSpec, cap: Optional[int] = DEFAULT_CAP
                   ) -> Iterator[tuple[tuple[CoordCode, ...], tuple[Fraction, ...]]]:
    """Every point of F_k^n with its codes, in lexicographic packed order."""
    if cap is not None and spec.total > cap:
        raise CapExceeded(f"grid has {spec.total} points, cap is {cap}")
    codes = coordinate_codes(spec.k)
    values = [cc.exact_value(spec.k) for cc in codes]
    for idx in itertools.product(range(len(codes)), repeat=spec.n):
        yield tuple(codes[i] for i in idx), tuple(values[i] for i in idx)


# -- decoding under the four arithmetics -------------------------------------------------

class ExactArith:
    """Exact rational arithmetic with an operation counter."""

    def __init__(self):
        self.ops = 0

    def const(self, v):
        return Fraction(v)

    def _post(self, v):
        return v

    def mul(self, a, b):
        self.ops += 1
        return self._post(a * b)

    def div(self, a, b):
        self.ops += 1
        if not isinstance(b, Interval) and b == 0:
            raise DomainError("division by exact zero in decode")
        return self._post(a / b)

    def add(self, a, b):
        self.ops += 1
        return self._post(a + b)


class RoundedArith(ExactArith):
    def __init__(self, fmt: FpFormat):
        super().__init__()
        self.fmt = fmt

    def const(self, v):
        return fl(v, self.fmt)

    def _post(self, v):
        return fl(v, self.fmt)


class RandomArith(ExactArith):
    """Each constant and result is multiplied by a keyed random (1 + delta)."""

    def __init__(self, epsilon: Fraction, seed: int, salt: tuple = ()):
        super().__init__()
        self.epsilon, self.seed, self.salt = epsilon, seed, salt
        self._scale = mpq(epsilon * SHRINK)
        self._step = 0

    def _perturb(self, v):
        self._step += 1
        return v * (1 + random_delta_q(self.seed, self.salt + ("decode", self._step), self._scale))

    def const(self, v):
        return self._perturb(mpq(v))

    def _post(self, v):
        return self._perturb(v)


class IntervalArith(ExactArith):
    def __init__(self, epsilon: Fraction, bits: Optional[int] = None):
        super().__init__()
        self.epsilon, self.bits = epsilon, bits

    def const(self, v):
        return Interval.point(v).scale(self.epsilon).outward(self.bits)

    def _post(self, v):
        return v.scale(self.epsilon).outward(self.bits)

    def div(self, a, b):
        self.ops += 1
        return self._post(a / b)


def _decode(code: CoordCode, k: int, ar: ExactArith):
    if code.zero:
        return ar.const(0) if isinstance(ar, IntervalArith) else Fraction(0)
    code.check(k)
    # 2**|e| as a product of repeated squares 2**(2**j), smaller exponents first
    e_abs = abs(code.e)
    if e_abs == 0:
        pow_e = ar.const(1)
    else:
        square = ar.const(2)
        pow_e = None
        j = 0
        while True:
            if (e_abs >> j) & 1:
                pow_e = square if pow_e is None else ar.mul(pow_e, square)
            if e_abs >> (j + 1) == 0:
                break
            square = ar.mul(square, square)
            j += 1
        if code.e < 0:
            pow_e = ar.div(ar.const(1), pow_e)
    # mantissa sum_i d_i 2**-i, each 2**-i from the previous one by a division
    two = ar.const(2)
    half = ar.div(ar.const(1), two)
    term, mant = half, half
    for d in code.digits[1:]:
        term = ar.div(term, two)
        if d:
            mant = ar.add(mant, term)
    y = ar.mul(mant, pow_e)
    if code.sign < 0:
        y = Interval(-y.hi, -y.lo) if isinstance(y, Interval) else -y
    return y


def decode_grid_point(code: CoordCode, k: int, fmt: Union[FpFormat, None] = None,
                      arith: Optional[ExactArith] = None):
    """Value of a grid code computed with O(k) arithmetic operations.

    ``fmt=None`` decodes exactly; a format rounds every operation into it;
    ``arith`` overrides both (random or interval arithmetic).
    """
    if arith is None:
        arith = ExactArith() if fmt is None else RoundedArith(fmt)
    return _decode(code, k, arith)


def decode_cost(code: CoordCode, k: int) -> int:
    ar = ExactArith()
    _decode(code, k, ar)
    return ar.ops


# -- the grid decider ---------------------------------------------------------------

MODES = ("exact", "round", "random", "interval")


@dataclass(frozen=True)
class DecisionRecord:
    verdict: Decision
    k_mach: int
    k: int
    mode: str
    u_mach: Fraction
    ops_total: int
    points_scanned: int
    witness_code: Optional[tuple[CoordCode, ...]] = None
    witness_point: Optional[tuple[Fraction, ...]] = None
    witness_value: Optional[object] = None
    seed: int = 0
    guarded_points: int = 0
    wall_ms: float = field(default=0.0, compare=False)

    @property
    def witness_hex(self) -> str:
        if self.witness_code is None:
            return ""
        return format(pack_point(self.witness_code, self.k), "x")


def _point_task(c: Circuit, k: int, k_mach: int, mode: str, seed: int, codes: Sequence[CoordCode],
                index: int, bits: Optional[int]):
    """Decode then evaluate one grid point.

    Returns (accepted, unsure, guarded, ops, value).
    """
    u = Fraction(1, 2**k_mach)
    if mode == "exact":
        ar = ExactArith()
        point = [_decode(cc, k, ar) for cc in codes]
        out = eval_exact(c, point)
        return out.value >= 0, False, False, ar.ops + out.ops_performed, out.value
    if mode == "interval":
        ar = IntervalArith(u, bits)
        boxes = [_decode(cc, k, ar) for cc in codes]
        out = eval_interval_boxes(c, boxes, u, bits)
        return (out.verdict is Verdict.IN, out.verdict is Verdict.UNSURE, False,
                ar.ops + out.ops_performed, out.value)
    if mode == "round":
        fmt = binary_format(k_mach)
        ar = RoundedArith(fmt)
        point = [_decode(cc, k, ar) for cc in codes]
        emode = RoundNearest(fmt)
        salt = ()
    elif mode == "random":
        point = []
        ops = 0
        for i, cc in enumerate(codes):
            ar = RandomArith(u, seed, (index, i))
            point.append(_decode(cc, k, ar))
            ops += ar.ops
        emode = RandomRelative(u, seed)
        salt = (index,)
    else:
        raise InvalidParameter(f"unknown mode {mode!r}; choose from {MODES}")
    decode_ops = ar.ops if mode == "round" else ops
    try:
        out = eval_rounded(c, point, emode, salt)
    except DomainError:
        # the machine guards its divisions: a failed guard rejects this point
        return False, False, True, decode_ops + c.arith_count, None
    return out.value >= 0, False, False, decode_ops + out.ops_performed, out.value


def _scan_range(args):
    c, k, k_mach, mode, seed, lo, hi, early_exit, bits = args
    codes = coordinate_codes(k)
    radix = len(codes)
    n = c.n_inputs
    ops = 0
    unsure = False
    guarded = 0
    for index in range(lo, hi):
        digits = []
        rem = index
        for _ in range(n):
            rem, d = divmod(rem, radix)
            digits.append(d)
        point_codes = tuple(codes[d] for d in reversed(digits))
        acc, uns, grd, cost, value = _point_task(c, k, k_mach, mode, seed, point_codes, index, bits)
        ops += cost
        unsure = unsure or uns
        guarded += grd
        if acc:
            return index, ops, unsure, guarded, point_codes, value
    return None, ops, unsure, guarded, None, None


def decide_feasible_grid(c: Circuit, k_mach: int, mode: str = "round", seed: int = 0,
                         workers: int = 1, cap: Optional[int] = DEFAULT_CAP,
                         bits: Optional[int] = None) -> DecisionRecord:
    """Grid-search decision of ``exists y: f_C(y) >= 0`` at precision ``k_mach``.

    Scans F_k^n with ``k = k_mach // 2`` in packed-code order, decoding each
    point and then evaluating the circuit under ``mode``:

    ``exact``
        no rounding (DomainError propagates);
    ``round``
        round-to-nearest into a binary format with unit roundoff 2**-k_mach;
    ``random``
        a seeded random u_mach-computation;
    ``interval``
        certified enclosures; returns Unsure when nothing is certified
        feasible but some point is undetermined.

    The witness is the first accepting point, i.e. the smallest packed code,
    so the record does not depend on ``workers``.
    """
    if mode not in MODES:
        raise InvalidParameter(f"unknown mode {mode!r}; choose from {MODES}")
    k = k_mach // 2
    spec = GridSpec(k, c.n_inputs)
    total = spec.total
    if cap is not None and total > cap:
        raise CapExceeded(f"grid F_{k}^{c.n_inputs} has {total} points, cap is {cap}")
    start = time.perf_counter()
    workers = max(1, int(workers))
    bounds = [(total * i // workers, total * (i + 1) // workers) for i in range(workers)]
    jobs = [(c, k, k_mach, mode, seed, lo, hi, True, bits) for lo, hi in bounds if hi > lo]
    if workers == 1 or len(jobs) == 1:
        results = [_scan_range(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_range, jobs))

    ops_total = 0
    unsure = False
    guarded = 0
    for (lo, hi), (acc, ops, uns, grd, codes, value) in zip([b for b in bounds if b[1] > b[0]], results):
        ops_total += ops
        unsure = unsure or uns
        guarded += grd
        if acc is not None:
            point = tuple(cc.exact_value(k) for cc in codes)
            return DecisionRecord(Decision.YES, k_mach, k, mode, Fraction(1, 2**k_mach), ops_total,
                                  acc + 1, codes, point, value, seed, guarded,
                                  (time.perf_counter() - start) * 1e3)
    verdict = Decision.UNSURE if (mode == "interval" and unsure) else Decision.NO
    return DecisionRecord(verdict, k_mach, k, mode, Fraction(1, 2**k_mach), ops_total, total,
                          seed=seed, guarded_points=guarded,
                          wall_ms=(time.perf_counter() - start) * 1e3)


def brute_force_feasible(c: Circuit, k: int) -> bool:
    """Reference: does some point of F_k^n satisfy f_C >= 0 exactly?"""
    return any(eval_exact(c, pt).value >= 0 for _, pt in enumerate_grid(GridSpec(k, c.n_inputs)))


DECIDE_CSV_HEADER = ("circuit", "k_mach", "k", "mode", "verdict", "witness_code", "points_scanned",
                     "ops_total", "wall_time_ms")


def decision_csv_row(name: str, rec: DecisionRecord, timing: bool = False) -> list[str]:
    return [name, str(rec.k_mach), str(rec.k), rec.mode, str(rec.verdict), rec.witness_hex,
            str(rec.points_scanned), str(rec.ops_total), f"{rec.wall_ms:.3f}" if timing else ""]


# -- one-dimensional sign-change scheme --------------------------------------------------

def decide_sign_change_1d(c: Circuit, a, b, points: int, mode=None, seed_salt: tuple = ()) -> Decision:
    """Zero detection for a one-input circuit on [a, b] from ``points`` equispaced samples.

    Yes when a sample is zero or two samples have opposite strict signs.
    Interval modes report Yes only on certified opposite signs, and Unsure
    when some sample is undetermined.
    """
    from .circuit import IntervalRelative, evaluate

    a, b = as_rational(a), as_rational(b)
    if c.n_inputs != 1:
        raise InvalidParameter("sign-change scheme needs a one-input circuit")
    if not a < b or points < 2:
        raise InvalidParameter("need a < b and at least two points")
    mode = Exact() if mode is None else mode
    xs = [a + (b - a) * i / (points - 1) for i in range(points)]
    if isinstance(mode, IntervalRelative):
        pos = neg = undetermined = False
        for x in xs:
            v = evaluate(c, [x], mode).value
            if v is None or v.contains_zero():
                undetermined = True
            elif v.lo > 0:
                pos = True
            else:
                neg = True
        if pos and neg:
            return Decision.YES
        return Decision.UNSURE if undetermined else Decision.NO
    signs = set()
    for i, x in enumerate(xs):
        v = evaluate(c, [x], mode, seed_salt + (i,)).value
        if v == 0:
            return Decision.YES
        signs.add(v > 0)
    return Decision.YES if len(signs) == 2 else Decision.NO
