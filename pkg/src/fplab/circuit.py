"""Algebraic circuits and their evaluation semantics.

A circuit is a list of nodes in topological order.  Each node is an input,
a constant, a binary arithmetic operation, or a selection
``select(test, neg, nonneg)`` that returns ``neg`` when the test value is
negative and ``nonneg`` otherwise.  The circuit decides the set
``{x : f(x) >= 0}``.

Four semantics are provided:

* :func:`eval_exact` -- rational arithmetic, no errors.
* :func:`eval_rounded` -- one concrete epsilon-evaluation: every input,
  constant and arithmetic result is multiplied by ``1 + delta`` with
  ``|delta| < epsilon``; selections are error-free.  The deltas come from
  rounding into a format, a seeded generator, a corner pattern, or a
  recorded sequence (replay).
* :func:`eval_interval` -- an enclosure of all epsilon-evaluations.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from gmpy2 import mpq

from .errors import (
    ArityMismatch,
    CircuitSyntaxError,
    DomainError,
    ForwardReference,
    InvalidParameter,
    MissingOutput,
)
from .fp_system import FpFormat, as_rational, fl, format_rational
from .interval import Interval

ARITH_OPS = ("add", "sub", "mul", "div")
KIND_ARITY = {"input": 0, "const": 0, "add": 2, "sub": 2, "mul": 2, "div": 2, "select": 3}

# Strict |delta| < epsilon for sampled and corner perturbations.
ETA = Fraction(1, 2**20)
SHRINK = 1 - ETA


class Verdict(str, enum.Enum):
    IN = "In"
    OUT = "Out"
    UNSURE = "Unsure"

    def __str__(self) -> str:
        return self.value


BRANCH_STRADDLE = "BranchStraddle"
DENOMINATOR_STRADDLE = "DenominatorStraddle"


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    args: tuple[int, ...] = ()
    index: Optional[int] = None
    value: Optional[Fraction] = None

    @property
    def is_site(self) -> bool:
        """Whether the node's value receives a (1 + delta) factor."""
        return self.kind != "select"

    @property
    def site_kind(self) -> str:
        return self.kind if self.kind in ("input", "const") else "arith"


@dataclass(frozen=True)
class Circuit:
    n_inputs: int
    nodes: tuple[Node, ...]
    outputs: tuple[int, ...]
    name: str = "circuit"

    @property
    def output(self) -> int:
        if len(self.outputs) != 1:
            raise MissingOutput("circuit must have exactly one output")
        return self.outputs[0]

    @property
    def arith_count(self) -> int:
        return sum(1 for nd in self.nodes if nd.kind in ARITH_OPS)

    @property
    def sites(self) -> tuple[int, ...]:
        """Ids of perturbation sites in node order."""
        return tuple(nd.id for nd in self.nodes if nd.is_site)

    def __len__(self) -> int:
        return len(self.nodes)


class CircuitBuilder:
    """Incremental construction with automatically numbered nodes.

    >>> b = CircuitBuilder(1)
    >>> x = b.input(0)
    >>> c = b.build(b.sub(x, b.const(1)))
    """

    def __init__(self, n_inputs: int, name: str = "circuit"):
        self.n_inputs = n_inputs
        self.name = name
        self._nodes: list[Node] = []

    def _add(self, kind, args=(), index=None, value=None) -> int:
        nid = len(self._nodes)
        self._nodes.append(Node(nid, kind, tuple(args), index, value))
        return nid

    def input(self, i: int) -> int:
        return self._add("input", index=i)

    def const(self, v) -> int:
        return self._add("const", value=as_rational(v))

    def add(self, a: int, b: int) -> int:
        return self._add("add", (a, b))

    def sub(self, a: int, b: int) -> int:
        return self._add("sub", (a, b))

    def mul(self, a: int, b: int) -> int:
        return self._add("mul", (a, b))

    def div(self, a: int, b: int) -> int:
        return self._add("div", (a, b))

    def select(self, test: int, neg: int, nonneg: int) -> int:
        return self._add("select", (test, neg, nonneg))

    def build(self, output: int) -> Circuit:
        return Circuit(self.n_inputs, tuple(self._nodes), (output,), self.name)


# -- text format ----------------------------------------------------------------

def parse_circuit(text: str, strict: bool = True) -> Circuit:
    """Parse the line-based circuit format.

    With ``strict`` (default) structural violations raise; otherwise the raw
    circuit is returned so :func:`validate` can report every problem.
    """
    name = "circuit"
    n_inputs: Optional[int] = None
    nodes: list[Node] = []
    outputs: list[int] = []
    line_of: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        try:
            if head == "circuit":
                if len(tok) != 2:
                    raise CircuitSyntaxError("expected 'circuit <name>'", lineno)
                name = tok[1]
            elif head == "inputs":
                if len(tok) != 2:
                    raise CircuitSyntaxError("expected 'inputs <n>'", lineno)
                n_inputs = int(tok[1])
                if n_inputs < 0:
                    raise CircuitSyntaxError("negative input count", lineno)
            elif head == "output":
                if len(tok) != 2:
                    raise CircuitSyntaxError("expected 'output <id>'", lineno)
                outputs.append(int(tok[1]))
            elif head == "node":
                if len(tok) < 3:
                    raise CircuitSyntaxError("expected 'node <id> <kind> ...'", lineno)
                nid, kind, rest = int(tok[1]), tok[2], tok[3:]
                if nid < 0:
                    raise CircuitSyntaxError(f"negative node id {nid}", lineno)
                if nodes and nid <= nodes[-1].id:
                    raise CircuitSyntaxError(f"node id {nid} not increasing", lineno)
                if kind == "input":
                    if len(rest) != 1:
                        raise ArityMismatch("input takes one index", lineno)
                    node = Node(nid, "input", index=int(rest[0]))
                elif kind == "const":
                    if len(rest) != 1:
                        raise ArityMismatch("const takes one rational", lineno)
                    try:
                        value = Fraction(rest[0])
                    except (ValueError, ZeroDivisionError):
                        raise CircuitSyntaxError(f"bad rational {rest[0]!r}", lineno) from None
                    node = Node(nid, "const", value=value)
                elif kind in KIND_ARITY:
                    args = tuple(int(a) for a in rest)
                    if strict and len(args) != KIND_ARITY[kind]:
                        raise ArityMismatch(
                            f"{kind} takes {KIND_ARITY[kind]} operands, got {len(args)}", lineno)
                    node = Node(nid, kind, args)
                else:
                    raise CircuitSyntaxError(f"unknown node kind {kind!r}", lineno)
                if strict:
                    known = {nd.id for nd in nodes}
                    for a in node.args:
                        if a not in known:
                            raise ForwardReference(
                                f"node {nid} references {a}, which is not defined earlier", lineno)
                nodes.append(node)
                line_of[nid] = lineno
            else:
                raise CircuitSyntaxError(f"unknown directive {head!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, CircuitSyntaxError):
                raise
            raise CircuitSyntaxError(f"malformed line: {raw.strip()!r}", lineno) from None
    if n_inputs is None:
        if strict:
            raise CircuitSyntaxError("missing 'inputs <n>' line")
        n_inputs = 0
    if not outputs and strict:
        raise MissingOutput("missing 'output <id>' line")
    c = Circuit(n_inputs, tuple(nodes), tuple(outputs), name)
    if strict:
        problems = validate(c)
        if problems:
            v = problems[0]
            exc_type = ArityMismatch if v.rule == "arity" else CircuitSyntaxError
            raise exc_type(str(v), line_of.get(v.node))
    return c


def serialize_circuit(c: Circuit) -> str:
    lines = [f"circuit {c.name}", f"inputs {c.n_inputs}"]
    for nd in c.nodes:
        if nd.kind == "input":
            lines.append(f"node {nd.id} input {nd.index}")
        elif nd.kind == "const":
            lines.append(f"node {nd.id} const {format_rational(nd.value)}")
        else:
            lines.append(f"node {nd.id} {nd.kind} " + " ".join(map(str, nd.args)))
    lines.extend(f"output {o}" for o in c.outputs)
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Violation:
    node: Optional[int]
    rule: str
    message: str

    def __str__(self) -> str:
        where = "circuit" if self.node is None else f"node {self.node}"
        return f"{where}: [{self.rule}] {self.message}"


def validate(c: Circuit) -> list[Violation]:
    """All structural problems; empty iff the circuit is well formed."""
    out: list[Violation] = []
    seen: set[int] = set()
    last = -1
    for nd in c.nodes:
        if nd.id <= last:
            out.append(Violation(nd.id, "order", f"id {nd.id} not increasing"))
        last = max(last, nd.id)
        if nd.kind not in KIND_ARITY:
            out.append(Violation(nd.id, "kind", f"unknown kind {nd.kind!r}"))
        else:
            want = KIND_ARITY[nd.kind]
            if len(nd.args) != want:
                out.append(Violation(nd.id, "arity",
                                     f"{nd.kind} needs in-degree {want}, has {len(nd.args)}"))
        for a in nd.args:
            if a not in seen:
                out.append(Violation(nd.id, "dag", f"references {a}, not defined earlier"))
        if nd.kind == "input" and (nd.index is None or not 0 <= nd.index < c.n_inputs):
            out.append(Violation(nd.id, "input-index",
                                 f"input index {nd.index} outside [0, {c.n_inputs})"))
        if nd.kind == "const" and nd.value is None:
            out.append(Violation(nd.id, "const", "constant without value"))
        seen.add(nd.id)
    if len(c.outputs) != 1:
        out.append(Violation(None, "single-output",
                             f"exactly one output required, found {len(c.outputs)}"))
    for o in c.outputs:
        if o not in seen:
            out.append(Violation(o, "output", f"output {o} is not a node"))
    return out


# -- perturbation modes -------------------------------------------------------------

def _check_eps(eps) -> Fraction:
    eps = as_rational(eps)
    if not 0 < eps < 1:
        raise InvalidParameter(f"epsilon must lie in (0, 1), got {eps}")
    return eps


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class RoundNearest:
    fmt: FpFormat

    @property
    def epsilon(self) -> Fraction:
        return self.fmt.unit_roundoff


@dataclass(frozen=True)
class RandomRelative:
    epsilon: Fraction
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_eps(self.epsilon))


@dataclass(frozen=True)
class Corner:
    """delta = direction * epsilon * (1 - eta) at each site.

    ``directions`` is either a sign sequence aligned with ``Circuit.sites``
    or a mapping from node id to sign (missing sites get 0).
    """
    epsilon: Fraction
    directions: Union[tuple[int, ...], tuple[tuple[int, int], ...]]

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_eps(self.epsilon))
        d = self.directions
        if isinstance(d, Mapping):
            d = tuple(sorted(d.items()))
        object.__setattr__(self, "directions", tuple(d))

    def sign_for(self, c: Circuit) -> dict[int, int]:
        d = self.directions
        if d and isinstance(d[0], tuple):
            return dict(d)
        sites = c.sites
        if len(d) != len(sites):
            raise InvalidParameter(f"{len(d)} directions for {len(sites)} sites")
        return dict(zip(sites, d))


@dataclass(frozen=True)
class IntervalRelative:
    epsilon: Fraction
    bits: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "epsilon", _check_eps(self.epsilon))


@dataclass(frozen=True)
class Replay:
    """Recorded per-site deltas, as found in ``EvalOutcome.deltas``."""
    deltas: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        d = self.deltas
        if isinstance(d, Mapping):
            d = d.items()
        object.__setattr__(self, "deltas", tuple(sorted((int(k), Fraction(v)) for k, v in d)))

    @property
    def max_abs(self) -> Fraction:
        return max((abs(v) for _, v in self.deltas), default=Fraction(0))

    def valid_at(self, epsilon) -> bool:
        return all(abs(v) < epsilon for _, v in self.deltas)


PerturbationMode = Union[Exact, RoundNearest, RandomRelative, Corner, IntervalRelative, Replay]


@dataclass(frozen=True)
class EvalOutcome:
    value: Union[Fraction, Interval, None]
    verdict: Verdict
    ops_performed: int
    flags: frozenset = field(default_factory=frozenset)
    deltas: tuple[tuple[int, Fraction], ...] = ()

    @property
    def indeterminate(self) -> bool:
        return self.value is None

    def replay_mode(self) -> Replay:
        return Replay(self.deltas)


def verdict_of(value) -> Verdict:
    if value is None:
        return Verdict.UNSURE
    if isinstance(value, Interval):
        if value.lo >= 0:
            return Verdict.IN
        if value.hi < 0:
            return Verdict.OUT
        return Verdict.UNSURE
    return Verdict.IN if value >= 0 else Verdict.OUT


# -- concrete evaluation --------------------------------------------------------

def _check_point(c: Circuit, x: Sequence) -> list[Fraction]:
    if len(x) != c.n_inputs:
        raise InvalidParameter(f"circuit expects {c.n_inputs} inputs, got {len(x)}")
    return [v if isinstance(v, mpq) else as_rational(v) for v in x]


def _apply(kind: str, a: Fraction, b: Fraction, nid: int) -> Fraction:
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if b == 0:
        raise DomainError(f"division by exact zero at node {nid}", node=nid)
    return a / b


def _to_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(int(v.numerator), int(v.denominator))


def _run(c: Circuit, x: list[Fraction], perturb: Optional[Callable]) -> tuple[Fraction, int, list]:
    """Canonical procedure.  ``perturb(node, value) -> (new_value, delta)``.

    Values are carried as GMP rationals internally (much cheaper gcds once
    perturbed values grow long) and converted back at the end.
    """
    vals: dict[int, mpq] = {}
    record = []
    ops = 0
    xq = [mpq(v) for v in x]
    for nd in c.nodes:
        k = nd.kind
        if k == "input":
            v = xq[nd.index]
        elif k == "const":
            v = mpq(nd.value)
        elif k == "select":
            t, neg, nonneg = nd.args
            vals[nd.id] = vals[neg] if vals[t] < 0 else vals[nonneg]
            continue
        else:
            ops += 1
            v = _apply(k, vals[nd.args[0]], vals[nd.args[1]], nd.id)
        if perturb is not None:
            v, d = perturb(nd, v)
            record.append((nd.id, _to_fraction(d)))
        vals[nd.id] = v
    return _to_fraction(vals[c.output]), ops, record


def eval_exact(c: Circuit, x: Sequence) -> EvalOutcome:
    """Exact value of the circuit at ``x`` (both select branches are computed)."""
    value, ops, _ = _run(c, _check_point(c, x), None)
    return EvalOutcome(value, verdict_of(value), ops)


def _random_unit(seed: int, key: tuple) -> int:
    h = hashlib.blake2b(repr((int(seed),) + tuple(key)).encode(), digest_size=8).digest()
    # (2r + 1 - 2**64) / 2**64 lies strictly inside (-1, 1)
    return 2 * int.from_bytes(h, "big") + 1 - 2**64


def random_delta(seed: int, key: tuple, epsilon: Fraction) -> Fraction:
    """Deterministic delta in (-epsilon*(1-eta), epsilon*(1-eta)) keyed by (seed, key)."""
    return epsilon * SHRINK * Fraction(_random_unit(seed, key), 2**64)


def random_delta_q(seed: int, key: tuple, scale: mpq) -> mpq:
    """:func:`random_delta` as a GMP rational; ``scale`` is ``epsilon * SHRINK``."""
    return scale * mpq(_random_unit(seed, key), 2**64)


def _perturber(c: Circuit, mode: PerturbationMode, salt: tuple) -> Optional[Callable]:
    if isinstance(mode, Exact):
        return None
    if isinstance(mode, RoundNearest):
        fmt = mode.fmt

        def pr(nd, v):
            r = mpq(fl(_to_fraction(v), fmt))
            return r, (r / v - 1 if v != 0 else mpq(0))
        return pr
    if isinstance(mode, RandomRelative):
        scale, seed = mpq(mode.epsilon * SHRINK), mode.seed

        def pr(nd, v):
            d = random_delta_q(seed, salt + (nd.id, nd.site_kind), scale)
            return v * (1 + d), d
        return pr
    if isinstance(mode, Corner):
        signs = mode.sign_for(c)
        mag = mpq(mode.epsilon * SHRINK)

        def pr(nd, v):
            d = signs.get(nd.id, 0) * mag
            return v * (1 + d), d
        return pr
    if isinstance(mode, Replay):
        table = {k: mpq(d) for k, d in mode.deltas}
        zero = mpq(0)

        def pr(nd, v):
            d = table.get(nd.id, zero)
            return v * (1 + d), d
        return pr
    raise InvalidParameter(f"mode {type(mode).__name__} is not a concrete evaluation")


def eval_rounded(c: Circuit, x: Sequence, mode: PerturbationMode, salt: tuple = ()) -> EvalOutcome:
    """One concrete epsilon-evaluation; the realized deltas are recorded.

    ``salt`` extends the random key so that, e.g., different grid points draw
    independent deltas under the same seed.
    """
    if isinstance(mode, IntervalRelative):
        raise InvalidParameter("use eval_interval for IntervalRelative")
    value, ops, record = _run(c, _check_point(c, x), _perturber(c, mode, salt))
    return EvalOutcome(value, verdict_of(value), ops, frozenset(), tuple(record))


# -- interval evaluation --------------------------------------------------------

def eval_interval_boxes(c: Circuit, boxes: Sequence[Optional[Interval]], epsilon,
                        bits: Optional[int] = None, closed_one: bool = False) -> EvalOutcome:
    """Enclosure of every epsilon-evaluation with inputs ranging over ``boxes``.

    ``closed_one`` admits epsilon = 1 (factor interval [0, 2]); certificates
    at that level cover every epsilon < 1.
    """
    eps = as_rational(epsilon)
    if not (0 < eps < 1 or (closed_one and eps == 1)):
        raise InvalidParameter(f"epsilon must lie in (0, 1), got {eps}")
    if len(boxes) != c.n_inputs:
        raise InvalidParameter(f"circuit expects {c.n_inputs} inputs, got {len(boxes)}")
    vals: dict[int, Optional[Interval]] = {}
    flags: set[str] = set()
    ops = 0
    for nd in c.nodes:
        k = nd.kind
        if k == "select":
            t, neg, nonneg = (vals[a] for a in nd.args)
            if t is not None and t.hi < 0:
                vals[nd.id] = neg
            elif t is not None and t.lo >= 0:
                vals[nd.id] = nonneg
            else:
                flags.add(BRANCH_STRADDLE)
                vals[nd.id] = None if neg is None or nonneg is None else neg.hull(nonneg)
            continue
        if k == "input":
            v = boxes[nd.index]
        elif k == "const":
            v = Interval.point(nd.value)
        else:
            ops += 1
            a, b = vals[nd.args[0]], vals[nd.args[1]]
            if k == "div" and b is not None and b.contains_zero():
                flags.add(DENOMINATOR_STRADDLE)
                v = None
            elif a is None or b is None:
                v = None
            elif k == "add":
                v = a + b
            elif k == "sub":
                v = a - b
            elif k == "mul":
                v = a * b
            else:
                v = a / b
        vals[nd.id] = None if v is None else v.scale(eps).outward(bits)
    value = vals[c.output]
    return EvalOutcome(value, verdict_of(value), ops, frozenset(flags))


def eval_interval(c: Circuit, x: Sequence, epsilon, bits: Optional[int] = None) -> EvalOutcome:
    """Sound enclosure of all epsilon-evaluations of ``c`` at ``x`` (0 < epsilon < 1).

    ``bits`` enables outward rounding of every endpoint to that many
    significant bits, which bounds the cost on deep circuits.
    """
    pts = _check_point(c, x)
    return eval_interval_boxes(c, [Interval.point(v) for v in pts], epsilon, bits)


def evaluate(c: Circuit, x: Sequence, mode: PerturbationMode, salt: tuple = ()) -> EvalOutcome:
    """Dispatch on ``mode``."""
    if isinstance(mode, IntervalRelative):
        return eval_interval(c, x, mode.epsilon, mode.bits)
    if isinstance(mode, Exact):
        return eval_exact(c, x)
    return eval_rounded(c, x, mode, salt)


# -- random circuits --------------------------------------------------------------

def random_circuit(rng: np.random.Generator, n_inputs: int = 2, n_nodes: int = 12, *,
                   allow_div: bool = True, allow_select: bool = True,
                   max_degree: int = 6, name: str = "random") -> Circuit:
    """Random well-formed circuit with bounded polynomial degree.

    Degree tracking keeps exact rational arithmetic affordable.
    """
    n_nodes = max(n_nodes, n_inputs + 1)
    b = CircuitBuilder(n_inputs, name)
    deg: list[int] = []
    for i in range(n_inputs):
        b.input(i)
        deg.append(1)
    kinds = ["const", "add", "sub", "mul"]
    weights = [1.0, 2.0, 2.0, 2.0]
    if allow_div:
        kinds.append("div")
        weights.append(1.0)
    if allow_select:
        kinds.append("select")
        weights.append(1.0)
    p = np.asarray(weights) / sum(weights)
    while len(deg) < n_nodes:
        kind = kinds[rng.choice(len(kinds), p=p)]
        m = len(deg)
        if kind == "const" or m == 0:
            num = int(rng.integers(-9, 10))
            den = int(rng.choice([1, 2, 3, 4, 8]))
            b.const(Fraction(num, den))
            deg.append(0)
            continue
        if kind == "select":
            t, y, z = (int(rng.integers(m)) for _ in range(3))
            b.select(t, y, z)
            deg.append(max(deg[y], deg[z]))
            continue
        l, r = int(rng.integers(m)), int(rng.integers(m))
        if kind in ("mul", "div") and deg[l] + deg[r] > max_degree:
            kind = "add"
        getattr(b, kind)(l, r)
        deg.append(deg[l] + deg[r] if kind in ("mul", "div") else max(deg[l], deg[r]))
    return b.build(len(deg) - 1)
