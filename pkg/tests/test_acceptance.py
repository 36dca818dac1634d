"""Acceptance suite: one test per criterion, each with its own runtime budget.

Every test records a PASS/FAIL line that is echoed in the terminal summary.
"""
import contextlib
import math
import time
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np

from fplab.circuit import Corner, RandomRelative, eval_exact, eval_interval, eval_rounded, random_circuit
from fplab.cli import main
from fplab.condition import feasibility_condition_estimate, mu_eval, replay_flips, rho_eval_bracket
from fplab.errors import DomainError
from fplab.feasibility import Decision, RandomArith, coordinate_codes, decide_feasible_grid, decode_grid_point
from fplab.fp_system import FpFormat, binary_format, ceil_log2, fk_format, fl, gamma_bound
from fplab.showcase import (
    HierarchyInstance,
    hero_format,
    hero_iterations,
    hero_sqrt,
    hierarchy_condition,
    hierarchy_decide,
    hierarchy_k_mach,
    hierarchy_witness,
    in_hierarchy_set,
)

from conftest import ACCEPTANCE_LINES, comparison_circuit, neg_one_minus_square
from test_feasibility import _corpus, grid_oracle
from test_fp_system import nearest_by_enumeration


@contextlib.contextmanager
def criterion(n, label, budget):
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        dt = time.perf_counter() - t0
        in_time = budget is None or dt < budget
        status = "PASS" if ok and in_time else "FAIL"
        limit = "" if budget is None else f" (limit {budget:.0f} s)"
        note = "" if in_time else " over time budget"
        line = f"criterion {n}: {status} {label} [{dt:.1f} s{limit}]{note}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert in_time, line


def random_in_range(rng, fmt):
    """Random positive or negative rational inside the normal range of ``fmt``."""
    e = int(rng.integers(fmt.emin, fmt.emax + 1))
    frac = Fraction(int(rng.integers(2**39, 2**40)), 2**40)  # in [1/2, 1)
    x = frac * Fraction(2) ** e
    x = min(max(x, fmt.min_positive), fmt.max_positive)
    return -x if rng.integers(2) else x


def test_1_standard_model_rounding():
    rng = np.random.default_rng(1001)
    with criterion(1, "standard-model rounding, t=3..8", 30):
        for t in range(3, 9):
            fmt = FpFormat(2, t, -12, 12)
            u = fmt.unit_roundoff
            for _ in range(10**4):
                x = random_in_range(rng, fmt)
                assert abs(fl(x, fmt) - x) < u * abs(x), (t, x)
        for t in (3, 4):
            fmt = FpFormat(2, t, -6, 6)
            for _ in range(10**3):
                x = random_in_range(rng, fmt)
                assert fl(x, fmt) == nearest_by_enumeration(x, fmt), (t, x)


def test_2_product_lemma():
    # integer arithmetic: delta = a / 2**56 with |a| < 2**40, so |delta| < u = 2**-16
    rng = np.random.default_rng(1002)
    scale = gmpy2.mpz(2) ** 56
    with criterion(2, "product lemma |theta_n| <= gamma_n, 1e5 products", 10):
        for i in range(10**5):
            n = int(rng.integers(1, 101))
            if i % 10 == 0:
                # near-extreme deltas, all pushing the same way
                a = np.full(n, (2**40 - 1) * (1 if rng.integers(2) else -1), dtype=np.int64)
            else:
                a = rng.integers(-(2**40) + 1, 2**40, size=n)
            sides = rng.integers(0, 2, size=n)
            num = den = gmpy2.mpz(1)
            for ai, up in zip(a.tolist(), sides.tolist()):
                # (1 + delta)**(+-1) as an integer ratio over the common scale
                if up:
                    num, den = num * (scale + ai), den * scale
                else:
                    num, den = num * scale, den * (scale + ai)
            # |num/den - 1| <= n u / (1 - n u)  with u = 2**-16
            assert abs(num - den) * (2**16 - n) <= n * den


def test_3_condition_bracket_exactness():
    rng = np.random.default_rng(1003)
    tol = Fraction(1, 2**20)
    with criterion(3, "rho bracket of x - c contains closed form", 60):
        for _ in range(50):
            x = Fraction(int(rng.integers(-1000, 1001)), int(rng.integers(1, 64)))
            c = Fraction(int(rng.integers(-1000, 1001)), int(rng.integers(1, 64)))
            circ = comparison_circuit(c)
            br = rho_eval_bracket(circ, [x], tol)
            rho = Fraction(0) if x == c else min(Fraction(1), abs(x - c) / (abs(x) + abs(c)))
            assert br.rho_lo <= rho <= br.rho_hi, (x, c)
            assert br.width <= Fraction(1, 2**18)
            if br.witness is not None:
                assert replay_flips(circ, [x], br)
        br = mu_eval(comparison_circuit(1), [2], tol)
        assert br.mu_lo <= 3 <= br.mu_hi
        assert br.mu_hi - br.mu_lo <= Fraction(1, 10**4)


def test_4_interval_soundness_fuzz():
    rng = np.random.default_rng(1004)
    eps_choices = [Fraction(1, 2**j) for j in (2, 4, 8, 16, 30)]
    checked = 0
    with criterion(4, "interval enclosure contains sampled evaluations, 1e4 triples", 120):
        while checked < 10**4:
            c = random_circuit(rng, 2, int(rng.integers(4, 31)), max_degree=5)
            x = [Fraction(int(rng.integers(-40, 41)), int(rng.integers(1, 9))) for _ in range(2)]
            eps = eps_choices[int(rng.integers(len(eps_choices)))]
            try:
                eval_exact(c, x)
            except DomainError:
                continue
            box = eval_interval(c, x, eps)
            if rng.integers(4) == 0:
                mode = Corner(eps, tuple(int(v) for v in rng.choice([-1, 1], size=len(c.sites))))
            else:
                mode = RandomRelative(eps, int(rng.integers(2**31)))
            try:
                sample = eval_rounded(c, x, mode).value
            except DomainError:
                # only possible when the enclosure of some denominator holds zero
                assert box.value is None
                checked += 1
                continue
            if box.value is not None:
                assert sample in box.value
            checked += 1


def test_5_grid_decoder():
    rng = np.random.default_rng(1005)
    with criterion(5, "grid decoder set equality and rounded error bound", 30):
        for k in (1, 2, 3):
            decoded = {decode_grid_point(cc, k) for cc in coordinate_codes(k)}
            assert decoded == set(fk_format(k).elements()) | {Fraction(0)}
        for k in (5, 6, 7):
            u = Fraction(1, 2 ** (2 * k))
            fmt = binary_format(2 * k)
            assert fmt.unit_roundoff == u
            bound = gamma_bound(2 ** (k + 2), u)
            codes = [cc for cc in coordinate_codes(k) if cc.exact_value(k) != 0]
            for i in rng.integers(0, len(codes), size=10**3):
                cc = codes[int(i)]
                exact = cc.exact_value(k)
                assert abs(decode_grid_point(cc, k, fmt) / exact - 1) <= bound
                approx = decode_grid_point(cc, k, arith=RandomArith(u, int(i)))
                assert abs(approx / exact - 1) <= bound


def test_6_grid_decider_vs_oracle():
    corpus = _corpus()
    with criterion(6, f"exact decider equals brute-force oracle on {len(corpus)} circuits", 60):
        assert len(corpus) >= 20
        for c in corpus:
            for k in ((1, 2) if c.n_inputs == 2 else (1, 2, 3)):
                rec = decide_feasible_grid(c, 2 * k, "exact")
                assert (rec.verdict is Decision.YES) == grid_oracle(c, k), (c.name, k)


def test_7_precision_rule():
    with criterion(7, "decide at k_mach = ceil(log2(16 mu^2)), 100 seeds each", 60):
        sub1 = comparison_circuit(1)
        est = feasibility_condition_estimate(sub1, 3, bounded=True)
        assert abs(float(est.value) - 2.8) < 1e-4
        cases = [(sub1, est.value, Decision.YES), (neg_one_minus_square(), Fraction(1), Decision.NO)]
        for c, mu, want in cases:
            km = ceil_log2(16 * mu * mu)
            assert km == (7 if want is Decision.YES else 4)
            for seed in range(100):
                for mode in ("round", "random"):
                    assert decide_feasible_grid(c, km, mode, seed=seed).verdict is want, (c.name, mode, seed)


def test_8_hero_schedule():
    rng = np.random.default_rng(1008)
    with criterion(8, "Hero square root within epsilon, 100 inputs per epsilon", 30):
        for eps in (Fraction(1, 100), Fraction(1, 10**4)):
            fmt = hero_format(eps)
            assert hero_iterations(eps) == math.ceil(abs(math.log2(eps))) + 2
            assert eps / 32 < fmt.unit_roundoff <= eps / 16
            for _ in range(100):
                a = Fraction(int(rng.integers(2**20, 2**21)), 2**20) * Fraction(2) ** int(rng.integers(-8, 8))
                run = hero_sqrt(a, eps, fmt)
                with mpmath.workdps(64):
                    ref = mpmath.sqrt(mpmath.mpf(a.numerator) / a.denominator)
                    got = mpmath.mpf(run.result.numerator) / run.result.denominator
                    assert abs(got - ref) / ref < mpmath.mpf(eps.numerator) / eps.denominator, a


def test_9_hierarchy():
    rng = np.random.default_rng(1009)
    witnesses = 0
    with criterion(9, "hierarchy decide, witness replay and no-witness search", 60):
        for _ in range(10**3):
            T = ("linear", "quadratic")[int(rng.integers(2))]
            inst = HierarchyInstance(int(rng.integers(0, 48)), Fraction(int(rng.integers(1, 2**24)), 2**24), T)
            t = inst.squarings
            inside = in_hierarchy_set(t, inst.x)
            assert hierarchy_decide(inst, hierarchy_k_mach(inst)).accept == inside
            xi = hierarchy_condition(inst).xi
            if xi < 1:
                u = min(xi * Fraction(int(rng.integers(1025, 4097)), 1024), 1 - Fraction(1, 2**20))
                d = hierarchy_witness(inst, u)
                assert d is not None and abs(d) < u
                assert in_hierarchy_set(t, inst.x * (1 + d)) != inside
                witnesses += 1
            # search for a flip inside |delta| < xi / 2: both extremes, then random draws
            half = xi / 2
            edge = half * (1 - Fraction(1, 2**30))
            trials = [edge, -edge] + [half * Fraction(int(v), 2**30) for v in rng.integers(-(2**30) + 1, 2**30, size=998)]
            assert hierarchy_witness(inst, half) is None
            for d in trials:
                assert in_hierarchy_set(t, inst.x * (1 + d)) == inside, (inst, d)
        assert witnesses > 0


def test_10_sweep_reproducibility(tmp_path):
    circuits = __import__("pathlib").Path(__file__).resolve().parent.parent / "demos" / "circuits"
    sweeps = [
        ["sweep", "--command", "decide", "--circuit", str(circuits / "sub1.circ"), "--kmach", "4..9", "--seeds", "4"],
        ["sweep", "--command", "decide", "--circuit", str(circuits / "disc.circ"), "--kmach", "2..5",
         "--seeds", "2", "--mode", "interval"],
        ["sweep", "--command", "sqrt", "--samples", "20", "--seed", "5"],
        ["sweep", "--command", "hierarchy", "--samples", "20", "--seed", "6"],
    ]
    with criterion(10, "sweeps byte-identical at workers 1 and 4", None):
        for i, base in enumerate(sweeps):
            outs = []
            for w in (1, 4):
                p = tmp_path / f"s{i}_w{w}.csv"
                assert main(base + ["--out", str(p), "--workers", str(w)]) == 0
                outs.append(p.read_bytes())
            assert outs[0] == outs[1] and outs[0].count(b"\n") > 1
