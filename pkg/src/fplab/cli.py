"""Command-line experiment runner writing header-stable CSV.

Exit status: 0 success, 1 an ``--expect`` assertion failed, 2 usage error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .circuit import (
    Circuit,
    Corner,
    Exact,
    IntervalRelative,
    RandomRelative,
    RoundNearest,
    evaluate,
    parse_circuit,
)
from .condition import ESTIMATE_CSV_HEADER, bracket_csv_row, rho_eval_bracket
from .errors import FplabError
from .feasibility import (
    DECIDE_CSV_HEADER,
    decide_feasible_grid,
    decide_sign_change_1d,
    decision_csv_row,
)
from .fp_system import INF, as_rational, binary_format, format_rational
from .showcase import (
    C_DEFAULT,
    HERO_CSV_HEADER,
    HIERARCHY_CSV_HEADER,
    HierarchyInstance,
    hero_format,
    hero_sqrt,
    hierarchy_condition,
    hierarchy_decide,
    hierarchy_k_mach,
    in_hierarchy_set,
)

EXIT_OK, EXIT_EXPECT, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

EVAL_CSV_HEADER = ("circuit", "point", "mode", "epsilon", "k_mach", "value", "verdict", "ops", "flags")
SIGN1D_CSV_HEADER = ("circuit", "a", "b", "points", "mode", "epsilon", "verdict")
SWEEP_DECIDE_HEADER = DECIDE_CSV_HEADER + ("seed",)


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    if v == INF:
        return "inf"
    if isinstance(v, Fraction):
        return format_rational(v)
    return str(v)


def _rat(s: str) -> Fraction:
    try:
        return as_rational(s)
    except FplabError as exc:
        raise UsageError(str(exc)) from None


def _point(s: str) -> list[Fraction]:
    return [_rat(p) for p in s.split(",") if p.strip()]


def parse_range(spec: str) -> list[int]:
    """'4..12' -> [4, ..., 12]; '4,6,8' -> [4, 6, 8]."""
    out: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty range {spec!r}")
    return out


def load_circuit(path: str) -> Circuit:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{path}: no such file")
    try:
        return parse_circuit(p.read_text(encoding="utf-8"))
    except FplabError as exc:
        raise FplabError(f"{path}: {exc}") from exc


def _mode(args, k_mach: Optional[int] = None):
    name = args.mode
    eps = _rat(args.eps) if getattr(args, "eps", None) else None
    if name == "exact":
        return Exact(), None
    km = k_mach if k_mach is not None else getattr(args, "kmach", None)
    km = None if km is None else int(km)
    if name == "round":
        if km is None:
            raise UsageError("--mode round needs --kmach")
        return RoundNearest(binary_format(km)), Fraction(1, 2**km)
    if eps is None:
        if km is None:
            raise UsageError(f"--mode {name} needs --eps or --kmach")
        eps = Fraction(1, 2**km)
    if name == "random":
        return RandomRelative(eps, args.seed), eps
    if name == "interval":
        return IntervalRelative(eps), eps
    if name == "corner":
        if not args.directions:
            raise UsageError("--mode corner needs --directions, e.g. -,+,+")
        signs = tuple(-1 if d.strip() == "-" else 1 for d in args.directions.split(","))
        return Corner(eps, signs), eps
    raise UsageError(f"unknown mode {name!r}")


def _write(rows: Iterable[Sequence[str]], header: Sequence[str], out: Optional[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    text = buf.getvalue()
    if out and out != "-":
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _check_expect(args, got: str) -> int:
    want = getattr(args, "expect", None)
    if want is None:
        return EXIT_OK
    return EXIT_OK if got.lower() == want.lower() else EXIT_EXPECT


# -- commands -------------------------------------------------------------------------

def cmd_eval(args) -> int:
    c = load_circuit(args.circuit)
    x = _point(args.at)
    mode, eps = _mode(args)
    out = evaluate(c, x, mode, (args.seed,))
    km = args.kmach if args.mode == "round" else None
    value = out.value
    if value is not None and not isinstance(value, Fraction):
        value = f"[{format_rational(value.lo)};{format_rational(value.hi)}]"
    row = [c.name, ";".join(map(format_rational, x)), args.mode, _fmt(eps), _fmt(km), _fmt(value),
           str(out.verdict), str(out.ops_performed), "|".join(sorted(out.flags))]
    _write([row], EVAL_CSV_HEADER, args.out)
    verdict = {"In": "yes", "Out": "no"}.get(str(out.verdict), "unsure")
    return _check_expect(args, verdict)


def cmd_condition(args) -> int:
    c = load_circuit(args.circuit)
    x = _point(args.at)
    br = rho_eval_bracket(c, x, _rat(args.tol), args.budget)
    _write([bracket_csv_row(c.name, x, br)], ESTIMATE_CSV_HEADER, args.out)
    return EXIT_OK


def _decide_row(job):
    c, k_mach, mode, seed, workers, timing = job
    rec = decide_feasible_grid(c, k_mach, mode, seed=seed, workers=workers)
    return decision_csv_row(c.name, rec, timing), rec.verdict


def cmd_decide(args) -> int:
    c = load_circuit(args.circuit)
    rows, status = [], EXIT_OK
    for km in parse_range(args.kmach):
        row, verdict = _decide_row((c, km, args.mode, args.seed, args.workers, args.timing))
        rows.append(row)
        if _check_expect(args, str(verdict)) != EXIT_OK:
            status = EXIT_EXPECT
    _write(rows, DECIDE_CSV_HEADER, args.out)
    return status


def cmd_sign1d(args) -> int:
    c = load_circuit(args.circuit)
    mode, eps = _mode(args)
    verdict = decide_sign_change_1d(c, _rat(args.a), _rat(args.b), args.points, mode, (args.seed,))
    _write([[c.name, args.a, args.b, str(args.points), args.mode, _fmt(eps), str(verdict)]],
           SIGN1D_CSV_HEADER, args.out)
    return _check_expect(args, str(verdict))


def _hero_row(a: Fraction, eps: Fraction, C: int) -> list[str]:
    fmt = hero_format(eps, C)
    run = hero_sqrt(a, eps, fmt, C)
    err = run.relative_error()
    bound = Fraction(3, 2 ** (run.iterations + 1)) + C * fmt.unit_roundoff
    return [format_rational(a), format_rational(eps), format_rational(run.b), str(run.q),
            str(run.iterations), str(fmt.k_mach), format_rational(fmt.unit_roundoff),
            format_rational(run.result), f"{float(err):.6e}", f"{float(bound):.6e}"]


def cmd_sqrt(args) -> int:
    row = _hero_row(_rat(args.a), _rat(args.eps), args.C)
    _write([row], HERO_CSV_HEADER, args.out)
    ok = float(row[8]) < float(_rat(args.eps))
    return _check_expect(args, "yes" if ok else "no")


def _hierarchy_row(inst: HierarchyInstance, k_mach: Optional[int]) -> list[str]:
    cond = hierarchy_condition(inst)
    km = hierarchy_k_mach(inst) if k_mach is None else k_mach
    dec = hierarchy_decide(inst, km)
    expected = in_hierarchy_set(inst.squarings, inst.x)
    return [str(inst.n), format_rational(inst.x), inst.T, inst.P2, str(km),
            format_rational(Fraction(1, 2**km)), str(dec.cost), "yes" if dec.accept else "no",
            "yes" if expected else "no", f"{float(cond.xi):.12e}",
            "inf" if cond.mu == INF else f"{float(cond.mu):.12e}"]


def cmd_hierarchy(args) -> int:
    inst = HierarchyInstance(args.n, _rat(args.x), args.T, args.P2)
    km = int(args.kmach) if args.kmach else None
    row = _hierarchy_row(inst, km)
    _write([row], HIERARCHY_CSV_HEADER, args.out)
    return _check_expect(args, row[7])


def _sweep_job(job):
    kind = job[0]
    if kind == "decide":
        row, _ = _decide_row(job[1])
        return row + [str(job[1][3])]
    if kind == "sqrt":
        return _hero_row(*job[1])
    if kind == "hierarchy":
        return _hierarchy_row(*job[1])
    raise ValueError(kind)


def _random_rational(rng: np.random.Generator, lo: float, hi: float, bits: int = 24) -> Fraction:
    num = int(rng.integers(0, 2**bits))
    return Fraction(lo) + (Fraction(hi) - Fraction(lo)) * Fraction(num, 2**bits)


def sweep_jobs(args) -> tuple[list, tuple]:
    rng = np.random.default_rng(args.seed)
    if args.command == "decide":
        if not args.circuit:
            raise UsageError("sweep --command decide needs --circuit")
        c = load_circuit(args.circuit)
        jobs = [("decide", (c, km, args.mode, seed, 1, False))
                for km in parse_range(args.kmach) for seed in range(args.seeds)]
        return jobs, SWEEP_DECIDE_HEADER
    if args.command == "sqrt":
        eps_list = [_rat(e) for e in args.eps.split(",")] if args.eps else [Fraction(1, 100), Fraction(1, 10**4)]
        jobs = []
        for eps in eps_list:
            for _ in range(args.samples):
                a = Fraction(2) ** int(rng.integers(-8, 8)) * (1 + _random_rational(rng, 0, 1))
                jobs.append(("sqrt", (a, eps, args.C)))
        return jobs, HERO_CSV_HEADER
    if args.command == "hierarchy":
        families = ("linear", "quadratic", "exp")
        jobs = []
        for _ in range(args.samples):
            n = int(rng.integers(0, 16))
            x = _random_rational(rng, 0, 2)
            T = families[int(rng.integers(len(families)))]
            P2 = "identity" if rng.integers(2) == 0 else "linear:2"
            jobs.append(("hierarchy", (HierarchyInstance(n, x, T, P2), None)))
        return jobs, HIERARCHY_CSV_HEADER
    raise UsageError(f"sweep does not support --command {args.command}")


def run_sweep(args) -> list[list[str]]:
    jobs, _ = sweep_jobs(args)
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            return list(pool.map(_sweep_job, jobs, chunksize=4))
    return [_sweep_job(j) for j in jobs]


def cmd_sweep(args) -> int:
    _, header = sweep_jobs(args)
    rows = run_sweep(args)
    _write(rows, header, args.out)
    return EXIT_OK


# -- report -----------------------------------------------------------------------

def summarize(path: str) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{path}: no such file")
    table = list(csv.reader(io.StringIO(p.read_text(encoding="utf-8"))))
    if not table:
        raise FplabError(f"{path}: empty CSV")
    header = tuple(table[0])
    rows = [dict(zip(header, r)) for r in table[1:]]
    lines = [f"{path}: {len(rows)} rows"]
    if header[: len(DECIDE_CSV_HEADER)] == DECIDE_CSV_HEADER:
        groups: dict[tuple, dict[str, int]] = {}
        for r in rows:
            g = groups.setdefault((r["circuit"], r["mode"], int(r["k_mach"])), {})
            g[r["verdict"]] = g.get(r["verdict"], 0) + 1
        for (name, mode, km), counts in sorted(groups.items()):
            total = sum(counts.values())
            parts = ", ".join(f"{v}={counts.get(v, 0)}" for v in ("Yes", "No", "Unsure"))
            lines.append(f"  {name} mode={mode} k_mach={km} u_mach=2^-{km}: {parts} (n={total})")
    elif header == HERO_CSV_HEADER:
        buckets: dict[str, list[float]] = {}
        for r in rows:
            buckets.setdefault(r["epsilon"], []).append(float(r["rel_error"]))
        for eps, errs in sorted(buckets.items(), key=lambda kv: -float(as_rational(kv[0]))):
            ok = sum(e < float(as_rational(eps)) for e in errs)
            lines.append(f"  epsilon={eps}: max rel error {max(errs):.3e}, "
                         f"mean {sum(errs) / len(errs):.3e}, below epsilon {ok}/{len(errs)}")
    elif header == HIERARCHY_CSV_HEADER:
        by_T: dict[str, list[bool]] = {}
        for r in rows:
            by_T.setdefault(r["T"], []).append(r["verdict"] == r["expected"])
        for T, ok in sorted(by_T.items()):
            lines.append(f"  T={T}: correct {sum(ok)}/{len(ok)}")
        kms = sorted((float(r["xi"]), int(r["k_mach"])) for r in rows)
        if kms:
            lines.append(f"  k_mach range {min(k for _, k in kms)}..{max(k for _, k in kms)} "
                         f"for xi in [{kms[0][0]:.3e}, {kms[-1][0]:.3e}]")
    elif header == ESTIMATE_CSV_HEADER:
        for r in rows:
            lines.append(f"  {r['circuit']} at {r['point']}: rho in [{r['rho_lo']}, {r['rho_hi']}], "
                         f"mu in [{r['mu_lo']}, {r['mu_hi']}] {r['flags']}")
    elif header in (EVAL_CSV_HEADER, SIGN1D_CSV_HEADER):
        for r in rows:
            lines.append("  " + ", ".join(f"{k}={v}" for k, v in r.items()))
    else:
        raise FplabError(f"{path}: unrecognized CSV schema {header}")
    return lines


def cmd_report(args) -> int:
    if not args.csv:
        raise UsageError("report needs at least one CSV path")
    out = []
    for path in args.csv:
        out.extend(summarize(path))
    sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fplab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fplab {__version__}")
    p.add_argument("--config", help="JSON file whose keys mirror the command-line flags")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, circuit=True):
        if circuit:
            sp.add_argument("--circuit", required=False)
        sp.add_argument("--out", default="-", help="CSV path (default stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=1)
        return sp

    def modes(sp, default="exact"):
        sp.add_argument("--mode", default=default,
                        choices=["exact", "round", "random", "interval", "corner"])
        sp.add_argument("--eps")
        sp.add_argument("--kmach")
        sp.add_argument("--directions")

    sp = common(sub.add_parser("eval", help="evaluate a circuit at a point"))
    modes(sp)
    sp.add_argument("--at", required=True)
    sp.add_argument("--expect", choices=["yes", "no"])
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("condition", help="bracket rho_eval / mu_eval"))
    sp.add_argument("--at", required=True)
    sp.add_argument("--tol", default="1/1048576")
    sp.add_argument("--budget", type=int, default=64)
    sp.set_defaults(func=cmd_condition)

    sp = common(sub.add_parser("decide", help="grid-search feasibility decision"))
    sp.add_argument("--kmach", required=True, help="value or range, e.g. 7 or 4..12")
    sp.add_argument("--mode", default="round", choices=["exact", "round", "random", "interval"])
    sp.add_argument("--expect", choices=["yes", "no"])
    sp.add_argument("--timing", action="store_true", help="fill wall_time_ms (breaks byte-reproducibility)")
    sp.set_defaults(func=cmd_decide)

    sp = common(sub.add_parser("sign1d", help="sign-change zero detection on [a, b]"))
    modes(sp)
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--points", type=int, default=3)
    sp.add_argument("--expect", choices=["yes", "no"])
    sp.set_defaults(func=cmd_sign1d)

    sp = common(sub.add_parser("sqrt", help="Hero's square root with a precision schedule"), circuit=False)
    sp.add_argument("--a", required=True)
    sp.add_argument("--eps", required=True)
    sp.add_argument("--C", type=int, default=C_DEFAULT)
    sp.add_argument("--expect", choices=["yes", "no"])
    sp.set_defaults(func=cmd_sqrt)

    sp = common(sub.add_parser("hierarchy", help="repeated-squaring membership problem"), circuit=False)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--T", default="linear")
    sp.add_argument("--P2", default="identity")
    sp.add_argument("--kmach", help="default: P2(size) + 3")
    sp.add_argument("--expect", choices=["yes", "no"])
    sp.set_defaults(func=cmd_hierarchy)

    sp = common(sub.add_parser("sweep", help="seeded parameter sweep"))
    sp.add_argument("--command", required=True, choices=["decide", "sqrt", "hierarchy"])
    sp.add_argument("--kmach", default="4..12")
    sp.add_argument("--mode", default="random", choices=["exact", "round", "random", "interval"])
    sp.add_argument("--seeds", type=int, default=10)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--eps")
    sp.add_argument("--C", type=int, default=C_DEFAULT)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", help="summarize CSVs produced by the other commands")
    sp.add_argument("csv", nargs="*")
    sp.set_defaults(func=cmd_report)
    return p


def _apply_config(argv: list[str]) -> list[str]:
    """Replace ``--config file.json`` by the flags it mirrors.

    Config flags are inserted right after the subcommand, so explicit
    command-line flags still win.
    """
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[i + 1]
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: expected a JSON object")
    rest = argv[:i] + argv[i + 2:]
    extra: list[str] = []
    for key, val in cfg.items():
        flag = "--" + key
        if val is True:
            extra.append(flag)
        elif val is not False and val is not None:
            extra.extend([flag, str(val)])
    pos = next((j for j, tok in enumerate(rest) if not tok.startswith("-")), None)
    if pos is None:
        raise UsageError("--config needs a subcommand")
    return rest[: pos + 1] + extra + rest[pos + 1:]


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return EXIT_OK if exc.code == 0 else EXIT_USAGE
        if getattr(args, "circuit", None) is None and args.cmd in ("eval", "condition", "decide", "sign1d"):
            raise UsageError(f"{args.cmd} needs --circuit")
        return args.func(args)
    except UsageError as exc:
        print(f"fplab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FplabError, ArithmeticError, OSError) as exc:
        print(f"fplab: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
