"""Decide feasibility by scanning the testing grid at increasing machine precision."""
from pathlib import Path

from fplab.circuit import parse_circuit
from fplab.feasibility import decide_feasible_grid, decide_sign_change_1d

here = Path(__file__).parent / "circuits"
for name in ("sub1", "negsq", "quad", "disc"):
    c = parse_circuit((here / f"{name}.circ").read_text())
    for km in (2, 4, 7):
        rec = decide_feasible_grid(c, km, "interval")
        wit = "" if rec.witness_point is None else f" witness {[str(v) for v in rec.witness_point]}"
        print(f"{name:6s} k_mach={km}: {rec.verdict.name:6s} after {rec.points_scanned} points{wit}")

quad = parse_circuit((here / "quad.circ").read_text())
print("sign change of (x-1)(3-x) on [0, 4]:", decide_sign_change_1d(quad, 0, 4, 5).name)
