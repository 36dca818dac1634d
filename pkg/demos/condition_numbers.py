"""Certified brackets on the evaluation condition number, and a grid estimate of feasibility condition."""
from fractions import Fraction
from pathlib import Path

from fplab.circuit import parse_circuit
from fplab.condition import feasibility_condition_estimate, mu_eval, replay_flips, rho_eval_bracket

here = Path(__file__).parent / "circuits"
sub1 = parse_circuit((here / "sub1.circ").read_text())

for y in (Fraction(2), Fraction(11, 10), Fraction(1)):
    br = rho_eval_bracket(sub1, [y])
    note = "ill-posed" if br.ill_posed else f"closed form {float(min(1, abs(y - 1) / (y + 1))):.6f}"
    print(f"y={y}: rho in [{float(br.rho_lo):.6f}, {float(br.rho_hi):.6f}]  ({note})")
    if br.witness is not None:
        print(f"   flip witness replays: {replay_flips(sub1, [y], br)}")

br = mu_eval(sub1, [2])
print(f"mu_eval at y=2 in [{float(br.mu_lo):.5f}, {float(br.mu_hi):.5f}]")

for name in ("sub1", "negsq"):
    c = parse_circuit((here / f"{name}.circ").read_text())
    est = feasibility_condition_estimate(c, 3, bounded=True)
    print(f"{name}: {est.direction} = {float(est.value):.4f} from {est.samples_used} grid points")
