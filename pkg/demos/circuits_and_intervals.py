"""Parse a circuit, run it exactly, under perturbation, and with interval enclosures."""
from fractions import Fraction
from pathlib import Path

from fplab.circuit import Corner, RandomRelative, eval_exact, eval_interval, eval_rounded, parse_circuit

here = Path(__file__).parent / "circuits"
disc = parse_circuit((here / "disc.circ").read_text())
x = [Fraction(1, 3), Fraction(1, 5)]

print("exact:", eval_exact(disc, x).value)
for eps in (Fraction(1, 100), Fraction(1, 10), Fraction(1, 2)):
    box = eval_interval(disc, x, eps)
    samples = [eval_rounded(disc, x, RandomRelative(eps, s)).value for s in range(50)]
    inside = all(v in box.value for v in samples)
    print(f"eps={eps}: enclosure [{float(box.value.lo):.4f}, {float(box.value.hi):.4f}] "
          f"verdict {box.verdict.name}, 50 random runs inside: {inside}")

# a single worst-case corner can already flip the sign of y - 1 at y = 2
sub1 = parse_circuit((here / "sub1.circ").read_text())
for eps in (Fraction(1, 4), Fraction(2, 5)):
    out = eval_rounded(sub1, [2], Corner(eps, (-1, 1, 1)))
    print(f"y - 1 at y = 2, corner eps={eps}: value {float(out.value):+.4f} ({out.verdict.name})")
