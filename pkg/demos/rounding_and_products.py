"""Rounding into small binary formats and how relative errors pile up in a product."""
from fractions import Fraction

import numpy as np

from fplab.fp_system import FpFormat, fk_format, fl, gamma_bound

fmt = FpFormat(2, 4, -6, 6)
print(f"format {fmt}: u = {fmt.unit_roundoff}, {fmt.cardinality()} numbers")
for x in (Fraction(1, 3), Fraction(10), Fraction(-7, 5), Fraction(17, 16)):
    y = fl(x, fmt)
    print(f"  fl({x}) = {y}   relative error {float(abs(y - x) / abs(x)):.4f}")

# 17/16 is a tie between 1 and 9/8; ties go to the even mantissa
k = 3
print(f"F_{k} has {len(list(fk_format(k).elements()))} elements including zero")

rng = np.random.default_rng(0)
u = Fraction(1, 2**8)
for n in (1, 10, 50):
    worst = Fraction(0)
    for _ in range(200):
        prod = Fraction(1)
        for d in rng.uniform(-1, 1, size=n):
            prod *= 1 + u * Fraction(d)
        worst = max(worst, abs(prod - 1))
    print(f"n={n:3d}: worst |theta| {float(worst):.3e} <= gamma_n {float(gamma_bound(n, u)):.3e}")
