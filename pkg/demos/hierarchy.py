"""Repeated squaring: deciding x**(2**t) >= 1/2 needs precision growing with t."""
from fractions import Fraction

from fplab.showcase import (
    HierarchyInstance,
    hierarchy_condition,
    hierarchy_decide,
    hierarchy_k_mach,
    hierarchy_witness,
    in_hierarchy_set,
)

for T in ("linear", "quadratic"):
    for n in (1, 4, 8):
        inst = HierarchyInstance(n, Fraction(999, 1000), T)
        cond = hierarchy_condition(inst)
        km = hierarchy_k_mach(inst)
        truth = in_hierarchy_set(inst.squarings, inst.x)
        got = hierarchy_decide(inst, km).accept
        low = [k for k in range(1, km) if hierarchy_decide(inst, k).accept != truth]
        print(f"T={T:9s} n={n}: t={inst.squarings:3d}, xi={float(cond.xi):.3e}, k_mach={km}, "
              f"correct={got == truth}, wrong at {len(low)} lower precisions")

inst = HierarchyInstance(1, Fraction(9, 10))
xi = hierarchy_condition(inst).xi
d = hierarchy_witness(inst, 2 * xi)
print(f"x=9/10, xi={float(xi):.4f}: witness delta {float(d):+.4f} at u = 2 xi; "
      f"at u = xi/2 the search returns {hierarchy_witness(inst, xi / 2)}")
