"""Hero's square root with argument reduction and a precision chosen from the target error."""
from fractions import Fraction

from fplab.showcase import hero_format, hero_iterations, hero_sqrt

for eps in (Fraction(1, 100), Fraction(1, 10**4), Fraction(1, 10**8)):
    fmt = hero_format(eps)
    print(f"eps={eps}: {hero_iterations(eps)} iterations, t={fmt.precision} (u={fmt.unit_roundoff})")
    for a in (Fraction(2), Fraction(1, 7), Fraction(12345, 4)):
        run = hero_sqrt(a, eps, fmt)
        print(f"   sqrt({a}) ~ {float(run.result):.10f}  rel. error {float(run.relative_error()):.2e}")
