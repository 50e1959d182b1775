"""
A four-equation system with a two-dimensional symmetry algebra
==============================================================

Build ``C(x) = e^{x A3} C0 e^{-x A3}`` from a nilpotent ``A3`` with
``A3^2 = 0``, expand it exactly, and classify it.
"""

from lieclass import ConjugatedExponential, CanonicalSystem, classify_system
from lieclass.construct import example_n2_matrices, reproduce_example_n2

# Since A3 squares to zero, the conjugated exponential is a quadratic in x.
rep = reproduce_example_n2()
print("degree in x:", rep["degree"])
print("x^2 coefficient matches the closed form K:", rep["x2_matches_printed"])

# Under C' = A3 C - C A3 the x coefficient is A3 C0 - C0 A3.  The closed-form
# table C0 A3 - A3 C0 has the opposite sign.
print("x coefficient equals -(C0 A3 - A3 C0):", rep["x_matches_negated_printed"])
for row in rep["x_table"][:4]:
    print("  ", row)

# Classification needs a trace-free C0, so shift c33 to -c11.
A3, C0 = example_n2_matrices(trace_free=True)
report = classify_system(CanonicalSystem(4, ConjugatedExponential(A3, C0)))
print()
print(report.to_text())
