"""
Changes of variables and the trace of C
=======================================

Point changes ``x~ = phi(x)``, ``y~ = psi(x) y`` keep the canonical form
when ``phi''/phi' = 2 psi'/psi``.  A suitable change removes a constant
trace, and the same family acts on symmetry generators by automorphisms.
"""

import numpy as np

from lieclass import CanonicalSystem, ConjugatedExponential, PointChange, apply_point_change, trace_normalize
from lieclass.mfun import chebyshev_grid
from lieclass.transform import transform_generator_coords

rng = np.random.default_rng(0)
A = 0.5 * rng.normal(size=(3, 3))
C0 = rng.normal(size=(3, 3))
C0 += (1.5 - np.trace(C0)) / 3 * np.eye(3)  # trace 1.5 for every x
sys = CanonicalSystem(3, ConjugatedExponential(A, C0), interval=(-0.5, 0.5))

out, chg = trace_normalize(sys)
xs = chebyshev_grid(out.interval, 9)
print("change used:", chg.name, chg.params)
print("max |tr C~| on the grid:", max(abs(np.trace(out.C(x))) for x in xs))

# The involution phi = psi = 1/x is its own inverse.
once = apply_point_change(sys.C, PointChange.involution(), (0.5, 2.0))
twice = apply_point_change(once, PointChange.involution(), once.interval)
print("involution twice, max deviation:",
      max(np.abs(twice(x) - sys.C(x)).max() for x in chebyshev_grid((0.5, 2.0), 20)))

# The Moebius change x/(1 - a x) moves generator coordinates (k1, k2, k3).
for k in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
    print(k, "->", transform_generator_coords("mobius", 0.5, k))
