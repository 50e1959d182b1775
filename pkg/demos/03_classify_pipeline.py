"""
From a raw system to a classification report
============================================

A raw system ``y'' + P y' + Q y = f`` is reduced to canonical form
``y'' = C(x) y`` before the determining equations are solved.
"""

import numpy as np

from lieclass import Polynomial, RawSystem, classify_system, remove_first_derivative, remove_inhomogeneity
from lieclass.construct import CaseSpec, build_system

# Constant P and Q with a polynomial forcing term.
P = Polynomial([np.array([[0.0, 2.0], [0.0, 0.0]])])
Q = Polynomial([np.array([[1.0, 0.0], [0.5, -1.0]]), np.array([[0.0, 1.0], [0.0, 0.0]])])
f = Polynomial([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
raw = RawSystem(2, P, Q, f, (-1.0, 1.0))

# Subtract a particular solution, then remove the first-derivative term.
canon = remove_first_derivative(remove_inhomogeneity(raw))
report = classify_system(canon)
print(report.to_text())

# A case-a system built from exact matrices classifies back to its own case.
spec = CaseSpec.from_json({"case": "a", "m": 2,
                           "matrices": {"A3": [["0", "1"], ["0", "0"]], "C0": [["1", "0"], ["1", "-1"]]}})
built = build_system(spec)
print("\nbuilt case a ->", built.report.theorem_case, "with", built.report.algebra.dim, "generator(s)")
