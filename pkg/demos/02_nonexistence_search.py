"""
Searching for systems with a two-dimensional projection
=======================================================

For a fixed ``A2`` the linear conditions on ``(A3, C0)`` are Sylvester
equations.  Their solution spaces, the trace condition and the commutator
condition decide whether any admissible family exists.
"""

from fractions import Fraction

from lieclass.construct import m4_candidates, reproduce_example_m3, search_case_b

# m = 3 with A2 = diag(0, 2, 4): the spaces are tiny and every commutator vanishes.
rep = reproduce_example_m3()
print("C0 basis:", [b.tolist() for b in rep["C0_basis"]])
print("A3 basis:", [b.tolist() for b in rep["A3_basis"]])
print("commutator map rank:", rep["commutator_rank"], "->", rep["verdict"])

# m = 4: each candidate A2 is eliminated; the log records every step.
for a in (Fraction(1, 3), Fraction(2)):
    for i, A2 in enumerate(m4_candidates(a), 1):
        res = search_case_b(4, A2)
        print(f"\na = {a}, candidate {i}: {'found' if res else 'empty'}")
        for line in res.log:
            print("   ", line)
