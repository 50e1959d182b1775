"""Lie point-symmetry classification of linear second-order ODE systems ``y'' = C(x) y``."""

from .classify import (ClassificationReport, IrreducibilityVerdict, OptimalCase, check_case_b, check_case_c,
                       check_xa_cases, classify_system, irreducibility_test, match_optimal_case)
from .construct import (CaseSpec, build_system, m4_candidates, reproduce_example_m3, reproduce_example_n2,
                        search_case_b)
from .detsolve import Generator, LieAlgebra, residual, solve_determining, verify_closure
from .matcore import (BlockForm, Spectrum, Tolerance, build_bd1, commutant_basis, commutator, conj_exp,
                      eigenvalue_chain, mat_exp, solve_matrix_ode, solve_sylvester, spectrum)
from .mfun import ConjugatedExponential, Polynomial, Sampled
from .transform import (CanonicalSystem, PointChange, RawSystem, apply_point_change, remove_first_derivative,
                        remove_inhomogeneity, trace_normalize, transform_generator_coords)

__version__ = "0.1.0"

__all__ = [
    "BlockForm", "CanonicalSystem", "CaseSpec", "ClassificationReport", "ConjugatedExponential", "Generator",
    "IrreducibilityVerdict", "LieAlgebra", "OptimalCase", "PointChange", "Polynomial", "RawSystem", "Sampled",
    "Spectrum", "Tolerance", "apply_point_change", "build_bd1", "build_system", "check_case_b", "check_case_c",
    "check_xa_cases", "classify_system", "commutant_basis", "commutator", "conj_exp", "eigenvalue_chain",
    "irreducibility_test", "m4_candidates", "mat_exp", "match_optimal_case", "remove_first_derivative",
    "remove_inhomogeneity", "reproduce_example_m3", "reproduce_example_n2", "residual", "search_case_b",
    "solve_determining", "solve_matrix_ode", "solve_sylvester", "spectrum", "trace_normalize",
    "transform_generator_coords", "verify_closure",
]
