from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import Q, exact_matrices, random_rational, small_fraction, unit
from lieclass import _linalg as la
from lieclass.classify import (OddDimensionError, _apply_steps, check_case_b, check_case_c, check_xa_cases, classify_system,
                               generated_algebra, irreducibility_test, is_invariant, match_optimal_case,
                               normalize_one)
from lieclass.construct import example_n2_matrices
from lieclass.detsolve import Generator, LieAlgebra, algebra_from_generators, solve_determining
from lieclass.io import dumps
from lieclass.matcore import block_form, build_bd1, commutator, eigenvalue_chain
from lieclass.mfun import ConjugatedExponential, Polynomial
from lieclass.transform import CanonicalSystem, transform_generator_coords

E3 = la.eye(3, True)


def gen(k, A):
    return Generator(tuple(Fraction(v) for v in k), A)


def single(k, m=2):
    return algebra_from_generators([gen(k, Q([[0, 1], [0, 0]]) if m == 2 else unit(m, 0, 1))])


# -- case (b) --------------------------------------------------------------

def test_case_b_fails_at_m3_on_the_inequality():
    A2 = Q([[0, 0, 0], [0, 2, 0], [0, 0, 4]])
    C0 = 5 * unit(3, 2, 0)
    A3 = 2 * unit(3, 1, 0) + 3 * unit(3, 2, 1)
    res = check_case_b(A2, A3, C0)
    assert not res and res.failed == "A3C0-C0A3!=0"
    assert all(c.passed for c in res.conditions if c.name != res.failed)


def test_case_b_zero_a3_fails_inequality():
    A2 = Q([[0, 0, 0], [0, 2, 0], [0, 0, 4]])
    res = check_case_b(A2, la.zeros((3, 3), True), unit(3, 2, 0))
    assert res.failed == "A3C0-C0A3!=0"


def test_case_b_without_chain_can_pass():
    # eigenvalues 0, 4, 6: C0 links 0 -> 4 and A3 links 4 -> 6, no 2-step chain of length 3
    A2 = Q([[0, 0, 0], [0, 4, 0], [0, 0, 6]])
    C0, A3 = unit(3, 1, 0), unit(3, 2, 1)
    assert check_case_b(A2, A3, C0)
    assert eigenvalue_chain(A2, 2, 3) is None
    # such triples are reducible: e3 spans a common invariant line
    assert irreducibility_test([C0, A3]).status == "ReducibleSubspace"


@given(exact_matrices(3), exact_matrices(3), exact_matrices(3), st.integers(0, 2**31))
@settings(max_examples=25)
def test_case_b_conjugation_invariant(A2, A3, C0, seed):
    rng = np.random.default_rng(seed)
    P = random_rational(rng, 3) + 5 * E3
    assume(la.rank(P) == 3)
    Pi = la.inv(P)
    conj = lambda M: P.dot(M).dot(Pi)
    a, b = check_case_b(A2, A3, C0), check_case_b(conj(A2), conj(A3), conj(C0))
    assert (a.passed, a.failed) == (b.passed, b.failed)


def test_case_b_conjugation_invariant_on_passing_instance():
    A2 = Q([[0, 0, 0], [0, 4, 0], [0, 0, 6]])
    P = Q([[1, 2, 0], [0, 1, 3], [1, 0, 1]])
    Pi = la.inv(P)
    conj = lambda M: P.dot(M).dot(Pi)
    assert check_case_b(conj(A2), conj(unit(3, 2, 1)), conj(unit(3, 1, 0)))


# -- case (c) --------------------------------------------------------------

SL2 = (Q([[0, 1], [0, 0]]), Q([[-1, 0], [0, 1]]), Q([[0, 0], [-1, 0]]))


def test_case_c_all_zero_fails():
    Z = la.zeros((2, 2), True)
    res = check_case_c(Z, Z, Z, Z)
    assert not res and "A3C0-C0A3!=0" in [c.name for c in res.conditions if not c.passed]


def test_case_c_sl2_triple_brackets_hold():
    A1, A2, A3 = SL2
    assert la.is_zero(commutator(A1, A2) - 2 * A1)
    assert la.is_zero(commutator(A1, A3) - A2)
    assert la.is_zero(commutator(A2, A3) - 2 * A3)


@given(small_fraction, small_fraction, small_fraction, small_fraction)
def test_case_c_sl2_has_no_admissible_c0(a, b, c, d):
    A1, A2, A3 = SL2
    res = check_case_c(A1, A2, A3, Q([[a, b], [c, d]]))
    assert not res
    assert res.extras["elimination_consistent"]


def test_case_c_sl2_linear_conditions_force_zero():
    # exhaustive solve of C0 A1 = A1 C0 and A2 C0 = C0 (A2 + 4E) over 2x2 matrices
    A1, A2, _ = SL2
    E = la.eye(2, True)
    rows = []
    for i in range(2):
        for j in range(2):
            U = unit(2, i, j)
            rows.append(np.concatenate([(U.dot(A1) - A1.dot(U)).reshape(-1),
                                        (A2.dot(U) - U.dot(A2 + 4 * E)).reshape(-1)]))
    assert la.rank(np.array(rows, dtype=object)) == 4


@given(exact_matrices(2), exact_matrices(2), exact_matrices(2), exact_matrices(2))
@settings(max_examples=25)
def test_case_c_implies_case_b(A1, A2, A3, C0):
    if check_case_c(A1, A2, A3, C0):
        assert check_case_b(A2, A3, C0)


# -- normalization ---------------------------------------------------------

@pytest.mark.parametrize("k, tag", [
    ((0, 0, 1), "Case2_X3"),
    ((1, 0, 1), "Case3_X1plusX3"),
    ((1, 0, 0), "Case2_X3"),
    ((0, 1, 0), "Case1_X2"),
    ((2, 3, 1), "Case1_X2"),
    ((1, 2, 4), "Case2_X3"),
    ((1, 1, 5), "Case3_X1plusX3"),
])
def test_single_element_tags(k, tag):
    assert match_optimal_case(single(k)).tag == tag


coords = st.tuples(small_fraction, small_fraction, small_fraction).filter(lambda c: any(c))


@given(coords)
def test_normalize_one_reaches_representative(c):
    case, lam, steps = normalize_one(c)
    rep = {1: (0, 1, 0), 2: (0, 0, 1), 3: (1, 0, 1)}[case]
    got = _apply_steps(steps, c)
    assert all(abs(float(g) - float(lam) * r) < 1e-9 for g, r in zip(got, rep))


@given(coords, small_fraction, st.sampled_from(["mobius", "shift", "involution"]))
def test_tag_invariant_under_automorphisms(c, a, kind):
    moved = transform_generator_coords(kind, a, c)
    A = Q([[0, 1], [0, 0]])
    t1 = match_optimal_case(algebra_from_generators([gen(c, A)])).tag
    t2 = match_optimal_case(algebra_from_generators([gen(moved, A)])).tag
    assert t1 == t2


def test_two_and_three_dimensional_projections():
    Z = la.zeros((2, 2), True)
    assert match_optimal_case(algebra_from_generators([gen((0, 1, 0), Z), gen((0, 0, 1), Z)])).tag == "Case4_X2X3"
    full = algebra_from_generators([gen(k, Z) for k in ((1, 0, 0), (0, 1, 0), (0, 0, 1))])
    assert match_optimal_case(full).tag == "Case5_X1X2X3"


def test_pure_and_empty_algebras():
    pure = algebra_from_generators([gen((0, 0, 0), build_bd1(1))])
    m = match_optimal_case(pure)
    assert m.tag == "PureXA" and m.theorem_case == "xa1"
    assert match_optimal_case(LieAlgebra([], 2)).theorem_case == "none"


# -- X_A cases -------------------------------------------------------------

def n2_parts():
    A3, C0 = example_n2_matrices(trace_free=True)
    F = ConjugatedExponential(A3, C0)
    alg = solve_determining(F)
    return F, alg


def test_n2_example_passes_two_dimensional_conditions():
    F, alg = n2_parts()
    match = match_optimal_case(alg)
    res = check_xa_cases(alg, F, match)
    assert match.tag == "XA_plus_case2" and res
    assert res.extras["c"] == 0
    names = {c.name for c in res.conditions}
    assert {"c=0", "C blocks [[a,b],[-b,a]]", "splitting forces k1=k2=k3=0"} <= names


def test_block_shape_survives_at_samples():
    F, _ = n2_parts()
    for x in (Fraction(-2), Fraction(1, 3), Fraction(5)):
        assert block_form(F(x)) is not None


def test_odd_dimension_with_pure_generator_is_a_contradiction():
    alg = algebra_from_generators([gen((0, 0, 0), Q([[1, 0, 0], [0, -1, 0], [0, 0, 0]]))])
    with pytest.raises(OddDimensionError):
        check_xa_cases(alg, Polynomial([la.zeros((3, 3), True)]))


# -- irreducibility --------------------------------------------------------

def test_identity_alone_is_reducible():
    v = irreducibility_test([la.eye(2, True)])
    assert v.status == "ReducibleSubspace" and is_invariant(v.witness, [la.eye(2, True)])


def test_m3_pair_is_reducible():
    C0 = 3 * unit(3, 2, 0)
    A3 = 2 * unit(3, 1, 0) + 5 * unit(3, 2, 1)
    v = irreducibility_test([C0, A3])
    assert v.status == "ReducibleSubspace"
    assert is_invariant(v.witness, [C0, A3])
    e3 = [np.array([Fraction(0), Fraction(0), Fraction(1)], dtype=object)]
    assert is_invariant(e3, [C0, A3])


def test_b1_and_diagonal_generate_everything():
    v = irreducibility_test([build_bd1(1), Q([[1, 0], [0, -1]])])
    assert v.status == "Irreducible" and v.algebra_dim == 4
    assert len(generated_algebra([build_bd1(1), Q([[1, 0], [0, -1]])])) == 4


@given(st.integers(0, 2**31), st.sampled_from([3, 4]))
@settings(max_examples=25)
def test_witness_is_invariant(seed, m):
    rng = np.random.default_rng(seed)
    # block upper-triangular matrices hidden by a change of basis
    k = int(rng.integers(1, m))
    mats = []
    for _ in range(2):
        M = random_rational(rng, m)
        M[k:, :k] = Fraction(0)
        mats.append(M)
    P = random_rational(rng, m) + 5 * la.eye(m, True)
    assume(la.rank(P) == m)
    Pi = la.inv(P)
    mats = [P.dot(M).dot(Pi) for M in mats]
    v = irreducibility_test(mats)
    assert v.status in ("ReducibleSubspace", "Undetermined")
    if v.status == "ReducibleSubspace":
        assert 0 < len(v.witness) < m and is_invariant(v.witness, mats)


# -- full pipeline ---------------------------------------------------------

def test_case_a_report():
    A, C0 = Q([[0, 1], [0, 0]]), Q([[1, 0], [1, -1]])
    rep = classify_system(CanonicalSystem(2, ConjugatedExponential(A, C0)))
    assert rep.theorem_case == "a" and rep.optimal_case == "Case2_X3"
    assert rep.irreducibility.status == "Irreducible"


def test_constant_c_report():
    rep = classify_system(CanonicalSystem(2, Polynomial([Q([[1, 2], [3, -1]])])))
    assert rep.irreducibility.status == "ConstantEquivalent"
    assert all(g.k in ((0, 0, 0), (0, 0, 1)) for g in rep.algebra.basis)
    assert any("constant" in n for n in rep.notes)


def test_n2_report_is_xa2():
    A3, C0 = example_n2_matrices(trace_free=True)
    rep = classify_system(CanonicalSystem(4, ConjugatedExponential(A3, C0)))
    assert rep.theorem_case == "xa2" and rep.optimal_case == "XA_plus_case2"
    assert all(c.passed for c in rep.conditions)
    assert "[ok]" in rep.to_text()


def test_report_is_deterministic():
    A3, C0 = example_n2_matrices(trace_free=True)
    sys = CanonicalSystem(4, ConjugatedExponential(A3, C0))
    assert dumps(classify_system(sys).to_json()) == dumps(classify_system(sys).to_json())


def test_nonzero_trace_is_normalized_first():
    rep = classify_system(CanonicalSystem(2, Polynomial([Q([[1, 2], [3, 4]])])))
    assert any("trace" in n for n in rep.notes)
    assert not rep.errors


def test_large_matrices_are_summarized_in_text():
    m = 8
    A = la.zeros((m, m), True)
    for i in range(m - 1):
        A[i + 1, i] = Fraction(1)
    C0 = la.zeros((m, m), True)
    C0[0, m - 1] = Fraction(1)
    text = classify_system(CanonicalSystem(m, ConjugatedExponential(A, C0))).to_text()
    assert "8x8 matrix, max|entry| = 1" in text
