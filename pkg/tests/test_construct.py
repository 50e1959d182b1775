import json
from fractions import Fraction

import pytest

from conftest import Q, unit
from lieclass import _linalg as la
from lieclass.classify import classify_system
from lieclass.construct import (CaseSpec, RoundTripError, SpecRejected, build_system, case_b_spaces,
                                commutator_map_rank, default_specs, example_n2_matrices, m4_candidates,
                                printed_n2_coefficients, reproduce_example_m3, reproduce_example_n2,
                                search_case_b, write_corpus)
from lieclass.detsolve import max_residual
from lieclass.matcore import conj_exp


def test_case_a_round_trip():
    spec = CaseSpec("a", 2, {"A3": Q([[0, 1], [0, 0]]), "C0": Q([[1, 0], [1, -1]])})
    built = build_system(spec)
    assert built.report.theorem_case == "a"
    assert built.report.algebra.dim == 1
    assert built.report.algebra.contains(built.expected.basis[0])


def test_commuting_spec_is_rejected():
    spec = CaseSpec("a", 2, {"A3": Q([[0, 1], [0, 0]]), "C0": Q([[0, 1], [0, 0]])})
    with pytest.raises(SpecRejected) as err:
        build_system(spec)
    assert err.value.condition == "A3C0-C0A3!=0"


def test_xa2_odd_dimension_is_rejected():
    spec = CaseSpec("xa2", 3, {"A3": unit(3, 1, 0), "C0": unit(3, 2, 0)})
    with pytest.raises(SpecRejected) as err:
        build_system(spec)
    assert err.value.condition == "m even"


def test_m3_case_b_spec_is_rejected():
    spec = CaseSpec("b", 3, {"A2": Q([[0, 0, 0], [0, 2, 0], [0, 0, 4]]),
                             "A3": unit(3, 1, 0) + unit(3, 2, 1), "C0": unit(3, 2, 0)})
    with pytest.raises(SpecRejected) as err:
        build_system(spec)
    assert err.value.condition == "A3C0-C0A3!=0"


def test_reducible_case_b_triple_fails_the_round_trip():
    spec = CaseSpec("b", 3, {"A2": Q([[0, 0, 0], [0, 4, 0], [0, 0, 6]]), "A3": unit(3, 2, 1), "C0": unit(3, 1, 0)})
    with pytest.raises(RoundTripError):
        build_system(spec)


def test_xa2_n2_fixture_is_quadratic():
    name, spec = default_specs()[0]
    built = build_system(spec)
    P = built.system.C.as_polynomial()
    assert name == "xa2_block_n2" and P.degree == 2
    assert built.report.theorem_case == "xa2"


@pytest.mark.parametrize("name, spec", default_specs())
def test_default_specs_round_trip_and_residuals(name, spec):
    built = build_system(spec)
    assert built.report.theorem_case == spec.case
    xs = [Fraction(j, 7) - 3 for j in range(50)]
    for g in built.expected.basis:
        assert max_residual(built.system.C, g, xs) == 0


# -- worked examples -------------------------------------------------------

def test_n2_table_structure():
    rep = reproduce_example_n2()
    assert rep["A3_squared_zero"] and rep["degree"] == 2 and rep["constant_matches_C0"]
    assert rep["x2_matches_printed"]
    # the printed C1 is C0 A3 - A3 C0, the negative of the x coefficient under C' = A3 C - C A3
    assert rep["printed_C1_is_C0A3_minus_A3C0"]
    assert rep["x_matches_negated_printed"] and not rep["x_matches_printed"]


def test_n2_degenerate_instance_loses_x2_term():
    vals = (1, 2, 3, 5, 0, 0, 13, 17)
    A3, C0 = example_n2_matrices(vals)
    C1, K = printed_n2_coefficients(vals)
    assert la.is_zero(K)
    x = Fraction(5, 3)
    assert la.is_zero(conj_exp(A3, C0, x) - C0 + x * C1)
    assert la.is_zero(C1[:2, :2])


def test_m3_reproduction():
    rep = reproduce_example_m3()
    assert la.same_span([b.reshape(-1) for b in rep["C0_basis"]], [unit(3, 2, 0).reshape(-1)])
    assert la.same_span([b.reshape(-1) for b in rep["A3_basis"]],
                        [unit(3, 1, 0).reshape(-1), unit(3, 2, 1).reshape(-1)])
    assert rep["commutator_rank"] == 0 and rep["verdict"] == "nonexistence"


def test_commutator_map_rank_detects_nonvanishing():
    assert commutator_map_rank([unit(3, 2, 1)], [unit(3, 1, 0)]) == 1
    assert commutator_map_rank([unit(3, 1, 0)], [unit(3, 2, 0)]) == 0


def test_search_m3():
    res = search_case_b(3, Q([[0, 0, 0], [0, 2, 0], [0, 0, 4]]))
    assert not res and res.log


@pytest.mark.parametrize("a", [Fraction(1, 3), Fraction(-5, 2), Fraction(17)] + [Fraction(v) for v in range(-6, 11, 2)])
def test_search_m4_candidates(a):
    for A2 in m4_candidates(a):
        res = search_case_b(4, A2)
        assert not res and res.log


def test_search_without_chain_stops_early():
    res = search_case_b(3, Q([[0, 0, 0], [0, 1, 0], [0, 0, 5]]))
    assert not res and len(res.log) == 1 and "chain" in res.log[0]


def test_search_is_conjugation_stable():
    A2 = Q([[0, 0, 0], [0, 4, 0], [0, 0, 6]])
    P = Q([[1, 1, 0], [0, 1, 2], [1, 0, 1]])
    Pi = la.inv(P)
    base = search_case_b(3, A2, prefilter=False)
    moved = search_case_b(3, P.dot(A2).dot(Pi), prefilter=False)
    assert len(base) == len(moved)
    for C0 in base.c0_basis:
        assert la.in_span([c.reshape(-1) for c in moved.c0_basis], P.dot(C0).dot(Pi).reshape(-1))
    for A3 in base.a3_basis:
        assert la.in_span([a.reshape(-1) for a in moved.a3_basis], P.dot(A3).dot(Pi).reshape(-1))


def test_search_caps_dimension():
    with pytest.raises(ValueError):
        search_case_b(7, la.zeros((7, 7), True))


def test_case_b_spaces_for_diag():
    c0, a3 = case_b_spaces(Q([[0, 0, 0], [0, 2, 0], [0, 0, 4]]))
    assert len(c0) == 1 and len(a3) == 2


# -- corpus ----------------------------------------------------------------

def test_corpus_written_to_env_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("LIECLASS_CORPUS", str(tmp_path / "fixtures"))
    paths = write_corpus()
    assert {p.name for p in paths} == {f"{n}.json" for n, _ in default_specs()}
    doc = json.loads(paths[0].read_text())
    assert doc["schema"] == "lieclass-v1" and {"system", "expected", "spec"} <= set(doc)


def test_corpus_replays_through_classify(tmp_path):
    from lieclass.transform import system_from_json
    for p in write_corpus(tmp_path):
        doc = json.loads(p.read_text())
        rep = classify_system(system_from_json(doc["system"]))
        assert rep.theorem_case == doc["expected"]["theorem_case"]
        assert rep.optimal_case == doc["expected"]["optimal_case"]
