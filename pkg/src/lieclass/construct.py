"""Representative systems for each classification case.

:func:`build_system` turns condition-satisfying matrices into
``C(x) = e^{x A3} C0 e^{-x A3}`` together with the generators the system is
expected to admit, and checks the round trip through
:func:`lieclass.classify.classify_system`.  The remaining functions rebuild
the worked examples (n = 2 block system, m = 3 and m = 4 nonexistence) and
write fixture corpora.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import _linalg as la
from ._linalg import exact, is_exact
from .classify import (CheckResult, Condition, _bd1_multiple, _collect, _nonzero_condition, _scalar_condition,
                       _zero_condition, check_case_b, check_case_c, classify_system, irreducibility_test, is_invariant)
from .detsolve import Generator, LieAlgebra, algebra_from_generators
from .io import SCHEMA, SchemaError, dumps, matrix_from_json, matrix_to_json
from .matcore import DEFAULT_TOL, Tolerance, build_bd1, commutator, eigenvalue_chain, solve_sylvester, spectrum
from .mfun import ConjugatedExponential
from .transform import CanonicalSystem, system_to_json

CASES = ("a", "b", "c", "xa2", "xa3", "xa4")
REQUIRED = {
    "a": ("A3", "C0"),
    "b": ("A2", "A3", "C0"),
    "c": ("A1", "A2", "A3", "C0"),
    "xa2": ("A3", "C0"),
    "xa3": ("A2", "A3", "C0"),
    "xa4": ("A1", "A2", "A3", "C0"),
}
CORPUS_ENV = "LIECLASS_CORPUS"
FIXTURE_VALUES = (1, 2, 3, 5, 7, 11, 13, 17)


class SpecRejected(ValueError):
    """A case specification violates one of its conditions."""

    def __init__(self, condition: str, detail: str = ""):
        super().__init__(f"rejected: {condition}" + (f" ({detail})" if detail else ""))
        self.condition = condition


class RoundTripError(RuntimeError):
    pass


@dataclass
class CaseSpec:
    """Case tag, dimension and the matrices named as in the case conditions.

    ``A`` (the pure ``X_A`` matrix of the xa cases) defaults to ``B_d1``.
    """

    case: str
    m: int
    matrices: dict

    def __post_init__(self):
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}; expected one of {CASES}")
        self.matrices = {k: np.asarray(v) for k, v in self.matrices.items()}
        if "A" in self.matrices and "A3" not in self.matrices and self.case == "a":
            self.matrices["A3"] = self.matrices.pop("A")
        for name in REQUIRED[self.case]:
            if name not in self.matrices:
                raise ValueError(f"case {self.case} needs matrix {name}")
        for name, M in self.matrices.items():
            if M.shape != (self.m, self.m):
                raise ValueError(f"{name} must be {self.m}x{self.m}, got {M.shape}")

    @classmethod
    def from_json(cls, data, mode: str = "auto") -> "CaseSpec":
        if not isinstance(data, dict):
            raise SchemaError("$", "expected an object")
        for key in ("case", "m", "matrices"):
            if key not in data:
                raise SchemaError(f"$.{key}", "missing field")
        if not isinstance(data["matrices"], dict):
            raise SchemaError("$.matrices", "expected an object of named matrices")
        mats = {k: matrix_from_json(v, mode, f"$.matrices.{k}") for k, v in data["matrices"].items()}
        if len({is_exact(M) for M in mats.values()}) > 1:
            mats = {k: la.as_float(v) for k, v in mats.items()}
        try:
            return cls(str(data["case"]), int(data["m"]), mats)
        except ValueError as exc:
            raise SchemaError("$", str(exc)) from None

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "case": self.case, "m": self.m,
                "matrices": {k: matrix_to_json(v) for k, v in sorted(self.matrices.items())}}


@dataclass
class BuiltSystem:
    system: CanonicalSystem
    expected: LieAlgebra
    spec: CaseSpec
    checks: CheckResult
    report: object | None = None


def _bd1_for(spec: CaseSpec):
    B = spec.matrices.get("A")
    if B is None:
        B = build_bd1(spec.m // 2)
        if not is_exact(spec.matrices["C0"]):
            B = la.as_float(B)
    return B


def check_spec(spec: CaseSpec, tol: Tolerance = DEFAULT_TOL) -> CheckResult:
    """Evaluate the condition set of ``spec.case``."""
    M = spec.matrices
    if spec.case == "a":
        A3, C0 = la.unify(M["A3"], M["C0"])
        s = max(la.max_abs(A3), la.max_abs(C0), 1.0) ** 2
        return _collect([_scalar_condition("tr(C0)=0", la.trace(C0), tol, s),
                         _nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s)])
    if spec.case == "b":
        return check_case_b(M["A2"], M["A3"], M["C0"], tol)
    if spec.case == "c":
        return check_case_c(M["A1"], M["A2"], M["A3"], M["C0"], tol)
    if spec.m % 2:
        return _collect([Condition("m even", False, float(spec.m),
                                   "pure X_A generators require an even number of equations")])
    B = _bd1_for(spec)
    mats = la.unify(*(M[k] for k in REQUIRED[spec.case]), B)
    named = dict(zip(REQUIRED[spec.case] + ("B",), mats))
    A3, C0, B = named["A3"], named["C0"], named["B"]
    E = la.eye(spec.m, is_exact(A3))
    s = max(la.max_abs(X) for X in mats) ** 2 + 1.0
    conds = [_zero_condition("A3B-BA3=0", A3 @ B - B @ A3, tol, s),
             _zero_condition("C0B-BC0=0", C0 @ B - B @ C0, tol, s)]
    if spec.case in ("xa3", "xa4"):
        A2 = named["A2"]
        conds.append(_zero_condition("A2B-BA2=0", A2 @ B - B @ A2, tol, s))
        conds.append(_zero_condition("A2C0-C0(A2+4E)=0", A2 @ C0 - C0 @ (A2 + 4 * E), tol, s))
        conds.append(_multiple_condition("A3(A2+2E)-A2A3=alpha1*B", A3 @ (A2 + 2 * E) - A2 @ A3, B, tol))
    if spec.case == "xa4":
        A1, A2 = named["A1"], named["A2"]
        conds.append(_zero_condition("BA1-A1B=0", B @ A1 - A1 @ B, tol, s))
        conds.append(_zero_condition("C0A1-A1C0=0", C0 @ A1 - A1 @ C0, tol, s))
        conds.append(_multiple_condition("A1A2-(A2+2E)A1=beta1*B", A1 @ A2 - (A2 + 2 * E) @ A1, B, tol))
        conds.append(_multiple_condition("A1A3-A3A1-A2=beta2*B", A1 @ A3 - A3 @ A1 - A2, B, tol))
    conds.append(_scalar_condition("tr(C0)=0", la.trace(C0), tol, s))
    conds.append(_nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s))
    return _collect(conds)


def _multiple_condition(name, R, B, tol) -> Condition:
    c = _bd1_multiple(R, B, tol)
    return Condition(name, c is not None, 0.0 if c is not None else la.max_abs(R))


def expected_generators(spec: CaseSpec) -> list[Generator]:
    M = spec.matrices
    one, zero = (Fraction(1), Fraction(0)) if is_exact(M["C0"]) else (1.0, 0.0)
    gens = []
    if "A1" in REQUIRED[spec.case]:
        gens.append(Generator((one, zero, zero), M["A1"]))
    if "A2" in REQUIRED[spec.case]:
        gens.append(Generator((zero, one, zero), M["A2"]))
    gens.append(Generator((zero, zero, one), M["A3"]))
    if spec.case.startswith("xa"):
        gens.append(Generator((zero, zero, zero), _bd1_for(spec)))
    return gens


def build_system(spec: CaseSpec, tol: Tolerance = DEFAULT_TOL, round_trip: bool = True,
                 interval=(-1.0, 1.0)) -> BuiltSystem:
    """Build ``C(x) = e^{x A3} C0 e^{-x A3}`` for a condition-satisfying spec.

    Raises
    ------
    SpecRejected
        Naming the first violated condition.
    RoundTripError
        If classifying the built system does not give back the case and
        an algebra containing the expected generators.
    """
    checks = check_spec(spec, tol)
    if not checks:
        cond = next(c for c in checks.conditions if not c.passed)
        raise SpecRejected(checks.failed, cond.detail)
    A3, C0 = la.unify(spec.matrices["A3"], spec.matrices["C0"])
    sys = CanonicalSystem(spec.m, ConjugatedExponential(A3, C0), True, tuple(interval))
    expected = algebra_from_generators(expected_generators(spec))
    built = BuiltSystem(sys, expected, spec, checks)
    if round_trip:
        report = classify_system(sys, tol)
        built.report = report
        alg = report.algebra
        if alg is None:
            raise RoundTripError(f"classification failed: {report.errors}")
        missing = [g for g in expected.basis if not alg.contains(g)]
        if missing:
            raise RoundTripError(f"expected generators not admitted: {missing}")
        if report.theorem_case != spec.case:
            raise RoundTripError(f"classified as {report.theorem_case!r} (algebra dim {alg.dim}), "
                                 f"expected {spec.case!r}")
    return built


# ---------------------------------------------------------------------------
# worked examples


def example_n2_matrices(values=FIXTURE_VALUES, trace_free: bool = False):
    """``A3`` and ``C0`` of the n = 2 block example.

    ``values`` instantiates ``(c11, c12, c13, c14, c31, c32, c33, c34)``;
    ``trace_free`` replaces ``c33`` by ``-c11`` so that ``tr C0 = 0``.
    """
    c11, c12, c13, c14, c31, c32, c33, c34 = (Fraction(v) for v in values)
    if trace_free:
        c33 = -c11
    A3 = exact([[0, 0, 0, 1], [0, 0, -1, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    C0 = exact([[c11, c12, c13, c14],
                [-c12, c11, -c14, c13],
                [c31, c32, c33, c34],
                [-c32, c31, -c34, c33]])
    return A3, C0


def printed_n2_coefficients(values=FIXTURE_VALUES):
    """The x and x^2 coefficient matrices as displayed for the n = 2 example."""
    c11, c12, c13, c14, c31, c32, c33, c34 = (Fraction(v) for v in values)
    C1 = exact([[c32, -c31, c34 - c12, c11 - c33],
                [c31, c32, c33 - c11, c34 - c12],
                [0, 0, -c32, c31],
                [0, 0, -c31, -c32]])
    K = exact([[0, 0, c31, c32],
               [0, 0, -c32, c31],
               [0, 0, 0, 0],
               [0, 0, 0, 0]])
    return C1, K


def _entry_table(got, want) -> list[dict]:
    rows = []
    for (i, j), g in np.ndenumerate(got):
        w = want[i, j]
        rows.append({"entry": [i + 1, j + 1], "computed": str(g), "printed": str(w), "match": g == w})
    return rows


def reproduce_example_n2(values=FIXTURE_VALUES) -> dict:
    """Expand ``e^{x A3} C0 e^{-x A3}`` exactly and compare with the printed coefficients.

    Reports per-entry tables for the x and x^2 coefficients, whether the x
    coefficient equals the printed ``C1`` or its negative, and whether the
    printed ``C1`` equals ``C0 A3 - A3 C0``.
    """
    A3, C0 = example_n2_matrices(values)
    P = ConjugatedExponential(A3, C0).as_polynomial()
    coeffs = list(P.coeffs) + [la.zeros((4, 4))] * (3 - len(P.coeffs))
    C1p, Kp = printed_n2_coefficients(values)
    x1, x2 = coeffs[1], coeffs[2]
    return {
        "A3_squared_zero": la.is_zero(A3 @ A3),
        "degree": P.degree,
        "constant_matches_C0": la.is_zero(coeffs[0] - C0),
        "x_coefficient": x1,
        "x2_coefficient": x2,
        "printed_C1": C1p,
        "printed_K": Kp,
        "x_table": _entry_table(x1, C1p),
        "x2_table": _entry_table(x2, Kp),
        "x_matches_printed": la.is_zero(x1 - C1p),
        "x_matches_negated_printed": la.is_zero(x1 + C1p),
        "x2_matches_printed": la.is_zero(x2 - Kp),
        "printed_C1_is_C0A3_minus_A3C0": la.is_zero(C1p - (C0 @ A3 - A3 @ C0)),
        "commutator_nonzero": not la.is_zero(commutator(C0, A3)),
    }


def case_b_spaces(A2):
    """Solution spaces of ``A2 C0 = C0 (A2 + 4E)`` and ``A2 A3 = A3 (A2 + 2E)``."""
    A2 = np.asarray(A2)
    m = A2.shape[0]
    E = la.eye(m, is_exact(A2))
    Z = la.zeros((m, m), is_exact(A2))
    c0 = solve_sylvester(A2, A2 + 4 * E, Z).homogeneous
    a3 = solve_sylvester(A2, A2 + 2 * E, Z).homogeneous
    return c0, a3


def commutator_map_rank(a3_basis, c0_basis) -> int:
    """Rank of ``(a, c) -> [sum a_i A3_i, sum c_j C0_j]`` as a bilinear map.

    The commutator of two parameterized families vanishes identically iff
    every pairwise commutator of basis elements vanishes, i.e. the rank of
    the matrix whose columns are ``vec([A3_i, C0_j])`` is zero.
    """
    if not a3_basis or not c0_basis:
        return 0
    cols = [commutator(A, C).reshape(-1) for A in a3_basis for C in c0_basis]
    return la.rank(np.stack(cols, axis=1))


def reproduce_example_m3() -> dict:
    """``A2 = diag(0, 2, 4)``: solution spaces and the failing condition."""
    A2 = exact(np.diag([0, 2, 4]))
    c0, a3 = case_b_spaces(A2)
    r = commutator_map_rank(a3, c0)
    return {
        "A2": A2,
        "C0_basis": c0,
        "A3_basis": a3,
        "commutator_rank": r,
        "failed_condition": "A3C0-C0A3!=0" if r == 0 else None,
        "verdict": "nonexistence" if r == 0 else "inconclusive",
    }


@dataclass
class CaseBSearch:
    m: int
    A2: np.ndarray
    families: list = field(default_factory=list)
    log: list = field(default_factory=list)
    c0_basis: list = field(default_factory=list)
    a3_basis: list = field(default_factory=list)
    witness: list | None = None

    def __bool__(self) -> bool:
        return bool(self.families)

    def __len__(self) -> int:
        return len(self.families)


def _high_eigenspace(A2, mats) -> list | None:
    """Sum of generalized eigenspaces of A2 with eigenvalue above ``max - 4``.

    Returned only when every eigenvalue is rational and the subspace is a
    proper invariant subspace of ``mats``.
    """
    spec = spectrum(A2)
    vals = spec.values()
    if not spec.exact or not all(isinstance(v, Fraction) for v in vals):
        return None
    m = A2.shape[0]
    top = max(vals)
    W = []
    for v in vals:
        if v > top - 4:
            N = A2 - v * la.eye(m)
            P = la.eye(m)
            for _ in range(m):
                P = P @ N
            W += la.nullspace(P)
    if not 0 < len(W) < m or not is_invariant(W, mats):
        return None
    return W


def search_case_b(m: int, A2, prefilter: bool = True) -> CaseBSearch:
    """Search for admissible ``(A3, C0)`` families for a given ``A2``.

    Steps: eigenvalue-chain pre-filter (a shortcut, not a proof: the
    conditions alone do not force a chain), exact Sylvester solves for the two
    linear conditions, trace restriction, rank of the bilinear commutator
    map, and a reducibility test on the union of both bases (an invariant
    subspace of every basis matrix is invariant for every parameter value).
    Each elimination is recorded in ``log``.
    """
    A2 = np.asarray(A2)
    if m > 6:
        raise ValueError("search_case_b is limited to m <= 6")
    if A2.shape != (m, m):
        raise ValueError(f"A2 must be {m}x{m}")
    if not is_exact(A2):
        A2 = exact(A2)
    out = CaseBSearch(m, A2)
    if prefilter and eigenvalue_chain(A2, 2, 3) is None:
        out.log.append("no eigenvalue chain l, l+2, l+4 in A2: skipped by the pre-filter "
                       "(prefilter=False runs the full search)")
        return out
    c0, a3 = case_b_spaces(A2)
    out.log.append(f"A2C0-C0(A2+4E)=0: solution space of dimension {len(c0)}")
    out.log.append(f"A2A3-A3(A2+2E)=0: solution space of dimension {len(a3)}")
    # tr(C0) = 0 restriction
    if c0:
        tr = np.array([[la.trace(C) for C in c0]], dtype=object)
        coeffs = la.nullspace(tr)
        c0 = [sum((c * C for c, C in zip(v, c0)), start=la.zeros((m, m))) for v in coeffs]
        out.log.append(f"tr(C0)=0: dimension {len(c0)}")
    out.c0_basis, out.a3_basis = c0, a3
    if not c0:
        out.log.append("C0 = 0: C vanishes identically")
        return out
    if not a3:
        out.log.append("A3 = 0: C is constant")
        return out
    r = commutator_map_rank(a3, c0)
    out.log.append(f"A3C0-C0A3 bilinear map rank {r}")
    if r == 0:
        out.log.append("A3C0-C0A3!=0 fails for every parameter value: C is constant")
        return out
    mats = list(c0) + list(a3)
    W = _high_eigenspace(A2, mats)
    if W is not None:
        out.witness = W
        out.log.append(f"reducible: invariant subspace of dimension {len(W)} "
                       "(generalized eigenvectors of A2 above max-4)")
        return out
    verdict = irreducibility_test(mats)
    if verdict.status == "ReducibleSubspace":
        out.witness = verdict.witness
        out.log.append(f"reducible: invariant subspace of dimension {len(verdict.witness)}")
        return out
    out.families.append({"C0_basis": c0, "A3_basis": a3, "irreducibility": verdict.status})
    out.log.append(f"family survives (irreducibility {verdict.status})")
    return out


def m4_candidates(a=Fraction(1, 3)) -> list[np.ndarray]:
    """The four A2 candidates for m = 4 (the first depends on a parameter ``a``)."""
    a = la.to_fraction(a)
    return [
        exact([[a, 0, 0, 0], [0, 0, 0, 0], [0, 0, 2, 0], [0, 0, 0, 4]]),
        exact([[0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 2, 0], [0, 0, 0, 4]]),
        exact([[0, 0, 0, 0], [0, 2, 1, 0], [0, 0, 2, 0], [0, 0, 0, 4]]),
        exact([[0, 0, 0, 0], [0, 2, 0, 0], [0, 0, 4, 1], [0, 0, 0, 4]]),
    ]


# the first candidate's diagonal entry changes the solution spaces only at these values
M4_CRITICAL_A = tuple(range(-6, 11, 2))


# ---------------------------------------------------------------------------
# corpus


def corpus_dir(path=None) -> Path:
    return Path(path or os.environ.get(CORPUS_ENV) or "corpus")


def default_specs() -> list[tuple[str, CaseSpec]]:
    """Named fixture specs covering the constructible cases."""
    A3, C0 = example_n2_matrices(trace_free=True)
    specs = [("xa2_block_n2", CaseSpec("xa2", 4, {"A3": A3, "C0": C0}))]
    specs.append(("a_m2_jordan", CaseSpec("a", 2, {"A3": exact([[0, 1], [0, 0]]), "C0": exact([[1, 0], [1, -1]])})))
    specs.append(("a_m3_jordan", CaseSpec("a", 3, {
        "A3": exact([[0, 1, 0], [0, 0, 1], [0, 0, 0]]),
        "C0": exact([[1, 0, 0], [0, 0, 0], [2, 0, -1]])})))
    return specs


def fixture_document(name: str, built: BuiltSystem) -> dict:
    rep = built.report
    return {
        "schema": SCHEMA,
        "name": name,
        "spec": built.spec.to_json(),
        "system": system_to_json(built.system),
        "expected": {
            "theorem_case": built.spec.case,
            "optimal_case": rep.optimal_case if rep is not None else None,
            "algebra": built.expected.to_json(),
        },
    }


def write_corpus(directory=None, specs=None, tol: Tolerance = DEFAULT_TOL) -> list[Path]:
    """Build, round-trip and write one JSON fixture per spec."""
    out_dir = corpus_dir(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, spec in specs or default_specs():
        built = build_system(spec, tol)
        p = out_dir / f"{name}.json"
        p.write_text(dumps(fixture_document(name, built)))
        paths.append(p)
    return paths
