"""Matching admitted algebras to the optimal system and checking case conditions.

The L3 part ``x1 X1 + x2 X2 + x3 X3`` of an admitted algebra is brought to one
of the representatives

    X2;  X3;  X1 + X3;  {X2, X3};  {X1, X2, X3}

by the three automorphisms of L3 (all realized by point changes, see
:mod:`lieclass.transform`).  For a one-dimensional projection the orbit is
decided by the sign of the invariant ``k2^2 - k1 k3``.

The matrix conditions attached to each case are evaluated exactly when the
matrices are rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _linalg as la
from ._linalg import as_float, is_exact
from .detsolve import AmbiguousRankError, InsufficientSamplesError, LieAlgebra, solve_determining
from .io import SCHEMA, matrix_to_json, mfun_to_json, scalar_to_json
from .matcore import (DEFAULT_TOL, Tolerance, block_form, build_bd1, commutator, conj_exp, spectrum)
from .mfun import ConjugatedExponential, MatrixFunction, Polynomial, chebyshev_grid
from .transform import (CanonicalSystem, DomainError, IntegrationError, apply_point_change, point_change_for,
                        trace_is_zero, trace_normalize)

BASE_TAGS = {1: "Case1_X2", 2: "Case2_X3", 3: "Case3_X1plusX3", 4: "Case4_X2X3", 5: "Case5_X1X2X3"}
THEOREM_OF = {1: "a", 2: "a", 3: "a", 4: "b", 5: "c"}

REPRESENTATIVES = {
    1: [(0, 1, 0)],
    2: [(0, 0, 1)],
    3: [(1, 0, 1)],
    4: [(0, 1, 0), (0, 0, 1)],
    5: [(1, 0, 0), (0, 1, 0), (0, 0, 1)],
}
# names of the matrices attached to each representative generator
MATRIX_NAMES = {1: ["A2"], 2: ["A3"], 3: ["A1"], 4: ["A2", "A3"], 5: ["A1", "A2", "A3"]}


class OddDimensionError(ValueError):
    """A pure ``X_A`` generator was found for an odd number of equations."""


# ---------------------------------------------------------------------------
# condition bookkeeping


@dataclass
class Condition:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def to_json(self) -> dict:
        out = {"name": self.name, "passed": self.passed, "residual": self.residual}
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class CheckResult:
    """Outcome of a condition checker; truthy when every condition holds."""

    passed: bool
    failed: str | None
    conditions: list[Condition]
    extras: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed


def _zero_condition(name: str, R, tol: Tolerance, scale: float = 0.0) -> Condition:
    if is_exact(R):
        return Condition(name, la.is_zero(R), la.max_abs(R))
    return Condition(name, tol.small(R, scale), la.max_abs(R))


def _nonzero_condition(name: str, R, tol: Tolerance, scale: float = 0.0) -> Condition:
    if is_exact(R):
        return Condition(name, not la.is_zero(R), la.max_abs(R))
    return Condition(name, not tol.small(R, scale), la.max_abs(R))


def _scalar_condition(name: str, v, tol: Tolerance, scale: float = 0.0) -> Condition:
    if isinstance(v, Fraction):
        return Condition(name, v == 0, abs(float(v)))
    return Condition(name, abs(float(v)) <= tol.abs + tol.rel * scale, abs(float(v)))


def _collect(conds: list[Condition], **extras) -> CheckResult:
    failed = next((c.name for c in conds if not c.passed), None)
    return CheckResult(failed is None, failed, conds, extras)


def _scale(*mats) -> float:
    return max([la.max_abs(M) for M in mats] + [1.0])


def case_b_conditions(A2, A3, C0, tol: Tolerance = DEFAULT_TOL) -> list[Condition]:
    A2, A3, C0 = la.unify(*(np.asarray(M) for M in (A2, A3, C0)))
    E = la.eye(A2.shape[0], is_exact(A2))
    s = _scale(A2, A3, C0) ** 2
    return [
        _zero_condition("A2C0-C0(A2+4E)=0", A2 @ C0 - C0 @ (A2 + 4 * E), tol, s),
        _zero_condition("A2A3-A3(A2+2E)=0", A2 @ A3 - A3 @ (A2 + 2 * E), tol, s),
        _scalar_condition("tr(C0)=0", la.trace(C0), tol, s),
        _nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s),
    ]


def check_case_b(A2, A3, C0, tol: Tolerance = DEFAULT_TOL) -> CheckResult:
    """Conditions for the two-dimensional algebra ``{X2 + X_A2, X3 + X_A3}``.

    Evaluated in order; ``failed`` names the first violated condition.
    """
    return _collect(case_b_conditions(A2, A3, C0, tol))


def check_case_c(A1, A2, A3, C0, tol: Tolerance = DEFAULT_TOL) -> CheckResult:
    """Conditions for ``{X1 + X_A1, X2 + X_A2, X3 + X_A3}``.

    Besides the bracket relations and the conditions on ``C0``, the form
    obtained by eliminating ``A2 = A1 A3 - A3 A1`` is evaluated and its
    agreement with the direct form is reported in ``extras``.
    """
    A1, A2, A3, C0 = la.unify(*(np.asarray(M) for M in (A1, A2, A3, C0)))
    s = _scale(A1, A2, A3, C0) ** 3
    conds = [
        _zero_condition("A1A2-A2A1=2A1", commutator(A1, A2) - 2 * A1, tol, s),
        _zero_condition("A1A3-A3A1=A2", commutator(A1, A3) - A2, tol, s),
        _zero_condition("A2A3-A3A2=2A3", commutator(A2, A3) - 2 * A3, tol, s),
        _zero_condition("C0A1-A1C0=0", commutator(C0, A1), tol, s),
    ]
    b = case_b_conditions(A2, A3, C0, tol)
    conds += [b[0], b[2], b[3]]
    D = commutator(A1, A3)
    elim = [
        _zero_condition("A1^2A3-2A1A3A1+A3A1^2=2A1", A1 @ A1 @ A3 - 2 * A1 @ A3 @ A1 + A3 @ A1 @ A1 - 2 * A1, tol, s),
        _zero_condition("A1A3^2-2A3A1A3+A3^2A1=2A3", A1 @ A3 @ A3 - 2 * A3 @ A1 @ A3 + A3 @ A3 @ A1 - 2 * A3, tol, s),
        _zero_condition("(A1A3-A3A1)C0-C0(A1A3-A3A1)-4C0=0", D @ C0 - C0 @ D - 4 * C0, tol, s),
    ]
    direct = [conds[0].passed, conds[2].passed, b[0].passed]
    # the eliminated form is equivalent to the direct one whenever A2 = [A1, A3]
    consistent = (not conds[1].passed) or all(e.passed == d for e, d in zip(elim, direct))
    return _collect(conds, eliminated=elim, elimination_consistent=consistent)


# ---------------------------------------------------------------------------
# normalization of the L3 projection


def _sqrt(q):
    """Exact square root of a nonnegative Fraction when it is a perfect square."""
    if isinstance(q, Fraction):
        n, d = q.numerator, q.denominator
        rn, rd = math.isqrt(n), math.isqrt(d)
        if rn * rn == n and rd * rd == d:
            return Fraction(rn, rd)
    return math.sqrt(float(q))


def _act(kind: str, p, c):
    """Coordinate action of one automorphism step (scale uses the factor e^a)."""
    x1, x2, x3 = c
    if kind == "mobius":
        return (x1 + 2 * p * x2 + p * p * x3, x2 + p * x3, x3)
    if kind == "shift":
        return (x1, x2 + p * x1, x3 + 2 * p * x2 + p * p * x1)
    if kind == "scale":
        return (x1 * p, x2, x3 / p)
    raise ValueError(kind)


def _apply_steps(steps, c):
    for kind, p in steps:
        c = _act(kind, p, c)
    return c


def _is0(v, scale: float, tol: Tolerance) -> bool:
    if isinstance(v, Fraction):
        return v == 0
    return abs(float(v)) <= tol.abs + tol.rel * scale


def invariant(c):
    """``k2^2 - k1 k3``; its sign labels the orbit of a single L3 element."""
    x1, x2, x3 = c
    return x2 * x2 - x1 * x3


def normalize_one(c, tol: Tolerance = DEFAULT_TOL):
    """Bring one L3 element to ``lam * X2``, ``lam * X3`` or ``lam * (X1 + X3)``.

    Returns ``(case, lam, steps)`` with ``case`` in {1, 2, 3} and ``steps`` a
    list of ``(kind, parameter)`` automorphisms (``scale`` carries ``e^a``).
    """
    x1, x2, x3 = c
    sc = max(abs(float(v)) for v in c)
    if sc == 0:
        raise ValueError("zero element")
    steps = []
    if not _is0(x1, sc, tol):
        a = -x2 / x1
        steps.append(("shift", a))
        t = x3 - x2 * x2 / x1
        if _is0(t, sc, tol):
            steps += [("shift", 1), ("mobius", -1)]
            return 2, x1, steps
        if (x1 > 0) == (t > 0):
            s = _sqrt(t / x1)
            steps.append(("scale", s))
            return 3, x1 * s, steps
        b = _sqrt(-x1 / t)
        steps += [("mobius", b), ("shift", -1 / (2 * b))]
        return 1, b * t, steps
    if not _is0(x2, sc, tol):
        steps.append(("shift", -x3 / (2 * x2)))
        return 1, x2, steps
    return 2, x3, steps


def _coords_bracket(p, q):
    x1, x2, x3 = p
    z1, z2, z3 = q
    return (-2 * (x1 * z2 - x2 * z1), -(x1 * z3 - x3 * z1), -2 * (x2 * z3 - x3 * z2))


@dataclass
class OptimalCase:
    """Matched representative of the optimal system.

    ``tag`` is one of the five L3 representatives, ``PureXA``,
    ``XA_plus_caseN`` (N = 1..5), ``none`` (no nontrivial generator) or
    ``Undetermined``.
    """

    tag: str
    base: int | None
    matrices: dict
    pure: list
    l3_dim: int
    steps: list
    exact: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def theorem_case(self) -> str:
        if self.tag == "Undetermined":
            return "undetermined"
        p = len(self.pure)
        if p == 0:
            return THEOREM_OF[self.base] if self.base else "none"
        return f"xa{self.l3_dim + p}"

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "l3_dim": self.l3_dim,
            "pure_count": len(self.pure),
            "matrices": {k: matrix_to_json(v) for k, v in self.matrices.items()},
            "pure_matrices": [matrix_to_json(P) for P in self.pure],
            "automorphisms": [[k, scalar_to_json(p)] for k, p in self.steps],
        }


def _combination(coords: list, targets: list, exact_: bool):
    """Coefficients expressing each target as a combination of ``coords``."""
    M = np.array([list(c) for c in coords], dtype=object if exact_ else float).T
    out = []
    for t in targets:
        b = np.array(t, dtype=object if exact_ else float)
        if exact_:
            b = la.exact(b)
        sol = la.solve(M, b, None if exact_ else 1e-8)
        if sol is None:
            return None
        out.append(sol)
    return out


def match_optimal_case(alg: LieAlgebra, tol: Tolerance = DEFAULT_TOL) -> OptimalCase:
    """Normalize the L3 projection of ``alg`` to the optimal system.

    Pure ``X_A`` elements are counted separately.  The matrices of the
    normalized representatives are returned under the names ``A1``, ``A2``,
    ``A3`` (trace-free representatives).
    """
    gens = [g.trace_free() for g in alg.basis]
    pure = [g.A for g in gens if g.is_pure]
    mixed = [g for g in gens if not g.is_pure]
    d = len(mixed)
    exact_ = alg.exact
    if d == 0:
        tag = "PureXA" if pure else "none"
        return OptimalCase(tag, None, {}, pure, 0, [], exact_)
    coords = [g.k for g in mixed]
    diag: dict = {}
    try:
        if d == 1:
            base, lam, steps = normalize_one(coords[0], tol)
            new = [_apply_steps(steps, coords[0])]
        elif d == 2:
            der = _coords_bracket(coords[0], coords[1])
            if all(_is0(v, max(1.0, max(abs(float(u)) for u in der)), tol) for v in der):
                raise ValueError("abelian two-dimensional projection")
            kind, lam, steps = normalize_one(der, tol)
            if kind != 2:
                raise ValueError("derived element is not nilpotent")
            new = [_apply_steps(steps, c) for c in coords]
            base = 4
        elif d == 3:
            base, steps, new = 5, [], coords
        else:
            raise ValueError(f"projection of dimension {d}")
    except ValueError as exc:
        diag["error"] = str(exc)
        return OptimalCase("Undetermined", None, {}, pure, d, [], exact_, diag)
    steps_exact = exact_ and all(isinstance(p, (Fraction, int)) for _, p in steps)
    new_exact = steps_exact and all(isinstance(v, Fraction) for c in new for v in c)
    targets = REPRESENTATIVES[base]
    comb = _combination(new, targets, new_exact)
    if comb is None:
        diag["error"] = "projected subalgebra does not contain the representative"
        return OptimalCase("Undetermined", None, {}, pure, d, steps, exact_, diag)
    mats = {}
    for name, coef in zip(MATRIX_NAMES[base], comb):
        A = sum((c * (g.A if new_exact else as_float(g.A)) for c, g in zip(coef, mixed)),
                start=la.zeros((alg.m, alg.m), new_exact))
        mats[name] = A
    tag = BASE_TAGS[base] if not pure else f"XA_plus_case{base}"
    diag["normalized_coords"] = [[scalar_to_json(v) for v in c] for c in new]
    return OptimalCase(tag, base, mats, pure, d, steps, new_exact, diag)


# ---------------------------------------------------------------------------
# realizing the normalization on C


def realize_steps(Cfn: MatrixFunction, steps, interval, tol: Tolerance = DEFAULT_TOL) -> MatrixFunction:
    """Apply the point changes realizing ``steps`` to ``C``."""
    F = Cfn
    iv = interval
    for kind, p in steps:
        if kind == "scale":
            chg = point_change_for("scale", math.log(float(p)))
        else:
            chg = point_change_for(kind, float(p))
        F = apply_point_change(F, chg, iv, tol)
        iv = F.interval
    return F


def initial_matrix(Cfn: MatrixFunction, A3, interval=None):
    """``C0`` with ``C(x) = e^{x A3} C0 e^{-x A3}``, read off at an anchor point."""
    iv = interval or Cfn.interval
    x0 = 0 if iv is None or iv[0] <= 0 <= iv[1] else (iv[0] + iv[1]) / 2
    C = Cfn(x0)
    if x0 == 0:
        return C
    return conj_exp(as_float(A3), as_float(C), -float(x0))


# ---------------------------------------------------------------------------
# X_A cases


def bd1_conjugator(A, tol: Tolerance = DEFAULT_TOL):
    """Find ``(P, lam)`` with ``P^{-1} A P = lam B_d1``, or None.

    Such ``P`` exists exactly when ``A^2 = -lam^2 E`` with ``lam != 0``.
    """
    A = np.asarray(A)
    m = A.shape[0]
    if m % 2:
        return None
    sq = A @ A
    mu = -sq[0, 0]
    E = la.eye(m, is_exact(A))
    if is_exact(A):
        if mu <= 0 or not la.is_zero(sq + mu * E):
            return None
    elif float(mu) <= 0 or not tol.small(sq + mu * E, la.max_abs(sq)):
        return None
    lam = _sqrt(mu)
    exact_ = is_exact(A) and isinstance(lam, Fraction)
    A = A if exact_ else as_float(A)
    cols: list[np.ndarray] = []
    for j in range(m):
        if len(cols) == m:
            break
        e = la.zeros(m, exact_)
        e[j] = Fraction(1) if exact_ else 1.0
        trial = cols + [e, -(A @ e) / lam]
        if la.rank(np.stack(trial, axis=1)) == len(trial):
            cols = trial
    if len(cols) != m:
        return None
    P = np.stack(cols, axis=1)
    return P, lam


def _bd1_multiple(R, B, tol: Tolerance):
    """Return c with ``R = c B`` or None."""
    num = sum((R[i, j] * B[i, j] for i in range(B.shape[0]) for j in range(B.shape[1])), start=R[0, 0] * 0)
    den = sum((B[i, j] * B[i, j] for i in range(B.shape[0]) for j in range(B.shape[1])), start=B[0, 0] * 0)
    c = num / den
    res = R - c * B
    if is_exact(R):
        return c if la.is_zero(res) else None
    return c if tol.small(res, la.max_abs(R)) else None


def check_xa_cases(alg: LieAlgebra, Cfn: MatrixFunction, match: OptimalCase | None = None,
                   tol: Tolerance = DEFAULT_TOL, interval=None) -> CheckResult:
    """Conditions for algebras containing a pure ``X_A`` generator.

    The pure matrix is conjugated to ``B_d1`` when possible, the block shape
    of ``C`` is checked on samples, and the condition set matching the size
    of the L3 projection (or the two-``X_A`` set) is evaluated.

    Raises
    ------
    OddDimensionError
        If ``m`` is odd (pure ``X_A`` generators need an even ``m``).
    """
    m = alg.m
    match = match or match_optimal_case(alg, tol)
    if not match.pure:
        raise ValueError("algebra has no pure X_A element")
    if m % 2:
        raise OddDimensionError(f"pure X_A generator at odd m={m}: the number of equations must be even")
    conds: list[Condition] = []
    extras: dict = {}
    found = bd1_conjugator(match.pure[0], tol)
    if found is None:
        conds.append(Condition("A=P B_d1 P^-1", False, float("nan"), "pure matrix is not similar to a multiple of B_d1"))
        return _collect(conds, **extras)
    P, lam = found
    exact_ = is_exact(P)
    Pinv = la.inv(P)
    B = build_bd1(m // 2) if exact_ else as_float(build_bd1(m // 2))
    conj = (lambda M: Pinv @ (M if exact_ else as_float(M)) @ P)
    conds.append(Condition("A=P B_d1 P^-1", True, 0.0))
    extras["P"] = P
    extras["lambda"] = lam
    iv = interval or Cfn.interval or (-1.0, 1.0)
    # C in the frame where the pure generator is B_d1
    xs = [Fraction(k, 4) for k in range(-4, 5)] if (exact_ and Cfn.exact and not match.steps) else chebyshev_grid(iv, 9)
    blocks_ok = True
    worst = 0.0
    for x in xs:
        Ct = conj(Cfn(x))
        if block_form(Ct, tol) is None:
            blocks_ok = False
        worst = max(worst, la.max_abs(Ct @ B - B @ Ct))
    conds.append(Condition("C blocks [[a,b],[-b,a]]", blocks_ok, worst))
    if len(match.pure) >= 2:
        # two pure generators: C commutes with both
        A1 = conj(match.pure[1])
        res = max(la.max_abs(commutator(conj(Cfn(x)), A1)) for x in xs)
        conds.append(Condition("CA1-A1C=0", res <= (0 if exact_ else tol.abs * 10), res))
        conds.append(Condition("CB_d1-B_d1C=0", worst <= (0 if exact_ else tol.abs * 10), worst))
        return _collect(conds, **extras)
    if match.base is None:
        return _collect(conds, **extras)
    mats = {k: conj(v) for k, v in match.matrices.items()}
    if match.base != 2 and match.base not in (4, 5):
        # one-dimensional projections other than X3: only the commutation with B_d1 applies
        for name, M in mats.items():
            c = _bd1_multiple(commutator(M, B), B, tol)
            conds.append(Condition(f"{name}B-B{name}=cB", c is not None, 0.0 if c is not None else float("nan")))
            if c is not None:
                conds.append(_scalar_condition("c=0", c, tol))
        return _collect(conds, **extras)
    A3 = mats["A3"]
    F = Cfn
    if match.steps:
        try:
            F = realize_steps(Cfn, match.steps, iv, tol)
        except (DomainError, IntegrationError, ValueError) as exc:
            conds.append(Condition("normalizing change of variables", False, float("nan"), str(exc)))
            return _collect(conds, **extras)
    C0 = conj(initial_matrix(F, mats["A3"] if exact_ else as_float(mats["A3"]), F.interval))
    if not exact_:
        C0 = as_float(C0)
    E = la.eye(m, exact_)
    s = _scale(A3, C0) ** 2
    if match.base == 2:
        c = _bd1_multiple(A3 @ B - B @ A3, B, tol)
        conds.append(Condition("A3B-BA3=cB", c is not None, 0.0 if c is not None else float("nan")))
        if c is not None:
            conds.append(_scalar_condition("c=0", c, tol))
            extras["c"] = c
        conds.append(_zero_condition("C0B-BC0=0", C0 @ B - B @ C0, tol, s))
        conds.append(_nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s))
        conds.append(splitting_condition(A3, C0, tol))
    elif match.base == 4:
        A2 = mats["A2"]
        a1 = _bd1_multiple(A3 @ (A2 + 2 * E) - A2 @ A3, B, tol)
        conds.append(Condition("A3(A2+2E)-A2A3=alpha1*B", a1 is not None, 0.0 if a1 is not None else float("nan")))
        extras["alpha1"] = a1
        conds.append(_zero_condition("A2B-BA2=0", A2 @ B - B @ A2, tol, s))
        conds.append(_zero_condition("A3B-BA3=0", A3 @ B - B @ A3, tol, s))
        conds.append(_zero_condition("BC0-C0B=0", B @ C0 - C0 @ B, tol, s))
        conds.append(_zero_condition("A2C0-C0(A2+4E)=0", A2 @ C0 - C0 @ (A2 + 4 * E), tol, s))
        conds.append(_nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s))
        conds.append(_scalar_condition("tr(C0)=0", la.trace(C0), tol, s))
    else:
        A1, A2 = mats["A1"], mats["A2"]
        conds.append(_zero_condition("BA1-A1B=0", B @ A1 - A1 @ B, tol, s))
        conds.append(_zero_condition("A2B-BA2=0", A2 @ B - B @ A2, tol, s))
        conds.append(_zero_condition("A3B-BA3=0", A3 @ B - B @ A3, tol, s))
        for name, R in (("A1A2-(A2+2E)A1=beta1*B", A1 @ A2 - (A2 + 2 * E) @ A1),
                        ("A1A3-A3A1-A2=beta2*B", A1 @ A3 - A3 @ A1 - A2),
                        ("A2A3-A3A2-2A3=beta3*B", A2 @ A3 - A3 @ A2 - 2 * A3)):
            beta = _bd1_multiple(R, B, tol)
            conds.append(Condition(name, beta is not None, 0.0 if beta is not None else float("nan")))
        conds.append(_zero_condition("A2C0-C0(A2+4E)=0", A2 @ C0 - C0 @ (A2 + 4 * E), tol, s))
        conds.append(_zero_condition("C0A1-A1C0=0", C0 @ A1 - A1 @ C0, tol, s))
        conds.append(_zero_condition("C0B-BC0=0", C0 @ B - B @ C0, tol, s))
        conds.append(_scalar_condition("tr(C0)=0", la.trace(C0), tol, s))
        conds.append(_nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, s))
    extras["C0"] = C0
    return _collect(conds, **extras)


def splitting_condition(A3, C0, tol: Tolerance = DEFAULT_TOL) -> Condition:
    """Whether splitting ``(k1 x^2 + 2 k2 x + k3) D + 4 (k1 x + k2) C0 = 0``
    (``D = A3 C0 - C0 A3``) in powers of x forces ``k1 = k2 = k3 = 0``."""
    A3, C0 = la.unify(A3, C0)
    D = A3 @ C0 - C0 @ A3
    Z = D * 0
    # rows: x^2, x^1, x^0 coefficients; columns k1, k2, k3
    blocks = [[D, Z, Z], [4 * C0, 2 * D, Z], [Z, 4 * C0, D]]
    M = np.vstack([np.stack([b.reshape(-1) for b in row], axis=1) for row in blocks])
    r = la.rank(M, None if is_exact(M) else 1e-9)
    return Condition("splitting forces k1=k2=k3=0", r == 3, float(3 - r))


# ---------------------------------------------------------------------------
# irreducibility


class _Echelon:
    """Incrementally maintained row-echelon basis of a vector space."""

    def __init__(self, exact_: bool, tol: float = 1e-9):
        self.exact = exact_
        self.tol = tol
        self.rows: list[np.ndarray] = []
        self.pivots: list[int] = []
        self.originals: list[np.ndarray] = []

    def reduce(self, v: np.ndarray) -> np.ndarray:
        v = v.copy()
        for r, p in zip(self.rows, self.pivots):
            if v[p] != 0:
                v = v - v[p] * r
        return v

    def add(self, v: np.ndarray, original=None) -> bool:
        w = self.reduce(v)
        if self.exact:
            nz = [i for i, val in enumerate(w) if val != 0]
            if not nz:
                return False
            p = nz[0]
        else:
            scale = max(1.0, float(np.max(np.abs(v))))
            if np.max(np.abs(w)) <= self.tol * scale:
                return False
            p = int(np.argmax(np.abs(w)))
        w = w / w[p]
        for i, r in enumerate(self.rows):
            if r[p] != 0:
                self.rows[i] = r - r[p] * w
        self.rows.append(w)
        self.pivots.append(p)
        self.originals.append(v if original is None else original)
        return True

    def __len__(self) -> int:
        return len(self.rows)


def generated_algebra(mats, tol: float = 1e-9) -> list[np.ndarray]:
    """Basis of the associative algebra generated by ``mats`` and ``E``."""
    mats = la.unify(*(np.asarray(M) for M in mats))
    m = mats[0].shape[0]
    exact_ = is_exact(mats[0])
    scale = max([la.max_abs(M) for M in mats] + [1.0])
    gens = [M if exact_ else as_float(M) / scale for M in mats]
    ech = _Echelon(exact_, tol)
    E = la.eye(m, exact_)
    ech.add(E.reshape(-1), E)
    queue = [E]
    while queue and len(ech) < m * m:
        X = queue.pop(0)
        for M in gens:
            Y = M @ X
            if ech.add(Y.reshape(-1), Y):
                queue.append(Y)
    return ech.originals


@dataclass
class IrreducibilityVerdict:
    """``status`` is Irreducible, ReducibleSubspace, ConstantEquivalent or Undetermined."""

    status: str
    witness: list | None = None
    algebra_dim: int | None = None
    certificate: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"status": self.status, "algebra_dim": self.algebra_dim}
        if self.witness is not None:
            out["witness"] = [matrix_to_json(w) for w in self.witness]
        if self.certificate:
            out["certificate"] = self.certificate
        return out


def is_invariant(W: list[np.ndarray], mats, tol: float = 1e-8) -> bool:
    """``M W`` lies in ``span W`` for every M."""
    S = la.span_matrix(W)
    exact_ = is_exact(S) and all(is_exact(np.asarray(M)) for M in mats)
    r = la.rank(S if exact_ else as_float(S), None if exact_ else tol)
    for M in mats:
        M = np.asarray(M)
        img = [(M if exact_ else as_float(M)) @ (w if exact_ else as_float(w)) for w in W]
        T = np.vstack([S if exact_ else as_float(S), la.span_matrix(img) if exact_ else as_float(la.span_matrix(img))])
        if la.rank(T, None if exact_ else tol) != r:
            return False
    return True


def _eigvecs(M: np.ndarray, tol: float) -> list[np.ndarray]:
    """Eigenvectors for the real (exactly: rational) eigenvalues of M."""
    m = M.shape[0]
    out = []
    if is_exact(M):
        for v, _ in spectrum(M).eigenvalues:
            if isinstance(v, Fraction):
                out += la.nullspace(M - v * la.eye(m))
        return out
    w = np.linalg.eigvals(M)
    for v in w:
        if abs(v.imag) <= 1e-9 * max(1.0, abs(v)):
            ns = la.nullspace(M - v.real * np.eye(m), rank_tol=1e-8)
            out += ns
    return out


def _cyclic(alg_basis, v, exact_: bool, tol: float) -> list[np.ndarray]:
    ech = _Echelon(exact_, tol)
    for B in alg_basis:
        w = B @ v
        ech.add(w, w)
    return ech.originals


def _complement(U: list[np.ndarray], m: int, exact_: bool) -> list[np.ndarray]:
    S = la.span_matrix(U)
    return la.nullspace(S if exact_ else as_float(S), None if exact_ else 1e-10)


def _canonical(W: list[np.ndarray], exact_: bool) -> list[np.ndarray]:
    S = la.span_matrix(W)
    R, piv = la.rref(S if exact_ else as_float(S), None if exact_ else 1e-10)
    return [R[i] for i in range(len(piv))]


def irreducibility_test(mats, derivatives=None, tol: Tolerance = DEFAULT_TOL, seed: int = 0) -> IrreducibilityVerdict:
    """Look for a common proper invariant subspace of ``mats``.

    A generated algebra of dimension ``m^2`` proves irreducibility over the
    complex numbers.  Otherwise eigenvectors of algebra elements (and of their
    transposes, through orthogonal complements) seed cyclic subspaces; a
    proper one is returned as the witness.  When ``derivatives`` are given
    and vanish while the matrices commute, the verdict is ConstantEquivalent.
    """
    mats = [np.asarray(M) for M in mats]
    if not mats:
        raise ValueError("empty matrix list")
    mats = list(la.unify(*mats))
    m = mats[0].shape[0]
    exact_ = is_exact(mats[0])
    ftol = 1e-9
    if derivatives is not None:
        ders = [np.asarray(D) for D in derivatives]
        tfree = [D - la.trace(D) / m * la.eye(m, is_exact(D)) for D in ders]
        scale = max([la.max_abs(M) for M in mats] + [1.0])
        flat = all(la.is_zero(D) if is_exact(D) else tol.small(D, scale) for D in tfree)
        commuting = all(
            (la.is_zero(commutator(A, B)) if exact_ else tol.small(commutator(A, B), scale * scale))
            for i, A in enumerate(mats) for B in mats[i + 1:])
        if flat and commuting:
            return IrreducibilityVerdict("ConstantEquivalent", None, None,
                                         {"reason": "C' vanishes and the samples commute"})
    basis = generated_algebra(mats, ftol)
    dim = len(basis)
    if dim == m * m:
        return IrreducibilityVerdict("Irreducible", None, dim, {"reason": "generated algebra is the full matrix algebra"})
    rng = np.random.default_rng(seed)
    probes = list(mats) + basis[1:]
    for _ in range(4):
        coef = rng.integers(-3, 4, size=len(basis))
        P = sum((int(c) * B for c, B in zip(coef, basis)), start=basis[0] * 0)
        probes.append(P)
    for transpose in (False, True):
        alg_basis = [B.T for B in basis] if transpose else basis
        for P in probes:
            P = P.T if transpose else P
            for v in _eigvecs(P, ftol):
                W = _cyclic(alg_basis, v, exact_, ftol)
                if not 0 < len(W) < m:
                    continue
                if transpose:
                    W = _complement(W, m, exact_)
                    if not 0 < len(W) < m:
                        continue
                W = _canonical(W, exact_)
                if is_invariant(W, mats):
                    return IrreducibilityVerdict("ReducibleSubspace", W, dim,
                                                 {"reason": "common invariant subspace", "dim": len(W)})
    return IrreducibilityVerdict("Undetermined", None, dim,
                                 {"reason": "no real invariant subspace found from eigenvectors"})


def system_matrices(Cfn: MatrixFunction, interval=None) -> tuple[list, list]:
    """Matrices spanning the values of C (and derivatives) for the reducibility test."""
    F = Cfn
    if isinstance(F, ConjugatedExponential) and F.exact:
        F = F.as_polynomial()
    if isinstance(F, Polynomial):
        coeffs = F.coeffs[: max(F.degree, 0) + 1]
        return list(coeffs), list(F.deriv().coeffs)
    iv = interval or F.interval or (-1.0, 1.0)
    xs = chebyshev_grid(iv, F.m * F.m + 2)
    return [as_float(F(x)) for x in xs], [as_float(F.derivative(x)) for x in xs]


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class ClassificationReport:
    m: int
    optimal_case: str
    theorem_case: str
    algebra: LieAlgebra | None
    irreducibility: IrreducibilityVerdict | None
    conditions: list[Condition]
    witnesses: dict
    notes: list[str]
    errors: list[str]
    config: dict = field(default_factory=dict)
    system: dict | None = None
    match: OptimalCase | None = None

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "m": self.m,
            "optimal_case": self.optimal_case,
            "theorem_case": self.theorem_case,
            "algebra": self.algebra.to_json() if self.algebra is not None else None,
            "irreducibility": self.irreducibility.to_json() if self.irreducibility is not None else None,
            "conditions": [c.to_json() for c in self.conditions],
            "witnesses": self.witnesses,
            "notes": self.notes,
            "errors": self.errors,
            "config": self.config,
            "system": self.system,
        }

    def to_text(self) -> str:
        lines = [f"system of m={self.m} equations",
                 f"optimal-system case: {self.optimal_case}",
                 f"theorem case: {self.theorem_case}"]
        if self.algebra is not None:
            lines.append(f"admitted algebra (modulo y.grad): dim {self.algebra.dim}, closed={self.algebra.closed}")
            for i, g in enumerate(self.algebra.basis):
                lines.append(f"  g{i + 1}: k = ({', '.join(str(v) for v in g.k)})")
                lines += _matrix_lines(g.A, "      ")
        if self.irreducibility is not None:
            lines.append(f"irreducibility: {self.irreducibility.status}")
        for c in self.conditions:
            info = c.detail if c.residual != c.residual else f"residual {c.residual:.3g}"
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}  ({info or 'no solution'})")
        for n in self.notes:
            lines.append(f"note: {n}")
        for e in self.errors:
            lines.append(f"error: {e}")
        return "\n".join(lines) + "\n"


def _matrix_lines(M, indent: str) -> list[str]:
    M = np.asarray(M)
    if M.shape[0] > 6:
        return [f"{indent}[{M.shape[0]}x{M.shape[1]} matrix, max|entry| = {la.max_abs(M):.6g}]"]
    cells = [[str(v) if is_exact(M) else f"{v:.6g}" for v in row] for row in M.tolist()]
    w = max(len(c) for row in cells for c in row)
    return [indent + " ".join(c.rjust(w) for c in row) for row in cells]


def classify_system(sys: CanonicalSystem, tol: Tolerance = DEFAULT_TOL, rank_tol: float | None = None,
                    config: dict | None = None) -> ClassificationReport:
    """Run determining solve, optimal-system matching, case checks and the reducibility test.

    Sub-failures are recorded in the report instead of raised.
    """
    notes: list[str] = []
    errors: list[str] = []
    conds: list[Condition] = []
    witnesses: dict = {}
    m = sys.m
    C = sys.C
    interval = sys.interval
    tz = trace_is_zero(C, tol)
    if not tz:
        try:
            sys2, chg = trace_normalize(sys, tol=tol)
            notes.append(f"trace normalized by the change '{chg.name}'")
            C, interval = sys2.C, sys2.interval
        except (DomainError, IntegrationError) as exc:
            errors.append(f"trace normalization failed: {exc}")
    try:
        alg = solve_determining(C, rank_tol=rank_tol)
    except (AmbiguousRankError, InsufficientSamplesError) as exc:
        errors.append(f"determining equations: {exc}")
        if isinstance(exc, AmbiguousRankError):
            witnesses["singular_values"] = exc.singular_values
        return ClassificationReport(m, "Undetermined", "undetermined", None, None, conds, witnesses, notes, errors,
                                    config or {})
    if not alg.closed:
        errors.append("admitted generators do not close under brackets")
    match = match_optimal_case(alg, tol)
    if match.tag == "Undetermined":
        errors.append(f"optimal-system matching failed: {match.diagnostics.get('error')}")
    if match.pure:
        try:
            res = check_xa_cases(alg, C, match, tol, interval)
            conds += res.conditions
            if "c" in res.extras:
                witnesses["c"] = scalar_to_json(res.extras["c"])
            if "P" in res.extras:
                witnesses["bd1_conjugator"] = matrix_to_json(res.extras["P"])
        except OddDimensionError as exc:
            errors.append(str(exc))
    elif match.base in (2, 4, 5):
        F = C
        try:
            if match.steps:
                F = realize_steps(C, match.steps, interval, tol)
            A3 = match.matrices["A3"]
            C0 = initial_matrix(F, A3, F.interval or interval)
            if not (is_exact(C0) and is_exact(A3)):
                C0, A3 = as_float(C0), as_float(A3)
            witnesses["C0"] = matrix_to_json(C0)
            if match.base == 2:
                conds.append(_nonzero_condition("A3C0-C0A3!=0", A3 @ C0 - C0 @ A3, tol, _scale(A3, C0) ** 2))
            elif match.base == 4:
                conds += check_case_b(match.matrices["A2"], A3, C0, tol).conditions
            else:
                conds += check_case_c(match.matrices["A1"], match.matrices["A2"], A3, C0, tol).conditions
        except (DomainError, IntegrationError, ValueError) as exc:
            errors.append(f"normalizing change of variables failed: {exc}")
    elif match.base in (1, 3):
        notes.append(f"one-dimensional algebra of type {match.tag}; equivalent to case (a) after a change of variables")
    mats, ders = system_matrices(C, interval)
    verdict = irreducibility_test(mats, ders, tol)
    if verdict.status == "ReducibleSubspace":
        notes.append("system is reducible: a proper subsystem exists")
        witnesses["invariant_subspace"] = [matrix_to_json(w) for w in verdict.witness]
    elif verdict.status == "ConstantEquivalent":
        notes.append("C is constant: equivalent to a constant-coefficient system")
    if alg.dim == 0:
        notes.append("no nontrivial symmetry")
    return ClassificationReport(m, match.tag, match.theorem_case, alg, verdict, conds, witnesses, notes, errors,
                                config or {}, system=_system_json(sys), match=match)


def _system_json(sys: CanonicalSystem):
    try:
        return {"m": sys.m, "C": mfun_to_json(sys.C), "interval": list(sys.interval)}
    except TypeError:
        return {"m": sys.m, "interval": list(sys.interval)}
