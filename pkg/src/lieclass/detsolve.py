"""Determining equations for point symmetries of ``y'' = C(x) y``.

A nontrivial generator is ``X = k1 X1 + k2 X2 + k3 X3 + X_A`` with

    X1 = x (x d/dx + y.grad),  X2 = 2x d/dx + y.grad,  X3 = d/dx,
    X_A = (A y).grad,

and it is admitted exactly when

    (k1 x^2 + 2 k2 x + k3) C' + C A - A C + 4 (k1 x + k2) C = 0

for all x.  The unknowns ``(k1, k2, k3, A11, A12, ...)`` enter linearly, so
the admitted algebra is the null space of a finite linear system, taken
modulo the trivial direction ``A = E``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _linalg as la
from ._linalg import as_float, is_exact
from .io import SCHEMA, SchemaError, matrix_from_json, matrix_to_json, scalar_from_json, scalar_to_json
from .mfun import ConjugatedExponential, MatrixFunction, Polynomial, Sampled

# relative rank thresholds for the sampled (float) assembly
RANK_TOL_ANALYTIC = 1e-9
RANK_TOL_FD = 1e-6
AMBIGUITY_BAND = 10.0


class AmbiguousRankError(ArithmeticError):
    """A singular value lies too close to the rank threshold to decide."""

    def __init__(self, msg: str, singular_values, threshold: float):
        super().__init__(msg)
        self.singular_values = [float(s) for s in singular_values]
        self.threshold = float(threshold)
        self.condition = (self.singular_values[0] / self.singular_values[-1]
                          if self.singular_values and self.singular_values[-1] > 0 else float("inf"))


class InsufficientSamplesError(ValueError):
    pass


@dataclass(eq=False)
class Generator:
    """``k1 X1 + k2 X2 + k3 X3 + X_A`` stored as ``(k1, k2, k3; A)``."""

    k: tuple
    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A)
        k = tuple(self.k)
        if len(k) != 3:
            raise ValueError("k must have three entries")
        if is_exact(A):
            k = tuple(la.to_fraction(v) for v in k)
        else:
            k = tuple(float(v) for v in k)
        self.k, self.A = k, A

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def exact(self) -> bool:
        return is_exact(self.A)

    @property
    def is_pure(self) -> bool:
        """True for a pure ``X_A`` generator (all k's zero)."""
        return all(v == 0 for v in self.k)

    def vector(self) -> np.ndarray:
        vals = list(self.k) + list(self.A.ravel())
        return np.array(vals, dtype=object if self.exact else float)

    @classmethod
    def from_vector(cls, v, m: int) -> "Generator":
        v = np.asarray(v)
        return cls(tuple(v[:3]), v[3:].reshape(m, m))

    def trace_free(self) -> "Generator":
        """Representative with ``tr A = 0`` (shift along the trivial direction)."""
        t = la.trace(self.A) / self.m
        return Generator(self.k, self.A - t * la.eye(self.m, self.exact))

    def bracket(self, other: "Generator") -> "Generator":
        """Lie bracket ``[self, other]``."""
        x1, x2, x3 = self.k
        z1, z2, z3 = other.k
        alpha = -2 * (x1 * z2 - x2 * z1)
        beta = -(x1 * z3 - x3 * z1)
        gamma = -2 * (x2 * z3 - x3 * z2)
        XA, ZA = la.unify(self.A, other.A)
        return Generator((alpha, beta, gamma), ZA @ XA - XA @ ZA)

    def to_json(self) -> dict:
        return {"k": [scalar_to_json(v) for v in self.k], "A": matrix_to_json(self.A)}

    @classmethod
    def from_json(cls, data, mode: str = "auto", path: str = "$") -> "Generator":
        if not isinstance(data, dict) or "k" not in data or "A" not in data:
            raise SchemaError(path, "generator needs 'k' and 'A'")
        A = matrix_from_json(data["A"], mode, f"{path}.A")
        kmode = "exact" if is_exact(A) else "float"
        if not isinstance(data["k"], list) or len(data["k"]) != 3:
            raise SchemaError(f"{path}.k", "expected three scalars")
        k = [scalar_from_json(v, kmode, f"{path}.k[{i}]") for i, v in enumerate(data["k"])]
        return cls(tuple(k), A)

    def __repr__(self) -> str:
        ks = ", ".join(str(v) for v in self.k)
        return f"Generator(k=({ks}), A={matrix_to_json(self.A)})"


@dataclass(eq=False)
class LieAlgebra:
    """Admitted algebra modulo the trivial ``y.grad`` direction.

    ``structure_constants[i, j, l]`` is the coefficient of ``basis[l]`` in
    ``[basis[i], basis[j]]``; it is None until :func:`verify_closure` runs.
    """

    basis: list[Generator]
    m: int
    structure_constants: np.ndarray | None = None
    closed: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def exact(self) -> bool:
        return all(g.exact for g in self.basis)

    def projections(self) -> list[tuple]:
        """L3 coordinates ``(k1, k2, k3)`` of every basis element."""
        return [g.k for g in self.basis]

    def pure_elements(self) -> list[Generator]:
        return [g for g in self.basis if g.is_pure]

    def quotient_vectors(self) -> list[np.ndarray]:
        return [g.trace_free().vector() for g in self.basis]

    def contains(self, g: Generator, rank_tol: float | None = None) -> bool:
        """Whether ``g`` lies in the span of the basis plus the trivial direction."""
        v = g.trace_free().vector()
        vecs = self.quotient_vectors()
        if not is_exact(v) or not all(is_exact(u) for u in vecs):
            v = as_float(v)
            vecs = [as_float(u) for u in vecs]
            rank_tol = 1e-8 if rank_tol is None else rank_tol
        return la.in_span(vecs, v, rank_tol)

    def to_json(self) -> dict:
        out = {
            "basis": [g.to_json() for g in self.basis],
            "dim": self.dim,
            "m": self.m,
            "closed": self.closed,
        }
        if self.structure_constants is not None:
            out["structure_constants"] = [[matrix_to_json(self.structure_constants[i, j]) if self.dim else []
                                           for j in range(self.dim)] for i in range(self.dim)]
        return out

    @classmethod
    def from_json(cls, data, mode: str = "auto", path: str = "$") -> "LieAlgebra":
        if not isinstance(data, dict) or "basis" not in data:
            raise SchemaError(path, "algebra needs a 'basis'")
        basis = [Generator.from_json(g, mode, f"{path}.basis[{i}]") for i, g in enumerate(data["basis"])]
        if "m" in data:
            m = int(data["m"])
        elif basis:
            m = basis[0].m
        else:
            raise SchemaError(path, "empty basis needs 'm'")
        return cls(basis, m)


# ---------------------------------------------------------------------------
# residual


def residual(Cfn: MatrixFunction, g: Generator, x) -> np.ndarray:
    """Left-hand side of the determining equation at ``x``."""
    k1, k2, k3 = g.k
    C, dC = Cfn(x), Cfn.derivative(x)
    A = g.A
    if not (is_exact(C) and is_exact(dC) and is_exact(A)):
        C, dC, A = as_float(C), as_float(dC), as_float(A)
        k1, k2, k3, x = float(k1), float(k2), float(k3), float(x)
    else:
        x = Fraction(x)
    return (k1 * x * x + 2 * k2 * x + k3) * dC + C @ A - A @ C + 4 * (k1 * x + k2) * C


def max_residual(Cfn: MatrixFunction, g: Generator, xs) -> float:
    return max(la.max_abs(residual(Cfn, g, x)) for x in xs)


# ---------------------------------------------------------------------------
# assembly


def _unit_matrices(m: int, exact_: bool):
    for a in range(m):
        for b in range(m):
            E = la.zeros((m, m), exact_)
            E[a, b] = 1
            yield E


def _columns_at(c_prev, c, c_next, p, units) -> list[np.ndarray]:
    """Columns of the coefficient-of-x^p block (or the pointwise block)."""
    cols = [(p + 3) * c_prev, (2 * p + 4) * c, (p + 1) * c_next]
    cols += [c @ U - U @ c for U in units]
    return [col.reshape(-1) for col in cols]


def _polynomial_system(P: Polynomial) -> np.ndarray:
    m = P.m
    exact_ = P.exact
    coeffs = P.coeffs[: max(P.degree, 0) + 1]
    deg = len(coeffs) - 1
    zero = la.zeros((m, m), exact_)
    get = lambda j: coeffs[j] if 0 <= j <= deg else zero
    units = list(_unit_matrices(m, exact_))
    blocks = []
    for p in range(deg + 2):
        cols = _columns_at(get(p - 1), get(p), get(p + 1), p, units)
        blocks.append(np.stack(cols, axis=1))
    return np.vstack(blocks)


def _pointwise_system(Cfn: MatrixFunction, xs) -> np.ndarray:
    m = Cfn.m
    units = list(_unit_matrices(m, False))
    blocks = []
    for x in xs:
        x = float(x)
        C, dC = as_float(Cfn(x)), as_float(Cfn.derivative(x))
        cols = [x * x * dC + 4 * x * C, 2 * x * dC + 4 * C, dC]
        cols += [C @ U - U @ C for U in units]
        blocks.append(np.stack([c.reshape(-1) for c in cols], axis=1))
    return np.vstack(blocks)


def sample_points(Cfn: MatrixFunction, count: int | None = None) -> np.ndarray:
    """Assembly points for the numeric path.

    ``1 + j/7`` for ``j = 0..m^2+6``; for functions tied to an interval the
    same number of generic interior points is used instead.
    """
    m = Cfn.m
    n = count or m * m + 7
    iv = Cfn.interval
    if iv is None:
        return 1 + np.arange(n) / 7
    a, b = iv
    # irrational offsets keep the points away from the sample grid and from 0
    return a + (b - a) * ((np.arange(n) + 1 / np.sqrt(2)) / (n + 0.5))


def _quotient_basis(null: list[np.ndarray], m: int, exact_: bool, tol: float) -> list[np.ndarray]:
    """Project out the trivial direction and bring the result to RREF."""
    if not null:
        return []
    proj = []
    for v in null:
        v = v.copy()
        A = v[3:].reshape(m, m)
        t = la.trace(A) / m
        for i in range(m):
            A[i, i] = A[i, i] - t
        v[3:] = A.reshape(-1)
        proj.append(v)
    M = la.span_matrix(proj)
    if exact_:
        R, piv = la.rref(M)
        return [R[i] for i in range(len(piv))]
    R, piv = la.rref(M, tol=tol)
    rows = [R[i] for i in range(len(piv))]
    for r in rows:
        r[np.abs(r) < tol] = 0.0
    return rows


def _float_nullspace(M: np.ndarray, rank_tol: float, check_gap: bool) -> tuple[list[np.ndarray], dict]:
    _, s, vt = np.linalg.svd(M)
    smax = float(s[0]) if s.size else 0.0
    n = M.shape[1]
    s_full = np.concatenate([s, np.zeros(max(0, n - s.size))])
    thresh = max(rank_tol, max(M.shape) * la.EPS) * smax
    r = int(np.sum(s_full > thresh))
    diag = {"singular_values": [float(v) for v in s_full], "threshold": thresh, "rank": r}
    if check_gap:
        near = [v for v in s_full if thresh / AMBIGUITY_BAND < v <= thresh * AMBIGUITY_BAND]
        if near:
            raise AmbiguousRankError(
                f"singular values {near} lie within a factor {AMBIGUITY_BAND:g} of the threshold {thresh:.3g}",
                s_full, thresh)
    return [vt[i] for i in range(r, n)], diag


def solve_determining(Cfn: MatrixFunction, rank_tol: float | None = None, points=None,
                      check_gap: bool = True) -> LieAlgebra:
    """Admitted algebra of nontrivial generators of ``y'' = C(x) y``.

    Polynomial input (and exact nilpotent conjugated exponentials, which are
    expanded) is split exactly in powers of x.  Other input is evaluated at
    :func:`sample_points` and solved in floating point; ``rank_tol`` is
    relative to the largest singular value.

    Returns
    -------
    LieAlgebra
        Basis in reduced echelon form over ``(k1, k2, k3, A11, A12, ...)``,
        every element with ``tr A = 0``; closure is verified.

    Raises
    ------
    AmbiguousRankError
        When a singular value falls near the float rank threshold.
    InsufficientSamplesError
        When a sampled function has too few data points.
    """
    m = Cfn.m
    F = Cfn
    if isinstance(F, ConjugatedExponential) and F.exact:
        F = F.as_polynomial()
    diag: dict = {}
    if isinstance(F, Polynomial):
        M = _polynomial_system(F)
        if F.exact:
            null = la.nullspace(M)
            diag["path"] = "exact"
        else:
            null, diag = _float_nullspace(M, rank_tol or RANK_TOL_ANALYTIC, check_gap)
            diag["path"] = "float-polynomial"
        exact_ = F.exact
    else:
        if isinstance(F, Sampled) and len(F.grid) < 5:
            raise InsufficientSamplesError(f"{len(F.grid)} samples; at least 5 are required")
        xs = sample_points(F) if points is None else np.asarray(points, dtype=float)
        if len(xs) < 4:
            raise InsufficientSamplesError("at least 4 assembly points are required")
        M = _pointwise_system(F, xs)
        fd = isinstance(F, Sampled) and F.dfunc is None
        if rank_tol is None:
            rank_tol = RANK_TOL_FD if fd else RANK_TOL_ANALYTIC
        null, diag = _float_nullspace(M, rank_tol, check_gap)
        diag["path"] = "sampled"
        diag["points"] = [float(x) for x in xs]
        exact_ = False
    rows = _quotient_basis(null, m, exact_, tol=1e-10)
    basis = [Generator.from_vector(v, m) for v in rows]
    alg = LieAlgebra(basis, m, diagnostics=diag)
    return verify_closure(alg)


# ---------------------------------------------------------------------------
# closure


def verify_closure(alg: LieAlgebra, rank_tol: float | None = None) -> LieAlgebra:
    """Compute structure constants; ``closed`` is False if a bracket leaves the span.

    Brackets are compared modulo the trivial direction.
    """
    d = alg.dim
    exact_ = alg.exact
    if d == 0:
        return LieAlgebra([], alg.m, np.zeros((0, 0, 0)), True, dict(alg.diagnostics))
    vecs = alg.quotient_vectors()
    if not exact_:
        vecs = [as_float(v) for v in vecs]
    S = np.stack(vecs, axis=1)  # columns are basis vectors
    tol = 1e-8 if rank_tol is None else rank_tol
    zero = Fraction(0) if exact_ else 0.0
    sc = np.full((d, d, d), zero, dtype=object if exact_ else float)
    closed = True
    failures = []
    for i in range(d):
        for j in range(i + 1, d):
            b = alg.basis[i].bracket(alg.basis[j]).trace_free().vector()
            if not exact_:
                b = as_float(b)
            coef = la.solve(S, b, None if exact_ else tol)
            if coef is None:
                closed = False
                failures.append((i, j))
                continue
            sc[i, j] = coef
            sc[j, i] = -coef
    diag = dict(alg.diagnostics)
    if failures:
        diag["closure_failures"] = failures
    return LieAlgebra(list(alg.basis), alg.m, sc, closed, diag)


def algebra_from_generators(gens: list[Generator], exact_: bool | None = None) -> LieAlgebra:
    """Echelonized algebra spanned by ``gens`` modulo the trivial direction."""
    if not gens:
        raise ValueError("empty generator list")
    m = gens[0].m
    exact_ = all(g.exact for g in gens) if exact_ is None else exact_
    vecs = [g.vector() if exact_ else as_float(g.vector()) for g in gens]
    rows = _quotient_basis(vecs, m, exact_, tol=1e-10)
    return verify_closure(LieAlgebra([Generator.from_vector(v, m) for v in rows], m))


def algebra_document(alg: LieAlgebra) -> dict:
    return {"schema": SCHEMA, "algebra": alg.to_json()}
