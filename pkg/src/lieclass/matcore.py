"""Matrix algebra shared by the whole pipeline.

Commutators, exponentials and conjugated exponentials, Sylvester and commutant
equations, spectra and eigenvalue chains, block-structure predicates, and the
fixed-step integrator used as a numeric oracle for every closed-form ``C(x)``.

All algebraic routines keep exact (Fraction) input exact.  Exponentials of
matrices that are not nilpotent are computed in floating point only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import sympy

from . import _linalg as la
from ._linalg import as_float, eye, is_exact, is_zero, zeros


class DimensionError(ValueError):
    pass


class ExactModeError(ValueError):
    """An exact result was requested where only a float result exists."""


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Tolerance:
    """Absolute and relative tolerance for float comparisons."""

    abs: float = 1e-9
    rel: float = 1e-9

    def __post_init__(self):
        if not (self.abs > 0 and self.rel > 0):
            raise ValueError("tolerances must be positive")

    def close(self, a, b) -> bool:
        a, b = as_float(a), as_float(b)
        scale = max(la.max_abs(a), la.max_abs(b))
        return la.max_abs(a - b) <= self.abs + self.rel * scale

    def small(self, a, scale: float = 0.0) -> bool:
        return la.max_abs(a) <= self.abs + self.rel * scale


DEFAULT_TOL = Tolerance()


def _square(*mats):
    m = mats[0].shape[0]
    for M in mats:
        if M.ndim != 2 or M.shape != (m, m):
            raise DimensionError(f"expected {m}x{m} matrices, got {M.shape}")
    return m


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Return ``AB - BA``."""
    A, B = la.unify(np.asarray(A), np.asarray(B))
    _square(A, B)
    return A @ B - B @ A


def build_bd1(n: int) -> np.ndarray:
    """Block-diagonal ``2n x 2n`` matrix with ``[[0, 1], [-1, 0]]`` blocks (exact)."""
    if n < 1:
        raise ValueError("n must be positive")
    out = zeros((2 * n, 2 * n))
    for k in range(n):
        out[2 * k, 2 * k + 1] = Fraction(1)
        out[2 * k + 1, 2 * k] = Fraction(-1)
    return out


def nilpotency_index(A: np.ndarray, atol: float = 0.0) -> int | None:
    """Smallest k <= m with ``A**k == 0``, or None when A is not nilpotent."""
    m = _square(A)
    P = A
    for k in range(1, m + 1):
        if is_zero(P, atol):
            return k
        P = P @ A
    return None


def is_nilpotent(A: np.ndarray) -> bool:
    return nilpotency_index(A) is not None


def _is_rational_scalar(x) -> bool:
    return isinstance(x, (int, np.integer, Rational)) and not isinstance(x, bool)


def _series(A: np.ndarray, x, k: int) -> np.ndarray:
    """``sum_{j<k} (xA)^j / j!`` in the scalar kind of A and x."""
    m = A.shape[0]
    term = eye(m, is_exact(A))
    total = term.copy()
    for j in range(1, k):
        term = (term @ A) * x / j
        total = total + term
    return total


def mat_exp(A: np.ndarray, x=1, mode: str = "auto") -> np.ndarray:
    """Matrix exponential ``e^{xA}``.

    A nilpotent exact ``A`` with rational ``x`` gives the exact finite sum.
    Otherwise the result is computed in float by scaling and squaring with a
    Pade kernel (``scipy.linalg.expm``).

    Parameters
    ----------
    mode : {"auto", "exact", "float"}
        ``"exact"`` raises :class:`ExactModeError` unless A is nilpotent.
    """
    A = np.asarray(A)
    _square(A)
    if mode not in ("auto", "exact", "float"):
        raise ValueError(f"unknown mode {mode!r}")
    k = nilpotency_index(A) if is_exact(A) else None
    if mode == "exact":
        if not is_exact(A) or k is None:
            raise ExactModeError("exact exponential requires an exact nilpotent matrix; use float mode")
        if not _is_rational_scalar(x):
            raise ExactModeError("exact exponential requires a rational x")
    if mode != "float" and k is not None:
        if _is_rational_scalar(x):
            return _series(A, Fraction(x), k)
        return _series(as_float(A), float(x), k)
    return scipy.linalg.expm(float(x) * as_float(A))


def conj_exp(A: np.ndarray, C0: np.ndarray, x=1, mode: str = "auto") -> np.ndarray:
    """Return ``e^{xA} C0 e^{-xA}``, the solution of ``C' = AC - CA`` with ``C(0) = C0``."""
    A, C0 = np.asarray(A), np.asarray(C0)
    _square(A, C0)
    left = mat_exp(A, x, mode)
    right = mat_exp(A, -x, mode)
    left, C0u, right = la.unify(left, C0, right)
    return left @ C0u @ right


# ---------------------------------------------------------------------------
# Sylvester and commutant equations


@dataclass
class SylvesterSolution:
    """Solution set of ``AX - XB = Q``.

    ``particular`` is None when the equation has no solution; the homogeneous
    basis is returned either way.
    """

    particular: np.ndarray | None
    homogeneous: list[np.ndarray]

    @property
    def feasible(self) -> bool:
        return self.particular is not None

    @property
    def unique(self) -> bool:
        return self.feasible and not self.homogeneous


def sylvester_lift(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> AX - XB`` acting on row-major ``vec(X)``."""
    A, B = la.unify(np.asarray(A), np.asarray(B))
    m, n = A.shape[0], B.shape[0]
    Im, In = eye(m, is_exact(A)), eye(n, is_exact(A))
    return np.kron(A, In) - np.kron(Im, B.T)


def solve_sylvester(A: np.ndarray, B: np.ndarray, Q: np.ndarray, rank_tol: float | None = None) -> SylvesterSolution:
    """Solve ``AX - XB = Q`` through the Kronecker lift.

    Exact inputs produce exact solutions.  An inconsistent ``Q`` is reported as
    ``particular=None`` rather than raised.
    """
    A, B, Q = la.unify(np.asarray(A), np.asarray(B), np.asarray(Q))
    if A.ndim != 2 or A.shape[0] != A.shape[1] or B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionError("A and B must be square")
    m, n = A.shape[0], B.shape[0]
    if Q.shape != (m, n):
        raise DimensionError(f"Q must be {m}x{n}, got {Q.shape}")
    L = sylvester_lift(A, B)
    hom = [v.reshape(m, n) for v in la.nullspace(L, rank_tol)]
    x = la.solve(L, Q.reshape(-1), rank_tol)
    part = None if x is None else x.reshape(m, n)
    return SylvesterSolution(part, hom)


def commutant_basis(A: np.ndarray, rank_tol: float | None = None) -> list[np.ndarray]:
    """Basis of ``{X : XA - AX = 0}``."""
    A = np.asarray(A)
    _square(A)
    return solve_sylvester(A, A, zeros(A.shape, is_exact(A)), rank_tol).homogeneous


def joint_commutant(mats: Sequence[np.ndarray], rank_tol: float | None = None) -> list[np.ndarray]:
    """Basis of matrices commuting with every element of ``mats``."""
    mats = la.unify(*[np.asarray(M) for M in mats])
    m = _square(*mats)
    L = np.vstack([sylvester_lift(M, M) for M in mats])
    return [v.reshape(m, m) for v in la.nullspace(L, rank_tol)]


# ---------------------------------------------------------------------------
# spectra


@dataclass
class Spectrum:
    """Eigenvalues with algebraic multiplicities.

    Exact spectra store rationals as Fraction and quadratic irrationals as
    sympy expressions; approximate spectra store complex floats together with
    a backward-error bound ``max ||Av - lv|| / (||A|| ||v||)``.
    """

    eigenvalues: list[tuple[object, int]]
    exact: bool
    backward_error: float | None = None

    @property
    def size(self) -> int:
        return sum(k for _, k in self.eigenvalues)

    def values(self) -> list:
        return [v for v, _ in self.eigenvalues]

    def as_complex(self) -> list[tuple[complex, int]]:
        return [(complex(sympy.N(v, 30)) if isinstance(v, sympy.Basic) else complex(v), k)
                for v, k in self.eigenvalues]


def _sym(x):
    if isinstance(x, Fraction):
        return sympy.Rational(x.numerator, x.denominator)
    return sympy.nsimplify(x) if isinstance(x, (int, np.integer)) else x


def _from_sym(v):
    v = sympy.nsimplify(v) if not isinstance(v, sympy.Basic) else v
    if v.is_Rational:
        return Fraction(int(v.p), int(v.q))
    return v


def _charpoly_exact(A: np.ndarray):
    lam = sympy.Symbol("lam")
    M = sympy.Matrix([[_sym(v) for v in row] for row in A.tolist()])
    return M.charpoly(lam).as_expr(), lam


def spectrum(A: np.ndarray, cluster_tol: float | None = None) -> Spectrum:
    """Spectrum of a square matrix.

    For exact input the characteristic polynomial is factored over the
    rationals; if every factor has degree at most two the eigenvalues are
    exact.  Otherwise float eigenvalues are returned and clustered into
    multiplicities.
    """
    A = np.asarray(A)
    m = _square(A)
    if is_exact(A):
        poly, lam = _charpoly_exact(A)
        _, factors = sympy.factor_list(poly, lam)
        if all(sympy.degree(f, lam) <= 2 for f, _ in factors):
            acc: dict = {}
            for f, mult in factors:
                for root, k in sympy.roots(sympy.Poly(f, lam)).items():
                    key = sympy.nsimplify(sympy.expand(root))
                    acc[key] = acc.get(key, 0) + k * mult
            items = sorted(acc.items(), key=lambda kv: (float(sympy.re(kv[0])), float(sympy.im(kv[0]))))
            return Spectrum([(_from_sym(v), k) for v, k in items], exact=True)
    Af = as_float(A)
    w, V = np.linalg.eig(Af)
    norm = max(np.linalg.norm(Af, 2), 1e-300)
    berr = 0.0
    for j in range(m):
        v = V[:, j]
        berr = max(berr, float(np.linalg.norm(Af @ v - w[j] * v) / (norm * np.linalg.norm(v))))
    if cluster_tol is None:
        cluster_tol = 10 * (la.EPS * max(norm, 1.0)) ** (1.0 / m)
    groups: list[list[complex]] = []
    for val in sorted(w, key=lambda z: (z.real, z.imag)):
        for g in groups:
            if abs(np.mean(g) - val) <= cluster_tol:
                g.append(val)
                break
        else:
            groups.append([val])
    eigs = [(complex(np.mean(g)), len(g)) for g in groups]
    return Spectrum(eigs, exact=False, backward_error=berr)


def eigenvalue_chain(A: np.ndarray, step=2, length: int = 3, tol: float = 1e-8):
    """Find ``l`` such that ``l, l+step, ..., l+(length-1)*step`` are all eigenvalues.

    Decided exactly when the spectrum is exact, otherwise by matching within
    ``tol``.  Returns the smallest such ``l`` (by real part) or None.
    """
    if length < 1:
        raise ValueError("length must be positive")
    spec = spectrum(A)
    if spec.exact:
        vals = [_sym(v) for v in spec.values()]
        s = _sym(Fraction(step)) if _is_rational_scalar(step) else sympy.nsimplify(step)

        def present(target):
            return any(sympy.expand(target - v) == 0 for v in vals)

        for v in vals:
            if all(present(v + k * s) for k in range(1, length)):
                return _from_sym(v)
        return None
    vals = [v for v, _ in spec.as_complex()]
    for v in vals:
        if all(any(abs(v + k * step - u) <= tol * max(1.0, abs(u)) for u in vals) for k in range(1, length)):
            return v
    return None


# ---------------------------------------------------------------------------
# 2x2 block structure


@dataclass
class BlockForm:
    """``2n x 2n`` matrix built from blocks ``[[alpha, beta], [-beta, alpha]]``."""

    alpha: np.ndarray
    beta: np.ndarray

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def to_matrix(self) -> np.ndarray:
        n = self.n
        ex = is_exact(self.alpha) and is_exact(self.beta)
        out = zeros((2 * n, 2 * n), ex)
        for i in range(n):
            for j in range(n):
                a, b = self.alpha[i, j], self.beta[i, j]
                out[2 * i, 2 * j] = a
                out[2 * i, 2 * j + 1] = b
                out[2 * i + 1, 2 * j] = -b
                out[2 * i + 1, 2 * j + 1] = a
        return out


def block_form(M: np.ndarray, tol: Tolerance = DEFAULT_TOL) -> BlockForm | None:
    """Return the BlockForm of ``M`` if every 2x2 block has rotation-scaling shape."""
    M = np.asarray(M)
    m = _square(M)
    if m % 2:
        return None
    n = m // 2
    alpha = np.empty((n, n), dtype=M.dtype)
    beta = np.empty((n, n), dtype=M.dtype)
    scale = la.max_abs(M)
    for i in range(n):
        for j in range(n):
            blk = M[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            d = np.array([blk[0, 0] - blk[1, 1], blk[0, 1] + blk[1, 0]], dtype=M.dtype)
            if is_exact(M):
                if not is_zero(d):
                    return None
            elif not tol.small(d, scale):
                return None
            alpha[i, j] = blk[0, 0]
            beta[i, j] = blk[0, 1]
    return BlockForm(alpha, beta)


# ---------------------------------------------------------------------------
# fixed-step integration


def _as_matfun(F, m: int | None = None) -> Callable[[float], np.ndarray]:
    if callable(F):
        return lambda t: as_float(F(t))
    M = as_float(np.asarray(F))
    return lambda t: M


def rk4_path(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, x0: float, x1: float, n: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta with ``n`` equal steps; returns y(x1)."""
    y = np.array(y0, dtype=float)
    if n <= 0 or x1 == x0:
        return y
    h = (x1 - x0) / n
    if x0 + h == x0:
        raise IntegrationError("step size underflow")
    t = x0
    # overflow is detected below and reported as an IntegrationError
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = x0 + h * (i + 1)
            if not np.all(np.isfinite(y)):
                raise IntegrationError(f"non-finite state at x={t}")
    return y


def steps_for(span: float, rate: float, per_unit: float = 200.0, minimum: int = 100) -> int:
    """Step count keeping ``h * rate <= 1/per_unit``."""
    return max(minimum, int(math.ceil(abs(span) * per_unit * max(rate, 1.0))))


def solve_matrix_ode(Afn, Bfn, C0: np.ndarray, x: float, steps: int | None = None) -> np.ndarray:
    """Solve ``X' = A(x) X + X B(x)``, ``X(0) = C0`` as ``Y C0 Z``.

    ``Y' = A Y`` and ``Z' = Z B`` start from the identity and are integrated
    with fixed-step RK4.  ``Afn``/``Bfn`` may be matrices or callables of x.
    """
    C0 = as_float(np.asarray(C0))
    m = _square(C0)
    A = _as_matfun(Afn)
    B = _as_matfun(Bfn)
    x = float(x)
    if steps is None:
        probe = [0.0, x / 2, x]
        rate = max(np.linalg.norm(A(t), 2) + np.linalg.norm(B(t), 2) for t in probe)
        steps = steps_for(x, rate)

    def rhs(t, s):
        Y = s[: m * m].reshape(m, m)
        Z = s[m * m:].reshape(m, m)
        return np.concatenate([(A(t) @ Y).ravel(), (Z @ B(t)).ravel()])

    s0 = np.concatenate([np.eye(m).ravel(), np.eye(m).ravel()])
    s = rk4_path(rhs, s0, 0.0, x, steps)
    Y = s[: m * m].reshape(m, m)
    Z = s[m * m:].reshape(m, m)
    return Y @ C0 @ Z


def rk4_to_points(rhs, y0: np.ndarray, x0: float, xs, rate: float = 1.0, per_unit: float = 400.0) -> np.ndarray:
    """Integrate from ``x0`` to every point of ``xs`` (either side of x0).

    Returns an array of states, one row per entry of ``xs`` in input order.
    Successive targets are reached by chaining fixed-step RK4 segments so
    each segment keeps ``h * rate <= 1/per_unit``.
    """
    xs = np.asarray(xs, dtype=float)
    out = np.empty((len(xs),) + np.shape(y0))
    for direction in (1, -1):
        idx = [i for i in np.argsort(xs * direction) if (xs[i] - x0) * direction >= 0]
        y, t = np.array(y0, dtype=float), float(x0)
        for i in idx:
            target = float(xs[i])
            y = rk4_path(rhs, y, t, target, steps_for(target - t, rate, per_unit, minimum=1))
            t = target
            out[i] = y
    return out
