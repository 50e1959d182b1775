"""Representations of a matrix-valued function ``C(x)``.

Three forms are supported:

* :class:`Polynomial` -- ``sum_j coeffs[j] x**j``, exact when the
  coefficients are exact (coefficients may also be vectors, which is how the
  forcing term ``f(x)`` is stored);
* :class:`ConjugatedExponential` -- ``e^{xA} C0 e^{-xA}``;
* :class:`Sampled` -- a callback evaluated on a declared working interval,
  with finite-difference derivatives unless an exact one is supplied.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import _linalg as la
from ._linalg import as_float, is_exact
from .matcore import commutator, conj_exp, nilpotency_index

FD_STEP = 1e-5
DEFAULT_GRID = 101


def chebyshev_grid(interval: tuple[float, float], n: int = DEFAULT_GRID) -> np.ndarray:
    """Chebyshev-Lobatto points on ``interval``, ascending, endpoints included."""
    a, b = (float(v) for v in interval)
    if not a < b:
        raise ValueError(f"degenerate interval {interval}")
    if n < 2:
        return np.array([(a + b) / 2])
    k = np.arange(n)
    x = (a + b) / 2 - (b - a) / 2 * np.cos(np.pi * k / (n - 1))
    x[0], x[-1] = a, b
    return x


class MatrixFunction:
    """Common interface: ``F(x)``, ``F.derivative(x)``, ``F.m``, ``F.exact``."""

    m: int

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def exact(self) -> bool:
        return False

    @property
    def interval(self) -> tuple[float, float] | None:
        return None

    def trace_at(self, x):
        return la.trace(self(x))


def _is_rational(x) -> bool:
    return isinstance(x, (int, np.integer, Fraction)) and not isinstance(x, bool)


@dataclass(eq=False)
class Polynomial(MatrixFunction):
    coeffs: list[np.ndarray]

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("polynomial needs at least one coefficient")
        self.coeffs = [np.asarray(c) for c in self.coeffs]
        shape = self.coeffs[0].shape
        if any(c.shape != shape for c in self.coeffs):
            raise ValueError("coefficient shapes differ")
        if not all(is_exact(c) for c in self.coeffs):
            self.coeffs = [as_float(c) for c in self.coeffs]

    @classmethod
    def constant(cls, C) -> "Polynomial":
        return cls([np.asarray(C)])

    @property
    def m(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def exact(self) -> bool:
        return is_exact(self.coeffs[0])

    @property
    def degree(self) -> int:
        """Degree after dropping trailing zero coefficients (-1 for zero)."""
        for j in range(len(self.coeffs) - 1, -1, -1):
            if not la.is_zero(self.coeffs[j]):
                return j
        return -1

    def _coerce_x(self, x):
        if self.exact and _is_rational(x):
            return Fraction(x)
        return float(x)

    def __call__(self, x) -> np.ndarray:
        x = self._coerce_x(x)
        cs = self.coeffs if (self.exact and isinstance(x, Fraction)) else [as_float(c) for c in self.coeffs]
        out = cs[-1].copy()
        for c in reversed(cs[:-1]):
            out = out * x + c
        return out

    def deriv(self) -> "Polynomial":
        if len(self.coeffs) == 1:
            return Polynomial([self.coeffs[0] * 0])
        return Polynomial([self.coeffs[j] * j for j in range(1, len(self.coeffs))])

    def derivative(self, x) -> np.ndarray:
        return self.deriv()(x)


@dataclass(eq=False)
class ConjugatedExponential(MatrixFunction):
    """``C(x) = e^{xA} C0 e^{-xA}``; exact whenever A is exact and nilpotent."""

    A: np.ndarray
    C0: np.ndarray

    def __post_init__(self):
        self.A, self.C0 = la.unify(np.asarray(self.A), np.asarray(self.C0))
        if self.A.shape != self.C0.shape or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("A and C0 must be square of equal size")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def exact(self) -> bool:
        return is_exact(self.A) and nilpotency_index(self.A) is not None

    def __call__(self, x) -> np.ndarray:
        if self.exact and _is_rational(x):
            return conj_exp(self.A, self.C0, Fraction(x))
        return conj_exp(as_float(self.A), as_float(self.C0), float(x))

    def derivative(self, x) -> np.ndarray:
        C = self(x)
        A = self.A if is_exact(C) else as_float(self.A)
        return commutator(A, C)

    def as_polynomial(self) -> Polynomial:
        """Exact polynomial expansion; requires an exact nilpotent A."""
        k = nilpotency_index(self.A) if is_exact(self.A) else None
        if k is None:
            raise ValueError("polynomial expansion requires an exact nilpotent A")
        # e^{xA} = sum_j x^j A^j / j!,  e^{-xA} = sum_j (-x)^j A^j / j!
        powers = [la.eye(self.m)]
        for _ in range(1, k):
            powers.append(powers[-1] @ self.A)
        fact = [Fraction(1)]
        for j in range(1, k):
            fact.append(fact[-1] * j)
        deg = 2 * (k - 1)
        coeffs = [la.zeros((self.m, self.m)) for _ in range(deg + 1)]
        for i in range(k):
            left = powers[i] @ self.C0
            for j in range(k):
                coeffs[i + j] = coeffs[i + j] + left @ powers[j] * (Fraction((-1) ** j) / (fact[i] * fact[j]))
        p = Polynomial(coeffs)
        d = max(p.degree, 0)
        return Polynomial(p.coeffs[: d + 1])


@dataclass(eq=False)
class Sampled(MatrixFunction):
    """A matrix function known through a callback on a working interval.

    ``grid`` is the sample grid used by every residual check (default: 101
    Chebyshev points).  Without ``dfunc`` the derivative is a central
    difference with step ``FD_STEP``.
    """

    func: Callable[[float], np.ndarray]
    bounds: tuple[float, float]
    grid: np.ndarray | None = None
    dfunc: Callable[[float], np.ndarray] | None = None
    _m: int | None = field(default=None, repr=False)

    def __post_init__(self):
        a, b = (float(v) for v in self.bounds)
        if not a < b:
            raise ValueError(f"degenerate interval {self.bounds}")
        self.bounds = (a, b)
        if self.grid is None:
            self.grid = chebyshev_grid(self.bounds)
        self.grid = np.asarray(self.grid, dtype=float)

    @classmethod
    def from_samples(cls, xs: Sequence[float], values: Sequence[np.ndarray]) -> "Sampled":
        """Cubic-spline interpolant through tabulated matrices."""
        xs = np.asarray(xs, dtype=float)
        order = np.argsort(xs)
        xs = xs[order]
        vals = np.stack([as_float(values[i]) for i in order])
        if len(xs) < 4:
            raise ValueError("at least 4 samples are required")
        spline = CubicSpline(xs, vals, axis=0)
        dspline = spline.derivative()
        return cls(lambda t: spline(float(t)), (xs[0], xs[-1]), grid=xs, dfunc=lambda t: dspline(float(t)))

    @property
    def m(self) -> int:
        if self._m is None:
            self._m = np.asarray(self.func(self.grid[len(self.grid) // 2])).shape[0]
        return self._m

    @property
    def interval(self) -> tuple[float, float]:
        return self.bounds

    def __call__(self, x) -> np.ndarray:
        return as_float(np.asarray(self.func(float(x))))

    def derivative(self, x) -> np.ndarray:
        x = float(x)
        if self.dfunc is not None:
            return as_float(np.asarray(self.dfunc(x)))
        h = FD_STEP
        return (self(x + h) - self(x - h)) / (2 * h)

    def samples(self) -> list[np.ndarray]:
        return [self(x) for x in self.grid]
