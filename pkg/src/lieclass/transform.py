"""Equivalence transformations of linear second-order systems.

The pipeline brings ``y'' = B(x) y' + C(x) y + f(x)`` to the canonical form
``y'' = C(x) y`` with ``tr C = 0``:

1. :func:`remove_inhomogeneity` shifts by a particular solution;
2. :func:`remove_first_derivative` substitutes ``y = H(x) y~`` with
   ``2H' = BH``, giving ``C~ = H^{-1} (C + B^2/4 - B'/2) H``;
3. :func:`trace_normalize` applies ``x~ = phi(x)``, ``y~ = psi(x) y`` with
   ``rho = 1/psi`` solving ``rho'' = (tr C / m) rho``.

Changes of the independent variable act on the L3 part of symmetry
generators; :func:`transform_generator_coords` gives that action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import _linalg as la
from ._linalg import as_float, is_exact
from .io import SchemaError, matrix_from_json, mfun_from_json, mfun_to_json, matrix_to_json, SCHEMA
from .matcore import DEFAULT_TOL, IntegrationError, Tolerance, commutator, mat_exp, rk4_to_points
from .mfun import ConjugatedExponential, MatrixFunction, Polynomial, Sampled, chebyshev_grid

DEFAULT_INTERVAL = (-1.0, 1.0)
FINE_GRID = 2001


class DomainError(ValueError):
    """A change of variables is singular inside the working interval."""


def anchor(interval: tuple[float, float]) -> float:
    """Base point: 0 when inside the interval, the midpoint otherwise."""
    a, b = interval
    return 0.0 if a <= 0.0 <= b else (a + b) / 2


def _interval_of(*funcs, default=DEFAULT_INTERVAL) -> tuple[float, float]:
    for F in funcs:
        iv = getattr(F, "interval", None)
        if iv is not None:
            return iv
    return default


@dataclass(eq=False)
class RawSystem:
    """``y'' = B(x) y' + C(x) y + f(x)``; ``B`` and ``f`` may be None (zero)."""

    m: int
    C: MatrixFunction
    B: MatrixFunction | None = None
    f: MatrixFunction | Callable | None = None
    interval: tuple[float, float] = DEFAULT_INTERVAL
    particular: Callable | None = None


@dataclass(eq=False)
class CanonicalSystem:
    """``y'' = C(x) y``.

    ``H`` (when set) maps back to the original unknowns: ``y = H(x) y~``.
    """

    m: int
    C: MatrixFunction
    trace_normalized: bool = False
    interval: tuple[float, float] = DEFAULT_INTERVAL
    H: Callable | None = None

    def trace_residual(self, tol: Tolerance = DEFAULT_TOL) -> float:
        """Largest ``|tr C(x)|`` over the working grid (exact 0 when provably zero)."""
        z = trace_is_zero(self.C)
        if z is True:
            return 0.0
        return max(abs(float(la.trace(as_float(self.C(x))))) for x in chebyshev_grid(self.interval))


# ---------------------------------------------------------------------------
# point changes x~ = phi(x), y~ = psi(x) y


@dataclass(eq=False)
class PointChange:
    """A change ``x~ = phi(x)``, ``y~ = psi(x) y`` with its derivatives.

    ``rho_ratio`` is ``rho''/rho`` for ``rho = 1/psi``; when omitted it is
    derived from the psi derivatives.  ``rho_ratio_prime`` enables an exact
    derivative of the transformed coefficient matrix.
    """

    name: str
    phi: Callable[[float], float]
    dphi: Callable[[float], float]
    d2phi: Callable[[float], float]
    psi: Callable[[float], float]
    dpsi: Callable[[float], float]
    d2psi: Callable[[float], float]
    phi_inv: Callable[[float], float]
    rho_ratio: Callable[[float], float] | None = None
    rho_ratio_prime: Callable[[float], float] | None = None
    params: dict = field(default_factory=dict)

    @property
    def rho(self) -> Callable[[float], float]:
        return lambda x: 1.0 / self.psi(x)

    def ratio(self, x: float) -> float:
        if self.rho_ratio is not None:
            return self.rho_ratio(x)
        p, dp, d2p = self.psi(x), self.dpsi(x), self.d2psi(x)
        return -d2p / p + 2 * dp * dp / (p * p)

    def compatibility_residual(self, x: float) -> float:
        """``phi''/phi' - 2 psi'/psi`` at x."""
        return self.d2phi(x) / self.dphi(x) - 2 * self.dpsi(x) / self.psi(x)

    # constructors -------------------------------------------------------

    @classmethod
    def identity(cls) -> "PointChange":
        one, zero = (lambda x: 1.0), (lambda x: 0.0)
        return cls("identity", lambda x: x, one, zero, one, zero, zero, lambda t: t,
                   rho_ratio=zero, rho_ratio_prime=zero)

    @classmethod
    def involution(cls) -> "PointChange":
        """``phi = psi = 1/x``; its own inverse."""
        zero = lambda x: 0.0
        return cls("involution", lambda x: 1 / x, lambda x: -1 / x**2, lambda x: 2 / x**3,
                   lambda x: 1 / x, lambda x: -1 / x**2, lambda x: 2 / x**3, lambda t: 1 / t,
                   rho_ratio=zero, rho_ratio_prime=zero)

    @classmethod
    def mobius(cls, a: float) -> "PointChange":
        """``phi = x/(1 - a x)``, ``psi = 1/(1 - a x)``; realizes the Aut1 coordinate action."""
        a = float(a)
        zero = lambda x: 0.0
        return cls("mobius", lambda x: x / (1 - a * x), lambda x: 1 / (1 - a * x) ** 2,
                   lambda x: 2 * a / (1 - a * x) ** 3, lambda x: 1 / (1 - a * x),
                   lambda x: a / (1 - a * x) ** 2, lambda x: 2 * a * a / (1 - a * x) ** 3,
                   lambda t: t / (1 + a * t), rho_ratio=zero, rho_ratio_prime=zero, params={"a": a})

    @classmethod
    def shift(cls, a: float) -> "PointChange":
        """``x~ = x - a``; realizes Aut3."""
        a = float(a)
        one, zero = (lambda x: 1.0), (lambda x: 0.0)
        return cls("shift", lambda x: x - a, one, zero, one, zero, zero, lambda t: t + a,
                   rho_ratio=zero, rho_ratio_prime=zero, params={"a": a})

    @classmethod
    def scale(cls, s: float) -> "PointChange":
        """``x~ = s x``; with ``s = e^{-a}`` this realizes Aut2(a)."""
        s = float(s)
        if s == 0:
            raise ValueError("scale factor must be nonzero")
        one, zero = (lambda x: 1.0), (lambda x: 0.0)
        return cls("scale", lambda x: s * x, lambda x: s, zero, one, zero, zero, lambda t: t / s,
                   rho_ratio=zero, rho_ratio_prime=zero, params={"s": s})

    @classmethod
    def log_change(cls) -> "PointChange":
        """``phi = ln x``, ``psi = x^{-1/2}`` (for x > 0)."""
        return cls("log", math.log, lambda x: 1 / x, lambda x: -1 / x**2,
                   lambda x: x**-0.5, lambda x: -0.5 * x**-1.5, lambda x: 0.75 * x**-2.5, math.exp,
                   rho_ratio=lambda x: -0.25 / x**2, rho_ratio_prime=lambda x: 0.5 / x**3)


def check_point_change(chg: PointChange, interval: tuple[float, float], tol: Tolerance = DEFAULT_TOL,
                       n: int = 101) -> None:
    """Raise unless phi is monotone and the compatibility condition holds on the grid."""
    xs = chebyshev_grid(interval, n)
    d = np.array([chg.dphi(x) for x in xs])
    if not (np.all(d > 0) or np.all(d < 0)):
        raise DomainError(f"phi is not monotone on {interval} ({chg.name})")
    for x in xs:
        r = chg.compatibility_residual(x)
        scale = abs(chg.d2phi(x) / chg.dphi(x)) + abs(2 * chg.dpsi(x) / chg.psi(x))
        if not abs(r) <= tol.abs + tol.rel * scale + 1e-12 * scale:
            raise DomainError(f"phi''/phi' = 2 psi'/psi fails at x={x:.6g} ({chg.name}), residual {r:.3g}")


def apply_point_change(Cfn: MatrixFunction, chg: PointChange, interval: tuple[float, float] | None = None,
                       tol: Tolerance = DEFAULT_TOL, grid_size: int | None = None) -> Sampled:
    """Transform ``C`` under ``chg``: ``C~(x~) = phi'^{-2} (C - (rho''/rho) E)``.

    The result is a :class:`Sampled` function over the image of ``interval``.
    """
    interval = interval or _interval_of(Cfn)
    check_point_change(chg, interval, tol)
    m = Cfn.m
    E = np.eye(m)
    a, b = interval
    lo, hi = sorted((chg.phi(a), chg.phi(b)))

    def func(t):
        x = chg.phi_inv(t)
        return (as_float(Cfn(x)) - chg.ratio(x) * E) / chg.dphi(x) ** 2

    def dfunc(t):
        x = chg.phi_inv(t)
        d1, d2 = chg.dphi(x), chg.d2phi(x)
        core = as_float(Cfn(x)) - chg.ratio(x) * E
        dcore = as_float(Cfn.derivative(x)) - chg.rho_ratio_prime(x) * E
        return (-2 * d2 / d1**3 * core + dcore / d1**2) / d1

    grid = chebyshev_grid((lo, hi), grid_size or len(getattr(Cfn, "grid", [])) or 101)
    out = Sampled(func, (lo, hi), grid=grid, dfunc=dfunc if chg.rho_ratio_prime is not None else None)
    out._m = m
    return out


# ---------------------------------------------------------------------------
# trace normalization


def trace_is_zero(Cfn: MatrixFunction, tol: Tolerance = DEFAULT_TOL):
    """True/False when decidable exactly, else a float-grid verdict."""
    if isinstance(Cfn, Polynomial):
        tr = [la.trace(c) for c in Cfn.coeffs]
        if Cfn.exact:
            return all(t == 0 for t in tr)
        return all(abs(float(t)) <= tol.abs for t in tr)
    if isinstance(Cfn, ConjugatedExponential):
        t = la.trace(Cfn.C0)
        return t == 0 if is_exact(Cfn.C0) else abs(float(t)) <= tol.abs
    xs = getattr(Cfn, "grid", None)
    if xs is None:
        xs = chebyshev_grid(DEFAULT_INTERVAL)
    vals = [float(la.trace(as_float(Cfn(x)))) for x in xs]
    scale = max(la.max_abs(as_float(Cfn(x))) for x in xs[:: max(1, len(xs) // 10)])
    return all(abs(v) <= tol.abs + tol.rel * scale for v in vals)


def constant_trace(Cfn: MatrixFunction, interval, tol: Tolerance = DEFAULT_TOL):
    """Return the constant value of ``tr C`` if it is constant, else None."""
    if isinstance(Cfn, Polynomial):
        tr = [la.trace(c) for c in Cfn.coeffs]
        if Cfn.exact:
            return tr[0] if all(t == 0 for t in tr[1:]) else None
        return float(tr[0]) if all(abs(float(t)) <= tol.abs for t in tr[1:]) else None
    if isinstance(Cfn, ConjugatedExponential):
        return la.trace(Cfn.C0)
    xs = chebyshev_grid(interval)
    vals = np.array([float(la.trace(as_float(Cfn(x)))) for x in xs])
    if np.max(np.abs(vals - vals[0])) <= tol.abs + tol.rel * np.max(np.abs(vals)):
        return float(np.mean(vals))
    return None


def _closed_form_change(kappa: float, x0: float, interval) -> PointChange:
    """rho = cosh / cos / 1 solution of rho'' = kappa rho with rho(x0)=1, rho'(x0)=0."""
    a, b = interval
    if kappa > 0:
        s = math.sqrt(kappa)
        sech = lambda x: 1 / math.cosh(s * (x - x0))
        th = lambda x: math.tanh(s * (x - x0))
        return PointChange(
            "trace-cosh",
            lambda x: x0 + th(x) / s,
            lambda x: sech(x) ** 2,
            lambda x: -2 * s * sech(x) ** 2 * th(x),
            sech,
            lambda x: -s * sech(x) * th(x),
            lambda x: s * s * (sech(x) * th(x) ** 2 - sech(x) ** 3),
            lambda t: x0 + math.atanh(s * (t - x0)) / s,
            rho_ratio=lambda x: kappa, rho_ratio_prime=lambda x: 0.0,
            params={"kappa": kappa, "x0": x0},
        )
    s = math.sqrt(-kappa)
    far = max(abs(a - x0), abs(b - x0))
    if s * far >= math.pi / 2:
        zero = x0 + math.copysign(math.pi / (2 * s), (b - x0) if abs(b - x0) >= abs(a - x0) else (a - x0))
        raise DomainError(f"rho = cos({s:.6g}(x - {x0:g})) vanishes at x = {zero:.12g} inside {interval}")
    sec = lambda x: 1 / math.cos(s * (x - x0))
    tn = lambda x: math.tan(s * (x - x0))
    return PointChange(
        "trace-cos",
        lambda x: x0 + tn(x) / s,
        lambda x: sec(x) ** 2,
        lambda x: 2 * s * sec(x) ** 2 * tn(x),
        sec,
        lambda x: s * sec(x) * tn(x),
        lambda x: s * s * (sec(x) * tn(x) ** 2 + sec(x) ** 3),
        lambda t: x0 + math.atan(s * (t - x0)) / s,
        rho_ratio=lambda x: kappa, rho_ratio_prime=lambda x: 0.0,
        params={"kappa": kappa, "x0": x0},
    )


def _numeric_change(Cfn: MatrixFunction, m: int, x0: float, interval, rho0: float, drho0: float) -> PointChange:
    a, b = interval
    xs = np.linspace(a, b, FINE_GRID)
    if x0 not in xs:
        xs = np.sort(np.append(xs, x0))
    t = lambda x: float(la.trace(as_float(Cfn(x)))) / m
    rate = max(1.0, math.sqrt(max(abs(t(x)) for x in xs[:: 50])))

    def rhs(x, s):
        rho, drho, phi = s
        return np.array([drho, t(x) * rho, 1.0 / rho**2])

    states = rk4_to_points(rhs, np.array([rho0, drho0, x0]), x0, xs, rate=rate, per_unit=50)
    rho, drho, phi = states[:, 0], states[:, 1], states[:, 2]
    if np.any(rho <= 0):
        k = int(np.argmax(rho <= 0))
        raise DomainError(f"rho vanishes near x = {xs[k]:.6g} inside {interval}")
    rho_s = CubicHermiteSpline(xs, rho, drho)
    phi_s = CubicHermiteSpline(xs, phi, 1.0 / rho**2)
    lo, hi = phi[0], phi[-1]

    def phi_inv(u):
        if u <= lo:
            return a
        if u >= hi:
            return b
        return brentq(lambda x: float(phi_s(x)) - u, a, b, xtol=1e-15, rtol=4 * la.EPS)

    def d2rho(x):
        return t(x) * float(rho_s(x))

    psi = lambda x: 1.0 / float(rho_s(x))
    dpsi = lambda x: -float(rho_s(x, 1)) / float(rho_s(x)) ** 2
    d2psi = lambda x: (-d2rho(x) / float(rho_s(x)) ** 2 + 2 * float(rho_s(x, 1)) ** 2 / float(rho_s(x)) ** 3)
    dtr = lambda x: float(la.trace(as_float(Cfn.derivative(x)))) / m
    return PointChange(
        "trace-numeric",
        lambda x: float(phi_s(x)),
        lambda x: psi(x) ** 2,
        lambda x: 2 * psi(x) * dpsi(x),
        psi, dpsi, d2psi, phi_inv,
        rho_ratio=t, rho_ratio_prime=dtr,
        params={"x0": x0},
    )


def trace_normalize(sys: CanonicalSystem, rho0: float = 1.0, drho0: float = 0.0,
                    tol: Tolerance = DEFAULT_TOL) -> tuple[CanonicalSystem, PointChange]:
    """Make ``tr C`` vanish.

    Solves ``rho'' = (tr C/m) rho`` with ``rho(x0) = rho0``, ``rho'(x0) = drho0``
    at the anchor ``x0`` (closed form when the trace is constant and the
    default initial data are used), sets ``psi = 1/rho`` and
    ``phi' = psi^2`` with ``phi(x0) = x0``.  The new coefficient is
    ``rho^4 (C - (tr C/m) E)`` evaluated at ``x = phi^{-1}(x~)``.

    Raises
    ------
    DomainError
        When rho vanishes inside the working interval.
    """
    if trace_is_zero(sys.C, tol) is True and rho0 == 1.0 and drho0 == 0.0:
        return (CanonicalSystem(sys.m, sys.C, True, sys.interval, sys.H), PointChange.identity())
    x0 = anchor(sys.interval)
    const = constant_trace(sys.C, sys.interval, tol)
    if const is not None and rho0 == 1.0 and drho0 == 0.0:
        kappa = float(const) / sys.m
        chg = PointChange.identity() if kappa == 0 else _closed_form_change(kappa, x0, sys.interval)
        if kappa == 0:
            return (CanonicalSystem(sys.m, sys.C, True, sys.interval, sys.H), chg)
    else:
        chg = _numeric_change(sys.C, sys.m, x0, sys.interval, rho0, drho0)
    Ct = apply_point_change(sys.C, chg, sys.interval, tol)
    return CanonicalSystem(sys.m, Ct, True, Ct.interval), chg


# ---------------------------------------------------------------------------
# removing f and B


def _vector_value(f, x) -> np.ndarray:
    return as_float(np.asarray(f(x))).reshape(-1)


def _is_zero_function(F) -> bool:
    if F is None:
        return True
    if isinstance(F, Polynomial):
        return all(la.is_zero(c) for c in F.coeffs)
    return False


def _fd_derivs(g, x: float, h: float = 1e-3):
    """First and second derivative by fourth-order central differences."""
    gm2, gm1, g0, gp1, gp2 = (g(x + k * h) for k in (-2, -1, 0, 1, 2))
    d1 = (gm2 - 8 * gm1 + 8 * gp1 - gp2) / (12 * h)
    d2 = (-gm2 + 16 * gm1 - 30 * g0 + 16 * gp1 - gp2) / (12 * h * h)
    return d1, d2


def inhomogeneity_residual(sys: RawSystem, y_p, xs=None) -> float:
    """Max over the grid of ``|y_p'' - B y_p' - C y_p - f|`` (exact zero when provable)."""
    xs = chebyshev_grid(sys.interval) if xs is None else xs
    B = sys.B
    worst = 0.0
    if isinstance(y_p, Polynomial) and y_p.exact and sys.C.exact and (B is None or B.exact) and \
            (sys.f is None or (isinstance(sys.f, Polynomial) and sys.f.exact)):
        # exact substitution at rational points
        d1, d2 = y_p.deriv(), y_p.deriv().deriv()
        for k in range(-3, 4):
            x = Fraction(k, 3)
            r = d2(x) - sys.C(x) @ y_p(x)
            if B is not None:
                r = r - B(x) @ d1(x)
            if sys.f is not None:
                r = r - sys.f(x)
            if not la.is_zero(r):
                return la.max_abs(r)
        return 0.0
    for x in xs:
        if isinstance(y_p, _ChebVector):
            v, d1, d2 = y_p(x), y_p.d1(x), y_p.d2(x)
        elif isinstance(y_p, Polynomial):
            v, d1, d2 = y_p(float(x)), y_p.deriv()(float(x)), y_p.deriv().deriv()(float(x))
        else:
            v = _vector_value(y_p, x)
            d1, d2 = _fd_derivs(lambda t: _vector_value(y_p, t), x)
        r = as_float(d2) - as_float(sys.C(x)) @ as_float(v)
        if B is not None:
            r = r - as_float(B(x)) @ as_float(d1)
        if sys.f is not None:
            r = r - _vector_value(sys.f, x)
        worst = max(worst, la.max_abs(r))
    return worst


@dataclass(eq=False)
class _ChebVector:
    """Vector-valued Chebyshev series on an interval."""

    coef: np.ndarray  # shape (deg+1, m)
    interval: tuple[float, float]

    def _s(self, x):
        a, b = self.interval
        return (2 * x - a - b) / (b - a)

    def __call__(self, x):
        return npcheb.chebval(self._s(float(x)), self.coef)

    def d1(self, x):
        a, b = self.interval
        return npcheb.chebval(self._s(float(x)), npcheb.chebder(self.coef, 1)) * (2 / (b - a))

    def d2(self, x):
        a, b = self.interval
        return npcheb.chebval(self._s(float(x)), npcheb.chebder(self.coef, 2)) * (2 / (b - a)) ** 2


def _collocation_particular(sys: RawSystem, deg: int) -> _ChebVector:
    """Chebyshev collocation for ``y'' - B y' - C y = f`` with zero data at the anchor."""
    m = sys.m
    a, b = sys.interval
    x0 = anchor(sys.interval)
    n = deg + 1
    sc = 2 / (b - a)
    nodes = np.cos(np.pi * np.arange(n - 1) / (n - 2)) if n > 2 else np.array([0.0])
    nodes = np.sort(nodes)
    xs = (a + b) / 2 + (b - a) / 2 * nodes
    eye_n = np.eye(n)
    T0 = npcheb.chebvander(nodes, deg)
    T1 = np.stack([npcheb.chebval(nodes, npcheb.chebder(eye_n[k])) for k in range(n)], axis=1) * sc
    T2 = np.stack([npcheb.chebval(nodes, npcheb.chebder(eye_n[k], 2)) for k in range(n)], axis=1) * sc**2
    s0 = (2 * x0 - a - b) / (b - a)
    v0 = npcheb.chebvander(np.array([s0]), deg)[0]
    v1 = np.array([npcheb.chebval(s0, npcheb.chebder(eye_n[k])) for k in range(n)]) * sc
    rows, rhs = [], []
    for p, x in enumerate(xs):
        Bx = as_float(sys.B(x)) if sys.B is not None else np.zeros((m, m))
        Cx = as_float(sys.C(x))
        fx = _vector_value(sys.f, x)
        # unknown ordering: coef[k, j] -> index k*m + j
        blk = np.kron(T2[p][None, :], np.eye(m)) - np.kron(T1[p][None, :], Bx) - np.kron(T0[p][None, :], Cx)
        rows.append(blk)
        rhs.append(fx)
    rows.append(np.kron(v0[None, :], np.eye(m)))
    rhs.append(np.zeros(m))
    rows.append(np.kron(v1[None, :], np.eye(m)))
    rhs.append(np.zeros(m))
    M = np.vstack(rows)
    r = np.concatenate(rhs)
    sol, *_ = np.linalg.lstsq(M, r, rcond=None)
    if not np.all(np.isfinite(sol)):
        raise IntegrationError("non-finite particular solution")
    return _ChebVector(sol.reshape(n, m), (a, b))


def remove_inhomogeneity(sys: RawSystem, y_p=None, tol: float = 1e-8) -> RawSystem:
    """Return the homogeneous system obtained by ``y = y~ + y_p``.

    Without ``y_p`` a particular solution with zero data at the anchor is
    computed by Chebyshev collocation (degree doubled until the residual on
    the working grid is below ``tol``).  The returned system carries the
    particular solution in ``particular``.

    Raises
    ------
    IntegrationError
        If no particular solution meeting ``tol`` is found.
    """
    if _is_zero_function(sys.f):
        return RawSystem(sys.m, sys.C, sys.B, None, sys.interval, sys.particular)
    if y_p is not None:
        res = inhomogeneity_residual(sys, y_p)
        if res > tol:
            raise IntegrationError(f"supplied particular solution has residual {res:.3g}")
        return RawSystem(sys.m, sys.C, sys.B, None, sys.interval, y_p)
    for deg in (24, 48, 96, 160):
        cand = _collocation_particular(sys, deg)
        res = inhomogeneity_residual(sys, cand)
        if res <= tol:
            return RawSystem(sys.m, sys.C, sys.B, None, sys.interval, cand)
    raise IntegrationError(f"particular solution residual {res:.3g} exceeds {tol:g}")


def _commutes_with_all(B: np.ndarray, C: Polynomial) -> bool:
    return all(la.is_zero(commutator(B, c)) for c in C.coeffs)


def remove_first_derivative(sys: RawSystem, tol: Tolerance = DEFAULT_TOL) -> CanonicalSystem:
    """Eliminate ``B`` with ``y = H(x) y~``, ``2H' = BH``, ``H(x0) = E``.

    Then ``y~'' = H^{-1} (C + B^2/4 - B'/2) H y~``.  Constant ``B`` uses
    ``H = e^{(x - x0) B/2}``; otherwise ``H`` is integrated on a fine grid
    and interpolated with cubic Hermite splines.

    Raises
    ------
    DomainError
        When H becomes singular on the working interval.
    """
    if not _is_zero_function(sys.f):
        raise ValueError("remove the inhomogeneity first")
    m = sys.m
    if _is_zero_function(sys.B):
        return CanonicalSystem(m, sys.C, False, sys.interval)
    B = sys.B
    x0 = anchor(sys.interval)
    a, b = sys.interval
    const_B = isinstance(B, Polynomial) and B.degree <= 0
    if const_B:
        B0 = B.coeffs[0]
        if isinstance(sys.C, Polynomial) and la.common_kind(B0, *sys.C.coeffs) and _commutes_with_all(B0, sys.C):
            # H commutes with C: C~ = C + B^2/4 exactly
            shift = B0 @ B0 * (Fraction(1, 4) if is_exact(B0) else 0.25)
            coeffs = [c.copy() for c in sys.C.coeffs]
            coeffs[0] = coeffs[0] + shift
            Hc = lambda x: mat_exp(as_float(B0) / 2, float(x) - x0)
            return CanonicalSystem(m, Polynomial(coeffs), False, sys.interval, Hc)
        Bf = as_float(B0)
        H = lambda x: mat_exp(Bf / 2, float(x) - x0)
        Hinv = lambda x: mat_exp(-Bf / 2, float(x) - x0)
        Bsq = Bf @ Bf / 4

        def func(x):
            return Hinv(x) @ (as_float(sys.C(x)) + Bsq) @ H(x)

        def dfunc(x):
            # d/dx (H^{-1} K H) = H^{-1} (K' + K B/2 - B/2 K) H with K = C + B^2/4
            K = as_float(sys.C(x)) + Bsq
            dK = as_float(sys.C.derivative(x))
            return Hinv(x) @ (dK + (K @ Bf - Bf @ K) / 2) @ H(x)

        return CanonicalSystem(m, Sampled(func, sys.interval, dfunc=dfunc, _m=m), False, sys.interval, H)

    xs = np.linspace(a, b, FINE_GRID)
    if x0 not in xs:
        xs = np.sort(np.append(xs, x0))
    rate = max(np.linalg.norm(as_float(B(x)), 2) for x in xs[::100]) / 2

    def rhs(x, s):
        return (as_float(B(x)) @ s.reshape(m, m) / 2).ravel()

    Hs = rk4_to_points(rhs, np.eye(m).ravel(), x0, xs, rate=rate, per_unit=50)
    dHs = np.array([(as_float(B(x)) @ h.reshape(m, m) / 2).ravel() for x, h in zip(xs, Hs)])
    dets = np.array([np.linalg.det(h.reshape(m, m)) for h in Hs])
    if np.any(np.abs(dets) < 1e-12):
        k = int(np.argmin(np.abs(dets)))
        raise DomainError(f"H is singular near x = {xs[k]:.6g}")
    spline = CubicHermiteSpline(xs, Hs, dHs, axis=0)
    H = lambda x: spline(float(x)).reshape(m, m)

    def func(x):
        Bx = as_float(B(x))
        K = as_float(sys.C(x)) + Bx @ Bx / 4 - as_float(B.derivative(x)) / 2
        Hx = H(x)
        return np.linalg.solve(Hx, K @ Hx)

    return CanonicalSystem(m, Sampled(func, sys.interval, _m=m), False, sys.interval, H)


def trajectory_deviation(raw: RawSystem, canon: CanonicalSystem, y0, dy0, xs=None) -> float:
    """Compare solutions of the raw system with ``H y~`` from the canonical one.

    Both systems are integrated from the anchor; ``y~(x0) = y0`` and
    ``y~'(x0) = y0' - B(x0) y0 / 2``.  Returns the max deviation on ``xs``.
    """
    m = raw.m
    x0 = anchor(raw.interval)
    xs = chebyshev_grid(raw.interval, 21) if xs is None else np.asarray(xs)
    y0 = as_float(np.asarray(y0)).reshape(-1)
    dy0 = as_float(np.asarray(dy0)).reshape(-1)
    Bf = (lambda x: as_float(raw.B(x))) if raw.B is not None else (lambda x: np.zeros((m, m)))

    def rhs_raw(x, s):
        y, dy = s[:m], s[m:]
        return np.concatenate([dy, Bf(x) @ dy + as_float(raw.C(x)) @ y])

    def rhs_can(x, s):
        y, dy = s[:m], s[m:]
        return np.concatenate([dy, as_float(canon.C(x)) @ y])

    rate = 1 + max(np.linalg.norm(Bf(x)) + np.linalg.norm(as_float(raw.C(x))) for x in xs)
    S = rk4_to_points(rhs_raw, np.concatenate([y0, dy0]), x0, xs, rate=rate)
    T = rk4_to_points(rhs_can, np.concatenate([y0, dy0 - Bf(x0) @ y0 / 2]), x0, xs, rate=rate)
    H = canon.H or (lambda x: np.eye(m))
    return max(la.max_abs(S[i, :m] - H(x) @ T[i, :m]) for i, x in enumerate(xs))


# ---------------------------------------------------------------------------
# action on generator coordinates


def transform_generator_coords(kind: str, a, coords):
    """Coordinates of ``x1 X1 + x2 X2 + x3 X3`` after an automorphism of L3.

    ``kind`` is one of ``"mobius"`` (Aut1: realized by ``phi = x/(1 - a x)``),
    ``"scale"`` (Aut2: ``x1 e^a, x3 e^{-a}``), ``"shift"`` (Aut3: realized by
    ``x~ = x - a``) or ``"involution"`` (``phi = psi = 1/x``; ``a`` ignored).
    Rational input stays exact except for ``scale`` with ``a != 0``.
    """
    x1, x2, x3 = coords
    if kind == "mobius":
        return (x1 + 2 * a * x2 + a * a * x3, x2 + a * x3, x3)
    if kind == "shift":
        return (x1, x2 + a * x1, x3 + 2 * a * x2 + a * a * x1)
    if kind == "scale":
        if a == 0:
            return (x1, x2, x3)
        e = math.exp(float(a))
        return (float(x1) * e, x2, float(x3) / e)
    if kind == "involution":
        return (-x3, -x2, -x1)
    raise ValueError(f"unknown automorphism {kind!r}")


def point_change_for(kind: str, a) -> PointChange:
    """The change of variables whose action on generators is ``kind(a)``."""
    if kind == "mobius":
        return PointChange.mobius(float(a))
    if kind == "shift":
        return PointChange.shift(float(a))
    if kind == "scale":
        return PointChange.scale(math.exp(-float(a)))
    if kind == "involution":
        return PointChange.involution()
    raise ValueError(f"unknown automorphism {kind!r}")


# ---------------------------------------------------------------------------
# JSON


def _vector_fun_from_json(data, m: int, mode: str, path: str) -> Polynomial:
    if not isinstance(data, list) or len(data) != m:
        raise SchemaError(path, f"expected {m} scalar functions")
    comps = []
    for i, comp in enumerate(data):
        if isinstance(comp, dict):
            if comp.get("type") != "polynomial":
                raise SchemaError(f"{path}[{i}]", "scalar functions must be polynomials")
            comp = comp.get("coeffs")
        if not isinstance(comp, list):
            comp = [comp]
        comps.append(matrix_from_json(comp, mode, f"{path}[{i}]"))
    deg = max(len(c) for c in comps)
    exact_ = all(is_exact(c) for c in comps)
    coeffs = []
    for k in range(deg):
        vals = [c[k] if k < len(c) else (Fraction(0) if exact_ else 0.0) for c in comps]
        coeffs.append(np.array(vals, dtype=object if exact_ else float))
    return Polynomial(coeffs)


def system_from_json(data, mode: str = "auto", interval=None):
    """Parse a RawSystem or CanonicalSystem document.

    Returns a :class:`CanonicalSystem` when neither ``B`` nor ``f`` is given.
    """
    if not isinstance(data, dict):
        raise SchemaError("$", "expected an object")
    if "m" not in data or not isinstance(data["m"], int) or data["m"] < 1:
        raise SchemaError("$.m", "expected a positive integer")
    if "C" not in data:
        raise SchemaError("$.C", "missing field")
    m = data["m"]
    if interval is None:
        iv = data.get("interval")
        interval = tuple(float(v) for v in iv) if iv else None
    C = mfun_from_json(data["C"], mode, "$.C")
    if C.m != m:
        raise SchemaError("$.C", f"dimension {C.m} does not match m={m}")
    interval = interval or C.interval or DEFAULT_INTERVAL
    if not interval[0] < interval[1]:
        raise SchemaError("$.interval", "degenerate interval")
    B = mfun_from_json(data["B"], mode, "$.B") if data.get("B") is not None else None
    f = _vector_fun_from_json(data["f"], m, mode, "$.f") if data.get("f") is not None else None
    if B is None and f is None:
        return CanonicalSystem(m, C, bool(data.get("trace_normalized", False)), interval)
    return RawSystem(m, C, B, f, interval)


def system_to_json(sys) -> dict:
    out = {"schema": SCHEMA, "m": sys.m, "C": mfun_to_json(sys.C), "interval": list(sys.interval)}
    if isinstance(sys, RawSystem):
        if sys.B is not None:
            out["B"] = mfun_to_json(sys.B)
        if sys.f is not None:
            f = sys.f
            if not isinstance(f, Polynomial):
                raise TypeError("only polynomial forcing terms serialize")
            out["f"] = [[matrix_to_json(c)[i] for c in f.coeffs] for i in range(sys.m)]
    else:
        out["trace_normalized"] = sys.trace_normalized
    return out
