"""Dense linear algebra over two scalar kinds.

Exact matrices are numpy ``object`` arrays holding :class:`fractions.Fraction`
entries; float matrices are ordinary ``float64`` arrays.  Every routine here
dispatches on the dtype, so callers never branch on the scalar kind
themselves.  Elimination over the rationals works on plain Python lists,
which is several times faster than element access on object arrays.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

EPS = np.finfo(float).eps


def to_fraction(x) -> Fraction:
    """Convert a scalar to a Fraction.

    Strings use ``"p/q"`` syntax; floats are read through their shortest
    decimal representation, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        if type(x.numerator) is int and type(x.denominator) is int:
            return x
        # numpy integer parts would overflow silently
        return Fraction(int(x.numerator), int(x.denominator))
    if isinstance(x, (bool, np.bool_, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"cannot represent {x!r} exactly")
        return Fraction(repr(float(x)))
    raise TypeError(f"unsupported scalar {x!r}")


def is_exact(M) -> bool:
    return isinstance(M, np.ndarray) and M.dtype == object


def exact(M) -> np.ndarray:
    """Return ``M`` as an object array of Fractions."""
    arr = np.asarray(M, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, v in np.ndenumerate(arr):
        out[idx] = to_fraction(v)
    return out


def as_float(M) -> np.ndarray:
    arr = np.asarray(M)
    if arr.dtype == object:
        return np.array(arr.tolist(), dtype=float).reshape(arr.shape)
    return arr.astype(float)


def like(M, values) -> np.ndarray:
    """Coerce ``values`` to the scalar kind of ``M``."""
    return exact(values) if is_exact(M) else as_float(values)


def common_kind(*mats) -> bool:
    """True when every argument is exact (so results can stay exact)."""
    return all(is_exact(M) for M in mats)


def unify(*mats):
    """Convert all arguments to one scalar kind: exact only if all are exact."""
    if common_kind(*mats):
        return tuple(mats)
    return tuple(as_float(M) for M in mats)


def eye(m: int, exact_: bool = True) -> np.ndarray:
    if exact_:
        out = np.full((m, m), Fraction(0), dtype=object)
        for i in range(m):
            out[i, i] = Fraction(1)
        return out
    return np.eye(m)


def zeros(shape, exact_: bool = True) -> np.ndarray:
    if exact_:
        return np.full(shape, Fraction(0), dtype=object)
    return np.zeros(shape)


def is_zero(M, atol: float = 0.0) -> bool:
    if is_exact(M):
        return all(v == 0 for v in np.asarray(M).flat)
    return bool(np.all(np.abs(M) <= atol))


def max_abs(M) -> float:
    arr = np.asarray(M)
    if arr.size == 0:
        return 0.0
    return float(np.max(np.abs(as_float(arr))))


def trace(M):
    total = M[0, 0] * 0
    for i in range(M.shape[0]):
        total = total + M[i, i]
    return total


def inv(M) -> np.ndarray:
    """Matrix inverse; exact for exact input."""
    if not is_exact(M):
        return np.linalg.inv(M)
    n = M.shape[0]
    aug = np.concatenate([M, eye(n)], axis=1)
    R, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise np.linalg.LinAlgError("singular matrix")
    return R[:, n:]


# ---------------------------------------------------------------------------
# elimination


def _rref_exact(rows: list[list[Fraction]], ncols: int):
    pivots: list[int] = []
    r = 0
    nrows = len(rows)
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if rows[i][c] != 0), None)
        if p is None:
            continue
        rows[r], rows[p] = rows[p], rows[r]
        prow = rows[r]
        inv_p = 1 / prow[c]
        if inv_p != 1:
            prow = [v * inv_p for v in prow]
            rows[r] = prow
        nz = [j for j in range(c, ncols) if prow[j] != 0]
        for i in range(nrows):
            if i == r:
                continue
            f = rows[i][c]
            if f == 0:
                continue
            row = rows[i]
            for j in nz:
                row[j] -= f * prow[j]
        pivots.append(c)
        r += 1
    return rows, pivots


def _rref_float(A: np.ndarray, tol: float):
    A = A.astype(float).copy()
    nrows, ncols = A.shape
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        p = r + int(np.argmax(np.abs(A[r:, c])))
        if abs(A[p, c]) <= tol:
            A[r:, c] = 0.0
            continue
        A[[r, p]] = A[[p, r]]
        A[r] /= A[r, c]
        for i in range(nrows):
            if i != r and A[i, c] != 0.0:
                A[i] -= A[i, c] * A[r]
        pivots.append(c)
        r += 1
    return A, pivots


def rref(M, tol: float | None = None):
    """Reduced row-echelon form.

    Returns ``(R, pivots)``.  Exact input is reduced exactly; float input uses
    partial pivoting and treats entries below ``tol`` (default
    ``max(shape) * eps * max|M|``) as zero.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("rref expects a 2-d array")
    if is_exact(M):
        rows = [[to_fraction(v) for v in row] for row in M.tolist()]
        rows, piv = _rref_exact(rows, M.shape[1])
        R = np.empty(M.shape, dtype=object)
        for i, row in enumerate(rows):
            R[i, :] = row
        return R, piv
    if tol is None:
        tol = max(M.shape) * EPS * max(max_abs(M), 1.0)
    return _rref_float(M, tol)


def float_rank_tol(M: np.ndarray, rank_tol: float | None = None) -> tuple[np.ndarray, float]:
    """Singular values and the absolute threshold used for rank decisions."""
    s = np.linalg.svd(M, compute_uv=False) if M.size else np.zeros(0)
    smax = float(s[0]) if s.size else 0.0
    if rank_tol is None:
        thresh = max(M.shape) * EPS * smax
    else:
        thresh = rank_tol * smax
    return s, thresh


def rank(M, rank_tol: float | None = None) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    if is_exact(M):
        return len(rref(M)[1])
    s, thresh = float_rank_tol(M.astype(float), rank_tol)
    return int(np.sum(s > thresh))


def nullspace(M, rank_tol: float | None = None) -> list[np.ndarray]:
    """Basis of ``{v : M v = 0}``.

    The exact basis is the standard one read off the RREF (one vector per free
    column, with a 1 in that column).  The float basis comes from the SVD and is
    then brought to reduced echelon form so the output is canonical too.
    ``rank_tol`` is relative to the largest singular value; by default the
    threshold is ``max(shape) * eps * sigma_max``.
    """
    M = np.asarray(M)
    n = M.shape[1]
    if is_exact(M):
        if M.shape[0] == 0:
            return [_unit(n, j) for j in range(n)]
        R, piv = rref(M)
        free = [j for j in range(n) if j not in piv]
        basis = []
        for f in free:
            v = zeros(n)
            v[f] = Fraction(1)
            for i, p in enumerate(piv):
                v[p] = -R[i, f]
            basis.append(v)
        return basis
    M = M.astype(float)
    if M.shape[0] == 0:
        return [np.eye(n)[j] for j in range(n)]
    _, s, vt = np.linalg.svd(M)
    smax = float(s[0]) if s.size else 0.0
    thresh = (max(M.shape) * EPS * smax) if rank_tol is None else rank_tol * smax
    r = int(np.sum(s > thresh))
    N = vt[r:]
    if N.shape[0] == 0:
        return []
    R, _ = _rref_float(N, tol=1e-12)
    return [row for row in R if np.max(np.abs(row)) > 1e-12]


def _unit(n: int, j: int) -> np.ndarray:
    v = zeros(n)
    v[j] = Fraction(1)
    return v


def solve(M, b, rank_tol: float | None = None):
    """One solution of ``M x = b`` or ``None`` when the system is inconsistent.

    Exact solutions set every free variable to zero.
    """
    M = np.asarray(M)
    b = np.asarray(b).reshape(-1)
    if is_exact(M) and is_exact(b):
        aug = np.concatenate([M, b.reshape(-1, 1)], axis=1)
        R, piv = rref(aug)
        n = M.shape[1]
        if n in piv:
            return None
        x = zeros(n)
        for i, p in enumerate(piv):
            x[p] = R[i, n]
        return x
    M = as_float(M)
    b = as_float(b)
    x, *_ = np.linalg.lstsq(M, b, rcond=None)
    res = np.linalg.norm(M @ x - b)
    scale = max(np.linalg.norm(b), np.linalg.norm(M) * np.linalg.norm(x), 1.0)
    tol = rank_tol if rank_tol is not None else 1e-10
    if res > tol * scale:
        return None
    return x


def span_matrix(vectors: Sequence[np.ndarray]) -> np.ndarray:
    vecs = [np.asarray(v).reshape(-1) for v in vectors]
    if all(is_exact(v) for v in vecs):
        return np.array(vecs, dtype=object).reshape(len(vecs), -1)
    return np.array([as_float(v) for v in vecs], dtype=float).reshape(len(vecs), -1)


def in_span(vectors: Sequence[np.ndarray], v, rank_tol: float | None = None) -> bool:
    v = np.asarray(v).reshape(-1)
    if not vectors:
        return is_zero(v, atol=0.0 if is_exact(v) else 1e-9)
    S = span_matrix(list(vectors))
    return rank(np.vstack(unify(S, v.reshape(1, -1))), rank_tol) == rank(S, rank_tol)


def same_span(U: Sequence[np.ndarray], V: Sequence[np.ndarray], rank_tol: float | None = None) -> bool:
    if not U or not V:
        return len(U) == len(V) == 0 or (
            all(is_zero(np.asarray(u), 1e-9) for u in U) and all(is_zero(np.asarray(w), 1e-9) for w in V)
        )
    SU, SV = unify(span_matrix(U), span_matrix(V))
    ru, rv = rank(SU, rank_tol), rank(SV, rank_tol)
    return ru == rv == rank(np.vstack([SU, SV]), rank_tol)


def independent_subset(vectors: Iterable[np.ndarray], rank_tol: float | None = None) -> list[np.ndarray]:
    """Greedy maximal independent subset, preserving order."""
    kept: list[np.ndarray] = []
    for v in vectors:
        if in_span(kept, v, rank_tol):
            continue
        kept.append(v)
    return kept
