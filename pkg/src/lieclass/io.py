"""JSON encoding of scalars, matrices and matrix functions.

Exact scalars are written as ``"p/q"`` strings (integers as ``"p"``), floats
as JSON numbers.  Matrices are arrays of rows.  Matrix functions use::

    {"type": "polynomial", "coeffs": [Matrix, ...]}
    {"type": "conj_exp", "A": Matrix, "C0": Matrix}
    {"type": "samples", "xs": [...], "values": [Matrix, ...]}
"""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np

from . import _linalg as la
from .mfun import ConjugatedExponential, MatrixFunction, Polynomial, Sampled

SCHEMA = "lieclass-v1"
MODES = ("auto", "exact", "float")


class SchemaError(ValueError):
    """Malformed input document; ``path`` locates the offending node."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


def scalar_to_json(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, complex):
        return [float(v.real), float(v.imag)]
    return str(v)


def _is_exact_token(v) -> bool:
    return isinstance(v, str) or (isinstance(v, int) and not isinstance(v, bool))


def scalar_from_json(v, mode: str = "auto", path: str = "$"):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise SchemaError(path, f"expected a number or 'p/q' string, got {v!r}")
    try:
        if mode == "float":
            return float(Fraction(v)) if isinstance(v, str) else float(v)
        if mode == "exact" or _is_exact_token(v):
            return la.to_fraction(v)
        return float(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaError(path, str(exc)) from None


def matrix_to_json(M) -> list:
    M = np.asarray(M)
    if M.ndim == 1:
        return [scalar_to_json(v) for v in M.tolist()]
    return [[scalar_to_json(v) for v in row] for row in M.tolist()]


def _leaves(data):
    if isinstance(data, list):
        for item in data:
            yield from _leaves(item)
    else:
        yield data


def matrix_from_json(data, mode: str = "auto", path: str = "$") -> np.ndarray:
    """Parse a matrix (or vector).  In ``auto`` mode any float entry makes it float."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(data, list) or not data:
        raise SchemaError(path, "expected a non-empty array")
    if isinstance(data[0], list):
        width = len(data[0])
        for i, row in enumerate(data):
            if not isinstance(row, list) or len(row) != width:
                raise SchemaError(f"{path}[{i}]", "ragged matrix row")
    if mode == "auto":
        mode = "exact" if all(_is_exact_token(v) for v in _leaves(data)) else "float"
    if isinstance(data[0], list):
        vals = [[scalar_from_json(v, mode, f"{path}[{i}][{j}]") for j, v in enumerate(row)]
                for i, row in enumerate(data)]
    else:
        vals = [scalar_from_json(v, mode, f"{path}[{i}]") for i, v in enumerate(data)]
    if mode == "exact":
        return np.array(vals, dtype=object)
    return np.array(vals, dtype=float)


def mfun_to_json(F: MatrixFunction) -> dict:
    if isinstance(F, Polynomial):
        return {"type": "polynomial", "coeffs": [matrix_to_json(c) for c in F.coeffs]}
    if isinstance(F, ConjugatedExponential):
        return {"type": "conj_exp", "A": matrix_to_json(F.A), "C0": matrix_to_json(F.C0)}
    if isinstance(F, Sampled):
        return {"type": "samples", "xs": [float(x) for x in F.grid],
                "values": [matrix_to_json(v) for v in F.samples()]}
    raise TypeError(f"cannot serialize {type(F).__name__}")


def mfun_from_json(data, mode: str = "auto", path: str = "$") -> MatrixFunction:
    if isinstance(data, list):
        # bare matrix: a constant function
        return Polynomial.constant(matrix_from_json(data, mode, path))
    if not isinstance(data, dict) or "type" not in data:
        raise SchemaError(path, "expected a matrix-function object with a 'type' field")
    kind = data["type"]
    try:
        if kind == "polynomial":
            coeffs = data["coeffs"]
            if not isinstance(coeffs, list) or not coeffs:
                raise SchemaError(f"{path}.coeffs", "expected a non-empty list")
            mats = [matrix_from_json(c, mode, f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)]
            return Polynomial(mats)
        if kind == "conj_exp":
            return ConjugatedExponential(matrix_from_json(data["A"], mode, f"{path}.A"),
                                         matrix_from_json(data["C0"], mode, f"{path}.C0"))
        if kind == "samples":
            xs = data["xs"]
            vals = [matrix_from_json(v, "float", f"{path}.values[{i}]") for i, v in enumerate(data["values"])]
            if len(xs) != len(vals):
                raise SchemaError(path, "xs and values differ in length")
            return Sampled.from_samples([float(x) for x in xs], vals)
    except KeyError as exc:
        raise SchemaError(path, f"missing field {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(path, str(exc)) from None
    raise SchemaError(f"{path}.type", f"unknown matrix-function type {kind!r}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return matrix_to_json(o)
    if isinstance(o, (Fraction, np.integer, np.floating, complex)):
        return scalar_to_json(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
