from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings, strategies as st

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def Q(rows):
    """Exact matrix from nested ints/strings."""
    return np.array([[Fraction(v) for v in r] for r in rows], dtype=object)


def unit(m, i, j):
    M = np.array([[Fraction(0)] * m for _ in range(m)], dtype=object)
    M[i, j] = Fraction(1)
    return M


def random_rational(rng, m, lo=-3, hi=3, den=(1, 2, 3)):
    vals = [[Fraction(int(rng.integers(lo, hi + 1)), int(rng.choice(den))) for _ in range(m)] for _ in range(m)]
    return np.array(vals, dtype=object)


def random_nilpotent(rng, m):
    """Strictly lower-triangular matrix conjugated by a unimodular integer matrix."""
    N = random_rational(rng, m)
    for i in range(m):
        for j in range(i, m):
            N[i, j] = Fraction(0)
    P = np.array([[Fraction(int(i == j)) for j in range(m)] for i in range(m)], dtype=object)
    for i in range(m - 1):
        P[i, i + 1] = Fraction(int(rng.integers(-2, 3)))
    Pinv = np.array([[Fraction(int(v)) for v in r] for r in np.round(np.linalg.inv(P.astype(float))).astype(int)],
                    dtype=object)
    return P.dot(N).dot(Pinv)


small_fraction = st.builds(Fraction, st.integers(-4, 4), st.sampled_from([1, 2, 3]))


def exact_matrices(m):
    return st.lists(st.lists(small_fraction, min_size=m, max_size=m), min_size=m, max_size=m).map(
        lambda rows: np.array(rows, dtype=object))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
