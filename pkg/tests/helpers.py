"""Shared strategies and small statistics for the test suite."""

import math

import numpy as np
from hypothesis import strategies as st

from crglab.permcore import Permutation
from crglab.table import DistTable


@st.composite
def permutations_of(draw, n):
    return Permutation(tuple(draw(st.permutations(range(n)))))


@st.composite
def perm_lists(draw, max_n=6, max_len=5):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(0, max_len))
    return n, [draw(permutations_of(n)) for _ in range(k)]


@st.composite
def table_pairs(draw, max_m=64, max_w=50):
    """Two tables over a shared universe of M atoms (either may miss some atoms)."""
    m = draw(st.integers(2, max_m))
    w1 = draw(st.lists(st.integers(0, max_w), min_size=m, max_size=m).filter(any))
    w2 = draw(st.lists(st.integers(0, max_w), min_size=m, max_size=m).filter(any))
    return m, DistTable(enumerate(w1)), DistTable(enumerate(w2))


def random_table_pair(rng, m, sparsity=0.3):
    def one():
        while True:
            w = rng.integers(0, 40, size=m)
            w[rng.random(m) < sparsity] = 0
            if w.any():
                return DistTable({k: int(v) for k, v in enumerate(w)})

    return one(), one()


def chi2_critical(df, z=3.0902):
    """Wilson-Hilferty upper quantile; z = 3.0902 is the 0.001 tail."""
    a = 2.0 / (9 * df)
    return df * (1 - a + z * math.sqrt(a)) ** 3


def chi2_stat(observed, expected):
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(((observed - expected) ** 2 / expected).sum())


# Acceptance criteria record (number, title, passed, seconds, note); printed by conftest.
ACCEPTANCE: list[tuple[int, str, bool, float, str]] = []
