from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crglab.permcore import (
    Permutation,
    all_permutations,
    chase,
    decode_pointer,
    encode_pointer,
    invert,
    pointer_width,
    random_permutation,
)
from helpers import chi2_critical, chi2_stat, perm_lists, permutations_of


def test_rejects_non_bijection():
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))
    with pytest.raises(ValueError):
        Permutation(())


def test_chase_identity():
    e = Permutation.identity(5)
    assert chase((e, e, e), 3) == 3


def test_chase_empty():
    assert chase((), 5) == 5


def test_chase_hand_composition():
    p1, p2 = Permutation((1, 2, 0)), Permutation((2, 0, 1))
    assert chase((p1, p2), 0) == 0


def test_chase_errors():
    with pytest.raises(ValueError):
        chase((Permutation((0, 1)), Permutation((0, 1, 2))), 0)
    with pytest.raises(ValueError):
        chase((Permutation((0, 1)),), 2)


def test_invert_examples():
    assert invert(Permutation.identity(4)) == Permutation.identity(4)
    assert invert(Permutation((1, 2, 0))) == Permutation((2, 0, 1))
    assert Permutation((2, 0, 1)) @ Permutation((1, 2, 0)) == Permutation.identity(3)


def test_invert_involution_on_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = random_permutation(int(rng.integers(1, 12)), rng)
        assert invert(invert(p)) == p


@given(st.integers(1, 7).flatmap(permutations_of))
def test_invert_composes_to_identity(p):
    assert invert(p) @ p == Permutation.identity(p.n)
    assert p @ invert(p) == Permutation.identity(p.n)


@given(perm_lists(), st.data())
def test_chase_split_consistency(nl, data):
    n, perms = nl
    i0 = data.draw(st.integers(0, n - 1))
    k = data.draw(st.integers(0, len(perms)))
    assert chase(perms, i0) == chase(perms[k:], chase(perms[:k], i0))


@given(perm_lists(), st.data())
def test_chase_reverses_through_inverses(nl, data):
    n, perms = nl
    i0 = data.draw(st.integers(0, n - 1))
    back = [invert(p) for p in reversed(perms)]
    assert chase(back, chase(perms, i0)) == i0


@given(st.integers(1, 6).flatmap(permutations_of), st.data())
def test_chase_single(p, data):
    i = data.draw(st.integers(0, p.n - 1))
    assert chase((p,), i) == p(i)


def test_random_permutation_n1():
    rng = np.random.default_rng(0)
    assert all(random_permutation(1, rng) == Permutation((0,)) for _ in range(20))
    with pytest.raises(ValueError):
        random_permutation(0, rng)


def test_random_permutation_n2_frequencies():
    rng = np.random.default_rng(1)
    counts = Counter(random_permutation(2, rng).image for _ in range(10_000))
    for image in [(0, 1), (1, 0)]:
        assert counts[image] / 10_000 == pytest.approx(0.5, abs=0.02)


def test_random_permutation_n3_chi_square():
    rng = np.random.default_rng(2)
    draws = 60_000
    counts = Counter(random_permutation(3, rng).image for _ in range(draws))
    cells = [p.image for p in all_permutations(3)]
    assert chi2_stat([counts[c] for c in cells], [draws / 6] * 6) < chi2_critical(5)


@pytest.mark.parametrize("n,width", [(1, 1), (2, 1), (3, 2), (4, 2), (5, 3), (8, 3), (9, 4), (1024, 10)])
def test_pointer_width(n, width):
    assert pointer_width(n) == width


@given(st.integers(1, 300), st.data())
def test_pointer_roundtrip(n, data):
    v = data.draw(st.integers(0, n - 1))
    bits = encode_pointer(v, n)
    assert len(bits) == pointer_width(n)
    assert decode_pointer(bits, n) == v


def test_pointer_big_endian_and_errors():
    assert encode_pointer(1, 4) == "01"
    assert encode_pointer(2, 5) == "010"
    with pytest.raises(ValueError):
        encode_pointer(4, 4)
    with pytest.raises(ValueError):
        decode_pointer("11", 3)
    with pytest.raises(ValueError):
        decode_pointer("1", 4)
