"""Permutations over {0, ..., n-1}, pointer chasing and fixed-width pointer codes.

Indices are 0-based everywhere in the package. A permutation stores its image
table, so ``pi(k) == pi.image[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np


@dataclass(frozen=True, slots=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self) -> None:
        image = tuple(int(k) for k in self.image)
        if not image:
            raise ValueError("permutation must act on n >= 1 points")
        if sorted(image) != list(range(len(image))):
            raise ValueError(f"not a bijection on [0, {len(image)}): {image}")
        object.__setattr__(self, "image", image)

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, k: int) -> int:
        return self.image[k]

    def __matmul__(self, other: "Permutation") -> "Permutation":
        """Composition ``self @ other`` maps k to ``self(other(k))``."""
        if other.n != self.n:
            raise ValueError("cannot compose permutations of different sizes")
        return Permutation._trusted(tuple(self.image[k] for k in other.image))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def _trusted(cls, image: tuple[int, ...]) -> "Permutation":
        # skips validation; only for images built here from a known bijection
        p = object.__new__(cls)
        object.__setattr__(p, "image", image)
        return p

    def __repr__(self) -> str:
        return f"Permutation{self.image}"


def invert(pi: Permutation) -> Permutation:
    inv = [0] * pi.n
    for k, v in enumerate(pi.image):
        inv[v] = k
    return Permutation._trusted(tuple(inv))


def chase(perms: Sequence[Permutation], i0: int) -> int:
    """Follow ``i0`` through ``perms[0]``, then ``perms[1]``, and so on.

    An empty sequence returns ``i0`` unchanged.
    """
    if perms:
        n = perms[0].n
        if any(p.n != n for p in perms):
            raise ValueError("all permutations must act on the same n")
        if not 0 <= i0 < n:
            raise ValueError(f"start index {i0} out of range for n={n}")
    elif i0 < 0:
        raise ValueError(f"start index {i0} is negative")
    k = i0
    for p in perms:
        k = p.image[k]
    return k


def random_permutation(n: int, rng: np.random.Generator) -> Permutation:
    """Uniform draw from S_n (numpy's shuffle is Fisher-Yates)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Permutation._trusted(tuple(rng.permutation(n).tolist()))


def random_permutations(n: int, k: int, rng: np.random.Generator) -> list[Permutation]:
    """k independent uniform draws from S_n, shuffled row-wise in one call."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rows = rng.permuted(np.tile(np.arange(n), (k, 1)), axis=1).tolist()
    return [Permutation._trusted(tuple(row)) for row in rows]


def all_permutations(n: int) -> list[Permutation]:
    from itertools import permutations

    return [Permutation(p) for p in permutations(range(n))]


@lru_cache(maxsize=None)
def pointer_width(n: int) -> int:
    """Bits used to send one index in [0, n): ceil(log2 n), but at least 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return max(1, (n - 1).bit_length())


def encode_pointer(value: int, n: int) -> str:
    """Big-endian fixed-width bit string for ``value``."""
    if not 0 <= value < n:
        raise ValueError(f"pointer {value} out of range for n={n}")
    return format(value, f"0{pointer_width(n)}b")


def decode_pointer(bits: str, n: int) -> int:
    if len(bits) != pointer_width(n):
        raise ValueError(f"expected {pointer_width(n)} bits, got {len(bits)}")
    value = int(bits, 2)
    if value >= n:
        raise ValueError(f"decoded pointer {value} out of range for n={n}")
    return value
