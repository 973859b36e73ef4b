"""Samplers and exact enumerators for the correlated input distributions.

Families
--------
``pcs``       pointer chasing source: blocks at the chased index agree.
``product``   product of the two pcs marginals (everything independent).
``mid``       hybrid: blocks agree at an independent uniform index.
``pv-yes``    pointer verification, target equals the chased start.
``pv-no``     pointer verification, all coordinates uniform.
``pv-mix``    fair mixture of ``pv-yes`` and ``pv-no``.
``disj-yes``  uniform pair of n/4-subsets meeting in exactly one point.
``disj-no``   uniform pair of disjoint n/4-subsets.

Permutations pi_1..pi_r are split by parity: odd-numbered ones (pi_1, pi_3, ...)
belong to Alice, even-numbered ones to Bob, who also holds the start pointer.
Blocks are L-bit integers.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceeded
from .permcore import Permutation, all_permutations, chase, random_permutations
from .table import DistTable

DEFAULT_CAP = 10**7
MAX_ENUM_BLOCK_BITS = 2

FAMILIES = ("pcs", "product", "mid", "pv-yes", "pv-no", "pv-mix", "disj-yes", "disj-no")


def default_cap() -> int:
    env = os.environ.get("CRGLAB_CAP")
    return int(env) if env else DEFAULT_CAP


def split_perms(perms: Sequence[Permutation]) -> tuple[tuple[Permutation, ...], tuple[Permutation, ...]]:
    """(pi_1, pi_2, ..., pi_r) -> ((pi_1, pi_3, ...), (pi_2, pi_4, ...))."""
    return tuple(perms[0::2]), tuple(perms[1::2])


def interleave(odd: Sequence[Permutation], even: Sequence[Permutation]) -> tuple[Permutation, ...]:
    if not (len(odd) == len(even) or len(odd) == len(even) + 1):
        raise ValueError("odd/even permutation counts are inconsistent")
    out: list[Permutation] = []
    for k, p in enumerate(odd):
        out.append(p)
        if k < len(even):
            out.append(even[k])
    return tuple(out)


def _perm_bytes(perms: Sequence[Permutation], n: int) -> bytes:
    width = 1 if n <= 256 else 2
    return b"".join(k.to_bytes(width, "big") for p in perms for k in p.image)


def _block_bytes(blocks: Sequence[int], L: int) -> bytes:
    width = (L + 7) // 8
    return b"".join(b.to_bytes(width, "big") for b in blocks)


def _read_perms(buf: bytes, pos: int, count: int, n: int) -> tuple[tuple[Permutation, ...], int]:
    width = 1 if n <= 256 else 2
    perms = []
    for _ in range(count):
        image = tuple(int.from_bytes(buf[pos + width * k: pos + width * (k + 1)], "big") for k in range(n))
        perms.append(Permutation(image))
        pos += width * n
    return tuple(perms), pos


def _read_blocks(buf: bytes, pos: int, count: int, L: int) -> tuple[tuple[int, ...], int]:
    width = (L + 7) // 8
    blocks = tuple(int.from_bytes(buf[pos + width * k: pos + width * (k + 1)], "big") for k in range(count))
    return blocks, pos + width * count


# -- pointer chasing source records ------------------------------------------------


@dataclass(frozen=True, slots=True)
class PcsAlice:
    perms: tuple[Permutation, ...]
    blocks: tuple[int, ...]
    L: int

    @property
    def n(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True, slots=True)
class PcsBob:
    i: int
    perms: tuple[Permutation, ...]
    blocks: tuple[int, ...]
    L: int

    @property
    def n(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True, slots=True)
class PcsSample:
    r: int
    alice: PcsAlice
    bob: PcsBob

    def __post_init__(self) -> None:
        n, L = self.alice.n, self.alice.L
        if self.bob.n != n or self.bob.L != L:
            raise ValueError("Alice and Bob parts disagree on n or L")
        if len(self.alice.perms) != (self.r + 1) // 2 or len(self.bob.perms) != self.r // 2:
            raise ValueError(f"wrong permutation counts for r={self.r}")
        if any(p.n != n for p in self.alice.perms + self.bob.perms):
            raise ValueError("permutation size does not match block count")
        if not 0 <= self.bob.i < n:
            raise ValueError("start pointer out of range")
        bound = 1 << L
        if any(not 0 <= b < bound for b in self.alice.blocks + self.bob.blocks):
            raise ValueError(f"block value does not fit in {L} bits")

    @property
    def n(self) -> int:
        return self.alice.n

    @property
    def L(self) -> int:
        return self.alice.L

    @property
    def perms(self) -> tuple[Permutation, ...]:
        return interleave(self.alice.perms, self.bob.perms)

    @property
    def chased(self) -> int:
        return chase(self.perms, self.bob.i)

    def encode(self) -> bytes:
        n, L = self.n, self.L
        header = b"PCS" + self.r.to_bytes(2, "big") + n.to_bytes(2, "big") + L.to_bytes(2, "big")
        return (
            header
            + _perm_bytes(self.perms, n)
            + self.bob.i.to_bytes(2, "big")
            + _block_bytes(self.alice.blocks, L)
            + _block_bytes(self.bob.blocks, L)
        )

    @classmethod
    def decode(cls, buf: bytes) -> "PcsSample":
        if buf[:3] != b"PCS":
            raise ValueError("not a pointer chasing sample encoding")
        r, n, L = (int.from_bytes(buf[3 + 2 * k: 5 + 2 * k], "big") for k in range(3))
        perms, pos = _read_perms(buf, 9, r, n)
        i = int.from_bytes(buf[pos: pos + 2], "big")
        a, pos = _read_blocks(buf, pos + 2, n, L)
        b, pos = _read_blocks(buf, pos, n, L)
        odd, even = split_perms(perms)
        return cls(r, PcsAlice(odd, a, L), PcsBob(i, even, b, L))


# -- pointer verification records ------------------------------------------------


@dataclass(frozen=True, slots=True)
class PvAlice:
    perms: tuple[Permutation, ...]


@dataclass(frozen=True, slots=True)
class PvBob:
    i0: int
    j0: int
    perms: tuple[Permutation, ...]


@dataclass(frozen=True, slots=True)
class PvInstance:
    """Pointer verification input. ``label`` is the truth bit 1[chase(pi, i0) == j0] or None."""

    r: int
    alice: PvAlice
    bob: PvBob
    label: bool | None = None

    def __post_init__(self) -> None:
        if self.r % 2 == 0:
            raise ValueError("pointer verification needs odd r")
        if len(self.alice.perms) != (self.r + 1) // 2 or len(self.bob.perms) != self.r // 2:
            raise ValueError(f"wrong permutation counts for r={self.r}")
        n = self.alice.perms[0].n
        if any(p.n != n for p in self.alice.perms + self.bob.perms):
            raise ValueError("all permutations must act on the same n")
        if not (0 <= self.bob.i0 < n and 0 <= self.bob.j0 < n):
            raise ValueError("i0/j0 out of range")
        if self.label is not None and bool(self.label) != self.truth:
            raise ValueError("label disagrees with the chased pointer")

    @property
    def n(self) -> int:
        return self.alice.perms[0].n

    @property
    def perms(self) -> tuple[Permutation, ...]:
        return interleave(self.alice.perms, self.bob.perms)

    @property
    def truth(self) -> bool:
        return chase(self.perms, self.bob.i0) == self.bob.j0

    def labeled(self) -> "PvInstance":
        return PvInstance(self.r, self.alice, self.bob, self.truth)

    def unlabeled(self) -> "PvInstance":
        return PvInstance(self.r, self.alice, self.bob, None)

    def encode(self) -> bytes:
        n = self.n
        tag = 2 if self.label is None else int(self.label)
        return (
            b"PV"
            + self.r.to_bytes(2, "big")
            + n.to_bytes(2, "big")
            + _perm_bytes(self.perms, n)
            + self.bob.i0.to_bytes(2, "big")
            + self.bob.j0.to_bytes(2, "big")
            + bytes([tag])
        )

    @classmethod
    def decode(cls, buf: bytes) -> "PvInstance":
        if buf[:2] != b"PV":
            raise ValueError("not a pointer verification encoding")
        r = int.from_bytes(buf[2:4], "big")
        n = int.from_bytes(buf[4:6], "big")
        perms, pos = _read_perms(buf, 6, r, n)
        i0 = int.from_bytes(buf[pos: pos + 2], "big")
        j0 = int.from_bytes(buf[pos + 2: pos + 4], "big")
        tag = buf[pos + 4]
        odd, even = split_perms(perms)
        return cls(r, PvAlice(odd), PvBob(i0, j0, even), None if tag == 2 else bool(tag))


def make_pv(perms: Sequence[Permutation], i0: int, j0: int, labeled: bool = True) -> PvInstance:
    odd, even = split_perms(perms)
    inst = PvInstance(len(perms), PvAlice(odd), PvBob(i0, j0, even))
    return inst.labeled() if labeled else inst


# -- set disjointness records ------------------------------------------------


@dataclass(frozen=True, slots=True)
class DisjInstance:
    n: int
    u: frozenset[int]
    v: frozenset[int]

    def __post_init__(self) -> None:
        if self.n % 4:
            raise ValueError(f"n={self.n} is not divisible by 4")
        k = self.n // 4
        if len(self.u) != k or len(self.v) != k:
            raise ValueError(f"both sets must have size n/4 = {k}")
        if any(not 0 <= x < self.n for x in self.u | self.v):
            raise ValueError("set element out of range")
        if len(self.u & self.v) > 1:
            raise ValueError("sets may share at most one element")

    @property
    def alice(self) -> frozenset[int]:
        return self.u

    @property
    def bob(self) -> frozenset[int]:
        return self.v

    @property
    def intersecting(self) -> bool:
        return bool(self.u & self.v)

    def encode(self) -> bytes:
        return (
            b"DJ"
            + self.n.to_bytes(2, "big")
            + b"".join(x.to_bytes(2, "big") for x in sorted(self.u))
            + b"".join(x.to_bytes(2, "big") for x in sorted(self.v))
        )


# -- samplers ------------------------------------------------


def random_blocks(L: int, k: int, rng: np.random.Generator) -> list[int]:
    """k independent uniform L-bit blocks from a single draw."""
    nbytes = (L + 7) // 8
    raw = rng.bytes(nbytes * k)
    shift = 8 * nbytes - L
    return [int.from_bytes(raw[m * nbytes:(m + 1) * nbytes], "big") >> shift for m in range(k)]


def _check_positive(**kw: int) -> None:
    for name, v in kw.items():
        if v < 1:
            raise ValueError(f"{name} must be >= 1, got {v}")


def _assemble_pcs(r: int, perms, i: int, a: list[int], b: list[int], L: int) -> PcsSample:
    odd, even = split_perms(perms)
    return PcsSample(r, PcsAlice(odd, tuple(a), L), PcsBob(i, even, tuple(b), L))


def _pcs_parts(r: int, n: int, L: int, rng: np.random.Generator):
    """Start pointer, r permutations and 2n independent blocks (Alice's then Bob's)."""
    _check_positive(r=r, n=n, L=L)
    i = int(rng.integers(n))
    perms = random_permutations(n, r, rng)
    blocks = random_blocks(L, 2 * n, rng)
    return i, perms, blocks[:n], blocks[n:]


def sample_pcs(r: int, n: int, L: int, rng: np.random.Generator) -> PcsSample:
    i, perms, a, b = _pcs_parts(r, n, L, rng)
    j = chase(perms, i)
    b[j] = a[j]
    return _assemble_pcs(r, perms, i, a, b, L)


def sample_pcs_product(r: int, n: int, L: int, rng: np.random.Generator) -> PcsSample:
    i, perms, a, b = _pcs_parts(r, n, L, rng)
    return _assemble_pcs(r, perms, i, a, b, L)


def sample_mid(r: int, n: int, L: int, rng: np.random.Generator) -> PcsSample:
    i, perms, a, b = _pcs_parts(r, n, L, rng)
    j = int(rng.integers(n))
    b[j] = a[j]
    return _assemble_pcs(r, perms, i, a, b, L)


def sample_pcs_batch(r: int, n: int, L: int, count: int, rng: np.random.Generator) -> list[PcsSample]:
    """``count`` independent draws of the pointer chasing source, generated in bulk."""
    _check_positive(r=r, n=n, L=L)
    starts = rng.integers(n, size=count).tolist()
    rows = rng.permuted(np.tile(np.arange(n), (count * r, 1)), axis=1).tolist()
    nbytes = (L + 7) // 8
    shift = 8 * nbytes - L
    raw = rng.bytes(count * 2 * n * nbytes)
    out = []
    for k in range(count):
        perms = [Permutation._trusted(tuple(row)) for row in rows[k * r:(k + 1) * r]]
        base = k * 2 * n * nbytes
        blocks = [int.from_bytes(raw[base + m * nbytes: base + (m + 1) * nbytes], "big") >> shift for m in range(2 * n)]
        a, b = blocks[:n], blocks[n:]
        j = chase(perms, starts[k])
        b[j] = a[j]
        out.append(_assemble_pcs(r, perms, starts[k], a, b, L))
    return out


def sample_pv(r: int, n: int, label: str, rng: np.random.Generator) -> PvInstance:
    """Draw from the yes / no / mix pointer verification distribution."""
    if r % 2 == 0:
        raise ValueError("pointer verification needs odd r")
    _check_positive(r=r, n=n)
    if label == "mix":
        label = "yes" if rng.integers(2) else "no"
    if label not in ("yes", "no"):
        raise ValueError(f"unknown label {label!r}")
    perms = random_permutations(n, r, rng)
    i0 = int(rng.integers(n))
    j0 = chase(perms, i0) if label == "yes" else int(rng.integers(n))
    return make_pv(perms, i0, j0)


def sample_disj(n: int, intersecting: bool, rng: np.random.Generator) -> DisjInstance:
    if n < 4 or n % 4:
        raise ValueError(f"n={n} must be a positive multiple of 4")
    k = n // 4
    p = [int(x) for x in rng.permutation(n)]
    if intersecting:
        u = frozenset([p[0]] + p[1:k])
        v = frozenset([p[0]] + p[k: 2 * k - 1])
    else:
        u = frozenset(p[:k])
        v = frozenset(p[k: 2 * k])
    return DisjInstance(n, u, v)


SAMPLERS = {
    "pcs": lambda rng, r, n, L: sample_pcs(r, n, L, rng),
    "product": lambda rng, r, n, L: sample_pcs_product(r, n, L, rng),
    "mid": lambda rng, r, n, L: sample_mid(r, n, L, rng),
    "pv-yes": lambda rng, r, n, L=None: sample_pv(r, n, "yes", rng),
    "pv-no": lambda rng, r, n, L=None: sample_pv(r, n, "no", rng),
    "pv-mix": lambda rng, r, n, L=None: sample_pv(r, n, "mix", rng),
    "disj-yes": lambda rng, r=None, n=4, L=None: sample_disj(n, True, rng),
    "disj-no": lambda rng, r=None, n=4, L=None: sample_disj(n, False, rng),
}


def sample_family(family: str, rng: np.random.Generator, *, r: int | None = None, n: int, L: int | None = None):
    if family not in SAMPLERS:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    return SAMPLERS[family](rng, r=r, n=n, L=L)


# -- exact enumeration ------------------------------------------------


def support_size(family: str, *, r: int | None = None, n: int, L: int | None = None) -> int:
    """Number of generation paths the enumerator walks (an upper bound on the support)."""
    if family in ("pcs", "product", "mid"):
        base = n * math.factorial(n) ** r
        if family == "pcs":
            return base * 2 ** (L * (2 * n - 1))
        if family == "product":
            return base * 2 ** (2 * n * L)
        return n * base * 2 ** (L * (2 * n - 1))
    if family.startswith("pv-"):
        yes = n * math.factorial(n) ** r
        return {"pv-yes": yes, "pv-no": n * yes, "pv-mix": n * yes + yes}[family]
    if family.startswith("disj-"):
        k = n // 4
        if family == "disj-yes":
            return n * math.comb(n - 1, k - 1) * math.comb(n - k, k - 1)
        return math.comb(n, k) * math.comb(n - k, k)
    raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")


def _validate(family: str, r: int | None, n: int, L: int | None) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if family.startswith("disj-"):
        if n < 4 or n % 4:
            raise ValueError(f"n={n} must be a positive multiple of 4")
        return
    if r is None or r < 1 or n < 1:
        raise ValueError("r and n must be >= 1")
    if family.startswith("pv-"):
        if r % 2 == 0:
            raise ValueError("pointer verification needs odd r")
        return
    if L is None or L < 1:
        raise ValueError("L must be >= 1")
    if L > MAX_ENUM_BLOCK_BITS:
        raise ValueError(f"enumeration supports block length L <= {MAX_ENUM_BLOCK_BITS}")


def _pcs_paths(family: str, r: int, n: int, L: int) -> Iterator[PcsSample]:
    perms_all = all_permutations(n)
    values = range(1 << L)
    for i in range(n):
        for perms in product(perms_all, repeat=r):
            if family == "product":
                for blocks in product(values, repeat=2 * n):
                    yield _assemble_pcs(r, perms, i, list(blocks[:n]), list(blocks[n:]), L)
                continue
            targets = [chase(perms, i)] if family == "pcs" else range(n)
            for j in targets:
                for shared in values:
                    for free in product(values, repeat=2 * (n - 1)):
                        a = list(free[: n - 1])
                        b = list(free[n - 1:])
                        a.insert(j, shared)
                        b.insert(j, shared)
                        yield _assemble_pcs(r, perms, i, a, b, L)


def enumerate_source(
    family: str,
    *,
    r: int | None = None,
    n: int,
    L: int | None = None,
    cap: int | None = None,
) -> DistTable:
    """Exact table of a family at tiny parameters.

    Weights count generation paths, so ``mid`` (whose agreeing index is latent)
    can carry weights above 1 on atoms reachable through several indices.
    ``pv-mix`` uses total ``2 * |support(pv-no)|``: no-branch paths weigh 1 and
    yes-branch paths weigh n.
    """
    _validate(family, r, n, L)
    cap = default_cap() if cap is None else cap
    size = support_size(family, r=r, n=n, L=L)
    if size > cap:
        raise CapExceeded(f"enumerate {family}", size, cap)

    if family in ("pcs", "product", "mid"):
        return DistTable.accumulate((s, 1) for s in _pcs_paths(family, r, n, L))

    if family.startswith("pv-"):
        yes_w, no_w = {"pv-yes": (1, 0), "pv-no": (0, 1), "pv-mix": (n, 1)}[family]

        def paths():
            for perms in product(all_permutations(n), repeat=r):
                for i0 in range(n):
                    j = chase(perms, i0)
                    for j0 in range(n):
                        w = no_w + (yes_w if j0 == j else 0)
                        if w:
                            yield make_pv(perms, i0, j0), w

        return DistTable(paths())

    k = n // 4
    pairs = []
    for u in combinations(range(n), k):
        for v in combinations(range(n), k):
            inter = len(set(u) & set(v))
            if inter == (1 if family == "disj-yes" else 0):
                pairs.append(DisjInstance(n, frozenset(u), frozenset(v)))
    return DistTable.uniform(pairs)


# -- lumped pointer verification tables ------------------------------------------------


@dataclass(frozen=True)
class LumpedPv:
    """A pointer verification distribution whose permutations are iid uniform and
    whose (i0, j0) depends on them only through the composite chase map.

    ``weights[s, i0, j0]`` is the integer weight of (i0, j0) given composite
    ``composites[s]``; every composite has the same row total so the composite is
    uniform, as it is when the permutations are.
    """

    r: int
    n: int
    composites: tuple[Permutation, ...]
    weights: np.ndarray

    def __post_init__(self) -> None:
        rows = self.weights.reshape(len(self.composites), -1).sum(axis=1)
        if len(set(rows.tolist())) != 1:
            raise ValueError("composite marginal must be uniform")


def enumerate_pv_lumped(r: int, n: int, label: str, cap: int | None = None) -> LumpedPv:
    """Lumped form of ``pv-yes`` / ``pv-no`` / ``pv-mix`` with n! * n^2 cells."""
    if r % 2 == 0:
        raise ValueError("pointer verification needs odd r")
    cap = default_cap() if cap is None else cap
    size = math.factorial(n) * n * n
    if size > cap:
        raise CapExceeded("lumped pointer verification table", size, cap)
    yes_w, no_w = {"yes": (1, 0), "no": (0, 1), "mix": (n, 1)}[label]
    composites = tuple(all_permutations(n))
    images = np.array([p.image for p in composites], dtype=np.int64)
    w = np.full((len(composites), n, n), no_w, dtype=np.int64)
    rows = np.repeat(np.arange(len(composites)), n)
    cols = np.tile(np.arange(n), len(composites))
    w[rows, cols, images.reshape(-1)] += yes_w
    return LumpedPv(r, n, composites, w)
