"""Instance transformations between the input distributions.

Each reduction is split into a pure core that takes every random choice as an
explicit argument, and a sampling wrapper that draws those choices from a
caller-supplied stream. The ``enumerate_*`` helpers walk the cores over all
inputs and all coins, which gives exact output tables at tiny parameters.

Blocks of length L*t are sliced big-endian: slice 0 is the top L bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import RandomStream
from .permcore import Permutation, all_permutations, invert, random_permutation
from .sources import (
    DisjInstance,
    PcsAlice,
    PcsBob,
    PcsSample,
    PvAlice,
    PvBob,
    PvInstance,
    random_blocks,
    split_perms,
)
from .table import DistTable


@dataclass(frozen=True)
class SharedRandomness:
    """Public coins: a grid sigma[l][tau] (l = 0..r, tau = 0..t-1) and a block pool W."""

    n: int
    L: int
    sigma: tuple[tuple[Permutation, ...], ...] = ()
    pool: tuple[int, ...] = ()

    @property
    def r(self) -> int:
        return len(self.sigma) - 1

    @property
    def t(self) -> int:
        return len(self.sigma[0]) if self.sigma else 0

    @classmethod
    def draw(cls, n: int, L: int, stream: RandomStream, *, r: int | None = None, t: int = 0) -> "SharedRandomness":
        rng = stream.rng
        sigma = ()
        if r is not None and t > 0:
            sigma = tuple(tuple(random_permutation(n, rng) for _ in range(t)) for _ in range(r + 1))
        pool = tuple(random_blocks(L, n, rng))
        return cls(n, L, sigma, pool)

    @classmethod
    def identity(cls, n: int, L: int, r: int, t: int) -> "SharedRandomness":
        e = Permutation.identity(n)
        return cls(n, L, tuple((e,) * t for _ in range(r + 1)), ())


# -- t-removal ------------------------------------------------


def _slice(block: int, tau: int, L: int, t: int) -> int:
    return (block >> (L * (t - 1 - tau))) & ((1 << L) - 1)


def _check_grid(shared: SharedRandomness, r: int, t: int, n: int, Lt: int) -> None:
    if shared.r != r or shared.t != t:
        raise ValueError(f"shared grid is {shared.r + 1}x{shared.t}, need {r + 1}x{t}")
    if shared.n != n:
        raise ValueError(f"shared permutations act on {shared.n} points, input on {n}")
    if Lt % t:
        raise ValueError(f"block length {Lt} is not divisible by t={t}")


def _conjugated(perms_by_index: dict[int, Permutation], shared: SharedRandomness, tau: int) -> dict[int, Permutation]:
    # pi'_l = sigma_l o pi_l o sigma_{l-1}^{-1}
    sig = shared.sigma
    return {l: sig[l][tau] @ p @ invert(sig[l - 1][tau]) for l, p in perms_by_index.items()}


def _relabel_blocks(blocks: Sequence[int], shared: SharedRandomness, tau: int, L: int, t: int) -> tuple[int, ...]:
    # A'_k = A_{sigma_r^{-1}(k)}, so the chased index sigma_r(j) carries the old A_j
    back = invert(shared.sigma[shared.r][tau])
    return tuple(_slice(blocks[back(k)], tau, L, t) for k in range(len(blocks)))


def t_removal_alice(x: PcsAlice, shared: SharedRandomness, r: int, t: int) -> tuple[PcsAlice, ...]:
    _check_grid(shared, r, t, x.n, x.L)
    L = x.L // t
    odd = {2 * k + 1: p for k, p in enumerate(x.perms)}
    out = []
    for tau in range(t):
        new = _conjugated(odd, shared, tau)
        out.append(PcsAlice(tuple(new[l] for l in sorted(new)), _relabel_blocks(x.blocks, shared, tau, L, t), L))
    return tuple(out)


def t_removal_bob(y: PcsBob, shared: SharedRandomness, r: int, t: int) -> tuple[PcsBob, ...]:
    _check_grid(shared, r, t, y.n, y.L)
    L = y.L // t
    even = {2 * k + 2: p for k, p in enumerate(y.perms)}
    out = []
    for tau in range(t):
        new = _conjugated(even, shared, tau)
        i = shared.sigma[0][tau](y.i)
        out.append(PcsBob(i, tuple(new[l] for l in sorted(new)), _relabel_blocks(y.blocks, shared, tau, L, t), L))
    return tuple(out)


def t_removal(x: PcsAlice, y: PcsBob, shared: SharedRandomness, r: int, t: int) -> tuple[PcsSample, ...]:
    """One sample with L*t-bit blocks -> t samples with L-bit blocks, no communication."""
    xs = t_removal_alice(x, shared, r, t)
    ys = t_removal_bob(y, shared, r, t)
    return tuple(PcsSample(r, a, b) for a, b in zip(xs, ys))


def all_grids(n: int, r: int, t: int) -> Iterable[SharedRandomness]:
    perms = all_permutations(n)
    for flat in product(perms, repeat=(r + 1) * t):
        grid = tuple(tuple(flat[l * t: (l + 1) * t]) for l in range(r + 1))
        yield SharedRandomness(n, 0, grid, ())


def enumerate_t_removal(source: DistTable, r: int, t: int) -> DistTable:
    """Pushforward of ``source`` (a table of PcsSample) times a uniform grid."""
    samples = list(source.items())
    n = samples[0][0].n
    acc = []
    for shared in all_grids(n, r, t):
        for s, w in samples:
            acc.append((t_removal(s.alice, s.bob, shared, r, t), w))
    return DistTable.accumulate(acc)


# -- disjointness -> (mid vs product) ------------------------------------------------


def disj_alice(u: Iterable[int], pool: Sequence[int], odd_perms: Sequence[Permutation], fresh: Sequence[int], L: int) -> PcsAlice:
    """A_l = W_l on U, the next fresh block elsewhere (``fresh`` has n - |U| entries)."""
    u = frozenset(u)
    it = iter(fresh)
    blocks = tuple(pool[l] if l in u else next(it) for l in range(len(pool)))
    return PcsAlice(tuple(odd_perms), blocks, L)


def disj_bob(v: Iterable[int], pool: Sequence[int], i: int, even_perms: Sequence[Permutation], fresh: Sequence[int], L: int) -> PcsBob:
    v = frozenset(v)
    it = iter(fresh)
    blocks = tuple(pool[l] if l in v else next(it) for l in range(len(pool)))
    return PcsBob(i, tuple(even_perms), blocks, L)


def disj_to_crg(side: str, subset: Iterable[int], shared: SharedRandomness, r: int, L: int, rng: np.random.Generator):
    """Local map for one party: ``side`` is "alice" (subset U) or "bob" (subset V)."""
    subset = frozenset(subset)
    n = len(shared.pool)
    if n % 4:
        raise ValueError(f"n={n} is not divisible by 4")
    if shared.L != L:
        raise ValueError(f"shared pool has {shared.L}-bit blocks, need {L}")
    if any(not 0 <= k < n for k in subset):
        raise ValueError("subset element out of range")
    fresh = random_blocks(L, n - len(subset), rng)
    if side == "alice":
        perms = [random_permutation(n, rng) for _ in range((r + 1) // 2)]
        return disj_alice(subset, shared.pool, perms, fresh, L)
    if side == "bob":
        i = int(rng.integers(n))
        perms = [random_permutation(n, rng) for _ in range(r // 2)]
        return disj_bob(subset, shared.pool, i, perms, fresh, L)
    raise ValueError(f"unknown side {side!r}")


def disj_instance_to_crg(inst: DisjInstance, shared: SharedRandomness, r: int, L: int, rng_a, rng_b) -> PcsSample:
    return PcsSample(r, disj_to_crg("alice", inst.u, shared, r, L, rng_a), disj_to_crg("bob", inst.v, shared, r, L, rng_b))


def enumerate_disj_to_crg(source: DistTable, r: int, L: int) -> DistTable:
    """Exact output table over (U, V) x pool x Alice coins x Bob coins."""
    insts = list(source.items())
    n = insts[0][0].n
    k = n // 4
    values = range(1 << L)
    perms = all_permutations(n)
    alice_perms = list(product(perms, repeat=(r + 1) // 2))
    bob_perms = list(product(perms, repeat=r // 2))
    fresh_all = list(product(values, repeat=n - k))
    acc: dict = {}
    for inst, w in insts:
        for pool in product(values, repeat=n):
            alices = [disj_alice(inst.u, pool, ps, f, L) for ps in alice_perms for f in fresh_all]
            bobs = [disj_bob(inst.v, pool, i, ps, f, L) for i in range(n) for ps in bob_perms for f in fresh_all]
            for a in alices:
                for b in bobs:
                    key = (a, b)
                    acc[key] = acc.get(key, 0) + w
    return DistTable((PcsSample(r, a, b), w) for (a, b), w in acc.items())


# -- pointer verification -> (pcs vs mid) ------------------------------------------------


def pv_alice(x: PvAlice, pool: Sequence[int], L: int) -> PcsAlice:
    return PcsAlice(x.perms, tuple(pool), L)


def pv_bob(y: PvBob, pool: Sequence[int], fresh: Sequence[int], L: int) -> PcsBob:
    """B_{j0} = W_{j0}; the n - 1 other blocks come from ``fresh`` in index order."""
    it = iter(fresh)
    blocks = tuple(pool[l] if l == y.j0 else next(it) for l in range(len(pool)))
    return PcsBob(y.i0, y.perms, blocks, L)


def pv_to_crg(instance: PvInstance, shared: SharedRandomness, L: int, rng: np.random.Generator) -> tuple[PcsAlice, PcsBob]:
    n = instance.n
    if len(shared.pool) != n or shared.L != L:
        raise ValueError(f"shared pool must hold {n} blocks of {L} bits")
    fresh = random_blocks(L, n - 1, rng)
    return pv_alice(instance.alice, shared.pool, L), pv_bob(instance.bob, shared.pool, fresh, L)


def enumerate_pv_to_crg(source: DistTable, L: int) -> DistTable:
    insts = list(source.items())
    n = insts[0][0].n
    values = range(1 << L)
    acc = []
    for inst, w in insts:
        for pool in product(values, repeat=n):
            a = pv_alice(inst.alice, pool, L)
            for fresh in product(values, repeat=n - 1):
                acc.append((PcsSample(inst.r, a, pv_bob(inst.bob, pool, fresh, L)), w))
    return DistTable.accumulate(acc)


# -- conditioning on Alice's first message ------------------------------------------------


def inner_inputs(inst: PvInstance) -> tuple[int, int, tuple[Permutation, ...]]:
    """(i1, j1, (pi_2, ..., pi_{r-1})) with i1 = pi_1(i0) and j1 = pi_r^{-1}(j0)."""
    perms = inst.perms
    i1 = perms[0](inst.bob.i0)
    j1 = invert(perms[-1])(inst.bob.j0)
    return i1, j1, tuple(perms[1:-1])


def condition_on_message(
    D: DistTable,
    m1: Callable[[PvAlice], object],
    m1_val,
    i0_val: int | None = None,
    j0_val: int | None = None,
    *,
    project: bool = False,
) -> DistTable:
    """Restrict D to {m1(alice part) = m1_val, i0 = i0_val, j0 = j0_val}.

    ``None`` leaves a coordinate unconstrained. Weights are the original
    integer weights on the surviving atoms. With ``project`` the result is
    pushed forward to the inner inputs (i1, j1, pi_2..pi_{r-1}).
    """

    def keep(inst: PvInstance) -> bool:
        return (
            m1(inst.alice) == m1_val
            and (i0_val is None or inst.bob.i0 == i0_val)
            and (j0_val is None or inst.bob.j0 == j0_val)
        )

    out = D.filter(keep)
    return out.map(inner_inputs) if project else out


def split_inner(inner: tuple[int, int, tuple[Permutation, ...]]):
    """Party view of the inner instance: the old Alice now holds (i1, j1, pi_3, pi_5, ...)."""
    i1, j1, mids = inner
    bob_side, alice_side = split_perms(mids)  # (pi_2, pi_4, ...), (pi_3, pi_5, ...)
    return (i1, j1, alice_side), bob_side


__all__ = [
    "SharedRandomness",
    "t_removal",
    "t_removal_alice",
    "t_removal_bob",
    "enumerate_t_removal",
    "all_grids",
    "disj_alice",
    "disj_bob",
    "disj_to_crg",
    "disj_instance_to_crg",
    "enumerate_disj_to_crg",
    "pv_alice",
    "pv_bob",
    "pv_to_crg",
    "enumerate_pv_to_crg",
    "inner_inputs",
    "condition_on_message",
    "split_inner",
]
