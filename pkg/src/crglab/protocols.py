"""Concrete protocols.

``pointer_chasing_skg``  Bob opens with the start pointer, the parties take
turns applying their own permutations, and both output the block at the final
pointer. r+1 messages of ceil(log2 n) bits each.

``meet_in_middle_pv``  decides pointer verification by chasing i0 forward and
j0 backward at the same time; every message carries both frontiers, the last
message is the answer bit.

``hash_equality_augment``  appends an equality test on the output keys (random
GF(2) linear hash) and a distinguisher bit evaluated on (key, test outcome).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Mapping

import numpy as np

from .engine import ALICE, BOB, PartyContext, ProtocolSpec, RandomStream, Round, Transcript, other
from .errors import ProtocolError
from .permcore import decode_pointer, encode_pointer, invert, pointer_width
from .table import DistTable


def _own_perm(ctx: PartyContext, index: int):
    """pi_index (1-based) from the holder's input; odd ones are Alice's, even ones Bob's."""
    holder = ALICE if index % 2 else BOB
    if ctx.party != holder:
        raise ProtocolError(f"{ctx.party} does not hold pi_{index}")
    perms = ctx.input.perms
    return perms[(index - 1) // 2] if holder == ALICE else perms[index // 2 - 1]


def pointer_chasing_skg(r: int, n: int, L: int) -> ProtocolSpec:
    if min(r, n, L) < 1:
        raise ValueError("r, n and L must be >= 1")
    w = pointer_width(n)

    def message(t: int):
        def send(ctx: PartyContext, tr: Transcript) -> str:
            if t == 0:
                return encode_pointer(ctx.input.i, n)
            prev = decode_pointer(tr[-1][1], n)
            return encode_pointer(_own_perm(ctx, t)(prev), n)

        return send

    def output(ctx: PartyContext, tr: Transcript) -> str:
        end = decode_pointer(tr[-1][1], n)
        return format(ctx.input.blocks[end], f"0{L}b")

    rounds = tuple(Round(BOB if t % 2 == 0 else ALICE, message(t), w) for t in range(r + 1))
    return ProtocolSpec(
        name=f"pointer-chasing(r={r},n={n},L={L})",
        rounds=rounds,
        round_budget=r + 1,
        bit_budget=(r + 1) * w,
        outputs={ALICE: output, BOB: output},
        key_length=L,
    )


def meet_in_middle_pv(r: int, n: int) -> ProtocolSpec:
    """(r+3)/2 messages; at most (r+3) * ceil(log2 n) bits."""
    if r < 1 or r % 2 == 0:
        raise ValueError("meet-in-the-middle needs odd r >= 1")
    w = pointer_width(n)
    half = (r - 1) // 2

    def parse(bits: str) -> tuple[int, int]:
        return decode_pointer(bits[:w], n), decode_pointer(bits[w:], n)

    def opening(ctx: PartyContext, tr: Transcript) -> str:
        return encode_pointer(ctx.input.i0, n) + encode_pointer(ctx.input.j0, n)

    def step(k: int):
        def send(ctx: PartyContext, tr: Transcript) -> str:
            fwd, back = parse(tr[-1][1])
            fwd = _own_perm(ctx, k)(fwd)
            back = invert(_own_perm(ctx, r - k + 1))(back)
            return encode_pointer(fwd, n) + encode_pointer(back, n)

        return send

    def answer(ctx: PartyContext, tr: Transcript) -> str:
        fwd, back = parse(tr[-1][1])
        return "1" if _own_perm(ctx, half + 1)(fwd) == back else "0"

    rounds = [Round(BOB, opening, 2 * w)]
    for k in range(1, half + 1):
        rounds.append(Round(ALICE if k % 2 else BOB, step(k), 2 * w))
    rounds.append(Round(ALICE if (half + 1) % 2 else BOB, answer, 1))

    def output(ctx: PartyContext, tr: Transcript) -> str:
        return tr.last_bit

    return ProtocolSpec(
        name=f"meet-in-middle(r={r},n={n})",
        rounds=tuple(rounds),
        round_budget=len(rounds),
        bit_budget=(r + 3) * w,
        outputs={ALICE: output, BOB: output},
        key_length=1,
    )


# -- hash equality augmentation ------------------------------------------------


def hash_rows(gamma: float) -> int:
    """Rows m = ceil(log2(20 / gamma)), so distinct keys collide w.p. <= 2^-m <= gamma / 20."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return math.ceil(math.log2(20 / gamma))


@dataclass(frozen=True)
class Gf2Hash:
    """x -> M x over GF(2) for an m x L bit matrix M."""

    matrix: np.ndarray

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def draw(cls, m: int, L: int, stream: RandomStream) -> "Gf2Hash":
        return cls(stream.rng.integers(0, 2, size=(m, L), dtype=np.uint8))

    def __call__(self, bits: str) -> str:
        if len(bits) != self.matrix.shape[1]:
            raise ValueError(f"hash expects {self.matrix.shape[1]}-bit input, got {len(bits)}")
        x = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
        return "".join("1" if v else "0" for v in (self.matrix @ x) % 2)


def _as_distinguisher(T: Callable[[str, int], int] | Mapping) -> Callable[[str, int], int]:
    if isinstance(T, Mapping):
        table = T

        def T(key: str, ind: int) -> int:
            try:
                return table[(key, ind)]
            except KeyError:
                raise ProtocolError(f"distinguisher undefined on ({key!r}, {ind})") from None

    def checked(key: str, ind: int) -> int:
        try:
            b = T(key, ind)
        except (KeyError, ValueError, IndexError) as exc:
            raise ProtocolError(f"distinguisher undefined on ({key!r}, {ind}): {exc}") from None
        if b not in (0, 1):
            raise ProtocolError(f"distinguisher returned {b!r}, expected 0 or 1")
        return int(b)

    return checked


def hash_equality_augment(spec: ProtocolSpec, gamma: float, T: Callable[[str, int], int] | Mapping) -> ProtocolSpec:
    """Extend ``spec`` with a key-equality test and the bit T(K, I').

    If Bob speaks last, he appends h(K_B) to his final message and Alice answers
    with I' = 1[h(K_A) = h_B] and T(K_A, I'). If Alice speaks last, she appends
    h(K_A), T(K_A, 0), T(K_A, 1) and Bob answers with I' and the matching bit.
    The hash is drawn from the public stream; one extra round either way.
    """
    if not spec.rounds:
        raise ValueError("base protocol must have at least one round")
    m = hash_rows(gamma)
    ell = spec.key_length
    T = _as_distinguisher(T)
    last = spec.last_speaker
    tail = m if last == BOB else m + 2
    n_base = len(spec.rounds)

    def hash_fn(ctx: PartyContext) -> Gf2Hash:
        if "hash" not in ctx.memo:
            ctx.memo["hash"] = Gf2Hash.draw(m, ell, ctx.public.fork("hash-equality"))
        return ctx.memo["hash"]

    def base_view(tr: Transcript) -> Transcript:
        msgs = list(tr.messages[:n_base])
        if len(msgs) == n_base:
            s, b = msgs[-1]
            msgs[-1] = (s, b[:-tail])
        return Transcript(tuple(msgs))

    def key(ctx: PartyContext, base_tr: Transcript) -> str:
        if "key" not in ctx.memo:
            ctx.memo["key"] = spec.outputs[ctx.party](ctx, base_tr)
        return ctx.memo["key"]

    base_last = spec.rounds[-1]

    def final_base(ctx: PartyContext, tr: Transcript) -> str:
        own = base_last.message(ctx, tr)
        k = key(ctx, tr.append(ctx.party, own))
        h = hash_fn(ctx)(k)
        if ctx.party == BOB:
            return own + h
        return own + h + str(T(k, 0)) + str(T(k, 1))

    def answer(ctx: PartyContext, tr: Transcript) -> str:
        k = key(ctx, base_view(tr))
        received = tr[n_base - 1][1][-tail:]
        if ctx.party == ALICE:
            ind = int(hash_fn(ctx)(k) == received)
            return f"{ind}{T(k, ind)}"
        ind = int(received[:m] == hash_fn(ctx)(k))
        return f"{ind}{received[m + ind]}"

    def output(ctx: PartyContext, tr: Transcript) -> str:
        return key(ctx, base_view(tr))

    new_len = None if base_last.length is None else base_last.length + tail
    rounds = spec.rounds[:-1] + (
        Round(base_last.speaker, final_base, new_len),
        Round(other(last), answer, 2),
    )
    return ProtocolSpec(
        name=f"{spec.name}+hash-equality(gamma={gamma})",
        rounds=rounds,
        round_budget=spec.round_budget + 1,
        bit_budget=spec.bit_budget + tail + 2,
        outputs={ALICE: output, BOB: output},
        key_length=ell,
        deterministic=False,
    )


def equality_indicator(record) -> int:
    """I' from an augmented run: first bit of the final message."""
    return int(record.transcript[-1][1][0])


def distinguisher_bit(record) -> int:
    return int(record.transcript[-1][1][1])


# -- optimal distinguisher ------------------------------------------------


@dataclass(frozen=True)
class Distinguisher:
    """T(x) = 1 iff P(x) >= Q(x), defined on the union of the two supports."""

    ones: frozenset
    universe: frozenset

    def __call__(self, atom: Hashable) -> int:
        if atom not in self.universe:
            raise KeyError(f"distinguisher undefined on {atom!r}")
        return int(atom in self.ones)

    def advantage(self, P: DistTable, Q: DistTable) -> Fraction:
        """E_P[T] - E_Q[T], exactly."""
        ep = Fraction(sum(w for a, w in P.items() if a in self.ones), P.total)
        eq = Fraction(sum(w for a, w in Q.items() if a in self.ones), Q.total)
        return ep - eq


def optimal_distinguisher(P: DistTable, Q: DistTable) -> Distinguisher:
    kinds_p = {type(a) for a in P}
    kinds_q = {type(a) for a in Q}
    if kinds_p != kinds_q:
        raise ValueError(f"tables live on different universes: {kinds_p} vs {kinds_q}")
    universe = frozenset(P) | frozenset(Q)
    tp, tq = P.total, Q.total
    ones = frozenset(a for a in universe if P.weight(a) * tq >= Q.weight(a) * tp)
    return Distinguisher(ones, universe)
