"""Two-party protocol execution with round/bit accounting.

A round is one message by one party. Messages are strings over {'0', '1'}.
Each run derives three randomness streams from the master seed (Alice-private,
Bob-private, public); each party holds its own copy of the public stream, so
both see the same public bits as long as they draw in the same order or use
``fork`` with a shared label.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Mapping

import numpy as np

from .errors import BudgetExceeded, ProtocolError
from .permcore import Permutation

ALICE = "alice"
BOB = "bob"
PARTIES = (ALICE, BOB)

_STREAM_IDS = {ALICE: 1, BOB: 2, "public": 3}


def other(party: str) -> str:
    return BOB if party == ALICE else ALICE


def _label_word(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "big")


class RandomStream:
    """Seeded randomness that records whether it was ever touched."""

    def __init__(self, words: tuple[int, ...]):
        self._words = tuple(words)
        self._rng: np.random.Generator | None = None
        self.used = False

    @property
    def rng(self) -> np.random.Generator:
        self.used = True
        if self._rng is None:
            self._rng = np.random.default_rng(np.random.SeedSequence(list(self._words)))
        return self._rng

    def fork(self, label: str) -> "RandomStream":
        """Independent child stream determined by (this stream's seed, label)."""
        self.used = True
        return RandomStream(self._words + (_label_word(label),))

    def bits(self, k: int) -> str:
        return "".join("1" if b else "0" for b in self.rng.integers(0, 2, size=k))

    def permutation(self, n: int) -> Permutation:
        return Permutation(tuple(int(x) for x in self.rng.permutation(n)))


def derive_streams(seed: int) -> dict[str, RandomStream]:
    return {name: RandomStream((seed, sid)) for name, sid in _STREAM_IDS.items()}


@dataclass
class PartyContext:
    party: str
    input: Any
    private: RandomStream
    public: RandomStream
    memo: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Transcript:
    messages: tuple[tuple[str, str], ...] = ()

    def append(self, speaker: str, bits: str) -> "Transcript":
        return Transcript(self.messages + ((speaker, bits),))

    @property
    def bits_used(self) -> int:
        return sum(len(b) for _, b in self.messages)

    @property
    def rounds(self) -> int:
        return len(self.messages)

    @property
    def last_bit(self) -> str:
        if not self.messages:
            raise ProtocolError("empty transcript has no last bit")
        return self.messages[-1][1][-1]

    def __getitem__(self, k: int) -> tuple[str, str]:
        return self.messages[k]

    def __len__(self) -> int:
        return len(self.messages)


MessageFn = Callable[[PartyContext, Transcript], str]
OutputFn = Callable[[PartyContext, Transcript], str]


@dataclass(frozen=True)
class Round:
    speaker: str
    message: MessageFn
    length: int | None = None


@dataclass(frozen=True)
class ProtocolSpec:
    """An (r, c)-protocol: at most ``round_budget`` messages, ``bit_budget`` bits in total.

    Output keys are not counted against the bit budget.
    """

    name: str
    rounds: tuple[Round, ...]
    round_budget: int
    bit_budget: int
    outputs: Mapping[str, OutputFn]
    key_length: int
    deterministic: bool = True

    @property
    def first_speaker(self) -> str | None:
        return self.rounds[0].speaker if self.rounds else None

    @property
    def last_speaker(self) -> str | None:
        return self.rounds[-1].speaker if self.rounds else None

    @cached_property
    def fatal_issues(self) -> tuple[str, ...]:
        """Problems that make the spec unrunnable (checked once per spec)."""
        keys = ("alternation", "missing output", "unknown speaker")
        return tuple(i for i in validate(self) if any(k in i for k in keys))


@dataclass(frozen=True)
class RunRecord:
    transcript: Transcript
    k_a: str
    k_b: str
    rounds_used: int
    bits_used: int

    @property
    def agree(self) -> bool:
        return self.k_a == self.k_b

    def to_dict(self) -> dict:
        return {
            "transcript": [[s, b] for s, b in self.transcript.messages],
            "k_a": self.k_a,
            "k_b": self.k_b,
            "rounds_used": self.rounds_used,
            "bits_used": self.bits_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def validate(spec: ProtocolSpec) -> list[str]:
    """Structural problems with ``spec``; an empty list means none found."""
    issues = []
    for k, rnd in enumerate(spec.rounds):
        if rnd.speaker not in PARTIES:
            issues.append(f"round {k}: unknown speaker {rnd.speaker!r}")
        if k and rnd.speaker == spec.rounds[k - 1].speaker:
            issues.append(f"round {k}: alternation violated, {rnd.speaker} speaks twice in a row")
        if rnd.length is not None and rnd.length <= 0:
            issues.append(f"round {k}: declared message length must be positive")
    if len(spec.rounds) > spec.round_budget:
        issues.append(f"{len(spec.rounds)} rounds exceed the round budget {spec.round_budget}")
    if spec.rounds and spec.round_budget <= 0:
        issues.append("zero round budget with nonempty message schedule")
    if spec.rounds and spec.bit_budget <= 0:
        issues.append("zero bit budget with nonempty message schedule")
    declared = [r.length for r in spec.rounds]
    if all(d is not None for d in declared) and sum(declared) > spec.bit_budget:
        issues.append(f"declared lengths total {sum(declared)} bits, over the budget {spec.bit_budget}")
    for party in PARTIES:
        if party not in spec.outputs:
            issues.append(f"missing output function for {party}")
    return issues


def _check_bits(k: int, bits: Any) -> None:
    if not isinstance(bits, str) or not bits or set(bits) - {"0", "1"}:
        raise ProtocolError(f"round {k}: malformed message {bits!r}")


def run_protocol(spec: ProtocolSpec, alice_in: Any, bob_in: Any, seed: int = 0) -> RunRecord:
    """Execute ``spec`` once. Deterministic given (inputs, seed)."""
    if spec.fatal_issues:
        raise ProtocolError(spec.fatal_issues[0])
    streams = derive_streams(seed)
    pub_a = RandomStream((seed, _STREAM_IDS["public"]))
    pub_b = RandomStream((seed, _STREAM_IDS["public"]))
    ctx = {
        ALICE: PartyContext(ALICE, alice_in, streams[ALICE], pub_a),
        BOB: PartyContext(BOB, bob_in, streams[BOB], pub_b),
    }
    transcript = Transcript()
    used = 0
    for k, rnd in enumerate(spec.rounds):
        if k >= spec.round_budget:
            raise BudgetExceeded(k, f"round budget {spec.round_budget} exhausted")
        bits = rnd.message(ctx[rnd.speaker], transcript)
        _check_bits(k, bits)
        if rnd.length is not None and len(bits) != rnd.length:
            raise ProtocolError(f"round {k}: message has {len(bits)} bits, declared {rnd.length}")
        used += len(bits)
        if used > spec.bit_budget:
            raise BudgetExceeded(k, f"{used} bits would exceed the bit budget {spec.bit_budget}")
        transcript = transcript.append(rnd.speaker, bits)
    k_a = spec.outputs[ALICE](ctx[ALICE], transcript)
    k_b = spec.outputs[BOB](ctx[BOB], transcript)
    for party, key in ((ALICE, k_a), (BOB, k_b)):
        if not isinstance(key, str) or len(key) != spec.key_length or set(key) - {"0", "1"}:
            raise ProtocolError(f"{party} output {key!r} is not a {spec.key_length}-bit string")
    if spec.deterministic:
        touched = [c.party for c in ctx.values() if c.private.used or c.public.used]
        if touched:
            raise ProtocolError(f"deterministic protocol {spec.name!r} read randomness ({', '.join(touched)})")
    return RunRecord(transcript, k_a, k_b, transcript.rounds, used)
