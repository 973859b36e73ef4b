"""Exact finite distributions with integer weights."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Iterator, Mapping


class DistTable:
    """A finite distribution stored as ``atom -> nonnegative integer weight``.

    Probabilities are ``weight / total``. Atoms must be hashable and compare by
    value; zero weights are dropped, so ``len(table)`` is the support size.
    """

    __slots__ = ("_weights", "_total")

    def __init__(self, atoms: Mapping[Hashable, int] | Iterable[tuple[Hashable, int]]):
        items = atoms.items() if isinstance(atoms, Mapping) else atoms
        weights: dict[Hashable, int] = {}
        for atom, w in items:
            if isinstance(w, bool) or not isinstance(w, int):
                raise TypeError(f"weight for {atom!r} must be an int, got {type(w).__name__}")
            if w < 0:
                raise ValueError(f"negative weight {w} for {atom!r}")
            if atom in weights:
                raise ValueError(f"duplicate atom {atom!r}")
            if w:
                weights[atom] = w
        total = sum(weights.values())
        if total <= 0:
            raise ValueError("table has zero total weight")
        self._weights = weights
        self._total = total

    @classmethod
    def accumulate(cls, pairs: Iterable[tuple[Hashable, int]]) -> "DistTable":
        """Build a table, summing the weights of repeated atoms."""
        acc: dict[Hashable, int] = defaultdict(int)
        for atom, w in pairs:
            acc[atom] += w
        return cls(acc)

    @classmethod
    def uniform(cls, atoms: Iterable[Hashable]) -> "DistTable":
        return cls((a, 1) for a in atoms)

    @property
    def total(self) -> int:
        return self._total

    @property
    def weights(self) -> Mapping[Hashable, int]:
        return self._weights

    def __len__(self) -> int:
        return len(self._weights)

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._weights)

    def __contains__(self, atom: object) -> bool:
        return atom in self._weights

    def items(self):
        return self._weights.items()

    def weight(self, atom: Hashable) -> int:
        return self._weights.get(atom, 0)

    def prob(self, atom: Hashable) -> Fraction:
        return Fraction(self._weights.get(atom, 0), self._total)

    def probabilities(self) -> dict[Hashable, float]:
        return {a: w / self._total for a, w in self._weights.items()}

    def map(self, f: Callable[[Any], Hashable]) -> "DistTable":
        """Pushforward through ``f``; weights of colliding images add up."""
        acc: dict[Hashable, int] = defaultdict(int)
        for atom, w in self._weights.items():
            acc[f(atom)] += w
        return DistTable(acc)

    def filter(self, pred: Callable[[Any], bool]) -> "DistTable":
        """Restriction to atoms satisfying ``pred`` (not renormalized: weights are kept)."""
        kept = {a: w for a, w in self._weights.items() if pred(a)}
        if not kept:
            raise ValueError("conditioning event has zero weight")
        return DistTable(kept)

    def event_weight(self, pred: Callable[[Any], bool]) -> int:
        return sum(w for a, w in self._weights.items() if pred(a))

    def product(self, other: "DistTable") -> "DistTable":
        """Independent joint: atoms are pairs ``(a, b)``."""
        return DistTable(
            ((a, b), wa * wb) for a, wa in self._weights.items() for b, wb in other._weights.items()
        )

    def reduced(self) -> "DistTable":
        """Same distribution with weights divided by their gcd."""
        g = 0
        for w in self._weights.values():
            g = math.gcd(g, w)
        return DistTable({a: w // g for a, w in self._weights.items()})

    def same_distribution(self, other: "DistTable") -> bool:
        if len(self) != len(other):
            return False
        return all(w * other._total == other.weight(a) * self._total for a, w in self._weights.items())

    @staticmethod
    def mixture(tables: "list[DistTable]", coeffs: list[int] | None = None) -> "DistTable":
        """Mixture with integer coefficients (default equal), over a common denominator.

        Each table is rescaled to total ``lcm`` of the totals, so the mixture
        total is ``sum(coeffs) * lcm``.
        """
        if coeffs is None:
            coeffs = [1] * len(tables)
        if len(coeffs) != len(tables) or not tables:
            raise ValueError("need one coefficient per table")
        common = 1
        for t in tables:
            common = math.lcm(common, t.total)
        acc: dict[Hashable, int] = defaultdict(int)
        for t, c in zip(tables, coeffs):
            scale = c * (common // t.total)
            for a, w in t.items():
                acc[a] += w * scale
        return DistTable(acc)

    def to_json(self) -> str:
        """Serialize as a JSON list of ``{"atom": hex, "weight": int}`` sorted by atom."""
        rows = sorted((_encode_atom(a).hex(), w) for a, w in self._weights.items())
        return json.dumps({"total": self._total, "atoms": [{"atom": h, "weight": w} for h, w in rows]})

    @classmethod
    def from_json(cls, text: str, decode: Callable[[bytes], Hashable] | None = None) -> "DistTable":
        data = json.loads(text)
        table = cls(
            ((decode(bytes.fromhex(r["atom"])) if decode else bytes.fromhex(r["atom"])), int(r["weight"]))
            for r in data["atoms"]
        )
        if table.total != data["total"]:
            raise ValueError("stored total does not match the weights")
        return table

    def __repr__(self) -> str:
        return f"DistTable(atoms={len(self)}, total={self._total})"


def _encode_atom(atom: Hashable) -> bytes:
    if isinstance(atom, (bytes, bytearray)):
        return bytes(atom)
    encode = getattr(atom, "encode", None)
    if callable(encode) and not isinstance(atom, str):
        return encode()
    if isinstance(atom, tuple):
        parts = [_encode_atom(a) for a in atom]
        return b"".join(len(p).to_bytes(4, "big") + p for p in parts)
    if isinstance(atom, bool):
        return bytes([atom])
    if isinstance(atom, int):
        return atom.to_bytes(max(1, (atom.bit_length() + 8) // 8), "big", signed=True)
    if isinstance(atom, str):
        return atom.encode("utf-8")
    raise TypeError(f"no canonical encoding for atom of type {type(atom).__name__}")
