"""Information measures over exact tables, all in bits.

Weights are exact integers; logarithms are float64. Conditional quantities
follow the averaging definitions (E_y H(X | Y=y)), so the chain rule is a
genuine cross-check rather than an identity by construction.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable, Mapping, Sequence

from .table import DistTable

Coords = str | Sequence[str]


def _entropy_of_weights(weights, total: int) -> float:
    # H = log2(total) - (1/total) * sum w log2 w
    if total <= 0:
        raise ValueError("empty distribution")
    s = math.fsum(w * math.log2(w) for w in weights if w > 0)
    return max(0.0, math.log2(total) - s / total)


def binary_entropy(p: float) -> float:
    if p < 0 or p > 1:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p in (0, 1):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def entropy(P: DistTable) -> float:
    return _entropy_of_weights(P.weights.values(), P.total)


def min_entropy(P: DistTable) -> float:
    return math.log2(P.total) - math.log2(max(P.weights.values()))


@dataclass
class JointTable:
    """A table plus named coordinate extractors ``name -> f(atom)``."""

    table: DistTable
    coords: Mapping[str, Callable[[Any], Hashable]] = field(default_factory=dict)

    def extractor(self, names: Coords) -> Callable[[Any], Hashable]:
        if isinstance(names, str):
            names = (names,)
        missing = [c for c in names if c not in self.coords]
        if missing:
            raise KeyError(f"unknown coordinate(s) {missing}; have {sorted(self.coords)}")
        fs = [self.coords[c] for c in names]
        if len(fs) == 1:
            return fs[0]
        return lambda atom: tuple(f(atom) for f in fs)

    def marginal(self, names: Coords) -> DistTable:
        return self.table.map(self.extractor(names))

    def restrict(self, pred: Callable[[Any], bool]) -> "JointTable":
        return JointTable(self.table.filter(pred), self.coords)


def _grouped(J: JointTable, target: Coords, given: Coords) -> dict[Hashable, dict[Hashable, int]]:
    fx = J.extractor(target)
    fy = J.extractor(given)
    cells: dict[Hashable, dict[Hashable, int]] = defaultdict(lambda: defaultdict(int))
    for atom, w in J.table.items():
        cells[fy(atom)][fx(atom)] += w
    return cells


def cond_entropy(J: JointTable, target: Coords, given: Coords = ()) -> float:
    """H(target | given) = E_{y} H(target | given = y)."""
    if isinstance(given, str):
        given = (given,)
    if not given:
        return entropy(J.marginal(target))
    total = J.table.total
    acc = []
    for cell in _grouped(J, target, given).values():
        wy = sum(cell.values())
        acc.append(wy * _entropy_of_weights(cell.values(), wy))
    return max(0.0, math.fsum(acc) / total)


def mutual_information(J: JointTable, x: Coords, y: Coords) -> float:
    return entropy(J.marginal(x)) - cond_entropy(J, x, y)


def cond_mutual_information(J: JointTable, x: Coords, y: Coords, z: Coords) -> float:
    """I(X; Y | Z) = E_z [H(X_z) - H(X_z | Y_z)]."""
    xs = (x,) if isinstance(x, str) else tuple(x)
    ys = (y,) if isinstance(y, str) else tuple(y)
    zs = (z,) if isinstance(z, str) else tuple(z)
    return cond_entropy(J, xs, zs) - cond_entropy(J, xs, ys + zs)


def is_independent(J: JointTable, x: Coords, y: Coords, given: Coords = ()) -> tuple[bool, int]:
    """Exact integer factorization test of X and Y within every positive cell of ``given``.

    Returns (holds, number of cells checked).
    """
    fx, fy = J.extractor(x), J.extractor(y)
    given = (given,) if isinstance(given, str) else tuple(given)
    fz = J.extractor(given) if given else (lambda a: ())
    cells: dict[Hashable, dict[tuple, int]] = defaultdict(lambda: defaultdict(int))
    for atom, w in J.table.items():
        cells[fz(atom)][(fx(atom), fy(atom))] += w
    for cell in cells.values():
        if not _factorizes(cell):
            return False, len(cells)
    return True, len(cells)


def _factorizes(cell: Mapping[tuple, int]) -> bool:
    wx: dict[Hashable, int] = defaultdict(int)
    wy: dict[Hashable, int] = defaultdict(int)
    for (a, b), w in cell.items():
        wx[a] += w
        wy[b] += w
    if len(cell) != len(wx) * len(wy):
        return False
    total = sum(wx.values())
    return all(w * total == wx[a] * wy[b] for (a, b), w in cell.items())


def tv_distance(P: DistTable, Q: DistTable) -> Fraction:
    """Exact total variation distance, aligned on the union of supports."""
    tp, tq = P.total, Q.total
    s = 0
    for atom, w in P.items():
        s += abs(w * tq - Q.weight(atom) * tp)
    for atom, w in Q.items():
        if atom not in P:
            s += w * tp
    return Fraction(s, 2 * tp * tq)


def kl_divergence(P: DistTable, Q: DistTable) -> float:
    """D(P || Q) in bits; +inf when P puts mass where Q does not."""
    tp, tq = P.total, Q.total
    terms = []
    for atom, w in P.items():
        wq = Q.weight(atom)
        if wq == 0:
            return math.inf
        # (w/tp) * log2((w * tq) / (wq * tp))
        terms.append(w * (math.log2(w) + math.log2(tq) - math.log2(wq) - math.log2(tp)))
    return max(0.0, math.fsum(terms) / tp)


def pinsker_check(P: DistTable, Q: DistTable) -> tuple[float, float, bool]:
    lhs = float(tv_distance(P, Q))
    kl = kl_divergence(P, Q)
    rhs = math.sqrt(kl / 2) if math.isfinite(kl) else math.inf
    return lhs, rhs, lhs <= rhs + 1e-12


def ho_bound(M: int, eps: float) -> float:
    """Largest possible entropy gap between two distributions on M points at TV <= eps."""
    if M < 2:
        raise ValueError("M must be >= 2")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0:
        return 0.0
    if eps >= (M - 1) / M:
        return math.log2(M)
    return binary_entropy(eps) + eps * math.log2(M - 1)


def cover_bound(M: int, eps: float) -> float:
    """eps * log2(M / eps), valid when the L1 distance sum |P - Q| is at most eps <= 1/2.

    The L1 distance is twice the total variation distance. Reading eps as a TV
    bound is not safe: P = (1, 0), Q = (0.56, 0.44) has TV 0.44, entropy gap
    0.99 and eps * log2(M / eps) = 0.96.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if eps < 0 or eps > 0.5:
        raise ValueError("cover bound needs 0 <= eps <= 1/2")
    if eps == 0:
        return 0.0
    return eps * math.log2(M / eps)
