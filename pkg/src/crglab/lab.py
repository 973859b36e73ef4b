"""Distinguishability measurements, exact protocol search and the noisy-class checker."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Hashable, Iterator, Sequence

import numpy as np

from .engine import ALICE, BOB, ProtocolSpec, run_protocol
from .errors import CapExceeded
from .infometrics import JointTable, cond_entropy, entropy, is_independent
from .permcore import Permutation, chase, invert
from .sources import LumpedPv, PvInstance, default_cap
from .table import DistTable

Parties = Callable[[Any], tuple[Any, Any]]


def _parties(atom) -> tuple[Any, Any]:
    return atom.alice, atom.bob


def _transcript_key(record) -> tuple[tuple[str, str], ...]:
    return record.transcript.messages


# -- exact transcript tables ------------------------------------------------


def exact_transcript_distribution(
    spec: ProtocolSpec,
    D: DistTable,
    *,
    seeds: Sequence[int] = (0,),
    parties: Parties = _parties,
    cap: int | None = None,
    key: Callable = _transcript_key,
) -> DistTable:
    """Table of speaker-tagged transcripts when inputs ~ D.

    Randomized specs are averaged uniformly over ``seeds``; deterministic specs
    need only the default single seed.
    """
    cap = default_cap() if cap is None else cap
    size = len(D) * len(seeds)
    if size > cap:
        raise CapExceeded("transcript enumeration", size, cap)
    acc = []
    for atom, w in D.items():
        a, b = parties(atom)
        for s in seeds:
            acc.append((key(run_protocol(spec, a, b, seed=s)), w))
    return DistTable.accumulate(acc)


def protocol_tv(spec: ProtocolSpec, D1: DistTable, D2: DistTable, **kw) -> Fraction:
    from .infometrics import tv_distance

    return tv_distance(exact_transcript_distribution(spec, D1, **kw), exact_transcript_distribution(spec, D2, **kw))


def output_bit_advantage(spec: ProtocolSpec, D1: DistTable, D2: DistTable, **kw) -> Fraction:
    """|Pr_D1[last bit = 1] - Pr_D2[last bit = 1]|, exactly."""

    def last(msgs):
        return msgs[-1][1][-1] if msgs else "0"

    p = [exact_transcript_distribution(spec, D, **kw).map(last) for D in (D1, D2)]
    return abs(p[0].prob("1") - p[1].prob("1"))


# -- Monte Carlo ------------------------------------------------


@dataclass(frozen=True)
class McEstimate:
    """Plug-in TV with bootstrap spread.

    ``bias`` = bootstrap mean - estimate (reported, not corrected). ``floor`` is
    the mean plug-in value when both histograms are redrawn from the pooled
    counts, i.e. what the estimator reads when the two sources coincide.
    """

    estimate: float
    std_error: float
    bias: float
    floor: float
    trials: int
    support: int

    def to_dict(self) -> dict:
        return asdict(self)


def _plugin_tv(c1: np.ndarray, c2: np.ndarray, n1: int, n2: int) -> np.ndarray:
    return 0.5 * np.abs(c1 / n1 - c2 / n2).sum(axis=-1)


def mc_tv_estimate(
    spec: ProtocolSpec,
    sampler1: Callable[[np.random.Generator], Any],
    sampler2: Callable[[np.random.Generator], Any],
    trials: int,
    seed: int = 0,
    *,
    bootstrap: int = 400,
    parties: Parties = _parties,
) -> McEstimate:
    if trials < 100:
        raise ValueError("need at least 100 trials")
    root = np.random.SeedSequence(seed)
    s1, s2, sb = root.spawn(3)
    hist = []
    for k, ss in enumerate((s1, s2)):
        rng = np.random.default_rng(ss)
        counts: Counter = Counter()
        for trial in range(trials):
            a, b = parties((sampler1, sampler2)[k](rng))
            counts[_transcript_key(run_protocol(spec, a, b, seed=seed * 1_000_003 + trial))] += 1
        hist.append(counts)
    cells = sorted(set(hist[0]) | set(hist[1]))
    c1 = np.array([hist[0][c] for c in cells], dtype=float)
    c2 = np.array([hist[1][c] for c in cells], dtype=float)
    est = float(_plugin_tv(c1, c2, trials, trials))
    rng = np.random.default_rng(sb)
    b1 = rng.multinomial(trials, c1 / trials, size=bootstrap)
    b2 = rng.multinomial(trials, c2 / trials, size=bootstrap)
    boot = _plugin_tv(b1, b2, trials, trials)
    pooled = (c1 + c2) / (2 * trials)
    null = _plugin_tv(rng.multinomial(trials, pooled, size=bootstrap), rng.multinomial(trials, pooled, size=bootstrap), trials, trials)
    return McEstimate(est, float(boot.std(ddof=1)), float(boot.mean() - est), float(null.mean()), trials, len(cells))


# -- success on a labeled mixture ------------------------------------------------


def success_probability(spec: ProtocolSpec, D_mix: DistTable, *, seeds: Sequence[int] = (0,)) -> Fraction:
    """Exact Pr[last transcript bit = 1[chase(pi, i0) = j0]]."""
    good = 0
    for inst, w in D_mix.items():
        if getattr(inst, "label", None) is None:
            raise ValueError("success needs a labeled table")
        want = "1" if inst.label else "0"
        for s in seeds:
            rec = run_protocol(spec, inst.alice, inst.bob, seed=s)
            got = rec.transcript.last_bit if rec.transcript.rounds else None
            good += w * (got == want)
    return Fraction(good, D_mix.total * len(seeds))


# -- exhaustive search over deterministic protocols ------------------------------------------------


def set_partitions(k: int, max_blocks: int) -> Iterator[tuple[int, ...]]:
    """Restricted growth strings of length k with at most ``max_blocks`` distinct values."""
    if k == 0:
        yield ()
        return
    a = [0] * k

    def rec(pos: int, m: int):
        if pos == k:
            yield tuple(a)
            return
        for v in range(min(m + 1, max_blocks)):
            a[pos] = v
            yield from rec(pos + 1, max(m, v + 1))

    yield from rec(1, 1)


def count_partitions(k: int, max_blocks: int) -> int:
    """Number of set partitions of k items into at most ``max_blocks`` blocks."""

    @lru_cache(maxsize=None)
    def S(n: int, j: int) -> int:
        if n == j:
            return 1
        if j == 0 or j > n:
            return 0
        return j * S(n - 1, j) + S(n - 1, j - 1)

    if k == 0:
        return 1
    return sum(S(k, j) for j in range(1, min(k, max_blocks) + 1))


@dataclass
class SearchResult:
    """Best deterministic (r, c)-protocol followed by a Bayes-optimal guess.

    ``optimum`` is the exact success probability on the labeled mixture;
    ``advantage`` = 2 * optimum - 1, the matching distinguishing advantage
    under a fair prior. ``strategy`` is the achieving protocol tree.
    """

    optimum: Fraction
    r: int
    c: int
    enumeration_size: int
    strategy: dict = field(default_factory=dict)

    @property
    def advantage(self) -> Fraction:
        return 2 * self.optimum - 1

    def to_dict(self) -> dict:
        return {
            "optimum": str(self.optimum),
            "optimum_float": float(self.optimum),
            "advantage": str(self.advantage),
            "r": self.r,
            "c": self.c,
            "enumeration_size": self.enumeration_size,
            "strategy": self.strategy,
        }


class _Searcher:
    def __init__(self, W: np.ndarray, xs: list, ys: list, cap: int):
        self.W = W  # W[x, y, label], integer weights
        self.xs, self.ys = xs, ys
        self.cap = cap
        self.visited = 0
        self.memo: dict = {}

    def _stop(self, X: tuple, Y: tuple):
        sub = self.W[np.ix_(X, Y)]
        alice = int(sub.sum(axis=1).max(axis=1).sum())
        bob = int(sub.sum(axis=0).max(axis=1).sum())
        if alice >= bob:
            return alice, {"decide": ALICE}
        return bob, {"decide": BOB}

    def value(self, X: tuple, Y: tuple, rounds: int, bits: int, speaker: str):
        raw = (X, Y, rounds, bits, speaker)
        hit = self.memo.get(raw)
        if hit is not None:
            return hit
        # inputs with no mass in this cell cannot affect the score
        mass = self.W[np.ix_(X, Y)].sum(axis=2)
        X = tuple(x for x, m in zip(X, mass.sum(axis=1)) if m)
        Y = tuple(y for y, m in zip(Y, mass.sum(axis=0)) if m)
        if not X or not Y:
            self.memo[raw] = (0, {"decide": ALICE})
            return self.memo[raw]
        key = (X, Y, rounds, bits, speaker)
        if key not in self.memo:
            self.memo[key] = self._solve(X, Y, rounds, bits, speaker)
        self.memo[raw] = self.memo[key]
        return self.memo[key]

    def _solve(self, X: tuple, Y: tuple, rounds: int, bits: int, speaker: str):
        best, plan = self._stop(X, Y)
        if rounds == 0 or bits == 0:
            return best, plan
        own = X if speaker == ALICE else Y
        nxt = BOB if speaker == ALICE else ALICE
        for b in range(1, bits + 1):
            if len(own) <= (1 << (b - 1)):
                break  # b - 1 bits already separate every input
            child: dict[tuple, int] = {}

            def block_value(part: tuple) -> int:
                if part not in child:
                    cx, cy = (part, Y) if speaker == ALICE else (X, part)
                    child[part] = self.value(cx, cy, rounds - 1, bits - b, nxt)[0]
                return child[part]

            for labels in set_partitions(len(own), 1 << b):
                self.visited += 1
                if self.visited > self.cap:
                    raise CapExceeded("protocol search", self.visited, self.cap)
                blocks: dict[int, list] = {}
                for item, lab in zip(own, labels):
                    blocks.setdefault(lab, []).append(item)
                total = sum(block_value(tuple(part)) for part in blocks.values())
                if total > best:
                    best = total
                    plan = self._plan(X, Y, rounds, bits, speaker, b, own, labels, blocks)
        return best, plan

    def _plan(self, X, Y, rounds, bits, speaker, b, own, labels, blocks) -> dict:
        names = self.xs if speaker == ALICE else self.ys
        nxt = BOB if speaker == ALICE else ALICE
        children = {}
        for lab, part in blocks.items():
            cx, cy = (tuple(part), Y) if speaker == ALICE else (X, tuple(part))
            children[format(lab, f"0{b}b")] = self.value(cx, cy, rounds - 1, bits - b, nxt)[1]
        return {
            "speaker": speaker,
            "bits": b,
            "message": {_atom_name(names[i]): format(lab, f"0{b}b") for i, lab in zip(own, labels)},
            "next": children,
        }


def _atom_name(x) -> str:
    if isinstance(x, Permutation):
        return "".join(map(str, x.image)) if x.n <= 10 else ",".join(map(str, x.image))
    if isinstance(x, tuple):
        return "|".join(_atom_name(v) for v in x)
    if hasattr(x, "i0"):
        return f"i0={x.i0},j0={x.j0}" + ("," + _atom_name(x.perms) if x.perms else "")
    if hasattr(x, "perms"):
        return _atom_name(x.perms)
    return str(x)


def _labeled_cells(D_mix: DistTable, parties: Parties, label: Callable[[Any], bool]):
    xs_idx: dict = {}
    ys_idx: dict = {}
    cells = []
    for atom, w in D_mix.items():
        a, b = parties(atom)
        lab = label(atom)
        if lab is None:
            raise ValueError("search needs a labeled table")
        i = xs_idx.setdefault(a, len(xs_idx))
        j = ys_idx.setdefault(b, len(ys_idx))
        cells.append((i, j, int(bool(lab)), w))
    W = np.zeros((len(xs_idx), len(ys_idx), 2), dtype=np.int64)
    for i, j, lab, w in cells:
        W[i, j, lab] += w
    return W, list(xs_idx), list(ys_idx)


def search_size_estimate(n_alice: int, n_bob: int, c: int) -> int:
    """Partitions the first message alone can take, over both possible first speakers."""
    return sum(count_partitions(k, 1 << b) for k in (n_alice, n_bob) for b in range(1, c + 1))


def exhaustive_protocol_search(
    D_mix: DistTable | None = None,
    r: int = 1,
    c: int = 1,
    *,
    D1: DistTable | None = None,
    D2: DistTable | None = None,
    first: str | None = None,
    cap: int | None = None,
    parties: Parties = _parties,
) -> SearchResult:
    """Exact optimum over deterministic protocols with at most r messages and c bits.

    Either pass a labeled mixture ``D_mix`` (success = guessing the label) or two
    tables ``D1``/``D2`` (labels 1/0 under a fair prior; the advantage of the
    result is then the best E_D1[out] - E_D2[out]). After the messages, the party
    with the better posterior guesses; that guess is free. ``first`` fixes the
    opening speaker, otherwise both are tried.
    """
    cap = 10**6 if cap is None else cap
    if (D_mix is None) == (D1 is None or D2 is None):
        raise ValueError("pass either D_mix or both D1 and D2")
    if r < 0 or c < 0:
        raise ValueError("budgets must be nonnegative")
    if D_mix is not None:
        W, xs, ys = _labeled_cells(D_mix, parties, lambda a: getattr(a, "label", None))
    else:
        both = DistTable.mixture([D1.map(lambda a: (a, 1)), D2.map(lambda a: (a, 0))])
        W, xs, ys = _labeled_cells(both, lambda p: parties(p[0]), lambda p: p[1])
    estimate = search_size_estimate(len(xs), len(ys), min(c, 1) if r else 0)
    if estimate > cap:
        raise CapExceeded("protocol search (first message alone)", estimate, cap)
    total = int(W.sum())
    searcher = _Searcher(W, xs, ys, cap)
    X, Y = tuple(range(len(xs))), tuple(range(len(ys)))
    best, plan = None, None
    for s in ([first] if first else [ALICE, BOB]):
        v, p = searcher.value(X, Y, r, c, s)
        if best is None or v > best:
            best, plan = v, p
    return SearchResult(Fraction(best, total), r, c, searcher.visited, plan)


# -- noisy class ------------------------------------------------


@dataclass(frozen=True)
class NoisyClassParams:
    n: int
    r: int
    delta: float
    C: float

    def __post_init__(self) -> None:
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if not 0 <= self.C < self.n:
            raise ValueError("C must lie in [0, n)")
        if self.r % 2 == 0:
            raise ValueError("r must be odd")


@dataclass
class ConditionResult:
    name: str
    measured: float | None
    threshold: float | None
    passed: bool | None  # None: not checked
    detail: str = ""

    @property
    def margin(self) -> float | None:
        if self.measured is None or self.threshold is None:
            return None
        return self.measured - self.threshold


@dataclass
class NoisyClassReport:
    params: NoisyClassParams
    conditions: list[ConditionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "passed": self.passed,
            "conditions": [
                {
                    "name": c.name,
                    "measured": c.measured,
                    "threshold": c.threshold,
                    "margin": c.margin,
                    "passed": c.passed,
                    "detail": c.detail,
                }
                for c in self.conditions
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


CONDITION_NAMES = ("1a", "1b", "2", "3a", "3b", "4a", "4b", "5")
_TOL = 1e-12


def _entropy_conditions(params, values: dict[str, float]) -> list[ConditionResult]:
    n, r, d, C = params.n, params.r, params.delta, params.C
    log_n = math.log2(n)
    thresholds = {
        "1a": log_n - d,
        "1b": log_n - d,
        "2": r * math.log2(math.factorial(n)) - C,
        "3a": 1 - d,
        "3b": 1 - d,
        "4a": log_n - d,
        "4b": log_n - d,
    }
    out = []
    for k, thr in thresholds.items():
        v = values[k]
        if v is None:
            # conditioning on a null event: the entropy is undefined, so the bound cannot be certified
            out.append(ConditionResult(k, None, thr, False, "conditioning event has zero weight"))
        else:
            out.append(ConditionResult(k, v, thr, v >= thr - _TOL))
    return out


def pv_joint(D: DistTable) -> JointTable:
    """Named coordinates over a table of PvInstance atoms."""
    return JointTable(
        D,
        {
            "i0": lambda a: a.bob.i0,
            "j0": lambda a: a.bob.j0,
            "perms": lambda a: a.perms,
            "hit": lambda a: chase(a.perms, a.bob.i0) == a.bob.j0,
        },
    )


def _chains(inst: PvInstance, t: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    perms = inst.perms
    r = len(perms)
    i_s, j_s = [inst.bob.i0], [inst.bob.j0]
    for s in range(1, t + 1):
        i_s.append(perms[s - 1](i_s[-1]))
        j_s.append(invert(perms[r - s])(j_s[-1]))
    return tuple(i_s), tuple(j_s)


def independence_condition(D: DistTable, r: int, t: int) -> tuple[bool, int]:
    """Condition (5) at one t: the outer permutations of the party owning pi_t are
    independent of the other party's permutations given both pointer chains up to
    depth t and the middle permutations pi_{t+2}, pi_{t+4}, ..., pi_{r-t-1}.

    Returns (holds, positive conditioning cells checked).
    """
    owner_parity = t % 2  # 1: Alice's (odd-numbered) permutations
    outer = set(range(1, t + 1)) | set(range(r - t + 1, r + 1))
    own_idx = sorted(l for l in outer if l % 2 == owner_parity and 1 <= l <= r)
    other_idx = [l for l in range(1, r + 1) if l % 2 != owner_parity]
    mid_idx = list(range(t + 2, r - t, 2))

    J = JointTable(
        D,
        {
            "own": lambda a: tuple(a.perms[l - 1] for l in own_idx),
            "other": lambda a: tuple(a.perms[l - 1] for l in other_idx),
            "given": lambda a: (_chains(a, t), tuple(a.perms[l - 1] for l in mid_idx)),
        },
    )
    return is_independent(J, "own", "other", "given")


def noisy_class_check(D: DistTable, params: NoisyClassParams, *, check_independence: bool = True) -> NoisyClassReport:
    """All conditions on an explicit table of PvInstance atoms."""
    J = pv_joint(D)
    try:
        miss = J.restrict(lambda a: chase(a.perms, a.bob.i0) != a.bob.j0)
    except ValueError:
        miss = None
    values = {
        "1a": cond_entropy(J, "i0", "perms"),
        "1b": cond_entropy(J, "j0", "perms"),
        "2": entropy(J.marginal("perms")),
        "3a": cond_entropy(J, "hit", ("i0", "perms")),
        "3b": cond_entropy(J, "hit", ("j0", "perms")),
        "4a": None if miss is None else cond_entropy(miss, "j0", ("i0", "perms")),
        "4b": None if miss is None else cond_entropy(miss, "i0", ("j0", "perms")),
    }
    out = _entropy_conditions(params, values)
    if check_independence:
        ok, details = True, []
        for t in range(0, params.r + 1):
            holds, cells = independence_condition(D, params.r, t)
            ok &= holds
            details.append(f"t={t}: {'holds' if holds else 'fails'} on {cells} positive cells")
        out.append(ConditionResult("5", None, None, ok, "; ".join(details)))
    else:
        out.append(ConditionResult("5", None, None, None, "not checked"))
    return NoisyClassReport(params, out)


def noisy_class_check_lumped(D: LumpedPv, params: NoisyClassParams) -> NoisyClassReport:
    """Conditions (1)-(4) on a lumped table.

    Given the composite map c = pi_r o ... o pi_1 the individual permutations are
    uniform over the (n!)^(r-1) tuples with that composite and carry no further
    information about (i0, j0), so every conditional entropy given the
    permutations equals the same quantity given c, and
    H(pi_1..pi_r) = H(c) + (r - 1) log2 n!. Condition (5) needs the explicit table.
    """
    n, r = D.n, D.r
    W = D.weights.astype(np.int64)  # [composite, i0, j0]
    images = np.array([p.image for p in D.composites])
    hit = images[:, :, None] == np.arange(n)[None, None, :]  # hit[s, i0, j0]
    total = int(W.sum())

    def h_rows(rows: np.ndarray) -> float:
        # sum over rows of (row total) * H(row), divided by the overall total
        rows = rows.reshape(-1, rows.shape[-1]).astype(float)
        tot = rows.sum(axis=1)
        keep = tot > 0
        rows, tot = rows[keep], tot[keep]
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(rows > 0, rows * np.log2(np.where(rows > 0, rows, 1)), 0.0)
        return float((tot * np.log2(tot) - plogp.sum(axis=1)).sum())

    comp_tot = W.sum(axis=(1, 2))
    h_c = h_rows(comp_tot[None, :]) / total
    W_hit = np.stack([np.where(hit, 0, W), np.where(hit, W, 0)], axis=-1)  # [s, i0, j0, bit]
    miss = np.where(hit, 0, W)
    miss_total = int(miss.sum())
    values = {
        "1a": h_rows(W.sum(axis=2)) / total,
        "1b": h_rows(W.sum(axis=1)) / total,
        "2": h_c + (r - 1) * math.log2(math.factorial(n)),
        "3a": h_rows(W_hit.sum(axis=2)) / total,
        "3b": h_rows(W_hit.sum(axis=1)) / total,
        "4a": h_rows(miss) / miss_total if miss_total else None,
        "4b": h_rows(miss.transpose(0, 2, 1)) / miss_total if miss_total else None,
    }
    out = _entropy_conditions(params, values)
    out.append(ConditionResult("5", None, None, None, "not checked on a lumped table"))
    return NoisyClassReport(params, out)
