import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crglab.errors import CapExceeded
from crglab.permcore import chase
from crglab.sources import (
    PcsSample,
    PvInstance,
    enumerate_pv_lumped,
    enumerate_source,
    sample_disj,
    sample_family,
    sample_mid,
    sample_pcs,
    sample_pcs_batch,
    sample_pcs_product,
    sample_pv,
    support_size,
)
from helpers import chi2_critical, chi2_stat


def binomial_ok(hits, trials, p):
    sigma = math.sqrt(p * (1 - p) / trials)
    return abs(hits / trials - p) <= 3 * sigma


def test_pcs_n1_forced_pointer():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s = sample_pcs(3, 1, 4, rng)
        assert s.chased == 0 and s.alice.blocks[0] == s.bob.blocks[0]


@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_pcs_chased_blocks_agree(r, n, L, seed):
    s = sample_pcs(r, n, L, np.random.default_rng(seed))
    j = chase(s.perms, s.bob.i)
    assert s.alice.blocks[j] == s.bob.blocks[j]
    assert len(s.alice.perms) == (r + 1) // 2 and len(s.bob.perms) == r // 2


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_pcs_encode_roundtrip(r, n, L, seed):
    s = sample_pcs(r, n, L, np.random.default_rng(seed))
    assert PcsSample.decode(s.encode()) == s


@pytest.mark.parametrize("family,atoms,total", [("pcs", 32, 32), ("product", 64, 64), ("mid", 48, 64)])
def test_small_enumeration_counts(family, atoms, total):
    t = enumerate_source(family, r=1, n=2, L=1)
    assert len(t) == atoms and t.total == total
    assert sum(t.prob(a) for a in t) == 1
    if family != "mid":
        assert set(t.weights.values()) == {1}


def test_enumeration_support_size_matches_paths():
    for fam in ("pcs", "product", "mid"):
        assert enumerate_source(fam, r=1, n=2, L=1).total == support_size(fam, r=1, n=2, L=1)


def test_pcs_family_constraint_holds_on_every_atom():
    for s in enumerate_source("pcs", r=2, n=3, L=1):
        assert s.alice.blocks[s.chased] == s.bob.blocks[s.chased]


def test_party_marginals_match_across_families():
    mu = enumerate_source("pcs", r=1, n=2, L=1)
    for fam in ("product", "mid"):
        other = enumerate_source(fam, r=1, n=2, L=1)
        assert mu.map(lambda s: s.alice).same_distribution(other.map(lambda s: s.alice))
        assert mu.map(lambda s: s.bob).same_distribution(other.map(lambda s: s.bob))


def test_product_agreement_rate():
    rng = np.random.default_rng(3)
    L, trials = 2, 10_000
    hits = 0
    for _ in range(trials):
        s = sample_pcs_product(1, 4, L, rng)
        hits += s.alice.blocks[s.chased] == s.bob.blocks[s.chased]
    assert binomial_ok(hits, trials, 2**-L)


def test_mid_forced_index_hits_chase_one_in_n():
    # With L large, the only agreeing index is the forced one.
    rng = np.random.default_rng(4)
    trials, n = 10_000, 4
    hits = 0
    for _ in range(trials):
        s = sample_mid(1, n, 24, rng)
        agree = [k for k in range(n) if s.alice.blocks[k] == s.bob.blocks[k]]
        assert len(agree) >= 1
        hits += agree[0] == s.chased
    assert binomial_ok(hits, trials, 1 / n)


def test_pv_yes_always_chases():
    rng = np.random.default_rng(5)
    for _ in range(500):
        inst = sample_pv(3, 4, "yes", rng)
        assert chase(inst.perms, inst.bob.i0) == inst.bob.j0
        assert inst.truth and inst.label is True


def test_pv_no_hit_rate():
    rng = np.random.default_rng(6)
    trials = 10_000
    hits = sum(sample_pv(3, 4, "no", rng).truth for _ in range(trials))
    assert binomial_ok(hits, trials, 0.25)


def test_pv_rejects_even_r():
    with pytest.raises(ValueError):
        sample_pv(2, 4, "yes", np.random.default_rng(0))
    with pytest.raises(ValueError):
        enumerate_source("pv-yes", r=2, n=3)


def test_pv_enumeration_counts():
    assert len(enumerate_source("pv-no", r=1, n=2)) == 8
    assert len(enumerate_source("pv-yes", r=1, n=2)) == 4
    mix = enumerate_source("pv-mix", r=1, n=2)
    assert len(mix) == 8 and mix.total == 16
    yes_w = {mix.weight(a) for a in mix if a.truth}
    no_w = {mix.weight(a) for a in mix if not a.truth}
    assert yes_w == {3} and no_w == {1}


def test_pv_mix_truth_rate_n3():
    mix = enumerate_source("pv-mix", r=1, n=3)
    assert Fraction(mix.event_weight(lambda a: a.truth), mix.total) == Fraction(2, 3)


def test_pv_mix_is_fair_mixture():
    from crglab.table import DistTable

    for r, n in [(1, 2), (1, 3), (3, 2)]:
        mix = enumerate_source("pv-mix", r=r, n=n)
        built = DistTable.mixture([enumerate_source("pv-yes", r=r, n=n), enumerate_source("pv-no", r=r, n=n)])
        assert mix.same_distribution(built)


@given(st.integers(0, 2**32 - 1))
def test_pv_encode_roundtrip(seed):
    inst = sample_pv(3, 3, "mix", np.random.default_rng(seed))
    assert PvInstance.decode(inst.encode()) == inst
    assert PvInstance.decode(inst.unlabeled().encode()).label is None


def test_disj_counts():
    yes = enumerate_source("disj-yes", n=4)
    no = enumerate_source("disj-no", n=4)
    assert len(yes) == 4 and all(a.alice == a.bob for a in yes)
    assert len(no) == 12 and set(no.weights.values()) == {1}
    assert len(enumerate_source("disj-yes", n=8)) == support_size("disj-yes", n=8)


@given(st.sampled_from([4, 8, 12]), st.booleans(), st.integers(0, 2**32 - 1))
def test_disj_flag_matches(n, flag, seed):
    d = sample_disj(n, flag, np.random.default_rng(seed))
    assert len(d.alice) == len(d.bob) == n // 4
    assert len(d.alice & d.bob) == int(flag)
    assert d.intersecting == flag


def test_disj_rejects_bad_n():
    for n in (0, 6, 10):
        with pytest.raises(ValueError):
            sample_disj(n, True, np.random.default_rng(0))


def test_disj_sampler_uniform_n4():
    rng = np.random.default_rng(8)
    draws = 12_000
    counts = Counter((min(d.alice), min(d.bob)) for d in (sample_disj(4, False, rng) for _ in range(draws)))
    assert len(counts) == 12
    assert chi2_stat(list(counts.values()), [draws / 12] * 12) < chi2_critical(11)


def test_pcs_sampler_matches_enumeration():
    table = enumerate_source("pcs", r=1, n=2, L=1)
    atoms = list(table)
    rng = np.random.default_rng(9)
    draws = 32_000
    counts = Counter(sample_pcs(1, 2, 1, rng) for _ in range(draws))
    assert set(counts) <= set(atoms)
    expected = [draws * table.prob(a) for a in atoms]
    assert chi2_stat([counts[a] for a in atoms], expected) < chi2_critical(len(atoms) - 1)


@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_pcs_batch_constraint(r, n, L, seed):
    for s in sample_pcs_batch(r, n, L, 20, np.random.default_rng(seed)):
        j = chase(s.perms, s.bob.i)
        assert s.chased == j
        assert s.alice.blocks[j] == s.bob.blocks[j]
        assert all(0 <= b < 2**L for b in s.alice.blocks + s.bob.blocks)


def test_pcs_batch_matches_enumeration():
    table = enumerate_source("pcs", r=1, n=2, L=1)
    atoms = list(table)
    draws = 32_000
    counts = Counter(sample_pcs_batch(1, 2, 1, draws, np.random.default_rng(19)))
    assert set(counts) <= set(atoms)
    expected = [draws * table.prob(a) for a in atoms]
    assert chi2_stat([counts[a] for a in atoms], expected) < chi2_critical(len(atoms) - 1)


def test_mid_sampler_matches_enumeration():
    table = enumerate_source("mid", r=1, n=2, L=1)
    atoms = list(table)
    rng = np.random.default_rng(10)
    draws = 32_000
    counts = Counter(sample_mid(1, 2, 1, rng) for _ in range(draws))
    expected = [draws * float(table.prob(a)) for a in atoms]
    assert chi2_stat([counts[a] for a in atoms], expected) < chi2_critical(len(atoms) - 1)


def test_cap_enforced():
    with pytest.raises(CapExceeded):
        enumerate_source("pcs", r=3, n=4, L=1, cap=1000)
    with pytest.raises(CapExceeded):
        enumerate_pv_lumped(3, 8, "mix", cap=10)


def test_cap_env(monkeypatch):
    monkeypatch.setenv("CRGLAB_CAP", "10")
    with pytest.raises(CapExceeded):
        enumerate_source("pcs", r=1, n=2, L=1)


def test_lumped_mix_rows():
    lp = enumerate_pv_lumped(3, 3, "mix")
    assert lp.weights.shape == (6, 3, 3)
    assert len(set(lp.weights.sum(axis=(1, 2)).tolist())) == 1


def test_sample_family_dispatch():
    rng = np.random.default_rng(0)
    assert isinstance(sample_family("pcs", rng, r=1, n=3, L=2), PcsSample)
    assert isinstance(sample_family("pv-mix", rng, r=1, n=3), PvInstance)
    assert sample_family("disj-no", rng, n=8).n == 8
    with pytest.raises(ValueError):
        sample_family("nope", rng, n=2)
