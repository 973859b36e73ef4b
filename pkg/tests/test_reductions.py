from collections import Counter
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crglab.engine import RandomStream
from crglab.infometrics import tv_distance
from crglab.permcore import Permutation, chase, invert
from crglab.reductions import (
    SharedRandomness,
    condition_on_message,
    disj_instance_to_crg,
    disj_to_crg,
    enumerate_disj_to_crg,
    enumerate_pv_to_crg,
    enumerate_t_removal,
    inner_inputs,
    pv_to_crg,
    split_inner,
    t_removal,
    t_removal_alice,
    t_removal_bob,
)
from crglab.sources import DisjInstance, PcsSample, enumerate_source, sample_disj, sample_pcs, sample_pv
from crglab.table import DistTable


def power(table, t):
    out = table.map(lambda s: (s,))
    for _ in range(t - 1):
        out = out.product(table).map(lambda ab: ab[0] + (ab[1],))
    return out


def test_identity_grid_reslices():
    s = sample_pcs(3, 4, 6, np.random.default_rng(0))
    (out,) = t_removal(s.alice, s.bob, SharedRandomness.identity(4, 6, 3, 1), 3, 1)
    assert out == s
    a, b = t_removal(s.alice, s.bob, SharedRandomness.identity(4, 6, 3, 2), 3, 2)
    assert a.alice.blocks == tuple(x >> 3 for x in s.alice.blocks)
    assert b.bob.blocks == tuple(x & 7 for x in s.bob.blocks)
    assert a.perms == s.perms and a.bob.i == s.bob.i


@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_t_removal_keeps_agreement(r, n, L, t, seed):
    rng = np.random.default_rng(seed)
    s = sample_pcs(r, n, L * t, rng)
    shared = SharedRandomness.draw(n, L, RandomStream((seed,)), r=r, t=t)
    outs = t_removal(s.alice, s.bob, shared, r, t)
    assert len(outs) == t
    for o in outs:
        assert o.L == L and o.alice.blocks[o.chased] == o.bob.blocks[o.chased]


@given(st.integers(0, 2**32 - 1))
def test_t_removal_is_local(seed):
    rng = np.random.default_rng(seed)
    s = sample_pcs(3, 3, 4, rng)
    other = sample_pcs(3, 3, 4, rng)
    shared = SharedRandomness.draw(3, 2, RandomStream((seed,)), r=3, t=2)
    alice_part = [o.alice for o in t_removal(s.alice, s.bob, shared, 3, 2)]
    assert alice_part == [o.alice for o in t_removal(s.alice, other.bob, shared, 3, 2)]
    assert tuple(alice_part) == t_removal_alice(s.alice, shared, 3, 2)
    bob_part = [o.bob for o in t_removal(s.alice, s.bob, shared, 3, 2)]
    assert tuple(bob_part) == t_removal_bob(s.bob, shared, 3, 2)


def test_t_removal_dimension_mismatch():
    s = sample_pcs(1, 2, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        t_removal(s.alice, s.bob, SharedRandomness.identity(2, 1, 3, 2), 1, 2)
    with pytest.raises(ValueError):
        t_removal(s.alice, s.bob, SharedRandomness.identity(2, 1, 1, 3), 1, 3)


def test_block_relabel_needs_inverse_on_three_cycle():
    # A relabel by sigma_r(k) instead of its inverse moves the shared block
    # away from the chased index whenever sigma_r is not an involution.
    cyc = Permutation((1, 2, 0))
    e = Permutation.identity(3)
    shared = SharedRandomness(3, 1, ((e,), (cyc,)), ())
    rng = np.random.default_rng(3)
    for _ in range(50):
        s = sample_pcs(1, 3, 8, rng)
        (out,) = t_removal(s.alice, s.bob, shared, 1, 1)
        j = out.chased
        assert out.alice.blocks[j] == s.alice.blocks[s.chased]
        wrong = tuple(s.alice.blocks[cyc(k)] for k in range(3))
        assert j == cyc(s.chased)
        assert wrong[j] == s.alice.blocks[cyc(cyc(s.chased))]
        assert cyc(cyc(s.chased)) != s.chased


@pytest.mark.slow
def test_t_removal_exact_three_points():
    src = enumerate_source("pcs", r=1, n=3, L=1)
    out = enumerate_t_removal(src, 1, 1).map(lambda o: o[0])
    assert tv_distance(out, src) == 0


@pytest.mark.parametrize("family", ["pcs", "product"])
def test_t_removal_exact_small(family):
    src = enumerate_source(family, r=1, n=2, L=2)
    out = enumerate_t_removal(src, 1, 2)
    assert tv_distance(out, power(enumerate_source(family, r=1, n=2, L=1), 2)) == 0


def test_disj_shared_block_on_intersection():
    rng = np.random.default_rng(1)
    for k in range(200):
        inst = sample_disj(8, True, rng)
        shared = SharedRandomness.draw(8, 4, RandomStream((k,)))
        out = disj_instance_to_crg(inst, shared, 3, 4, rng, rng)
        (j,) = inst.alice & inst.bob
        assert out.alice.blocks[j] == out.bob.blocks[j] == shared.pool[j]


def test_disj_disjoint_collision_rate():
    rng = np.random.default_rng(2)
    trials, hits = 4000, 0
    for k in range(trials):
        inst = sample_disj(4, False, rng)
        shared = SharedRandomness.draw(4, 4, RandomStream((k,)))
        out = disj_instance_to_crg(inst, shared, 1, 4, rng, rng)
        hits += out.alice.blocks[0] == out.bob.blocks[0]
    p = 1 / 16
    assert abs(hits / trials - p) <= 3 * np.sqrt(p * (1 - p) / trials)


def test_disj_errors():
    shared = SharedRandomness.draw(4, 1, RandomStream((0,)))
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        disj_to_crg("carol", {0}, shared, 1, 1, rng)
    with pytest.raises(ValueError):
        disj_to_crg("alice", {7}, shared, 1, 1, rng)
    with pytest.raises(ValueError):
        disj_to_crg("alice", {0}, shared, 1, 2, rng)


@pytest.mark.parametrize("family,target", [("disj-yes", "mid"), ("disj-no", "product")])
def test_disj_exact(family, target):
    out = enumerate_disj_to_crg(enumerate_source(family, n=4), 1, 1)
    assert tv_distance(out, enumerate_source(target, r=1, n=4, L=1)) == 0


def test_pv_yes_shares_chased_block():
    rng = np.random.default_rng(4)
    for k in range(200):
        inst = sample_pv(3, 4, "yes", rng)
        a, b = pv_to_crg(inst, SharedRandomness.draw(4, 3, RandomStream((k,))), 3, rng)
        s = PcsSample(3, a, b)
        assert a.blocks[s.chased] == b.blocks[s.chased]


def test_pv_pool_mismatch():
    inst = sample_pv(1, 3, "yes", np.random.default_rng(0))
    with pytest.raises(ValueError):
        pv_to_crg(inst, SharedRandomness.draw(4, 1, RandomStream((0,))), 1, np.random.default_rng(0))


@pytest.mark.parametrize("family,target", [("pv-yes", "pcs"), ("pv-no", "mid")])
def test_pv_exact(family, target):
    out = enumerate_pv_to_crg(enumerate_source(family, r=1, n=2), 1)
    assert tv_distance(out, enumerate_source(target, r=1, n=2, L=1)) == 0


def first_bit(alice):
    return alice.perms[0].image[0] & 1


def test_conditioning_constant_message_reconstructs_marginal():
    D = enumerate_source("pv-mix", r=3, n=2)
    pieces = [
        condition_on_message(D, lambda a: 0, 0, i0, j0, project=True) for i0 in range(2) for j0 in range(2)
    ]
    total = DistTable.mixture(pieces, [p.total for p in pieces])
    assert total.same_distribution(D.map(inner_inputs))


def test_conditioning_weights_partition():
    D = enumerate_source("pv-mix", r=3, n=2)
    parts = [condition_on_message(D, first_bit, v) for v in (0, 1)]
    assert sum(p.total for p in parts) == D.total


def test_conditioning_matches_direct_restriction():
    D = enumerate_source("pv-mix", r=3, n=3)
    got = condition_on_message(D, first_bit, 1, 0, 2, project=True)
    direct: Counter = Counter()
    for inst, w in D.items():
        if first_bit(inst.alice) == 1 and inst.bob.i0 == 0 and inst.bob.j0 == 2:
            p = inst.perms
            direct[(p[0](0), invert(p[2])(2), (p[1],))] += w
    assert got.same_distribution(DistTable(direct))


def test_conditioning_zero_weight():
    D = enumerate_source("pv-yes", r=1, n=2)
    with pytest.raises(ValueError, match="zero weight"):
        condition_on_message(D, first_bit, 5)


def test_inner_inputs_chase_consistency():
    rng = np.random.default_rng(6)
    for _ in range(200):
        inst = sample_pv(5, 4, "mix", rng)
        i1, j1, mids = inner_inputs(inst)
        assert len(mids) == 3
        assert (chase(mids, i1) == j1) == inst.truth
        (a_i1, a_j1, a_perms), b_perms = split_inner((i1, j1, mids))
        assert (a_i1, a_j1) == (i1, j1)
        assert a_perms == (mids[1],) and b_perms == (mids[0], mids[2])
