import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oblivram.cuckoo_hash import (brute_force_components, brute_force_min_stash,
                                  component_stats, new_table)
from oblivram.errors import DuplicateKey, NotFound, ParameterError, StashOverflow
from oblivram.hashing import HashPair

S0 = (11, 22)


def test_new_table_sizes():
    t = new_table(8, 2, S0, 0.5)
    assert t.max_keys == 4
    assert len(t.cells()) == 16 + 2 and t.is_empty()
    assert new_table(1, 0, S0, 0.5).max_keys == 0
    assert new_table(1024, 8, S0, 0.25).max_keys == 768


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
def test_new_table_rejects_bad_epsilon(eps):
    with pytest.raises(ParameterError):
        new_table(8, 2, S0, eps)


def test_insert_lookup_remove():
    t = new_table(16, 2, S0)
    assert t.lookup(7) is None
    t.insert(7, "A")
    assert t.t1[t.hashes.h1(7)] == (7, "A")
    assert t.lookup(7) == "A"
    with pytest.raises(DuplicateKey):
        t.insert(7, "B")
    t.remove(7)
    assert t.lookup(7) is None
    with pytest.raises(NotFound):
        t.remove(7)


def test_insert_remove_cycles_return_to_empty():
    t = new_table(16, 2, S0)
    for i in range(1000):
        t.insert(42, i)
        t.remove(42)
        assert t.is_empty()


def _colliding_keys(m, count, seeds=S0):
    h = HashPair(*seeds, m)
    target = h.both(0)
    out = [x for x in range(1, 10_000) if h.both(x) == target][: count - 1]
    return [0] + out, h


def test_third_parallel_key_lands_in_stash():
    keys, h = _colliding_keys(64, 3)
    assert brute_force_min_stash(keys, h) == 1
    t = new_table(64, 1, h)
    for x in keys:
        t.insert(x, x)
    assert t.stash_occupancy() == 1
    assert all(t.lookup(x) == x for x in keys)
    assert t.check_placement()
    t2 = new_table(64, 0, h)
    t2.insert(keys[0], 0)
    t2.insert(keys[1], 1)
    with pytest.raises(StashOverflow):
        t2.insert(keys[2], 2)
    # a failed insert leaves the table unchanged
    assert sorted(t2.items()) == [(keys[0], 0), (keys[1], 1)]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 200))
def test_random_inserts_stay_valid(seed, n):
    rng = random.Random(seed)
    t = new_table(512, 8, (seed, seed + 1))
    keys = rng.sample(range(-10 ** 9, 10 ** 9), n)
    for x in keys:
        t.insert(x, x * 3)
    assert t.check_placement()
    assert all(t.lookup(x) == 3 * x for x in keys)
    assert t.lookup(10 ** 9 + 5) is None


def test_half_load_stash_usually_empty():
    # 512 keys into m=1024 per table; a nonzero stash is rare
    nonzero = 0
    for trial in range(20):
        t = new_table(1024, 8, (trial, trial + 100))
        for x in range(512):
            t.insert(x + trial * 10_000, 0)
        nonzero += t.stash_occupancy() > 0
    assert nonzero <= 1


def test_component_stats_examples():
    h = HashPair(*S0, 32)
    st1 = component_stats([5], h)
    assert st1.sizes == [1] and st1.vertex_counts == [2]
    keys, h = _colliding_keys(64, 4)
    st4 = component_stats(keys, h)
    assert st4.sizes == [4] and st4.stash_needed == 2
    assert brute_force_min_stash(keys, h) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 10), st.integers(2, 12))
def test_component_stats_match_brute_force(seed, n, m):
    h = HashPair(seed, seed ^ 0xABC, m)
    keys = list(range(seed % 1000, seed % 1000 + n))
    stats = component_stats(keys, h)
    assert sorted(stats.sizes) == brute_force_components(keys, h)
    assert stats.stash_needed == brute_force_min_stash(keys, h)


def test_survival_is_monotone():
    h = HashPair(1, 2, 300)
    s = component_stats(np.arange(200), h).survival()
    assert s[0] == 1.0
    assert np.all(np.diff(s) <= 0)
