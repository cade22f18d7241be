import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from oblivram.errors import TallCacheViolation
from oblivram.oblivious_sort import (BlockDevice, ExternalSorter, IoTrace, OddEvenSorter, arity,
                                     em_sort, em_sort_io, kway_modular_merge, oe_comparator_count,
                                     oe_comparators, oe_mergesort)


def test_four_input_network():
    net = oe_comparators(4)
    assert net == [(0, 1), (2, 3), (0, 2), (1, 3), (1, 2)]
    # zero-one principle: sorting every 0/1 input proves the network sorts
    for bits in itertools.product([0, 1], repeat=4):
        assert oe_mergesort(list(bits)) == sorted(bits)
    assert oe_mergesort([3, 1, 2, 4]) == [1, 2, 3, 4]
    assert oe_mergesort([]) == []


@pytest.mark.parametrize("n", list(range(1, 40)) + [100, 257, 1000])
def test_closed_form_comparator_count(n):
    assert oe_comparator_count(n) == len(oe_comparators(n))


@pytest.mark.parametrize("n", range(1, 13))
def test_networks_sort_all_zero_one_inputs(n):
    for bits in itertools.product([0, 1], repeat=n):
        assert oe_mergesort(list(bits)) == sorted(bits)


def test_1024_inputs_match_builtin_sort():
    rng = random.Random(3)
    data = [rng.randrange(-10 ** 6, 10 ** 6) for _ in range(1024)]
    assert oe_mergesort(data) == sorted(data)


@given(st.lists(st.tuples(st.integers(0, 5), st.text(max_size=2)), max_size=60))
def test_keyed_sort_is_a_permutation(items):
    out = OddEvenSorter().sort(items, key=lambda t: t[0])
    assert [t[0] for t in out] == sorted(t[0] for t in items)
    assert sorted(out) == sorted(items)


def test_arity():
    assert arity(27, 1) == 3
    assert arity(28, 1) == 4
    assert arity(3 * 16 ** 4 + 64, 16) == 24     # cube root of 12292 is about 23.08


def test_tall_cache_enforced():
    with pytest.raises(TallCacheViolation):
        em_sort(BlockDevice.from_records([1, 2], 2), 2, 48)
    with pytest.raises(TallCacheViolation):
        ExternalSorter(3, 1)


def _sorted_run(data, N, M, B):
    dev = BlockDevice.from_records(data, B)
    dev.io_log = IoTrace()
    em_sort(dev, N, M)
    return dev


def test_base_case_io():
    data = list(range(50, 0, -1))
    dev = _sorted_run(data, 50, 64, 2)
    r, w = dev.io_log.counts()
    assert r == w == 25
    assert [op for op, _ in dev.io_log.entries] == ["R"] * 25 + ["W"] * 25
    assert dev.peek(0, 50) == sorted(data)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(1, 700), st.sampled_from([(4, 1), (8, 1), (28, 1), (49, 2)]))
def test_em_sort_sorts_with_fixed_trace(seed, N, mb):
    M, B = mb
    rng = random.Random(seed)
    a = [rng.randrange(100) for _ in range(N)]
    b = list(range(N))
    da, db = _sorted_run(a, N, M, B), _sorted_run(b, N, M, B)
    assert da.peek(0, N) == sorted(a)
    assert db.peek(0, N) == b
    assert da.io_log == db.io_log
    assert da.io_log.counts() == em_sort_io(N, M, B)


def test_count_twin_at_larger_sizes():
    for N, M, B in [(5000, 49, 2), (3000, 3 * 2 ** 4 + 1, 2)]:
        dev = _sorted_run(list(range(N, 0, -1)), N, M, B)
        assert dev.io_log.counts() == em_sort_io(N, M, B)


def test_io_trace_round_trip():
    dev = _sorted_run([3, 1, 2] * 30, 90, 8, 1)
    assert IoTrace.parse(dev.io_log.to_text()) == dev.io_log
    with pytest.raises(ValueError):
        IoTrace.parse("X 3\n")


def test_kway_merge_examples():
    dev = BlockDevice.from_records([1, 4, 7, 2, 5, 8, 3, 6, 9], 1)
    kway_modular_merge(dev, [(0, 3), (3, 3), (6, 3)], M=4, target=None)
    assert dev.peek(9, 9) == list(range(1, 10))
    single = BlockDevice.from_records([2, 5, 9], 1)
    kway_modular_merge(single, [(0, 3)], M=4)
    assert single.peek(3, 3) == [2, 5, 9]


def check_merge_matrix(D, k):
    """Rows sorted, columns sorted, and column j <= column j + k elementwise."""
    rows, cols = len(D), len(D[0])
    bad = 0
    bad += sum(D[p][c] > D[p][c + 1] for p in range(rows) for c in range(cols - 1))
    bad += sum(D[p][c] > D[p + 1][c] for p in range(rows - 1) for c in range(cols))
    bad += sum(D[p][c] > D[p][c + k] for p in range(rows) for c in range(cols - k))
    return bad


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_merge_matrix_property(seed):
    rng = random.Random(seed)
    N = rng.randrange(50, 600)
    data = [rng.randrange(1000) for _ in range(N)]
    mats = []
    dev = BlockDevice.from_records(data, 1)
    em_sort(dev, N, 8, on_merge_matrix=lambda D, k: mats.append((D, k)))
    assert mats
    assert all(check_merge_matrix(D, k) == 0 for D, k in mats)


def test_external_sorter_keyed_and_cost():
    s = ExternalSorter(8, 1)
    items = [("b", 2), ("a", 1), ("c", 0)]
    assert s.sort(items, key=lambda t: t[1]) == [("c", 0), ("a", 1), ("b", 2)]
    assert s.cost(300) == em_sort_io(300, 8, 1)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 3)), max_size=80))
def test_counted_sorter_matches_simulated(items):
    sim, counted = ExternalSorter(8, 1), ExternalSorter(8, 1, simulate=False)
    assert sim.sort(items, key=lambda t: t[0]) == counted.sort(items, key=lambda t: t[0])
    assert sim.sort(items) == counted.sort(items)
    assert sim.cost(len(items)) == counted.cost(len(items))
