import pytest
from hypothesis import given, settings, strategies as st

from oblivram.errors import CeilingViolation, ReducerStateViolation
from oblivram.mapreduce_engine import MrAlgorithm, identity_algorithm, run, run_oblivious
from oblivram.oblivious_sort import ExternalSorter


@given(st.lists(st.integers(-100, 100), min_size=1, max_size=40))
def test_identity_round_trip(xs):
    res = run(identity_algorithm(), xs)
    assert sorted(res.finals) == sorted(xs)
    assert res.message_complexity >= len(xs)
    assert res.message_complexity <= 4 * len(xs)
    obl = run_oblivious(identity_algorithm(), xs)
    assert sorted(obl.finals) == sorted(xs)


@pytest.mark.parametrize("sorter", [None, ExternalSorter(8, 1)])
def test_oblivious_trace_depends_only_on_size(sorter):
    a = run_oblivious(identity_algorithm(2), [5, 1, 5, 9, 0, 3], sorter)
    b = run_oblivious(identity_algorithm(2), [1, 2, 3, 4, 5, 6], sorter)
    assert a.trace.to_text() == b.trace.to_text()
    c = run_oblivious(identity_algorithm(2), [1, 2, 3, 4, 5, 6, 7], sorter)
    assert a.trace.to_text() != c.trace.to_text()


class _Counter:
    """Sums the values of each key group."""

    def start(self, key):
        self.key, self.total = key, 0

    def step(self, value):
        self.total += value[1]
        return []

    def finish(self):
        return [((self.key, self.total), True)]


def _sum_alg(rounds, ceiling=lambda i, n: 4 * n):
    return MrAlgorithm(lambda v: (v[0], v), _Counter, d=1, rounds=rounds, ceiling=ceiling)


def test_group_reduce_matches_engines():
    data = [(k % 3, k) for k in range(12)]
    plain = run(_sum_alg(1), data)
    obl = run_oblivious(_sum_alg(1), data)
    assert sorted(plain.finals) == sorted(obl.finals) == [(0, 18), (1, 22), (2, 26)]


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        run(identity_algorithm(), [])


def test_fanout_bound_enforced():
    class Greedy:
        def start(self, key):
            pass

        def step(self, value):
            return [(value, True), (value, True)]

        def finish(self):
            return []

    alg = MrAlgorithm(lambda v: (v, v), Greedy, d=1, rounds=1, ceiling=lambda i, n: 10 * n)
    with pytest.raises(ReducerStateViolation):
        run(alg, [1, 2])


def test_ceiling_overrun_detected():
    alg = _sum_alg(1, ceiling=lambda i, n: 1)
    with pytest.raises(CeilingViolation):
        run_oblivious(alg, [(0, 1), (1, 2), (2, 3)])
