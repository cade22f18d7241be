import pytest
from hypothesis import given, strategies as st

from oblivram.workloads import (PATTERNS, Op, format_workload, parse_workload, random_ops,
                                repeat_ops, sweep_ops)

ops_strategy = st.lists(st.one_of(
    st.builds(Op, st.just("R"), st.integers(1, 10 ** 6)),
    st.builds(Op, st.just("W"), st.integers(1, 10 ** 6), st.integers(-(1 << 62), 1 << 62))))


@given(ops_strategy)
def test_format_parse_round_trip(ops):
    assert parse_workload(format_workload(ops).splitlines()) == ops


def test_parse_skips_blanks_and_comments():
    assert parse_workload(["# header", "", "R 3", "W 4 -9"]) == [Op("R", 3), Op("W", 4, -9)]


@pytest.mark.parametrize("line", ["X 1", "R", "W 1", "R 1 2"])
def test_parse_rejects_bad_lines(line):
    with pytest.raises(ValueError):
        parse_workload([line])


def test_generators():
    ops = list(random_ops(16, 500, 3))
    assert ops == list(random_ops(16, 500, 3))
    assert all(1 <= op.addr <= 16 for op in ops)
    assert {op.kind for op in ops} == {"R", "W"}
    assert repeat_ops(8, 3) == [Op("R", 1)] * 3
    assert [op.addr for op in sweep_ops(3, 7)] == [1, 2, 3, 1, 2, 3, 1]
    assert all(len(PATTERNS[p](8, 20, 0)) == 20 for p in PATTERNS)
