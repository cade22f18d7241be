import numpy as np
import pytest

from oblivram.cli import main, parse_record
from oblivram.storage_server import parse_trace
from oblivram.workloads import Op, format_workload


def _records(text):
    return [parse_record(line) for line in text.splitlines()]


def _get(recs, section):
    return [f for s, f in recs if s == section]


def test_simulate_random(capsys):
    assert main(["simulate", "--n", "256", "--ops", "600", "--seed", "2"]) == 0
    recs = _records(capsys.readouterr().out)
    assert _get(recs, "reads")[0]["mismatches"] == "0"
    assert _get(recs, "result") == [{"pass": "1"}]
    assert {c["name"] for c in _get(recs, "check")} == {"reads_match", "no_repeated_probes",
                                                         "counts_reconcile"}


def test_simulate_deterministic(capsys):
    main(["simulate", "--n", "64", "--ops", "100", "--seed", "4"])
    a = capsys.readouterr().out
    main(["simulate", "--n", "64", "--ops", "100", "--seed", "4"])
    assert capsys.readouterr().out == a


def test_simulate_writes_only_and_trace(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    wl.write_text(format_workload([Op("W", i % 32 + 1, i) for i in range(50)]))
    trace = tmp_path / "t.txt"
    out = tmp_path / "r.txt"
    code = main(["simulate", "--n", "32", "--workload", str(wl), "--trace", str(trace),
                 "--out", str(out)])
    assert code == 0
    recs = _records(out.read_text())
    assert _get(recs, "reads")[0]["checked"] == "0"
    total = sum(int(f["reads"]) + int(f["writes"]) for f in _get(recs, "level"))
    assert sum(r.count for r in parse_trace(trace.read_text())) == total


def test_simulate_bad_address(tmp_path, capsys):
    wl = tmp_path / "w.txt"
    wl.write_text("R 99\n")
    assert main(["simulate", "--n", "32", "--workload", str(wl)]) == 2


def test_trace_compare_equal(capsys):
    code = main(["trace-compare", "--n", "64", "--ops", "300", "--min-probes", "50"])
    recs = _records(capsys.readouterr().out)
    assert code == 0
    assert _get(recs, "structural")[0]["equal"] == "1"
    assert _get(recs, "server_skeleton")[0]["equal"] == "1"
    assert len(_get(recs, "uniformity_summary")) == 2


def test_trace_compare_length_mismatch(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    a.write_text("R 1\nR 2\n")
    b.write_text("R 1\n")
    assert main(["trace-compare", "--n", "16", "--workload-a", str(a), "--workload-b", str(b)]) == 2


def test_sort_bench(capsys):
    assert main(["sort-bench", "--N", "200,400", "--M", "49", "--B", "2", "--trials", "3"]) == 0
    recs = _records(capsys.readouterr().out)
    assert all(f["traces_equal"] == "1" and f["sorted"] == "1" for f in _get(recs, "sort"))
    assert main(["sort-bench", "--N", "40", "--M", "48", "--B", "2"]) == 2


def test_sort_bench_base_case(capsys):
    assert main(["sort-bench", "--N", "64", "--M", "64", "--B", "2", "--trials", "2"]) == 0
    recs = _records(capsys.readouterr().out)
    assert _get(recs, "sort")[0]["io"] == "64"


def test_cuckoo_stats_small_matches_oracle(capsys):
    assert main(["cuckoo-stats", "--n", "4", "--trials", "200"]) == 0
    recs = _records(capsys.readouterr().out)
    checks = {c["name"]: c["pass"] for c in _get(recs, "check")}
    assert checks["oracle_match"] == "1"


def test_cuckoo_stats_rejects_load(capsys):
    assert main(["cuckoo-stats", "--load", "0.6"]) == 2


def test_unknown_mode_is_usage_error(capsys):
    assert main(["simulate", "--n", "16", "--mode", "weird"]) == 2
    with pytest.raises(SystemExit):
        main(["nonsense"])
