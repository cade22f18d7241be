"""Command-line harness: simulate, trace-compare, sort-bench, cuckoo-stats.

Reports are line records ``<section> key=value ...`` with a fixed field order.
Exit status: 0 when every check passes, 1 on a failed check or read mismatch,
2 on usage errors.
"""

from __future__ import annotations

import argparse
import math
import random
import sys
from dataclasses import dataclass, field

import numpy as np

from .analysis import fit_geometric_tail, fit_io_constant, probe_uniformity
from .cuckoo_hash import brute_force_components, brute_force_min_stash, component_stats
from .errors import ParameterError, TallCacheViolation
from .hashing import HashPair, derive_seed
from .oblivious_build import fast_cuckoo_cells
from .oblivious_sort import BlockDevice, IoTrace, em_sort
from .oram_core import OramConfig, oram_new, parse_mode
from .workloads import PATTERNS, parse_workload, random_ops


class UsageError(Exception):
    pass


@dataclass
class BenchReport:
    command: str
    params: dict
    records: list[tuple[str, dict]] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)

    def add(self, section: str, **fields) -> None:
        self.records.append((section, fields))

    def check(self, name: str, ok: bool) -> None:
        self.checks[name] = bool(ok)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def emit(self) -> str:
        lines = [_record("params", {"command": self.command, **self.params})]
        lines += [_record(sec, f) for sec, f in self.records]
        lines += [_record("check", {"name": k, "pass": int(v)}) for k, v in self.checks.items()]
        lines.append(_record("result", {"pass": int(self.ok)}))
        return "".join(line + "\n" for line in lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v).replace(" ", "_")


def _record(section: str, fields: dict) -> str:
    return " ".join([section] + [f"{k}={_fmt(v)}" for k, v in fields.items()])


def parse_record(line: str) -> tuple[str, dict[str, str]]:
    section, *rest = line.split()
    return section, dict(item.split("=", 1) for item in rest)


# ---------------------------------------------------------------------------
# simulate


def _initial_values(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(derive_seed(seed, 0x1A1)).integers(0, 1 << 40, n)


def _level_records(report: BenchReport, client) -> None:
    total = 0
    for name, (r, w) in client.server.level_counts().items():
        report.add("level", name=name, reads=r, writes=w)
        total += r + w
    report.check("counts_reconcile", total == client.server.trace_length())


def cmd_simulate(args) -> BenchReport:
    mode = parse_mode(args.mode)
    if args.workload:
        with open(args.workload) as fh:
            ops = parse_workload(fh)
    else:
        ops = list(random_ops(args.n, args.ops, args.seed))
    cfg = OramConfig(args.n, mode=mode, seed=args.seed, engine=args.engine,
                     trace_mode="full" if args.trace else "count")
    init = _initial_values(args.n, args.seed)
    client = oram_new(cfg, init)
    oracle = init.copy()
    base = client.physical_accesses()
    reads = mismatch = 0
    first = None
    for i, op in enumerate(ops):
        if not 1 <= op.addr <= args.n:
            raise UsageError(f"op {i}: address {op.addr} outside 1..{args.n}")
        got = client.access(op.addr, op.kind, op.value)
        want = int(oracle[op.addr - 1])
        if op.kind == "R":
            reads += 1
        if got != want:
            mismatch += 1
            if first is None:
                first = (i, op, got, want)
        if op.kind == "W":
            oracle[op.addr - 1] = op.value
    total = client.physical_accesses()
    T = len(ops)
    report = BenchReport("simulate", {"n": args.n, "mode": str(mode), "T": T, "seed": args.seed,
                                      "engine": args.engine})
    report.add("overhead", init=base, physical=total - base,
               per_op=(total - base) / T if T else 0.0)
    report.add("reads", checked=reads, mismatches=mismatch)
    if first is not None:
        i, op, got, want = first
        report.add("divergence", op=i, line=op.to_line(), got=got, expected=want)
    for lvl, cnt in sorted(client.stats.rebuilds.items()):
        report.add("rebuilds", level=lvl, count=cnt)
    report.add("rebuilds", level="full", count=client.stats.full_rebuilds)
    report.add("retries", count=client.stats.retries)
    for occ, cnt in sorted(client.stats.stash_hist.items()):
        report.add("stash", occupancy=occ, count=cnt)
    _level_records(report, client)
    report.check("reads_match", mismatch == 0)
    report.check("no_repeated_probes", client.stats.duplicate_probes == 0)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(client.server.export_trace())
    return report


# ---------------------------------------------------------------------------
# trace-compare


def _load_ops(path, pattern, n, count, seed):
    if path:
        with open(path) as fh:
            return parse_workload(fh)
    if pattern not in PATTERNS:
        raise UsageError(f"unknown pattern {pattern!r}; choose from {sorted(PATTERNS)}")
    return PATTERNS[pattern](n, count, seed)


def run_for_trace(n: int, mode, seed: int, ops, record_probes: bool = True):
    cfg = OramConfig(n, mode=mode, seed=seed, trace_mode="full", record_structure=True,
                     record_probes=record_probes)
    client = oram_new(cfg, _initial_values(n, seed))
    for op in ops:
        client.access(op.addr, op.kind, op.value)
    return client


def table_cells(client) -> dict[int, int]:
    return {i: 2 * lv.m for i, lv in client.levels.items() if lv.kind == "cuckoo"}


def cmd_trace_compare(args) -> BenchReport:
    mode = parse_mode(args.mode)
    a = _load_ops(args.workload_a, args.pattern_a, args.n, args.ops, args.seed)
    b = _load_ops(args.workload_b, args.pattern_b, args.n, args.ops, args.seed + 1)
    if len(a) != len(b):
        raise UsageError(f"workloads differ in length ({len(a)} vs {len(b)})")
    ca = run_for_trace(args.n, mode, args.seed, a)
    cb = run_for_trace(args.n, mode, args.seed, b)
    report = BenchReport("trace-compare", {"n": args.n, "mode": str(mode), "T": len(a), "seed": args.seed})
    sa, sb = ca.structural_trace(), cb.structural_trace()
    div = sa.first_divergence(sb)
    report.add("structural", events=len(sa), equal=int(div is None),
               first_divergence=-1 if div is None else div)
    ka, kb = ca.server.skeleton(), cb.server.skeleton()
    sdiv = next((i for i, (x, y) in enumerate(zip(ka, kb)) if x != y), None)
    if sdiv is None and len(ka) != len(kb):
        sdiv = min(len(ka), len(kb))
    report.add("server_skeleton", runs=len(ka), length=ca.server.trace_length(),
               equal=int(sdiv is None), first_divergence=-1 if sdiv is None else sdiv)
    report.check("structural_equal", div is None)
    report.check("server_skeleton_equal", sdiv is None)
    for tag, client in (("A", ca), ("B", cb)):
        results = probe_uniformity(client.probes, table_cells(client), args.min_probes)
        for r in results:
            report.add("uniformity", run=tag, level=r.level, epoch=r.epoch, probes=r.probes,
                       chi2=r.statistic, p=r.p_value)
        passed = sum(r.p_value >= 0.01 for r in results)
        report.add("uniformity_summary", run=tag, tests=len(results), passed=passed)
    return report


# ---------------------------------------------------------------------------
# sort-bench


def sort_trial(N: int, M: int, B: int, seed: int):
    rng = random.Random(seed)
    data = list(range(N))
    rng.shuffle(data)
    dev = BlockDevice.from_records(data, B)
    dev.io_log = IoTrace()
    em_sort(dev, N, M)
    out = dev.peek(0, N)
    return dev.io_log, out == sorted(data)


def cmd_sort_bench(args) -> BenchReport:
    Ns = [int(x) for x in str(args.N).split(",")]
    M, B = args.M, args.B
    if M <= 3 * B ** 4:
        raise UsageError(f"tall-cache assumption violated: need M > 3*B^4 = {3 * B ** 4}")
    report = BenchReport("sort-bench", {"N": ",".join(map(str, Ns)), "M": M, "B": B,
                                        "trials": args.trials, "seed": args.seed})
    ios = []
    for N in Ns:
        first = None
        same = ok = True
        for t in range(args.trials):
            log, sorted_ok = sort_trial(N, M, B, derive_seed(args.seed, N, t))
            ok &= sorted_ok
            if first is None:
                first = log
            elif log != first:
                same = False
        r, w = first.counts()
        ios.append(r + w)
        report.add("sort", N=N, reads=r, writes=w, io=r + w, traces_equal=int(same), sorted=int(ok))
        report.check(f"sorted_N{N}", ok)
        report.check(f"traces_equal_N{N}", same)
        if N <= M:
            report.check(f"base_case_N{N}", r + w == 2 * math.ceil(N / B))
    if len(Ns) >= 2:
        c, rel = fit_io_constant(Ns, ios, M, B)
        report.add("fit", C=c, spread=max(rel) / min(rel))
        for N, x in zip(Ns, rel):
            report.add("fit_point", N=N, ratio=x)
        report.check("io_within_2x", all(0.5 <= x <= 2.0 for x in rel))
    return report


# ---------------------------------------------------------------------------
# cuckoo-stats


def cuckoo_trial(n: int, m: int, seed: int):
    rng = np.random.default_rng(derive_seed(seed, 0xCC))
    keys = rng.choice(1 << 62, size=n, replace=False).astype(np.int64)
    hashes = HashPair(derive_seed(seed, 1), derive_seed(seed, 2), m)
    return keys, hashes


def cmd_cuckoo_stats(args) -> BenchReport:
    n, load = args.n, args.load
    if not 0 < load < 0.5:
        raise UsageError("load must lie in (0, 1/2)")
    m = max(1, math.ceil(n / (2 * load)))
    s = args.stash if args.stash is not None else math.ceil(2 * math.log2(max(n, 2)))
    report = BenchReport("cuckoo-stats", {"n": n, "load": load, "m": m, "stash": s,
                                          "trials": args.trials, "seed": args.seed})
    kmax = 64
    counts = np.zeros(kmax + 1)
    occupancy: dict[int, int] = {}
    failures = 0
    oracle_ok = True
    for t in range(args.trials):
        keys, hashes = cuckoo_trial(n, m, derive_seed(args.seed, t))
        st = component_stats(keys, hashes)
        vs = np.minimum(st.vertex_sizes, kmax)
        counts += np.bincount(vs, minlength=kmax + 1)[: kmax + 1]
        stashed = int((fast_cuckoo_cells(keys, hashes) == 0).sum())
        occupancy[stashed] = occupancy.get(stashed, 0) + 1
        failures += stashed > s
        if n <= 16:
            oracle_ok &= sorted(st.sizes) == brute_force_components(keys.tolist(), hashes)
            oracle_ok &= stashed == brute_force_min_stash(keys.tolist(), hashes)
    survival = counts[::-1].cumsum()[::-1] / counts.sum()
    beta, r2 = fit_geometric_tail(survival, k_min=1)
    for k, p in enumerate(survival):
        if p > 0:
            report.add("survival", k=k, p=float(p))
    report.add("fit", beta=beta, r2=r2)
    for occ, cnt in sorted(occupancy.items()):
        report.add("stash", occupancy=occ, count=cnt)
    report.add("failures", count=failures)
    report.check("beta_below_1", beta < 1)
    if n <= 16:
        report.check("oracle_match", oracle_ok)
    return report


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oblivram", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, n=True):
        if n:
            sp.add_argument("--n", type=int, default=1024)
            sp.add_argument("--mode", default="const", help="const | sublinear:<r>")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="write the report here instead of stdout")

    sp = sub.add_parser("simulate", help="run the ORAM against a plain array")
    common(sp)
    sp.add_argument("--ops", type=int, default=4096, help="random ops when no workload is given")
    sp.add_argument("--workload")
    sp.add_argument("--engine", choices=["fast", "exact"], default="fast")
    sp.add_argument("--trace", help="also export the full server trace to this file")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("trace-compare", help="compare access skeletons of two workloads")
    common(sp)
    sp.add_argument("--ops", type=int, default=4096)
    sp.add_argument("--workload-a")
    sp.add_argument("--workload-b")
    sp.add_argument("--pattern-a", default="repeat")
    sp.add_argument("--pattern-b", default="sweep")
    sp.add_argument("--min-probes", type=int, default=1000)
    sp.set_defaults(fn=cmd_trace_compare)

    sp = sub.add_parser("sort-bench", help="external oblivious sort I/O benchmark")
    common(sp, n=False)
    sp.add_argument("--N", default="65536", help="record count, or a comma list for a fit")
    sp.add_argument("--M", type=int, default=3 * 16 ** 4 + 64)
    sp.add_argument("--B", type=int, default=16)
    sp.add_argument("--trials", type=int, default=3)
    sp.set_defaults(fn=cmd_sort_bench)

    sp = sub.add_parser("cuckoo-stats", help="cuckoo graph component and stash statistics")
    common(sp, n=False)
    sp.add_argument("--n", type=int, default=4096)
    sp.add_argument("--load", type=float, default=1 / 3, help="keys per cell over both tables")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--stash", type=int)
    sp.set_defaults(fn=cmd_cuckoo_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = args.fn(args)
    except (UsageError, ParameterError, TallCacheViolation, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    text = report.emit()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if not report.ok:
        div = next((f for sec, f in report.records if sec == "divergence"), None)
        if div is not None:
            print(f"mismatch at op {div['op']}: {div['line']} got {div['got']} expected {div['expected']}",
                  file=sys.stderr)
        for sec, f in report.records:
            if f.get("first_divergence", -1) >= 0:
                print(f"{sec} traces diverge at event {f['first_divergence']}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
