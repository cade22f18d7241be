"""Sparse-streaming MapReduce: a faithful sequential engine and its oblivious simulation.

An algorithm supplies a map function ``value -> (key, value)`` and a reducer
factory.  A reducer is a small stateful object fed one key group at a time:
``start(key)``, then ``step(value)`` per value in sorted order, then
``finish()``.  ``step`` and ``finish`` return lists of ``(value, is_final)``.
Outputs of ``finish`` are charged to the group's last value, and no value may
account for more than ``d`` outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

from .errors import CeilingViolation, ReducerStateViolation
from .oblivious_sort import OddEvenSorter
from .traces import StructuralTrace


class Reducer(Protocol):
    def start(self, key) -> None: ...

    def step(self, value) -> list[tuple[Any, bool]]: ...

    def finish(self) -> list[tuple[Any, bool]]: ...


@dataclass
class MrAlgorithm:
    map_fn: Callable[[Any], tuple[Any, Any]]
    make_reducer: Callable[[], Reducer]
    d: int
    rounds: int
    ceiling: Callable[[int, int], int] | None = None


@dataclass
class RunResult:
    finals: list
    message_complexity: int
    round_sizes: list[int] = field(default_factory=list)
    rounds_used: int = 0


def _reduce_group(red: Reducer, key, values: list, d: int) -> list[tuple[Any, bool]]:
    red.start(key)
    out = []
    last = len(values) - 1
    for i, v in enumerate(values):
        got = red.step(v)
        if i == last:
            got = got + red.finish()
        if len(got) > d:
            raise ReducerStateViolation(f"reducer emitted {len(got)} values for one input (d={d})")
        out.extend(got)
    return out


def run(alg: MrAlgorithm, inputs: list) -> RunResult:
    """Execute ``alg`` round by round; stops early once no non-final values remain."""
    if not inputs:
        raise ValueError("input must be nonempty")
    n = len(inputs)
    X = list(inputs)
    finals = []
    sizes = []
    used = 0
    for i in range(1, alg.rounds + 1):
        if not X:
            break
        used = i
        Y = [alg.map_fn(v) for v in X]
        Y.sort(key=lambda kv: (kv[0], kv[1]))
        red = alg.make_reducer()
        Z = []
        j = 0
        while j < len(Y):
            key = Y[j][0]
            k = j
            while k < len(Y) and Y[k][0] == key:
                k += 1
            Z.extend(_reduce_group(red, key, [kv[1] for kv in Y[j:k]], alg.d))
            j = k
        size = len(X) + len(Z)
        if alg.ceiling is not None and size > alg.ceiling(i, n):
            raise CeilingViolation(f"round {i}: {size} values exceed ceiling {alg.ceiling(i, n)}")
        sizes.append(size)
        finals.extend(v for v, fin in Z if fin)
        X = [v for v, fin in Z if not fin]
    return RunResult(finals, sum(sizes), sizes, used)


# ---------------------------------------------------------------------------
# oblivious simulation

_NONFINAL, _FINAL = 0, 1


@dataclass
class ObliviousRun:
    finals: list
    trace: StructuralTrace
    reads: int = 0
    writes: int = 0


def run_oblivious(alg: MrAlgorithm, inputs: list, sorter=None) -> ObliviousRun:
    """Simulate ``alg`` with array sizes fixed by its ceiling function.

    Arrays hold ``None`` for dummy slots or ``(finality, value)``.  Every scan
    covers the full ceiling-sized prefix and every sort runs over a fixed-size
    array, so the recorded trace depends on ``(rounds, ceiling, n, d)`` only.
    """
    if alg.ceiling is None:
        raise ValueError("oblivious simulation needs a ceiling function")
    sorter = sorter or OddEvenSorter()
    n = len(inputs)
    f = alg.ceiling
    d = alg.d
    trace = StructuralTrace()
    cost = {"r": 0, "w": 0}

    def charge(event, reads, writes):
        trace.add(*event, reads, writes)
        cost["r"] += reads
        cost["w"] += writes

    f1 = f(1, n)
    if n > f1:
        raise CeilingViolation(f"input of {n} exceeds ceiling {f1}")
    X = [(_NONFINAL, v) for v in inputs] + [None] * (f1 - n)
    charge(("load", 0, f1), 0, f1)
    stored = []
    violation = None
    for i in range(1, alg.rounds + 1):
        fi = f(i, n)
        if fi == 0:
            stored.append(X)
            X = []
            continue
        # map: one slot in, one slot out
        Y = []
        for slot in X[:fi]:
            if slot is None or slot[0] == _FINAL:
                Y.append(None)
            else:
                Y.append(alg.map_fn(slot[1]))
        charge(("map", i, fi), fi, fi)
        sort_keys = [(1,) if kv is None else (0, kv[0], kv[1]) for kv in Y]
        order = sorter.sort(range(fi), key=lambda j: sort_keys[j])
        Y = [Y[j] for j in order]
        charge(("sort-Y", i, fi), *sorter.cost(fi))
        # reduce: every slot writes exactly d outputs
        red = alg.make_reducer()
        Z: list = []
        pending: list | None = None
        cur_key = None
        for kv in Y:
            if kv is not None and pending is not None and kv[0] == cur_key:
                Z.extend(_pad(pending, d))
                pending = red.step(kv[1])
                continue
            if pending is not None:
                pending = pending + red.finish()
                Z.extend(_pad(pending, d))
                pending = None
            if kv is None:
                Z.extend([None] * d)
                continue
            cur_key = kv[0]
            red.start(cur_key)
            pending = red.step(kv[1])
        if pending is not None:
            pending = pending + red.finish()
            Z.extend(_pad(pending, d))
        charge(("reduce", i, fi, d * fi), fi, d * fi)
        zkeys = [2 * len(Z) + j if z is None else z[0] * len(Z) + j for j, z in enumerate(Z)]
        Z = [Z[k % len(Z)] for k in sorter.sort(zkeys)]
        charge(("sort-Z", i, d * fi), *sorter.cost(d * fi))
        if violation is None and fi < len(Z) and Z[fi] is not None:
            violation = f"round {i}: more than {fi} output values"
        nxt = f(i + 1, n) if i < alg.rounds else fi
        if violation is None and nxt < fi and Z[nxt] is not None and Z[nxt][0] == _NONFINAL:
            violation = f"round {i}: more than {nxt} non-final values"
        stored.append(X)
        X = Z[:fi] + [None] * max(0, nxt - fi)
        charge(("copy", i, len(X)), len(X), len(X))
    stored.append(X)
    total = sum(len(a) for a in stored)
    finals = [slot[1] for a in stored for slot in a if slot is not None and slot[0] == _FINAL]
    leftover = any(slot is not None and slot[0] == _NONFINAL for slot in X)
    charge(("collect", total), total, 0)
    if violation is not None:
        raise CeilingViolation(violation)
    if leftover:
        raise CeilingViolation("non-final values remain after the last round")
    return ObliviousRun(finals, trace, cost["r"], cost["w"])


def _pad(outs: list, d: int) -> list:
    if len(outs) > d:
        raise ReducerStateViolation(f"reducer emitted {len(outs)} values for one input (d={d})")
    return [(_FINAL if fin else _NONFINAL, v) for v, fin in outs] + [None] * (d - len(outs))


def identity_algorithm(rounds: int = 1) -> MrAlgorithm:
    """Maps ``x -> (x, x)`` and echoes each value as final."""

    class Echo:
        def start(self, key):
            pass

        def step(self, value):
            return [(value, True)]

        def finish(self):
            return []

    return MrAlgorithm(lambda x: (x, x), Echo, d=1, rounds=rounds, ceiling=lambda i, n: 2 * n)
