"""Data-oblivious sorting.

``oe_mergesort`` applies Batcher's odd-even merge network, whose comparator
sequence depends only on the input length.  ``em_sort`` is the external-memory
k-way modular mergesort: it runs against a :class:`BlockDevice` and every block
it reads or writes is a function of ``(N, M, B)`` alone.
"""

from __future__ import annotations

import functools
import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import TallCacheViolation

# ---------------------------------------------------------------------------
# Batcher odd-even mergesort


@functools.lru_cache(maxsize=None)
def _oe_stages(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    stages = []
    p = 1
    while p < n:
        k = p
        while k >= 1:
            lo, hi = [], []
            for j in range(k % p, n - k, 2 * k):
                for i in range(min(k, n - j - k)):
                    if (i + j) // (2 * p) == (i + j + k) // (2 * p):
                        lo.append(i + j)
                        hi.append(i + j + k)
            if lo:
                stages.append((np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)))
            k //= 2
        p *= 2
    return tuple(stages)


def oe_stages(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Comparator stages for length ``n``; comparators within a stage are disjoint."""
    return _oe_stages(n)


def oe_comparators(n: int) -> list[tuple[int, int]]:
    return [(int(a), int(b)) for lo, hi in oe_stages(n) for a, b in zip(lo, hi)]


@functools.lru_cache(maxsize=None)
def oe_comparator_count(n: int) -> int:
    """Comparators in the length-``n`` network, counted per stage in closed form."""
    total = 0
    p = 1
    while p < n:
        k = p
        while k >= 1:
            span = n - k  # comparator (a, a + k) needs a < n - k
            if span > 0:
                q, rem = divmod(span, 2 * p)
                if k == p:
                    total += q * p + min(rem, p)
                else:
                    x = min(rem, 2 * p - k)
                    total += q * (p - k) + (x // (2 * k)) * k + max(0, x % (2 * k) - k)
            k //= 2
        p *= 2
    return total


def _to_object_array(items) -> np.ndarray:
    items = list(items)
    arr = np.empty(len(items), dtype=object)
    for i, v in enumerate(items):
        arr[i] = v
    return arr


def oe_mergesort(items, key: Callable | None = None) -> list:
    """Sort by running the odd-even merge network over ``items``."""
    items = list(items)
    n = len(items)
    if n < 2:
        return items
    if key is None and all(type(v) is int for v in items):
        arr = np.array(items, dtype=np.int64)
        for lo, hi in oe_stages(n):
            a, b = arr[lo], arr[hi]
            arr[lo] = np.minimum(a, b)
            arr[hi] = np.maximum(a, b)
        return arr.tolist()
    keys = _to_object_array(items if key is None else map(key, items))
    perm = np.arange(n)
    for lo, hi in oe_stages(n):
        a, b = keys[lo], keys[hi]
        swap = np.less(b, a).astype(bool)
        if swap.any():
            sl, sh = lo[swap], hi[swap]
            keys[sl], keys[sh] = b[swap], a[swap]
            perm[sl], perm[sh] = perm[sh], perm[sl].copy()
    return [items[i] for i in perm]


class OddEvenSorter:
    """In-memory oblivious sorter; each comparator reads and rewrites two cells."""

    name = "odd-even"

    def sort(self, items, key=None) -> list:
        return oe_mergesort(items, key=key)

    def cost(self, n: int) -> tuple[int, int]:
        c = oe_comparator_count(n)
        return 2 * c, 2 * c

    def touches(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices and ops (0 read, 1 write) in the order the network issues them."""
        if n < 2:
            return np.zeros(0, np.int64), np.zeros(0, np.int8)
        lo = np.concatenate([s[0] for s in oe_stages(n)])
        hi = np.concatenate([s[1] for s in oe_stages(n)])
        idx = np.stack([lo, hi, lo, hi], axis=1).ravel()
        ops = np.tile(np.array([0, 0, 1, 1], np.int8), len(lo))
        return idx, ops


# ---------------------------------------------------------------------------
# external memory


@functools.total_ordering
class _Infinity:
    __slots__ = ()

    def __lt__(self, other):
        return False

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return 0x1F

    def __repr__(self):
        return "INF"


INF = _Infinity()


@dataclass
class IoTrace:
    entries: list[tuple[str, int]] = field(default_factory=list)

    def append(self, op: str, idx: int) -> None:
        self.entries.append((op, idx))

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, IoTrace) and self.entries == other.entries

    def counts(self) -> tuple[int, int]:
        reads = sum(1 for op, _ in self.entries if op == "R")
        return reads, len(self.entries) - reads

    def to_text(self) -> str:
        return "".join(f"{op} {idx}\n" for op, idx in self.entries)

    @classmethod
    def parse(cls, text: str) -> "IoTrace":
        out = cls()
        for line in text.splitlines():
            if line.strip():
                op, idx = line.split()
                if op not in ("R", "W"):
                    raise ValueError(f"bad trace record {line!r}")
                out.append(op, int(idx))
        return out


class BlockDevice:
    """Simulated external memory of fixed-size blocks; logs every block I/O."""

    def __init__(self, block_size: int):
        if block_size < 1:
            raise ValueError("block size must be positive")
        self.B = block_size
        self.blocks: list[list] = []
        self.io_log = IoTrace()

    @classmethod
    def from_records(cls, records: Iterable, block_size: int) -> "BlockDevice":
        dev = cls(block_size)
        records = list(records)
        off = dev.allocate(len(records))
        dev.poke(off, records)
        return dev

    def allocate(self, n_records: int) -> int:
        """Append a block-aligned region and return its record offset."""
        off = len(self.blocks) * self.B
        nblocks = -(-n_records // self.B)
        self.blocks.extend([INF] * self.B for _ in range(nblocks))
        return off

    @property
    def capacity(self) -> int:
        return len(self.blocks) * self.B

    def read_block(self, b: int) -> list:
        self.io_log.append("R", b)
        return list(self.blocks[b])

    def write_block(self, b: int, data: list) -> None:
        if len(data) != self.B:
            raise ValueError("partial block write")
        self.io_log.append("W", b)
        self.blocks[b] = list(data)

    # unlogged access, for setup and inspection only
    def poke(self, offset: int, records: list) -> None:
        for i, r in enumerate(records):
            b, o = divmod(offset + i, self.B)
            self.blocks[b][o] = r

    def peek(self, offset: int, n: int) -> list:
        return [self.blocks[(offset + i) // self.B][(offset + i) % self.B] for i in range(n)]


class _Reader:
    """Sequential reader of a run; positions past ``length`` yield INF without I/O."""

    def __init__(self, dev: BlockDevice, offset: int, length: int, mem: "_Mem"):
        self.dev, self.offset, self.length, self.mem = dev, offset, length, mem
        self.pos = 0
        self.cur_block = -1
        self.buf = None

    def next(self):
        pos = self.pos
        self.pos += 1
        if pos >= self.length:
            return INF
        b, o = divmod(self.offset + pos, self.dev.B)
        if b != self.cur_block:
            if self.buf is None:
                self.mem.add(self.dev.B)
            self.buf = self.dev.read_block(b)
            self.cur_block = b
        return self.buf[o]

    def close(self):
        if self.buf is not None:
            self.mem.add(-self.dev.B)
            self.buf = None


class _Writer:
    """Block-aligned sequential writer that holds back a partial trailing block."""

    def __init__(self, dev: BlockDevice, offset: int, mem: "_Mem"):
        assert offset % dev.B == 0
        self.dev, self.block, self.mem = dev, offset // dev.B, mem
        self.buf: list = []
        mem.add(dev.B)

    def put(self, x) -> None:
        self.buf.append(x)
        if len(self.buf) == self.dev.B:
            self.dev.write_block(self.block, self.buf)
            self.block += 1
            self.buf = []

    def close(self) -> None:
        if self.buf:
            self.dev.write_block(self.block, self.buf + [INF] * (self.dev.B - len(self.buf)))
            self.block += 1
            self.buf = []
        self.mem.add(-self.dev.B)


class _Mem:
    """Tracks records resident in private memory."""

    def __init__(self):
        self.cur = 0
        self.peak = 0

    def add(self, k: int) -> None:
        self.cur += k
        self.peak = max(self.peak, self.cur)


def arity(M: int, B: int) -> int:
    """Smallest integer k with k^3 >= M/B."""
    k = 1
    while k ** 3 * B < M:
        k += 1
    return k


@dataclass
class SortStats:
    peak_memory: int = 0
    merge_matrices: list = field(default_factory=list)


def _check_tall_cache(M: int, B: int) -> None:
    if M <= 3 * B ** 4:
        raise TallCacheViolation(f"need M > 3*B^4 = {3 * B ** 4}, got M = {M}")


def em_sort(device: BlockDevice, N: int, M: int, offset: int = 0,
            on_merge_matrix: Callable | None = None, stats: SortStats | None = None) -> IoTrace:
    """Sort records ``[offset, offset + N)`` of ``device`` in place; returns the device's I/O log."""
    B = device.B
    _check_tall_cache(M, B)
    if offset % B:
        raise ValueError("sort region must start on a block boundary")
    mem = _Mem()
    _sort(device, offset, N, M, mem, on_merge_matrix)
    if stats is not None:
        stats.peak_memory = max(stats.peak_memory, mem.peak)
    return device.io_log


def _sort(dev: BlockDevice, offset: int, N: int, M: int, mem: _Mem, hook) -> None:
    B = dev.B
    if N == 0:
        return
    if N <= M:
        nblocks = -(-N // B)
        data = []
        mem.add(nblocks * B)
        for b in range(nblocks):
            data.extend(dev.read_block(offset // B + b))
        data = sorted(data[:N]) + data[N:]
        for b in range(nblocks):
            dev.write_block(offset // B + b, data[b * B:(b + 1) * B])
        mem.add(-nblocks * B)
        return
    k = arity(M, B)
    sub = -(-(-(-N // k)) // B) * B
    runs = []
    for i in range(k):
        length = min(sub, N - i * sub)
        assert length > 0, "subarray split left an empty run"
        _sort(dev, offset + i * sub, length, M, mem, hook)
        runs.append((offset + i * sub, length))
    _kway_merge(dev, runs, sub, offset, N, M, mem, hook)


def kway_modular_merge(device: BlockDevice, runs: list[tuple[int, int]], M: int,
                       target: int | None = None, on_merge_matrix: Callable | None = None,
                       stats: SortStats | None = None) -> IoTrace:
    """Merge sorted runs ``(offset, length)`` on ``device`` into a block-aligned target region.

    Runs shorter than the longest are treated as padded with INF.  When
    ``target`` is None a fresh region is allocated; the merged records start at
    ``target``.  Returns the device's I/O log.
    """
    _check_tall_cache(M, device.B)
    n = max(length for _, length in runs)
    total = sum(length for _, length in runs)
    if target is None:
        target = device.allocate(total)
    mem = _Mem()
    _kway_merge(device, runs, n, target, total, M, mem, on_merge_matrix)
    if stats is not None:
        stats.peak_memory = max(stats.peak_memory, mem.peak)
    return device.io_log


def _kway_merge(dev: BlockDevice, runs, n: int, target: int, total: int, M: int, mem: _Mem, hook) -> None:
    k = len(runs)
    B = dev.B
    if k == 1:
        _copy(dev, runs[0], target, total, mem)
        return
    if n * k <= M:
        readers = [_Reader(dev, off, length, mem) for off, length in runs]
        mem.add(n * k)
        lists = [[r.next() for _ in range(n)] for r in readers]
        for r in readers:
            r.close()
        w = _Writer(dev, target, mem)
        for i, x in enumerate(heapq.merge(*lists)):
            if i >= total:
                break
            w.put(x)
        w.close()
        mem.add(-n * k)
        return

    m = arity(M, B)
    n_p = -(-n // m)
    # distribute: subproblem p takes A[i, j] with j mod m == p
    regions = [dev.allocate(k * n_p) for _ in range(m)]
    writers = [_Writer(dev, regions[p], mem) for p in range(m)]
    for off, length in runs:
        r = _Reader(dev, off, length, mem)
        for j in range(m * n_p):
            writers[j % m].put(r.next())
        r.close()
    for w in writers:
        w.close()
    for p in range(m):
        sub_runs = [(regions[p] + i * n_p, n_p) for i in range(k)]
        _kway_merge(dev, sub_runs, n_p, regions[p], k * n_p, M, mem, hook)

    cols = k * n_p
    if hook is not None:
        hook([dev.peek(regions[p], cols) for p in range(m)], k)

    # slide an m x k window over D, emitting the k*m smallest each step
    rows = [_Reader(dev, regions[p], cols, mem) for p in range(m)]
    w = _Writer(dev, target, mem)
    emitted = 0
    held: list = []

    def load(ncols):
        got = []
        for r in rows:
            for _ in range(ncols):
                got.append(r.next())
        mem.add(len(got))
        return got

    col = min(2 * k, cols)
    pool = load(col)
    while True:
        pool = sorted(held + pool)
        if col >= cols:
            out, held = pool, []
        else:
            out, held = pool[: k * m], pool[k * m:]
        for x in out:
            if emitted < total:
                w.put(x)
                emitted += 1
        mem.add(-len(out))
        if col >= cols:
            break
        step = min(k, cols - col)
        pool = load(step)
        col += step
    for r in rows:
        r.close()
    w.close()


def _copy(dev: BlockDevice, run, target: int, total: int, mem: _Mem) -> None:
    off, length = run
    r = _Reader(dev, off, length, mem)
    vals = [r.next() for _ in range(total)]
    r.close()
    w = _Writer(dev, target, mem)
    for v in vals:
        w.put(v)
    w.close()


def _span(off: int, cnt: int, B: int) -> int:
    """Blocks a sequential reader touches for ``cnt`` records starting at ``off``."""
    if cnt <= 0:
        return 0
    return (off + cnt - 1) // B - off // B + 1


def em_sort_io(N: int, M: int, B: int) -> tuple[int, int]:
    """(reads, writes) :func:`em_sort` issues for ``N`` records, computed without moving data.

    Mirrors the recursion block for block; the schedule depends on ``(N, M, B)``
    only, which is what makes the sort oblivious.
    """
    _check_tall_cache(M, B)
    return _sort_io(N, M, B)


@functools.lru_cache(maxsize=None)
def _sort_io(N: int, M: int, B: int) -> tuple[int, int]:
    if N == 0:
        return 0, 0
    if N <= M:
        nb = -(-N // B)
        return nb, nb
    k = arity(M, B)
    sub = -(-(-(-N // k)) // B) * B
    r = w = 0
    runs = []
    for i in range(k):
        length = min(sub, N - i * sub)
        dr, dw = _sort_io(length, M, B)
        r, w = r + dr, w + dw
        runs.append((0, length))
    dr, dw = _merge_io(tuple(runs), sub, N, M, B)
    return r + dr, w + dw


@functools.lru_cache(maxsize=None)
def _merge_io(runs: tuple, n: int, total: int, M: int, B: int) -> tuple[int, int]:
    """``runs`` holds ``(offset mod B, length)`` pairs; only alignment affects the count."""
    k = len(runs)
    if k == 1:
        off, length = runs[0]
        return _span(off, min(total, length), B), -(-total // B)
    if n * k <= M:
        reads = sum(_span(off, min(n, length), B) for off, length in runs)
        return reads, -(-total // B)
    m = arity(M, B)
    n_p = -(-n // m)
    r = sum(_span(off, min(m * n_p, length), B) for off, length in runs)
    w = m * -(-(k * n_p) // B)
    sub_runs = tuple(((i * n_p) % B, n_p) for i in range(k))
    dr, dw = _merge_io(sub_runs, n_p, k * n_p, M, B)
    r, w = r + m * dr, w + m * dw
    cols = k * n_p
    r += m * -(-cols // B)
    w += -(-total // B)
    return r, w


class ExternalSorter:
    """Oblivious sorter backed by :func:`em_sort` on a private block device.

    With ``simulate=False`` the records are sorted directly and the block I/O
    is only counted (:func:`em_sort_io`); the output is the same and the I/O
    sequence is fixed by ``(n, M, B)`` either way.
    """

    name = "external"

    def __init__(self, M: int, B: int = 1, simulate: bool = True):
        _check_tall_cache(M, B)
        self.M, self.B = M, B
        self.simulate = simulate
        self._cost: dict[int, tuple[int, int]] = {}

    def sort(self, items, key=None) -> list:
        items = list(items)
        if key is not None:
            decorated = [(key(v), i) for i, v in enumerate(items)]
            order = self.sort(decorated)
            return [items[i] for _, i in order]
        if not self.simulate:
            return sorted(items)
        dev = BlockDevice.from_records(items, self.B)
        dev.io_log = IoTrace()
        em_sort(dev, len(items), self.M)
        self._cost.setdefault(len(items), dev.io_log.counts())
        return dev.peek(0, len(items))

    def cost(self, n: int) -> tuple[int, int]:
        """(reads, writes) for sorting ``n`` records; data-independent."""
        if n not in self._cost:
            self._cost[n] = em_sort_io(n, self.M, self.B)
        return self._cost[n]
