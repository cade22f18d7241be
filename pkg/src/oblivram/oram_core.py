"""Hierarchical ORAM client.

Levels ``H_k .. H_L`` with ``n = 2^L``.  ``H_k`` is scanned in full on every
access; levels ``k+1 .. l`` are bucket tables and ``l+1 .. L`` cuckoo tables.
Every ``2^k`` accesses the levels act as a binary counter: ``H_k`` and the
full levels directly above it are emptied into the first empty level ``j``,
which receives exactly ``2^(j-1)`` entries (unused real items padded with
dummies) plus ``2^j`` lookup dummies.  A carry that would pass ``H_{L-1}``
instead compacts everything into a fresh ``H_L``.

Cells carry ``(key, value, flags)`` where ``flags = status + 256 * level``;
the level tag is only used by the shared stash.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .cuckoo_hash import max_keys_for
from .errors import (
    BuildFailure,
    CeilingViolation,
    InfeasibleStash,
    InternalNotFound,
    KeyOutOfRange,
    ParameterError,
)
from .hashing import HashPair, derive_seed
from .oblivious_build import (
    bfs_cuckoo_assign_oblivious,
    build_schedule,
    fast_cuckoo_cells,
    schedule_cost,
)
from .oblivious_sort import ExternalSorter, OddEvenSorter
from .storage_server import CipherBox, ServerStore
from .traces import StructuralTrace

EMPTY, REAL, USED, DUMMY, PAD = 0, 1, 2, 3, 4
TAG = 256
PRIVATE_WORD_BUDGET = 32


@dataclass(frozen=True)
class ConstantMemory:
    def __str__(self):
        return "const"


@dataclass(frozen=True)
class SublinearMemory:
    r: float = 2.0

    def __post_init__(self):
        if self.r <= 1:
            raise ParameterError("r must exceed 1")

    def __str__(self):
        return f"sublinear:{self.r:g}"


def parse_mode(text: str):
    if text == "const":
        return ConstantMemory()
    if text.startswith("sublinear:"):
        return SublinearMemory(float(text.split(":", 1)[1]))
    raise ParameterError(f"unknown mode {text!r}")


@dataclass
class OramConfig:
    n: int
    mode: ConstantMemory | SublinearMemory = field(default_factory=ConstantMemory)
    seed: int = 0
    epsilon: float = 0.5
    k0: int = 3          # start level in constant-memory mode
    c_l: int = 2
    c_s: int = 2
    c_bkt: int = 3
    c_retry: int = 5
    engine: Literal["fast", "exact"] = "fast"
    trace_mode: Literal["full", "count"] = "count"
    record_structure: bool = False
    record_probes: bool = False
    record_keys: bool = False

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ParameterError("n must be a power of two >= 2")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.engine not in ("fast", "exact"):
            raise ParameterError(f"unknown engine {self.engine!r}")
        L = self.L
        lg = max(1, L)
        self.s = math.ceil(self.c_s * lg)
        if isinstance(self.mode, SublinearMemory):
            self.k = min(max(1, math.ceil(L / self.mode.r)), L - 1) if L > 1 else 0
            self.l = self.k
        else:
            self.k = min(self.k0, L - 1)
            self.l = self.k + math.ceil(math.log2(max(2, lg))) + self.c_l
            if (1 << self.k) * 3 + 8 > PRIVATE_WORD_BUDGET:
                raise ParameterError("H_k does not fit the private word budget")

    @property
    def L(self) -> int:
        return self.n.bit_length() - 1

    @property
    def shared_stash(self) -> bool:
        return isinstance(self.mode, SublinearMemory)

    @property
    def bucket_cap(self) -> int:
        return self.c_bkt * max(1, self.L)


@dataclass
class LevelState:
    i: int
    kind: str                  # "scan" | "bucket" | "cuckoo"
    cells: int
    m: int = 0                 # cuckoo: cells per sub-table; bucket: number of buckets
    full: bool = False
    d: int = 0                 # accesses since the last rebuild
    p: int = 0                 # potential
    epoch: int = 0
    hashes: HashPair | None = None
    seen: set = field(default_factory=set, repr=False)
    probe_idx: np.ndarray | None = field(default=None, repr=False)


class DummyCounterPolicy:
    """Lookup dummies of a level are ``-1 .. -count``; the ``d``-th touch after a hit probes ``-d``."""

    @staticmethod
    def count(level: LevelState, L: int) -> int:
        return 1 << level.i

    @staticmethod
    def key(level: LevelState) -> int:
        return -level.d


@dataclass
class OramStats:
    accesses: int = 0
    rebuilds: dict = field(default_factory=dict)   # level -> count
    full_rebuilds: int = 0
    retries: int = 0
    duplicate_probes: int = 0
    stash_hist: dict = field(default_factory=dict)  # occupancy -> count, sampled after builds


class OramClient:
    def __init__(self, config: OramConfig, server: ServerStore, cipher: CipherBox):
        self.cfg = config
        self.server = server
        self.cipher = cipher
        self.stats = OramStats()
        self.t = 0
        self.carries = 0
        self.pad_counter = 0
        self.structure = StructuralTrace()
        self.probes: dict[tuple[int, int], list] = {}
        self.key_log: dict[tuple[int, int], list] = {}
        cfg = config
        L, k = cfg.L, cfg.k
        self.sorter = (ExternalSorter(max(1 << k, 4), 1, simulate=False) if cfg.shared_stash else OddEvenSorter())
        self.levels: dict[int, LevelState] = {}
        for i in range(k, L + 1):
            if i == k:
                self.levels[i] = LevelState(i, "scan", 1 << k)
            elif i <= cfg.l and i < L:
                buckets = 1 << (i + 1)
                self.levels[i] = LevelState(i, "bucket", buckets * cfg.bucket_cap, m=buckets,
                                            probe_idx=np.arange(cfg.bucket_cap))
            else:
                m = self._cuckoo_m(i)
                extra = 0 if cfg.shared_stash else cfg.s
                probe = np.concatenate([[0, 0], np.arange(2 * m, 2 * m + extra)]).astype(np.int64)
                self.levels[i] = LevelState(i, "cuckoo", 2 * m + extra, m=m, probe_idx=probe)
        self.private_hk = None
        self.stash_rows = None
        self._sched_cost: dict[tuple[int, int], tuple[int, int]] = {}

    def _cuckoo_m(self, i: int) -> int:
        size = self._build_size(i)
        m = math.ceil(size / (1 - self.cfg.epsilon))
        while max_keys_for(m, self.cfg.epsilon) < size:
            m += 1
        return m

    def _build_size(self, i: int) -> int:
        if i == self.cfg.L:
            return 2 * self.cfg.n
        return (1 << (i - 1)) + (1 << i)

    # ------------------------------------------------------------------
    # cell helpers

    def _enc(self, rows: np.ndarray) -> np.ndarray:
        return self.cipher.encrypt(rows)

    def _dec(self, blobs: np.ndarray) -> np.ndarray:
        return self.cipher.decrypt(blobs)

    def _read(self, i, idx) -> np.ndarray:
        return self._dec(self.server.read(i, idx))

    def _write(self, i, idx, rows) -> None:
        self.server.write(i, idx, self._enc(rows))

    def _empty_rows(self, n: int) -> np.ndarray:
        return np.zeros((n, 3), np.int64)

    def _event(self, *ev) -> None:
        if self.cfg.record_structure:
            self.structure.add(*ev)

    # ------------------------------------------------------------------
    # initialisation

    def initialize(self, values) -> None:
        cfg = self.cfg
        lk = self.levels[cfg.k]
        if cfg.shared_stash:
            self.private_hk = self._empty_rows(lk.cells)
            self.server.allocate("stash", cfg.s)
            self.stash_rows = self._empty_rows(cfg.s)
            self.server.write_all("stash", self._enc(self.stash_rows))
        else:
            self.server.allocate(cfg.k, lk.cells)
            self.server.write_all(cfg.k, self._enc(self._empty_rows(lk.cells)))
        keys = np.arange(1, cfg.n + 1, dtype=np.int64)
        vals = np.asarray(values, dtype=np.int64)
        if len(vals) != cfg.n:
            raise ParameterError("need exactly n initial values")
        self._event("init", cfg.n)
        self._build(cfg.L, keys, vals, np.full(cfg.n, REAL, np.int64))
        self.levels[cfg.L].p = 0

    # ------------------------------------------------------------------
    # access

    def access(self, x: int, op: str = "R", value: int | None = None) -> int:
        """Read or write logical address ``x``; returns the value held before the access."""
        cfg = self.cfg
        if not 1 <= x <= cfg.n:
            raise KeyOutOfRange(x)
        if op not in ("R", "W"):
            raise ParameterError(f"unknown op {op!r}")
        if op == "W" and value is None:
            raise ParameterError("write needs a value")
        k = cfg.k
        lk = self.levels[k]
        self._event("access", self.t)
        if cfg.shared_stash:
            hk = self.private_hk
            stash = self._dec(self.server.read_all("stash"))
            self._event("stash-read", cfg.s)
        else:
            if lk.probe_idx is None:
                lk.probe_idx = np.arange(lk.cells)
            hk = self._read(k, lk.probe_idx)
            stash = None
            self._event("scan", k, lk.cells)
        hit = np.flatnonzero(hk[:, 0] == x)
        found = len(hit) > 0
        old = int(hk[hit[0], 1]) if found else None
        for i in range(k + 1, cfg.L + 1):
            lv = self.levels[i]
            if not lv.full:
                continue
            lv.d += 1
            key = x if not found else DummyCounterPolicy.key(lv)
            if key in lv.seen:
                self.stats.duplicate_probes += 1
            lv.seen.add(key)
            if cfg.record_keys:
                self.key_log.setdefault((i, lv.epoch), []).append(key)
            if lv.kind == "bucket":
                idx = lv.probe_idx + lv.hashes.h1(key) * cfg.bucket_cap
            else:
                h1, h2 = lv.hashes.both(key)
                idx = lv.probe_idx          # reused buffer; the server copies what it logs
                idx[0], idx[1] = h1, lv.m + h2
                if cfg.record_probes:
                    self.probes.setdefault((i, lv.epoch), []).extend((h1, lv.m + h2))
            rows = self._read(i, idx)
            row_keys = rows[:, 0].tolist()
            if key in row_keys:                         # keys are distinct within a level
                j = row_keys.index(key)
                flags = int(rows[j, 2])
                st = flags % TAG
                if st == REAL or st == DUMMY:
                    if st == REAL:
                        found, old = True, int(rows[j, 1])
                    rows[j, 2] = flags - st + USED
            if stash is not None and key == x:
                sm = np.flatnonzero((stash[:, 0] == key) & (stash[:, 2] == REAL + TAG * i))
                if len(sm):
                    found, old = True, int(stash[sm[0], 1])
                    stash[sm[0], 2] = USED + TAG * i
            self._write(i, idx, rows)
            self._event("probe", i, lv.kind, len(idx))
        if not found:
            raise InternalNotFound(x)
        new = old if op == "R" else int(value)
        if len(hit):
            hk[hit[0], 1] = new
        else:
            hk[lk.p] = (x, new, REAL + TAG * k)
        lk.p += 1
        if cfg.shared_stash:
            self.server.write_all("stash", self._enc(stash))
            self.stash_rows = stash
            self._event("stash-write", cfg.s)
        else:
            self.server.write_all(k, self._enc(hk))
            self._event("scan-write", k, lk.cells)
        self.t += 1
        self.stats.accesses += 1
        if lk.p == lk.cells:
            self.rebuild_cascade()
        return old

    def read(self, x: int) -> int:
        return self.access(x, "R")

    def write(self, x: int, value: int) -> int:
        return self.access(x, "W", value)

    # ------------------------------------------------------------------
    # rebuilds

    def rebuild_cascade(self) -> None:
        """Empty ``H_k`` and every full level above it into the first empty level."""
        cfg = self.cfg
        k, L = cfg.k, cfg.L
        self.carries += 1
        j = k + 1
        while j < L and self.levels[j].full:
            j += 1
        sources = list(range(k, j if j < L else L + 1))
        keys, vals = self._collect(sources)
        if j < L:
            count = 1 << (j - 1)
            pads = count - len(keys)
            if pads < 0:
                raise BuildFailure(f"{len(keys)} live items exceed level {j} budget {count}")
            pad_keys = -((1 << (L + 2)) + self.pad_counter + np.arange(pads, dtype=np.int64))
            self.pad_counter += pads
            status = np.concatenate([np.full(len(keys), REAL), np.full(pads, PAD)])
            keys = np.concatenate([keys, pad_keys])
            vals = np.concatenate([vals, np.zeros(pads, np.int64)])
            self._event("carry", j, count)
        else:
            if len(keys) != cfg.n:
                raise BuildFailure(f"expected {cfg.n} live items, found {len(keys)}")
            status = np.full(len(keys), REAL)
            lL = self.levels[L]
            lL.p += 1 << (L - 1)
            if lL.p >= 1 << L:
                lL.p = 0
                self.stats.full_rebuilds += 1
                self._event("full-rebuild", L)
            else:
                self._event("merge-rebuild", L)
        for i in sources:
            lv = self.levels[i]
            if i != k:
                lv.full = False
                self.server.drop(i)
        self._reset_scan()
        self._build(min(j, L), keys, vals, status.astype(np.int64))
        for i in range(k + 1, min(j, L)):
            self.levels[i].p = 0
        if j < L:
            self.levels[j].p = 1 << (j - 1)

    def _reset_scan(self) -> None:
        cfg = self.cfg
        lk = self.levels[cfg.k]
        lk.p = 0
        lk.epoch += 1
        if cfg.shared_stash:
            self.private_hk = self._empty_rows(lk.cells)
        else:
            self.server.write_all(cfg.k, self._enc(self._empty_rows(lk.cells)))

    def _collect(self, sources) -> tuple[np.ndarray, np.ndarray]:
        """Read every source level in full and keep the unused real items."""
        cfg = self.cfg
        parts = []
        for i in sources:
            lv = self.levels[i]
            if i == cfg.k:
                rows = self.private_hk if cfg.shared_stash else self._read(i, np.arange(lv.cells))
            elif lv.full:
                rows = self._read(i, np.arange(lv.cells))
            else:
                continue
            parts.append(rows)
        if cfg.shared_stash:
            stash = self._dec(self.server.read_all("stash"))
            tags = stash[:, 2] // TAG
            mine = np.isin(tags, sources) & (stash[:, 2] % TAG != EMPTY)
            parts.append(stash[mine])
            stash[mine] = 0
            self.stash_rows = stash
        rows = np.concatenate(parts) if parts else self._empty_rows(0)
        live = rows[rows[:, 2] % TAG == REAL]
        return live[:, 0].copy(), live[:, 1].copy()

    def _build(self, j: int, keys: np.ndarray, vals: np.ndarray, status: np.ndarray) -> None:
        cfg = self.cfg
        lv = self.levels[j]
        ndum = DummyCounterPolicy.count(lv, cfg.L)
        keys = np.concatenate([keys, -np.arange(1, ndum + 1, dtype=np.int64)])
        vals = np.concatenate([vals, np.zeros(ndum, np.int64)])
        status = np.concatenate([status, np.full(ndum, DUMMY, np.int64)])
        lv.epoch += 1
        lv.d = 0
        lv.seen = set()
        self.stats.rebuilds[j] = self.stats.rebuilds.get(j, 0) + 1
        for attempt in range(cfg.c_retry + 1):
            if attempt:
                self.stats.retries += 1
                self._event("retry", j, attempt)
            seed_labels = (j, lv.epoch, attempt)
            if lv.kind == "bucket":
                lv.hashes = HashPair.from_master(cfg.seed, lv.m, *seed_labels)
                rows = self._bucket_layout(lv, keys, vals, status)
                reads, writes = self._bucket_cost(len(keys), lv.cells)
            else:
                lv.hashes = HashPair.from_master(cfg.seed, lv.m, *seed_labels)
                rows = self._cuckoo_layout(lv, keys, vals, status)
                reads, writes = self._cuckoo_cost(len(keys), lv.m)
            self.server.charge(f"scratch-{j}", reads, writes)
            if rows is not None:
                break
        else:
            raise BuildFailure(f"level {j} failed {cfg.c_retry + 1} builds")
        self._event("rebuild", j, lv.kind, len(keys))
        self.server.allocate(j, lv.cells)
        if cfg.shared_stash and lv.kind == "cuckoo":
            table, stashed = rows
            self.server.write_all(j, self._enc(table))
            self.server.write_all("stash", self._enc(self.stash_rows))
            self._event("stash-write", cfg.s)
            occ = int(np.count_nonzero(self.stash_rows[:, 2] % TAG != EMPTY))
        else:
            self.server.write_all(j, self._enc(rows))
            occ = None
            if lv.kind == "cuckoo":
                occ = int(np.count_nonzero(rows[2 * lv.m:, 2] % TAG != EMPTY))
        if occ is not None:
            self.stats.stash_hist[occ] = self.stats.stash_hist.get(occ, 0) + 1
        lv.full = True

    def _bucket_layout(self, lv: LevelState, keys, vals, status):
        cap = self.cfg.bucket_cap
        b = lv.hashes.h1_vec(keys)
        order = np.argsort(b, kind="stable")
        bs = b[order]
        starts = np.searchsorted(bs, bs, side="left")
        slot = np.arange(len(bs)) - starts
        if len(slot) and slot.max() >= cap:
            return None
        rows = self._empty_rows(lv.cells)
        pos = bs * cap + slot
        rows[pos, 0] = keys[order]
        rows[pos, 1] = vals[order]
        rows[pos, 2] = status[order] + TAG * lv.i
        return rows

    def _bucket_cost(self, n_items: int, cells: int) -> tuple[int, int]:
        # sort items with one tagged slot per cell, scan, sort back, as in the cuckoo layout step
        size = n_items + cells
        r1, w1 = self.sorter.cost(size)
        return 2 * r1 + size, 2 * w1 + size

    def _cuckoo_cost(self, n_items: int, m: int) -> tuple[int, int]:
        # the schedule depends on sizes only, so it is computed once per shape
        key = (n_items, m)
        if key not in self._sched_cost:
            reads, writes = schedule_cost(build_schedule(n_items, m, self.cfg.s, self.sorter))
            self._sched_cost[key] = (reads - 2 * m, writes - 2 * m)   # final layout written by the caller
        return self._sched_cost[key]

    def _cuckoo_layout(self, lv: LevelState, keys, vals, status):
        cfg = self.cfg
        m = lv.m
        if cfg.shared_stash:
            free = np.flatnonzero(self.stash_rows[:, 2] % TAG == EMPTY)
            capacity = len(free)
        else:
            capacity = cfg.s
        if cfg.engine == "exact":
            try:
                assignment, _ = bfs_cuckoo_assign_oblivious(keys.tolist(), lv.hashes, capacity, self.sorter)
            except (InfeasibleStash, CeilingViolation):
                return None
            pos = {x: c for c, x in assignment.pairs}
            order = np.argsort(keys, kind="stable")
            cells = np.array([pos[int(x)] for x in keys[order]], np.int64)
        else:
            order = np.argsort(keys, kind="stable")
            cells = fast_cuckoo_cells(keys[order], lv.hashes)
        stashed = cells == 0
        if stashed.sum() > capacity:
            return None
        ks, vs, ss = keys[order], vals[order], status[order] + TAG * lv.i
        if cfg.shared_stash:
            table = self._empty_rows(2 * m)
            placed = ~stashed
            table[cells[placed] - 1] = np.stack([ks[placed], vs[placed], ss[placed]], axis=1)
            slots = free[: stashed.sum()]
            self.stash_rows[slots] = np.stack([ks[stashed], vs[stashed], ss[stashed]], axis=1)
            return table, slots
        rows = self._empty_rows(lv.cells)
        placed = ~stashed
        rows[cells[placed] - 1] = np.stack([ks[placed], vs[placed], ss[placed]], axis=1)
        rows[2 * m: 2 * m + stashed.sum()] = np.stack([ks[stashed], vs[stashed], ss[stashed]], axis=1)
        return rows

    # ------------------------------------------------------------------
    # reporting

    def structural_trace(self) -> StructuralTrace:
        return self.structure

    def physical_accesses(self) -> int:
        return self.server.trace_length()


def oram_new(config: OramConfig, initial=None, server: ServerStore | None = None,
             cipher: CipherBox | None = None) -> OramClient:
    """Create a client over ``server`` and build ``H_L`` from ``initial`` (zeros by default)."""
    cipher = cipher or CipherBox(derive_seed(config.seed, 0xE4C))
    server = server or ServerStore(cipher.blob_words, config.trace_mode)
    client = OramClient(config, server, cipher)
    client.initialize(np.zeros(config.n, np.int64) if initial is None else initial)
    return client


def access(client: OramClient, x: int, op: str = "R", value: int | None = None) -> int:
    return client.access(x, op, value)


def rebuild_cascade(client: OramClient) -> None:
    client.rebuild_cascade()


def structural_trace(client: OramClient) -> StructuralTrace:
    return client.structural_trace()
