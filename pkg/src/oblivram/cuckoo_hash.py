"""Two-table cuckoo hashing with a bounded stash, plus cuckoo-graph statistics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CapacityExceeded, DuplicateKey, NotFound, ParameterError, StashOverflow
from .hashing import HashPair

DEFAULT_C0 = 8
DEFAULT_EPSILON = 0.5


def max_keys_for(m: int, epsilon: float) -> int:
    # float floor misrounds e.g. (1 - 0.7) * 10; nudge before flooring
    return int(math.floor((1.0 - epsilon) * m + 1e-9))


class CuckooTable:
    """Sub-tables ``t1``/``t2`` of ``m`` cells each and a fixed-length stash.

    Stored keys live at ``t1[h1(x)]``, ``t2[h2(x)]`` or in the stash. Cells hold
    ``(key, value)`` tuples or ``None``.
    """

    def __init__(self, m: int, s: int, hashes: HashPair, epsilon: float = DEFAULT_EPSILON,
                 c0: int = DEFAULT_C0):
        if m < 1:
            raise ParameterError("m must be >= 1")
        if s < 0:
            raise ParameterError("stash size must be >= 0")
        if not 0.0 < epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
        if hashes.range_m != m:
            raise ParameterError("hash range does not match table size")
        self.m = m
        self.s = s
        self.epsilon = epsilon
        self.c0 = c0
        self.hashes = hashes
        self.max_keys = max_keys_for(m, epsilon)
        self.t1: list = [None] * m
        self.t2: list = [None] * m
        self.stash: list = [None] * s
        self.count = 0

    @property
    def max_moves(self) -> int:
        return self.c0 * math.ceil(math.log2(self.max_keys + 2))

    def probes(self, x: int) -> list[int]:
        """Cell indices a lookup of ``x`` touches, in the concatenated layout
        ``[t1 | t2 | stash]``; a function of ``x`` and the seeds only."""
        h1, h2 = self.hashes.both(x)
        return [h1, self.m + h2] + list(range(2 * self.m, 2 * self.m + self.s))

    def lookup(self, x: int):
        h1, h2 = self.hashes.both(x)
        found = None
        # every cell is inspected even after a hit
        for cell in (self.t1[h1], self.t2[h2], *self.stash):
            if cell is not None and cell[0] == x:
                found = cell[1]
        return found

    def __contains__(self, x: int) -> bool:
        h1, h2 = self.hashes.both(x)
        if (self.t1[h1] is not None and self.t1[h1][0] == x) or (
                self.t2[h2] is not None and self.t2[h2][0] == x):
            return True
        return any(c is not None and c[0] == x for c in self.stash)

    def insert(self, x: int, v) -> None:
        if x in self:
            raise DuplicateKey(x)
        if self.count >= self.max_keys:
            raise CapacityExceeded(f"table holds {self.count} of {self.max_keys} keys")
        undo = []
        cur = (x, v)
        side = 1
        for _ in range(self.max_moves):
            if side == 1:
                pos = self.hashes.h1(cur[0])
                table = self.t1
            else:
                pos = self.hashes.h2(cur[0])
                table = self.t2
            undo.append((table, pos, table[pos]))
            cur, table[pos] = table[pos], cur
            if cur is None:
                self.count += 1
                return
            side = 3 - side
        for i, slot in enumerate(self.stash):
            if slot is None:
                self.stash[i] = cur
                self.count += 1
                return
        for table, pos, old in reversed(undo):
            table[pos] = old
        raise StashOverflow(f"stash of size {self.s} is full")

    def remove(self, x: int) -> None:
        h1, h2 = self.hashes.both(x)
        if self.t1[h1] is not None and self.t1[h1][0] == x:
            self.t1[h1] = None
        elif self.t2[h2] is not None and self.t2[h2][0] == x:
            self.t2[h2] = None
        else:
            for i, slot in enumerate(self.stash):
                if slot is not None and slot[0] == x:
                    self.stash[i] = None
                    break
            else:
                raise NotFound(x)
        self.count -= 1

    def items(self):
        for cell in itertools.chain(self.t1, self.t2, self.stash):
            if cell is not None:
                yield cell

    def stash_occupancy(self) -> int:
        return sum(c is not None for c in self.stash)

    def is_empty(self) -> bool:
        return self.count == 0 and all(c is None for c in itertools.chain(self.t1, self.t2, self.stash))

    def check_placement(self) -> bool:
        """Full-scan validity check: every key at its own hash cell or in the stash, no repeats."""
        seen = set()
        for i, cell in enumerate(self.t1):
            if cell is not None:
                if self.hashes.h1(cell[0]) != i or cell[0] in seen:
                    return False
                seen.add(cell[0])
        for i, cell in enumerate(self.t2):
            if cell is not None:
                if self.hashes.h2(cell[0]) != i or cell[0] in seen:
                    return False
                seen.add(cell[0])
        for cell in self.stash:
            if cell is not None:
                if cell[0] in seen:
                    return False
                seen.add(cell[0])
        return len(seen) == self.count and len(self.stash) == self.s

    def cells(self) -> list:
        """Concatenated ``[t1 | t2 | stash]`` view (copies the slot list)."""
        return self.t1 + self.t2 + self.stash


def new_table(m: int, s: int, seeds, epsilon: float = DEFAULT_EPSILON, c0: int = DEFAULT_C0) -> CuckooTable:
    if not 0.0 < epsilon < 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    if isinstance(seeds, HashPair):
        hashes = seeds if seeds.range_m == m else HashPair(seeds.seed1, seeds.seed2, m)
    else:
        seed1, seed2 = seeds
        hashes = HashPair(seed1, seed2, m)
    return CuckooTable(m, s, hashes, epsilon, c0)


# ---------------------------------------------------------------------------
# cuckoo-graph instrumentation


@dataclass
class ComponentHistogram:
    sizes: list[int]            # edges (keys) per component, components with >= 1 edge
    vertex_counts: list[int]
    excess_counts: list[int]    # cyclomatic number edges - vertices + 1
    vertex_sizes: np.ndarray = field(repr=False)  # per cell: edge count of its component (0 if isolated)

    @property
    def stash_needed(self) -> int:
        """Keys no placement can fit: sum over components of max(0, edges - vertices)."""
        return sum(max(0, e - v) for e, v in zip(self.sizes, self.vertex_counts))

    def survival(self, kmax: int | None = None) -> np.ndarray:
        """Empirical ``Pr(|C_v| >= k)`` over all cells ``v`` for ``k = 0..kmax``."""
        vs = self.vertex_sizes
        kmax = int(vs.max()) + 1 if kmax is None else kmax
        counts = np.bincount(vs, minlength=kmax + 1)[: kmax + 1]
        tail = counts[::-1].cumsum()[::-1]
        return tail / len(vs)


def component_stats(keys, hashes: HashPair) -> ComponentHistogram:
    m = hashes.range_m
    keys = np.asarray(list(keys), dtype=np.int64)
    u = hashes.h1_vec(keys)
    w = hashes.h2_vec(keys) + m
    k = len(keys)
    graph = coo_matrix((np.ones(k), (u, w)), shape=(2 * m, 2 * m))
    _, labels = connected_components(graph, directed=False)
    edge_counts = np.bincount(labels[u], minlength=labels.max() + 1) if k else np.zeros(labels.max() + 1, int)
    vert_counts = np.bincount(labels, minlength=labels.max() + 1)
    has_edge = edge_counts > 0
    sizes = edge_counts[has_edge].tolist()
    verts = vert_counts[has_edge].tolist()
    excess = [e - v + 1 for e, v in zip(sizes, verts)]
    return ComponentHistogram(sizes, verts, excess, edge_counts[labels].astype(np.int64))


def brute_force_min_stash(keys, hashes: HashPair) -> int:
    """Exhaustive oracle: fewest keys that cannot be given distinct cells.

    Enumerates all ``2^k`` side choices; the number of distinct cells an
    orientation uses is the number of keys it can place.
    """
    keys = list(keys)
    m = hashes.range_m
    ends = [(hashes.h1(x), m + hashes.h2(x)) for x in keys]
    best = 0
    for mask in range(1 << len(keys)):
        used = {ends[i][(mask >> i) & 1] for i in range(len(keys))}
        if len(used) > best:
            best = len(used)
            if best == len(keys):
                break
    return len(keys) - best


def brute_force_components(keys, hashes: HashPair) -> list[int]:
    """Naive component edge counts by repeated merging; for tiny inputs only."""
    m = hashes.range_m
    groups = [({hashes.h1(x), m + hashes.h2(x)}, 1) for x in keys]
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if groups[i][0] & groups[j][0]:
                    groups[i] = (groups[i][0] | groups[j][0], groups[i][1] + groups[j][1])
                    del groups[j]
                    merged = True
                    break
            if merged:
                break
    return sorted(g[1] for g in groups)
