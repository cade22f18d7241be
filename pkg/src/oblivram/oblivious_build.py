"""Oblivious construction of cuckoo tables.

The construction runs many overlapping breadth-first searches over the cuckoo
graph as a sparse-streaming MapReduce algorithm.  Cells are vertices and each
key is an edge between its two cells.  Search vertices are numbered with the
``t2`` cells first (``0..m-1`` is ``t2[0..m-1]``, ``m..2m-1`` is ``t1``), so a
key's edge is ``(h2(x), m + h1(x))``.  Every ``t2`` vertex starts a search
labelled with the smallest key on its edges; a vertex adopts any strictly
smaller label that reaches it and takes as parent the lowest-numbered neighbour
offering it.  The surviving search in each component is rooted at ``h2`` of the
component's smallest key, so the result is a BFS tree, and a lone key ends up
in its ``h1`` cell.

A root declares its component settled once every vertex in its tree has kept
its label, agreeing with all neighbours, for long enough to cover one common
round; the echo of per-subtree ``stable + depth`` minima carries that proof up
the tree.  A finish wave then walks back down.  Each non-root vertex stores the
key of its parent edge; the smallest non-tree key of the component is placed by
a reverse cuckoo shift along the path from its ``t2`` endpoint to the root; all
other non-tree keys go to the stash.

Assignments use 1-based cell numbers over the concatenated ``[t1 | t2]`` layout
and cell ``0`` for the stash.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .cuckoo_hash import DEFAULT_EPSILON, CuckooTable, max_keys_for
from .errors import CeilingViolation, InfeasibleStash, ParameterError
from .hashing import HashPair
from .mapreduce_engine import MrAlgorithm, run, run_oblivious
from .oblivious_sort import OddEvenSorter
from .traces import StructuralTrace

INF = math.inf
C_BOUND = 4          # round budget constant: 3 * C_BOUND * log2(n)^2 rounds
STABLE_MARGIN = 3

# value tags; within a key group they sort vertex < message < edge < reconcile < raw
_VERTEX, _MSG, _EDGE, _RECON, _RAW = 0, 1, 2, 3, 4


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]    # (cell, key); cell 0 means stash

    @property
    def stash_keys(self) -> list[int]:
        return sorted(x for c, x in self.pairs if c == 0)

    @property
    def placed(self) -> dict[int, int]:
        return {x: c for c, x in self.pairs if c != 0}

    def normalized(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self.normalized() == other.normalized()

    def is_valid(self, keys, hashes: HashPair) -> bool:
        m = hashes.range_m
        keys = list(keys)
        if sorted(x for _, x in self.pairs) != sorted(keys):
            return False
        cells = [c for c, _ in self.pairs if c != 0]
        if len(cells) != len(set(cells)):
            return False
        for c, x in self.pairs:
            if c != 0 and c not in (hashes.h1(x) + 1, m + hashes.h2(x) + 1):
                return False
        return True


# ---------------------------------------------------------------------------
# MapReduce formulation


def _map(value):
    tag = value[0]
    if tag == _RAW:
        return (0, value[2]), value
    if tag == _EDGE:
        return (0, value[2]), value
    if tag == _VERTEX:
        return (0, value[1]), value
    if tag == _MSG:
        return (0, value[13]), value
    return (1, value[1]), value


class _BfsReducer:
    """Streaming reducer; state is a fixed handful of scalars per key group."""

    def __init__(self, m: int):
        self.m = m

    def start(self, key):
        self.kind, self.v = key
        self.loaded = False
        self.setup = False
        self.settled = False
        self.recon = []
        self.msgs = 0
        self.agree = True
        self.changed = False
        self.rmin = INF
        self.mmax = -1
        self.cand_self = INF
        self.ccand = INF
        self.csrc = -1
        self.csrc_pitem = INF
        self.finishing = False
        self.xstar = INF
        self.on_path = False

    # -- vertex groups ------------------------------------------------------
    def step(self, value):
        tag = value[0]
        if tag == _RAW:
            _, x, u, w = value
            return [((_EDGE, x, u, w), False), ((_EDGE, x, w, u), False)]
        if tag == _VERTEX:
            (_, _, self.label, self.dist, self.parent, self.pitem, self.stable, self.deg) = value
            self.loaded = True
            return []
        if tag == _MSG:
            if self.loaded:     # vertices that already finished ignore stragglers
                self._absorb(value)
            return []
        if tag == _EDGE:
            return self._edge(value)
        self.recon.append(value)
        return []

    def _absorb(self, msg):
        (_, label, dist, sender, item, s_parent, s_pitem, r, mm, cand,
         finish, xstar, path_child, _dest) = msg
        v = self.v
        if label < self.label:
            self.label, self.dist, self.parent, self.pitem = label, dist + 1, sender, item
            self.changed = True
        self.msgs += 1
        if label != self.label:
            self.agree = False
        child_edge = s_parent == v and s_pitem == item
        if child_edge:
            self.rmin = min(self.rmin, r)
            self.mmax = max(self.mmax, mm)
            if cand < self.ccand:
                self.ccand, self.csrc, self.csrc_pitem = cand, sender, item
        elif v < self.m and not (self.parent == sender and self.pitem == item):
            self.cand_self = min(self.cand_self, item)
        if finish and sender == self.parent and item == self.pitem:
            self.finishing = True
            self.xstar = xstar
            self.on_path = path_child == v

    def _settle(self):
        self.settled = True
        if self.changed or not self.agree or self.msgs != self.deg:
            self.stable = 0
        else:
            self.stable += 1
        self.R = min(self.stable + self.dist, self.rmin)
        self.M = max(self.dist, self.mmax)
        self.best = min(self.cand_self, self.ccand)
        if (not self.finishing and self.dist == 0 and self.label != INF
                and self.R >= self.M + STABLE_MARGIN):
            self.finishing = True
            self.xstar = self.best
            self.on_path = self.best != INF
        self.path_child = -1
        self.item = self.pitem
        if self.finishing and self.on_path:
            if self.cand_self == self.xstar:
                self.item = self.xstar
            else:
                self.item = self.csrc_pitem
                self.path_child = self.csrc

    def _message(self, item, other, finish):
        return (_MSG, self.label, self.dist, self.v, item, self.parent, self.pitem,
                self.R, self.M, self.best, finish, self.xstar, self.path_child, other)

    def _edge(self, edge):
        _, x, me, other = edge
        if not self.loaded:
            # first round at this vertex: edges arrive in key order, so the first is the smallest
            if not self.setup:
                self.setup = True
                self.deg = 0
                if me < self.m:
                    self.label, self.dist = x, 0
                else:
                    self.label, self.dist = INF, INF
                self.parent, self.pitem, self.stable = -1, INF, 0
                self.R, self.M, self.best, self.path_child = 0, 0, INF, -1
            self.deg += 1
            return [(edge, False), (self._message(x, other, False), False)]
        out = []
        if not self.settled:
            self._settle()
            if self.finishing:
                if self.item != INF:
                    out.append((("A", self.v + 1, self.item), True))
            else:
                out.append(((_VERTEX, self.v, self.label, self.dist, self.parent, self.pitem,
                             self.stable, self.deg), False))
        if self.finishing:
            is_parent = other == self.parent and x == self.pitem
            out.append(((_MSG,) + self._message(x, other, True)[1:], False))
            out.append(((_RECON, x, me, is_parent, self.xstar), False))
        else:
            out.append((edge, False))
            out.append((self._message(x, other, False), False))
        return out

    def finish(self):
        if self.kind == 1:
            if len(self.recon) == 1:
                return [(self.recon[0], False)]
            a, b = self.recon
            if not a[3] and not b[3] and a[1] != a[4]:
                return [(("A", 0, a[1]), True)]
            return []
        if self.setup:
            return [((_VERTEX, self.v, self.label, self.dist, self.parent, self.pitem,
                      self.stable, self.deg), False)]
        return []


def round_budget(n: int) -> int:
    return 3 * C_BOUND * _lg(n) ** 2 + 4


# Per-round ceiling: round i may carry at most f(i, n) values (inputs plus
# outputs).  The first rounds move every edge, vertex and message (about 11.4n
# at load 1/2); afterwards only unsettled components remain and the volume decays
# roughly geometrically, with a floor covering the largest few components.  After
# O(log n) rounds everything must be done.  Constants come from
# scripts/measure_bfs_rounds.py; an overrun raises CeilingViolation and the
# caller reseeds.
CEIL_FULL = 12
CEIL_FULL_ROUNDS = 8
CEIL_DECAY = 0.85
CEIL_TAIL = 16         # times ceil(log2 n)^2
CEIL_LAST_BASE = 16    # last round is CEIL_LAST_BASE + CEIL_LAST_SLOPE * ceil(log2 n)
CEIL_LAST_SLOPE = 5


def _lg(n: int) -> int:
    return max(1, math.ceil(math.log2(max(n, 2))))


def last_round(n: int) -> int:
    return CEIL_LAST_BASE + CEIL_LAST_SLOPE * _lg(n)


def bfs_ceiling(i: int, n: int) -> int:
    if i > last_round(n):
        return 0
    if i <= CEIL_FULL_ROUNDS:
        return CEIL_FULL * n
    head = math.ceil(CEIL_FULL * n * CEIL_DECAY ** (i - CEIL_FULL_ROUNDS))
    return min(CEIL_FULL * n, max(head, CEIL_TAIL * _lg(n) ** 2))


def bfs_algorithm(m: int, n: int, ceiling=bfs_ceiling) -> MrAlgorithm:
    return MrAlgorithm(_map, lambda: _BfsReducer(m), d=3, rounds=round_budget(n), ceiling=ceiling)


def _raw_items(keys, hashes: HashPair) -> list:
    m = hashes.range_m
    return [(_RAW, x, hashes.h2(x), m + hashes.h1(x)) for x in keys]


def _cell(v, m):
    """1-based ``[t1 | t2]`` cell of search vertex ``v``; works on arrays too."""
    return (v + m) % (2 * m) + 1


def _to_assignment(finals, keys, stash_capacity, m) -> Assignment:
    pairs = [(_cell(c - 1, m) if c else 0, x) for tag, c, x in finals]
    got = sorted(x for _, x in pairs)
    if got != sorted(keys):
        raise CeilingViolation("BFS did not settle every key within the round budget")
    a = Assignment(pairs)
    if stash_capacity is not None and len(a.stash_keys) > stash_capacity:
        raise InfeasibleStash(len(a.stash_keys), stash_capacity)
    return a


def bfs_cuckoo_assign(keys, hashes: HashPair, stash_capacity: int | None = None,
                      ceiling=None) -> Assignment:
    """Run the MapReduce construction with the plain engine."""
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise ParameterError("keys must be distinct")
    if not keys:
        return Assignment([])
    alg = bfs_algorithm(hashes.range_m, len(keys), ceiling)
    res = run(alg, _raw_items(keys, hashes))
    return _to_assignment(res.finals, keys, stash_capacity, hashes.range_m)


def bfs_message_stats(keys, hashes: HashPair):
    """Plain run with no ceiling; returns the engine's RunResult for measurement."""
    keys = list(keys)
    alg = bfs_algorithm(hashes.range_m, len(keys), ceiling=None)
    return run(alg, _raw_items(keys, hashes))


def bfs_cuckoo_assign_oblivious(keys, hashes: HashPair, stash_capacity: int | None = None,
                                sorter=None) -> tuple[Assignment, StructuralTrace]:
    keys = list(keys)
    if len(set(keys)) != len(keys):
        raise ParameterError("keys must be distinct")
    alg = bfs_algorithm(hashes.range_m, len(keys))
    res = run_oblivious(alg, _raw_items(keys, hashes), sorter)
    return _to_assignment(res.finals, keys, stash_capacity, hashes.range_m), res.trace


# ---------------------------------------------------------------------------
# sequential twin: same output, computed directly


def direct_cuckoo_assign(keys, hashes: HashPair, stash_capacity: int | None = None) -> Assignment:
    """Compute the assignment the MapReduce construction produces, without simulating it."""
    keys = sorted(keys)
    m = hashes.range_m
    adj = defaultdict(list)
    ends = {}
    for x in keys:
        u, w = hashes.h2(x), m + hashes.h1(x)
        ends[x] = (u, w)
        adj[u].append((w, x))
        adj[w].append((u, x))
    dist = {}
    pairs = []
    for x0 in keys:
        root = ends[x0][0]
        if root in dist:
            continue
        dist[root] = 0
        order = [root]
        q = deque([root])
        while q:
            v = q.popleft()
            for w, _ in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    order.append(w)
                    q.append(w)
        parent, pitem = {root: -1}, {root: INF}
        for v in order[1:]:
            p = min(w for w, _ in adj[v] if dist[w] == dist[v] - 1)
            parent[v] = p
            pitem[v] = min(x for w, x in adj[v] if w == p)
        tree = {pitem[v] for v in order[1:]}
        comp_items = {x for v in order for _, x in adj[v]}
        nontree = sorted(comp_items - tree)
        item = dict(pitem)
        if nontree:
            xstar = nontree[0]
            v = ends[xstar][0]
            carry = xstar
            while v != -1:
                item[v], carry = carry, item[v]
                v = parent[v]
            pairs.extend((0, x) for x in nontree[1:])
        pairs.extend((_cell(v, m), item[v]) for v in order if item[v] != INF)
    a = Assignment(pairs)
    if stash_capacity is not None and len(a.stash_keys) > stash_capacity:
        raise InfeasibleStash(len(a.stash_keys), stash_capacity)
    return a


# ---------------------------------------------------------------------------
# assignment -> table layout


def convert_assignment_to_table(S: Assignment | list, table_cells: int, s: int, sorter=None,
                                hashes: HashPair | None = None, trace: StructuralTrace | None = None,
                                epsilon: float = DEFAULT_EPSILON) -> CuckooTable:
    """Lay an assignment out as a standard table with a data-independent touch pattern.

    ``S`` holds ``(cell, payload)`` pairs where payload is a ``(key, value)``
    tuple; an :class:`Assignment` of bare keys is accepted and stored with
    ``None`` values.  ``table_cells`` covers both sub-tables.
    """
    sorter = sorter or OddEvenSorter()
    pairs = S.pairs if isinstance(S, Assignment) else list(S)
    pairs = [(c, p if isinstance(p, tuple) else (p, None)) for c, p in pairs]
    if len(pairs) - sum(c == 0 for c, _ in pairs) > table_cells:
        raise ParameterError("more placed pairs than cells")
    if sum(c == 0 for c, _ in pairs) > s:
        raise InfeasibleStash(sum(c == 0 for c, _ in pairs), s)
    if table_cells % 2:
        raise ParameterError("table_cells must be even")
    trace = trace if trace is not None else StructuralTrace()
    # tuples (cell, tag, payload); tag 0 for assignment entries, 1 for table slots
    L = [(c, 0, p) for c, p in pairs] + [(i, 1, None) for i in range(1, table_cells + 1)]
    L = sorter.sort(L, key=lambda t: (t[0], t[1]))
    trace.add("convert-sort1", len(L), *sorter.cost(len(L)))
    stash = [t[2] if t[0] == 0 and t[1] == 0 else None for t in L[:s]]
    trace.add("convert-stash", s, s, s)
    prev = None
    for j, t in enumerate(L):
        if t[1] == 1 and prev is not None and prev[1] == 0 and prev[0] == t[0] and t[0] != 0:
            L[j] = (t[0], 1, prev[2])
        prev = t
    trace.add("convert-scan", len(L), len(L), len(L))
    L = sorter.sort(L, key=lambda t: (t[1], t[0]))
    trace.add("convert-sort2", len(L), *sorter.cost(len(L)))
    cells = [t[2] for t in L[len(L) - table_cells:]]
    trace.add("convert-write", table_cells, table_cells, table_cells)
    m = table_cells // 2
    if hashes is None:
        hashes = HashPair(0, 0, m)
    table = CuckooTable(m, s, hashes, epsilon)
    table.t1, table.t2 = cells[:m], cells[m:]
    table.stash = stash
    table.count = sum(c is not None for c in cells) + sum(c is not None for c in stash)
    return table


def join_values(assignment: Assignment, items, sorter=None,
                trace: StructuralTrace | None = None) -> list[tuple[int, tuple]]:
    """Attach values to assigned keys by an oblivious sort-and-scan join."""
    sorter = sorter or OddEvenSorter()
    rows = [(x, 0, v) for x, v in items] + [(x, 1, c) for c, x in assignment.pairs]
    rows = sorter.sort(rows, key=lambda r: (r[0], r[1]))
    if trace is not None:
        trace.add("join-sort", len(rows), *sorter.cost(len(rows)))
    out = []
    prev = None
    for r in rows:
        if r[1] == 1 and prev is not None and prev[0] == r[0] and prev[1] == 0:
            out.append((r[2], (r[0], prev[2])))
        prev = r
    if trace is not None:
        trace.add("join-scan", len(rows), len(rows), len(rows) // 2)
    return out


def oblivious_cuckoo_build(items, m: int, s: int, hashes: HashPair, sorter=None,
                           epsilon: float = DEFAULT_EPSILON) -> tuple[CuckooTable, StructuralTrace]:
    """Full pipeline: oblivious BFS assignment, value join, then layout conversion.

    ``items`` is a list of ``(key, value)``; hash values come from ``hashes``.
    Raises :class:`InfeasibleStash` (or :class:`CeilingViolation`) when the
    caller should retry with fresh seeds.
    """
    items = list(items)
    if hashes.range_m != m:
        raise ParameterError("hash range does not match m")
    if len(items) > max_keys_for(m, epsilon):
        raise ParameterError(f"{len(items)} items exceed (1 - eps) * m")
    sorter = sorter or OddEvenSorter()
    keys = [x for x, _ in items]
    trace = StructuralTrace()
    if keys:
        assignment, bfs_trace = bfs_cuckoo_assign_oblivious(keys, hashes, s, sorter)
        trace.extend(bfs_trace)
    else:
        assignment = Assignment([])
    pairs = join_values(assignment, items, sorter, trace)
    table = convert_assignment_to_table(pairs, 2 * m, s, sorter, hashes, trace, epsilon)
    return table, trace


# ---------------------------------------------------------------------------
# vectorized twin for bulk rebuilds


def fast_cuckoo_cells(keys: np.ndarray, hashes: HashPair) -> np.ndarray:
    """Same assignment as :func:`direct_cuckoo_assign`, vectorized.

    Returns, for ``np.sort(keys)``, the 1-based cell of each key (0 for stash).
    """
    keys = np.sort(np.asarray(keys, dtype=np.int64))
    k = len(keys)
    if k == 0:
        return np.zeros(0, np.int64)
    m = hashes.range_m
    nv = 2 * m
    u = hashes.h2_vec(keys)
    w = hashes.h1_vec(keys) + m
    graph = coo_matrix((np.ones(k), (u, w)), shape=(nv, nv)).tocsr()
    _, labels = connected_components(graph, directed=False)
    comp = labels[u]
    _, first = np.unique(comp, return_index=True)
    roots = u[first]                       # h2 of each component's smallest key
    dist = dijkstra(graph, directed=False, indices=roots, unweighted=True, min_only=True)
    # directed copies of every edge: (vertex, neighbour, key index)
    a = np.concatenate([u, w])
    b = np.concatenate([w, u])
    e = np.concatenate([np.arange(k), np.arange(k)])
    cand = dist[b] == dist[a] - 1
    a, b, e = a[cand], b[cand], e[cand]
    order = np.lexsort((e, b, a))
    a, b, e = a[order], b[order], e[order]
    head = np.ones(len(a), bool)
    head[1:] = a[1:] != a[:-1]
    parent = np.full(nv, -1, np.int64)
    pidx = np.full(nv, -1, np.int64)       # key index of the parent edge
    parent[a[head]] = b[head]
    pidx[a[head]] = e[head]
    cells = np.zeros(k, np.int64)       # search vertex + 1, 0 for stash
    tree = pidx >= 0
    cells[pidx[tree]] = np.flatnonzero(tree) + 1
    nontree = np.ones(k, bool)
    nontree[pidx[tree]] = False
    nt = np.flatnonzero(nontree)
    if len(nt):
        _, firsts = np.unique(comp[nt], return_index=True)
        for xi in nt[firsts]:
            v, carry = int(u[xi]), int(xi)
            while v != -1:
                prev = int(pidx[v])
                cells[carry] = v + 1
                pidx[v] = carry
                carry, v = prev, int(parent[v])
    placed = cells > 0
    cells[placed] = _cell(cells[placed] - 1, m)
    return cells


def fast_cuckoo_assign(keys, hashes: HashPair, stash_capacity: int | None = None) -> Assignment:
    keys = np.sort(np.asarray(list(keys), dtype=np.int64))
    cells = fast_cuckoo_cells(keys, hashes)
    a = Assignment(list(zip(cells.tolist(), keys.tolist())))
    if stash_capacity is not None and len(a.stash_keys) > stash_capacity:
        raise InfeasibleStash(len(a.stash_keys), stash_capacity)
    return a


# ---------------------------------------------------------------------------
# the pipeline's schedule, without running it


def build_schedule(n_items: int, m: int, s: int, sorter=None) -> StructuralTrace:
    """Trace :func:`oblivious_cuckoo_build` emits for any ``n_items`` keys; data-independent."""
    sorter = sorter or OddEvenSorter()
    trace = StructuralTrace()
    if n_items:
        n, d = n_items, 3
        rounds = round_budget(n)
        f1 = bfs_ceiling(1, n)
        trace.add("load", 0, f1, 0, f1)
        stored, x_len = 0, f1
        for i in range(1, rounds + 1):
            fi = bfs_ceiling(i, n)
            if fi == 0:
                stored += x_len
                x_len = 0
                continue
            trace.add("map", i, fi, fi, fi)
            trace.add("sort-Y", i, fi, *sorter.cost(fi))
            trace.add("reduce", i, fi, d * fi, fi, d * fi)
            trace.add("sort-Z", i, d * fi, *sorter.cost(d * fi))
            nxt = bfs_ceiling(i + 1, n) if i < rounds else fi
            stored += x_len
            x_len = max(fi, nxt)
            trace.add("copy", i, x_len, x_len, x_len)
        stored += x_len
        trace.add("collect", stored, stored, 0)
    rows = 2 * n_items
    trace.add("join-sort", rows, *sorter.cost(rows))
    trace.add("join-scan", rows, rows, rows // 2)
    size = n_items + 2 * m
    trace.add("convert-sort1", size, *sorter.cost(size))
    trace.add("convert-stash", s, s, s)
    trace.add("convert-scan", size, size, size)
    trace.add("convert-sort2", size, *sorter.cost(size))
    trace.add("convert-write", 2 * m, 2 * m, 2 * m)
    return trace


def schedule_cost(trace: StructuralTrace) -> tuple[int, int]:
    """Total (reads, writes): the last two fields of every event."""
    return sum(ev[-2] for ev in trace.events), sum(ev[-1] for ev in trace.events)
