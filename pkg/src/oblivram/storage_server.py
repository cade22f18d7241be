"""Simulated honest-but-curious server and the encryption boundary.

The server keeps one array of equal-length opaque blobs per level and records
every cell the client touches.  Blobs are rows of ``uint64`` words:
two nonce words followed by the encrypted payload.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import OutOfRange
from .hashing import _GOLDEN, _M1, _M2, MASK64, derive_seed

NONCE_WORDS = 2   # 64 + 32 bits of nonce
PAYLOAD_WORDS = 3
POOL_ROWS = 1 << 14
_U_GOLDEN, _U_M1, _U_M2 = np.uint64(_GOLDEN), np.uint64(_M1), np.uint64(_M2)
_U30, _U27, _U31 = np.uint64(30), np.uint64(27), np.uint64(31)


class Cipher(Protocol):
    blob_words: int

    def encrypt(self, plain: np.ndarray) -> np.ndarray: ...

    def decrypt(self, blobs: np.ndarray) -> np.ndarray: ...


class CipherBox:
    """Keyed keystream XOR under a fresh 96-bit nonce per blob.

    Rows of ``plain`` are ``payload_words`` int64 words; each becomes a blob of
    ``NONCE_WORDS + payload_words`` words.  Not a vetted cipher: it models the
    contract (fresh randomness per encryption, fixed length) reproducibly.
    """

    def __init__(self, seed: int, payload_words: int = PAYLOAD_WORDS):
        self.key = np.uint64(derive_seed(seed, 0xC1F) & MASK64)
        self.payload_words = payload_words
        self.blob_words = NONCE_WORDS + payload_words
        self._rng = np.random.default_rng(derive_seed(seed, 0x0CE) & MASK64)
        self._lanes = (np.arange(payload_words, dtype=np.uint64) + np.uint64(1)) * np.uint64(_M2)
        self._pool_nonce = np.zeros((0, NONCE_WORDS), np.uint64)
        self._pos = 0

    def _keystream(self, n0: np.ndarray, n1: np.ndarray) -> np.ndarray:
        # one splitmix finaliser per output word, in place; uint64 array math wraps silently
        z = ((n0 ^ self.key) + n1 * _U_GOLDEN)[:, None] + self._lanes
        z ^= z >> _U30
        z *= _U_M1
        z ^= z >> _U27
        z *= _U_M2
        z ^= z >> _U31
        return z

    def _refill(self, k: int) -> None:
        k = max(k, POOL_ROWS)
        n0 = self._rng.integers(0, 1 << 64, size=k, dtype=np.uint64, endpoint=False)
        n1 = self._rng.integers(0, 1 << 32, size=k, dtype=np.uint64)
        self._pool_nonce = np.stack([n0, n1], axis=1)
        self._pool_ks = self._keystream(n0, n1)
        self._pos = 0

    def encrypt(self, plain: np.ndarray) -> np.ndarray:
        if not (type(plain) is np.ndarray and plain.dtype == np.int64 and plain.ndim == 2):
            plain = np.asarray(plain, dtype=np.int64).reshape(-1, self.payload_words)
        k = len(plain)
        # nonces and their keystream are drawn ahead of time in bulk
        if self._pos + k > len(self._pool_nonce):
            self._refill(k)
        lo, hi = self._pos, self._pos + k
        self._pos = hi
        out = np.empty((k, self.blob_words), dtype=np.uint64)
        out[:, :NONCE_WORDS] = self._pool_nonce[lo:hi]
        out[:, NONCE_WORDS:] = plain.view(np.uint64) ^ self._pool_ks[lo:hi]
        return out

    def decrypt(self, blobs: np.ndarray) -> np.ndarray:
        if not (type(blobs) is np.ndarray and blobs.dtype == np.uint64 and blobs.ndim == 2):
            blobs = np.asarray(blobs, dtype=np.uint64).reshape(-1, self.blob_words)
        ks = self._keystream(blobs[:, 0], blobs[:, 1])
        ks ^= blobs[:, NONCE_WORDS:]
        return ks.view(np.int64)


def _as_index(idx) -> np.ndarray:
    if type(idx) is np.ndarray and idx.dtype == np.int64 and idx.ndim == 1:
        return idx
    return np.asarray(idx, dtype=np.int64).ravel()


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    level: str
    idx: int | None      # None for aggregated scratch work
    op: str              # "R" or "W"
    count: int = 1


class ServerStore:
    """Per-level blob arrays with access logging.

    ``trace_mode`` is ``"full"`` (one record per touched cell) or ``"count"``
    (per-level read/write totals only, for long runs).  Scratch work whose
    touch order is fixed in advance can be logged in aggregate with
    :meth:`charge`; it advances the sequence number by its cell count.
    """

    def __init__(self, blob_words: int = NONCE_WORDS + PAYLOAD_WORDS, trace_mode: str = "full"):
        if trace_mode not in ("full", "count"):
            raise ValueError(f"unknown trace mode {trace_mode!r}")
        self.blob_words = blob_words
        self.trace_mode = trace_mode
        self.levels: dict[str, np.ndarray] = {}
        self.reads: dict[str, int] = {}
        self.writes: dict[str, int] = {}
        self.seq = 0
        self._codes: dict[str, int] = {}
        self._names: list[str] = []
        self._chunks: list[tuple[int, np.ndarray, int, int]] = []   # (code, idx, op, count)

    # -- layout -------------------------------------------------------------
    def allocate(self, level, cells: int) -> None:
        """(Re)create a level of ``cells`` blobs.  Contents are garbage until written."""
        name = str(level)
        self.levels[name] = np.zeros((cells, self.blob_words), dtype=np.uint64)
        self.reads.setdefault(name, 0)
        self.writes.setdefault(name, 0)

    def drop(self, level) -> None:
        self.levels.pop(str(level), None)

    def size(self, level) -> int:
        return len(self._arr(str(level)))

    def _arr(self, name: str) -> np.ndarray:
        try:
            return self.levels[name]
        except KeyError:
            raise OutOfRange(f"no level {name!r}") from None

    # -- logging ------------------------------------------------------------
    def _log(self, name: str, idx: np.ndarray, op: int) -> None:
        n = len(idx)
        if op == 0:
            self.reads[name] = self.reads.get(name, 0) + n
        else:
            self.writes[name] = self.writes.get(name, 0) + n
        if self.trace_mode == "full" and n:
            code = self._codes.get(name)
            if code is None:
                code = self._codes[name] = len(self._names)
                self._names.append(name)
            self._chunks.append((code, np.array(idx, dtype=np.int64), op, 1))
        self.seq += n

    def charge(self, level, reads: int, writes: int) -> None:
        """Log data-independent scratch I/O (e.g. sorting-network passes) in aggregate."""
        name = str(level)
        for op, count in ((0, reads), (1, writes)):
            if count <= 0:
                continue
            if op == 0:
                self.reads[name] = self.reads.get(name, 0) + count
            else:
                self.writes[name] = self.writes.get(name, 0) + count
            if self.trace_mode == "full":
                code = self._codes.get(name)
                if code is None:
                    code = self._codes[name] = len(self._names)
                    self._names.append(name)
                self._chunks.append((code, np.empty(0, np.int64), op, count))
            self.seq += count

    # -- cell interface -----------------------------------------------------
    def _check(self, arr: np.ndarray, idx: np.ndarray) -> None:
        n = len(arr)
        if len(idx) <= 64:
            # plain Python beats numpy dispatch on probe-sized batches
            lst = idx.tolist()
            bad = bool(lst) and (min(lst) < 0 or max(lst) >= n)
        else:
            # the unsigned view turns negative indices into huge ones
            bad = bool(len(idx)) and np.maximum.reduce(idx.view(np.uint64)) >= n
        if bad:
            raise OutOfRange(f"cell index outside [0, {n})")

    def read(self, level, idx) -> np.ndarray:
        name = str(level)
        arr = self._arr(name)
        idx = _as_index(idx)
        self._check(arr, idx)
        self._log(name, idx, 0)
        return arr[idx]

    def write(self, level, idx, blobs: np.ndarray) -> None:
        name = str(level)
        arr = self._arr(name)
        idx = _as_index(idx)
        self._check(arr, idx)
        self._log(name, idx, 1)
        arr[idx] = blobs if blobs.dtype == np.uint64 and blobs.ndim == 2 else \
            np.asarray(blobs, dtype=np.uint64).reshape(len(idx), self.blob_words)

    def read_cell(self, level, idx: int) -> np.ndarray:
        return self.read(level, [idx])[0]

    def write_cell(self, level, idx: int, blob: np.ndarray) -> None:
        self.write(level, [idx], np.asarray(blob)[None, :])

    def read_all(self, level) -> np.ndarray:
        return self.read(level, np.arange(self.size(level)))

    def write_all(self, level, blobs: np.ndarray) -> None:
        self.write(level, np.arange(self.size(level)), blobs)

    # -- reporting ----------------------------------------------------------
    def trace_length(self) -> int:
        return self.seq

    def level_counts(self) -> dict[str, tuple[int, int]]:
        names = sorted(set(self.reads) | set(self.writes))
        return {k: (self.reads.get(k, 0), self.writes.get(k, 0)) for k in names}

    def records(self):
        if self.trace_mode != "full":
            raise ValueError("per-cell records are only kept in full trace mode")
        seq = 0
        for code, idx, op, count in self._chunks:
            name, o = self._names[code], "RW"[op]
            if count > 1 or not len(idx):
                yield TraceRecord(seq, name, None, o, count)
                seq += count
                continue
            for i in idx.tolist():
                yield TraceRecord(seq, name, i, o)
                seq += 1

    def skeleton(self) -> list[tuple[str, str, int]]:
        """Trace with cell indices projected out, runs of equal (level, op) merged."""
        out: list[list] = []
        for code, idx, op, count in self._chunks if self.trace_mode == "full" else ():
            name, o = self._names[code], "RW"[op]
            n = count if not len(idx) else len(idx)
            if out and out[-1][0] == name and out[-1][1] == o:
                out[-1][2] += n
            else:
                out.append([name, o, n])
        return [tuple(x) for x in out]

    def export_trace(self) -> str:
        """Lines ``<seq> <level> <idx> <R|W>``; aggregated scratch runs print ``*<count>`` as idx."""
        lines = []
        for r in self.records():
            idx = f"*{r.count}" if r.idx is None else str(r.idx)
            lines.append(f"{r.seq} {r.level} {idx} {r.op}\n")
        return "".join(lines)


def parse_trace(text: str) -> list[TraceRecord]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        seq, level, idx, op = line.split()
        if op not in ("R", "W"):
            raise ValueError(f"bad op in trace line {line!r}")
        if idx.startswith("*"):
            out.append(TraceRecord(int(seq), level, None, op, int(idx[1:])))
        else:
            out.append(TraceRecord(int(seq), level, int(idx), op))
    return out
