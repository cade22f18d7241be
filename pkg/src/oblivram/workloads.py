"""Workload files (``R <addr>`` / ``W <addr> <value>``) and seeded generators."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True)
class Op:
    kind: str          # "R" or "W"
    addr: int
    value: int | None = None

    def to_line(self) -> str:
        return f"R {self.addr}" if self.kind == "R" else f"W {self.addr} {self.value}"


def parse_workload(lines: Iterable[str]) -> list[Op]:
    ops = []
    for no, line in enumerate(lines, 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "R" and len(parts) == 2:
            ops.append(Op("R", int(parts[1])))
        elif parts[0] == "W" and len(parts) == 3:
            ops.append(Op("W", int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"line {no}: expected 'R <addr>' or 'W <addr> <value>', got {line.strip()!r}")
    return ops


def format_workload(ops: Iterable[Op]) -> str:
    return "".join(op.to_line() + "\n" for op in ops)


def random_ops(n: int, count: int, seed: int, write_frac: float = 0.5) -> Iterator[Op]:
    rng = random.Random(seed)
    for _ in range(count):
        x = rng.randint(1, n)
        if rng.random() < write_frac:
            yield Op("W", x, rng.randrange(1 << 40))
        else:
            yield Op("R", x)


def repeat_ops(n: int, count: int, addr: int = 1) -> list[Op]:
    return [Op("R", addr)] * count


def sweep_ops(n: int, count: int) -> list[Op]:
    return [Op("R", 1 + i % n) for i in range(count)]


PATTERNS = {
    "repeat": lambda n, count, seed: repeat_ops(n, count),
    "sweep": lambda n, count, seed: sweep_ops(n, count),
    "random": lambda n, count, seed: list(random_ops(n, count, seed)),
}
