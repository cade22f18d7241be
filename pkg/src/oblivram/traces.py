"""Data-independent skeletons of server-visible activity."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class StructuralTrace:
    """Ordered events; each event is a tuple of strings and ints.

    Two traces compare equal iff their event sequences are identical, which is
    what the obliviousness checks rely on.
    """

    events: list[tuple] = field(default_factory=list)

    def add(self, *event) -> None:
        self.events.append(tuple(event))

    def extend(self, other: "StructuralTrace") -> None:
        self.events.extend(other.events)

    def __len__(self):
        return len(self.events)

    def __eq__(self, other):
        return isinstance(other, StructuralTrace) and self.events == other.events

    def to_text(self) -> str:
        return "".join(" ".join(str(x) for x in ev) + "\n" for ev in self.events)

    @classmethod
    def parse(cls, text: str) -> "StructuralTrace":
        def conv(tok):
            try:
                return int(tok)
            except ValueError:
                return tok

        return cls([tuple(conv(t) for t in line.split()) for line in text.splitlines() if line.strip()])

    def first_divergence(self, other: "StructuralTrace") -> int | None:
        for i, (a, b) in enumerate(zip(self.events, other.events)):
            if a != b:
                return i
        if len(self.events) != len(other.events):
            return min(len(self.events), len(other.events))
        return None
