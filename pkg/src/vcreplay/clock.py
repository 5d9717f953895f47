"""Vector clocks over a fixed set of threads.

Thread ids are dense 1..n and clock width is fixed for the lifetime of an
analysis run.  Two order relations are deliberately kept apart:

* :meth:`VectorClock.compare` -- the usual pointwise partial order
  (<= everywhere, < somewhere).  Used for every event-vs-event query
  (alternative communications, send-on-closed, deadlock hints).
* :meth:`VectorClock.dominates` -- strictly greater at *every* component of
  the given index set.  This is the guard of the epoch rewrite rules in the
  contention analysis and must not be used for happens-before queries.
"""

from __future__ import annotations

from enum import Enum
from typing import Iterable


class Ordering(Enum):
    BEFORE = "before"
    AFTER = "after"
    EQUAL = "equal"
    CONCURRENT = "concurrent"


class VectorClock:
    """Immutable fixed-width vector of per-thread timestamps (1-based ids)."""

    __slots__ = ("stamps",)

    def __init__(self, stamps: Iterable[int]):
        stamps = tuple(stamps)
        if not stamps:
            raise ValueError("clock width must be at least 1")
        if any(s < 0 for s in stamps):
            raise ValueError("timestamps must be non-negative")
        object.__setattr__(self, "stamps", stamps)

    def __setattr__(self, name, value):
        raise AttributeError("VectorClock is immutable")

    @classmethod
    def zero(cls, n: int) -> "VectorClock":
        if n < 1:
            raise ValueError("thread count must be at least 1")
        return cls((0,) * n)

    @classmethod
    def unit(cls, i: int, n: int) -> "VectorClock":
        """All zero except position i, which is 1."""
        return cls.zero(n).inc(i)

    def __len__(self) -> int:
        return len(self.stamps)

    def __getitem__(self, i: int) -> int:
        """Timestamp of thread i (1-based)."""
        if not 1 <= i <= len(self.stamps):
            raise IndexError(f"thread id {i} out of range 1..{len(self.stamps)}")
        return self.stamps[i - 1]

    def inc(self, i: int) -> "VectorClock":
        """Copy with the timestamp of thread i incremented by one."""
        if not 1 <= i <= len(self.stamps):
            raise IndexError(f"thread id {i} out of range 1..{len(self.stamps)}")
        s = self.stamps
        return VectorClock(s[: i - 1] + (s[i - 1] + 1,) + s[i:])

    def join(self, other: "VectorClock") -> "VectorClock":
        """Pointwise maximum."""
        if len(self.stamps) != len(other.stamps):
            raise ValueError("clock width mismatch")
        return VectorClock(map(max, self.stamps, other.stamps))

    def compare(self, other: "VectorClock") -> Ordering:
        if len(self.stamps) != len(other.stamps):
            raise ValueError("clock width mismatch")
        less = greater = False
        for a, b in zip(self.stamps, other.stamps):
            if a < b:
                less = True
            elif a > b:
                greater = True
        if less and greater:
            return Ordering.CONCURRENT
        if less:
            return Ordering.BEFORE
        if greater:
            return Ordering.AFTER
        return Ordering.EQUAL

    def happens_before(self, other: "VectorClock") -> bool:
        return self.compare(other) is Ordering.BEFORE

    def concurrent_with(self, other: "VectorClock") -> bool:
        return self.compare(other) is Ordering.CONCURRENT

    def dominates(self, entries: dict[int, int]) -> bool:
        """Strictly greater than every (thread -> stamp) entry.

        This is the all-components test that guards the Single epoch rules;
        an empty entry set is vacuously dominated.
        """
        return all(self[i] > n for i, n in entries.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, VectorClock) and self.stamps == other.stamps

    def __hash__(self) -> int:
        return hash(self.stamps)

    def __repr__(self) -> str:
        return f"VectorClock({list(self.stamps)})"

    def __str__(self) -> str:
        return "[" + ",".join(str(s) for s in self.stamps) + "]"

    def to_list(self) -> list[int]:
        return list(self.stamps)
