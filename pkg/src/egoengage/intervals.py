"""Half-open frame intervals on the evaluation grid, and consistent sets of them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import InconsistentSet


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open range of evaluation-grid frames: start inclusive, end exclusive."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid interval [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def overlap(self, other: "Interval") -> int:
        """Number of frames in both intervals."""
        return max(0, min(self.end, other.end) - max(self.start, other.start))

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, d: dict) -> "Interval":
        return cls(int(d["start"]), int(d["end"]))


@dataclass(frozen=True)
class IntervalSet:
    """Consistent (pairwise non-overlapping) intervals, sorted by start."""

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self) -> None:
        ivs = tuple(sorted(self.intervals))
        for a, b in zip(ivs, ivs[1:]):
            if a.overlap(b) > 0:
                raise InconsistentSet(f"{a} overlaps {b}")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def of(cls, intervals: Iterable[Interval]) -> "IntervalSet":
        return cls(tuple(intervals))

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def to_list(self) -> list[dict]:
        return [iv.to_dict() for iv in self.intervals]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> "IntervalSet":
        return cls.of(Interval.from_dict(d) for d in items)


def as_interval_set(intervals: "IntervalSet | Iterable[Interval]") -> IntervalSet:
    """Normalize a raw iterable into a validated IntervalSet."""
    if isinstance(intervals, IntervalSet):
        return intervals
    return IntervalSet.of(intervals)
