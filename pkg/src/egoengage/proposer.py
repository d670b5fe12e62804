"""Level-set interval proposals from per-frame confidence scores.

Candidate intervals are the maximal runs of frames whose confidence strictly
exceeds a threshold; proposals pool the runs obtained at the nine per-video
decile thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput
from .intervals import Interval

DEFAULT_MIN_LEN = 1  # eval frames (= 1 second at 1 Hz)


@dataclass(frozen=True)
class ProposalSet:
    proposals: tuple[Interval, ...]
    thresholds_used: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(set(self.proposals)) != len(self.proposals):
            raise ValueError("proposals must be deduplicated")

    def __len__(self) -> int:
        return len(self.proposals)

    def __iter__(self):
        return iter(self.proposals)


def decile_thresholds(conf: np.ndarray) -> list[float]:
    """Empirical 0.1 .. 0.9 quantiles with linear interpolation."""
    conf = np.asarray(conf, dtype=np.float64)
    if conf.size == 0:
        raise EmptyInput("confidence vector is empty")
    qs = np.arange(1, 10) / 10.0
    return [float(v) for v in np.quantile(conf, qs)]


def level_set_intervals(
    conf: np.ndarray, threshold: float, min_len: int = DEFAULT_MIN_LEN
) -> list[Interval]:
    """Maximal runs with conf strictly above the threshold, at least min_len long."""
    if min_len < 1:
        raise ValueError("min_len must be >= 1")
    mask = np.asarray(conf, dtype=np.float64) > threshold
    if not mask.any():
        return []
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]
    return [
        Interval(int(s), int(e)) for s, e in zip(starts, ends) if e - s >= min_len
    ]


def propose(conf: np.ndarray, min_len: int = DEFAULT_MIN_LEN) -> ProposalSet:
    """Pool level-set intervals over the decile thresholds, deduplicated."""
    conf = np.asarray(conf, dtype=np.float64)
    thresholds = decile_thresholds(conf)
    seen: dict[Interval, None] = {}
    for t in thresholds:
        for iv in level_set_intervals(conf, t, min_len):
            seen.setdefault(iv, None)
    proposals = tuple(sorted(seen))
    return ProposalSet(proposals=proposals, thresholds_used=tuple(thresholds))
