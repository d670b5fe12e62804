"""Per-frame motion descriptors and temporal-pyramid interval descriptors.

Frame descriptors are sampled on a coarse evaluation grid (1 Hz by default)
from the temporally smoothed flow.  Interval descriptors aggregate frame
descriptors over a 3-level temporal pyramid (whole, halves, quarters) with
dimension-wise mean and population variance, and append the pyramids of the
equal-length neighbor intervals before and after for context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInterval, IndexOutOfRange, OutOfRange
from .flowgrid import FlowSequence
from .intervals import Interval

DEFAULT_EVAL_HZ = 1.0

# (whole) + (2 halves) + (4 quarters)
PYRAMID_SUBINTERVALS = 7


def descriptor_dim(grid_w: int, grid_h: int) -> int:
    """Frame descriptor length: per-cell (dx, dy) plus 4 cell statistics."""
    return grid_w * grid_h * 2 + 4


def pyramid_dim(frame_dim: int) -> int:
    """Interval descriptor length: 3 context blocks x 7 sub-intervals x (mean, var)."""
    return 3 * PYRAMID_SUBINTERVALS * 2 * frame_dim


def native_index(eval_index: int, fps: float, eval_hz: float = DEFAULT_EVAL_HZ) -> int:
    """Native-fps frame number backing an evaluation-grid index."""
    return int(round(eval_index * fps / eval_hz))


def eval_frame_count(n_native: int, fps: float, eval_hz: float = DEFAULT_EVAL_HZ) -> int:
    """Number of evaluation-grid indices that map inside an n_native-frame video."""
    if n_native <= 0:
        return 0
    step = fps / eval_hz
    count = int(math.floor((n_native - 1) / step)) + 1
    # Guard against float rounding right at the boundary.
    while native_index(count, fps, eval_hz) < n_native:
        count += 1
    while count > 0 and native_index(count - 1, fps, eval_hz) >= n_native:
        count -= 1
    return count


@dataclass(frozen=True)
class FrameDescriptor:
    """Motion descriptor for one evaluation-grid frame."""

    eval_index: int
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class PyramidDescriptor:
    """Temporal-pyramid descriptor of one interval, with neighbor context."""

    interval: Interval
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)


def _field_descriptor(field: np.ndarray) -> np.ndarray:
    """Flatten a (grid_h, grid_w, 2) field and append mean/std per component."""
    dx = field[..., 0]
    dy = field[..., 1]
    stats = np.array([dx.mean(), dy.mean(), dx.std(), dy.std()])
    return np.concatenate([field.reshape(-1), stats])


def frame_descriptor(
    smoothed: FlowSequence, eval_index: int, eval_hz: float = DEFAULT_EVAL_HZ
) -> FrameDescriptor:
    """Descriptor of the smoothed flow at one evaluation-grid frame.

    The vector is the row-major per-cell (dx, dy) values followed by
    mean(dx), mean(dy), std(dx), std(dy) over all cells (population std).
    """
    native = native_index(eval_index, smoothed.fps, eval_hz)
    if eval_index < 0 or native >= len(smoothed):
        raise IndexOutOfRange(
            f"eval frame {eval_index} maps to native {native}, "
            f"sequence has {len(smoothed)} frames"
        )
    return FrameDescriptor(eval_index, _field_descriptor(smoothed.fields[native].vectors))


def descriptor_matrix(smoothed: FlowSequence, eval_hz: float = DEFAULT_EVAL_HZ) -> np.ndarray:
    """All frame descriptors of a video, shape (n_eval_frames, D)."""
    count = eval_frame_count(len(smoothed), smoothed.fps, eval_hz)
    return np.stack(
        [frame_descriptor(smoothed, t, eval_hz).values for t in range(count)]
    )


def neighbor_context(interval: Interval, video_len: int) -> tuple[Interval, Interval]:
    """Equal-length neighbor intervals before and after, clipped to the video.

    A neighbor that clips to nothing falls back to the center interval itself,
    so the context is always defined.
    """
    if interval.end > video_len:
        raise OutOfRange(f"{interval} exceeds video length {video_len}")
    length = interval.length
    before_start = max(0, interval.start - length)
    after_end = min(video_len, interval.end + length)
    before = (
        Interval(before_start, interval.start)
        if before_start < interval.start
        else interval
    )
    after = (
        Interval(interval.end, after_end) if interval.end < after_end else interval
    )
    return before, after


def _pyramid_ranges(start: int, end: int) -> list[tuple[int, int]]:
    """The 7 sub-ranges of [start, end): whole, halves, quarters.

    Split points use floor division; a sub-range that comes out empty inherits
    its parent's (possibly already inherited) range, so the result is total
    even for length-1 intervals.
    """
    length = end - start
    whole = (start, end)
    halves = []
    for i in range(2):
        a = start + (length * i) // 2
        b = start + (length * (i + 1)) // 2
        halves.append((a, b) if a < b else whole)
    quarters = []
    for j in range(4):
        a = start + (length * j) // 4
        b = start + (length * (j + 1)) // 4
        quarters.append((a, b) if a < b else halves[j // 2])
    return [whole, *halves, *quarters]


class PyramidTable:
    """Prefix-sum table over a video's frame descriptors for fast interval stats.

    Lets the pipeline evaluate thousands of interval proposals without
    repeatedly slicing the descriptor matrix.
    """

    def __init__(self, frames: np.ndarray):
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] == 0:
            raise ValueError("frames must be a nonempty (n, D) matrix")
        self.n_frames, self.frame_dim = frames.shape
        d = self.frame_dim
        self._sum = np.vstack([np.zeros(d), np.cumsum(frames, axis=0)])
        self._sumsq = np.vstack([np.zeros(d), np.cumsum(frames**2, axis=0)])

    def _block(self, start: int, end: int) -> np.ndarray:
        """Pyramid stats of one range: [mean, var] per sub-range, concatenated."""
        parts = []
        for a, b in _pyramid_ranges(start, end):
            n = b - a
            mean = (self._sum[b] - self._sum[a]) / n
            var = (self._sumsq[b] - self._sumsq[a]) / n - mean**2
            np.maximum(var, 0.0, out=var)
            parts.append(mean)
            parts.append(var)
        return np.concatenate(parts)

    def describe(self, interval: Interval) -> np.ndarray:
        """Full descriptor [before | center | after] for one interval."""
        if interval.length < 1:
            raise EmptyInterval(str(interval))
        if interval.end > self.n_frames:
            raise OutOfRange(f"{interval} exceeds {self.n_frames} frames")
        before, after = neighbor_context(interval, self.n_frames)
        return np.concatenate(
            [
                self._block(before.start, before.end),
                self._block(interval.start, interval.end),
                self._block(after.start, after.end),
            ]
        )

    def describe_many(self, intervals: Sequence[Interval]) -> np.ndarray:
        return np.stack([self.describe(iv) for iv in intervals])


def pyramid_descriptor(
    frames: "np.ndarray | Sequence[FrameDescriptor]", interval: Interval
) -> PyramidDescriptor:
    """Temporal-pyramid descriptor of an interval over a video's frame descriptors."""
    if len(frames) and isinstance(frames[0], FrameDescriptor):
        matrix = np.stack([f.values for f in frames])
    else:
        matrix = np.asarray(frames, dtype=np.float64)
    table = PyramidTable(matrix)
    return PyramidDescriptor(interval, table.describe(interval))
