"""Consensus ground truth from per-annotator interval marks.

Per-worker marks from overlapping chunks are shifted to video time and
unioned, per-frame votes are counted, strict-majority runs at least min_len
long survive, and each surviving run is replaced by the tightest worker mark
covering more than half of it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IntervalOutOfVideo
from .intervals import Interval

ANNOTATION_SCHEMA = "ee-annotation/1"
CONSENSUS_SCHEMA = "ee-consensus/1"


class Clarity(str, enum.Enum):
    OBVIOUS = "obvious"
    FAIRLY_CLEAR = "fairly_clear"
    SUBTLE = "subtle"


@dataclass(frozen=True)
class AnnotationMark:
    """One marked interval with its attributes, in chunk-relative eval frames."""

    start: int
    end: int
    touched: bool
    clarity: Clarity
    description: str = ""

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(f"invalid mark [{self.start}, {self.end})")

    @property
    def interval(self) -> Interval:
        return Interval(self.start, self.end)


@dataclass(frozen=True)
class AnnotationRecord:
    """One worker's marks for one video chunk."""

    video_id: str
    worker_id: str
    chunk_start_sec: float
    eval_hz: float
    intervals: tuple[AnnotationMark, ...]

    def __post_init__(self) -> None:
        min_frames = max(1, int(round(self.eval_hz * 1.0)))
        marks = tuple(sorted(self.intervals, key=lambda m: (m.start, m.end)))
        for m in marks:
            if m.end - m.start < min_frames:
                raise ValueError(
                    f"mark [{m.start}, {m.end}) shorter than 1 second "
                    f"({min_frames} eval frames)"
                )
        for a, b in zip(marks, marks[1:]):
            if a.end > b.start:
                raise ValueError(f"marks overlap within one record: {a} / {b}")
        object.__setattr__(self, "intervals", marks)


@dataclass(frozen=True)
class ConsensusTrack:
    """Aggregated ground truth for one video."""

    video_id: str
    votes: np.ndarray
    n_annotators: int
    gt: tuple[Interval, ...]
    eval_hz: float = 1.0

    def __post_init__(self) -> None:
        votes = np.asarray(self.votes, dtype=np.int64)
        if (votes < 0).any() or (votes > self.n_annotators).any():
            raise ValueError("votes must lie in [0, n_annotators]")
        gt = tuple(sorted(self.gt))
        for a, b in zip(gt, gt[1:]):
            if a.overlap(b) > 0:
                raise ValueError("ground-truth intervals must not overlap")
        object.__setattr__(self, "votes", votes)
        object.__setattr__(self, "gt", gt)

    @property
    def video_len(self) -> int:
        return len(self.votes)

    def label_vector(self) -> np.ndarray:
        out = np.zeros(self.video_len, dtype=bool)
        for iv in self.gt:
            out[iv.start : iv.end] = True
        return out


def merge_chunks(
    records: Sequence[AnnotationRecord], video_len: int
) -> dict[str, list[Interval]]:
    """Shift chunk-relative marks to video time and union them per worker.

    Overlapping or adjacent marks from one worker (duplicates in chunk-overlap
    regions) merge into maximal intervals.
    """
    shifted: dict[str, list[Interval]] = {}
    for rec in records:
        offset = int(round(rec.chunk_start_sec * rec.eval_hz))
        for m in rec.intervals:
            start, end = m.start + offset, m.end + offset
            if start < 0 or end > video_len:
                raise IntervalOutOfVideo(
                    f"worker {rec.worker_id} mark [{start}, {end}) outside "
                    f"[0, {video_len})"
                )
            shifted.setdefault(rec.worker_id, []).append(Interval(start, end))
    merged: dict[str, list[Interval]] = {}
    for worker, marks in shifted.items():
        marks.sort()
        out: list[Interval] = []
        for iv in marks:
            if out and iv.start <= out[-1].end:
                out[-1] = Interval(out[-1].start, max(out[-1].end, iv.end))
            else:
                out.append(iv)
        merged[worker] = out
    return merged


def tightest_cover(
    consensus_interval: Interval, candidate_marks: Iterable[Interval]
) -> Interval:
    """Shortest mark covering more than half of the consensus interval.

    Ties break toward the earliest start; with no qualifying mark the
    consensus interval itself is returned.
    """
    c = consensus_interval
    qualifying = [m for m in candidate_marks if 2 * m.overlap(c) > c.length]
    if not qualifying:
        return c
    return min(qualifying, key=lambda m: (m.length, m.start))


def consensus(
    marks_by_worker: "Mapping[str, Sequence[Interval]] | Sequence[Sequence[Interval]]",
    video_len: int,
    n_annotators: int,
    min_len: int = 1,
    video_id: str = "",
    eval_hz: float = 1.0,
) -> ConsensusTrack:
    """Majority-vote consensus with tightest-cover refinement.

    A frame is a majority frame when strictly more than half of the
    n_annotators cover it.  Majority runs shorter than min_len are dropped;
    each survivor is replaced by its tightest cover, clipped against the
    ground truth accepted so far so the final set stays consistent.
    """
    if n_annotators < 1:
        raise ValueError("n_annotators must be >= 1")
    if isinstance(marks_by_worker, Mapping):
        worker_marks = [list(v) for _, v in sorted(marks_by_worker.items())]
    else:
        worker_marks = [list(v) for v in marks_by_worker]

    votes = np.zeros(video_len, dtype=np.int64)
    for marks in worker_marks:
        for iv in marks:
            if iv.end > video_len:
                raise IntervalOutOfVideo(f"{iv} outside [0, {video_len})")
            votes[iv.start : iv.end] += 1

    majority = votes > n_annotators / 2.0
    all_marks = [iv for marks in worker_marks for iv in marks]
    gt: list[Interval] = []
    for run in _runs(majority):
        if run.length < min_len:
            continue
        cover = tightest_cover(run, all_marks)
        if gt and cover.start < gt[-1].end:
            if gt[-1].end >= cover.end:
                continue
            cover = Interval(gt[-1].end, cover.end)
        if cover.length >= min_len:
            gt.append(cover)
    return ConsensusTrack(
        video_id=video_id,
        votes=votes,
        n_annotators=n_annotators,
        gt=tuple(gt),
        eval_hz=eval_hz,
    )


def _runs(mask: np.ndarray) -> list[Interval]:
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [Interval(int(s), int(e)) for s, e in zip(edges[0::2], edges[1::2])]


def aggregate_video(
    records: Sequence[AnnotationRecord],
    video_len: int,
    n_annotators: int | None = None,
    min_len: int = 1,
) -> ConsensusTrack:
    """Convenience: merge chunked records and run the consensus vote."""
    if not records:
        raise ValueError("no annotation records")
    video_id = records[0].video_id
    eval_hz = records[0].eval_hz
    merged = merge_chunks(records, video_len)
    if n_annotators is None:
        # Workers who submitted only empty records still count as annotators.
        n_annotators = len({r.worker_id for r in records})
    return consensus(
        merged, video_len, n_annotators, min_len, video_id=video_id, eval_hz=eval_hz
    )


# --- JSON -------------------------------------------------------------------

def record_to_dict(record: AnnotationRecord) -> dict:
    return {
        "schema": ANNOTATION_SCHEMA,
        "video_id": record.video_id,
        "worker_id": record.worker_id,
        "chunk_start_sec": record.chunk_start_sec,
        "eval_hz": record.eval_hz,
        "intervals": [
            {
                "start": m.start,
                "end": m.end,
                "touched": m.touched,
                "clarity": m.clarity.value,
                "description": m.description,
            }
            for m in record.intervals
        ],
    }


def record_from_dict(d: dict) -> AnnotationRecord:
    if d.get("schema") != ANNOTATION_SCHEMA:
        raise ValueError(f"unexpected annotation schema {d.get('schema')!r}")
    marks = tuple(
        AnnotationMark(
            start=int(m["start"]),
            end=int(m["end"]),
            touched=bool(m["touched"]),
            clarity=Clarity(m["clarity"]),
            description=str(m.get("description", "")),
        )
        for m in d["intervals"]
    )
    return AnnotationRecord(
        video_id=str(d["video_id"]),
        worker_id=str(d["worker_id"]),
        chunk_start_sec=float(d["chunk_start_sec"]),
        eval_hz=float(d["eval_hz"]),
        intervals=marks,
    )


def load_annotation_file(path) -> AnnotationRecord:
    with open(path) as fh:
        return record_from_dict(json.load(fh))


def save_annotation_file(record: AnnotationRecord, path) -> None:
    with open(path, "w") as fh:
        json.dump(record_to_dict(record), fh, indent=2)


def track_to_dict(track: ConsensusTrack) -> dict:
    return {
        "schema": CONSENSUS_SCHEMA,
        "video_id": track.video_id,
        "eval_hz": track.eval_hz,
        "n_annotators": track.n_annotators,
        "votes": [int(v) for v in track.votes],
        "gt": [iv.to_dict() for iv in track.gt],
    }


def track_from_dict(d: dict) -> ConsensusTrack:
    if d.get("schema") != CONSENSUS_SCHEMA:
        raise ValueError(f"unexpected consensus schema {d.get('schema')!r}")
    return ConsensusTrack(
        video_id=str(d["video_id"]),
        votes=np.array(d["votes"], dtype=np.int64),
        n_annotators=int(d["n_annotators"]),
        gt=tuple(Interval.from_dict(iv) for iv in d["gt"]),
        eval_hz=float(d["eval_hz"]),
    )


def load_consensus_file(path) -> ConsensusTrack:
    with open(path) as fh:
        return track_from_dict(json.load(fh))


def save_consensus_file(track: ConsensusTrack, path) -> None:
    with open(path, "w") as fh:
        json.dump(track_to_dict(track), fh)
