"""Detection metrics: frame F1, interval precision/recall under the 50%-overlap
boundary rule, any-overlap presence agreement, and start-point F1 curves.

A predicted interval counts as correct when more than half of it overlaps some
ground-truth interval; a ground-truth interval counts as found when more than
half of it is covered by some prediction.  Presence relaxes both to any
overlap.  All interval sets must be consistent (pairwise non-overlapping).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import LengthMismatch
from .intervals import Interval, IntervalSet, as_interval_set

__all__ = [
    "Interval",
    "IntervalSet",
    "PrecisionRecallF1",
    "MetricReport",
    "f1_score",
    "frame_f1",
    "interval_precision_recall",
    "presence_precision_recall",
    "startpoint_f1",
    "frames_to_intervals",
    "intervals_to_frames",
    "evaluate_detection",
]


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class PrecisionRecallF1:
    precision: float
    recall: float
    f1: float

    @classmethod
    def of(cls, precision: float, recall: float) -> "PrecisionRecallF1":
        return cls(precision, recall, f1_score(precision, recall))

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


@dataclass(frozen=True)
class MetricReport:
    frame_f1: float
    boundary: PrecisionRecallF1
    presence: PrecisionRecallF1
    startpoint_curve: tuple[tuple[float, float], ...]

    def to_dict(self) -> dict:
        return {
            "frame_f1": self.frame_f1,
            "boundary": self.boundary.to_dict(),
            "presence": self.presence.to_dict(),
            "startpoint_curve": [[t, f] for t, f in self.startpoint_curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_curve_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tolerance_sec", "f1"])
            for tol, f1 in self.startpoint_curve:
                writer.writerow([tol, f1])


def frame_f1(pred_frames: np.ndarray, gt_frames: np.ndarray) -> float:
    """F1 of per-frame binary classification; 0 when there are no true positives."""
    pred = np.asarray(pred_frames).astype(bool)
    gt = np.asarray(gt_frames).astype(bool)
    if pred.shape != gt.shape:
        raise LengthMismatch(f"{pred.shape} vs {gt.shape}")
    tp = int(np.sum(pred & gt))
    fp = int(np.sum(pred & ~gt))
    fn = int(np.sum(~pred & gt))
    if tp == 0:
        return 0.0
    return f1_score(tp / (tp + fp), tp / (tp + fn))


def _covered_counts(
    preds: IntervalSet, gts: IntervalSet, relation
) -> tuple[int, int]:
    p_hit = sum(1 for p in preds if any(relation(p, g, p) for g in gts))
    g_hit = sum(1 for g in gts if any(relation(p, g, g) for p in preds))
    return p_hit, g_hit


def _ratio(hits: int, total: int, other_total: int) -> float:
    if total == 0:
        return 1.0 if other_total == 0 else 0.0
    return hits / total


def interval_precision_recall(
    P: "IntervalSet | Iterable[Interval]", G: "IntervalSet | Iterable[Interval]"
) -> tuple[float, float]:
    """Boundary agreement: an interval matches when >50% of it is shared."""
    preds, gts = as_interval_set(P), as_interval_set(G)
    majority = lambda p, g, ref: 2 * p.overlap(g) > ref.length
    p_hit, g_hit = _covered_counts(preds, gts, majority)
    return _ratio(p_hit, len(preds), len(gts)), _ratio(g_hit, len(gts), len(preds))


def presence_precision_recall(
    P: "IntervalSet | Iterable[Interval]", G: "IntervalSet | Iterable[Interval]"
) -> tuple[float, float]:
    """Presence agreement: an interval matches when it shares any frame."""
    preds, gts = as_interval_set(P), as_interval_set(G)
    touches = lambda p, g, ref: p.overlap(g) >= 1
    p_hit, g_hit = _covered_counts(preds, gts, touches)
    return _ratio(p_hit, len(preds), len(gts)), _ratio(g_hit, len(gts), len(preds))


def startpoint_f1(
    pred_starts: Sequence[int],
    gt_starts: Sequence[int],
    tolerance_sec: float,
    eval_hz: float = 1.0,
) -> float:
    """F1 of the maximum one-to-one start matching within the tolerance window.

    Because every prediction matches a contiguous range of sorted ground-truth
    starts, scanning ground truth in order and pairing each with the earliest
    unmatched prediction in range yields the maximum matching exactly.
    """
    if tolerance_sec < 0:
        raise ValueError("tolerance must be >= 0")
    preds = sorted(pred_starts)
    gts = sorted(gt_starts)
    if not preds and not gts:
        return 1.0
    if not preds or not gts:
        return 0.0
    tol_frames = tolerance_sec * eval_hz
    matched = [False] * len(preds)
    matches = 0
    for g in gts:
        best = None
        for i, p in enumerate(preds):
            if matched[i] or abs(p - g) > tol_frames:
                continue
            best = i
            break
        if best is not None:
            matched[best] = True
            matches += 1
    return f1_score(matches / len(preds), matches / len(gts))


def frames_to_intervals(binary: np.ndarray, min_len: int = 1) -> IntervalSet:
    """Maximal positive runs of a binary frame vector, at least min_len long."""
    mask = np.asarray(binary).astype(bool)
    padded = np.concatenate([[False], mask, [False]])
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]
    return IntervalSet.of(
        Interval(int(s), int(e)) for s, e in zip(starts, ends) if e - s >= min_len
    )


def intervals_to_frames(
    intervals: "IntervalSet | Iterable[Interval]", video_len: int
) -> np.ndarray:
    """Binary membership vector of length video_len."""
    out = np.zeros(video_len, dtype=bool)
    for iv in as_interval_set(intervals):
        out[iv.start : min(iv.end, video_len)] = True
    return out


def evaluate_detection(
    predictions: "IntervalSet | Iterable[Interval]",
    ground_truth: "IntervalSet | Iterable[Interval]",
    video_len: int,
    eval_hz: float = 1.0,
    tolerances_sec: Sequence[float] = tuple(range(1, 11)),
) -> MetricReport:
    """Full report for one video's predictions against its ground truth."""
    preds = as_interval_set(predictions)
    gts = as_interval_set(ground_truth)
    f_f1 = frame_f1(
        intervals_to_frames(preds, video_len), intervals_to_frames(gts, video_len)
    )
    boundary = PrecisionRecallF1.of(*interval_precision_recall(preds, gts))
    presence = PrecisionRecallF1.of(*presence_precision_recall(preds, gts))
    p_starts = [iv.start for iv in preds]
    g_starts = [iv.start for iv in gts]
    curve = tuple(
        (float(tol), startpoint_f1(p_starts, g_starts, tol, eval_hz))
        for tol in tolerances_sec
    )
    return MetricReport(
        frame_f1=f_f1, boundary=boundary, presence=presence, startpoint_curve=curve
    )
