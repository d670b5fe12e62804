"""End-to-end training and detection: frame classifier, level-set proposals,
interval classifier, max fusion, calibrated thresholding, and greedy NMS.

Also hosts the per-video confidence calibration, the motion-magnitude and
prior-informed random baselines, and causal streaming onset detection.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .descriptor import (
    DEFAULT_EVAL_HZ,
    PyramidTable,
    _field_descriptor,
    descriptor_dim,
    descriptor_matrix,
    eval_frame_count,
    native_index,
    pyramid_dim,
)
from .errors import EmptyDataset, EmptyInput, GridMismatch, SingleClassTrainingData
from .flowgrid import DEFAULT_GRID_H, DEFAULT_GRID_W, FlowField, FlowSequence, smooth_temporal
from .forest import (
    ForestModel,
    ForestParams,
    forest_from_dict,
    forest_to_dict,
    predict_proba,
    predict_proba_matrix,
    train_forest,
)
from .groundtruth import ConsensusTrack
from .intervals import Interval, IntervalSet
from .proposer import DEFAULT_MIN_LEN, propose

DEFAULT_POSITIVE_RATIO = 0.438
MODEL_SCHEMA = "ee-model/1"
DETECTION_SCHEMA = "ee-detection/1"


@dataclass(frozen=True)
class PipelineConfig:
    sigma_seconds: float = 2.0
    grid_w: int = DEFAULT_GRID_W
    grid_h: int = DEFAULT_GRID_H
    eval_hz: float = DEFAULT_EVAL_HZ
    min_len: int = DEFAULT_MIN_LEN
    positive_ratio: float = DEFAULT_POSITIVE_RATIO
    frame_forest: ForestParams = field(default_factory=ForestParams)
    interval_forest: ForestParams = field(default_factory=ForestParams)
    frame_seed: int = 11
    interval_seed: int = 12
    n_jobs: int = 1

    def to_dict(self) -> dict:
        return {
            "sigma_seconds": self.sigma_seconds,
            "grid_w": self.grid_w,
            "grid_h": self.grid_h,
            "eval_hz": self.eval_hz,
            "min_len": self.min_len,
            "positive_ratio": self.positive_ratio,
            "frame_forest": self.frame_forest.to_dict(),
            "interval_forest": self.interval_forest.to_dict(),
            "frame_seed": self.frame_seed,
            "interval_seed": self.interval_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(
            sigma_seconds=float(d["sigma_seconds"]),
            grid_w=int(d["grid_w"]),
            grid_h=int(d["grid_h"]),
            eval_hz=float(d["eval_hz"]),
            min_len=int(d["min_len"]),
            positive_ratio=float(d["positive_ratio"]),
            frame_forest=ForestParams.from_dict(d["frame_forest"]),
            interval_forest=ForestParams.from_dict(d["interval_forest"]),
            frame_seed=int(d["frame_seed"]),
            interval_seed=int(d["interval_seed"]),
        )


@dataclass(frozen=True)
class EngagementModel:
    frame_forest: ForestModel
    interval_forest: ForestModel
    config: PipelineConfig

    def __post_init__(self) -> None:
        d = descriptor_dim(self.config.grid_w, self.config.grid_h)
        if self.frame_forest.n_features != d:
            raise ValueError(
                f"frame forest expects {self.frame_forest.n_features} features, "
                f"grid implies {d}"
            )
        if self.interval_forest.n_features != pyramid_dim(d):
            raise ValueError(
                f"interval forest expects {self.interval_forest.n_features} "
                f"features, grid implies {pyramid_dim(d)}"
            )


@dataclass(frozen=True)
class DetectionResult:
    video_id: str
    eval_hz: float
    frame_conf: np.ndarray
    scored_proposals: tuple[tuple[Interval, float], ...]
    predictions: IntervalSet
    threshold_used: float

    def to_dict(self) -> dict:
        return {
            "schema": DETECTION_SCHEMA,
            "video_id": self.video_id,
            "eval_hz": self.eval_hz,
            "frame_conf": [float(c) for c in self.frame_conf],
            "proposals": [
                {"start": iv.start, "end": iv.end, "score": score}
                for iv, score in self.scored_proposals
            ],
            "predictions": self.predictions.to_list(),
            "threshold": self.threshold_used,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionResult":
        return cls(
            video_id=str(d["video_id"]),
            eval_hz=float(d["eval_hz"]),
            frame_conf=np.array(d["frame_conf"], dtype=np.float64),
            scored_proposals=tuple(
                (Interval(int(p["start"]), int(p["end"])), float(p["score"]))
                for p in d["proposals"]
            ),
            predictions=IntervalSet.from_list(d["predictions"]),
            threshold_used=float(d["threshold"]),
        )


def _check_grid(seq: FlowSequence, config: PipelineConfig) -> None:
    if seq.grid_w != config.grid_w or seq.grid_h != config.grid_h:
        raise GridMismatch(
            f"video grid {seq.grid_w}x{seq.grid_h} vs model grid "
            f"{config.grid_w}x{config.grid_h}"
        )


def video_features(seq: FlowSequence, config: PipelineConfig) -> np.ndarray:
    """Smooth a video and return its (n_eval_frames, D) descriptor matrix."""
    _check_grid(seq, config)
    smoothed = smooth_temporal(seq, config.sigma_seconds)
    return descriptor_matrix(smoothed, config.eval_hz)


def frame_confidences(model: EngagementModel, seq: FlowSequence) -> np.ndarray:
    """Raw frame-forest engagement posteriors on the evaluation grid."""
    feats = video_features(seq, model.config)
    return predict_proba_matrix(model.frame_forest, feats)[:, 1]


def label_proposals(
    proposals: Sequence[Interval], gt: Sequence[Interval]
) -> np.ndarray:
    """Positive iff more than half of the proposal lies inside some GT interval."""
    labels = np.zeros(len(proposals), dtype=np.int64)
    for i, p in enumerate(proposals):
        if any(2 * p.overlap(g) > p.length for g in gt):
            labels[i] = 1
    return labels


def train(
    videos: Sequence[tuple[FlowSequence, ConsensusTrack]],
    config: Optional[PipelineConfig] = None,
) -> EngagementModel:
    """Train the frame forest, then the interval forest on its own proposals."""
    config = config or PipelineConfig()
    if not videos:
        raise EmptyDataset("no training videos")

    feats = []
    labels = []
    for seq, track in videos:
        f = video_features(seq, config)
        t_len = f.shape[0]
        if track.video_len < t_len:
            raise ValueError(
                f"{seq.video_id}: consensus covers {track.video_len} eval frames, "
                f"flow implies {t_len}"
            )
        feats.append(f)
        labels.append(track.label_vector()[:t_len])
    X_frames = np.vstack(feats)
    y_frames = np.concatenate(labels).astype(np.int64)
    if len(np.unique(y_frames)) < 2:
        raise SingleClassTrainingData("frame labels contain a single class")

    frame_forest = train_forest(
        X_frames,
        y_frames,
        config.frame_forest,
        config.frame_seed,
        n_classes=2,
        n_jobs=config.n_jobs,
    )

    descs = []
    prop_labels = []
    for (seq, track), f in zip(videos, feats):
        conf = predict_proba_matrix(frame_forest, f)[:, 1]
        props = propose(conf, config.min_len).proposals
        if not props:
            continue
        table = PyramidTable(f)
        descs.append(table.describe_many(props))
        prop_labels.append(label_proposals(props, track.gt))
    if not descs:
        raise SingleClassTrainingData("no interval proposals were generated")
    X_int = np.vstack(descs)
    y_int = np.concatenate(prop_labels)
    if len(np.unique(y_int)) < 2:
        raise SingleClassTrainingData("proposal labels contain a single class")

    interval_forest = train_forest(
        X_int,
        y_int,
        config.interval_forest,
        config.interval_seed,
        n_classes=2,
        n_jobs=config.n_jobs,
    )
    return EngagementModel(frame_forest, interval_forest, config)


def calibrate_threshold(
    conf: np.ndarray, positive_ratio: float = DEFAULT_POSITIVE_RATIO
) -> float:
    """Threshold such that round(ratio * N) frames strictly exceed it.

    Value ties resolve toward fewer positives.  This is the (1 - ratio)
    empirical quantile taken as an order statistic.
    """
    if not 0.0 < positive_ratio < 1.0:
        raise ValueError("positive_ratio must lie strictly between 0 and 1")
    conf = np.asarray(conf, dtype=np.float64)
    n = conf.size
    if n == 0:
        raise EmptyInput("confidence vector is empty")
    k = int(math.floor(positive_ratio * n + 0.5))
    if k >= n:
        return float(conf.min()) - 1.0
    ordered = np.sort(conf)
    return float(ordered[n - 1 - k])


def fuse_confidences(
    frame_conf: np.ndarray, scored: Sequence[tuple[Interval, float]]
) -> np.ndarray:
    """Per-frame max over covering proposal scores; frame score where uncovered."""
    frame_conf = np.asarray(frame_conf, dtype=np.float64)
    best = np.full(frame_conf.shape, -np.inf)
    for iv, score in scored:
        seg = best[iv.start : iv.end]
        np.maximum(seg, score, out=seg)
    return np.where(np.isfinite(best), best, frame_conf)


def greedy_nms(scored: Sequence[tuple[Interval, float]]) -> IntervalSet:
    """Accept proposals in descending score order, dropping any that overlap.

    Score ties prefer the longer proposal, so a full-extent candidate beats
    the fragments nested inside it.
    """
    ordered = sorted(scored, key=lambda s: (-s[1], -s[0].length, s[0].start, s[0].end))
    accepted: list[Interval] = []
    for iv, _ in ordered:
        if all(iv.overlap(a) == 0 for a in accepted):
            accepted.append(iv)
    return IntervalSet.of(accepted)


def detect(model: EngagementModel, video: FlowSequence) -> DetectionResult:
    """Score a video: fused frame confidences plus a consistent prediction set."""
    config = model.config
    feats = video_features(video, config)
    conf = predict_proba_matrix(model.frame_forest, feats)[:, 1]
    props = propose(conf, config.min_len).proposals
    if props:
        table = PyramidTable(feats)
        scores = predict_proba_matrix(model.interval_forest, table.describe_many(props))[:, 1]
        scored = tuple((iv, float(s)) for iv, s in zip(props, scores))
    else:
        scored = ()
    fused = fuse_confidences(conf, scored)
    threshold = calibrate_threshold(fused, config.positive_ratio)
    kept = [(iv, s) for iv, s in scored if s > threshold]
    predictions = greedy_nms(kept)
    return DetectionResult(
        video_id=video.video_id,
        eval_hz=config.eval_hz,
        frame_conf=fused,
        scored_proposals=scored,
        predictions=predictions,
        threshold_used=threshold,
    )


def baseline_motion_magnitude(
    smoothed: FlowSequence, eval_hz: float = DEFAULT_EVAL_HZ
) -> np.ndarray:
    """Inverse mean cell flow magnitude per eval frame: 1 / (1 + magnitude)."""
    arr = smoothed.to_array()
    mags = np.linalg.norm(arr, axis=3).mean(axis=(1, 2))
    count = eval_frame_count(len(smoothed), smoothed.fps, eval_hz)
    idx = [native_index(t, smoothed.fps, eval_hz) for t in range(count)]
    return 1.0 / (1.0 + mags[idx])


@dataclass(frozen=True)
class GroundTruthPrior:
    """Empirical interval statistics used by the prior-informed random baseline."""

    lengths: tuple[int, ...]
    start_weights: np.ndarray
    positive_ratio: float

    @classmethod
    def from_tracks(cls, tracks: Sequence[ConsensusTrack]) -> "GroundTruthPrior":
        lengths = tuple(iv.length for tr in tracks for iv in tr.gt)
        max_len = max(tr.video_len for tr in tracks)
        weights = np.zeros(max_len)
        total_pos = 0
        total_frames = 0
        for tr in tracks:
            weights[: tr.video_len] += tr.label_vector().astype(np.float64)
            total_pos += int(tr.label_vector().sum())
            total_frames += tr.video_len
        ratio = total_pos / total_frames if total_frames else 0.0
        return cls(lengths=lengths, start_weights=weights, positive_ratio=ratio)


def baseline_random(
    video_len: int,
    gt_stats: GroundTruthPrior,
    n_reps: int = 10,
    seed: int = 0,
    max_attempts: int = 10_000,
) -> list[IntervalSet]:
    """Consistent random interval sets drawn from the ground-truth priors.

    Lengths come from the empirical length pool and starts from the temporal
    prior; overlapping draws are rejected until the covered fraction reaches
    the prior ratio (or the attempt budget runs out).
    """
    target = gt_stats.positive_ratio
    reps: list[IntervalSet] = []
    for rep in range(n_reps):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
        )
        accepted: list[Interval] = []
        covered = 0
        if target > 0 and gt_stats.lengths:
            weights = gt_stats.start_weights[:video_len].copy()
            if weights.size < video_len:
                weights = np.concatenate(
                    [weights, np.full(video_len - weights.size, weights.mean() or 1.0)]
                )
            if weights.sum() <= 0:
                weights = np.ones(video_len)
            weights = weights / weights.sum()
            overshoot = max(1, int(round(0.02 * video_len)))
            for _ in range(max_attempts):
                if covered >= target * video_len:
                    break
                length = int(rng.choice(gt_stats.lengths))
                start = int(rng.choice(video_len, p=weights))
                end = min(start + length, video_len)
                if end - start < 1:
                    continue
                if covered + (end - start) > target * video_len + overshoot:
                    continue
                iv = Interval(start, end)
                if any(iv.overlap(a) for a in accepted):
                    continue
                accepted.append(iv)
                covered += iv.length
        reps.append(IntervalSet.of(accepted))
    return reps


def stream_detect(
    model: EngagementModel,
    flow: "FlowSequence | Iterable[FlowField]",
    threshold: float,
    *,
    fps: Optional[float] = None,
) -> list[int]:
    """Causal onset detection: eval frames where confidence first rises above
    the threshold after at least one second strictly below it.

    Smoothing uses only past frames (renormalized Gaussian half-kernel), so
    onsets for a stream prefix never depend on later frames.
    """
    config = model.config
    if isinstance(flow, FlowSequence):
        fps = flow.fps
        fields: Iterable[FlowField] = flow.fields
    else:
        if fps is None:
            raise ValueError("fps is required when passing a raw field iterable")
        fields = flow
    sigma_frames = config.sigma_seconds * fps
    radius = int(math.ceil(3.0 * sigma_frames))
    weights = np.exp(-0.5 * (np.arange(radius + 1) / sigma_frames) ** 2)

    need_below = max(1, int(round(config.eval_hz * 1.0)))
    below_run = 0
    onsets: list[int] = []
    buffer: deque[np.ndarray] = deque(maxlen=radius + 1)
    next_eval = 0
    next_native = 0
    for i, f in enumerate(fields):
        if f.grid_h != config.grid_h or f.grid_w != config.grid_w:
            raise GridMismatch(
                f"stream grid {f.grid_w}x{f.grid_h} vs model "
                f"{config.grid_w}x{config.grid_h}"
            )
        buffer.append(f.vectors)
        if i != next_native:
            continue
        window = np.stack(buffer)  # oldest .. current
        w = weights[: window.shape[0]][::-1]
        smoothed = np.tensordot(w, window, axes=1) / w.sum()
        x = _field_descriptor(smoothed)
        conf = predict_proba(model.frame_forest, x)[1]
        if conf > threshold and below_run >= need_below:
            onsets.append(next_eval)
        below_run = below_run + 1 if conf < threshold else 0
        next_eval += 1
        next_native = native_index(next_eval, fps, config.eval_hz)
    return onsets


# --- persistence -------------------------------------------------------------

def model_to_dict(model: EngagementModel) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "config": model.config.to_dict(),
        "frame_forest": forest_to_dict(model.frame_forest),
        "interval_forest": forest_to_dict(model.interval_forest),
    }


def model_from_dict(d: dict) -> EngagementModel:
    if d.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unexpected model schema {d.get('schema')!r}")
    return EngagementModel(
        frame_forest=forest_from_dict(d["frame_forest"]),
        interval_forest=forest_from_dict(d["interval_forest"]),
        config=PipelineConfig.from_dict(d["config"]),
    )


def save_model(model: EngagementModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> EngagementModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def with_positive_ratio(model: EngagementModel, ratio: float) -> EngagementModel:
    """Copy of the model calibrated to a different positive ratio."""
    return EngagementModel(
        frame_forest=model.frame_forest,
        interval_forest=model.interval_forest,
        config=replace(model.config, positive_ratio=ratio),
    )
