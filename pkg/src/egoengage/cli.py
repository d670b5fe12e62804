"""Command-line entry point: synthetic data, aggregation, training, detection,
evaluation, and baselines, with reproducible on-disk artifacts.

Every command is deterministic given an explicit --seed and exits 0 on
success, 2 on usage or data errors.  EE_THREADS caps the training worker
count.  File writes go through a temp file plus rename.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import descriptor, flowgrid, groundtruth, metrics, pipeline, synth
from .errors import EgoEngageError
from .forest import ForestParams
from .intervals import IntervalSet

MANIFEST_SCHEMA = "ee-manifest/1"
RANDOM_BASELINE_SCHEMA = "ee-random-baseline/1"

DEFAULT_SCENARIOS = ("market", "mall", "museum")
DEFAULT_RECORDERS = ("r0", "r1", "r2", "r3")


def _write_json(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _write_flow(seq: flowgrid.FlowSequence, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        flowgrid.write_flow(seq, fh)
    os.replace(tmp, path)


def _worker_cap(requested: int) -> int:
    cap = os.environ.get("EE_THREADS")
    if cap:
        return max(1, min(requested, int(cap)))
    return requested


def _derived_seed(seed: int, *key: int) -> int:
    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return int(seq.generate_state(1)[0])


# --- manifest -----------------------------------------------------------------

def load_manifest(path: Path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise EgoEngageError(f"unexpected manifest schema {doc.get('schema')!r}")
    base = path.parent
    seen = set()
    for entry in doc["entries"]:
        vid = entry["video_id"]
        if vid in seen:
            raise EgoEngageError(f"duplicate video_id {vid!r} in manifest")
        seen.add(vid)
        entry["flow_path"] = str((base / entry["flow_path"]).resolve())
        entry["annotation_paths"] = [
            str((base / p).resolve()) for p in entry["annotation_paths"]
        ]
        missing = [
            p
            for p in [entry["flow_path"], *entry["annotation_paths"]]
            if not os.path.exists(p)
        ]
        if missing:
            raise EgoEngageError(f"manifest references missing files: {missing}")
    return doc


def _video_eval_len(flow_path: str, eval_hz: float) -> int:
    _, _, fps, frame_count = flowgrid.read_flow_header(flow_path)
    return descriptor.eval_frame_count(frame_count, fps, eval_hz)


def _entry_track(entry: dict, eval_hz: float) -> groundtruth.ConsensusTrack:
    records = [groundtruth.load_annotation_file(p) for p in entry["annotation_paths"]]
    video_len = _video_eval_len(entry["flow_path"], eval_hz)
    return groundtruth.aggregate_video(records, video_len)


# --- synth ---------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    config = {
        "n_videos": 4,
        "duration_sec": 300.0,
        "n_workers": 10,
        "boundary_jitter_sec": 1.0,
        "miss_prob": 0.1,
        "scenarios": list(DEFAULT_SCENARIOS),
        "recorders": list(DEFAULT_RECORDERS),
        "attention_ratio": synth.DEFAULT_ATTENTION_RATIO,
        "fps": flowgrid.DEFAULT_FPS,
        "eval_hz": 1.0,
    }
    if args.config:
        with open(args.config) as fh:
            user = json.load(fh)
        unknown = set(user) - set(config)
        if unknown:
            raise EgoEngageError(f"unknown synth config keys: {sorted(unknown)}")
        config.update(user)

    out = Path(args.out_dir)
    scenarios = list(config["scenarios"])
    recorders = list(config["recorders"])
    entries = []
    for i in range(int(config["n_videos"])):
        scenario = scenarios[i % len(scenarios)]
        recorder = recorders[i % len(recorders)]
        video_id = f"v{i:03d}_{scenario}_{recorder}"
        scen_cfg = synth.make_config(
            duration_sec=float(config["duration_sec"]),
            fps=float(config["fps"]),
            eval_hz=float(config["eval_hz"]),
            attention_ratio=float(config["attention_ratio"]),
            seed=_derived_seed(args.seed, i, 0),
            video_id=video_id,
        )
        seq, track = synth.generate(scen_cfg)
        flow_rel = Path("flows") / f"{video_id}.eefl"
        _write_flow(seq, out / flow_rel)
        records = synth.perturb_annotations(
            track,
            n_workers=int(config["n_workers"]),
            boundary_jitter_sec=float(config["boundary_jitter_sec"]),
            miss_prob=float(config["miss_prob"]),
            seed=_derived_seed(args.seed, i, 1),
        )
        ann_rels = []
        for rec in records:
            rel = Path("annotations") / f"{video_id}.{rec.worker_id}.json"
            _write_json(groundtruth.record_to_dict(rec), out / rel)
            ann_rels.append(str(rel))
        entries.append(
            {
                "video_id": video_id,
                "flow_path": str(flow_rel),
                "annotation_paths": ann_rels,
                "scenario": scenario,
                "recorder": recorder,
            }
        )
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "eval_hz": float(config["eval_hz"]),
        "entries": entries,
    }
    _write_json(manifest, out / "manifest.json")
    print(f"wrote {len(entries)} videos under {out}")
    return 0


# --- aggregate -------------------------------------------------------------------

def cmd_aggregate(args: argparse.Namespace) -> int:
    manifest = load_manifest(Path(args.manifest))
    out = Path(args.out)
    for entry in manifest["entries"]:
        track = _entry_track(entry, manifest["eval_hz"])
        _write_json(groundtruth.track_to_dict(track), out / f"{entry['video_id']}.json")
    print(f"wrote {len(manifest['entries'])} consensus tracks under {out}")
    return 0


# --- train -----------------------------------------------------------------------

def _split_entries(entries: list[dict], split: str, hold_out: str) -> list[dict]:
    if split == "none":
        return list(entries)
    if not hold_out:
        raise EgoEngageError(f"--split {split} requires --hold-out")
    if split == "cross-recorder":
        return [e for e in entries if e["recorder"] != hold_out]
    if split == "cross-scenario":
        return [e for e in entries if e["scenario"] != hold_out]
    if split == "cross-both":
        if ":" not in hold_out:
            raise EgoEngageError("--split cross-both takes --hold-out RECORDER:SCENARIO")
        recorder, scenario = hold_out.split(":", 1)
        return [
            e
            for e in entries
            if e["recorder"] != recorder and e["scenario"] != scenario
        ]
    raise EgoEngageError(f"unknown split {split!r}")


def _pipeline_config(args: argparse.Namespace, eval_hz: float) -> pipeline.PipelineConfig:
    forest = ForestParams(n_trees=args.trees)
    return pipeline.PipelineConfig(
        sigma_seconds=args.sigma,
        eval_hz=eval_hz,
        min_len=args.min_len,
        positive_ratio=args.ratio,
        frame_forest=forest,
        interval_forest=forest,
        frame_seed=_derived_seed(args.seed, 1),
        interval_seed=_derived_seed(args.seed, 2),
        n_jobs=_worker_cap(args.jobs),
    )


def cmd_train(args: argparse.Namespace) -> int:
    manifest = load_manifest(Path(args.manifest))
    chosen = _split_entries(manifest["entries"], args.split, args.hold_out)
    if not chosen:
        raise EgoEngageError("training split is empty")
    eval_hz = manifest["eval_hz"]
    videos = []
    for entry in chosen:
        seq = flowgrid.read_flow_file(entry["flow_path"], video_id=entry["video_id"])
        videos.append((seq, _entry_track(entry, eval_hz)))
    config = _pipeline_config(args, eval_hz)
    model = pipeline.train(videos, config)
    path = Path(args.model_out)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    pipeline.save_model(model, tmp)
    os.replace(tmp, path)
    print(f"trained on {len(videos)} videos -> {path}")
    return 0


# --- detect ------------------------------------------------------------------------

def cmd_detect(args: argparse.Namespace) -> int:
    model = pipeline.load_model(args.model)
    if args.ratio is not None:
        model = pipeline.with_positive_ratio(model, args.ratio)
    video_id = Path(args.flow).stem
    seq = flowgrid.read_flow_file(args.flow, video_id=video_id)
    result = pipeline.detect(model, seq)
    _write_json(result.to_dict(), Path(args.out))
    print(
        f"{video_id}: {len(result.predictions)} intervals at "
        f"threshold {result.threshold_used:.4f}"
    )
    return 0


# --- eval --------------------------------------------------------------------------

def _read_intervals_doc(path: str) -> dict:
    """Normalize a detection / consensus / random-baseline file to
    {video_len, sets: [IntervalSet, ...]} (multiple sets only for rep files)."""
    with open(path) as fh:
        doc = json.load(fh)
    if "reps" in doc:
        sets = [IntervalSet.from_list(rep["predictions"]) for rep in doc["reps"]]
        video_len = int(doc["video_len"])
    elif "predictions" in doc:
        sets = [IntervalSet.from_list(doc["predictions"])]
        video_len = len(doc["frame_conf"])
    elif "gt" in doc:
        sets = [IntervalSet.from_list(doc["gt"])]
        video_len = len(doc["votes"])
    else:
        raise EgoEngageError(f"{path}: not a detection, consensus, or baseline file")
    return {"video_len": video_len, "sets": sets}


def _average_reports(reports: list[metrics.MetricReport]) -> metrics.MetricReport:
    def mean(vals):
        return float(np.mean(vals))

    def mean_prf(items):
        return metrics.PrecisionRecallF1(
            precision=mean([i.precision for i in items]),
            recall=mean([i.recall for i in items]),
            f1=mean([i.f1 for i in items]),
        )

    curve = tuple(
        (tol, mean([r.startpoint_curve[i][1] for r in reports]))
        for i, (tol, _) in enumerate(reports[0].startpoint_curve)
    )
    return metrics.MetricReport(
        frame_f1=mean([r.frame_f1 for r in reports]),
        boundary=mean_prf([r.boundary for r in reports]),
        presence=mean_prf([r.presence for r in reports]),
        startpoint_curve=curve,
    )


def cmd_eval(args: argparse.Namespace) -> int:
    tolerances = [float(t) for t in args.tolerances.split(",") if t.strip()]
    pred_doc = _read_intervals_doc(args.pred)
    gt_doc = _read_intervals_doc(args.gt)
    if len(gt_doc["sets"]) != 1:
        raise EgoEngageError("--gt must contain a single interval set")
    gt_set = gt_doc["sets"][0]
    video_len = max(pred_doc["video_len"], gt_doc["video_len"])
    reports = [
        metrics.evaluate_detection(p, gt_set, video_len, tolerances_sec=tolerances)
        for p in pred_doc["sets"]
    ]
    report = reports[0] if len(reports) == 1 else _average_reports(reports)
    out = Path(args.out)
    _write_json(report.to_dict(), out)
    curve_path = Path(args.curve_out) if args.curve_out else out.with_suffix(".csv")
    report.write_curve_csv(curve_path)
    print(
        f"frame F1 {report.frame_f1:.3f}  boundary F1 {report.boundary.f1:.3f}  "
        f"presence F1 {report.presence.f1:.3f}"
    )
    return 0


# --- baseline -----------------------------------------------------------------------

def cmd_baseline(args: argparse.Namespace) -> int:
    if args.method == "motion":
        if not args.flow:
            raise EgoEngageError("--method motion requires --flow")
        video_id = Path(args.flow).stem
        seq = flowgrid.read_flow_file(args.flow, video_id=video_id)
        smoothed = flowgrid.smooth_temporal(seq, args.sigma)
        conf = pipeline.baseline_motion_magnitude(smoothed, args.eval_hz)
        threshold = pipeline.calibrate_threshold(conf, args.ratio)
        preds = metrics.frames_to_intervals(conf > threshold, args.min_len)
        result = pipeline.DetectionResult(
            video_id=video_id,
            eval_hz=args.eval_hz,
            frame_conf=conf,
            scored_proposals=(),
            predictions=preds,
            threshold_used=threshold,
        )
        _write_json(result.to_dict(), Path(args.out))
        print(f"{video_id}: motion baseline, {len(preds)} intervals")
        return 0

    # prior-informed random baseline
    if not args.prior_from:
        raise EgoEngageError("--method random requires --prior-from")
    tracks = [groundtruth.load_consensus_file(p) for p in args.prior_from]
    prior = pipeline.GroundTruthPrior.from_tracks(tracks)
    if args.video_len is None:
        raise EgoEngageError("--method random requires --video-len")
    reps = pipeline.baseline_random(
        args.video_len, prior, n_reps=args.reps, seed=args.seed
    )
    payload = {
        "schema": RANDOM_BASELINE_SCHEMA,
        "video_id": args.video_id,
        "eval_hz": args.eval_hz,
        "video_len": args.video_len,
        "reps": [{"predictions": rep.to_list()} for rep in reps],
    }
    _write_json(payload, Path(args.out))
    print(f"random baseline: {args.reps} repetitions")
    return 0


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egoengage",
        description="Detect intervals of heightened first-person engagement "
        "in egocentric video from grid optical-flow motion cues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic flow, annotations, manifest")
    p.add_argument("--config", help="JSON file overriding the default scenario config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("aggregate", help="majority-vote consensus per video")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_aggregate)

    p = sub.add_parser("train", help="train the two-stage engagement model")
    p.add_argument("--manifest", required=True)
    p.add_argument(
        "--split",
        choices=["cross-recorder", "cross-scenario", "cross-both", "none"],
        default="none",
    )
    p.add_argument(
        "--hold-out",
        default="",
        help="recorder, scenario, or RECORDER:SCENARIO excluded from training",
    )
    p.add_argument("--model-out", required=True)
    p.add_argument("--trees", type=int, default=2400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--ratio", type=float, default=pipeline.DEFAULT_POSITIVE_RATIO)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("detect", help="run detection on one flow file")
    p.add_argument("--model", required=True)
    p.add_argument("--flow", required=True)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--tolerances", default="1,2,3,4,5,6,7,8,9,10")
    p.add_argument("--out", required=True)
    p.add_argument("--curve-out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("baseline", help="motion-magnitude or random baseline")
    p.add_argument("--method", choices=["motion", "random"], required=True)
    p.add_argument("--flow")
    p.add_argument("--sigma", type=float, default=2.0)
    p.add_argument("--ratio", type=float, default=pipeline.DEFAULT_POSITIVE_RATIO)
    p.add_argument("--eval-hz", type=float, default=1.0)
    p.add_argument("--min-len", type=int, default=1)
    p.add_argument("--prior-from", nargs="+", help="consensus JSON files")
    p.add_argument("--video-len", type=int, default=None)
    p.add_argument("--video-id", default="random")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_baseline)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (EgoEngageError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
