"""Brute-force reference implementations used to cross-check the metrics.

Everything here works on explicit frame sets and exhaustive matching, fully
independent of the arithmetic used in the package.
"""

from __future__ import annotations

import numpy as np

from egoengage.intervals import Interval


def frames_of(iv: Interval) -> set[int]:
    return set(range(iv.start, iv.end))


def oracle_frame_f1(pred: np.ndarray, gt: np.ndarray) -> float:
    tp = fp = fn = 0
    for p, g in zip(pred, gt):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif g and not p:
            fn += 1
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def oracle_interval_pr(preds, gts) -> tuple[float, float]:
    preds, gts = list(preds), list(gts)
    p_hit = 0
    for p in preds:
        pf = frames_of(p)
        if any(len(pf & frames_of(g)) > len(pf) / 2 for g in gts):
            p_hit += 1
    g_hit = 0
    for g in gts:
        gf = frames_of(g)
        if any(len(gf & frames_of(p)) > len(gf) / 2 for p in preds):
            g_hit += 1
    precision = p_hit / len(preds) if preds else (1.0 if not gts else 0.0)
    recall = g_hit / len(gts) if gts else (1.0 if not preds else 0.0)
    return precision, recall


def oracle_presence_pr(preds, gts) -> tuple[float, float]:
    preds, gts = list(preds), list(gts)
    p_hit = sum(
        1 for p in preds if any(frames_of(p) & frames_of(g) for g in gts)
    )
    g_hit = sum(
        1 for g in gts if any(frames_of(g) & frames_of(p) for p in preds)
    )
    precision = p_hit / len(preds) if preds else (1.0 if not gts else 0.0)
    recall = g_hit / len(gts) if gts else (1.0 if not preds else 0.0)
    return precision, recall


def oracle_startpoint_f1(pred_starts, gt_starts, tolerance_sec, eval_hz=1.0) -> float:
    """Kuhn's augmenting-path maximum bipartite matching as the reference."""
    preds, gts = list(pred_starts), list(gt_starts)
    if not preds and not gts:
        return 1.0
    if not preds or not gts:
        return 0.0
    adj = [
        [j for j, g in enumerate(gts) if abs(p - g) / eval_hz <= tolerance_sec]
        for p in preds
    ]
    match_of_gt: dict[int, int] = {}

    def try_assign(i: int, seen: set[int]) -> bool:
        for j in adj[i]:
            if j in seen:
                continue
            seen.add(j)
            if j not in match_of_gt or try_assign(match_of_gt[j], seen):
                match_of_gt[j] = i
                return True
        return False

    matches = sum(1 for i in range(len(preds)) if try_assign(i, set()))
    precision = matches / len(preds)
    recall = matches / len(gts)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def random_interval_set(rng: np.random.Generator, video_len: int, max_intervals: int):
    """Random consistent interval set within [0, video_len)."""
    n = int(rng.integers(0, max_intervals + 1))
    n = min(n, video_len // 2)
    marks = sorted(rng.choice(video_len + 1, size=2 * n, replace=False)) if n else []
    out = []
    for a, b in zip(marks[0::2], marks[1::2]):
        if b > a:
            out.append(Interval(int(a), int(b)))
    return out
