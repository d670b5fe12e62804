import numpy as np
import pytest

from egoengage.errors import InconsistentSet, LengthMismatch
from egoengage.intervals import Interval, IntervalSet
from egoengage.metrics import (
    evaluate_detection,
    frame_f1,
    frames_to_intervals,
    interval_precision_recall,
    intervals_to_frames,
    presence_precision_recall,
    startpoint_f1,
)

from .oracles import (
    oracle_frame_f1,
    oracle_interval_pr,
    oracle_presence_pr,
    oracle_startpoint_f1,
    random_interval_set,
)


class TestFrameF1:
    def test_perfect(self):
        v = np.array([0, 1, 1, 0, 1])
        assert frame_f1(v, v) == 1.0

    def test_all_negative_prediction(self):
        assert frame_f1(np.zeros(5), np.array([0, 1, 1, 0, 0])) == 0.0

    def test_no_positives_anywhere(self):
        assert frame_f1(np.zeros(5), np.zeros(5)) == 0.0

    def test_half_overlap(self):
        gt = np.zeros(20)
        gt[0:10] = 1
        pred = np.zeros(20)
        pred[5:15] = 1
        assert frame_f1(pred, gt) == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            frame_f1(np.zeros(3), np.zeros(4))


class TestIntervalPR:
    def test_identical(self):
        s = [Interval(0, 5), Interval(10, 12)]
        assert interval_precision_recall(s, s) == (1.0, 1.0)

    def test_spec_case_covered(self):
        # overlap 6 > half of |p|=8 and > half of |g|=10
        assert interval_precision_recall([Interval(4, 12)], [Interval(0, 10)]) == (1.0, 1.0)

    def test_spec_case_uncovered(self):
        assert interval_precision_recall([Interval(8, 20)], [Interval(0, 10)]) == (0.0, 0.0)

    def test_empty_conventions(self):
        assert interval_precision_recall([], []) == (1.0, 1.0)
        assert interval_precision_recall([], [Interval(0, 3)]) == (0.0, 0.0)
        assert interval_precision_recall([Interval(0, 3)], []) == (0.0, 0.0)

    def test_inconsistent_rejected(self):
        with pytest.raises(InconsistentSet):
            interval_precision_recall([Interval(0, 5), Interval(4, 8)], [])

    def test_order_invariance(self):
        a = [Interval(10, 14), Interval(0, 5)]
        b = [Interval(0, 5), Interval(10, 14)]
        gt = [Interval(1, 4), Interval(11, 13)]
        assert interval_precision_recall(a, gt) == interval_precision_recall(b, gt)


class TestPresence:
    def test_any_overlap_counts(self):
        assert presence_precision_recall([Interval(8, 20)], [Interval(0, 10)]) == (1.0, 1.0)

    def test_disjoint(self):
        assert presence_precision_recall([Interval(20, 30)], [Interval(0, 10)]) == (0.0, 0.0)

    def test_dominates_boundary(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            P = random_interval_set(rng, 60, 5)
            G = random_interval_set(rng, 60, 5)
            bp, br = interval_precision_recall(P, G)
            pp, pr = presence_precision_recall(P, G)
            assert pp >= bp and pr >= br


class TestStartpoint:
    def test_single_pair_tolerance(self):
        assert startpoint_f1([103], [100], 2.0) == 0.0
        assert startpoint_f1([103], [100], 3.0) == 1.0

    def test_perfect_zero_tolerance(self):
        assert startpoint_f1([5, 20], [5, 20], 0.0) == 1.0

    def test_one_to_one(self):
        # two predictions near one gt start: only one can match
        f1 = startpoint_f1([9, 11], [10], 2.0)
        assert f1 == pytest.approx(2 * 0.5 * 1.0 / 1.5)

    def test_empty_conventions(self):
        assert startpoint_f1([], [], 1.0) == 1.0
        assert startpoint_f1([1], [], 1.0) == 0.0
        assert startpoint_f1([], [1], 1.0) == 0.0

    def test_monotone_in_tolerance(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            preds = sorted(rng.integers(0, 100, size=rng.integers(0, 6)))
            gts = sorted(rng.integers(0, 100, size=rng.integers(0, 6)))
            vals = [startpoint_f1(preds, gts, t) for t in range(0, 12)]
            assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_eval_hz_scaling(self):
        # 2 Hz grid: 6 frames apart = 3 seconds
        assert startpoint_f1([106], [100], 2.9, eval_hz=2.0) == 0.0
        assert startpoint_f1([106], [100], 3.0, eval_hz=2.0) == 1.0


class TestFramesToIntervals:
    def test_hand_case(self):
        got = frames_to_intervals(np.array([1, 1, 0, 1]))
        assert list(got) == [Interval(0, 2), Interval(3, 4)]

    def test_all_zero(self):
        assert len(frames_to_intervals(np.zeros(6))) == 0

    def test_all_one(self):
        assert list(frames_to_intervals(np.ones(5))) == [Interval(0, 5)]

    def test_min_len(self):
        got = frames_to_intervals(np.array([1, 0, 1, 1, 0, 1]), min_len=2)
        assert list(got) == [Interval(2, 4)]

    def test_roundtrip_with_membership(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            ivs = random_interval_set(rng, 50, 6)
            frames = intervals_to_frames(ivs, 50)
            assert list(frames_to_intervals(frames)) == sorted(ivs)


class TestRecallMonotonicity:
    def test_extension_never_decreases_recall(self):
        rng = np.random.default_rng(7)
        trials = 0
        while trials < 200:
            G = random_interval_set(rng, 80, 5)
            P = random_interval_set(rng, 80, 5)
            gaps = [b.start - a.end for a, b in zip(sorted(P), sorted(P)[1:])]
            slack = min(gaps) if gaps else 10
            if slack < 1:
                continue
            k = int(rng.integers(1, slack + 1))
            extended = [Interval(p.start, p.end + k) for p in sorted(P)[:-1]]
            if sorted(P):
                last = sorted(P)[-1]
                extended.append(Interval(last.start, last.end + k))
            _, r0 = interval_precision_recall(P, G)
            _, r1 = interval_precision_recall(extended, G)
            assert r1 >= r0 - 1e-12
            trials += 1


class TestOracleAgreement:
    def test_small_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            video_len = int(rng.integers(5, 100))
            P = random_interval_set(rng, video_len, 8)
            G = random_interval_set(rng, video_len, 8)
            assert interval_precision_recall(P, G) == oracle_interval_pr(P, G)
            assert presence_precision_recall(P, G) == oracle_presence_pr(P, G)
            pf = intervals_to_frames(P, video_len)
            gf = intervals_to_frames(G, video_len)
            assert frame_f1(pf, gf) == oracle_frame_f1(pf, gf)
            tol = float(rng.integers(0, 10))
            ps = [p.start for p in P]
            gs = [g.start for g in G]
            assert startpoint_f1(ps, gs, tol) == oracle_startpoint_f1(ps, gs, tol)


class TestEvaluateDetection:
    def test_report_fields(self):
        report = evaluate_detection(
            [Interval(0, 10)], [Interval(2, 12)], 30, tolerances_sec=[1, 2, 3]
        )
        assert report.boundary.precision == 1.0
        assert report.presence.f1 == 1.0
        assert len(report.startpoint_curve) == 3
        d = report.to_dict()
        assert set(d) == {"frame_f1", "boundary", "presence", "startpoint_curve"}

    def test_curve_csv(self, tmp_path):
        report = evaluate_detection([Interval(0, 3)], [Interval(0, 3)], 10)
        path = tmp_path / "curve.csv"
        report.write_curve_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "tolerance_sec,f1"
        assert len(lines) == 11


class TestIntervalSet:
    def test_sorts(self):
        s = IntervalSet.of([Interval(5, 8), Interval(0, 2)])
        assert [iv.start for iv in s] == [0, 5]

    def test_rejects_overlap(self):
        with pytest.raises(InconsistentSet):
            IntervalSet.of([Interval(0, 5), Interval(4, 6)])

    def test_adjacent_ok(self):
        s = IntervalSet.of([Interval(0, 5), Interval(5, 8)])
        assert len(s) == 2
