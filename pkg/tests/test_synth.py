import io

import numpy as np
import pytest

from egoengage import flowgrid
from egoengage.groundtruth import aggregate_video
from egoengage.metrics import interval_precision_recall
from egoengage.synth import (
    SCENARIO_RATIOS,
    ScenarioConfig,
    generate,
    lognormal_from_median_iqr,
    make_config,
    perturb_annotations,
)


class TestLengthDistribution:
    def test_median_iqr_recovered(self):
        mu, sigma = lognormal_from_median_iqr(11.3, 17.6)
        rng = np.random.default_rng(0)
        samples = rng.lognormal(mu, sigma, size=200_000)
        q25, q50, q75 = np.percentile(samples, [25, 50, 75])
        assert q50 == pytest.approx(11.3, rel=0.02)
        assert q75 - q25 == pytest.approx(17.6, rel=0.03)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            lognormal_from_median_iqr(0, 1)


class TestGenerate:
    def test_deterministic(self):
        cfg = make_config(duration_sec=120.0, seed=5)
        s1, t1 = generate(cfg)
        s2, t2 = generate(cfg)
        assert np.array_equal(s1.to_array(), s2.to_array())
        assert t1.gt == t2.gt

    def test_attention_ratio_hit(self):
        for seed in range(4):
            cfg = make_config(duration_sec=600.0, seed=seed)
            _, track = generate(cfg)
            ratio = track.label_vector().mean()
            assert abs(ratio - 0.438) < 0.05

    def test_engaged_quieter_than_walking(self):
        cfg = make_config(duration_sec=600.0, seed=1)
        seq, track = generate(cfg)
        mags = np.linalg.norm(seq.to_array(), axis=3).mean(axis=(1, 2))
        native_labels = np.repeat(track.label_vector(), 15)[: len(mags)]
        assert mags[native_labels].mean() < mags[~native_labels].mean() - 0.5

    def test_segments_separated(self):
        cfg = make_config(duration_sec=600.0, seed=2)
        _, track = generate(cfg)
        for a, b in zip(track.gt, track.gt[1:]):
            assert b.start - a.end >= 2

    def test_flow_finite_and_shaped(self):
        cfg = make_config(duration_sec=60.0, seed=3)
        seq, _ = generate(cfg)
        arr = seq.to_array()
        assert arr.shape == (900, 12, 16, 2)
        assert np.isfinite(arr).all()

    def test_votes_unanimous(self):
        cfg = make_config(duration_sec=120.0, seed=4, n_annotators=7)
        _, track = generate(cfg)
        lab = track.label_vector()
        assert np.all(track.votes[lab] == 7)
        assert np.all(track.votes[~lab] == 0)

    def test_eefl_roundtrip_exact(self):
        cfg = make_config(duration_sec=60.0, seed=6)
        seq, _ = generate(cfg)
        buf = io.BytesIO()
        flowgrid.write_flow(seq, buf)
        buf.seek(0)
        back = flowgrid.ingest_flow(buf, video_id=seq.video_id)
        assert np.array_equal(back.to_array(), seq.to_array())

    def test_scenario_presets(self):
        cfg = make_config(scenario="museum", duration_sec=300.0, seed=0)
        assert cfg.attention_ratio == SCENARIO_RATIOS["museum"]
        _, track = generate(cfg)
        assert abs(track.label_vector().mean() - 0.580) < 0.05

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ScenarioConfig(duration_sec=30.0)
        with pytest.raises(ValueError):
            ScenarioConfig(attention_ratio=0.0)


class TestPerturbAnnotations:
    def test_no_jitter_reproduces_gt(self):
        cfg = make_config(duration_sec=300.0, seed=7)
        _, track = generate(cfg)
        records = perturb_annotations(track, n_workers=5, boundary_jitter_sec=0.0, miss_prob=0.0, seed=1)
        assert len(records) == 5
        rebuilt = aggregate_video(records, track.video_len)
        assert rebuilt.gt == track.gt

    def test_miss_all_gives_empty(self):
        cfg = make_config(duration_sec=120.0, seed=8)
        _, track = generate(cfg)
        records = perturb_annotations(track, 3, 0.0, 1.0, seed=2)
        assert all(len(r.intervals) == 0 for r in records)

    def test_deterministic(self):
        cfg = make_config(duration_sec=120.0, seed=9)
        _, track = generate(cfg)
        a = perturb_annotations(track, 4, 1.0, 0.2, seed=3)
        b = perturb_annotations(track, 4, 1.0, 0.2, seed=3)
        assert a == b

    def test_records_satisfy_invariants(self):
        cfg = make_config(duration_sec=300.0, seed=10)
        _, track = generate(cfg)
        records = perturb_annotations(track, 10, 2.0, 0.3, seed=4)
        for r in records:
            for m in r.intervals:
                assert 0 <= m.start < m.end <= track.video_len
            for a, b in zip(r.intervals, r.intervals[1:]):
                assert a.end <= b.start

    def test_noisy_consensus_recovers_gt(self):
        cfg = make_config(duration_sec=600.0, seed=11)
        _, track = generate(cfg)
        records = perturb_annotations(track, 10, 1.0, 0.2, seed=5)
        rebuilt = aggregate_video(records, track.video_len)
        p, r = interval_precision_recall(rebuilt.gt, track.gt)
        f1 = 2 * p * r / (p + r)
        assert f1 >= 0.8
