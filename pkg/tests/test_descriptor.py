import numpy as np
import pytest

from egoengage import flowgrid
from egoengage.descriptor import (
    PyramidTable,
    descriptor_dim,
    eval_frame_count,
    frame_descriptor,
    neighbor_context,
    pyramid_descriptor,
    pyramid_dim,
)
from egoengage.errors import IndexOutOfRange, OutOfRange
from egoengage.intervals import Interval


def constant_sequence(value=(1.0, 0.0), n=30, fps=15.0):
    arr = np.zeros((n, 12, 16, 2))
    arr[..., 0] = value[0]
    arr[..., 1] = value[1]
    return flowgrid.FlowSequence.from_array("c", fps, arr)


class TestFrameDescriptor:
    def test_dimension_default_grid(self):
        assert descriptor_dim(16, 12) == 388

    def test_constant_flow_closed_form(self):
        seq = constant_sequence((1.0, 0.0))
        d = frame_descriptor(seq, 1)
        assert d.values.shape == (388,)
        assert np.array_equal(d.values[:384:2], np.ones(192))  # dx per cell
        assert np.array_equal(d.values[1:384:2], np.zeros(192))  # dy per cell
        assert np.array_equal(d.values[384:], [1.0, 0.0, 0.0, 0.0])

    def test_half_cells_stats(self):
        arr = np.zeros((15, 12, 16, 2))
        arr[:, :6, :, 0] = 2.0  # half the cells move (2, 0)
        seq = flowgrid.FlowSequence.from_array("h", 15.0, arr)
        d = frame_descriptor(seq, 0)
        mean_dx, mean_dy, std_dx, std_dy = d.values[384:]
        assert mean_dx == 1.0
        assert std_dx == 1.0
        assert mean_dy == 0.0 and std_dy == 0.0

    def test_out_of_range(self):
        seq = constant_sequence(n=15)
        with pytest.raises(IndexOutOfRange):
            frame_descriptor(seq, 1)  # native 15 >= 15
        with pytest.raises(IndexOutOfRange):
            frame_descriptor(seq, -1)

    def test_eval_frame_count(self):
        assert eval_frame_count(9000, 15.0) == 600
        assert eval_frame_count(15, 15.0) == 1
        assert eval_frame_count(16, 15.0) == 2
        assert eval_frame_count(0, 15.0) == 0


class TestNeighborContext:
    def test_interior(self):
        before, after = neighbor_context(Interval(10, 20), 100)
        assert (before.start, before.end) == (0, 10)
        assert (after.start, after.end) == (20, 30)

    def test_left_edge_duplicates_center(self):
        before, after = neighbor_context(Interval(0, 10), 100)
        assert before == Interval(0, 10)
        assert after == Interval(10, 20)

    def test_right_edge_duplicates_center(self):
        before, after = neighbor_context(Interval(90, 100), 100)
        assert before == Interval(80, 90)
        assert after == Interval(90, 100)

    def test_partial_clip(self):
        before, after = neighbor_context(Interval(3, 10), 12)
        assert before == Interval(0, 3)
        assert after == Interval(10, 12)


class TestPyramid:
    def test_dimension(self):
        assert pyramid_dim(388) == 3 * 7 * 2 * 388

    def test_constant_frames(self):
        frames = np.tile(np.arange(5.0), (20, 1))  # constant across time
        d = pyramid_descriptor(frames, Interval(4, 12))
        D = 5
        block = d.values.reshape(3, 7, 2, D)
        for ctx in range(3):
            for sub in range(7):
                assert np.array_equal(block[ctx, sub, 0], np.arange(5.0))
                assert np.array_equal(block[ctx, sub, 1], np.zeros(5))

    def test_length_one_interval(self):
        rng = np.random.default_rng(0)
        frames = rng.integers(0, 10, size=(10, 3)).astype(float)
        d = pyramid_descriptor(frames, Interval(5, 6))
        center = d.values.reshape(3, 7, 2, 3)[1]
        for sub in range(7):
            assert np.array_equal(center[sub, 0], frames[5])
            assert np.array_equal(center[sub, 1], np.zeros(3))

    def test_hand_computed_stats(self):
        frames = np.array([[0.0], [2.0], [4.0], [10.0]])
        d = pyramid_descriptor(frames, Interval(0, 4))
        center = d.values.reshape(3, 7, 2, 1)[1, :, :, 0]
        whole_mean, whole_var = center[0]
        assert whole_mean == np.mean([0, 2, 4, 10])
        assert whole_var == np.var([0, 2, 4, 10])
        assert center[1][0] == 1.0 and center[1][1] == 1.0  # first half
        assert center[2][0] == 7.0 and center[2][1] == 9.0  # second half
        # quarters are single frames
        for q, v in zip(range(3, 7), [0.0, 2.0, 4.0, 10.0]):
            assert center[q][0] == v and center[q][1] == 0.0

    def test_split_ranges_cover_lengths(self):
        from egoengage.descriptor import _pyramid_ranges

        for length in range(1, 30):
            ranges = _pyramid_ranges(10, 10 + length)
            assert len(ranges) == 7
            assert ranges[0] == (10, 10 + length)
            for a, b in ranges:
                assert 10 <= a < b <= 10 + length
            if length >= 4:
                halves = ranges[1:3]
                assert halves[0][1] == halves[1][0]
                quarters = ranges[3:]
                for (a, b), (c, d2) in zip(quarters, quarters[1:]):
                    assert b == c

    def test_duplication_invariance(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            video_len = int(rng.integers(20, 60))
            frames = rng.integers(-5, 6, size=(video_len, 4)).astype(float)
            length = int(rng.choice([4, 8, 12, 16]))
            lo = length  # keep full-length contexts so splits stay aligned
            hi = video_len - 2 * length
            if hi < lo:
                continue
            start = int(rng.integers(lo, hi + 1))
            iv = Interval(start, start + length)
            doubled = np.repeat(frames, 2, axis=0)
            iv2 = Interval(2 * iv.start, 2 * iv.end)
            d1 = pyramid_descriptor(frames, iv)
            d2 = pyramid_descriptor(doubled, iv2)
            assert np.array_equal(d1.values, d2.values)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        frames = rng.normal(size=(40, 6))
        a = pyramid_descriptor(frames, Interval(5, 25)).values
        b = pyramid_descriptor(frames, Interval(5, 25)).values
        assert np.array_equal(a, b)

    def test_variance_nonnegative_zero_iff_identical(self):
        rng = np.random.default_rng(2)
        frames = rng.integers(0, 4, size=(32, 5)).astype(float)
        table = PyramidTable(frames)
        for start, end in [(0, 32), (3, 9), (10, 11), (20, 31)]:
            vals = table.describe(Interval(start, end)).reshape(3, 7, 2, 5)
            variances = vals[:, :, 1, :]
            assert (variances >= 0).all()
        # identical rows inside the interval -> center variance exactly 0
        frames[8:16] = frames[8]
        table = PyramidTable(frames)
        center = table.describe(Interval(8, 16)).reshape(3, 7, 2, 5)[1]
        assert np.array_equal(center[:, 1, :], np.zeros((7, 5)))

    def test_errors(self):
        frames = np.zeros((10, 3))
        with pytest.raises(OutOfRange):
            pyramid_descriptor(frames, Interval(5, 11))
        # the Interval type itself rejects empty ranges
        with pytest.raises(ValueError):
            Interval(5, 5)

    def test_matches_direct_slicing(self):
        rng = np.random.default_rng(3)
        frames = rng.normal(size=(50, 4))
        iv = Interval(12, 36)
        table = PyramidTable(frames)
        got = table.describe(iv).reshape(3, 7, 2, 4)
        from egoengage.descriptor import _pyramid_ranges, neighbor_context

        before, after = neighbor_context(iv, 50)
        for ctx_i, ctx in enumerate([before, iv, after]):
            for sub_i, (a, b) in enumerate(_pyramid_ranges(ctx.start, ctx.end)):
                assert np.allclose(got[ctx_i, sub_i, 0], frames[a:b].mean(axis=0), atol=1e-9)
                assert np.allclose(got[ctx_i, sub_i, 1], frames[a:b].var(axis=0), atol=1e-9)
