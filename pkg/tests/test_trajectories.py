"""Trajectory parsing, centering, windowing augmentation, and window files."""

import numpy as np
import pytest

from conftest import decode_indices, index_coded_trajectory
from cutscore.errors import (
    DuplicateFrameIndex,
    EmptyDataset,
    HeterogeneousWindows,
    MalformedRow,
    NonUnitQuaternion,
    TooShort,
    TooShortForWindow,
)
from cutscore.trajectories import (
    TRAJECTORY_HEADER,
    Window,
    augment_dataset,
    center_window,
    load_dataset,
    parse_trajectory,
    read_windows,
    sample_and_augment,
    write_trajectory,
    write_windows,
)


def write_csv(path, rows, header=TRAJECTORY_HEADER):
    path.write_text("\n".join([header] + rows) + "\n")


def simple_rows(m, quat=(0.0, 0.0, 0.0, 1.0)):
    q = ",".join(str(v) for v in quat)
    return [f"{i},{i * 0.01},0.0,0.0,{q}" for i in range(m)]


class TestParseTrajectory:
    def test_well_formed_200_rows(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, simple_rows(200))
        t = parse_trajectory(f)
        assert len(t.frames) == 200
        assert t.id == "t"
        assert t.label is None

    def test_zero_quaternion_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, simple_rows(5, quat=(0, 0, 0, 0)))
        with pytest.raises(NonUnitQuaternion):
            parse_trajectory(f)

    def test_mild_norm_error_renormalized(self, tmp_path):
        # norm 1.005 is inside the 1e-2 gate and must come out exactly unit
        f = tmp_path / "t.csv"
        write_csv(f, simple_rows(10, quat=(0.0, 0.0, 0.0, 1.005)))
        t = parse_trajectory(f)
        norms = np.array([np.linalg.norm(fr.rotation) for fr in t.frames])
        assert np.all(np.abs(norms - 1.0) <= 1e-12)

    def test_norm_beyond_tolerance_rejected(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, simple_rows(10, quat=(0.0, 0.0, 0.0, 1.02)))
        with pytest.raises(NonUnitQuaternion):
            parse_trajectory(f)

    def test_wrong_column_count(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, ["0,1,2,3"])
        with pytest.raises(MalformedRow):
            parse_trajectory(f)

    def test_non_numeric_field(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, ["0,a,0,0,0,0,0,1", "1,0,0,0,0,0,0,1"])
        with pytest.raises(MalformedRow):
            parse_trajectory(f)

    def test_missing_header(self, tmp_path):
        f = tmp_path / "t.csv"
        f.write_text("\n".join(simple_rows(5)) + "\n")
        with pytest.raises(MalformedRow):
            parse_trajectory(f)

    def test_duplicate_frame_index(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, ["0,0,0,0,0,0,0,1", "0,1,0,0,0,0,0,1", "1,2,0,0,0,0,0,1"])
        with pytest.raises(DuplicateFrameIndex):
            parse_trajectory(f)

    def test_single_frame_too_short(self, tmp_path):
        f = tmp_path / "t.csv"
        write_csv(f, simple_rows(1))
        with pytest.raises(TooShort):
            parse_trajectory(f)

    def test_frames_sorted_by_index(self, tmp_path):
        f = tmp_path / "t.csv"
        rows = simple_rows(5)
        write_csv(f, rows[::-1])
        t = parse_trajectory(f)
        assert [fr.index for fr in t.frames] == [0, 1, 2, 3, 4]


class TestCenterWindow:
    def make(self, offset):
        values = np.zeros((4, 7))
        values[:, 0] = np.arange(4) + offset[0]
        values[:, 1] = offset[1]
        values[:, 2] = offset[2]
        values[:, 6] = 1.0
        return Window(source_id="w", values=values, label=2)

    def test_first_translation_subtracted(self):
        w = self.make((1.0, 2.0, 3.0))
        out = center_window(w)
        assert np.array_equal(out.values[0, :3], np.zeros(3))
        assert np.array_equal(out.values[:, 0], np.arange(4.0))
        # rotation channels untouched
        assert np.array_equal(out.values[:, 3:], w.values[:, 3:])
        assert out.label == 2

    def test_already_centered_unchanged(self):
        w = self.make((0.0, 0.0, 0.0))
        assert np.array_equal(center_window(w).values, w.values)

    def test_constant_offset_invariance(self):
        a = center_window(self.make((0.5, -1.0, 2.0)))
        b = center_window(self.make((9.5, 3.0, -7.0)))
        assert np.array_equal(a.values, b.values)

    def test_idempotent_exactly(self):
        w = self.make((1.7, -0.3, 0.9))
        once = center_window(w)
        assert np.array_equal(center_window(once).values, once.values)


class TestSampleAndAugment:
    def test_window_count_200_64(self):
        t = index_coded_trajectory(200)
        assert len(sample_and_augment(t, 64, seed=0)) == 3

    def test_exact_fit_is_identity_subsample(self):
        t = index_coded_trajectory(64)
        (w,) = sample_and_augment(t, 64, seed=123)
        assert np.array_equal(decode_indices(w, 64), np.arange(64))

    def test_too_short_rejected(self):
        t = index_coded_trajectory(63)
        with pytest.raises(TooShortForWindow):
            sample_and_augment(t, 64, seed=0)

    def test_partition_laws_over_random_cases(self):
        # count, temporal order, no frame reuse, determinism
        rng = np.random.default_rng(11)
        for _ in range(150):
            n = int(rng.integers(2, 80))
            m = int(rng.integers(n, 4 * n + 1))
            seed = int(rng.integers(0, 2**31))
            t = index_coded_trajectory(m, label=3)
            windows = sample_and_augment(t, n, seed)
            assert len(windows) == m // n
            seen = []
            for w in windows:
                idx = decode_indices(w, m)
                assert np.all(np.diff(idx) > 0)
                assert w.label == 3
                seen.extend(idx.tolist())
            assert len(seen) == len(set(seen))
            assert set(seen) <= set(range(m))
            again = sample_and_augment(t, n, seed)
            for w1, w2 in zip(windows, again):
                assert np.array_equal(w1.values, w2.values)

    def test_windows_come_out_centered(self):
        t = index_coded_trajectory(130)
        for w in sample_and_augment(t, 64, seed=5):
            assert np.array_equal(w.values[0, :3], np.zeros(3))


class TestWindowFiles:
    def make_windows(self, count=3, n=8):
        rng = np.random.default_rng(42)
        return [
            Window(source_id=f"s{i}", values=rng.normal(size=(n, 7)), label=i % 6)
            for i in range(count)
        ]

    def test_file_layout(self, tmp_path):
        f = tmp_path / "w.csv"
        write_windows(self.make_windows(3, n=8), f)
        lines = f.read_text().splitlines()
        assert sum(1 for ln in lines if ln.startswith("#window ")) == 3
        assert len(lines) == 3 * (8 + 1)

    def test_empty_list_rejected(self, tmp_path):
        with pytest.raises(EmptyDataset):
            write_windows([], tmp_path / "w.csv")

    def test_heterogeneous_rejected(self, tmp_path):
        ws = self.make_windows(2)
        ws[1].values = ws[1].values[:-1]
        with pytest.raises(HeterogeneousWindows):
            write_windows(ws, tmp_path / "w.csv")

    def test_round_trip_exact(self, tmp_path):
        f = tmp_path / "w.csv"
        ws = self.make_windows(4)
        ws[2].label = None
        write_windows(ws, f)
        back = read_windows(f)
        assert len(back) == 4
        for a, b in zip(ws, back):
            assert np.array_equal(a.values, b.values)
            assert a.label == b.label
            assert a.source_id == b.source_id


class TestTrajectoryRoundTrip:
    def test_write_parse_exact_on_unit_quaternions(self, tmp_path):
        # quaternion with norm exactly 1.0 in floats survives renormalization
        rng = np.random.default_rng(3)
        m = 50
        t = index_coded_trajectory(m)
        for fr in t.frames:
            fr.translation = rng.normal(size=3)
            fr.rotation = np.array([0.5, -0.5, 0.5, 0.5])
        f = tmp_path / "t.csv"
        write_trajectory(t, f)
        back = parse_trajectory(f)
        for fa, fb in zip(t.frames, back.frames):
            assert fa.index == fb.index
            assert np.array_equal(fa.translation, fb.translation)
            assert np.array_equal(fa.rotation, fb.rotation)

    def test_write_parse_general_quaternions(self, tmp_path):
        # already-unit quaternions may move by an ulp under renormalization
        t = index_coded_trajectory(30)
        f = tmp_path / "t.csv"
        write_trajectory(t, f)
        back = parse_trajectory(f)
        for fa, fb in zip(t.frames, back.frames):
            assert np.array_equal(fa.translation, fb.translation)
            np.testing.assert_allclose(fa.rotation, fb.rotation, rtol=1e-15, atol=0)


class TestDataset:
    def test_manifest_load(self, tmp_path):
        for i in range(3):
            write_csv(tmp_path / f"t{i}.csv", simple_rows(10))
        (tmp_path / "labels.csv").write_text("file,label\nt0.csv,0\nt1.csv,5\nt2.csv,2\n")
        ts = load_dataset(tmp_path)
        assert [t.label for t in ts] == [0, 5, 2]

    def test_label_out_of_range(self, tmp_path):
        write_csv(tmp_path / "t0.csv", simple_rows(10))
        (tmp_path / "labels.csv").write_text("file,label\nt0.csv,6\n")
        from cutscore.errors import LabelOutOfRange

        with pytest.raises(LabelOutOfRange):
            load_dataset(tmp_path)

    def test_augment_dataset_skips_short(self, tmp_path):
        ts = [index_coded_trajectory(100, "a", 0), index_coded_trajectory(30, "b", 1)]
        windows, skipped = augment_dataset(ts, 64, seed=0)
        assert skipped == ["b"]
        assert {w.source_id for w in windows} == {"a"}

    def test_augment_dataset_deterministic(self):
        ts = [index_coded_trajectory(100, "a", 0), index_coded_trajectory(90, "b", 1)]
        w1, _ = augment_dataset(ts, 32, seed=9)
        w2, _ = augment_dataset(ts, 32, seed=9)
        assert all(np.array_equal(a.values, b.values) for a, b in zip(w1, w2))
